#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "asr/lm.h"

namespace asr::fixture {

inline std::vector<WordId> ids(const NGramLM& lm, const std::vector<std::string>& words) {
  std::vector<WordId> out;
  for (const auto& w : words) out.push_back(lm.resolve(w));
  return out;
}


struct BackoffQuery {
  std::vector<std::string> context;  // oldest first
  std::string word;
  double log10_prob;  // computed by hand from fixture.arpa
};

// Each expected value is the sum of the entries named in the comment.
inline const std::vector<BackoffQuery>& trigram_queries() {
  static const std::vector<BackoffQuery> q{
      {{"a"}, "b", -0.30103},               // a b
      {{"a"}, "c", -0.6},                   // bo(a) + c
      {{"<s>"}, "d", -1.4},                 // bo(<s>) + d
      {{"<s>", "a"}, "b", -0.1},            // <s> a b
      {{"a", "b"}, "c", -0.25},             // a b c
      {{"<s>", "a"}, "c", -0.9},            // bo(<s> a) + bo(a) + c
      {{"a", "b"}, "a", -0.95},             // bo(a b) + b a
      {{"b", "c"}, "</s>", -0.52},          // bo(b c) + c </s>
      {{"b", "c"}, "d", -1.37},             // bo(b c) + bo(c) + d
      {{"c", "b"}, "a", -0.8},              // c b absent: no weight; b a
      {{}, "b", -0.6},                      // unigram
      {{"d"}, "a", -0.4},                   // d has no backoff entry: a
  };
  return q;
}

struct SentenceQuery {
  std::vector<std::string> words;
  double log10_prob;
};

inline const std::vector<SentenceQuery>& trigram_sentences() {
  static const std::vector<SentenceQuery> q{
      {{}, -0.9},                    // bo(<s>) + </s>
      {{"a"}, -0.2 - 0.3 - 0.1 - 0.7},  // <s> a; bo(<s> a) + bo(a) + </s>
      {{"a", "b", "c"}, -0.2 - 0.1 - 0.25 - 0.52},
  };
  return q;
}

// For every node, the max unigram over words whose spelling extends the
// node's prefix, found by scanning the full word list.
inline bool in_subtree(const LexiconTrie& t, int node, int ancestor) {
  for (int at = node; at >= 0; at = t.nodes[static_cast<size_t>(at)].parent) {
    if (at == ancestor) return true;
  }
  return false;
}

inline std::vector<double> brute_force_smear(const LexiconTrie& t, const NGramLM& lm) {
  std::vector<double> out;
  for (size_t n = 0; n < t.nodes.size(); ++n) {
    LabelSequence prefix;
    for (int at = static_cast<int>(n); at != LexiconTrie::kRoot; at = t.nodes[static_cast<size_t>(at)].parent) {
      prefix.insert(prefix.begin(), t.nodes[static_cast<size_t>(at)].label);
    }
    double best = kNegInf<double>;
    for (size_t w = 0; w < t.words.size(); ++w) {
      const auto& sp = t.spellings[w];
      if (sp.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), sp.begin())) {
        best = std::max(best, lm.entry(std::vector<WordId>{lm.resolve(t.words[w])})->logprob);
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace asr::fixture
