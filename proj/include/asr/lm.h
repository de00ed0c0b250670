#pragma once

#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asr/alphabet.h"
#include "asr/types.h"

namespace asr {

/// ARPA values are log10; the decoder works in natural log.
inline constexpr double kLn10 = std::numbers::ln10;
inline double log10_to_ln(double v) { return v * kLn10; }

class ArpaParseError : public Error {
 public:
  ArpaParseError(int line, const std::string& what)
      : Error("ARPA line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

using WordId = int;

struct VectorHash {
  size_t operator()(const std::vector<WordId>& v) const noexcept {
    size_t h = 1469598103934665603ull;
    for (WordId w : v) h = (h ^ static_cast<size_t>(static_cast<uint32_t>(w))) * 1099511628211ull;
    return h;
  }
};

struct NGramEntry {
  double logprob = 0.0;           // log10
  std::optional<double> backoff;  // log10; absent means 0
};

enum class OovPolicy { kStrict, kUnk };

/// Katz backoff n-gram model read from ARPA text.
///
/// Grammar accepted by load_arpa / written by save_arpa:
///   [free text before \data\ is ignored]
///   \data\   (header line)
///   ngram <k>=<count>        for k = 1..n, in order
///   \<k>-grams:              for k = 1..n, in order, each exactly once
///   <log10 prob> <w_1> ... <w_k> [<log10 backoff>]   count lines each
///   \end\    (terminator line)
/// Fields are separated by tabs or spaces; blank lines are ignored. Every
/// word of a higher-order entry must appear among the 1-grams.
class NGramLM {
 public:
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";
  static constexpr std::string_view kUnk = "<unk>";

  static NGramLM parse_arpa(std::string_view text);
  static NGramLM load_arpa(const std::string& path);
  std::string to_arpa() const;
  void save_arpa(const std::string& path) const;

  int order() const { return static_cast<int>(tables_.size()); }
  int vocab_size() const { return static_cast<int>(words_.size()); }
  const std::string& word(WordId id) const { return words_.at(static_cast<size_t>(id)); }
  std::optional<WordId> find(std::string_view word) const;
  /// Applies the OOV policy: strict throws naming the word, unk maps to <unk>.
  WordId resolve(std::string_view word) const;
  WordId bos() const { return bos_; }
  WordId eos() const { return eos_; }
  size_t count(int order) const { return tables_.at(static_cast<size_t>(order - 1)).size(); }

  void set_oov_policy(OovPolicy p);
  OovPolicy oov_policy() const { return oov_; }

  const NGramEntry* entry(std::span<const WordId> ngram) const;

  struct Score {
    double log10_prob;
    std::vector<WordId> state;  // last (order - 1) words
  };

  /// P(word | context) with recursive backoff; context oldest-first.
  Score score_word(std::span<const WordId> context, WordId word) const;
  Score score_word(std::span<const WordId> context, std::string_view word) const {
    return score_word(context, resolve(word));
  }

  /// log10 P(words) including <s> context and the </s> step.
  double sentence_logprob(std::span<const std::string> words) const;
  double sentence_logprob_ids(std::span<const WordId> words) const;

  std::vector<WordId> initial_state() const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
  // tables_[k-1]: k-grams. Insertion order is kept for save_arpa.
  std::vector<std::unordered_map<std::vector<WordId>, NGramEntry, VectorHash>> tables_;
  std::vector<std::vector<std::vector<WordId>>> order_keys_;
  WordId bos_ = -1;
  WordId eos_ = -1;
  OovPolicy oov_ = OovPolicy::kStrict;
};

/// Prefix tree over repetition-encoded spellings.
struct LexiconTrie {
  struct Node {
    LabelId label = -1;  // label on the edge into this node; -1 at the root
    int parent = -1;
    std::map<LabelId, int> children;
    std::vector<int> words;  // indices into `words`
    double smeared = kNegInf<double>;  // log10, max unigram below this node
  };

  std::vector<Node> nodes;  // nodes[0] is the root
  std::vector<std::string> words;
  std::vector<LabelSequence> spellings;

  static constexpr int kRoot = 0;

  const Node& root() const { return nodes[kRoot]; }
  bool empty() const { return words.empty(); }
  /// Node reached by `spelling`, if any.
  std::optional<int> find(std::span<const LabelId> spelling) const;
  /// Insert a word with an explicit spelling; returns the word index.
  int insert(const std::string& word, const LabelSequence& spelling);
};

LexiconTrie build_lexicon(std::span<const std::string> words, const Alphabet& alphabet);

enum class SmearMode { kMax, kLogAdd };

/// node.smeared = max (or log10 of the summed probability, for kLogAdd) over
/// words in the node's subtree of their log10 unigram probability. Throws
/// when a word is unknown to the LM under its OOV policy.
void smear(LexiconTrie& trie, const NGramLM& lm, SmearMode mode = SmearMode::kMax);

/// "word<TAB>s y m b o l s" per line.
LexiconTrie load_lexicon(const std::string& path, const Alphabet& alphabet);
void save_lexicon(const std::string& path, const LexiconTrie& trie, const Alphabet& alphabet);

}  // namespace asr
