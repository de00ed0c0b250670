#include "asr/decoder.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace asr {

SilencePolicy parse_silence_policy(const std::string& name) {
  if (name == "none") return SilencePolicy::kNone;
  if (name == "optional") return SilencePolicy::kOptional;
  if (name == "mandatory") return SilencePolicy::kMandatory;
  throw Error("unknown silence policy '" + name + "'");
}

void DecoderConfig::validate() const {
  if (beam_size < 1) throw Error("beam size must be >= 1");
  if (!(beam_threshold > 0.0)) throw Error("beam threshold must be > 0");
  if (nbest < 1) throw Error("nbest must be >= 1");
  if (max_words < 0) throw Error("max_words must be >= 0");
}

std::vector<Hypothesis> prune(std::vector<Hypothesis> frontier, const DecoderConfig& cfg) {
  if (frontier.empty()) return frontier;
  double best = kNegInf<double>;
  for (const auto& h : frontier) best = std::max(best, h.score);
  const double floor = best - cfg.beam_threshold;
  std::vector<Hypothesis> kept;
  kept.reserve(frontier.size());
  for (auto& h : frontier) {
    if (h.score >= floor) kept.push_back(std::move(h));
  }
  const auto k = static_cast<size_t>(cfg.beam_size);
  if (kept.size() <= k) return kept;

  double worst = best;
  for (const auto& h : kept) worst = std::min(worst, h.score);
  std::vector<char> keep(kept.size(), 0);
  if (worst == best) {
    std::fill(keep.begin(), keep.begin() + static_cast<std::ptrdiff_t>(k), 1);
  } else {
    // Bucket 0 holds the best scores; bucket index is monotone in score so
    // every entry of a lower bucket outranks every entry of a higher one.
    constexpr int kBuckets = 256;
    const double scale = (kBuckets - 1) / (best - worst);
    std::vector<int> bucket(kept.size());
    std::vector<size_t> counts(kBuckets, 0);
    for (size_t i = 0; i < kept.size(); ++i) {
      bucket[i] = std::clamp(static_cast<int>((best - kept[i].score) * scale), 0, kBuckets - 1);
      ++counts[static_cast<size_t>(bucket[i])];
    }
    size_t taken = 0;
    int cut = 0;
    while (taken + counts[static_cast<size_t>(cut)] < k) taken += counts[static_cast<size_t>(cut++)];
    std::vector<size_t> boundary;
    for (size_t i = 0; i < kept.size(); ++i) {
      if (bucket[i] < cut) keep[i] = 1;
      if (bucket[i] == cut) boundary.push_back(i);
    }
    std::stable_sort(boundary.begin(), boundary.end(),
                     [&](size_t a, size_t b) { return kept[a].score > kept[b].score; });
    for (size_t i = 0; i < k - taken; ++i) keep[boundary[i]] = 1;
  }
  std::vector<Hypothesis> out;
  out.reserve(k);
  for (size_t i = 0; i < kept.size(); ++i) {
    if (keep[i]) out.push_back(std::move(kept[i]));
  }
  return out;
}

namespace {

struct MergeKey {
  Hypothesis::Kind kind;
  int node;
  int context;  // LM state (max mode) or word history (logadd mode)
  int words;

  bool operator==(const MergeKey&) const = default;
};

struct MergeKeyHash {
  size_t operator()(const MergeKey& k) const noexcept {
    size_t h = static_cast<size_t>(k.kind);
    h = h * 1000003u ^ static_cast<size_t>(k.node);
    h = h * 1000003u ^ static_cast<size_t>(k.context);
    h = h * 1000003u ^ static_cast<size_t>(k.words);
    return h;
  }
};

void check_inputs(const EmissionTable<double>& em, const TransitionTable<double>& tr,
                  const LexiconTrie& lexicon, const Alphabet& alphabet, const DecoderConfig& cfg) {
  cfg.validate();
  if (em.frames() == 0) throw Error("empty emission table");
  if (em.labels() != alphabet.size()) {
    throw ShapeError("emission table has " + std::to_string(em.labels()) + " labels, alphabet has " +
                     std::to_string(alphabet.size()));
  }
  if (tr.trans.rows() != em.labels() || tr.trans.cols() != em.labels() ||
      tr.start.size() != em.labels()) {
    throw ShapeError("transition table does not match the emission labels");
  }
  if (lexicon.empty()) throw Error("lexicon is empty");
  if (cfg.silence != SilencePolicy::kNone && !alphabet.silence_id()) {
    throw Error("silence policy requires a silence symbol in the alphabet");
  }
}

class BeamSearch {
 public:
  BeamSearch(const EmissionTable<double>& em, const TransitionTable<double>& tr, const NGramLM& lm,
             const LexiconTrie& lexicon, const Alphabet& alphabet, const DecoderConfig& cfg)
      : em_(em), tr_(tr), lm_(lm), trie_(lexicon), cfg_(cfg) {
    smear(trie_, lm_, cfg.smear);
    for (const auto& w : trie_.words) word_ids_.push_back(lm_.resolve(w));
    if (alphabet.silence_id()) silence_ = *alphabet.silence_id();
  }

  std::vector<DecodeResult> run() {
    const int T = em_.frames();
    std::vector<Hypothesis> frontier = initial();
    for (int t = 1; t < T; ++t) {
      frontier = prune(std::move(frontier), cfg_);
      frontier = step(frontier, t);
      if (frontier.empty()) break;
    }
    // Nothing is expanded after the last frame, so it is not pruned.
    return finish(frontier);
  }

 private:
  int intern_state(const std::vector<WordId>& state) {
    auto [it, inserted] = states_.emplace(state, static_cast<int>(state_list_.size()));
    if (inserted) state_list_.push_back(state);
    return it->second;
  }

  int extend_history(int parent, int word) {
    auto [it, inserted] = histories_.emplace(std::make_pair(parent, word),
                                             static_cast<int>(history_list_.size()));
    if (inserted) history_list_.emplace_back(parent, word);
    return it->second;
  }

  std::vector<std::string> history_words(int h) const {
    std::vector<std::string> out;
    for (; h >= 0; h = history_list_[static_cast<size_t>(h)].first) {
      out.push_back(trie_.words[static_cast<size_t>(history_list_[static_cast<size_t>(h)].second)]);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  double rescore(Hypothesis& h) const {
    h.score = h.acoustic + cfg_.alpha * (h.lm + h.smeared) + cfg_.beta * h.num_words;
    return h.score;
  }

  double smeared_ln(int node) const { return log10_to_ln(trie_.nodes[static_cast<size_t>(node)].smeared); }

  bool may_start_word(const Hypothesis& h) const {
    return cfg_.max_words == 0 || h.num_words < cfg_.max_words;
  }

  void add(std::vector<Hypothesis>& next, std::unordered_map<MergeKey, size_t, MergeKeyHash>& index,
           Hypothesis h) {
    rescore(h);
    const bool logadd_mode = cfg_.mode == ScoreMode::kLogAdd;
    const MergeKey key{h.kind, h.node, logadd_mode ? h.history : h.lm_state,
                       cfg_.max_words > 0 ? h.num_words : 0};
    auto [it, inserted] = index.emplace(key, next.size());
    if (inserted) {
      next.push_back(std::move(h));
      return;
    }
    Hypothesis& cur = next[it->second];
    if (logadd_mode) {
      cur.acoustic = logadd(cur.acoustic, h.acoustic);
      rescore(cur);
    } else if (h.score > cur.score) {
      cur = std::move(h);
    }
  }

  // Entering trie node `child` at frame t, coming from `from` (or from the
  // utterance start when `from` is null) with `arc` acoustic increment.
  void enter_node(std::vector<Hypothesis>& next,
                  std::unordered_map<MergeKey, size_t, MergeKeyHash>& index, const Hypothesis& base,
                  int child, double acoustic, int t) {
    const auto& node = trie_.nodes[static_cast<size_t>(child)];
    Hypothesis h = base;
    h.node = child;
    h.label = node.label;
    h.frame = t;
    h.acoustic = acoustic;
    h.word = -1;
    if (!node.children.empty()) {
      h.kind = Hypothesis::Kind::kInWord;
      h.smeared = smeared_ln(child);
      add(next, index, h);
    }
    for (int w : node.words) {
      Hypothesis e = base;
      e.kind = Hypothesis::Kind::kWordEnd;
      e.node = child;
      e.word = w;
      e.label = node.label;
      e.frame = t;
      e.acoustic = acoustic;
      e.smeared = 0.0;
      const auto& ctx = state_list_[static_cast<size_t>(base.lm_state)];
      NGramLM::Score s = lm_.score_word(ctx, word_ids_[static_cast<size_t>(w)]);
      e.lm = base.lm + log10_to_ln(s.log10_prob);
      e.lm_state = intern_state(s.state);
      e.history = extend_history(base.history, w);
      e.num_words = base.num_words + 1;
      add(next, index, e);
    }
  }

  std::vector<Hypothesis> initial() {
    std::vector<Hypothesis> next;
    std::unordered_map<MergeKey, size_t, MergeKeyHash> index;
    Hypothesis base;
    base.lm_state = intern_state(lm_.initial_state());
    if (cfg_.silence != SilencePolicy::kNone) {
      Hypothesis s = base;
      s.kind = Hypothesis::Kind::kSilence;
      s.label = silence_;
      s.acoustic = tr_.start(silence_) + em_.scores(0, silence_);
      add(next, index, s);
    }
    for (const auto& [label, child] : trie_.root().children) {
      enter_node(next, index, base, child, tr_.start(label) + em_.scores(0, label), 0);
    }
    return next;
  }

  std::vector<Hypothesis> step(const std::vector<Hypothesis>& frontier, int t) {
    std::vector<Hypothesis> next;
    std::unordered_map<MergeKey, size_t, MergeKeyHash> index;
    for (const Hypothesis& h : frontier) {
      const LabelId l = h.label;
      {
        Hypothesis stay = h;
        stay.frame = t;
        stay.acoustic += tr_.trans(l, l) + em_.scores(t, l);
        add(next, index, stay);
      }
      if (h.kind == Hypothesis::Kind::kInWord) {
        Hypothesis base = h;
        base.smeared = 0.0;
        for (const auto& [label, child] : trie_.nodes[static_cast<size_t>(h.node)].children) {
          enter_node(next, index, base, child, h.acoustic + tr_.trans(l, label) + em_.scores(t, label), t);
        }
        continue;
      }
      if (h.kind == Hypothesis::Kind::kWordEnd && cfg_.silence != SilencePolicy::kNone) {
        Hypothesis s = h;
        s.kind = Hypothesis::Kind::kSilence;
        s.node = LexiconTrie::kRoot;
        s.word = -1;
        s.label = silence_;
        s.frame = t;
        s.acoustic += tr_.trans(l, silence_) + em_.scores(t, silence_);
        add(next, index, s);
      }
      if (!may_start_word(h)) continue;
      const bool after_word = h.kind == Hypothesis::Kind::kWordEnd;
      if (after_word && cfg_.silence == SilencePolicy::kMandatory) continue;
      Hypothesis base = h;
      base.word = -1;
      for (const auto& [label, child] : trie_.root().children) {
        if (after_word && label == l) continue;
        enter_node(next, index, base, child, h.acoustic + tr_.trans(l, label) + em_.scores(t, label), t);
      }
    }
    return next;
  }

  std::vector<DecodeResult> finish(const std::vector<Hypothesis>& frontier) {
    std::vector<DecodeResult> results;
    std::map<int, size_t> by_history;
    for (const Hypothesis& h : frontier) {
      if (h.kind == Hypothesis::Kind::kInWord) continue;
      if (h.num_words == 0) continue;
      const auto& ctx = state_list_[static_cast<size_t>(h.lm_state)];
      const double lm = h.lm + log10_to_ln(lm_.score_word(ctx, lm_.eos()).log10_prob);
      DecodeResult r;
      r.acoustic = h.acoustic;
      r.lm = lm;
      auto [it, inserted] = by_history.emplace(h.history, results.size());
      if (inserted) {
        r.words = history_words(h.history);
        results.push_back(std::move(r));
        continue;
      }
      DecodeResult& cur = results[it->second];
      if (cfg_.mode == ScoreMode::kLogAdd) {
        cur.acoustic = logadd(cur.acoustic, r.acoustic);
      } else if (r.acoustic + cfg_.alpha * r.lm > cur.acoustic + cfg_.alpha * cur.lm) {
        cur.acoustic = r.acoustic;
        cur.lm = r.lm;
      }
    }
    if (results.empty()) {
      throw PruningError("no hypothesis reached a word boundary at the last frame");
    }
    for (auto& r : results) {
      r.score = r.acoustic + cfg_.alpha * r.lm + cfg_.beta * static_cast<double>(r.words.size());
    }
    std::stable_sort(results.begin(), results.end(),
                     [](const DecodeResult& a, const DecodeResult& b) { return a.score > b.score; });
    if (results.size() > static_cast<size_t>(cfg_.nbest)) results.resize(static_cast<size_t>(cfg_.nbest));
    return results;
  }

  const EmissionTable<double>& em_;
  const TransitionTable<double>& tr_;
  const NGramLM& lm_;
  LexiconTrie trie_;
  const DecoderConfig& cfg_;
  std::vector<WordId> word_ids_;
  LabelId silence_ = -1;
  std::map<std::vector<WordId>, int> states_;
  std::vector<std::vector<WordId>> state_list_;
  std::map<std::pair<int, int>, int> histories_;
  std::vector<std::pair<int, int>> history_list_;
};

}  // namespace

std::vector<DecodeResult> decode(const EmissionTable<double>& emissions,
                                 const TransitionTable<double>& transitions, const NGramLM& lm,
                                 const LexiconTrie& lexicon, const Alphabet& alphabet,
                                 const DecoderConfig& cfg) {
  check_inputs(emissions, transitions, lexicon, alphabet, cfg);
  BeamSearch search(emissions, transitions, lm, lexicon, alphabet, cfg);
  return search.run();
}

namespace {

// All transcriptions of one word sequence allowed by the silence policy.
void silence_variants(const std::vector<const LabelSequence*>& spellings, SilencePolicy policy,
                      LabelId silence, int max_len, std::vector<LabelSequence>& out) {
  const bool sil = policy != SilencePolicy::kNone;
  const size_t m = spellings.size();
  // Separator choices between consecutive words: 0 = direct, 1 = silence.
  std::vector<std::vector<int>> choices(m > 0 ? m - 1 : 0);
  for (size_t i = 0; i + 1 < m; ++i) {
    const bool clash = spellings[i]->back() == spellings[i + 1]->front();
    if (policy == SilencePolicy::kNone) {
      if (clash) return;
      choices[i] = {0};
    } else if (policy == SilencePolicy::kMandatory || clash) {
      choices[i] = {1};
    } else {
      choices[i] = {0, 1};
    }
  }
  std::vector<int> edge_options = sil ? std::vector<int>{0, 1} : std::vector<int>{0};
  std::vector<size_t> pick(choices.size(), 0);
  while (true) {
    for (int lead : edge_options) {
      for (int trail : edge_options) {
        LabelSequence theta;
        if (lead) theta.push_back(silence);
        for (size_t i = 0; i < m; ++i) {
          if (i > 0 && choices[i - 1][pick[i - 1]]) theta.push_back(silence);
          theta.insert(theta.end(), spellings[i]->begin(), spellings[i]->end());
        }
        if (trail) theta.push_back(silence);
        if (static_cast<int>(theta.size()) <= max_len) out.push_back(std::move(theta));
      }
    }
    size_t d = 0;
    while (d < pick.size() && ++pick[d] == choices[d].size()) pick[d++] = 0;
    if (d == pick.size()) break;
  }
}

}  // namespace

DecodeResult exhaustive_decode(const EmissionTable<double>& emissions,
                               const TransitionTable<double>& transitions, const NGramLM& lm,
                               const LexiconTrie& lexicon, const Alphabet& alphabet,
                               const DecoderConfig& cfg, int max_words) {
  check_inputs(emissions, transitions, lexicon, alphabet, cfg);
  const int T = emissions.frames();
  const int V = static_cast<int>(lexicon.words.size());
  if (V > 5 || T > 8) {
    throw Error("instance too large for exhaustive decoding (" + std::to_string(V) + " words, " +
                std::to_string(T) + " frames)");
  }
  if (max_words < 1) throw Error("max_words must be >= 1");
  const LabelId silence = alphabet.silence_id().value_or(-1);
  const bool separators_required = cfg.silence == SilencePolicy::kMandatory;

  std::vector<WordId> lm_ids;
  for (const auto& w : lexicon.words) lm_ids.push_back(lm.resolve(w));

  DecodeResult best;
  best.score = kNegInf<double>;
  bool found = false;

  std::vector<int> seq;
  auto score_sequence = [&]() {
    std::vector<const LabelSequence*> spellings;
    for (int w : seq) spellings.push_back(&lexicon.spellings[static_cast<size_t>(w)]);
    std::vector<LabelSequence> variants;
    silence_variants(spellings, cfg.silence, silence, T, variants);
    double acoustic = kNegInf<double>;
    for (const auto& theta : variants) {
      const UnfoldedGraph g = build_asg_graph(theta, T);
      const double s = forward_score(g, emissions, &transitions, cfg.mode).score;
      acoustic = cfg.mode == ScoreMode::kMax ? std::max(acoustic, s) : logadd(acoustic, s);
    }
    if (acoustic == kNegInf<double>) return;
    std::vector<WordId> ids;
    for (int w : seq) ids.push_back(lm_ids[static_cast<size_t>(w)]);
    const double lm_ln = log10_to_ln(lm.sentence_logprob_ids(ids));
    const double total = acoustic + cfg.alpha * lm_ln + cfg.beta * static_cast<double>(seq.size());
    if (!found || total > best.score) {
      found = true;
      best.score = total;
      best.acoustic = acoustic;
      best.lm = lm_ln;
      best.words.clear();
      for (int w : seq) best.words.push_back(lexicon.words[static_cast<size_t>(w)]);
    }
  };

  // Depth-first over word sequences; `used` is the minimum label count.
  auto recurse = [&](auto&& self, int used) -> void {
    if (!seq.empty()) score_sequence();
    if (static_cast<int>(seq.size()) == max_words) return;
    for (int w = 0; w < V; ++w) {
      const int len = static_cast<int>(lexicon.spellings[static_cast<size_t>(w)].size());
      const int sep = !seq.empty() && separators_required ? 1 : 0;
      if (used + len + sep > T) continue;
      seq.push_back(w);
      self(self, used + len + sep);
      seq.pop_back();
    }
  };
  recurse(recurse, 0);
  if (!found) throw InfeasibleError("no word sequence fits in " + std::to_string(T) + " frames");
  return best;
}

}  // namespace asr
