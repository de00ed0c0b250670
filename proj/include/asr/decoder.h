#pragma once

#include <limits>
#include <string>
#include <vector>

#include "asr/alphabet.h"
#include "asr/criterion.h"
#include "asr/lm.h"

namespace asr {

/// Where the silence grapheme may appear in a decoded transcription.
///   kNone:      never; adjacent words may not share a boundary label.
///   kOptional:  optionally before the first word, between words and after
///               the last word; required between words when the first word
///               ends with the label the next one starts with.
///   kMandatory: exactly one between words, optional at both ends.
enum class SilencePolicy { kNone, kOptional, kMandatory };

SilencePolicy parse_silence_policy(const std::string& name);

struct DecoderConfig {
  double alpha = 1.0;  // LM weight
  double beta = 0.0;   // added once per word; negative values penalize
  int beam_size = 256;
  double beam_threshold = 25.0;
  ScoreMode mode = ScoreMode::kMax;
  SilencePolicy silence = SilencePolicy::kOptional;
  SmearMode smear = SmearMode::kMax;
  int nbest = 10;
  int max_words = 0;  // 0 = unlimited

  void validate() const;
};

/// Partial path through the lexicon graph at one frame.
struct Hypothesis {
  enum class Kind : uint8_t { kInWord, kWordEnd, kSilence };

  Kind kind = Kind::kSilence;
  int node = LexiconTrie::kRoot;  // trie node whose label is being emitted
  int word = -1;                  // lexicon word index, kWordEnd only
  int lm_state = 0;               // interned LM context
  int history = -1;               // interned word history, -1 = none
  int num_words = 0;
  LabelId label = 0;              // label emitted at `frame`
  int frame = 0;
  double acoustic = 0.0;
  double lm = 0.0;     // committed natural-log LM score
  double smeared = 0.0;  // provisional natural-log LM score inside a word
  double score = 0.0;  // acoustic + alpha * (lm + smeared) + beta * num_words
};

/// Beam thresholding against the frame best, then exact top-k selection via
/// a score histogram. Survivors keep their input order; ties favour earlier
/// entries.
std::vector<Hypothesis> prune(std::vector<Hypothesis> frontier, const DecoderConfig& cfg);

struct DecodeResult {
  std::vector<std::string> words;
  double score = 0.0;     // acoustic + alpha * lm + beta * |words|
  double acoustic = 0.0;
  double lm = 0.0;        // natural log, including the </s> step
};

/// Raised when every hypothesis was pruned before reaching a word boundary
/// at the final frame.
class PruningError : public Error {
 public:
  using Error::Error;
};

/// Frame-synchronous beam search over the lexicon trie with smeared LM
/// look-ahead. Results sorted by descending score.
std::vector<DecodeResult> decode(const EmissionTable<double>& emissions,
                                 const TransitionTable<double>& transitions, const NGramLM& lm,
                                 const LexiconTrie& lexicon, const Alphabet& alphabet,
                                 const DecoderConfig& cfg);

/// Enumerates every word sequence of up to `max_words` words and every
/// silence placement allowed by `cfg.silence`, scoring each transcription
/// with forward_score over its ASG graph. Refuses more than 5 words or 8
/// frames.
DecodeResult exhaustive_decode(const EmissionTable<double>& emissions,
                               const TransitionTable<double>& transitions, const NGramLM& lm,
                               const LexiconTrie& lexicon, const Alphabet& alphabet,
                               const DecoderConfig& cfg, int max_words);

}  // namespace asr
