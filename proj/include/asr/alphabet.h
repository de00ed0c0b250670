#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asr/types.h"

namespace asr {

/// Grapheme inventory with a bijective symbol <-> id mapping.
///
/// Special symbols are recognised by their spelling: "|" is silence (the word
/// separator), "2" and "3" are the repetition labels meaning "the previous
/// letter occurs two (three) times in total".
class Alphabet {
 public:
  static constexpr std::string_view kSilence = "|";
  static constexpr std::string_view kRep2 = "2";
  static constexpr std::string_view kRep3 = "3";

  Alphabet() = default;
  explicit Alphabet(std::vector<std::string> symbols);

  /// 26 letters, apostrophe, silence and the two repetition labels (30 ids).
  static Alphabet english();

  static Alphabet load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::string& symbol(LabelId id) const { return symbols_.at(static_cast<size_t>(id)); }
  std::optional<LabelId> find(std::string_view symbol) const;
  LabelId id(std::string_view symbol) const;

  std::optional<LabelId> silence_id() const { return silence_; }
  std::optional<LabelId> rep2_id() const { return rep2_; }
  std::optional<LabelId> rep3_id() const { return rep3_; }

  bool valid(LabelId id) const { return id >= 0 && id < size(); }
  bool is_repetition(LabelId id) const { return id == rep2_ || id == rep3_; }
  bool is_silence(LabelId id) const { return silence_ && id == *silence_; }
  /// Anything that may be repeated: not silence, not a repetition label.
  bool is_letter(LabelId id) const { return valid(id) && !is_silence(id) && !is_repetition(id); }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, LabelId> index_;
  std::optional<LabelId> silence_;
  std::optional<LabelId> rep2_;
  std::optional<LabelId> rep3_;
};

using LabelSequence = std::vector<LabelId>;

/// Throws Error when `labels` breaks the sequence invariants: unknown id,
/// leading repetition label, adjacent repetition labels, repetition after
/// silence.
void validate_labels(std::span<const LabelId> labels, const Alphabet& alphabet);

/// Lowercases `text`, maps ' ' to silence and rewrites runs of identical
/// letters greedily into chunks of at most three ("aaaa" -> a 3 a).
LabelSequence encode_transcription(std::string_view text, const Alphabet& alphabet);

std::string decode_labels(std::span<const LabelId> labels, const Alphabet& alphabet);

/// Merges consecutive duplicate frame labels.
LabelSequence collapse_path(std::span<const LabelId> frame_labels);

/// Same as collapse_path, then removes every occurrence of `blank`.
LabelSequence collapse_ctc_path(std::span<const LabelId> frame_labels, LabelId blank);

/// Symbols joined with a single space, e.g. "b a l 2".
std::string spell(std::span<const LabelId> labels, const Alphabet& alphabet);
LabelSequence parse_spelling(std::string_view spelling, const Alphabet& alphabet);

}  // namespace asr
