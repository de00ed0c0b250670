#include "asr/alphabet.h"

#include <cctype>
#include <fstream>
#include <sstream>

namespace asr {

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  for (size_t i = 0; i < symbols_.size(); ++i) {
    const std::string& s = symbols_[i];
    if (s.empty()) throw Error("alphabet: empty symbol at id " + std::to_string(i));
    if (!index_.emplace(s, static_cast<LabelId>(i)).second) {
      throw Error("alphabet: duplicate symbol '" + s + "'");
    }
    if (s == kSilence) silence_ = static_cast<LabelId>(i);
    if (s == kRep2) rep2_ = static_cast<LabelId>(i);
    if (s == kRep3) rep3_ = static_cast<LabelId>(i);
  }
}

Alphabet Alphabet::english() {
  std::vector<std::string> symbols;
  for (char c = 'a'; c <= 'z'; ++c) symbols.emplace_back(1, c);
  symbols.emplace_back("'");
  symbols.emplace_back(kSilence);
  symbols.emplace_back(kRep2);
  symbols.emplace_back(kRep3);
  return Alphabet(std::move(symbols));
}

Alphabet Alphabet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alphabet file: " + path);
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    symbols.push_back(line);
  }
  return Alphabet(std::move(symbols));
}

void Alphabet::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write alphabet file: " + path);
  for (const auto& s : symbols_) out << s << '\n';
}

std::optional<LabelId> Alphabet::find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

LabelId Alphabet::id(std::string_view symbol) const {
  if (auto found = find(symbol)) return *found;
  throw Error("alphabet: unknown symbol '" + std::string(symbol) + "'");
}

void validate_labels(std::span<const LabelId> labels, const Alphabet& alphabet) {
  for (size_t i = 0; i < labels.size(); ++i) {
    const LabelId id = labels[i];
    if (!alphabet.valid(id)) {
      throw Error("label " + std::to_string(id) + " at position " + std::to_string(i) +
                  " is not in the alphabet");
    }
    if (!alphabet.is_repetition(id)) continue;
    if (i == 0) throw Error("malformed label sequence: repetition label in first position");
    if (alphabet.is_repetition(labels[i - 1])) {
      throw Error("malformed label sequence: adjacent repetition labels at position " +
                  std::to_string(i));
    }
    if (alphabet.is_silence(labels[i - 1])) {
      throw Error("malformed label sequence: repetition of silence at position " +
                  std::to_string(i));
    }
  }
}

LabelSequence encode_transcription(std::string_view text, const Alphabet& alphabet) {
  // Map each character to an id first, then rewrite runs.
  std::vector<LabelId> raw;
  raw.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
    std::optional<LabelId> id;
    if (c == ' ') {
      id = alphabet.silence_id();
    } else if (c != '|') {
      id = alphabet.find(std::string_view(&c, 1));
      if (id && alphabet.is_repetition(*id)) id.reset();
    }
    if (!id) {
      throw Error("unspellable character '" + std::string(1, text[i]) + "' at offset " +
                  std::to_string(i));
    }
    if (alphabet.is_silence(*id) && !raw.empty() && alphabet.is_silence(raw.back())) {
      throw Error("consecutive word separators at offset " + std::to_string(i));
    }
    raw.push_back(*id);
  }

  LabelSequence out;
  out.reserve(raw.size());
  size_t i = 0;
  while (i < raw.size()) {
    size_t run = 1;
    while (i + run < raw.size() && raw[i + run] == raw[i]) ++run;
    const LabelId id = raw[i];
    if (run > 1 && !alphabet.is_letter(id)) {
      throw Error("unspellable character run at offset " + std::to_string(i));
    }
    size_t remaining = run;
    while (remaining > 0) {
      const size_t chunk = remaining >= 3 ? 3 : remaining;
      out.push_back(id);
      if (chunk > 1) {
        auto rep = chunk == 3 ? alphabet.rep3_id() : alphabet.rep2_id();
        if (!rep) {
          throw Error("alphabet has no repetition label for the run at offset " +
                      std::to_string(i));
        }
        out.push_back(*rep);
      }
      remaining -= chunk;
    }
    i += run;
  }
  return out;
}

std::string decode_labels(std::span<const LabelId> labels, const Alphabet& alphabet) {
  validate_labels(labels, alphabet);
  std::string out;
  for (size_t i = 0; i < labels.size(); ++i) {
    const LabelId id = labels[i];
    if (alphabet.is_repetition(id)) {
      const std::string& prev = alphabet.symbol(labels[i - 1]);
      const int copies = id == alphabet.rep3_id() ? 2 : 1;
      for (int k = 0; k < copies; ++k) out += prev;
    } else if (alphabet.is_silence(id)) {
      out += ' ';
    } else {
      out += alphabet.symbol(id);
    }
  }
  return out;
}

LabelSequence collapse_path(std::span<const LabelId> frame_labels) {
  LabelSequence out;
  for (LabelId id : frame_labels) {
    if (out.empty() || out.back() != id) out.push_back(id);
  }
  return out;
}

LabelSequence collapse_ctc_path(std::span<const LabelId> frame_labels, LabelId blank) {
  LabelSequence out;
  LabelSequence merged = collapse_path(frame_labels);
  for (LabelId id : merged) {
    if (id != blank) out.push_back(id);
  }
  return out;
}

std::string spell(std::span<const LabelId> labels, const Alphabet& alphabet) {
  std::string out;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ' ';
    out += alphabet.symbol(labels[i]);
  }
  return out;
}

LabelSequence parse_spelling(std::string_view spelling, const Alphabet& alphabet) {
  LabelSequence out;
  std::istringstream in{std::string(spelling)};
  std::string token;
  while (in >> token) out.push_back(alphabet.id(token));
  return out;
}

}  // namespace asr
