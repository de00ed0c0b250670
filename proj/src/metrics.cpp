#include "asr/metrics.h"

#include <fstream>
#include <sstream>

#include "asr/types.h"

namespace asr {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

namespace {

void check_counts(size_t refs, size_t hyps) {
  if (refs != hyps) {
    throw Error("utterance count mismatch: " + std::to_string(refs) + " references, " +
                std::to_string(hyps) + " hypotheses");
  }
}

void finish(MetricReport& r) {
  r.rate = r.reference_length == 0 ? (r.edits == 0 ? 0.0 : 1.0)
                                   : static_cast<double>(r.edits) / static_cast<double>(r.reference_length);
}

}  // namespace

MetricReport letter_error_rate(std::span<const std::string> refs, std::span<const std::string> hyps) {
  check_counts(refs.size(), hyps.size());
  MetricReport r;
  for (size_t i = 0; i < refs.size(); ++i) {
    const size_t d = edit_distance(refs[i], hyps[i]);
    r.per_utterance.push_back(d);
    r.edits += d;
    r.reference_length += refs[i].size();
  }
  finish(r);
  return r;
}

MetricReport word_error_rate(std::span<const std::string> refs, std::span<const std::string> hyps) {
  check_counts(refs.size(), hyps.size());
  MetricReport r;
  for (size_t i = 0; i < refs.size(); ++i) {
    const auto ref = split_words(refs[i]);
    const auto hyp = split_words(hyps[i]);
    const size_t d = edit_distance<std::string>(ref, hyp);
    r.per_utterance.push_back(d);
    r.edits += d;
    r.reference_length += ref.size();
  }
  finish(r);
  return r;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace asr
