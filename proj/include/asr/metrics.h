#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asr {

/// Unit-cost Levenshtein distance, two-row DP.
template <typename T>
size_t edit_distance(std::span<const T> ref, std::span<const T> hyp) {
  std::vector<size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= hyp.size(); ++j) {
      const size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

inline size_t edit_distance(std::string_view ref, std::string_view hyp) {
  return edit_distance<char>(std::span<const char>(ref.data(), ref.size()),
                             std::span<const char>(hyp.data(), hyp.size()));
}

std::vector<std::string> split_words(std::string_view text);

struct MetricReport {
  double rate = 0.0;  // total edits / total reference length
  size_t edits = 0;
  size_t reference_length = 0;
  std::vector<size_t> per_utterance;
};

/// Letter error rate over characters (spaces included), micro-averaged.
MetricReport letter_error_rate(std::span<const std::string> refs, std::span<const std::string> hyps);

/// Word error rate over whitespace-separated tokens, micro-averaged.
MetricReport word_error_rate(std::span<const std::string> refs, std::span<const std::string> hyps);

/// One utterance per line; trailing CR stripped.
std::vector<std::string> read_lines(const std::string& path);

}  // namespace asr
