#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace asr {

enum class CriterionKind { kAsg, kCtc };

CriterionKind parse_criterion(const std::string& name);
std::string to_string(CriterionKind c);

/// One timing configuration: loss + gradient over a batch of random
/// instances. For CTC the last of the `vocab` labels is the blank.
struct BenchConfig {
  int frames = 150;
  int vocab = 28;
  int transcript_len = 40;
  int batch = 1;
  int repetitions = 10;  // timed runs, after one warmup run
  CriterionKind criterion = CriterionKind::kAsg;
  int threads = 0;
  uint64_t seed = 1;

  void validate() const;

  /// Short sequences: 150 frames, 28 labels, 40-label transcriptions.
  static BenchConfig small_preset();
  /// Long sequences: 700 frames, 28 labels, 200-label transcriptions.
  static BenchConfig long_preset();
};

struct BenchTiming {
  BenchConfig config;
  std::vector<double> samples_ms;
  double median_ms = 0.0;
  double p10_ms = 0.0;
  double p90_ms = 0.0;

  double per_item_ms() const { return median_ms / config.batch; }
};

/// Linear-interpolated percentile of `values` (q in [0, 1]).
double percentile(std::vector<double> values, double q);

BenchTiming run_bench(const BenchConfig& cfg);

std::string timing_table(std::span<const BenchTiming> rows);

/// Header plus one row per timing, 6 decimals for times.
std::string timing_csv(std::span<const BenchTiming> rows);

struct TimingRow {
  std::string criterion;
  int frames = 0;
  int vocab = 0;
  int transcript_len = 0;
  int batch = 0;
  int threads = 0;
  int repetitions = 0;
  double median_ms = 0.0;
  double p10_ms = 0.0;
  double p90_ms = 0.0;
  double per_item_ms = 0.0;
};

std::vector<TimingRow> parse_timing_csv(const std::string& text);
std::string timing_csv(std::span<const TimingRow> rows);

}  // namespace asr
