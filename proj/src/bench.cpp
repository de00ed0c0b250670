#include "asr/bench.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>

#include "asr/criterion.h"
#include "asr/types.h"

namespace asr {

CriterionKind parse_criterion(const std::string& name) {
  if (name == "asg") return CriterionKind::kAsg;
  if (name == "ctc") return CriterionKind::kCtc;
  throw Error("unknown criterion '" + name + "' (expected asg or ctc)");
}

std::string to_string(CriterionKind c) { return c == CriterionKind::kAsg ? "asg" : "ctc"; }

void BenchConfig::validate() const {
  if (frames < 1 || vocab < 2 || transcript_len < 1 || batch < 1) {
    throw Error("bench: frames, transcript length and batch must be >= 1 and vocab >= 2");
  }
  if (transcript_len > frames) throw Error("bench: transcription longer than the frame count");
  if (repetitions < 3) throw Error("bench: at least 3 timed repetitions are required");
  if (criterion == CriterionKind::kCtc && vocab < 3) {
    throw Error("bench: CTC needs at least two non-blank labels");
  }
}

BenchConfig BenchConfig::small_preset() {
  BenchConfig c;
  c.frames = 150;
  c.vocab = 28;
  c.transcript_len = 40;
  return c;
}

BenchConfig BenchConfig::long_preset() {
  BenchConfig c;
  c.frames = 700;
  c.vocab = 28;
  c.transcript_len = 200;
  return c;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BenchTiming run_bench(const BenchConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> score(0.0, 1.0);
  const bool ctc = cfg.criterion == CriterionKind::kCtc;
  const int letters = ctc ? cfg.vocab - 1 : cfg.vocab;
  std::uniform_int_distribution<int> letter(0, letters - 1);

  std::vector<SequenceSample<float>> batch(static_cast<size_t>(cfg.batch));
  for (auto& s : batch) {
    MatrixXf raw(cfg.frames, cfg.vocab);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = static_cast<float>(score(rng));
    s.emissions.scores = ctc ? log_softmax(raw) : raw;
    s.emissions.normalized = ctc;
    while (static_cast<int>(s.labels.size()) < cfg.transcript_len) {
      const int l = letter(rng);
      if (!s.labels.empty() && s.labels.back() == l) continue;
      s.labels.push_back(l);
    }
  }
  TransitionTable<float> tr = TransitionTable<float>::zeros(cfg.vocab);
  for (Eigen::Index i = 0; i < tr.trans.size(); ++i) tr.trans.data()[i] = static_cast<float>(0.1 * score(rng));

  auto run_once = [&] {
    if (ctc) {
      return ctc_loss_batch<float>(batch, cfg.vocab - 1, cfg.threads).size();
    }
    return asg_loss_batch<float>(batch, tr, cfg.threads).size();
  };

  run_once();  // warmup
  BenchTiming out;
  out.config = cfg;
  for (int r = 0; r < cfg.repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    run_once();
    const auto t1 = std::chrono::steady_clock::now();
    out.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  out.median_ms = percentile(out.samples_ms, 0.5);
  out.p10_ms = percentile(out.samples_ms, 0.1);
  out.p90_ms = percentile(out.samples_ms, 0.9);
  return out;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

TimingRow to_row(const BenchTiming& t) {
  TimingRow r;
  r.criterion = to_string(t.config.criterion);
  r.frames = t.config.frames;
  r.vocab = t.config.vocab;
  r.transcript_len = t.config.transcript_len;
  r.batch = t.config.batch;
  r.threads = t.config.threads;
  r.repetitions = t.config.repetitions;
  r.median_ms = t.median_ms;
  r.p10_ms = t.p10_ms;
  r.p90_ms = t.p90_ms;
  r.per_item_ms = t.per_item_ms();
  return r;
}

constexpr const char* kCsvHeader =
    "criterion,frames,vocab,transcript_len,batch,threads,repetitions,median_ms,p10_ms,p90_ms,"
    "per_item_ms";

}  // namespace

std::string timing_table(std::span<const BenchTiming> rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-9s %6s %5s %6s %5s %7s %11s %11s %11s %11s\n", "criterion",
                "frames", "vocab", "labels", "batch", "threads", "median_ms", "p10_ms", "p90_ms",
                "per_item_ms");
  out << line;
  for (const auto& t : rows) {
    const TimingRow r = to_row(t);
    std::snprintf(line, sizeof(line), "%-9s %6d %5d %6d %5d %7d %11.3f %11.3f %11.3f %11.3f\n",
                  r.criterion.c_str(), r.frames, r.vocab, r.transcript_len, r.batch, r.threads,
                  r.median_ms, r.p10_ms, r.p90_ms, r.per_item_ms);
    out << line;
  }
  return out.str();
}

std::string timing_csv(std::span<const TimingRow> rows) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.criterion << ',' << r.frames << ',' << r.vocab << ',' << r.transcript_len << ','
        << r.batch << ',' << r.threads << ',' << r.repetitions << ',' << fixed(r.median_ms, 6) << ','
        << fixed(r.p10_ms, 6) << ',' << fixed(r.p90_ms, 6) << ',' << fixed(r.per_item_ms, 6) << '\n';
  }
  return out.str();
}

std::string timing_csv(std::span<const BenchTiming> rows) {
  std::vector<TimingRow> converted;
  for (const auto& t : rows) converted.push_back(to_row(t));
  return timing_csv(std::span<const TimingRow>(converted));
}

std::vector<TimingRow> parse_timing_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw Error("bench CSV: unexpected header");
  std::vector<TimingRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::vector<std::string> f;
    std::string cell;
    while (std::getline(fields, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw Error("bench CSV line " + std::to_string(lineno) + ": expected 11 fields");
    TimingRow r;
    try {
      r.criterion = f[0];
      r.frames = std::stoi(f[1]);
      r.vocab = std::stoi(f[2]);
      r.transcript_len = std::stoi(f[3]);
      r.batch = std::stoi(f[4]);
      r.threads = std::stoi(f[5]);
      r.repetitions = std::stoi(f[6]);
      r.median_ms = std::stod(f[7]);
      r.p10_ms = std::stod(f[8]);
      r.p90_ms = std::stod(f[9]);
      r.per_item_ms = std::stod(f[10]);
    } catch (const std::exception&) {
      throw Error("bench CSV line " + std::to_string(lineno) + ": malformed number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace asr
