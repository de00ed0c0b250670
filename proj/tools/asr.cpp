// Command-line front end: features, loss, viterbi, train-toy, decode, ler,
// wer and bench. Numeric output is fixed-decimal unless stated otherwise so
// that it can be compared against golden files.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "asr/acoustic.h"
#include "asr/alphabet.h"
#include "asr/bench.h"
#include "asr/criterion.h"
#include "asr/decoder.h"
#include "asr/features.h"
#include "asr/io.h"
#include "asr/lm.h"
#include "asr/metrics.h"
#include "asr/toy_config.h"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace asr;

constexpr int kPruningExit = 2;

struct Globals {
  int threads = 0;
  uint64_t seed = 1;
};

Alphabet load_alphabet(const std::string& path) {
  return path.empty() ? Alphabet::english() : Alphabet::load(path);
}

EmissionTable<double> load_emissions(const std::string& path) {
  return {read_matrix_file(path).values.cast<double>(), false};
}

// (L+1) x L with the start scores as the last row, or L x L with zero start
// scores.
TransitionTable<double> load_transitions(const std::string& path, int num_labels) {
  if (path.empty()) return TransitionTable<double>::zeros(num_labels);
  const MatrixXd m = read_matrix_file(path).values.cast<double>();
  if (m.cols() != num_labels || (m.rows() != num_labels && m.rows() != num_labels + 1)) {
    throw ShapeError("transition file is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     ", expected " + std::to_string(num_labels + 1) + "x" + std::to_string(num_labels));
  }
  TransitionTable<double> t;
  t.trans = m.topRows(num_labels);
  t.start = m.rows() > num_labels ? VectorXd(m.row(num_labels).transpose()) : VectorXd::Zero(num_labels);
  return t;
}

void save_transitions(const std::string& path, const MatrixXf& trans, const VectorXf& start) {
  MatrixFile f;
  f.values.resize(trans.rows() + 1, trans.cols());
  f.values.topRows(trans.rows()) = trans;
  f.values.row(trans.rows()) = start.transpose();
  write_matrix_file(path, f);
}

LabelSequence transcription_labels(const std::string& text, const std::string& spelling,
                                   const Alphabet& alphabet) {
  if (!spelling.empty()) return parse_spelling(spelling, alphabet);
  return encode_transcription(text, alphabet);
}

void print_report(const char* name, const MetricReport& r) {
  std::printf("%s\t%.6f\t%zu\t%zu\n", name, r.rate, r.edits, r.reference_length);
}

// ---------------------------------------------------------------------------

struct FeaturesArgs {
  std::string input, output, kind = "mfcc";
  int raw_rate = 0;
  bool no_normalize = false;
};

int run_features(const FeaturesArgs& a) {
  const Waveform w = a.raw_rate > 0 ? read_raw_pcm(a.input, a.raw_rate) : read_wav(a.input);
  FeatureSequence f = a.kind == "power" ? power_spectrum(w) : mfcc(w);
  if (!a.no_normalize) f = normalize(f);
  save_features(a.output, f);
  std::printf("%lld\t%lld\n", static_cast<long long>(f.num_frames()), static_cast<long long>(f.dim()));
  return 0;
}

struct LossArgs {
  std::string emissions, transitions, alphabet, text, spelling, criterion = "asg", grad;
  int blank = -1;
  bool strict = false;
};

int run_loss(const LossArgs& a) {
  const Alphabet alphabet = load_alphabet(a.alphabet);
  const LabelSequence labels = transcription_labels(a.text, a.spelling, alphabet);
  const MatrixFile em = read_matrix_file(a.emissions);
  const int L = static_cast<int>(em.values.cols());
  if (a.criterion == "ctc") {
    const LabelId blank = a.blank >= 0 ? a.blank : L - 1;
    const EmissionTable<float> f{em.values, true};
    const auto r = ctc_loss(f, labels, blank, CtcOptions{a.strict});
    std::printf("%.9f\n", r.loss);
    if (!a.grad.empty()) write_matrix_file(a.grad + ".emissions.bin", {r.d_emissions, em.stride_ms});
    return 0;
  }
  const EmissionTable<float> f{em.values, false};
  const TransitionTable<double> td = load_transitions(a.transitions, L);
  const TransitionTable<float> tr{td.trans.cast<float>(), td.start.cast<float>()};
  const auto r = asg_loss(f, tr, labels);
  std::printf("%.9f\n", r.loss);
  if (!a.grad.empty()) {
    write_matrix_file(a.grad + ".emissions.bin", {r.d_emissions, em.stride_ms});
    save_transitions(a.grad + ".transitions.bin", r.d_transitions, r.d_start);
  }
  return 0;
}

struct ViterbiArgs {
  std::string emissions, transitions, alphabet, text, spelling;
};

int run_viterbi(const ViterbiArgs& a) {
  const Alphabet alphabet = load_alphabet(a.alphabet);
  const EmissionTable<double> em = load_emissions(a.emissions);
  const TransitionTable<double> tr = load_transitions(a.transitions, em.labels());
  const bool forced = !a.text.empty() || !a.spelling.empty();
  const UnfoldedGraph g = forced ? build_asg_graph(transcription_labels(a.text, a.spelling, alphabet), em.frames())
                                 : build_full_graph(em.labels(), em.frames());
  const ViterbiResult r = viterbi(g, em, &tr);
  const LabelSequence collapsed = collapse_path(r.frame_labels);
  std::printf("%.6f\n%s\n%s\n", r.score, spell(r.frame_labels, alphabet).c_str(), spell(collapsed, alphabet).c_str());
  return 0;
}

struct TrainArgs {
  std::string config, checkpoint, curve;
  bool verbose = false;
};

int run_train(const TrainArgs& a) {
  const ToyRunConfig cfg = load_toy_config(a.config);
  const auto dataset = make_toy_dataset(cfg.data, toy_alphabet());
  const TrainResult r = train_toy(dataset, cfg.network, cfg.train);
  if (!a.checkpoint.empty()) save_checkpoint(a.checkpoint, cfg.network, r.params, r.transitions);
  const std::string csv = ler_curve_csv(r.curve);
  if (!a.curve.empty()) {
    std::ofstream out(a.curve);
    if (!out) throw IoError("cannot write " + a.curve);
    out << csv;
  }
  if (a.verbose) {
    for (const auto& e : r.curve) std::printf("%d\t%.6f\t%.6f\n", e.epoch, e.train_loss, e.heldout_ler);
  } else {
    std::printf("%.6f\n", r.curve.back().heldout_ler);
  }
  return 0;
}

struct DecodeArgs {
  std::string emissions, transitions, arpa, lexicon, alphabet, mode = "max", silence = "optional", smear = "max";
  DecoderConfig cfg;
};

int run_decode(DecodeArgs a) {
  const Alphabet alphabet = load_alphabet(a.alphabet);
  const NGramLM lm = NGramLM::load_arpa(a.arpa);
  const LexiconTrie lexicon = load_lexicon(a.lexicon, alphabet);
  const EmissionTable<double> em = load_emissions(a.emissions);
  const TransitionTable<double> tr = load_transitions(a.transitions, em.labels());
  a.cfg.mode = a.mode == "logadd" ? ScoreMode::kLogAdd : ScoreMode::kMax;
  a.cfg.silence = parse_silence_policy(a.silence);
  a.cfg.smear = a.smear == "logadd" ? SmearMode::kLogAdd : SmearMode::kMax;
  const auto results = decode(em, tr, lm, lexicon, alphabet, a.cfg);
  for (size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    std::string words;
    for (const auto& w : r.words) words += (words.empty() ? "" : " ") + w;
    std::printf("%zu\t%.6f\t%.6f\t%.6f\t%s\n", i + 1, r.score, r.acoustic, r.lm, words.c_str());
  }
  return 0;
}

struct BenchArgs {
  std::string preset = "both", criterion = "both", csv;
  std::vector<int> batches{1, 4, 8};
  int repetitions = 10;
  int frames = 0, vocab = 0, transcript_len = 0;
};

int run_bench(const BenchArgs& a, const Globals& g) {
  std::vector<BenchConfig> shapes;
  if (a.frames > 0) {
    BenchConfig c;
    c.frames = a.frames;
    if (a.vocab > 0) c.vocab = a.vocab;
    if (a.transcript_len > 0) c.transcript_len = a.transcript_len;
    shapes.push_back(c);
  } else {
    if (a.preset == "small" || a.preset == "both") shapes.push_back(BenchConfig::small_preset());
    if (a.preset == "long" || a.preset == "both") shapes.push_back(BenchConfig::long_preset());
  }
  std::vector<CriterionKind> kinds;
  if (a.criterion != "ctc") kinds.push_back(CriterionKind::kAsg);
  if (a.criterion != "asg") kinds.push_back(CriterionKind::kCtc);

  std::vector<BenchTiming> rows;
  for (const auto& shape : shapes) {
    for (CriterionKind k : kinds) {
      for (int b : a.batches) {
        BenchConfig c = shape;
        c.criterion = k;
        c.batch = b;
        c.repetitions = a.repetitions;
        c.threads = g.threads;
        c.seed = g.seed;
        rows.push_back(asr::run_bench(c));
      }
    }
  }
  std::fputs(timing_table(rows).c_str(), stdout);
  if (!a.csv.empty()) {
    std::ofstream out(a.csv);
    if (!out) throw IoError("cannot write " + a.csv);
    out << timing_csv(std::span<const BenchTiming>(rows));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Letter-based speech recognition toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads, 0 = all available")->envname("ASR_THREADS")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Seed for every random input")->envname("ASR_SEED");

  FeaturesArgs fa;
  auto* features = app.add_subcommand("features", "Waveform to MFCC or power-spectrum features");
  features->add_option("input", fa.input, "16-bit mono WAV, or raw PCM with --raw-rate")->required()->check(CLI::ExistingFile);
  features->add_option("output", fa.output, "Feature matrix file")->required();
  features->add_option("--kind", fa.kind, "mfcc or power")->check(CLI::IsMember({"mfcc", "power"}));
  features->add_option("--raw-rate", fa.raw_rate, "Read headerless int16 PCM at this rate");
  features->add_flag("--no-normalize", fa.no_normalize, "Skip per-sequence mean/std normalization");

  LossArgs la;
  auto* loss = app.add_subcommand("loss", "ASG or CTC loss of one transcription");
  loss->add_option("--emissions", la.emissions, "T x L score matrix")->required()->check(CLI::ExistingFile);
  loss->add_option("--transitions", la.transitions, "(L+1) x L transitions, last row = start scores (ASG)");
  loss->add_option("--alphabet", la.alphabet, "Alphabet file (default: 30-symbol English)");
  auto* text_opt = loss->add_option("--text", la.text, "Transcription text");
  auto* spell_opt = loss->add_option("--spelling", la.spelling, "Space-separated label symbols");
  text_opt->excludes(spell_opt);
  loss->add_option("--criterion", la.criterion, "asg or ctc")->check(CLI::IsMember({"asg", "ctc"}));
  loss->add_option("--blank", la.blank, "CTC blank id (default: last column)");
  loss->add_flag("--strict", la.strict, "CTC: reject rows that are not log-normalized");
  loss->add_option("--grad", la.grad, "Write gradients to <prefix>.emissions.bin / .transitions.bin");

  ViterbiArgs va;
  auto* vit = app.add_subcommand("viterbi", "Best path through the full (or forced) graph");
  vit->add_option("--emissions", va.emissions)->required()->check(CLI::ExistingFile);
  vit->add_option("--transitions", va.transitions);
  vit->add_option("--alphabet", va.alphabet);
  auto* vtext = vit->add_option("--text", va.text, "Force alignment to this transcription");
  vit->add_option("--spelling", va.spelling)->excludes(vtext);

  TrainArgs ta;
  auto* train = app.add_subcommand("train-toy", "Train the toy acoustic model with ASG");
  train->add_option("config", ta.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  train->add_option("--checkpoint", ta.checkpoint, "Write the trained model here");
  train->add_option("--curve", ta.curve, "Write epoch,ler CSV here");
  train->add_flag("--verbose", ta.verbose, "Print epoch, train loss and held-out LER per epoch");

  DecodeArgs da;
  auto* dec = app.add_subcommand("decode", "Beam-search decoding with a lexicon and n-gram LM");
  dec->add_option("--emissions", da.emissions)->required();
  dec->add_option("--transitions", da.transitions);
  dec->add_option("--arpa", da.arpa)->required();
  dec->add_option("--lexicon", da.lexicon, "word<TAB>spelling per line")->required();
  dec->add_option("--alphabet", da.alphabet);
  dec->add_option("--alpha", da.cfg.alpha, "LM weight");
  dec->add_option("--beta", da.cfg.beta, "Per-word score (negative = penalty)");
  dec->add_option("--beam-size", da.cfg.beam_size)->check(CLI::PositiveNumber);
  dec->add_option("--beam-threshold", da.cfg.beam_threshold)->check(CLI::PositiveNumber);
  dec->add_option("--nbest", da.cfg.nbest)->check(CLI::PositiveNumber);
  dec->add_option("--max-words", da.cfg.max_words, "0 = unlimited")->check(CLI::NonNegativeNumber);
  dec->add_option("--mode", da.mode, "max or logadd")->check(CLI::IsMember({"max", "logadd"}));
  dec->add_option("--smear", da.smear, "Look-ahead inside words: max or logadd of subtree unigrams")
      ->check(CLI::IsMember({"max", "logadd"}));
  dec->add_option("--silence", da.silence, "none, optional or mandatory")
      ->check(CLI::IsMember({"none", "optional", "mandatory"}));

  std::string ref_path, hyp_path;
  auto* ler = app.add_subcommand("ler", "Letter error rate between line-aligned files");
  auto* wer = app.add_subcommand("wer", "Word error rate between line-aligned files");
  for (auto* sub : {ler, wer}) {
    sub->add_option("ref", ref_path)->required()->check(CLI::ExistingFile);
    sub->add_option("hyp", hyp_path)->required()->check(CLI::ExistingFile);
  }

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Time ASG and CTC loss + gradient");
  bench->add_option("--preset", ba.preset, "small, long or both")->check(CLI::IsMember({"small", "long", "both"}));
  bench->add_option("--criterion", ba.criterion, "asg, ctc or both")->check(CLI::IsMember({"asg", "ctc", "both"}));
  bench->add_option("--batch", ba.batches, "Batch sizes")->delimiter(',');
  bench->add_option("--repetitions", ba.repetitions, "Timed runs per row (after one warmup)");
  bench->add_option("--frames", ba.frames, "Custom shape instead of the presets");
  bench->add_option("--vocab", ba.vocab);
  bench->add_option("--transcript-len", ba.transcript_len);
  bench->add_option("--csv", ba.csv, "Also write the rows as CSV");

  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (g.threads > 0) omp_set_num_threads(g.threads);
#endif

  try {
    if (*features) return run_features(fa);
    if (*loss) return run_loss(la);
    if (*vit) return run_viterbi(va);
    if (*train) return run_train(ta);
    if (*dec) return run_decode(da);
    if (*ler || *wer) {
      const auto refs = read_lines(ref_path);
      const auto hyps = read_lines(hyp_path);
      if (*ler) print_report("LER", letter_error_rate(refs, hyps));
      else print_report("WER", word_error_rate(refs, hyps));
      return 0;
    }
    if (*bench) return run_bench(ba, g);
  } catch (const PruningError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kPruningExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
