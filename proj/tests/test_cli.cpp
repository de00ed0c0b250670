// Runs the asr binary end to end on committed and generated fixtures.

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "asr/bench.h"
#include "asr/criterion.h"
#include "asr/decoder.h"
#include "asr/features.h"
#include "asr/io.h"
#include "oracles.h"

namespace asr {
namespace {

namespace fs = std::filesystem;

const std::string kData = ASR_TEST_DATA;

struct RunResult {
  int status = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(ASR_CLI) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 512> buf{};
  while (size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("asr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

std::string tiny_args() {
  return "--emissions " + kData + "/tiny_emissions.bin --transitions " + kData + "/tiny_transitions.bin --alphabet " +
         kData + "/tiny.alphabet";
}

TEST_F(CliTest, UniformScoresGiveCountingLoss) {
  // Zero scores: every frame labeling scores 0, and exactly one of the 6^3
  // is a path for "a" over 3 frames.
  write_matrix_file(path("em.bin"), {MatrixXf::Zero(3, 6), 10.0f});
  const auto r = run_cli("loss --emissions " + path("em.bin") + " --alphabet " + kData + "/tiny.alphabet --text a");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NEAR(std::stod(r.out), 3 * std::log(6.0), 1e-6);
}

TEST_F(CliTest, CommittedFixtureMatchesBruteForce) {
  const MatrixXd f = read_matrix_file(kData + "/tiny_emissions.bin").values.cast<double>();
  const MatrixXd t = read_matrix_file(kData + "/tiny_transitions.bin").values.cast<double>();
  const int L = static_cast<int>(f.cols());
  const MatrixXd trans = t.topRows(L);
  const VectorXd start = t.row(L).transpose();
  const auto r = run_cli("loss " + tiny_args() + " --spelling 'b a b'");
  ASSERT_EQ(r.status, 0) << r.out;
  const double expected = oracle::asg_loss(f, trans, start, {1, 0, 1});
  EXPECT_NEAR(std::stod(r.out), expected, 1e-4 * std::max(1.0, std::abs(expected)));
}

TEST_F(CliTest, GradientFilesMatchLibrary) {
  std::mt19937_64 rng(3);
  const MatrixXf f = oracle::random_matrix(rng, 7, 6, 1.0).cast<float>();
  MatrixXf tr(7, 6);
  tr = oracle::random_matrix(rng, 7, 6, 0.5).cast<float>();
  write_matrix_file(path("em.bin"), {f, 10.0f});
  write_matrix_file(path("tr.bin"), {tr, 0.0f});
  const auto r = run_cli("loss --emissions " + path("em.bin") + " --transitions " + path("tr.bin") + " --alphabet " +
                         kData + "/tiny.alphabet --spelling 'a b 2' --grad " + path("g"));
  ASSERT_EQ(r.status, 0) << r.out;

  const TransitionTable<float> table{tr.topRows(6), tr.row(6).transpose()};
  const auto lib = asg_loss(EmissionTable<float>{f, false}, table, LabelSequence{0, 1, 4});
  EXPECT_NEAR(std::stod(r.out), lib.loss, 1e-6 * std::max(1.0, std::abs(lib.loss)));
  const MatrixXf ge = read_matrix_file(path("g.emissions.bin")).values;
  const MatrixXf gt = read_matrix_file(path("g.transitions.bin")).values;
  ASSERT_EQ(ge.rows(), 7);
  ASSERT_EQ(gt.rows(), 7);
  EXPECT_TRUE(ge.isApprox(lib.d_emissions, 1e-6f));
  EXPECT_TRUE(gt.topRows(6).isApprox(lib.d_transitions, 1e-6f));
  EXPECT_TRUE(gt.row(6).transpose().isApprox(lib.d_start, 1e-6f));
}

TEST_F(CliTest, CtcLossUsesLastColumnAsBlank) {
  std::mt19937_64 rng(5);
  const MatrixXd f = log_softmax(oracle::random_matrix(rng, 5, 4, 1.0));
  write_matrix_file(path("em.bin"), {f.cast<float>(), 10.0f});
  Alphabet abc({"a", "b", "c", "|", "2", "3"});
  abc.save(path("abc.alphabet"));
  const auto r = run_cli("loss --criterion ctc --strict --emissions " + path("em.bin") + " --alphabet " +
                         path("abc.alphabet") + " --spelling 'a a b'");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NEAR(std::stod(r.out), oracle::ctc_loss(f, {0, 0, 1}, 3), 1e-4);
}

TEST_F(CliTest, DecodeMatchesGoldenFileAndExhaustiveSearch) {
  const std::string args = "decode " + tiny_args() + " --arpa " + kData + "/tiny.arpa --lexicon " + kData +
                           "/tiny_lexicon.txt --alpha 0.5 --beta 0.25 --nbest 5";
  const auto r = run_cli(args);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out, slurp(kData + "/tiny_decode.tsv"));

  const Alphabet alphabet = Alphabet::load(kData + "/tiny.alphabet");
  const EmissionTable<double> em{read_matrix_file(kData + "/tiny_emissions.bin").values.cast<double>(), false};
  const MatrixXd t = read_matrix_file(kData + "/tiny_transitions.bin").values.cast<double>();
  const TransitionTable<double> tr{t.topRows(6), t.row(6).transpose()};
  const NGramLM lm = NGramLM::load_arpa(kData + "/tiny.arpa");
  const LexiconTrie lex = load_lexicon(kData + "/tiny_lexicon.txt", alphabet);
  DecoderConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 0.25;
  const DecodeResult best = exhaustive_decode(em, tr, lm, lex, alphabet, cfg, 4);
  std::istringstream first(r.out);
  int rank = 0;
  double score = 0;
  first >> rank >> score;
  EXPECT_NEAR(score, best.score, 1e-6);
}

TEST_F(CliTest, DecodeReportsPruningFailureWithDedicatedStatus) {
  // One frame cannot spell any word followed by mandatory silence.
  write_matrix_file(path("em.bin"), {MatrixXf::Zero(1, 6), 10.0f});
  const auto r = run_cli("decode --emissions " + path("em.bin") + " --alphabet " + kData + "/tiny.alphabet --arpa " +
                         kData + "/tiny.arpa --lexicon " + kData + "/tiny_lexicon.txt --silence mandatory");
  EXPECT_EQ(r.status, 2) << r.out;
}

TEST_F(CliTest, MissingInputsFailWithMessage) {
  const auto r = run_cli("decode " + tiny_args() + " --arpa " + path("missing.arpa") + " --lexicon " + kData +
                         "/tiny_lexicon.txt");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("missing.arpa"), std::string::npos) << r.out;
  EXPECT_NE(run_cli("loss --text a").status, 0);
  EXPECT_NE(run_cli("bogus").status, 0);
}

TEST_F(CliTest, TrainToyRejectsConfigWithMissingKey) {
  std::ofstream(path("bad.json")) << R"({"network": ")" << ASR_SOURCE_DIR << R"(/configs/toy.net",
    "data": {"num_samples": 10, "min_letters": 2, "max_letters": 3, "min_letter_frames": 5,
             "max_letter_frames": 6, "seed": 1},
    "train": {"epochs": 1, "holdout": 2, "learning_rate": 0.1, "clip_norm": 1.0, "seed": 1}})";
  const auto r = run_cli("train-toy " + path("bad.json"));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("data.noise"), std::string::npos) << r.out;
}

TEST_F(CliTest, TrainToyWithZeroLearningRateHasFlatCurve) {
  std::ofstream(path("lr0.json")) << R"({"network": ")" << ASR_SOURCE_DIR << R"(/configs/toy.net",
    "data": {"num_samples": 24, "min_letters": 2, "max_letters": 3, "min_letter_frames": 5,
             "max_letter_frames": 6, "noise": 0.3, "seed": 4},
    "train": {"epochs": 3, "holdout": 8, "learning_rate": 0.0, "clip_norm": 1.0, "seed": 1}})";
  const auto r = run_cli("train-toy " + path("lr0.json") + " --curve " + path("curve.csv") + " --checkpoint " +
                         path("model.ckpt"));
  ASSERT_EQ(r.status, 0) << r.out;
  std::istringstream csv(slurp(path("curve.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,ler");
  std::vector<std::string> lers;
  while (std::getline(csv, line)) lers.push_back(line.substr(line.find(',') + 1));
  ASSERT_EQ(lers.size(), 4u);
  for (const auto& l : lers) EXPECT_EQ(l, lers.front());
  EXPECT_NO_THROW(load_checkpoint(path("model.ckpt")));
}

TEST_F(CliTest, ErrorRates) {
  std::ofstream(path("ref.txt")) << "the cat sat\nhello\n";
  std::ofstream(path("hyp.txt")) << "the bat sat\nhelo\n";
  const auto w = run_cli("wer " + path("ref.txt") + " " + path("hyp.txt"));
  ASSERT_EQ(w.status, 0) << w.out;
  EXPECT_EQ(w.out, "WER\t0.500000\t2\t4\n");
  const auto l = run_cli("ler " + path("ref.txt") + " " + path("hyp.txt"));
  ASSERT_EQ(l.status, 0) << l.out;
  EXPECT_EQ(l.out.substr(0, 4), "LER\t");
}

TEST_F(CliTest, FeaturesFromWav) {
  Waveform w;
  w.samples = VectorXd::LinSpaced(16000, 0, 1000).array().sin() * 0.3;
  write_wav(path("tone.wav"), w);
  const auto r = run_cli("features " + path("tone.wav") + " " + path("f.bin"));
  ASSERT_EQ(r.status, 0) << r.out;
  const FeatureSequence f = load_features(path("f.bin"));
  EXPECT_EQ(r.out, std::to_string(f.num_frames()) + "\t" + std::to_string(f.dim()) + "\n");
  EXPECT_EQ(f.dim(), 39);
  const auto p = run_cli("features --kind power --no-normalize " + path("tone.wav") + " " + path("p.bin"));
  ASSERT_EQ(p.status, 0) << p.out;
}

TEST_F(CliTest, BenchWritesParseableCsv) {
  const auto r = run_cli("--threads 1 bench --criterion asg --frames 20 --vocab 6 --transcript-len 5 "
                         "--repetitions 3 --batch 1,2 --csv " + path("b.csv"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto rows = parse_timing_csv(slurp(path("b.csv")));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].batch, 1);
  EXPECT_EQ(rows[1].batch, 2);
  EXPECT_EQ(rows[1].threads, 1);
  EXPECT_EQ(rows[0].frames, 20);
}

}  // namespace
}  // namespace asr
