#include <gtest/gtest.h>

#include <random>

#include "asr/metrics.h"
#include "asr/types.h"
#include "oracles.h"

namespace asr {
namespace {

TEST(EditDistance, ClassicCases) {
  EXPECT_EQ(edit_distance("cat", "cat"), 0u);
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
  EXPECT_EQ(edit_distance("abc", ""), 3u);
}

TEST(EditDistance, MatchesFullTableOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> a(rng() % 9), b(rng() % 9);
    for (auto& x : a) x = static_cast<int>(rng() % 3);
    for (auto& x : b) x = static_cast<int>(rng() % 3);
    EXPECT_EQ(edit_distance<int>(a, b), oracle::full_table_edit_distance(a, b));
  }
}

TEST(LetterErrorRate, Kitten) {
  const std::vector<std::string> ref{"kitten"}, hyp{"sitting"};
  const auto r = letter_error_rate(ref, hyp);
  EXPECT_EQ(r.edits, 3u);
  EXPECT_EQ(r.reference_length, 6u);
  EXPECT_DOUBLE_EQ(r.rate, 0.5);
}

TEST(LetterErrorRate, PerfectIsZero) {
  const std::vector<std::string> ref{"cat", "the dog"};
  EXPECT_EQ(letter_error_rate(ref, ref).rate, 0.0);
}

TEST(LetterErrorRate, MicroAveraged) {
  const std::vector<std::string> ref{"ab", "abcdefgh"}, hyp{"", "abcdefgh"};
  const auto r = letter_error_rate(ref, hyp);
  EXPECT_DOUBLE_EQ(r.rate, 2.0 / 10.0);
  EXPECT_EQ(r.per_utterance, (std::vector<size_t>{2, 0}));
}

TEST(WordErrorRate, Basic) {
  const std::vector<std::string> ref{"the cat sat"}, hyp{"the  bat sat down"};
  const auto r = word_error_rate(ref, hyp);
  EXPECT_EQ(r.edits, 2u);
  EXPECT_EQ(r.reference_length, 3u);
}

TEST(Metrics, CountMismatch) {
  const std::vector<std::string> ref{"a", "b"}, hyp{"a"};
  EXPECT_THROW(letter_error_rate(ref, hyp), Error);
  EXPECT_THROW(word_error_rate(ref, hyp), Error);
}

TEST(SplitWords, CollapsesWhitespace) {
  EXPECT_EQ(split_words("  a\tb  c "), (std::vector<std::string>{"a", "b", "c"}));
}

}  // namespace
}  // namespace asr
