#include <gtest/gtest.h>

#include <cmath>

#include "compre/error.hpp"
#include "compre/scorer.hpp"
#include "compre/toy_scorer.hpp"
#include "test_util.hpp"

namespace compre {
namespace {

using compre::testing::make_item;

ToyScorer zeroed_scorer(const std::vector<McqItem>& items) {
  std::vector<PreparedItem> prepared;
  for (const auto& item : items) prepared.push_back(prepare_item(item, {}));
  return ToyScorer(zero_params(build_vocabulary(prepared), 8));
}

TEST(Softmax, NormalizesAndIsShiftInvariant) {
  const std::vector<double> s{1.0, 2.0, 3.0};
  const auto p = softmax(s);
  EXPECT_TRUE(is_normalized(p));
  const std::vector<double> shifted{1001.0, 1002.0, 1003.0};
  const auto q = softmax(shifted);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p.probs[i], q.probs[i], 1e-12);
  EXPECT_NEAR(p.probs[2], std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)), 1e-12);
}

TEST(Softmax, ExtremeScoresStayFinite) {
  const std::vector<double> s{-1e6, 0.0, 1e6};
  const auto p = softmax(s);
  EXPECT_TRUE(is_normalized(p));
  EXPECT_DOUBLE_EQ(p.probs[2], 1.0);
}

TEST(Predict, ArgmaxWithLowestIndexTieBreak) {
  EXPECT_EQ(predict({{0.1, 0.7, 0.2}}), 1);
  EXPECT_EQ(predict({{0.5, 0.5}}), 0);
  EXPECT_EQ(predict({{0.25, 0.25, 0.25, 0.25}}), 0);
  EXPECT_EQ(predict({{0.2, 0.4, 0.4}}), 1);
}

TEST(Normalized, RejectsBadDistributions) {
  EXPECT_FALSE(is_normalized({{0.4, 0.4}}));
  EXPECT_FALSE(is_normalized({{1.2, -0.2}}));
  EXPECT_TRUE(is_normalized({{0.5, 0.5 + 5e-7}}));
}

TEST(PrepareItem, ContextFreeRejectsExtract) {
  const auto item = make_item("a", "some context", "q", {"x", "y"});
  EXPECT_THROW(prepare_item(item, {ContextMode::context_free, ExtractSpec{}}), std::invalid_argument);
  const auto cf = prepare_item(item, {ContextMode::context_free, std::nullopt});
  EXPECT_FALSE(cf.context.has_value());
}

TEST(PrepareItem, PrefitsContextBeforeExtraction) {
  std::string ctx;
  for (int i = 0; i < 100; ++i) ctx += "w" + std::to_string(i) + " ";
  const auto item = make_item("a", ctx, "q", {"x", "y y"});
  // budget = 20 - (1 + 2 + 3) = 14 tokens; beginning 50% keeps 7 of them.
  const auto full = prepare_item(item, {}, 20);
  EXPECT_EQ(full.context->size(), 14u);
  const auto half = prepare_item(item, {ContextMode::standard, ExtractSpec{50, ExtractMode::end, 0}}, 20);
  EXPECT_EQ(half.context->tokens, (std::vector<std::string>{"w7", "w8", "w9", "w10", "w11", "w12", "w13"}));
}

TEST(PrepareItem, OversizedQuestionIsDataError) {
  const auto item = make_item("long", "", "a b c d e f g h", {"x", "y"});
  EXPECT_THROW(prepare_item(item, {}, 8), DataError);
}

TEST(ScoreOptions, ZeroedToyIsUniform) {
  const auto four = make_item("a", "The cat sat.", "Who sat?", {"cat", "dog", "cow", "hen"});
  const auto scorer = zeroed_scorer({four});
  const auto p = score_options(scorer, four, {});
  ASSERT_EQ(p.size(), 4u);
  for (double v : p.probs) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(ScoreOptions, ZeroedToyOnDebateItemIsHalf) {
  const auto item = build_debate_item("d", "We must act now.", "climate", Stance::pro, ContextKind::speech_manual);
  const auto scorer = zeroed_scorer({item});
  const auto p = score_options(scorer, item, {});
  EXPECT_EQ(p.probs, (std::vector<double>{0.5, 0.5}));
}

TEST(ContextMode, ParseRoundTrip) {
  for (auto m : {ContextMode::standard, ContextMode::context_free}) EXPECT_EQ(parse_context_mode(to_string(m)), m);
  EXPECT_THROW(parse_context_mode("none"), std::invalid_argument);
}

}  // namespace
}  // namespace compre
