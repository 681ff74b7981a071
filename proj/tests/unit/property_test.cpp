// Randomized property checks over many generated cases with fixed seeds.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "compre/ablation.hpp"
#include "compre/corpus.hpp"
#include "compre/random.hpp"
#include "compre/synth.hpp"
#include "compre/toy_scorer.hpp"

namespace compre {
namespace {

std::string random_word(std::mt19937_64& rng) {
  static const std::string letters = "abcdefghij";
  std::string w;
  const auto n = 1 + uniform_below(rng, 4);
  for (std::uint64_t i = 0; i < n; ++i) w += letters[uniform_below(rng, letters.size())];
  return w;
}

std::string random_text(std::mt19937_64& rng, int max_words) {
  std::string out;
  const auto n = uniform_below(rng, static_cast<std::uint64_t>(max_words) + 1);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += random_word(rng);
    if (uniform_below(rng, 6) == 0) out += ",.?!"[uniform_below(rng, 4)];
  }
  return out;
}

McqItem random_item(std::mt19937_64& rng, int index) {
  McqItem item;
  item.id = "r" + std::to_string(index);
  item.context = random_text(rng, 40);
  item.question = random_word(rng) + " " + random_text(rng, 5);
  const auto n = 2 + uniform_below(rng, 4);
  for (std::uint64_t i = 0; i < n; ++i) item.options.push_back(random_word(rng) + " " + random_text(rng, 2));
  item.answer_index = static_cast<int>(uniform_below(rng, n));
  return item;
}

ToyScorer random_scorer(const std::vector<McqItem>& items, std::uint64_t seed) {
  std::vector<PreparedItem> prepared;
  for (const auto& item : items) prepared.push_back(prepare_item(item, {}));
  auto params = random_params(build_vocabulary(prepared), 8, seed, 0.5);
  std::mt19937_64 rng(seed);
  for (Eigen::Index i = 0; i < params.match_embedding.size(); ++i) params.match_embedding(i) = standard_normal(rng);
  return ToyScorer(std::move(params));
}

TEST(Property, PermutingOptionsPermutesDistribution) {
  std::mt19937_64 rng(1);
  std::vector<McqItem> items;
  for (int i = 0; i < 200; ++i) items.push_back(random_item(rng, i));
  const auto scorer = random_scorer(items, 2);
  for (const auto& item : items) {
    std::vector<std::size_t> perm(item.options.size());
    std::iota(perm.begin(), perm.end(), 0);
    portable_shuffle(perm.begin(), perm.end(), rng);
    auto shuffled = item;
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled.options[i] = item.options[perm[i]];
    for (auto mode : {ContextMode::standard, ContextMode::context_free}) {
      const auto p = score_options(scorer, item, {mode, std::nullopt});
      const auto q = score_options(scorer, shuffled, {mode, std::nullopt});
      ASSERT_TRUE(is_normalized(p));
      for (std::size_t i = 0; i < perm.size(); ++i) ASSERT_NEAR(q.probs[i], p.probs[perm[i]], 1e-12);
    }
  }
}

TEST(Property, EmptyExtractEqualsContextFree) {
  std::mt19937_64 rng(3);
  std::vector<McqItem> items;
  for (int i = 0; i < 200; ++i) items.push_back(random_item(rng, i));
  const auto scorer = random_scorer(items, 4);
  for (const auto& item : items) {
    const auto empty = score_options(scorer, item, {ContextMode::standard, ExtractSpec{0, ExtractMode::end, 0}});
    const auto free = score_options(scorer, item, {ContextMode::context_free, std::nullopt});
    ASSERT_EQ(empty, free);
  }
}

TEST(Property, ArgmaxIgnoresConstantShift) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s(2 + uniform_below(rng, 5));
    for (auto& v : s) v = 3.0 * standard_normal(rng);
    const double c = 50.0 * standard_normal(rng);
    auto shifted = s;
    for (auto& v : shifted) v += c;
    ASSERT_EQ(predict(softmax(s)), predict(softmax(shifted)));
  }
}

TEST(Property, ExtractIsContiguousWithRoundedLength) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const auto len = static_cast<std::size_t>(uniform_below(rng, 300));
    TokenSeq ctx;
    for (std::size_t i = 0; i < len; ++i) ctx.tokens.push_back(std::to_string(i));
    const int tau = static_cast<int>(uniform_below(rng, 101));
    const auto mode = static_cast<ExtractMode>(uniform_below(rng, 3));
    const auto out = extract_context(ctx, {tau, mode, rng()}, "item" + std::to_string(trial));
    const auto expected = static_cast<std::size_t>(std::floor(tau * static_cast<double>(len) / 100.0 + 0.5));
    ASSERT_EQ(out.size(), expected);
    if (out.empty()) continue;
    const auto start = std::stoul(out.tokens.front());
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out.tokens[i], std::to_string(start + i));
  }
}

TEST(Property, BeginningExtractsArePrefixes) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    TokenSeq ctx;
    const auto len = uniform_below(rng, 200);
    for (std::uint64_t i = 0; i < len; ++i) ctx.tokens.push_back(random_word(rng));
    for (int a = 0; a <= 100; a += 5) {
      const auto small = extract_context(ctx, {a, ExtractMode::beginning, 0}, "x");
      for (int b = a; b <= 100; b += 5) {
        const auto big = extract_context(ctx, {b, ExtractMode::beginning, 0}, "x");
        ASSERT_TRUE(std::equal(small.tokens.begin(), small.tokens.end(), big.tokens.begin()));
      }
    }
  }
}

TEST(Property, BeginningModeIgnoresTokensOutsidePrefix) {
  SynthSpec spec;
  spec.size = 200;
  spec.seed = 8;
  const auto corpus = generate(spec);
  TrainConfig cfg;
  cfg.epochs = 2;
  const ToyScorer scorer(train_toy(corpus, cfg, ContextMode::standard).params);
  std::mt19937_64 rng(9);
  for (const int tau : {10, 30, 60}) {
    auto flipped = corpus;
    for (auto& item : flipped.items) {
      auto ctx = tokenize(item.context);
      const auto keep = retained_count(ctx.size(), tau);
      const auto pos = keep + uniform_below(rng, ctx.size() - keep);
      ctx.tokens[pos] = "w" + std::to_string(uniform_below(rng, 2000));
      item.context = join_tokens(ctx);
    }
    const Condition cond{ContextMode::standard, ExtractSpec{tau, ExtractMode::beginning, 0}};
    EXPECT_EQ(evaluate(scorer, corpus, cond).records, evaluate(scorer, flipped, cond).records) << "tau " << tau;
  }
}

TEST(Property, ClassifyIsMonotone) {
  std::mt19937_64 rng(10);
  const auto grid = default_tau_grid();
  auto rank = [](const ComprehensionLabel& l) {
    return l.level == ComprehensionLevel::full ? 2 : l.level == ComprehensionLevel::partial ? 1 : 0;
  };
  for (int trial = 0; trial < 2000; ++trial) {
    std::map<int, bool> m;
    for (int t : grid) m[t] = uniform_below(rng, 2) == 1;
    const bool cf = uniform_below(rng, 2) == 1;
    const auto before = classify_question(m, cf);
    // Turning any wrong point correct must never push the label toward full.
    for (int t : grid) {
      if (m[t]) continue;
      auto after_map = m;
      after_map[t] = true;
      const auto after = classify_question(after_map, cf);
      if (before.level == ComprehensionLevel::partial) ASSERT_LE(rank(after), rank(before));
      if (after.tau_star >= 0 && before.tau_star >= 0) ASSERT_LE(after.tau_star, before.tau_star);
    }
  }
}

TEST(Property, CanonicalRoundTripRandomCorpora) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Corpus corpus{"rt", {}};
    for (int i = 0; i < 30; ++i) {
      auto item = random_item(rng, i);
      item.context_kind = static_cast<ContextKind>(uniform_below(rng, 4));
      if (uniform_below(rng, 2)) item.meta["note"] = random_text(rng, 3) + "\t\"q\"";
      corpus.items.push_back(std::move(item));
    }
    std::stringstream buf;
    write_canonical_jsonl(corpus, buf);
    ASSERT_EQ(read_canonical_jsonl(buf, "rt"), corpus);
  }
}

TEST(Property, DialogueJoinIsAssociative) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Turn> a(1 + uniform_below(rng, 4));
    std::vector<Turn> b(1 + uniform_below(rng, 4));
    for (auto* turns : {&a, &b}) {
      for (auto& t : *turns) t = {uniform_below(rng, 2) ? "M" : "W", random_text(rng, 6) + "x"};
    }
    auto ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    ASSERT_EQ(build_dialogue_context(ab), build_dialogue_context(a) + "\n" + build_dialogue_context(b));
  }
}

}  // namespace
}  // namespace compre
