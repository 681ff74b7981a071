// End-to-end acceptance checks. Prints one PASS/FAIL line per check and exits
// nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "compre/ablation.hpp"
#include "compre/random.hpp"
#include "compre/report.hpp"
#include "compre/synth.hpp"
#include "compre/toy_scorer.hpp"
#include "test_util.hpp"

namespace compre {
namespace {

using compre::testing::read_text;
using compre::testing::TempDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  std::string name;
  double time_limit_s;  // 0 means no limit
  std::function<Outcome()> run;
};

std::string fmt(double v, int decimals = 3) { return format_fixed(v, decimals); }

std::string random_word(std::mt19937_64& rng) {
  static const std::string letters = "abcdefgh";
  std::string w;
  const auto n = 1 + uniform_below(rng, 3);
  for (std::uint64_t i = 0; i < n; ++i) w += letters[uniform_below(rng, letters.size())];
  return w;
}

std::string random_text(std::mt19937_64& rng, std::uint64_t max_words) {
  std::string out;
  const auto n = uniform_below(rng, max_words + 1);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += random_word(rng);
    if (uniform_below(rng, 8) == 0) out += ",.?!"[uniform_below(rng, 4)];
  }
  return out;
}

McqItem random_item(std::mt19937_64& rng, int index) {
  McqItem item;
  item.id = "a" + std::to_string(index);
  item.context = random_text(rng, 60);
  item.question = random_word(rng) + " " + random_text(rng, 6);
  const auto n = 2 + uniform_below(rng, 4);
  for (std::uint64_t i = 0; i < n; ++i) item.options.push_back(random_word(rng) + " " + random_text(rng, 3));
  item.answer_index = static_cast<int>(uniform_below(rng, n));
  return item;
}

ToyScorerParams random_toy(std::span<const McqItem> items, int dim, std::uint64_t seed) {
  std::vector<PreparedItem> prepared;
  for (const auto& item : items) prepared.push_back(prepare_item(item, {}));
  auto params = random_params(build_vocabulary(prepared), dim, seed, 0.5);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (Eigen::Index i = 0; i < params.match_embedding.size(); ++i) params.match_embedding(i) = standard_normal(rng);
  params.head_bias = standard_normal(rng);
  return params;
}

Corpus synth(PositionProfile profile, double leak, int size, std::uint64_t seed, int n_options = 4,
             int vocab = 4000) {
  SynthSpec spec;
  spec.size = size;
  spec.n_options = n_options;
  spec.leak_rate = leak;
  spec.position_profile = profile;
  spec.vocab_size = vocab;
  spec.seed = seed;
  return generate(spec);
}

ToyScorer trained(const Corpus& corpus, ContextMode mode, std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.seed = seed;
  return ToyScorer(train_toy(corpus, cfg, mode).params);
}

Outcome softmax_validity() {
  std::mt19937_64 rng(101);
  std::vector<McqItem> items;
  for (int i = 0; i < 1000; ++i) items.push_back(random_item(rng, i));
  const ToyScorer scorer(random_toy(items, 16, 102));
  double worst_sum = 0.0;
  double worst_perm = 0.0;
  bool in_range = true;
  for (const auto& item : items) {
    for (auto mode : {ContextMode::standard, ContextMode::context_free}) {
      const Condition cond{mode, std::nullopt};
      const auto p = score_options(scorer, item, cond);
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.probs.begin(), p.probs.end(), 0.0) - 1.0));
      for (double v : p.probs) in_range = in_range && v >= 0.0 && v <= 1.0;

      std::vector<std::size_t> perm(item.options.size());
      std::iota(perm.begin(), perm.end(), 0);
      portable_shuffle(perm.begin(), perm.end(), rng);
      auto shuffled = item;
      for (std::size_t i = 0; i < perm.size(); ++i) shuffled.options[i] = item.options[perm[i]];
      const auto q = score_options(scorer, shuffled, cond);
      for (std::size_t i = 0; i < perm.size(); ++i) {
        worst_perm = std::max(worst_perm, std::abs(q.probs[i] - p.probs[perm[i]]));
      }
    }
  }
  const bool pass = in_range && worst_sum <= 1e-6 && worst_perm <= 1e-9;
  std::ostringstream d;
  d << "2000 distributions, max |sum-1| " << worst_sum << ", max permutation error " << worst_perm;
  return {pass, d.str()};
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(201);
  std::vector<McqItem> items;
  for (int i = 0; i < 12; ++i) items.push_back(random_item(rng, i));
  const auto params = random_toy(items, 8, 202);
  double worst = 0.0;
  int coords = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    GradCheckOptions opt;
    opt.coordinates = 64;
    opt.seed = 300 + i;
    opt.context_mode = i % 2 ? ContextMode::context_free : ContextMode::standard;
    worst = std::max(worst, grad_check(params, items[i], 1e-4, opt));
    coords += opt.coordinates;
  }
  std::ostringstream d;
  d << coords << " coordinates sampled, max relative error " << worst;
  return {worst < 1e-4, d.str()};
}

Outcome truncation_identities() {
  std::mt19937_64 rng(401);
  int violations = 0;
  long comparisons = 0;
  const ExtractMode modes[] = {ExtractMode::beginning, ExtractMode::end, ExtractMode::random_window};
  for (int trial = 0; trial < 500; ++trial) {
    const auto len = static_cast<std::size_t>(uniform_below(rng, 400));
    TokenSeq ctx;
    for (std::size_t i = 0; i < len; ++i) ctx.tokens.push_back(random_word(rng));
    const std::string id = "ctx" + std::to_string(trial);
    const std::uint64_t seed = rng();
    std::vector<TokenSeq> prefixes;
    for (int tau = 0; tau <= 100; ++tau) {
      for (auto mode : modes) {
        const auto out = extract_context(ctx, {tau, mode, seed}, id);
        const auto expected = static_cast<std::size_t>(std::floor(tau * static_cast<double>(len) / 100.0 + 0.5));
        violations += out.size() != expected;
        if (tau == 100) violations += out != ctx;
        if (tau == 0) violations += !out.empty();
        if (mode == ExtractMode::beginning) prefixes.push_back(out);
        ++comparisons;
      }
    }
    for (std::size_t a = 0; a < prefixes.size(); ++a) {
      for (std::size_t b = a + 1; b < prefixes.size(); ++b) {
        violations += !std::equal(prefixes[a].tokens.begin(), prefixes[a].tokens.end(), prefixes[b].tokens.begin());
        ++comparisons;
      }
    }
  }
  return {violations == 0, "500 contexts, " + std::to_string(comparisons) + " checks, " +
                               std::to_string(violations) + " violations"};
}

Outcome sweep_consistency() {
  const auto train = synth(PositionProfile::uniform, 0.3, 500, 501);
  const auto test = synth(PositionProfile::uniform, 0.3, 200, 502);
  const auto scorer = trained(train, ContextMode::standard);
  const auto full = evaluate(scorer, test, {ContextMode::standard, std::nullopt});
  int mismatches = 0;
  const auto grid = default_tau_grid();
  for (auto mode : {ExtractMode::beginning, ExtractMode::end, ExtractMode::random_window}) {
    const auto sweep = sweep_tau(scorer, test, grid, mode, 7);
    const auto& at100 = sweep.records.back();
    if (sweep.curve.points.back().tau != 100 || at100.size() != full.records.size()) return {false, "shape mismatch"};
    for (std::size_t i = 0; i < at100.size(); ++i) {
      const auto& a = at100[i];
      const auto& b = full.records[i];
      mismatches += a.item_id != b.item_id || a.probs != b.probs || a.predicted != b.predicted;
    }
  }
  return {mismatches == 0, "200 items x 3 modes, " + std::to_string(mismatches) + " mismatches, full accuracy " +
                               fmt(full.accuracy)};
}

Outcome chance_floor() {
  const auto corpus = synth(PositionProfile::uniform, 0.0, 1000, 601);
  std::vector<PreparedItem> prepared;
  for (const auto& item : corpus.items) prepared.push_back(prepare_item(item, {}));
  const ToyScorer scorer(zero_params(build_vocabulary(prepared), 32));
  const double acc = evaluate(scorer, corpus, {ContextMode::standard, std::nullopt}).accuracy;
  return {acc >= 0.22 && acc <= 0.28, "accuracy " + fmt(acc) + " (band 0.220..0.280)"};
}

Outcome world_knowledge_recovery() {
  bool pass = true;
  std::string detail;
  for (double lam : {0.0, 0.5, 1.0}) {
    const auto train = synth(PositionProfile::uniform, lam, 2000, 701);
    const auto test = synth(PositionProfile::uniform, lam, 1000, 702);
    const auto scorer = trained(train, ContextMode::context_free);
    const double acc = evaluate(scorer, test, {ContextMode::context_free, std::nullopt}).accuracy;
    const double oracle = lam + (1.0 - lam) / 4.0;
    pass = pass && std::abs(acc - oracle) <= 0.05;
    if (!detail.empty()) detail += ", ";
    detail += "lambda " + fmt(lam, 1) + ": " + fmt(acc) + " vs " + fmt(oracle);
  }
  return {pass, detail};
}

std::map<ExtractMode, double> positional(PositionProfile profile, std::uint64_t seed) {
  const auto train = synth(profile, 0.0, 1000, seed);
  const auto test = synth(profile, 0.0, 1000, seed + 1);
  const auto scorer = trained(train, ContextMode::standard);
  SweepOptions opt;
  opt.repetitions = 3;
  std::map<ExtractMode, double> acc;
  for (const auto& row : positional_study(scorer, test, 20, 11, opt)) acc[row.mode] = row.accuracy;
  return acc;
}

Outcome positional_ordering() {
  const auto front = positional(PositionProfile::front, 801);
  const auto end = positional(PositionProfile::end, 811);
  const double fb = front.at(ExtractMode::beginning);
  const double fr = front.at(ExtractMode::random_window);
  const double fe = front.at(ExtractMode::end);
  const double eb = end.at(ExtractMode::beginning);
  const double er = end.at(ExtractMode::random_window);
  const double ee = end.at(ExtractMode::end);
  const bool front_ok = fb - fe >= 0.15 && fb >= fr - 0.03 && fr >= fe - 0.03;
  const bool end_ok = ee - eb >= 0.15 && ee >= er - 0.03 && er >= eb - 0.03;
  return {front_ok && end_ok, "front b/r/e " + fmt(fb) + "/" + fmt(fr) + "/" + fmt(fe) + ", end b/r/e " + fmt(eb) +
                                  "/" + fmt(er) + "/" + fmt(ee)};
}

std::string curve_text(const AblationCurve& curve) {
  std::string s;
  for (const auto& p : curve.points) s += (s.empty() ? "" : " ") + fmt(p.accuracy, 2);
  return s;
}

Outcome curve_shape() {
  const auto grid = default_tau_grid();
  const auto uniform_train = synth(PositionProfile::uniform, 0.0, 1000, 901);
  const auto uniform_test = synth(PositionProfile::uniform, 0.0, 1000, 902);
  const auto uniform = sweep_tau(trained(uniform_train, ContextMode::standard), uniform_test, grid,
                                 ExtractMode::beginning, 0)
                           .curve;
  double worst_drop = 0.0;
  for (std::size_t i = 0; i < uniform.points.size(); ++i) {
    for (std::size_t j = i + 1; j < uniform.points.size(); ++j) {
      worst_drop = std::max(worst_drop, uniform.points[i].accuracy - uniform.points[j].accuracy);
    }
  }

  const auto front_train = synth(PositionProfile::front, 0.0, 1000, 911);
  const auto front_test = synth(PositionProfile::front, 0.0, 1000, 912);
  const auto front =
      sweep_tau(trained(front_train, ContextMode::standard), front_test, grid, ExtractMode::beginning, 0).curve;
  const double top = front.points.back().accuracy;
  double worst_gap = 0.0;
  for (const auto& p : front.points) {
    if (p.tau >= 40) worst_gap = std::max(worst_gap, std::abs(p.accuracy - top));
  }
  const bool pass = worst_drop <= 0.03 && worst_gap <= 0.02;
  return {pass, "uniform [" + curve_text(uniform) + "] max drop " + fmt(worst_drop) + "; front [" +
                    curve_text(front) + "] max gap from tau>=40 " + fmt(worst_gap)};
}

Outcome variable_option_count() {
  const auto train = synth(PositionProfile::uniform, 0.5, 1000, 1001);
  const auto scorer = trained(train, ContextMode::standard);
  bool pass = true;
  std::string detail;
  for (int n : {3, 2}) {
    const auto test = synth(PositionProfile::uniform, 0.5, 1000, 1002 + n, n);
    for (auto mode : {ContextMode::standard, ContextMode::context_free}) {
      const double acc = evaluate(scorer, test, {mode, std::nullopt}).accuracy;
      const double chance = random_baseline(test);
      pass = pass && acc > chance;
      if (!detail.empty()) detail += ", ";
      detail += "N=" + std::to_string(n) + " " + std::string(to_string(mode)) + " " + fmt(acc) + " > " + fmt(chance);
    }
  }
  return {pass, detail};
}

int cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::cli_main(args, out, err);
  if (code != cli::kExitOk) std::cerr << "  cli failed (" << code << "): " << err.str();
  return code;
}

Outcome cli_determinism() {
  TempDir dir;
  const auto p = [&](const std::string& name) { return dir / name; };
  if (cli({"synth", "--size", "300", "--profile", "front", "--leak", "0.3", "--seed", "5", "--out", p("c.jsonl")}) ||
      cli({"train", "--corpus", p("c.jsonl"), "--epochs", "4", "--out", p("toy.json")}) ||
      cli({"train", "--corpus", p("c.jsonl"), "--epochs", "4", "--condition", "context_free", "--out",
           p("cf.json")})) {
    return {false, "setup failed"};
  }
  const std::vector<std::vector<std::string>> runs{
      {"sweep", "--corpus", p("c.jsonl"), "--scorer", p("toy.json"), "--mode", "random_window", "--repetitions", "2",
       "--seed", "17", "--workers", "4", "--batch-size", "7", "--out", p("sweep.csv")},
      {"positional", "--corpus", p("c.jsonl"), "--scorer", p("toy.json"), "--out", p("pos.csv")},
      {"eval", "--corpus", p("c.jsonl"), "--scorer", p("toy.json"), "--tau", "30", "--mode", "random_window", "--out",
       p("eval.csv")},
      {"wkreport", "--corpus", p("c.jsonl"), "--standard", p("toy.json"), "--context-free", p("cf.json"), "--out",
       p("wk.csv")},
  };
  int identical = 0;
  int total = 0;
  for (const auto& args : runs) {
    if (cli(args)) return {false, args.front() + " failed"};
    const auto out = args[args.size() - 1];
    const auto original = read_text(out);
    for (int rep = 0; rep < 2; ++rep) {
      std::filesystem::remove(out);
      if (cli({"replay", out + ".manifest.json"})) return {false, "replay of " + args.front() + " failed"};
      identical += read_text(out) == original && !original.empty();
      ++total;
    }
  }
  return {identical == total, std::to_string(identical) + "/" + std::to_string(total) + " replays byte-identical"};
}

}  // namespace
}  // namespace compre

int main() {
  using namespace compre;
  const std::vector<Check> checks{
      {"softmax_validity", 10, softmax_validity},
      {"gradient_correctness", 5, gradient_correctness},
      {"truncation_identities", 5, truncation_identities},
      {"sweep_consistency", 0, sweep_consistency},
      {"chance_floor", 0, chance_floor},
      {"world_knowledge_recovery", 300, world_knowledge_recovery},
      {"positional_ordering", 0, positional_ordering},
      {"curve_shape", 0, curve_shape},
      {"variable_option_count", 0, variable_option_count},
      {"cli_determinism", 0, cli_determinism},
  };
  int failures = 0;
  for (const auto& check : checks) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = check.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt(secs, 2) + "s";
    if (check.time_limit_s > 0) {
      timing += " (limit " + fmt(check.time_limit_s, 0) + "s)";
      if (secs >= check.time_limit_s) outcome.pass = false;
    }
    failures += !outcome.pass;
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << check.name << ": " << outcome.detail << " [" << timing << "]"
              << std::endl;
  }
  std::cout << (checks.size() - failures) << "/" << checks.size() << " checks passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
