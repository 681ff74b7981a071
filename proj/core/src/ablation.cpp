#include "compre/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "compre/error.hpp"

namespace compre {

EvalResult evaluate(const Scorer& scorer, const Corpus& corpus, const Condition& condition,
                    const EvalOptions& options) {
  require_valid(corpus);
  const std::size_t n = corpus.items.size();
  const std::size_t batch = static_cast<std::size_t>(std::max(1, options.batch_size));
  const std::size_t chunks = (n + batch - 1) / batch;

  EvalResult result;
  result.records.resize(n);

  std::atomic<std::size_t> next_chunk{0};
  std::atomic<std::size_t> completed{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_chunk = std::numeric_limits<std::size_t>::max();

  auto work = [&] {
    while (!failed.load()) {
      const std::size_t c = next_chunk.fetch_add(1);
      if (c >= chunks) return;
      const std::size_t begin = c * batch;
      const std::size_t end = std::min(n, begin + batch);
      try {
        std::vector<PreparedItem> prepared;
        prepared.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
          prepared.push_back(prepare_item(corpus.items[i], condition, options.max_len));
        }
        auto dists = scorer.score(prepared);
        if (dists.size() != prepared.size()) {
          throw ScorerError("scorer '" + scorer.id() + "' returned " + std::to_string(dists.size()) + " results for " +
                            std::to_string(prepared.size()) + " items");
        }
        for (std::size_t i = begin; i < end; ++i) {
          const auto& item = corpus.items[i];
          auto& rec = result.records[i];
          rec.item_id = item.id;
          rec.condition = condition;
          rec.probs = std::move(dists[i - begin]);
          if (rec.probs.size() != item.options.size()) {
            throw ScorerError("scorer '" + scorer.id() + "' returned " + std::to_string(rec.probs.size()) +
                                  " probabilities for " + std::to_string(item.options.size()) + " options",
                              {item.id});
          }
          rec.predicted = predict(rec.probs);
          rec.answer_index = item.answer_index;
          rec.correct = rec.predicted == item.answer_index;
        }
        completed.fetch_add(end - begin);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (c < first_error_chunk) {
          first_error_chunk = c;
          first_error = std::current_exception();
        }
        failed.store(true);
      }
    }
  };

  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(chunks)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  if (first_error) {
    try {
      std::rethrow_exception(first_error);
    } catch (const ScorerError& e) {
      throw ScorerError("evaluation of '" + corpus.name + "' aborted after " + std::to_string(completed.load()) +
                            " of " + std::to_string(n) + " items: " + e.what(),
                        e.item_ids());
    }
  }

  std::size_t correct = 0;
  for (const auto& r : result.records) correct += r.correct ? 1 : 0;
  result.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

std::vector<int> default_tau_grid() {
  std::vector<int> grid;
  for (int t = 0; t <= 100; t += 10) grid.push_back(t);
  return grid;
}

SweepResult sweep_tau(const Scorer& scorer, const Corpus& corpus, std::span<const int> taus, ExtractMode mode,
                      std::uint64_t seed, const SweepOptions& options) {
  if (taus.empty()) throw std::invalid_argument("sweep_tau: no tau values");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (taus[i] < 0 || taus[i] > 100) throw std::invalid_argument("tau " + std::to_string(taus[i]) + " outside [0, 100]");
    if (i > 0 && taus[i] <= taus[i - 1]) throw std::invalid_argument("tau values must be strictly increasing");
  }
  if (options.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  const int reps = mode == ExtractMode::random_window ? options.repetitions : 1;

  SweepResult out;
  out.curve.corpus = corpus.name;
  out.curve.scorer_id = scorer.id();
  out.curve.mode = mode;
  for (int tau : taus) {
    double accuracy = 0.0;
    std::vector<EvalRecord> records;
    for (int r = 0; r < reps; ++r) {
      const Condition condition{ContextMode::standard, ExtractSpec{tau, mode, seed + static_cast<std::uint64_t>(r)}};
      auto result = evaluate(scorer, corpus, condition, options.eval);
      accuracy += result.accuracy;
      records.insert(records.end(), std::make_move_iterator(result.records.begin()),
                     std::make_move_iterator(result.records.end()));
    }
    out.curve.points.push_back({tau, accuracy / reps, corpus.items.size()});
    out.records.push_back(std::move(records));
  }
  return out;
}

std::vector<PositionalRow> positional_study(const Scorer& scorer, const Corpus& corpus, int tau, std::uint64_t seed,
                                            const SweepOptions& options) {
  std::vector<PositionalRow> rows;
  const int grid[] = {tau};
  for (auto mode : {ExtractMode::beginning, ExtractMode::random_window, ExtractMode::end}) {
    const auto sweep = sweep_tau(scorer, corpus, grid, mode, seed, options);
    rows.push_back({mode, sweep.curve.points.front().accuracy});
  }
  return rows;
}

double random_baseline(const Corpus& corpus) {
  require_valid(corpus);
  double total = 0.0;
  for (const auto& item : corpus.items) total += 1.0 / static_cast<double>(item.option_count());
  return total / static_cast<double>(corpus.items.size());
}

double effective_options(double context_free_accuracy) {
  if (context_free_accuracy < 0.0 || context_free_accuracy > 1.0)
    throw std::invalid_argument("accuracy must be in [0, 1]");
  if (context_free_accuracy == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / context_free_accuracy;
}

WorldKnowledgeReport world_knowledge_report(const Scorer& standard_scorer, const Scorer& context_free_scorer,
                                            std::span<const Corpus> corpora, const EvalOptions& options) {
  WorldKnowledgeReport report;
  for (const auto& corpus : corpora) {
    WorldKnowledgeRow row;
    row.corpus = corpus.name;
    row.standard_accuracy = evaluate(standard_scorer, corpus, {ContextMode::standard, std::nullopt}, options).accuracy;
    row.context_free_accuracy =
        evaluate(context_free_scorer, corpus, {ContextMode::context_free, std::nullopt}, options).accuracy;
    row.random_baseline = random_baseline(corpus);
    row.effective_options = effective_options(row.context_free_accuracy);
    row.item_count = corpus.items.size();
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string_view to_string(ComprehensionLevel level) noexcept {
  switch (level) {
    case ComprehensionLevel::zero: return "zero";
    case ComprehensionLevel::partial: return "partial";
    case ComprehensionLevel::full: return "full";
  }
  return "?";
}

ComprehensionLabel classify_question(const std::map<int, bool>& correct_by_tau, bool context_free_correct,
                                     std::span<const int> grid) {
  if (grid.empty()) throw std::invalid_argument("classify_question: empty tau grid");
  for (int tau : grid) {
    if (!correct_by_tau.contains(tau)) {
      throw std::invalid_argument("classify_question: no record for tau " + std::to_string(tau));
    }
  }
  std::vector<int> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());

  // Walk down from the largest tau while predictions stay correct.
  int tau_star = -1;
  for (auto it = sorted.rbegin(); it != sorted.rend() && correct_by_tau.at(*it); ++it) tau_star = *it;

  ComprehensionLabel label;
  label.tau_star = tau_star;
  const bool all_correct = tau_star == sorted.front();
  if (context_free_correct && all_correct) {
    label.level = ComprehensionLevel::zero;
  } else if (tau_star >= 0 && tau_star < sorted.back()) {
    label.level = ComprehensionLevel::partial;
  } else {
    label.level = ComprehensionLevel::full;
    label.unanswered = tau_star < 0;
  }
  return label;
}

ComprehensionLabel classify_question(const std::map<int, bool>& correct_by_tau, bool context_free_correct) {
  const auto grid = default_tau_grid();
  return classify_question(correct_by_tau, context_free_correct, grid);
}

std::vector<QuestionLabel> classify_records(std::span<const EvalRecord> sweep_records,
                                            std::span<const EvalRecord> context_free_records,
                                            std::span<const int> grid) {
  std::unordered_map<std::string, std::map<int, bool>> by_item;
  for (const auto& r : sweep_records) {
    if (r.condition.context_mode != ContextMode::standard || !r.condition.extract) {
      throw DataError("sweep record for '" + r.item_id + "' has no extract condition");
    }
    const auto [it, inserted] = by_item[r.item_id].emplace(r.condition.extract->tau, r.correct);
    if (!inserted) {
      throw DataError("more than one sweep record for '" + r.item_id + "' at tau " +
                      std::to_string(r.condition.extract->tau));
    }
  }
  std::vector<QuestionLabel> labels;
  for (const auto& cf : context_free_records) {
    if (cf.condition.context_mode != ContextMode::context_free) {
      throw DataError("record for '" + cf.item_id + "' is not a context-free record");
    }
    const auto it = by_item.find(cf.item_id);
    if (it == by_item.end()) throw DataError("no sweep records for '" + cf.item_id + "'");
    try {
      labels.push_back({cf.item_id, classify_question(it->second, cf.correct, grid)});
    } catch (const std::invalid_argument& e) {
      throw DataError("item '" + cf.item_id + "': " + e.what());
    }
  }
  return labels;
}

nlohmann::ordered_json record_to_json(const EvalRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.item_id;
  j["context_mode"] = to_string(r.condition.context_mode);
  if (r.condition.extract) {
    j["tau"] = r.condition.extract->tau;
    j["extract"] = to_string(r.condition.extract->mode);
    j["seed"] = r.condition.extract->seed;
  }
  j["probs"] = r.probs.probs;
  j["predicted"] = r.predicted;
  j["answer_index"] = r.answer_index;
  j["correct"] = r.correct;
  return j;
}

EvalRecord record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  r.item_id = j.at("id").get<std::string>();
  r.condition.context_mode = parse_context_mode(j.at("context_mode").get<std::string>());
  if (j.contains("tau")) {
    r.condition.extract = ExtractSpec{j.at("tau").get<int>(), parse_extract_mode(j.at("extract").get<std::string>()),
                                      j.value("seed", std::uint64_t{0})};
  }
  r.probs.probs = j.at("probs").get<std::vector<double>>();
  r.predicted = j.at("predicted").get<int>();
  r.answer_index = j.at("answer_index").get<int>();
  r.correct = j.at("correct").get<bool>();
  if (r.correct != (r.predicted == r.answer_index)) {
    throw DataError("record for '" + r.item_id + "': 'correct' disagrees with predicted/answer_index");
  }
  return r;
}

void write_records_jsonl(std::span<const EvalRecord> records, std::ostream& out) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

std::vector<EvalRecord> read_records_jsonl(std::istream& in, std::string_view source) {
  std::vector<EvalRecord> out;
  std::string line;
  for (std::size_t n = 0; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string(source) + ": record " + std::to_string(n) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string(source) + ": record " + std::to_string(n) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(std::string(source) + ": record " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace compre
