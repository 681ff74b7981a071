#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "compre/corpus.hpp"
#include "compre/scorer.hpp"
#include "json.hpp"

namespace compre {

struct EvalRecord {
  std::string item_id;
  Condition condition;
  OptionDistribution probs;
  int predicted = 0;
  int answer_index = 0;
  bool correct = false;  // predicted == answer_index

  bool operator==(const EvalRecord&) const = default;
};

struct EvalOptions {
  int max_len = kDefaultMaxLen;
  int batch_size = 32;  // items per Scorer::score call
  int workers = 1;      // concurrent batches
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<EvalRecord> records;  // corpus order
};

// Accuracy of `scorer` under one condition. Records do not depend on the
// worker count. A scorer failure aborts with a ScorerError that reports how
// many items were completed.
EvalResult evaluate(const Scorer& scorer, const Corpus& corpus, const Condition& condition,
                    const EvalOptions& options = {});

struct CurvePoint {
  int tau = 0;
  double accuracy = 0.0;
  std::size_t item_count = 0;

  bool operator==(const CurvePoint&) const = default;
};

struct AblationCurve {
  std::string corpus;
  std::string scorer_id;
  ExtractMode mode = ExtractMode::beginning;
  std::vector<CurvePoint> points;  // strictly increasing tau
};

std::vector<int> default_tau_grid();

struct SweepOptions {
  EvalOptions eval;
  // random_window only: extracts drawn with seeds seed, seed+1, ...; the
  // point accuracy is their mean.
  int repetitions = 1;
};

struct SweepResult {
  AblationCurve curve;
  std::vector<std::vector<EvalRecord>> records;  // one list per tau
};

SweepResult sweep_tau(const Scorer& scorer, const Corpus& corpus, std::span<const int> taus, ExtractMode mode,
                      std::uint64_t seed, const SweepOptions& options = {});

struct PositionalRow {
  ExtractMode mode = ExtractMode::beginning;
  double accuracy = 0.0;

  bool operator==(const PositionalRow&) const = default;
};

// Beginning, random window and end extracts at one tau, in that order.
std::vector<PositionalRow> positional_study(const Scorer& scorer, const Corpus& corpus, int tau = 20,
                                            std::uint64_t seed = 0, const SweepOptions& options = {});

// Mean over items of 1 / option count.
double random_baseline(const Corpus& corpus);

// 1 / context-free accuracy; +inf when that accuracy is 0.
double effective_options(double context_free_accuracy);

struct WorldKnowledgeRow {
  std::string corpus;
  double standard_accuracy = 0.0;
  double context_free_accuracy = 0.0;
  double random_baseline = 0.0;
  double effective_options = 0.0;
  std::size_t item_count = 0;
};

struct WorldKnowledgeReport {
  std::vector<WorldKnowledgeRow> rows;
};

WorldKnowledgeReport world_knowledge_report(const Scorer& standard_scorer, const Scorer& context_free_scorer,
                                            std::span<const Corpus> corpora, const EvalOptions& options = {});

enum class ComprehensionLevel { zero, partial, full };

std::string_view to_string(ComprehensionLevel level) noexcept;

struct ComprehensionLabel {
  ComprehensionLevel level = ComprehensionLevel::full;
  int tau_star = -1;        // smallest tau from which every larger grid point is correct; -1 if none
  bool unanswered = false;  // never stably correct, not even at the largest tau

  bool operator==(const ComprehensionLabel&) const = default;
};

// zero:    context-free correct and every grid point correct
// partial: correct for all tau >= tau_star, with tau_star below the largest grid point
// full:    otherwise
ComprehensionLabel classify_question(const std::map<int, bool>& correct_by_tau, bool context_free_correct,
                                     std::span<const int> grid);
ComprehensionLabel classify_question(const std::map<int, bool>& correct_by_tau, bool context_free_correct);

struct QuestionLabel {
  std::string item_id;
  ComprehensionLabel label;
};

// Groups sweep records (one per item and tau) with context-free records by
// item id. Items are labeled in order of first appearance in `context_free`.
std::vector<QuestionLabel> classify_records(std::span<const EvalRecord> sweep_records,
                                            std::span<const EvalRecord> context_free_records,
                                            std::span<const int> grid);

nlohmann::ordered_json record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const nlohmann::json& j);
void write_records_jsonl(std::span<const EvalRecord> records, std::ostream& out);
std::vector<EvalRecord> read_records_jsonl(std::istream& in, std::string_view source = "<stream>");

}  // namespace compre
