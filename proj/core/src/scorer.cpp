#include "compre/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "compre/error.hpp"

namespace compre {

std::string_view to_string(ContextMode mode) noexcept {
  return mode == ContextMode::standard ? "standard" : "context_free";
}

ContextMode parse_context_mode(std::string_view text) {
  if (text == "standard") return ContextMode::standard;
  if (text == "context_free" || text == "context-free") return ContextMode::context_free;
  throw std::invalid_argument("unknown context mode '" + std::string(text) + "'");
}

OptionDistribution softmax(std::span<const double> scores) {
  OptionDistribution dist;
  if (scores.empty()) return dist;
  const double peak = *std::max_element(scores.begin(), scores.end());
  dist.probs.reserve(scores.size());
  double total = 0.0;
  for (double s : scores) {
    dist.probs.push_back(std::exp(s - peak));
    total += dist.probs.back();
  }
  for (double& p : dist.probs) p /= total;
  return dist;
}

bool is_normalized(const OptionDistribution& dist, double tolerance) {
  if (dist.probs.empty()) return false;
  double total = 0.0;
  for (double p : dist.probs) {
    if (!(p >= 0.0 && p <= 1.0)) return false;
    total += p;
  }
  return std::abs(total - 1.0) <= tolerance;
}

int predict(const OptionDistribution& dist) {
  if (dist.probs.empty()) throw std::invalid_argument("predict: empty distribution");
  // max_element returns the first maximum, which is the tie-break rule.
  return static_cast<int>(std::max_element(dist.probs.begin(), dist.probs.end()) - dist.probs.begin());
}

PreparedItem prepare_item(const McqItem& item, const Condition& condition, int max_len) {
  PreparedItem prepared;
  prepared.id = item.id;
  prepared.context_mode = condition.context_mode;
  prepared.question = item.question;
  prepared.options = item.options;
  prepared.max_len = max_len;

  const auto question = tokenize(item.question, SourceKind::question);
  std::size_t longest_option = 0;
  for (const auto& o : item.options) longest_option = std::max(longest_option, tokenize(o, SourceKind::option).size());
  const std::size_t fixed = question.size() + longest_option + 3;
  if (max_len < 0 || fixed > static_cast<std::size_t>(max_len)) {
    throw DataError("item '" + item.id + "': question and option need " + std::to_string(fixed) +
                    " tokens, exceeding max_len " + std::to_string(max_len));
  }

  if (condition.context_mode == ContextMode::context_free) {
    if (condition.extract) throw std::invalid_argument("an extract spec requires standard context mode");
    return prepared;
  }
  auto context = tokenize(item.context, SourceKind::context);
  const std::size_t budget = static_cast<std::size_t>(max_len) - fixed;
  if (context.size() > budget) context.tokens.resize(budget);
  if (condition.extract) context = extract_context(context, *condition.extract, item.id);
  prepared.context = std::move(context);
  return prepared;
}

OptionDistribution score_options(const Scorer& scorer, const McqItem& item, const Condition& condition,
                                 int max_len) {
  const auto prepared = prepare_item(item, condition, max_len);
  auto out = scorer.score(std::span(&prepared, 1));
  if (out.size() != 1) throw ScorerError("scorer returned " + std::to_string(out.size()) + " results for 1 item", {item.id});
  return std::move(out.front());
}

}  // namespace compre
