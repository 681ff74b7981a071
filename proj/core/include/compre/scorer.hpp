#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compre/corpus.hpp"
#include "compre/textproc.hpp"

namespace compre {

enum class ContextMode { standard, context_free };

std::string_view to_string(ContextMode mode) noexcept;
ContextMode parse_context_mode(std::string_view text);

// Evaluation condition. `extract` is only meaningful in standard mode; absent
// means full context.
struct Condition {
  ContextMode context_mode = ContextMode::standard;
  std::optional<ExtractSpec> extract;

  bool operator==(const Condition&) const = default;
};

struct OptionDistribution {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  bool operator==(const OptionDistribution&) const = default;
};

OptionDistribution softmax(std::span<const double> scores);

// Every entry in [0, 1] and the total within `tolerance` of 1.
bool is_normalized(const OptionDistribution& dist, double tolerance = 1e-6);

// Argmax; ties go to the lowest index.
int predict(const OptionDistribution& dist);

// An item with its context already pre-fit to max_len and extracted. This is
// the only form scorers see, so tau semantics live in one place.
struct PreparedItem {
  std::string id;
  ContextMode context_mode = ContextMode::standard;
  std::optional<TokenSeq> context;  // absent in context-free mode
  std::string question;
  std::vector<std::string> options;
  int max_len = kDefaultMaxLen;

  int option_count() const noexcept { return static_cast<int>(options.size()); }
};

PreparedItem prepare_item(const McqItem& item, const Condition& condition, int max_len = kDefaultMaxLen);

class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::string id() const = 0;

  // One distribution per input, in input order. Implementations must be safe
  // to call concurrently.
  virtual std::vector<OptionDistribution> score(std::span<const PreparedItem> batch) const = 0;
};

OptionDistribution score_options(const Scorer& scorer, const McqItem& item, const Condition& condition,
                                 int max_len = kDefaultMaxLen);

}  // namespace compre
