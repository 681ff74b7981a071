#pragma once

#include <memory>
#include <span>
#include <vector>

#include "compre/scorer.hpp"

namespace compre {

// Deep ensemble: the arithmetic mean of the members' option distributions.
class EnsembleScorer final : public Scorer {
 public:
  explicit EnsembleScorer(std::vector<std::shared_ptr<const Scorer>> members);

  std::string id() const override;
  std::vector<OptionDistribution> score(std::span<const PreparedItem> batch) const override;

  std::size_t member_count() const noexcept { return members_.size(); }

 private:
  std::vector<std::shared_ptr<const Scorer>> members_;
};

OptionDistribution mean_distribution(std::span<const OptionDistribution> dists);

OptionDistribution ensemble_score(std::span<const std::shared_ptr<const Scorer>> members, const McqItem& item,
                                  const Condition& condition, int max_len = kDefaultMaxLen);

}  // namespace compre
