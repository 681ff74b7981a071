#include "compre/ensemble.hpp"

#include <stdexcept>

#include "compre/error.hpp"

namespace compre {

EnsembleScorer::EnsembleScorer(std::vector<std::shared_ptr<const Scorer>> members) : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("ensemble needs at least one member");
  for (const auto& m : members_) {
    if (!m) throw std::invalid_argument("ensemble member is null");
  }
}

std::string EnsembleScorer::id() const {
  std::string out = "ensemble(";
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (i > 0) out += ',';
    out += members_[i]->id();
  }
  return out + ')';
}

OptionDistribution mean_distribution(std::span<const OptionDistribution> dists) {
  if (dists.empty()) throw std::invalid_argument("mean_distribution: no distributions");
  OptionDistribution mean{std::vector<double>(dists.front().size(), 0.0)};
  for (const auto& d : dists) {
    if (d.size() != mean.size()) throw ScorerError("ensemble members disagree on the option count");
    for (std::size_t i = 0; i < d.size(); ++i) mean.probs[i] += d.probs[i];
  }
  for (double& p : mean.probs) p /= static_cast<double>(dists.size());
  return mean;
}

std::vector<OptionDistribution> EnsembleScorer::score(std::span<const PreparedItem> batch) const {
  std::vector<std::vector<OptionDistribution>> per_member;
  per_member.reserve(members_.size());
  for (const auto& m : members_) {
    per_member.push_back(m->score(batch));
    if (per_member.back().size() != batch.size()) {
      throw ScorerError("ensemble member '" + m->id() + "' returned the wrong number of results");
    }
  }
  std::vector<OptionDistribution> out;
  out.reserve(batch.size());
  std::vector<OptionDistribution> column(members_.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t m = 0; m < members_.size(); ++m) column[m] = per_member[m][i];
    try {
      out.push_back(mean_distribution(column));
    } catch (const ScorerError& e) {
      throw ScorerError(e.what(), {batch[i].id});
    }
  }
  return out;
}

OptionDistribution ensemble_score(std::span<const std::shared_ptr<const Scorer>> members, const McqItem& item,
                                  const Condition& condition, int max_len) {
  const EnsembleScorer ensemble({members.begin(), members.end()});
  return score_options(ensemble, item, condition, max_len);
}

}  // namespace compre
