#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace compre {

// Malformed or invariant-violating input data (corpus files, records, params).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A scorer failed or violated the wire protocol. Carries the affected item ids.
class ScorerError : public std::runtime_error {
 public:
  explicit ScorerError(const std::string& what, std::vector<std::string> item_ids = {})
      : std::runtime_error(what), item_ids_(std::move(item_ids)) {}

  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }

 private:
  std::vector<std::string> item_ids_;
};

}  // namespace compre
