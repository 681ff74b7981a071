#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "compre/scorer.hpp"
#include "json.hpp"

namespace compre {

// Where an external scorer lives. Spec strings:
//   http://host:port/path     JSON POST per batch
//   exec:program arg1 arg2    child process, one JSON request/response per line
struct Endpoint {
  enum class Kind { http, process };

  Kind kind = Kind::http;
  std::string url;
  std::vector<std::string> command;
  std::chrono::milliseconds timeout{30000};

  static Endpoint parse(std::string_view spec);
  std::string describe() const;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Sends one request document and returns the raw response body.
  virtual std::string round_trip(const std::string& request) = 0;
};

std::unique_ptr<Transport> make_transport(const Endpoint& endpoint);

// Wire protocol:
//   request  {"batch": [{"id", "context_text", "question", "options", "context_mode"}]}
//   response {"scores": [{"id", "probs"}]}
// context_text is the already extracted context joined with single spaces.
nlohmann::json encode_request(std::span<const PreparedItem> batch);

// Validates and reorders a response to match the request batch. Throws
// ScorerError naming the offending ids on a missing/unknown/duplicate id, a
// wrong option count, or probabilities off by more than `tolerance`.
std::vector<OptionDistribution> decode_response(const nlohmann::json& response, std::span<const PreparedItem> batch,
                                                double tolerance = 1e-4);

class ExternalScorer final : public Scorer {
 public:
  explicit ExternalScorer(const Endpoint& endpoint, std::string id = {});
  ExternalScorer(std::shared_ptr<Transport> transport, std::string id);

  std::string id() const override { return id_; }
  std::vector<OptionDistribution> score(std::span<const PreparedItem> batch) const override;

 private:
  std::shared_ptr<Transport> transport_;
  std::string id_;
};

std::vector<OptionDistribution> external_score(const Endpoint& endpoint,
                                               std::span<const std::pair<McqItem, Condition>> batch,
                                               int max_len = kDefaultMaxLen);

}  // namespace compre
