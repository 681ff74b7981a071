#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "compre/corpus.hpp"
#include "compre/scorer.hpp"
#include "json.hpp"

namespace compre {

// Token -> row index. Row 0 is the shared unknown-token bucket.
class Vocabulary {
 public:
  static constexpr int kUnknown = 0;
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocabulary();

  int add(std::string_view token);
  int lookup(std::string_view token) const;
  int size() const noexcept { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Built-in scorer parameters. Every option of an item goes through the same
// encoder and head:
//
//   h_i = mean_t(embedding[t] + flag_t * match_embedding)
//   s_i = head_weight . tanh(encoder_weight * h_i + encoder_bias) + head_bias
//   p   = softmax(s)
//
// flag_t marks exact token matches between the option segment and the
// context/question segments.
struct ToyScorerParams {
  Vocabulary vocab;
  Eigen::MatrixXd embedding;        // vocab.size() x dim
  Eigen::VectorXd match_embedding;  // dim
  Eigen::MatrixXd encoder_weight;   // dim x dim
  Eigen::VectorXd encoder_bias;     // dim
  Eigen::VectorXd head_weight;      // dim
  double head_bias = 0.0;
  int max_len = kDefaultMaxLen;

  int dim() const noexcept { return static_cast<int>(encoder_bias.size()); }
  bool all_finite() const;
  bool operator==(const ToyScorerParams& other) const;
};

struct ToyGradients {
  std::map<int, Eigen::VectorXd> embedding_rows;  // sparse: only rows that occur
  Eigen::VectorXd match_embedding;
  Eigen::MatrixXd encoder_weight;
  Eigen::VectorXd encoder_bias;
  Eigen::VectorXd head_weight;
  double head_bias = 0.0;

  static ToyGradients zeros(int dim);
  Eigen::VectorXd embedding_row(int row) const;
};

struct EncodedInput {
  std::vector<int> ids;
  int match_count = 0;
};

struct EncodedItem {
  std::vector<EncodedInput> options;
  int answer_index = 0;
};

// Exact-match flags for one assembled input; markers are never flagged.
std::vector<bool> match_flags(const AssembledInput& input);

std::vector<AssembledInput> assemble_options(const PreparedItem& item);
EncodedItem encode_item(const Vocabulary& vocab, const PreparedItem& item, int answer_index = 0);

std::vector<double> option_scores(const ToyScorerParams& params, const EncodedItem& item);

// Cross-entropy of the option distribution against item.answer_index.
double item_loss(const ToyScorerParams& params, const EncodedItem& item);

// Adds weight * dLoss/dparams into `grads`; returns the unweighted loss.
double accumulate_gradient(const ToyScorerParams& params, const EncodedItem& item, double weight,
                           ToyGradients& grads);

ToyGradients analytic_gradient(const ToyScorerParams& params, const EncodedItem& item);

ToyScorerParams zero_params(Vocabulary vocab, int dim);
ToyScorerParams random_params(Vocabulary vocab, int dim, std::uint64_t seed, double embedding_scale = 0.1);

Vocabulary build_vocabulary(std::span<const PreparedItem> items);

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 0.05;
  int batch_size = 16;
  std::uint64_t seed = 0;
  int max_len = kDefaultMaxLen;
  int embed_dim = 32;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct TrainResult {
  ToyScorerParams params;
  std::vector<double> epoch_loss;  // mean item loss seen during each epoch
};

// Minibatch SGD on cross-entropy. Deterministic given cfg.seed.
TrainResult train_toy(const Corpus& corpus, const TrainConfig& cfg, ContextMode mode);

using AnalyticGradientFn = std::function<ToyGradients(const ToyScorerParams&, const EncodedItem&)>;

struct GradCheckOptions {
  int coordinates = 64;
  std::uint64_t seed = 0;
  ContextMode context_mode = ContextMode::standard;
  AnalyticGradientFn analytic;  // defaults to analytic_gradient
};

// Max relative error |a - n| / max(|a| + |n|, 1e-6) between the analytic and
// central-difference gradients over sampled coordinates of every tensor.
double grad_check(const ToyScorerParams& params, const McqItem& item, double epsilon,
                  const GradCheckOptions& options = {});

class ToyScorer final : public Scorer {
 public:
  explicit ToyScorer(ToyScorerParams params, std::string id = "toy");

  std::string id() const override { return id_; }
  std::vector<OptionDistribution> score(std::span<const PreparedItem> batch) const override;

  const ToyScorerParams& params() const noexcept { return params_; }

 private:
  ToyScorerParams params_;
  std::string id_;
};

nlohmann::json params_to_json(const ToyScorerParams& params);
ToyScorerParams params_from_json(const nlohmann::json& j);

// `info` is stored verbatim under "train" for provenance.
void save_params(const ToyScorerParams& params, const std::filesystem::path& path,
                 const nlohmann::json& info = nlohmann::json::object());
ToyScorerParams load_params(const std::filesystem::path& path);

}  // namespace compre
