#include "compre/toy_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "compre/error.hpp"
#include "compre/random.hpp"

namespace compre {

Vocabulary::Vocabulary() { add(kUnknownToken); }

int Vocabulary::add(std::string_view token) {
  const auto [it, inserted] = index_.try_emplace(std::string(token), size());
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

int Vocabulary::lookup(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

bool ToyScorerParams::all_finite() const {
  return embedding.allFinite() && match_embedding.allFinite() && encoder_weight.allFinite() &&
         encoder_bias.allFinite() && head_weight.allFinite() && std::isfinite(head_bias);
}

bool ToyScorerParams::operator==(const ToyScorerParams& o) const {
  return vocab == o.vocab && embedding == o.embedding && match_embedding == o.match_embedding &&
         encoder_weight == o.encoder_weight && encoder_bias == o.encoder_bias && head_weight == o.head_weight &&
         head_bias == o.head_bias && max_len == o.max_len;
}

ToyGradients ToyGradients::zeros(int dim) {
  ToyGradients g;
  g.match_embedding = Eigen::VectorXd::Zero(dim);
  g.encoder_weight = Eigen::MatrixXd::Zero(dim, dim);
  g.encoder_bias = Eigen::VectorXd::Zero(dim);
  g.head_weight = Eigen::VectorXd::Zero(dim);
  return g;
}

Eigen::VectorXd ToyGradients::embedding_row(int row) const {
  const auto it = embedding_rows.find(row);
  return it == embedding_rows.end() ? Eigen::VectorXd::Zero(encoder_bias.size()) : it->second;
}

std::vector<bool> match_flags(const AssembledInput& input) {
  std::unordered_set<std::string_view> option_tokens;
  std::unordered_set<std::string_view> rest_tokens;
  for (std::size_t i = 0; i < input.tokens.size(); ++i) {
    switch (input.segment_map[i]) {
      case Segment::option: option_tokens.insert(input.tokens[i]); break;
      case Segment::context:
      case Segment::question: rest_tokens.insert(input.tokens[i]); break;
      case Segment::marker: break;
    }
  }
  std::vector<bool> flags(input.tokens.size(), false);
  for (std::size_t i = 0; i < input.tokens.size(); ++i) {
    switch (input.segment_map[i]) {
      case Segment::option: flags[i] = rest_tokens.contains(input.tokens[i]); break;
      case Segment::context:
      case Segment::question: flags[i] = option_tokens.contains(input.tokens[i]); break;
      case Segment::marker: break;
    }
  }
  return flags;
}

std::vector<AssembledInput> assemble_options(const PreparedItem& item) {
  const auto question = tokenize(item.question, SourceKind::question);
  std::vector<AssembledInput> out;
  out.reserve(item.options.size());
  for (const auto& option : item.options) {
    out.push_back(assemble_tokens(item.context, question, tokenize(option, SourceKind::option), item.max_len));
  }
  return out;
}

EncodedItem encode_item(const Vocabulary& vocab, const PreparedItem& item, int answer_index) {
  EncodedItem encoded;
  encoded.answer_index = answer_index;
  for (const auto& input : assemble_options(item)) {
    EncodedInput e;
    e.ids.reserve(input.tokens.size());
    for (const auto& t : input.tokens) e.ids.push_back(vocab.lookup(t));
    const auto flags = match_flags(input);
    e.match_count = static_cast<int>(std::count(flags.begin(), flags.end(), true));
    encoded.options.push_back(std::move(e));
  }
  return encoded;
}

namespace {

struct OptionForward {
  Eigen::VectorXd pooled;
  Eigen::VectorXd hidden;  // tanh activations
  double score = 0.0;
};

OptionForward forward(const ToyScorerParams& p, const EncodedInput& in) {
  OptionForward f;
  f.pooled = Eigen::VectorXd::Zero(p.dim());
  for (int id : in.ids) f.pooled += p.embedding.row(id).transpose();
  f.pooled += static_cast<double>(in.match_count) * p.match_embedding;
  f.pooled /= static_cast<double>(in.ids.size());
  f.hidden = (p.encoder_weight * f.pooled + p.encoder_bias).array().tanh().matrix();
  f.score = p.head_weight.dot(f.hidden) + p.head_bias;
  return f;
}

double log_sum_exp(const std::vector<double>& s) {
  const double peak = *std::max_element(s.begin(), s.end());
  double total = 0.0;
  for (double v : s) total += std::exp(v - peak);
  return peak + std::log(total);
}

void check_item(const EncodedItem& item) {
  if (item.options.empty()) throw std::invalid_argument("encoded item has no options");
  if (item.answer_index < 0 || item.answer_index >= static_cast<int>(item.options.size()))
    throw std::invalid_argument("encoded item answer_index out of range");
}

}  // namespace

std::vector<double> option_scores(const ToyScorerParams& params, const EncodedItem& item) {
  std::vector<double> scores;
  scores.reserve(item.options.size());
  for (const auto& option : item.options) scores.push_back(forward(params, option).score);
  return scores;
}

double item_loss(const ToyScorerParams& params, const EncodedItem& item) {
  check_item(item);
  const auto s = option_scores(params, item);
  return log_sum_exp(s) - s[static_cast<std::size_t>(item.answer_index)];
}

double accumulate_gradient(const ToyScorerParams& params, const EncodedItem& item, double weight,
                           ToyGradients& grads) {
  check_item(item);
  std::vector<OptionForward> fw;
  std::vector<double> s;
  fw.reserve(item.options.size());
  for (const auto& option : item.options) {
    fw.push_back(forward(params, option));
    s.push_back(fw.back().score);
  }
  const double lse = log_sum_exp(s);
  const auto answer = static_cast<std::size_t>(item.answer_index);

  for (std::size_t i = 0; i < fw.size(); ++i) {
    // dLoss/ds_i = p_i - [i == answer]
    const double ds = weight * (std::exp(s[i] - lse) - (i == answer ? 1.0 : 0.0));
    grads.head_weight += ds * fw[i].hidden;
    grads.head_bias += ds;
    const Eigen::VectorXd da =
        (ds * params.head_weight).cwiseProduct((1.0 - fw[i].hidden.array().square()).matrix());
    grads.encoder_weight += da * fw[i].pooled.transpose();
    grads.encoder_bias += da;
    const auto& in = item.options[i];
    const Eigen::VectorXd dpooled = params.encoder_weight.transpose() * da / static_cast<double>(in.ids.size());
    for (int id : in.ids) {
      auto [it, inserted] = grads.embedding_rows.try_emplace(id, dpooled);
      if (!inserted) it->second += dpooled;
    }
    grads.match_embedding += static_cast<double>(in.match_count) * dpooled;
  }
  return lse - s[answer];
}

ToyGradients analytic_gradient(const ToyScorerParams& params, const EncodedItem& item) {
  auto grads = ToyGradients::zeros(params.dim());
  accumulate_gradient(params, item, 1.0, grads);
  return grads;
}

ToyScorerParams zero_params(Vocabulary vocab, int dim) {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be positive");
  ToyScorerParams p;
  p.embedding = Eigen::MatrixXd::Zero(vocab.size(), dim);
  p.vocab = std::move(vocab);
  p.match_embedding = Eigen::VectorXd::Zero(dim);
  p.encoder_weight = Eigen::MatrixXd::Zero(dim, dim);
  p.encoder_bias = Eigen::VectorXd::Zero(dim);
  p.head_weight = Eigen::VectorXd::Zero(dim);
  return p;
}

ToyScorerParams random_params(Vocabulary vocab, int dim, std::uint64_t seed, double embedding_scale) {
  auto p = zero_params(std::move(vocab), dim);
  std::mt19937_64 engine(splitmix64(seed));
  const double fan = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index r = 0; r < p.embedding.rows(); ++r)
    for (Eigen::Index c = 0; c < p.embedding.cols(); ++c) p.embedding(r, c) = embedding_scale * standard_normal(engine);
  for (Eigen::Index r = 0; r < p.encoder_weight.rows(); ++r)
    for (Eigen::Index c = 0; c < p.encoder_weight.cols(); ++c) p.encoder_weight(r, c) = fan * standard_normal(engine);
  for (Eigen::Index i = 0; i < p.head_weight.size(); ++i) p.head_weight(i) = fan * standard_normal(engine);
  return p;
}

Vocabulary build_vocabulary(std::span<const PreparedItem> items) {
  Vocabulary vocab;
  vocab.add(kClsToken);
  vocab.add(kSepToken);
  for (const auto& item : items) {
    for (const auto& input : assemble_options(item)) {
      for (const auto& t : input.tokens) vocab.add(t);
    }
  }
  return vocab;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
  if (max_len < 3) throw std::invalid_argument("max_len must be >= 3");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},   {"learning_rate", cfg.learning_rate}, {"batch_size", cfg.batch_size},
          {"seed", cfg.seed},       {"max_len", cfg.max_len},             {"embed_dim", cfg.embed_dim}};
}

namespace {

void sgd_step(ToyScorerParams& p, const ToyGradients& g, double lr) {
  for (const auto& [row, grad] : g.embedding_rows) p.embedding.row(row) -= lr * grad.transpose();
  p.match_embedding -= lr * g.match_embedding;
  p.encoder_weight -= lr * g.encoder_weight;
  p.encoder_bias -= lr * g.encoder_bias;
  p.head_weight -= lr * g.head_weight;
  p.head_bias -= lr * g.head_bias;
}

}  // namespace

TrainResult train_toy(const Corpus& corpus, const TrainConfig& cfg, ContextMode mode) {
  cfg.validate();
  require_valid(corpus);

  std::vector<PreparedItem> prepared;
  prepared.reserve(corpus.items.size());
  for (const auto& item : corpus.items) prepared.push_back(prepare_item(item, Condition{mode, std::nullopt}, cfg.max_len));

  TrainResult result;
  result.params = random_params(build_vocabulary(prepared), cfg.embed_dim, cfg.seed);
  result.params.max_len = cfg.max_len;

  std::vector<EncodedItem> encoded;
  encoded.reserve(prepared.size());
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    encoded.push_back(encode_item(result.params.vocab, prepared[i], corpus.items[i].answer_index));
  }

  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_engine(splitmix64(cfg.seed ^ 0x5eed5eed5eed5eedULL));
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    portable_shuffle(order.begin(), order.end(), shuffle_engine);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double weight = 1.0 / static_cast<double>(stop - start);
      auto grads = ToyGradients::zeros(cfg.embed_dim);
      for (std::size_t k = start; k < stop; ++k) total += accumulate_gradient(result.params, encoded[order[k]], weight, grads);
      sgd_step(result.params, grads, cfg.learning_rate);
    }
    result.epoch_loss.push_back(total / static_cast<double>(order.size()));
    if (!result.params.all_finite()) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch + 1) + "; lower the learning rate");
    }
  }
  return result;
}

namespace {

enum class Tensor { embedding, match, encoder_weight, encoder_bias, head_weight, head_bias };

struct Coordinate {
  Tensor tensor;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
};

double& param_at(ToyScorerParams& p, const Coordinate& c) {
  switch (c.tensor) {
    case Tensor::embedding: return p.embedding(c.row, c.col);
    case Tensor::match: return p.match_embedding(c.row);
    case Tensor::encoder_weight: return p.encoder_weight(c.row, c.col);
    case Tensor::encoder_bias: return p.encoder_bias(c.row);
    case Tensor::head_weight: return p.head_weight(c.row);
    case Tensor::head_bias: return p.head_bias;
  }
  return p.head_bias;
}

double grad_at(const ToyGradients& g, const Coordinate& c) {
  switch (c.tensor) {
    case Tensor::embedding: return g.embedding_row(static_cast<int>(c.row))(c.col);
    case Tensor::match: return g.match_embedding(c.row);
    case Tensor::encoder_weight: return g.encoder_weight(c.row, c.col);
    case Tensor::encoder_bias: return g.encoder_bias(c.row);
    case Tensor::head_weight: return g.head_weight(c.row);
    case Tensor::head_bias: return g.head_bias;
  }
  return 0.0;
}

std::vector<Coordinate> sample_coordinates(const ToyScorerParams& p, const EncodedItem& item, int count,
                                           std::uint64_t seed) {
  std::vector<int> rows;
  for (const auto& o : item.options) rows.insert(rows.end(), o.ids.begin(), o.ids.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

  std::mt19937_64 engine(splitmix64(seed));
  const auto d = static_cast<std::uint64_t>(p.dim());
  auto pick = [&](std::uint64_t n) { return static_cast<Eigen::Index>(uniform_below(engine, n)); };
  std::vector<Coordinate> coords{{Tensor::head_bias, 0, 0}};
  for (int k = 0; static_cast<int>(coords.size()) < count; ++k) {
    switch (k % 5) {
      case 0: coords.push_back({Tensor::embedding, rows[static_cast<std::size_t>(pick(rows.size()))], pick(d)}); break;
      case 1: coords.push_back({Tensor::match, pick(d), 0}); break;
      case 2: coords.push_back({Tensor::encoder_weight, pick(d), pick(d)}); break;
      case 3: coords.push_back({Tensor::encoder_bias, pick(d), 0}); break;
      case 4: coords.push_back({Tensor::head_weight, pick(d), 0}); break;
    }
  }
  return coords;
}

}  // namespace

double grad_check(const ToyScorerParams& params, const McqItem& item, double epsilon, const GradCheckOptions& options) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw std::invalid_argument("epsilon must be in (0, 1e-2]");
  const auto prepared = prepare_item(item, Condition{options.context_mode, std::nullopt}, params.max_len);
  const auto encoded = encode_item(params.vocab, prepared, item.answer_index);
  const auto analytic = options.analytic ? options.analytic(params, encoded) : analytic_gradient(params, encoded);

  auto probe = params;
  double worst = 0.0;
  for (const auto& c : sample_coordinates(params, encoded, std::max(options.coordinates, 6), options.seed)) {
    double& slot = param_at(probe, c);
    const double saved = slot;
    slot = saved + epsilon;
    const double up = item_loss(probe, encoded);
    slot = saved - epsilon;
    const double down = item_loss(probe, encoded);
    slot = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double exact = grad_at(analytic, c);
    worst = std::max(worst, std::abs(exact - numeric) / std::max(std::abs(exact) + std::abs(numeric), 1e-6));
  }
  return worst;
}

ToyScorer::ToyScorer(ToyScorerParams params, std::string id) : params_(std::move(params)), id_(std::move(id)) {}

std::vector<OptionDistribution> ToyScorer::score(std::span<const PreparedItem> batch) const {
  std::vector<OptionDistribution> out;
  out.reserve(batch.size());
  for (const auto& item : batch) {
    const auto scores = option_scores(params_, encode_item(params_.vocab, item));
    out.push_back(softmax(scores));
  }
  return out;
}

namespace {

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Eigen::VectorXd row = m.row(r).transpose();
    rows.push_back(vector_json(row));
  }
  return rows;
}

Eigen::VectorXd vector_from(const nlohmann::json& j, std::string_view field, Eigen::Index size) {
  const auto values = j.at(std::string(field)).get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != size)
    throw DataError("params field '" + std::string(field) + "': expected " + std::to_string(size) + " values");
  return Eigen::Map<const Eigen::VectorXd>(values.data(), size);
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j, std::string_view field, Eigen::Index rows, Eigen::Index cols) {
  const auto& arr = j.at(std::string(field));
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows)
    throw DataError("params field '" + std::string(field) + "': expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto values = arr[static_cast<std::size_t>(r)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != cols)
      throw DataError("params field '" + std::string(field) + "': row " + std::to_string(r) + " has wrong width");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(c)];
  }
  return m;
}

constexpr std::string_view kParamsFormat = "compre-toy-v1";

}  // namespace

nlohmann::json params_to_json(const ToyScorerParams& p) {
  return {{"format", kParamsFormat},
          {"dim", p.dim()},
          {"max_len", p.max_len},
          {"vocab", p.vocab.tokens()},
          {"embedding", matrix_json(p.embedding)},
          {"match_embedding", vector_json(p.match_embedding)},
          {"encoder_weight", matrix_json(p.encoder_weight)},
          {"encoder_bias", vector_json(p.encoder_bias)},
          {"head_weight", vector_json(p.head_weight)},
          {"head_bias", p.head_bias}};
}

ToyScorerParams params_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != kParamsFormat) throw DataError("not a " + std::string(kParamsFormat) + " params file");
    const int dim = j.at("dim").get<int>();
    const auto tokens = j.at("vocab").get<std::vector<std::string>>();
    if (tokens.empty() || tokens.front() != Vocabulary::kUnknownToken)
      throw DataError("params vocab must start with " + std::string(Vocabulary::kUnknownToken));
    Vocabulary vocab;
    for (const auto& t : tokens) vocab.add(t);
    if (vocab.size() != static_cast<int>(tokens.size())) throw DataError("params vocab has duplicate tokens");
    auto p = zero_params(std::move(vocab), dim);
    p.max_len = j.value("max_len", kDefaultMaxLen);
    p.embedding = matrix_from(j, "embedding", p.vocab.size(), dim);
    p.match_embedding = vector_from(j, "match_embedding", dim);
    p.encoder_weight = matrix_from(j, "encoder_weight", dim, dim);
    p.encoder_bias = vector_from(j, "encoder_bias", dim);
    p.head_weight = vector_from(j, "head_weight", dim);
    p.head_bias = j.at("head_bias").get<double>();
    if (!p.all_finite()) throw DataError("params contain non-finite values");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed params: ") + e.what());
  }
}

void save_params(const ToyScorerParams& params, const std::filesystem::path& path, const nlohmann::json& info) {
  auto j = params_to_json(params);
  j["train"] = info;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << j.dump() << '\n';
}

ToyScorerParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open params file");
  try {
    return params_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace compre
