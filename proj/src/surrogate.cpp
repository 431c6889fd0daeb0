#include "moselect/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "moselect/moo_core.hpp"
#include "moselect/random.hpp"

namespace moselect {

namespace {

constexpr Index kHidden = 32;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

double leaky(double x, double slope) { return x >= 0.0 ? x : slope * x; }
double leaky_grad(double x, double slope) { return x >= 0.0 ? 1.0 : slope; }

void fill_uniform(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
  }
}

struct ForwardCache {
  Matrix z1, a1, z2, a2, out;
};

ForwardCache forward_cached(const SurrogateParams& p, const Matrix& x) {
  ForwardCache c;
  c.z1 = (x * p.w1.transpose()).rowwise() + p.b1.transpose();
  c.a1 = c.z1.unaryExpr([&](double v) { return leaky(v, p.leaky_slope); });
  c.z2 = (c.a1 * p.w2.transpose()).rowwise() + p.b2.transpose();
  c.a2 = c.z2.unaryExpr([&](double v) { return leaky(v, p.leaky_slope); });
  c.out = (c.a2 * p.w3.transpose()).rowwise() + p.b3.transpose();
  return c;
}

// Suffix log-sum-exp of the negated scores by rank position.
Vector suffix_logsumexp(const Vector& by_rank) {
  const Index n = by_rank.size();
  Vector log_z(n);
  log_z(n - 1) = -by_rank(n - 1);
  for (Index i = n - 2; i >= 0; --i) {
    const double a = -by_rank(i);
    const double b = log_z(i + 1);
    const double hi = std::max(a, b);
    log_z(i) = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
  }
  return log_z;
}

double position_weight(Index i, bool discounted) {
  return discounted ? 1.0 / static_cast<double>(i + 1) : 1.0;
}

// Gradient of listwise_loss with respect to the scores, scattered back
// to config order.
Vector listwise_loss_grad(const Vector& scores, const std::vector<Index>& rank_order,
                          bool discounted) {
  const Index n = scores.size();
  Vector by_rank(n);
  for (Index i = 0; i < n; ++i) by_rank(i) = scores(rank_order[static_cast<std::size_t>(i)]);
  const Vector log_z = suffix_logsumexp(by_rank);

  Vector grad = Vector::Zero(n);
  double carry = 0.0;  // sum_{i<=j} w_i / Z_i, scaled by exp(log_z(j))
  for (Index j = 0; j < n; ++j) {
    if (j > 0) carry *= std::exp(log_z(j) - log_z(j - 1));
    const double w = position_weight(j, discounted);
    carry += w;
    const double g = w - carry * std::exp(-by_rank(j) - log_z(j));
    grad(rank_order[static_cast<std::size_t>(j)]) = g;
  }
  return grad;
}

// Per-objective score gradient for one task batch, written into the
// objective's column of dY; returns the loss term.
double objective_loss_and_grad(const TaskRankBatch& batch, const Matrix& scores, Index k,
                               TrainMode mode, Matrix* d_scores) {
  const Vector s = scores.col(k);
  if (mode == TrainMode::regression) {
    const Vector target = quantile_normalize(batch.targets.col(k).eval());
    const Vector diff = s - target;
    if (d_scores != nullptr) d_scores->col(k) += diff;
    return 0.5 * diff.squaredNorm();
  }
  const bool discounted = mode == TrainMode::listwise_discounted;
  const std::vector<Index> rank_order = ascending_order(batch.targets.col(k).eval());
  if (d_scores != nullptr) d_scores->col(k) += listwise_loss_grad(s, rank_order, discounted);
  return listwise_loss(s, rank_order, discounted);
}

void check_finite(const Matrix& m, const char* layer) {
  if (!m.allFinite()) fail(std::string("non-finite gradient in layer ") + layer);
}

// Reverse pass for one batch; d_out is the gradient at the network
// output. Accumulates into grad.
void backprop(const SurrogateParams& p, const Matrix& x, const ForwardCache& c,
              const Matrix& d_out, SurrogateParams& grad) {
  grad.w3 += d_out.transpose() * c.a2;
  grad.b3 += d_out.colwise().sum().transpose();
  const Matrix d_a2 = d_out * p.w3;
  const Matrix d_z2 = d_a2.array() * c.z2.unaryExpr([&](double v) {
    return leaky_grad(v, p.leaky_slope);
  }).array();
  grad.w2 += d_z2.transpose() * c.a1;
  grad.b2 += d_z2.colwise().sum().transpose();
  const Matrix d_a1 = d_z2 * p.w2;
  const Matrix d_z1 = d_a1.array() * c.z1.unaryExpr([&](double v) {
    return leaky_grad(v, p.leaky_slope);
  }).array();
  grad.w1 += d_z1.transpose() * x;
  grad.b1 += d_z1.colwise().sum().transpose();
}

SurrogateParams zeros_like(const SurrogateParams& p) {
  SurrogateParams g;
  g.w1 = Matrix::Zero(p.w1.rows(), p.w1.cols());
  g.b1 = Vector::Zero(p.b1.size());
  g.w2 = Matrix::Zero(p.w2.rows(), p.w2.cols());
  g.b2 = Vector::Zero(p.b2.size());
  g.w3 = Matrix::Zero(p.w3.rows(), p.w3.cols());
  g.b3 = Vector::Zero(p.b3.size());
  g.leaky_slope = p.leaky_slope;
  return g;
}

void axpy(SurrogateParams& p, double a, const SurrogateParams& g) {
  p.w1 += a * g.w1;
  p.b1 += a * g.b1;
  p.w2 += a * g.w2;
  p.b2 += a * g.b2;
  p.w3 += a * g.w3;
  p.b3 += a * g.b3;
}

void add_weight_decay(const SurrogateParams& p, double weight_decay, SurrogateParams& grad) {
  grad.w1 += 2.0 * weight_decay * p.w1;
  grad.w2 += 2.0 * weight_decay * p.w2;
  grad.w3 += 2.0 * weight_decay * p.w3;
}

double weight_decay_penalty(const SurrogateParams& p, double weight_decay) {
  return weight_decay * (p.w1.squaredNorm() + p.w2.squaredNorm() + p.w3.squaredNorm());
}

}  // namespace

TrainMode parse_train_mode(const std::string& name) {
  if (name == "listwise-discounted") return TrainMode::listwise_discounted;
  if (name == "listwise-plain") return TrainMode::listwise_plain;
  if (name == "regression") return TrainMode::regression;
  fail("unknown training mode '" + name + "'");
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::listwise_discounted: return "listwise-discounted";
    case TrainMode::listwise_plain: return "listwise-plain";
    case TrainMode::regression: return "regression";
  }
  return "?";
}

SurrogateParams init_surrogate(Index num_objectives, std::uint64_t seed) {
  if (num_objectives < 1) fail("init_surrogate: need at least one objective");
  Rng rng(seed);
  SurrogateParams p;
  p.w1.resize(kHidden, kInputDim);
  p.w2.resize(kHidden, kHidden);
  p.w3.resize(num_objectives, kHidden);
  fill_uniform(p.w1, rng);
  fill_uniform(p.w2, rng);
  fill_uniform(p.w3, rng);
  p.b1 = Vector::Zero(kHidden);
  p.b2 = Vector::Zero(kHidden);
  p.b3 = Vector::Zero(num_objectives);
  return p;
}

Vector forward(const SurrogateParams& params, const FeatureVector& features) {
  Matrix row(1, kInputDim);
  row.row(0) = features.transpose();
  return forward(params, row).row(0).transpose();
}

Matrix forward(const SurrogateParams& params, const Matrix& features) {
  if (features.cols() != params.w1.cols()) fail("forward: feature width mismatch");
  return forward_cached(params, features).out;
}

std::vector<Index> ascending_order(const Vector& values) {
  std::vector<Index> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return values(a) < values(b); });
  return idx;
}

double listwise_loss(const Vector& scores, const std::vector<Index>& rank_order, bool discounted) {
  const Index n = scores.size();
  if (n == 0) fail("listwise_loss: empty list");
  if (static_cast<Index>(rank_order.size()) != n) fail("listwise_loss: rank size mismatch");
  Vector by_rank(n);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    const Index j = rank_order[static_cast<std::size_t>(i)];
    if (j < 0 || j >= n || seen[static_cast<std::size_t>(j)]) {
      fail("listwise_loss: rank_order is not a permutation");
    }
    seen[static_cast<std::size_t>(j)] = true;
    by_rank(i) = scores(j);
  }
  const Vector log_z = suffix_logsumexp(by_rank);
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    loss += position_weight(i, discounted) * (by_rank(i) + log_z(i));
  }
  return loss;
}

double batch_loss(const SurrogateParams& params, const std::vector<TaskRankBatch>& batch,
                  const TrainConfig& cfg) {
  if (batch.empty()) fail("batch_loss: empty batch");
  double total = 0.0;
  for (const auto& task : batch) {
    const Matrix scores = forward(params, task.features);
    for (Index k = 0; k < scores.cols(); ++k) {
      total += objective_loss_and_grad(task, scores, k, cfg.mode, nullptr);
    }
  }
  return total / static_cast<double>(batch.size()) + weight_decay_penalty(params, cfg.weight_decay);
}

SurrogateParams loss_gradient(const SurrogateParams& params,
                              const std::vector<TaskRankBatch>& batch, const TrainConfig& cfg) {
  if (batch.empty()) fail("loss_gradient: empty batch");
  SurrogateParams grad = zeros_like(params);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& task : batch) {
    const ForwardCache cache = forward_cached(params, task.features);
    Matrix d_out = Matrix::Zero(cache.out.rows(), cache.out.cols());
    for (Index k = 0; k < cache.out.cols(); ++k) {
      objective_loss_and_grad(task, cache.out, k, cfg.mode, &d_out);
    }
    d_out *= scale;
    backprop(params, task.features, cache, d_out, grad);
  }
  add_weight_decay(params, cfg.weight_decay, grad);
  check_finite(grad.w1, "1");
  check_finite(grad.w2, "2");
  check_finite(grad.w3, "3");
  return grad;
}

std::vector<TaskRankBatch> build_rank_batches(const EvaluationCorpus& corpus,
                                              const Standardizer& standardizer) {
  std::vector<TaskRankBatch> batches;
  for (const auto& task_id : corpus.task_ids()) {
    const TaskEvaluations evals = corpus.task_mean_evaluations(task_id);
    TaskRankBatch batch;
    batch.task_id = task_id;
    batch.features.resize(static_cast<Index>(evals.config_ids.size()), kInputDim);
    for (std::size_t i = 0; i < evals.config_ids.size(); ++i) {
      const ModelConfig& config = corpus.configs()[static_cast<std::size_t>(evals.config_ids[i])];
      batch.features.row(static_cast<Index>(i)) =
          vectorize_config(config, corpus.schema, standardizer).transpose();
    }
    batch.targets = evals.objectives;
    batches.push_back(std::move(batch));
  }
  return batches;
}

TrainResult train_surrogate(const EvaluationCorpus& corpus, const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0 || cfg.epochs <= 0) fail("train_surrogate: bad config");
  if (cfg.weight_decay < 0.0) fail("train_surrogate: negative weight decay");

  const Standardizer standardizer = fit_standardizer(corpus);
  const std::vector<TaskRankBatch> batches = build_rank_batches(corpus, standardizer);
  const Index m = corpus.num_objectives();

  SurrogateParams params = init_surrogate(m, mix_seed(cfg.seed, 1));
  Rng shuffle_rng(mix_seed(cfg.seed, 2));

  std::vector<std::size_t> order(batches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainConfig step_cfg = cfg;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t pos : order) {
      const TaskRankBatch& task = batches[pos];
      for (Index k = 0; k < m; ++k) {
        const ForwardCache cache = forward_cached(params, task.features);
        Matrix d_out = Matrix::Zero(cache.out.rows(), cache.out.cols());
        objective_loss_and_grad(task, cache.out, k, step_cfg.mode, &d_out);
        SurrogateParams grad = zeros_like(params);
        backprop(params, task.features, cache, d_out, grad);
        add_weight_decay(params, cfg.weight_decay, grad);
        axpy(params, -cfg.learning_rate, grad);
      }
    }
    if (!params.w1.allFinite() || !params.w2.allFinite() || !params.w3.allFinite()) {
      fail("train_surrogate: parameters diverged at epoch " + std::to_string(epoch));
    }
  }
  TrainResult result;
  result.final_loss = batch_loss(params, batches, cfg);
  result.params = std::move(params);
  return result;
}

PointMatrix predict_all(const SurrogateParams& params, const std::vector<ModelConfig>& configs,
                        const HyperparameterSchema& schema, const Standardizer& standardizer) {
  if (configs.empty()) fail("predict_all: no configs");
  Matrix features(static_cast<Index>(configs.size()), kInputDim);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    features.row(static_cast<Index>(i)) =
        vectorize_config(configs[i], schema, standardizer).transpose();
  }
  return forward(params, features);
}

NonparametricBaseline NonparametricBaseline::fit(const EvaluationCorpus& corpus, Index objective,
                                                 BaselineMode mode) {
  if (objective < 0 || objective >= corpus.num_objectives()) {
    fail("nonparametric baseline: objective index out of range");
  }
  std::map<Index, std::pair<double, int>> acc;  // config id -> (sum, count)
  for (const auto& task_id : corpus.task_ids()) {
    const TaskEvaluations evals = corpus.task_mean_evaluations(task_id);
    Vector contribution = evals.objectives.col(objective);
    if (mode == BaselineMode::mean_rank) {
      contribution = average_ranks(contribution);
    }
    for (std::size_t i = 0; i < evals.config_ids.size(); ++i) {
      auto& slot = acc[evals.config_ids[i]];
      slot.first += contribution(static_cast<Index>(i));
      slot.second += 1;
    }
  }
  NonparametricBaseline baseline;
  for (const auto& [cid, sum_count] : acc) {
    baseline.prediction_[corpus.configs()[static_cast<std::size_t>(cid)]] =
        sum_count.first / sum_count.second;
  }
  return baseline;
}

double NonparametricBaseline::predict(const ModelConfig& config) const {
  const auto it = prediction_.find(config);
  if (it == prediction_.end()) {
    fail("nonparametric baseline: config not observed in training tasks: " +
         canonical_config_string(config));
  }
  return it->second;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  }
  return flat;
}

Matrix matrix_from_json(const nlohmann::json& j, Index rows, Index cols) {
  const auto flat = j.get<std::vector<double>>();
  if (static_cast<Index>(flat.size()) != rows * cols) fail("surrogate file: bad array length");
  Matrix m(rows, cols);
  std::size_t pos = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index jj = 0; jj < cols; ++jj) m(i, jj) = flat[pos++];
  }
  return m;
}

}  // namespace

void save_params(const SurrogateParams& params, const std::string& schema_fingerprint,
                 const std::string& path) {
  nlohmann::json j;
  j["num_objectives"] = params.num_objectives();
  j["leaky_slope"] = params.leaky_slope;
  j["schema_fingerprint"] = schema_fingerprint;
  j["w1"] = matrix_to_json(params.w1);
  j["b1"] = matrix_to_json(params.b1);
  j["w2"] = matrix_to_json(params.w2);
  j["b2"] = matrix_to_json(params.b2);
  j["w3"] = matrix_to_json(params.w3);
  j["b3"] = matrix_to_json(params.b3);
  std::ofstream out(path);
  if (!out) fail("cannot write surrogate file '" + path + "'");
  out << j.dump(2) << "\n";
}

LoadedParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open surrogate file '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fail("surrogate file '" + path + "' is not valid JSON");
  LoadedParams loaded;
  const Index m = j.at("num_objectives").get<Index>();
  loaded.params.leaky_slope = j.at("leaky_slope").get<double>();
  loaded.schema_fingerprint = j.at("schema_fingerprint").get<std::string>();
  loaded.params.w1 = matrix_from_json(j.at("w1"), kHidden, kInputDim);
  loaded.params.b1 = matrix_from_json(j.at("b1"), kHidden, 1);
  loaded.params.w2 = matrix_from_json(j.at("w2"), kHidden, kHidden);
  loaded.params.b2 = matrix_from_json(j.at("b2"), kHidden, 1);
  loaded.params.w3 = matrix_from_json(j.at("w3"), m, kHidden);
  loaded.params.b3 = matrix_from_json(j.at("b3"), m, 1);
  return loaded;
}

}  // namespace moselect
