#pragma once

// The ranking surrogate: a 28 -> 32 -> 32 -> m MLP scoring model
// configurations per objective, trained with a listwise ranking loss
// (optionally with 1/i position discounts) or plain regression against
// quantile-normalized targets. Gradients are hand-rolled reverse mode
// and checked against finite differences in the tests.

#include <cstdint>
#include <string>
#include <vector>

#include "moselect/eval_store.hpp"
#include "moselect/types.hpp"

namespace moselect {

struct SurrogateParams {
  Matrix w1;  // 32 x 28
  Vector b1;
  Matrix w2;  // 32 x 32
  Vector b2;
  Matrix w3;  // m x 32
  Vector b3;
  double leaky_slope = 0.01;

  Index num_objectives() const { return w3.rows(); }
};

enum class TrainMode { listwise_discounted, listwise_plain, regression };

TrainMode parse_train_mode(const std::string& name);
std::string to_string(TrainMode mode);

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 200;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::listwise_discounted;
};

// One task's ranking problem: the feature rows of its N evaluated
// configs and their true objective values (seed-averaged); ranks are
// derived per objective, smaller value = better rank.
struct TaskRankBatch {
  std::string task_id;
  Matrix features;  // N x kInputDim
  Matrix targets;   // N x m
};

// Fan-in/fan-out scaled symmetric uniform weights, zero biases.
SurrogateParams init_surrogate(Index num_objectives, std::uint64_t seed);

Vector forward(const SurrogateParams& params, const FeatureVector& features);
Matrix forward(const SurrogateParams& params, const Matrix& features);

// Stable argsort: position i holds the index ranked i-th (best first).
std::vector<Index> ascending_order(const Vector& values);

// L = sum_i w_i (s_{r(i)} + log sum_{l>=i} exp(-s_{r(l)})) with
// w_i = 1/i when discounted, else 1. Zero for a perfectly separated
// correct ordering in the limit and exactly zero for N = 1.
double listwise_loss(const Vector& scores, const std::vector<Index>& rank_order, bool discounted);

// The scalar objective loss_gradient differentiates:
// mean over batches of the per-(task, objective) losses, plus
// weight_decay * sum of squared weight entries (biases excluded).
double batch_loss(const SurrogateParams& params, const std::vector<TaskRankBatch>& batch,
                  const TrainConfig& cfg);

SurrogateParams loss_gradient(const SurrogateParams& params,
                              const std::vector<TaskRankBatch>& batch, const TrainConfig& cfg);

std::vector<TaskRankBatch> build_rank_batches(const EvaluationCorpus& corpus,
                                              const Standardizer& standardizer);

struct TrainResult {
  SurrogateParams params;
  double final_loss = 0.0;
};

// SGD, one step per (task, objective) list, task order reshuffled each
// epoch; deterministic given cfg.seed.
TrainResult train_surrogate(const EvaluationCorpus& corpus, const TrainConfig& cfg);

PointMatrix predict_all(const SurrogateParams& params, const std::vector<ModelConfig>& configs,
                        const HyperparameterSchema& schema, const Standardizer& standardizer);

enum class BaselineMode { mean_value, mean_rank };

// Memorizing baseline: per config, the mean objective value (or mean
// within-task rank) across training tasks. Cannot generalize to
// configurations it has not seen.
class NonparametricBaseline {
 public:
  static NonparametricBaseline fit(const EvaluationCorpus& corpus, Index objective,
                                   BaselineMode mode);
  double predict(const ModelConfig& config) const;

 private:
  std::map<ModelConfig, double> prediction_;
};

void save_params(const SurrogateParams& params, const std::string& schema_fingerprint,
                 const std::string& path);

struct LoadedParams {
  SurrogateParams params;
  std::string schema_fingerprint;
};

LoadedParams load_params(const std::string& path);

}  // namespace moselect
