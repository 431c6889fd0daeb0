#pragma once

// Default-selection strategies over an evaluation corpus and the
// leave-one-out evaluation harness that scores them by hypervolume
// error on the held-out task.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moselect/eval_store.hpp"
#include "moselect/surrogate.hpp"
#include "moselect/types.hpp"

namespace moselect {

struct SelectionResult {
  std::vector<ModelConfig> configs;  // ordered defaults
  PointMatrix scores;                // quantile-normalized predictions, one row per default
  std::vector<double> hv_error_curve;  // per-prefix error on a held-out task, may be empty
};

// Quantile-normalizes the predicted scores per objective and applies
// the non-dominated sort; returns the full candidate ordering. The
// layer partition is seed-independent, only within-layer order varies.
std::vector<Index> rank_candidates(const PointMatrix& predicted, std::uint64_t seed);

// Train surrogate, predict all candidates, non-dominated sort, take the
// first n. Deterministic given cfg.seed.
SelectionResult pareto_select(const EvaluationCorpus& train,
                              const std::vector<ModelConfig>& candidates, Index n,
                              const TrainConfig& cfg);

// Same pipeline restricted to one objective; ascending predicted score,
// ties stable by candidate index.
SelectionResult single_objective_select(const EvaluationCorpus& train,
                                        const std::vector<ModelConfig>& candidates, Index n,
                                        const TrainConfig& cfg, Index objective = 0);

// Model-free greedy: iteratively appends the candidate minimizing the
// summed per-task best-so-far error for one objective. Candidates
// missing on a task count as +infinity there.
std::vector<ModelConfig> greedy_model_free(const EvaluationCorpus& train,
                                           const std::vector<ModelConfig>& candidates, Index n,
                                           Index objective);

std::vector<ModelConfig> random_select(const std::vector<ModelConfig>& candidates, Index n,
                                       std::uint64_t seed);

struct RankingReport {
  double mrr = 0.0;
  double ndcg = 0.0;
  std::map<int, double> precision_at;  // k in {5, 10, 20} where the list is long enough
};

// predicted_order: candidate indices, best predicted first.
RankingReport ranking_metrics(const std::vector<Index>& predicted_order, const Vector& true_values);

enum class SelectorMethod { pareto, single, greedy, random };

SelectorMethod parse_selector_method(const std::string& name);
std::string to_string(SelectorMethod method);

// Hypervolume-error prefix curve of an ordered selection against one
// task's true (quantile-normalized) evaluations. Only candidates with a
// record on the task enter the truth set and the scoring; the curve is
// extended with its last value when the selection is shorter than n_max.
std::vector<double> selection_hv_curve(const EvaluationCorpus& corpus, const std::string& task_id,
                                       const std::vector<ModelConfig>& candidates,
                                       const std::vector<ModelConfig>& ordered, Index n_max);

struct LoocvCurve {
  std::string task_id;
  std::uint64_t seed = 0;
  std::vector<double> hv_error;  // index i is the error of the first i+1 defaults
};

struct LoocvResult {
  SelectorMethod method = SelectorMethod::pareto;
  Index n_max = 0;
  std::vector<LoocvCurve> curves;
  Vector mean_curve;
  Vector std_curve;  // population deviation across curves
  std::vector<std::string> skipped_tasks;
};

// Each task in turn is the unseen test task; selection is computed from
// the remaining tasks only and scored on the held-out one, repeated per
// seed. Random streams are derived per (seed, fold, method) so methods
// never share draws.
LoocvResult loocv(const EvaluationCorpus& corpus, SelectorMethod method, Index n_max,
                  const std::vector<std::uint64_t>& seeds, const TrainConfig& base_cfg);

void write_loocv_csv(const LoocvResult& result, std::ostream& out);
nlohmann::json loocv_summary_json(const LoocvResult& result);

enum class RankingPredictor { surrogate, nonparametric_value, nonparametric_rank, random };

RankingPredictor parse_ranking_predictor(const std::string& name);
std::string to_string(RankingPredictor predictor);

struct RankingLoocvResult {
  std::vector<std::pair<std::uint64_t, RankingReport>> per_fold;  // (seed, report)
  RankingReport mean;
};

// Ranking-quality evaluation of a single-objective predictor under the
// same leave-one-out protocol.
RankingLoocvResult ranking_loocv(const EvaluationCorpus& corpus, Index objective,
                                 RankingPredictor predictor, const TrainConfig& base_cfg,
                                 const std::vector<std::uint64_t>& seeds);

}  // namespace moselect
