#pragma once

// Statistical comparison utilities: two-sample Kolmogorov-Smirnov test,
// relative-improvement ratios, per-task rank tables, and the
// task-by-task rank correlation matrix.

#include <functional>
#include <string>
#include <vector>

#include "moselect/eval_store.hpp"
#include "moselect/types.hpp"

namespace moselect {

struct MethodGroup {
  std::string name;
  std::vector<std::string> model_names;
};

// Compared groups must not share a model.
void ensure_disjoint(const MethodGroup& a, const MethodGroup& b);

// Raw per-seed objective values of the group's configurations on one
// task: the single-model evaluation sample the KS comparison draws
// from.
std::vector<double> group_sample(const EvaluationCorpus& corpus, const std::string& task_id,
                                 const MethodGroup& group, Index objective);

struct KsResult {
  double d = 0.0;        // sup |ECDF_a - ECDF_b|
  double p_value = 1.0;  // asymptotic, clamped to (0, 1]
};

KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b);

// Asymptotic Kolmogorov survival function evaluated at
// t = sqrt(n_eff) * D.
double kolmogorov_p_value(double t);

// deep / classical - 1; negative values favor the deep side.
double relative_improvement(double best_deep_ncrps, double best_classical_ncrps);

struct RankTable {
  std::vector<std::string> task_ids;
  std::vector<std::string> labels;  // ranked unit per column
  Matrix ranks;                     // tasks x units, average-rank ties
  Vector mean;                      // per unit, across tasks
  Vector stddev;                    // population deviation
  std::vector<std::string> skipped_tasks;
};

// Ranks the configurations passing `filter` within each task by the
// given objective (seed-averaged values, ascending). Tasks missing any
// retained unit are skipped with a warning.
RankTable rank_table(const EvaluationCorpus& corpus, Index objective,
                     const std::function<bool(const ModelConfig&)>& filter);

// Pearson correlation between per-task rank rows; unit diagonal; NaN
// marks pairs involving a zero-variance row.
Matrix rank_correlation_matrix(const RankTable& table);

}  // namespace moselect
