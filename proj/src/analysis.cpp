#include "moselect/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <stdexcept>

#include "moselect/moo_core.hpp"

namespace moselect {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

constexpr double kPi = 3.14159265358979323846;

}  // namespace

void ensure_disjoint(const MethodGroup& a, const MethodGroup& b) {
  if (a.model_names.empty() || b.model_names.empty()) {
    fail("method group '" + (a.model_names.empty() ? a.name : b.name) + "' is empty");
  }
  for (const auto& name : a.model_names) {
    for (const auto& other : b.model_names) {
      if (name == other) {
        fail("method groups '" + a.name + "' and '" + b.name + "' both contain '" + name + "'");
      }
    }
  }
}

std::vector<double> group_sample(const EvaluationCorpus& corpus, const std::string& task_id,
                                 const MethodGroup& group, Index objective) {
  if (objective < 0 || objective >= corpus.num_objectives()) {
    fail("group_sample: objective index out of range");
  }
  std::vector<double> sample;
  for (Index row : corpus.task_records(task_id)) {
    const EvaluationRecord& rec = corpus.records[static_cast<std::size_t>(row)];
    for (const auto& name : group.model_names) {
      if (rec.config.model_name == name) {
        sample.push_back(rec.objectives(objective));
        break;
      }
    }
  }
  return sample;
}

double kolmogorov_p_value(double t) {
  if (t < 1e-8) return 1.0;
  double p;
  if (t < 0.755) {
    // Dual theta series; the direct alternating series stalls for
    // small arguments.
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = std::exp(-(2.0 * k - 1.0) * (2.0 * k - 1.0) * kPi * kPi / (8.0 * t * t));
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    p = 1.0 - std::sqrt(2.0 * kPi) / t * sum;
  } else {
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100000; ++k) {
      const double term = std::exp(-2.0 * k * k * t * t);
      sum += sign * term;
      sign = -sign;
      if (term < 1e-12) break;
    }
    p = 2.0 * sum;
  }
  return std::min(1.0, std::max(p, 1e-300));
}

KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) fail("ks_two_sample: empty sample");
  std::vector<double> sa = a;
  std::vector<double> sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  double d = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }

  const double n_eff = na * nb / (na + nb);
  KsResult result;
  result.d = d;
  result.p_value = kolmogorov_p_value(std::sqrt(n_eff) * d);
  return result;
}

double relative_improvement(double best_deep_ncrps, double best_classical_ncrps) {
  if (!(best_deep_ncrps > 0.0) || !(best_classical_ncrps > 0.0)) {
    fail("relative_improvement: inputs must be positive");
  }
  return best_deep_ncrps / best_classical_ncrps - 1.0;
}

RankTable rank_table(const EvaluationCorpus& corpus, Index objective,
                     const std::function<bool(const ModelConfig&)>& filter) {
  if (objective < 0 || objective >= corpus.num_objectives()) {
    fail("rank_table: objective index out of range");
  }
  std::vector<Index> unit_ids;
  std::map<std::string, int> model_count;
  for (std::size_t cid = 0; cid < corpus.configs().size(); ++cid) {
    const ModelConfig& config = corpus.configs()[cid];
    if (!filter || filter(config)) {
      unit_ids.push_back(static_cast<Index>(cid));
      ++model_count[config.model_name];
    }
  }
  if (unit_ids.empty()) fail("rank_table: no configuration passes the filter");

  RankTable table;
  for (Index cid : unit_ids) {
    const ModelConfig& config = corpus.configs()[static_cast<std::size_t>(cid)];
    table.labels.push_back(model_count[config.model_name] == 1 ? config.model_name
                                                               : config_slug(config));
  }

  std::vector<Vector> rows;
  for (const auto& task_id : corpus.task_ids()) {
    const TaskEvaluations evals = corpus.task_mean_evaluations(task_id);
    std::map<Index, double> value_by_config;
    for (std::size_t row = 0; row < evals.config_ids.size(); ++row) {
      value_by_config[evals.config_ids[row]] = evals.objectives(static_cast<Index>(row), objective);
    }
    Vector values(static_cast<Index>(unit_ids.size()));
    bool complete = true;
    for (std::size_t u = 0; u < unit_ids.size(); ++u) {
      const auto it = value_by_config.find(unit_ids[u]);
      if (it == value_by_config.end()) {
        complete = false;
        break;
      }
      values(static_cast<Index>(u)) = it->second;
    }
    if (!complete) {
      std::cerr << "warning: rank_table skipping task '" << task_id
                << "': not all retained configurations are evaluated\n";
      table.skipped_tasks.push_back(task_id);
      continue;
    }
    table.task_ids.push_back(task_id);
    rows.push_back(average_ranks(values));
  }
  if (rows.empty()) fail("rank_table: no task has complete evaluations for the retained set");

  table.ranks.resize(static_cast<Index>(rows.size()), static_cast<Index>(unit_ids.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) table.ranks.row(static_cast<Index>(t)) = rows[t];
  table.mean = table.ranks.colwise().mean();
  table.stddev = ((table.ranks.rowwise() - table.mean.transpose()).array().square().colwise().sum() /
                  static_cast<double>(rows.size()))
                     .sqrt()
                     .transpose();
  return table;
}

Matrix rank_correlation_matrix(const RankTable& table) {
  const Index t = table.ranks.rows();
  if (t < 2) fail("rank_correlation_matrix: need at least two tasks");
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Vector row_mean = table.ranks.rowwise().mean();
  Matrix centered = table.ranks.colwise() - row_mean;
  Vector row_norm = centered.rowwise().norm();

  Matrix corr(t, t);
  for (Index a = 0; a < t; ++a) {
    for (Index b = 0; b < t; ++b) {
      if (a == b) {
        corr(a, b) = 1.0;
      } else if (row_norm(a) == 0.0 || row_norm(b) == 0.0) {
        corr(a, b) = nan;
      } else {
        corr(a, b) = centered.row(a).dot(centered.row(b)) / (row_norm(a) * row_norm(b));
      }
    }
  }
  return corr;
}

}  // namespace moselect
