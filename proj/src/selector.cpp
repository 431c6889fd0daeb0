#include "moselect/selector.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "moselect/detail/text.hpp"
#include "moselect/moo_core.hpp"
#include "moselect/random.hpp"

namespace moselect {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<ModelConfig> take_ordered(const std::vector<ModelConfig>& candidates,
                                      const std::vector<Index>& order, Index n) {
  const Index count = std::min<Index>(n, static_cast<Index>(order.size()));
  std::vector<ModelConfig> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    out.push_back(candidates[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }
  return out;
}

PointMatrix take_rows(const PointMatrix& scores, const std::vector<Index>& order, Index n) {
  const Index count = std::min<Index>(n, static_cast<Index>(order.size()));
  PointMatrix out(count, scores.cols());
  for (Index i = 0; i < count; ++i) out.row(i) = scores.row(order[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

std::vector<Index> rank_candidates(const PointMatrix& predicted, std::uint64_t seed) {
  if (predicted.rows() == 0) fail("rank_candidates: no candidates");
  const PointMatrix normalized = quantile_normalize_columns(predicted);
  return non_dominated_sort(normalized, seed).order;
}

SelectionResult pareto_select(const EvaluationCorpus& train,
                              const std::vector<ModelConfig>& candidates, Index n,
                              const TrainConfig& cfg) {
  if (n < 1) fail("pareto_select: n must be positive");
  if (candidates.empty()) fail("pareto_select: no candidates");
  const TrainResult trained = train_surrogate(train, cfg);
  const Standardizer standardizer = fit_standardizer(train);
  const PointMatrix predicted =
      predict_all(trained.params, candidates, train.schema, standardizer);
  const PointMatrix normalized = quantile_normalize_columns(predicted);
  const std::vector<Index> order = non_dominated_sort(normalized, mix_seed(cfg.seed, 3)).order;

  SelectionResult result;
  result.configs = take_ordered(candidates, order, n);
  result.scores = take_rows(normalized, order, n);
  return result;
}

SelectionResult single_objective_select(const EvaluationCorpus& train,
                                        const std::vector<ModelConfig>& candidates, Index n,
                                        const TrainConfig& cfg, Index objective) {
  if (n < 1) fail("single_objective_select: n must be positive");
  if (candidates.empty()) fail("single_objective_select: no candidates");
  const EvaluationCorpus sliced = train.with_objectives({objective});
  const TrainResult trained = train_surrogate(sliced, cfg);
  const Standardizer standardizer = fit_standardizer(sliced);
  const PointMatrix predicted =
      predict_all(trained.params, candidates, sliced.schema, standardizer);
  const std::vector<Index> order = ascending_order(predicted.col(0));

  SelectionResult result;
  result.configs = take_ordered(candidates, order, n);
  const PointMatrix normalized = quantile_normalize_columns(predicted);
  result.scores = take_rows(normalized, order, n);
  return result;
}

std::vector<ModelConfig> greedy_model_free(const EvaluationCorpus& train,
                                           const std::vector<ModelConfig>& candidates, Index n,
                                           Index objective) {
  if (candidates.empty()) fail("greedy_model_free: no candidates");
  if (objective < 0 || objective >= train.num_objectives()) {
    fail("greedy_model_free: objective index out of range");
  }
  Index count = n;
  if (count > static_cast<Index>(candidates.size())) {
    std::cerr << "warning: greedy_model_free truncated to " << candidates.size()
              << " candidates\n";
    count = static_cast<Index>(candidates.size());
  }

  const double inf = std::numeric_limits<double>::infinity();
  const Index tasks = train.num_tasks();
  Matrix errors = Matrix::Constant(tasks, static_cast<Index>(candidates.size()), inf);
  for (Index t = 0; t < tasks; ++t) {
    const TaskEvaluations evals = train.task_mean_evaluations(train.task_ids()[static_cast<std::size_t>(t)]);
    for (std::size_t row = 0; row < evals.config_ids.size(); ++row) {
      const ModelConfig& config = train.configs()[static_cast<std::size_t>(evals.config_ids[row])];
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (candidates[c] == config) {
          errors(t, static_cast<Index>(c)) = evals.objectives(static_cast<Index>(row), objective);
        }
      }
    }
  }

  Vector best_so_far = Vector::Constant(tasks, inf);
  std::vector<bool> chosen(candidates.size(), false);
  std::vector<ModelConfig> result;
  for (Index step = 0; step < count; ++step) {
    Index best = -1;
    double best_joint = inf;
    double best_own = inf;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (chosen[c]) continue;
      double joint = 0.0;
      double own = 0.0;
      for (Index t = 0; t < tasks; ++t) {
        joint += std::min(best_so_far(t), errors(t, static_cast<Index>(c)));
        own += errors(t, static_cast<Index>(c));
      }
      // Ties in the joint objective (common once it saturates) prefer
      // the candidate with the lower standalone error, then the index.
      if (best < 0 || joint < best_joint || (joint == best_joint && own < best_own)) {
        best = static_cast<Index>(c);
        best_joint = joint;
        best_own = own;
      }
    }
    chosen[static_cast<std::size_t>(best)] = true;
    result.push_back(candidates[static_cast<std::size_t>(best)]);
    for (Index t = 0; t < tasks; ++t) {
      best_so_far(t) = std::min(best_so_far(t), errors(t, best));
    }
  }
  return result;
}

std::vector<ModelConfig> random_select(const std::vector<ModelConfig>& candidates, Index n,
                                       std::uint64_t seed) {
  std::vector<Index> order(candidates.size());
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order);
  return take_ordered(candidates, order, n);
}

RankingReport ranking_metrics(const std::vector<Index>& predicted_order,
                              const Vector& true_values) {
  const Index n = true_values.size();
  if (static_cast<Index>(predicted_order.size()) != n || n == 0) {
    fail("ranking_metrics: order and truth sizes differ");
  }
  std::vector<Index> predicted_rank(static_cast<std::size_t>(n), -1);
  for (std::size_t pos = 0; pos < predicted_order.size(); ++pos) {
    const Index c = predicted_order[pos];
    if (c < 0 || c >= n || predicted_rank[static_cast<std::size_t>(c)] >= 0) {
      fail("ranking_metrics: predicted order is not a permutation");
    }
    predicted_rank[static_cast<std::size_t>(c)] = static_cast<Index>(pos) + 1;
  }
  const std::vector<Index> true_order = ascending_order(true_values);

  RankingReport report;
  report.mrr = 1.0 / static_cast<double>(predicted_rank[static_cast<std::size_t>(true_order[0])]);

  for (int k : {5, 10, 20}) {
    if (n < k) continue;
    std::set<Index> top_true(true_order.begin(), true_order.begin() + k);
    int hits = 0;
    for (int i = 0; i < k; ++i) {
      if (top_true.count(predicted_order[static_cast<std::size_t>(i)]) > 0) ++hits;
    }
    report.precision_at[k] = static_cast<double>(hits) / static_cast<double>(k);
  }

  // Relevance 1.0, 0.9, ..., 0.1 for the true top ten, discounted by
  // log2(predicted rank + 1).
  double dcg = 0.0;
  double ideal = 0.0;
  const Index top = std::min<Index>(10, n);
  for (Index i = 1; i <= top; ++i) {
    const double relevance = 1.1 - 0.1 * static_cast<double>(i);
    const Index k_i = predicted_rank[static_cast<std::size_t>(true_order[static_cast<std::size_t>(i - 1)])];
    dcg += relevance / std::log2(static_cast<double>(k_i) + 1.0);
    ideal += relevance / std::log2(static_cast<double>(i) + 1.0);
  }
  report.ndcg = dcg / ideal;
  return report;
}

SelectorMethod parse_selector_method(const std::string& name) {
  if (name == "pareto") return SelectorMethod::pareto;
  if (name == "single") return SelectorMethod::single;
  if (name == "greedy") return SelectorMethod::greedy;
  if (name == "random") return SelectorMethod::random;
  fail("unknown selector method '" + name + "'");
}

std::string to_string(SelectorMethod method) {
  switch (method) {
    case SelectorMethod::pareto: return "pareto";
    case SelectorMethod::single: return "single";
    case SelectorMethod::greedy: return "greedy";
    case SelectorMethod::random: return "random";
  }
  return "?";
}

std::vector<double> selection_hv_curve(const EvaluationCorpus& corpus, const std::string& task_id,
                                       const std::vector<ModelConfig>& candidates,
                                       const std::vector<ModelConfig>& ordered, Index n_max) {
  const TaskEvaluations evals = corpus.task_mean_evaluations(task_id);
  std::set<Index> candidate_ids;
  for (const auto& config : candidates) {
    const Index cid = corpus.config_id(config);
    if (cid >= 0) candidate_ids.insert(cid);
  }
  std::vector<Index> truth_rows;
  std::map<Index, Index> config_to_row;  // config id -> row in truth set
  for (std::size_t row = 0; row < evals.config_ids.size(); ++row) {
    if (candidate_ids.count(evals.config_ids[row]) > 0) {
      config_to_row[evals.config_ids[row]] = static_cast<Index>(truth_rows.size());
      truth_rows.push_back(static_cast<Index>(row));
    }
  }
  if (truth_rows.empty()) {
    fail("task '" + task_id + "' has no evaluations for the candidate set");
  }
  PointMatrix truth(static_cast<Index>(truth_rows.size()), corpus.num_objectives());
  for (std::size_t i = 0; i < truth_rows.size(); ++i) {
    truth.row(static_cast<Index>(i)) = evals.objectives.row(truth_rows[i]);
  }
  truth = quantile_normalize_columns(truth);
  const Vector reference = Vector::Ones(corpus.num_objectives());

  const std::vector<Index> front = pareto_front(truth);
  PointMatrix front_points(static_cast<Index>(front.size()), truth.cols());
  for (std::size_t i = 0; i < front.size(); ++i) {
    front_points.row(static_cast<Index>(i)) = truth.row(front[i]);
  }
  const double front_hv = hypervolume(front_points, reference);

  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(n_max));
  std::vector<Index> selected_rows;
  for (Index i = 0; i < n_max; ++i) {
    if (i < static_cast<Index>(ordered.size())) {
      const Index cid = corpus.config_id(ordered[static_cast<std::size_t>(i)]);
      const auto it = cid >= 0 ? config_to_row.find(cid) : config_to_row.end();
      if (it != config_to_row.end()) selected_rows.push_back(it->second);
    }
    PointMatrix selected(static_cast<Index>(selected_rows.size()), truth.cols());
    for (std::size_t s = 0; s < selected_rows.size(); ++s) {
      selected.row(static_cast<Index>(s)) = truth.row(selected_rows[s]);
    }
    curve.push_back(front_hv - hypervolume(selected, reference));
  }
  return curve;
}

namespace {

std::vector<ModelConfig> run_selector(const EvaluationCorpus& train,
                                      const std::vector<ModelConfig>& candidates, Index n,
                                      SelectorMethod method, const TrainConfig& cfg) {
  switch (method) {
    case SelectorMethod::pareto: return pareto_select(train, candidates, n, cfg).configs;
    case SelectorMethod::single: return single_objective_select(train, candidates, n, cfg).configs;
    case SelectorMethod::greedy: return greedy_model_free(train, candidates, n, 0);
    case SelectorMethod::random: return random_select(candidates, n, mix_seed(cfg.seed, 4));
  }
  fail("unreachable selector method");
}

}  // namespace

LoocvResult loocv(const EvaluationCorpus& corpus, SelectorMethod method, Index n_max,
                  const std::vector<std::uint64_t>& seeds, const TrainConfig& base_cfg) {
  if (corpus.num_tasks() < 2) fail("loocv: need at least two tasks");
  if (n_max < 1) fail("loocv: n_max must be positive");
  if (seeds.empty()) fail("loocv: need at least one seed");

  LoocvResult result;
  result.method = method;
  result.n_max = n_max;

  const auto method_id = static_cast<std::uint64_t>(method);
  for (std::size_t fold = 0; fold < corpus.task_ids().size(); ++fold) {
    const std::string& task_id = corpus.task_ids()[fold];
    const EvaluationCorpus train = corpus.without_task(task_id);
    const std::vector<ModelConfig>& candidates = train.configs();

    bool scoreable = true;
    {
      const TaskEvaluations evals = corpus.task_mean_evaluations(task_id);
      Index overlap = 0;
      for (Index cid : evals.config_ids) {
        if (train.config_id(corpus.configs()[static_cast<std::size_t>(cid)]) >= 0) ++overlap;
      }
      if (overlap == 0) scoreable = false;
    }
    if (!scoreable) {
      std::cerr << "warning: skipping task '" << task_id
                << "': no evaluations overlap the training candidate set\n";
      result.skipped_tasks.push_back(task_id);
      continue;
    }

    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base_cfg;
      cfg.seed = mix_seed(mix_seed(seed, static_cast<std::uint64_t>(fold)), method_id);
      const std::vector<ModelConfig> ordered = run_selector(train, candidates, n_max, method, cfg);
      LoocvCurve curve;
      curve.task_id = task_id;
      curve.seed = seed;
      curve.hv_error = selection_hv_curve(corpus, task_id, candidates, ordered, n_max);
      result.curves.push_back(std::move(curve));
    }
  }
  if (result.curves.empty()) fail("loocv: every task was skipped");

  result.mean_curve = Vector::Zero(n_max);
  for (const auto& curve : result.curves) {
    for (Index i = 0; i < n_max; ++i) result.mean_curve(i) += curve.hv_error[static_cast<std::size_t>(i)];
  }
  result.mean_curve /= static_cast<double>(result.curves.size());
  result.std_curve = Vector::Zero(n_max);
  for (const auto& curve : result.curves) {
    for (Index i = 0; i < n_max; ++i) {
      const double d = curve.hv_error[static_cast<std::size_t>(i)] - result.mean_curve(i);
      result.std_curve(i) += d * d;
    }
  }
  result.std_curve = (result.std_curve / static_cast<double>(result.curves.size())).cwiseSqrt();
  return result;
}

void write_loocv_csv(const LoocvResult& result, std::ostream& out) {
  out << "fold,n,method,seed,hv_error\n";
  for (const auto& curve : result.curves) {
    for (std::size_t i = 0; i < curve.hv_error.size(); ++i) {
      out << curve.task_id << "," << (i + 1) << "," << to_string(result.method) << ","
          << curve.seed << "," << detail::format_double(curve.hv_error[i]) << "\n";
    }
  }
}

nlohmann::json loocv_summary_json(const LoocvResult& result) {
  nlohmann::json j;
  j["method"] = to_string(result.method);
  j["n_max"] = result.n_max;
  j["num_curves"] = result.curves.size();
  j["skipped_tasks"] = result.skipped_tasks;
  j["mean_hv_error"] = std::vector<double>(result.mean_curve.data(),
                                           result.mean_curve.data() + result.mean_curve.size());
  j["std_hv_error"] = std::vector<double>(result.std_curve.data(),
                                          result.std_curve.data() + result.std_curve.size());
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& curve : result.curves) {
    curves.push_back({{"fold", curve.task_id}, {"seed", curve.seed}, {"hv_error", curve.hv_error}});
  }
  j["curves"] = curves;
  return j;
}

RankingPredictor parse_ranking_predictor(const std::string& name) {
  if (name == "surrogate") return RankingPredictor::surrogate;
  if (name == "nonparametric-value") return RankingPredictor::nonparametric_value;
  if (name == "nonparametric-rank") return RankingPredictor::nonparametric_rank;
  if (name == "random") return RankingPredictor::random;
  fail("unknown ranking predictor '" + name + "'");
}

std::string to_string(RankingPredictor predictor) {
  switch (predictor) {
    case RankingPredictor::surrogate: return "surrogate";
    case RankingPredictor::nonparametric_value: return "nonparametric-value";
    case RankingPredictor::nonparametric_rank: return "nonparametric-rank";
    case RankingPredictor::random: return "random";
  }
  return "?";
}

RankingLoocvResult ranking_loocv(const EvaluationCorpus& corpus, Index objective,
                                 RankingPredictor predictor, const TrainConfig& base_cfg,
                                 const std::vector<std::uint64_t>& seeds) {
  if (corpus.num_tasks() < 2) fail("ranking_loocv: need at least two tasks");
  if (seeds.empty()) fail("ranking_loocv: need at least one seed");

  RankingLoocvResult result;
  for (std::size_t fold = 0; fold < corpus.task_ids().size(); ++fold) {
    const std::string& task_id = corpus.task_ids()[fold];
    const EvaluationCorpus train = corpus.without_task(task_id).with_objectives({objective});

    // Truth: the held-out task's values for candidates known at
    // training time.
    const TaskEvaluations evals = corpus.task_mean_evaluations(task_id);
    std::vector<ModelConfig> scored_configs;
    std::vector<double> scored_truth;
    for (std::size_t row = 0; row < evals.config_ids.size(); ++row) {
      const ModelConfig& config = corpus.configs()[static_cast<std::size_t>(evals.config_ids[row])];
      if (train.config_id(config) >= 0) {
        scored_configs.push_back(config);
        scored_truth.push_back(evals.objectives(static_cast<Index>(row), objective));
      }
    }
    if (scored_configs.empty()) continue;
    Vector truth = Eigen::Map<const Vector>(scored_truth.data(),
                                            static_cast<Index>(scored_truth.size()));

    for (std::uint64_t seed : seeds) {
      const std::uint64_t fold_seed = mix_seed(seed, static_cast<std::uint64_t>(fold));
      std::vector<Index> order;
      switch (predictor) {
        case RankingPredictor::surrogate: {
          TrainConfig cfg = base_cfg;
          cfg.seed = fold_seed;
          const TrainResult trained = train_surrogate(train, cfg);
          const Standardizer standardizer = fit_standardizer(train);
          const PointMatrix predicted =
              predict_all(trained.params, scored_configs, train.schema, standardizer);
          order = ascending_order(predicted.col(0));
          break;
        }
        case RankingPredictor::nonparametric_value:
        case RankingPredictor::nonparametric_rank: {
          const auto mode = predictor == RankingPredictor::nonparametric_value
                                ? BaselineMode::mean_value
                                : BaselineMode::mean_rank;
          const NonparametricBaseline baseline = NonparametricBaseline::fit(train, 0, mode);
          Vector predicted(static_cast<Index>(scored_configs.size()));
          for (std::size_t i = 0; i < scored_configs.size(); ++i) {
            predicted(static_cast<Index>(i)) = baseline.predict(scored_configs[i]);
          }
          order = ascending_order(predicted);
          break;
        }
        case RankingPredictor::random: {
          order.resize(scored_configs.size());
          std::iota(order.begin(), order.end(), Index{0});
          Rng rng(fold_seed);
          rng.shuffle(order);
          break;
        }
      }
      result.per_fold.emplace_back(seed, ranking_metrics(order, truth));
    }
  }
  if (result.per_fold.empty()) fail("ranking_loocv: every task was skipped");

  RankingReport mean;
  std::map<int, std::pair<double, int>> precision_acc;
  for (const auto& [seed, report] : result.per_fold) {
    mean.mrr += report.mrr;
    mean.ndcg += report.ndcg;
    for (const auto& [k, p] : report.precision_at) {
      precision_acc[k].first += p;
      precision_acc[k].second += 1;
    }
  }
  const double count = static_cast<double>(result.per_fold.size());
  mean.mrr /= count;
  mean.ndcg /= count;
  for (const auto& [k, acc] : precision_acc) {
    if (acc.second == static_cast<int>(result.per_fold.size())) {
      mean.precision_at[k] = acc.first / count;
    }
  }
  result.mean = mean;
  return result;
}

}  // namespace moselect
