// Acceptance suite: each criterion prints one PASS/FAIL line together
// with its measured value and runtime. The process exits nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "moselect/analysis.hpp"
#include "moselect/eval_store.hpp"
#include "moselect/forecast_ops.hpp"
#include "moselect/moo_core.hpp"
#include "moselect/random.hpp"
#include "moselect/selector.hpp"
#include "moselect/surrogate.hpp"
#include "moselect/synthetic.hpp"
#include "oracles.hpp"

using namespace moselect;

namespace {

struct Harness {
  int failures = 0;
  int passed = 0;
  int skipped = 0;

  void run(const std::string& name, double time_limit_seconds,
           const std::function<bool(std::string&)>& criterion) {
    std::string detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = criterion(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
      ok = false;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && elapsed > time_limit_seconds) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + std::string("exceeded time limit");
    }
    std::printf("[%s] %-28s (%6.2fs)%s%s\n", ok ? "PASS" : "FAIL", name.c_str(), elapsed,
                detail.empty() ? "" : " ", detail.c_str());
    std::fflush(stdout);
    if (ok) {
      ++passed;
    } else {
      ++failures;
    }
  }

  void skip(const std::string& name, const std::string& why) {
    std::printf("[SKIP] %-28s %s\n", name.c_str(), why.c_str());
    ++skipped;
  }
};


std::string scientific(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

bool oracle_zero_error(std::string& detail) {
  Rng rng(2024);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(49));
    PointMatrix truth(n, 2);
    for (Index i = 0; i < n; ++i) {
      truth(i, 0) = rng.uniform();
      truth(i, 1) = rng.uniform();
    }
    // Oracle surrogate: predictions equal the true objectives.
    const std::vector<Index> order = rank_candidates(truth, static_cast<std::uint64_t>(rep));
    const std::vector<Index> front = pareto_front(truth);
    const Index keep =
        std::min<Index>(n, static_cast<Index>(front.size()) + static_cast<Index>(rng.below(4)));

    const PointMatrix normalized = quantile_normalize_columns(truth);
    PointMatrix selected(keep, 2);
    for (Index i = 0; i < keep; ++i) {
      selected.row(i) = normalized.row(order[static_cast<std::size_t>(i)]);
    }
    const double err = hypervolume_error(selected, normalized, Vector::Ones(2));
    worst = std::max(worst, std::abs(err));
  }
  detail = "max |hv error| = " + scientific(worst);
  return worst <= 1e-12;
}

bool hypervolume_oracle(std::string& detail) {
  const Vector ref2 = Vector::Ones(2);
  Matrix hand(1, 2);
  hand << 0.5, 0.5;
  if (hypervolume(hand, ref2) != 0.25) {
    detail = "single-rectangle value differs from 0.25";
    return false;
  }
  Matrix pair(2, 2);
  pair << 0.2, 0.8, 0.8, 0.2;
  if (std::abs(hypervolume(pair, ref2) - 0.28) > 1e-15) {
    detail = "two-rectangle value differs from 0.28";
    return false;
  }

  Rng rng(77);
  int checked = 0;
  double worst_sigma = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Index m = 2 + static_cast<Index>(rng.below(2));
    const Index n = 2 + static_cast<Index>(rng.below(15));
    Matrix pts(n, m);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < m; ++j) pts(i, j) = rng.uniform();
    }
    const double exact = hypervolume(pts, Vector::Ones(m));
    const auto mc = oracles::mc_hypervolume(pts, 1000000, 4000 + static_cast<std::uint64_t>(rep));
    const double sigmas = std::abs(exact - mc.value) / std::max(mc.standard_error, 1e-12);
    worst_sigma = std::max(worst_sigma, sigmas);
    if (sigmas > 3.0) {
      detail = "set " + std::to_string(rep) + " off by " + std::to_string(sigmas) + " SE";
      return false;
    }
    ++checked;
  }
  detail = std::to_string(checked) + " sets, worst deviation " + std::to_string(worst_sigma) + " SE";
  return true;
}

bool ndsa_correctness(std::string& detail) {
  Rng rng(31337);
  for (int rep = 0; rep < 100; ++rep) {
    const Index n = 1 + static_cast<Index>(rng.below(100));
    const Index m = 2 + static_cast<Index>(rng.below(3));
    Matrix pts(n, m);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < m; ++j) pts(i, j) = rng.uniform();
    }
    const auto expected = oracles::brute_force_layers(pts);
    const LayeredOrder got = non_dominated_sort(pts, static_cast<std::uint64_t>(rep));
    if (got.layer_ends.size() != expected.size()) {
      detail = "layer count mismatch at set " + std::to_string(rep);
      return false;
    }
    Index start = 0;
    for (std::size_t layer = 0; layer < expected.size(); ++layer) {
      std::vector<Index> slice(got.order.begin() + start,
                               got.order.begin() + got.layer_ends[layer]);
      std::sort(slice.begin(), slice.end());
      std::vector<Index> want = expected[layer];
      std::sort(want.begin(), want.end());
      if (slice != want) {
        detail = "layer " + std::to_string(layer) + " mismatch at set " + std::to_string(rep);
        return false;
      }
      start = got.layer_ends[layer];
    }
  }
  detail = "100 sets, partitions identical";
  return true;
}

bool gradient_matches_fd(TrainMode mode, std::uint64_t seed, double& worst_rel) {
  Rng rng(seed);
  std::vector<TaskRankBatch> batches;
  for (int task = 0; task < 2; ++task) {
    TaskRankBatch batch;
    batch.task_id = "t" + std::to_string(task);
    const Index n = 3;
    batch.features.resize(n, kInputDim);
    batch.targets.resize(n, 2);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < kInputDim; ++j) batch.features(i, j) = rng.uniform(-1.0, 1.0);
      for (Index k = 0; k < 2; ++k) batch.targets(i, k) = rng.uniform(0.0, 1.0);
    }
    batches.push_back(std::move(batch));
  }
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.weight_decay = 0.01;

  SurrogateParams params = init_surrogate(2, mix_seed(seed, 13));
  SurrogateParams grad = loss_gradient(params, batches, cfg);

  const auto entries = [](SurrogateParams& p) {
    std::vector<double*> out;
    for (Matrix* w : {&p.w1, &p.w2, &p.w3}) {
      for (Index i = 0; i < w->size(); ++i) out.push_back(w->data() + i);
    }
    for (Vector* b : {&p.b1, &p.b2, &p.b3}) {
      for (Index i = 0; i < b->size(); ++i) out.push_back(b->data() + i);
    }
    return out;
  };
  const std::vector<double*> param_ptr = entries(params);
  const std::vector<double*> grad_ptr = entries(grad);

  const double h = 1e-5;
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t pick = static_cast<std::size_t>(rng.below(param_ptr.size()));
    const double saved = *param_ptr[pick];
    *param_ptr[pick] = saved + h;
    const double up = batch_loss(params, batches, cfg);
    *param_ptr[pick] = saved - h;
    const double down = batch_loss(params, batches, cfg);
    *param_ptr[pick] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double rel =
        std::abs(*grad_ptr[pick] - fd) / std::max(std::abs(*grad_ptr[pick]) + std::abs(fd), 1e-6);
    worst_rel = std::max(worst_rel, rel);
    if (rel >= 1e-4) return false;
  }
  return true;
}

bool gradient_check(std::string& detail) {
  double worst = 0.0;
  const bool ok = gradient_matches_fd(TrainMode::listwise_discounted, 501, worst) &&
                  gradient_matches_fd(TrainMode::regression, 502, worst);
  detail = "worst relative error " + scientific(worst);
  return ok;
}

bool loss_values(std::string& detail) {
  Vector one(1);
  one << -2.3;
  if (listwise_loss(one, {0}, true) != 0.0) {
    detail = "N=1 loss is not exactly zero";
    return false;
  }
  Vector zeros(2);
  zeros << 0.0, 0.0;
  const double equal_loss = listwise_loss(zeros, {0, 1}, true);
  if (std::abs(equal_loss - std::log(2.0)) > 1e-9) {
    detail = "equal-score loss " + std::to_string(equal_loss) + " != ln 2";
    return false;
  }
  Vector saturated(2);
  saturated << -10.0, 10.0;
  const double sat_loss = listwise_loss(saturated, {0, 1}, true);
  if (!(sat_loss >= 0.0 && sat_loss < 1e-8)) {
    detail = "saturated loss " + std::to_string(sat_loss) + " not < 1e-8";
    return false;
  }
  detail = "all three identities hold";
  return true;
}

bool random_baseline(std::string& detail) {
  const std::vector<ModelConfig> space = benchmark_model_space();
  const Index n = static_cast<Index>(space.size());  // 247
  std::map<std::string, Index> index_of;
  for (Index i = 0; i < n; ++i) index_of[canonical_config_string(space[static_cast<std::size_t>(i)])] = i;

  // Fixed arbitrary truth over the space.
  Rng truth_rng(600);
  Vector truth(n);
  for (Index i = 0; i < n; ++i) truth(i) = truth_rng.uniform();

  double sum_p10 = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::vector<ModelConfig> picked =
        random_select(space, n, 7000 + static_cast<std::uint64_t>(trial));
    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(n));
    for (const auto& config : picked) order.push_back(index_of.at(canonical_config_string(config)));
    sum_p10 += ranking_metrics(order, truth).precision_at.at(10);
  }
  const double mean_p10 = sum_p10 / 10000.0;
  const double expected = 10.0 / 247.0;
  detail = "mean P@10 = " + std::to_string(mean_p10) + ", expected " + std::to_string(expected);
  return std::abs(mean_p10 - expected) <= 0.005;
}

bool synthetic_loocv_separation(std::string& detail) {
  const EvaluationCorpus corpus = make_synthetic_corpus({});
  const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  TrainConfig cfg;

  const LoocvResult pareto = loocv(corpus, SelectorMethod::pareto, 10, seeds, cfg);
  const LoocvResult random = loocv(corpus, SelectorMethod::random, 10, seeds, cfg);
  const double pareto_at_10 = pareto.mean_curve(9);
  const double random_at_10 = random.mean_curve(9);

  const RankingLoocvResult surrogate =
      ranking_loocv(corpus, 0, RankingPredictor::surrogate, cfg, seeds);
  const RankingLoocvResult baseline =
      ranking_loocv(corpus, 0, RankingPredictor::nonparametric_value, cfg, seeds);

  detail = "hv@10 pareto " + std::to_string(pareto_at_10) + " vs random " +
           std::to_string(random_at_10) + "; MRR surrogate " + std::to_string(surrogate.mean.mrr) +
           " vs mean-value " + std::to_string(baseline.mean.mrr);
  return pareto_at_10 < random_at_10 && surrogate.mean.mrr > baseline.mean.mrr;
}

bool metric_identities(std::string& detail) {
  if (crps_approx(QuantileRow::Zero(), 1.0) != 0.5) {
    detail = "crps(0, 1) != 0.5";
    return false;
  }

  Rng rng(12);
  ForecastQuantileSet fc;
  ActualSet act;
  for (long t = 1; t <= 8; ++t) {
    QuantileRow q;
    for (int i = 0; i < kQuantileLevels; ++i) q(i) = rng.uniform(0.0, 5.0);
    std::sort(q.data(), q.data() + kQuantileLevels);
    fc.values[{"s", t}] = q;
    act.values[{"s", t}] = rng.uniform(0.5, 5.0);
  }
  fc.horizon = 8;
  const double base = ncrps(fc, act);
  for (auto& [key, row] : fc.values) row *= 10.0;
  for (auto& [key, z] : act.values) z *= 10.0;
  if (std::abs(ncrps(fc, act) - base) > 1e-12) {
    detail = "ncrps not scale invariant";
    return false;
  }

  const std::vector<EnsembleCandidate> fixture = {
      {{"a", {}, std::nullopt}, 0.10, 0.006},
      {{"b", {}, std::nullopt}, 0.12, 0.003},
      {{"c", {}, std::nullopt}, 0.15, 0.002},
  };
  const EnsembleSpec spec = constrained_ensemble_select(fixture, 0.005);
  if (spec.members.size() != 2 || spec.members[0].model_name != "b" ||
      spec.members[1].model_name != "c") {
    detail = "budget fixture did not select {B, C}";
    return false;
  }
  detail = "crps, scale invariance, and the budget fixture hold";
  return true;
}

bool ks_oracle(std::string& detail) {
  Rng rng(99);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(1 + rng.below(100));
    std::vector<double> b(1 + rng.below(100));
    for (double& v : a) v = std::round(rng.uniform(-2.0, 2.0) * 8.0) / 8.0;
    for (double& v : b) v = std::round(rng.uniform(-2.0, 2.0) * 8.0) / 8.0;
    const KsResult result = ks_two_sample(a, b);
    const double expected = oracles::brute_force_ks_d(a, b);
    if (std::abs(result.d - expected) > 1e-12) {
      detail = "D mismatch at case " + std::to_string(rep);
      return false;
    }
  }

  const KsResult same = ks_two_sample({0.4, 0.5, 0.6}, {0.4, 0.5, 0.6});
  if (same.p_value < 0.999) {
    detail = "identical samples give p = " + std::to_string(same.p_value);
    return false;
  }

  double previous = 2.0;
  for (double t = 0.0; t <= 5.0; t += 0.005) {
    const double p = kolmogorov_p_value(t);
    if (p > previous + 1e-12) {
      detail = "p not monotone at t = " + std::to_string(t);
      return false;
    }
    previous = p;
  }
  detail = "100 D cases, identity case, monotone p";
  return true;
}

bool benchmark_rank_check(const char* path, std::string& detail) {
  const EvaluationCorpus corpus = load_evaluations(path, {"ncrps"});
  const auto classical = classical_method_names();
  const RankTable table = rank_table(corpus, 0, nullptr);

  double best_rank = 1e300;
  std::string best_method;
  double arima_rank = -1.0;
  for (std::size_t u = 0; u < table.labels.size(); ++u) {
    for (const auto& name : classical) {
      if (table.labels[u] == name && table.mean(static_cast<Index>(u)) < best_rank) {
        best_rank = table.mean(static_cast<Index>(u));
        best_method = name;
      }
    }
    if (table.labels[u] == "arima") arima_rank = table.mean(static_cast<Index>(u));
  }
  detail = "best classical '" + best_method + "' mean rank " + std::to_string(best_rank);
  return best_method == "arima" && std::abs(arima_rank - 13.86) <= 0.5;
}

}  // namespace

int main() {
  Harness harness;
  harness.run("oracle zero-error suite", 10.0, oracle_zero_error);
  harness.run("hypervolume oracle", 60.0, hypervolume_oracle);
  harness.run("ndsa correctness", 60.0, ndsa_correctness);
  harness.run("gradient check", 60.0, gradient_check);
  harness.run("loss values", 10.0, loss_values);
  harness.run("random-baseline calibration", 30.0, random_baseline);
  harness.run("synthetic loocv separation", 300.0, synthetic_loocv_separation);
  harness.run("metric identities", 10.0, metric_identities);
  harness.run("ks oracle", 30.0, ks_oracle);

  if (const char* path = std::getenv("MOSELECT_BENCHMARK_CORPUS")) {
    harness.run("benchmark rank check", 600.0,
                [&](std::string& d) { return benchmark_rank_check(path, d); });
  } else {
    harness.skip("benchmark rank check", "set MOSELECT_BENCHMARK_CORPUS to enable");
  }

  std::printf("%d passed, %d failed, %d skipped\n", harness.passed, harness.failures,
              harness.skipped);
  return harness.failures == 0 ? 0 : 1;
}
