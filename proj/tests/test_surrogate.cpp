#include "moselect/surrogate.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "moselect/moo_core.hpp"
#include "moselect/random.hpp"
#include "moselect/selector.hpp"
#include "moselect/synthetic.hpp"

using namespace moselect;

namespace {

SurrogateParams zero_params(Index m) {
  SurrogateParams p;
  p.w1 = Matrix::Zero(32, kInputDim);
  p.b1 = Vector::Zero(32);
  p.w2 = Matrix::Zero(32, 32);
  p.b2 = Vector::Zero(32);
  p.w3 = Matrix::Zero(m, 32);
  p.b3 = Vector::Zero(m);
  return p;
}

std::vector<double*> param_entries(SurrogateParams& p) {
  std::vector<double*> out;
  for (Matrix* w : {&p.w1, &p.w2, &p.w3}) {
    for (Index i = 0; i < w->size(); ++i) out.push_back(w->data() + i);
  }
  for (Vector* b : {&p.b1, &p.b2, &p.b3}) {
    for (Index i = 0; i < b->size(); ++i) out.push_back(b->data() + i);
  }
  return out;
}

// Built directly, not via a corpus, so the loss path is exercised in
// isolation.
std::vector<TaskRankBatch> toy_batches(Index m, Rng& rng) {
  std::vector<TaskRankBatch> batches;
  for (int task = 0; task < 2; ++task) {
    TaskRankBatch batch;
    batch.task_id = "toy" + std::to_string(task);
    const Index n = 3 + static_cast<Index>(rng.below(3));
    batch.features.resize(n, kInputDim);
    batch.targets.resize(n, m);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < kInputDim; ++j) batch.features(i, j) = rng.uniform(-1.0, 1.0);
      for (Index k = 0; k < m; ++k) batch.targets(i, k) = rng.uniform(0.0, 1.0);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

void gradient_check(TrainMode mode, std::uint64_t seed) {
  Rng rng(seed);
  const Index m = 2;
  std::vector<TaskRankBatch> batches = toy_batches(m, rng);

  TrainConfig cfg;
  cfg.mode = mode;
  cfg.weight_decay = 0.01;

  SurrogateParams params = init_surrogate(m, mix_seed(seed, 9));
  const SurrogateParams grad = loss_gradient(params, batches, cfg);
  SurrogateParams grad_view = grad;  // non-const alias for entry pointers
  SurrogateParams probe = params;
  const std::vector<double*> entries = param_entries(probe);
  const std::vector<double*> grad_entries = param_entries(grad_view);
  REQUIRE(entries.size() == grad_entries.size());

  const double h = 1e-5;
  int checked = 0;
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t pick = static_cast<std::size_t>(rng.below(entries.size()));
    const double saved = *entries[pick];
    *entries[pick] = saved + h;
    const double up = batch_loss(probe, batches, cfg);
    *entries[pick] = saved - h;
    const double down = batch_loss(probe, batches, cfg);
    *entries[pick] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double analytic = *grad_entries[pick];
    const double rel = std::abs(analytic - fd) / std::max(std::abs(analytic) + std::abs(fd), 1e-6);
    CHECK(rel < 1e-4);
    ++checked;
  }
  CHECK(checked >= 20);
}

}  // namespace

TEST_CASE("init_surrogate is deterministic and shaped by the objective count") {
  const SurrogateParams a = init_surrogate(2, 7);
  const SurrogateParams b = init_surrogate(2, 7);
  CHECK(a.w1 == b.w1);
  CHECK(a.w2 == b.w2);
  CHECK(a.w3 == b.w3);
  CHECK(a.b1.isZero());
  CHECK(a.w3.rows() == 2);
  CHECK(a.w3.cols() == 32);

  const SurrogateParams c = init_surrogate(2, 8);
  CHECK(a.w1 != c.w1);

  // Fan-in/fan-out bound holds.
  const double limit1 = std::sqrt(6.0 / (32 + kInputDim));
  CHECK(a.w1.cwiseAbs().maxCoeff() <= limit1);
}

TEST_CASE("forward applies two leaky-relu hidden layers") {
  SurrogateParams p = zero_params(1);
  FeatureVector x = FeatureVector::Zero();
  CHECK(forward(p, x)(0) == 0.0);

  // Single active path: weight 1 everywhere along unit 0.
  p.w1(0, 0) = 1.0;
  p.w2(0, 0) = 1.0;
  p.w3(0, 0) = 1.0;
  x(0) = -1.0;
  // lrelu(-1) = -0.01, lrelu(-0.01) = -1e-4
  CHECK(forward(p, x)(0) == doctest::Approx(-1e-4).epsilon(1e-12));

  const Vector once = forward(p, x);
  const Vector twice = forward(p, x);
  CHECK(once == twice);
}

TEST_CASE("ascending_order is stable under ties") {
  Vector v(5);
  v << 0.3, 0.1, 0.3, 0.1, 0.2;
  CHECK(ascending_order(v) == std::vector<Index>{1, 3, 4, 0, 2});
}

TEST_CASE("listwise_loss worked values") {
  Vector one(1);
  one << 3.7;
  CHECK(listwise_loss(one, {0}, true) == 0.0);

  Vector both_zero(2);
  both_zero << 0.0, 0.0;
  CHECK(listwise_loss(both_zero, {0, 1}, true) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Vector saturated(2);
  saturated << -10.0, 10.0;  // true best first, well separated
  CHECK(listwise_loss(saturated, {0, 1}, true) < 1e-8);
  CHECK(listwise_loss(saturated, {0, 1}, true) >= 0.0);
}

TEST_CASE("listwise_loss is shift invariant and vanishes with separation") {
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(6));
    Vector scores(n);
    for (Index i = 0; i < n; ++i) scores(i) = rng.uniform(-2.0, 2.0);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);

    for (bool discounted : {true, false}) {
      const double base = listwise_loss(scores, order, discounted);
      const Vector shifted = scores.array() + 17.5;
      CHECK(listwise_loss(shifted, order, discounted) == doctest::Approx(base).epsilon(1e-9));
    }
  }

  double previous = 1e300;
  for (double separation : {1.0, 5.0, 20.0}) {
    Vector scores(4);
    scores << -1.5 * separation, -0.5 * separation, 0.5 * separation, 1.5 * separation;
    const double loss = listwise_loss(scores, {0, 1, 2, 3}, true);
    CHECK(loss < previous);
    previous = loss;
  }
  CHECK(previous < 1e-6);
}

TEST_CASE("gradients match central finite differences") {
  gradient_check(TrainMode::listwise_discounted, 101);
  gradient_check(TrainMode::listwise_plain, 102);
  gradient_check(TrainMode::regression, 103);
}

TEST_CASE("gradient reduces to the pure loss gradient without weight decay") {
  Rng rng(5);
  std::vector<TaskRankBatch> batches = toy_batches(1, rng);
  SurrogateParams params = init_surrogate(1, 55);

  TrainConfig with_decay;
  with_decay.weight_decay = 0.03;
  TrainConfig no_decay;
  no_decay.weight_decay = 0.0;

  const SurrogateParams g1 = loss_gradient(params, batches, with_decay);
  const SurrogateParams g0 = loss_gradient(params, batches, no_decay);
  CHECK((g1.w1 - g0.w1 - 0.06 * params.w1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g1.b1 - g0.b1).cwiseAbs().maxCoeff() == 0.0);

  // Symmetric all-zero start stays finite.
  SurrogateParams zeros = zero_params(1);
  const SurrogateParams gz = loss_gradient(zeros, batches, with_decay);
  CHECK(gz.w1.allFinite());
}

TEST_CASE("training on singleton tasks only applies weight decay") {
  std::vector<EvaluationRecord> records;
  for (int t = 0; t < 3; ++t) {
    EvaluationRecord rec;
    rec.task_id = "t" + std::to_string(t);
    rec.config.model_name = "only" + std::to_string(t);
    rec.seed = 0;
    rec.objectives.resize(1);
    rec.objectives << 0.5 + 0.1 * t;
    records.push_back(rec);
  }
  const EvaluationCorpus corpus = make_corpus(records, {"ncrps"});

  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.weight_decay = 0.0;
  const TrainResult unregularized = train_surrogate(corpus, cfg);
  const SurrogateParams fresh = init_surrogate(1, mix_seed(cfg.seed, 1));
  CHECK(unregularized.params.w1 == fresh.w1);
  CHECK(unregularized.params.w3 == fresh.w3);
  CHECK(unregularized.final_loss == 0.0);

  cfg.weight_decay = 0.01;
  const TrainResult regularized = train_surrogate(corpus, cfg);
  CHECK(regularized.params.w1.norm() < fresh.w1.norm());
  CHECK(regularized.params.b1.isZero());
}

TEST_CASE("training is bitwise deterministic per seed") {
  SyntheticSpec spec;
  spec.num_tasks = 4;
  spec.num_methods = 4;
  const EvaluationCorpus corpus = make_synthetic_corpus(spec);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 99;
  const TrainResult a = train_surrogate(corpus, cfg);
  const TrainResult b = train_surrogate(corpus, cfg);
  CHECK(a.params.w1 == b.params.w1);
  CHECK(a.params.w2 == b.params.w2);
  CHECK(a.params.w3 == b.params.w3);
  CHECK(a.params.b3 == b.params.b3);
  CHECK(a.final_loss == b.final_loss);
}

TEST_CASE("training ranks a strictly monotone objective almost perfectly") {
  // One feature drives the objective on every task.
  std::vector<EvaluationRecord> records;
  for (int t = 0; t < 5; ++t) {
    const double scale = 1.0 + 0.2 * t;
    for (int c = 0; c < 20; ++c) {
      EvaluationRecord rec;
      rec.task_id = "t" + std::to_string(t);
      rec.config.model_name = "family";
      rec.config.hyperparameters["size"] = c;
      rec.seed = 0;
      rec.objectives.resize(1);
      rec.objectives << 0.05 * scale * (c + 1);
      records.push_back(rec);
    }
  }
  const EvaluationCorpus corpus = make_corpus(records, {"ncrps"});

  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.seed = 1;
  const TrainResult trained = train_surrogate(corpus, cfg);
  const Standardizer standardizer = fit_standardizer(corpus);

  double mrr_sum = 0.0;
  for (const auto& task_id : corpus.task_ids()) {
    const TaskEvaluations evals = corpus.task_mean_evaluations(task_id);
    std::vector<ModelConfig> configs;
    for (Index cid : evals.config_ids) configs.push_back(corpus.configs()[static_cast<std::size_t>(cid)]);
    const PointMatrix predicted = predict_all(trained.params, configs, corpus.schema, standardizer);
    const RankingReport report =
        ranking_metrics(ascending_order(predicted.col(0)), evals.objectives.col(0));
    mrr_sum += report.mrr;
  }
  CHECK(mrr_sum / corpus.num_tasks() > 0.9);
}

TEST_CASE("predict_all preserves order and row count") {
  const std::vector<ModelConfig> space = benchmark_model_space();
  const HyperparameterSchema schema = benchmark_schema();
  Standardizer identity;
  identity.mean = Vector::Zero(15);
  identity.stddev = Vector::Ones(15);
  identity.constant.assign(15, false);

  const SurrogateParams params = init_surrogate(2, 13);
  const PointMatrix scores = predict_all(params, space, schema, identity);
  CHECK(scores.rows() == 247);
  CHECK(scores.cols() == 2);

  const std::vector<ModelConfig> twice = {space[0], space[0]};
  const PointMatrix dup = predict_all(params, twice, schema, identity);
  CHECK(dup.row(0) == dup.row(1));
}

TEST_CASE("nonparametric baselines average values or ranks and reject unseen configs") {
  std::vector<EvaluationRecord> records;
  const auto add = [&](const std::string& task, const std::string& model, double value) {
    EvaluationRecord rec;
    rec.task_id = task;
    rec.config.model_name = model;
    rec.seed = 0;
    rec.objectives.resize(1);
    rec.objectives << value;
    records.push_back(rec);
  };
  // Config "a": values 0.2 / 0.4, ranks 1 / 3.
  add("t1", "a", 0.2);
  add("t1", "b", 0.5);
  add("t1", "c", 0.9);
  add("t2", "b", 0.1);
  add("t2", "c", 0.3);
  add("t2", "a", 0.4);
  const EvaluationCorpus corpus = make_corpus(records, {"ncrps"});

  const auto value_baseline = NonparametricBaseline::fit(corpus, 0, BaselineMode::mean_value);
  CHECK(value_baseline.predict({"a", {}, std::nullopt}) == doctest::Approx(0.3));

  const auto rank_baseline = NonparametricBaseline::fit(corpus, 0, BaselineMode::mean_rank);
  CHECK(rank_baseline.predict({"a", {}, std::nullopt}) == doctest::Approx(2.0));

  CHECK_THROWS_WITH_AS(value_baseline.predict({"zz", {}, std::nullopt}),
                       doctest::Contains("not observed"), std::runtime_error);
}

TEST_CASE("surrogate parameters round-trip through JSON") {
  const SurrogateParams params = init_surrogate(2, 21);
  const auto path = std::filesystem::temp_directory_path() / "moselect_params_test.json";
  save_params(params, "fingerprint123", path.string());
  const LoadedParams loaded = load_params(path.string());
  std::filesystem::remove(path);

  CHECK(loaded.schema_fingerprint == "fingerprint123");
  CHECK(loaded.params.w1 == params.w1);
  CHECK(loaded.params.w2 == params.w2);
  CHECK(loaded.params.w3 == params.w3);
  CHECK(loaded.params.b3 == params.b3);
  CHECK(loaded.params.leaky_slope == params.leaky_slope);
}
