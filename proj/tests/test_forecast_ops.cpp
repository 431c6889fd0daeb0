#include "moselect/forecast_ops.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "moselect/random.hpp"

using namespace moselect;

namespace {

QuantileRow constant_row(double v) { return QuantileRow::Constant(v); }

ForecastQuantileSet single_cell_forecast(const QuantileRow& row) {
  ForecastQuantileSet fc;
  fc.values[{"s1", 1}] = row;
  fc.horizon = 1;
  return fc;
}

ActualSet single_cell_actual(double z) {
  ActualSet act;
  act.values[{"s1", 1}] = z;
  return act;
}

}  // namespace

TEST_CASE("quantile_loss matches the pinball formula") {
  CHECK(quantile_loss(0.5, 2.0, 2.0) == 0.0);
  CHECK(quantile_loss(0.1, 0.0, 1.0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(quantile_loss(0.9, 1.0, 0.0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK_THROWS(quantile_loss(0.0, 1.0, 1.0));
  CHECK_THROWS(quantile_loss(1.0, 1.0, 1.0));

  Rng rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const double alpha = rng.uniform(0.01, 0.99);
    const double q = rng.uniform(-3.0, 3.0);
    const double z = rng.uniform(-3.0, 3.0);
    CHECK(quantile_loss(alpha, q, z) >= 0.0);
  }
}

TEST_CASE("crps_approx averages the pinball losses over the grid") {
  CHECK(crps_approx(constant_row(1.0), 1.0) == 0.0);
  CHECK(crps_approx(constant_row(0.0), 1.0) == 0.5);
  CHECK(crps_approx(constant_row(1.0), 0.0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("crps_approx reflection symmetry") {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    QuantileRow q;
    for (int i = 0; i < kQuantileLevels; ++i) q(i) = rng.uniform(-2.0, 2.0);
    std::sort(q.data(), q.data() + kQuantileLevels);
    const double z = rng.uniform(-2.0, 2.0);

    QuantileRow reflected;
    for (int i = 0; i < kQuantileLevels; ++i) reflected(i) = -q(kQuantileLevels - 1 - i);
    CHECK(crps_approx(q, z) == doctest::Approx(crps_approx(reflected, -z)).epsilon(1e-12));
  }
}

TEST_CASE("crps_approx is exact for quantile functions constant in alpha") {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const double q = rng.uniform(-5.0, 5.0);
    const double z = rng.uniform(-5.0, 5.0);
    CHECK(crps_approx(constant_row(q), z) ==
          doctest::Approx(0.5 * std::abs(z - q)).epsilon(1e-12));
  }
}

TEST_CASE("ncrps worked values and scale invariance") {
  CHECK(ncrps(single_cell_forecast(constant_row(1.0)), single_cell_actual(1.0)) == 0.0);
  CHECK(ncrps(single_cell_forecast(constant_row(0.0)), single_cell_actual(1.0)) == 0.5);

  Rng rng(5);
  ForecastQuantileSet fc;
  ActualSet act;
  for (int s = 0; s < 4; ++s) {
    for (long t = 1; t <= 6; ++t) {
      QuantileRow q;
      for (int i = 0; i < kQuantileLevels; ++i) q(i) = rng.uniform(0.0, 10.0);
      std::sort(q.data(), q.data() + kQuantileLevels);
      fc.values[{"s" + std::to_string(s), t}] = q;
      act.values[{"s" + std::to_string(s), t}] = rng.uniform(0.5, 10.0);
    }
  }
  fc.horizon = 6;
  const double base = ncrps(fc, act);

  ForecastQuantileSet fc10 = fc;
  ActualSet act10 = act;
  for (auto& [key, row] : fc10.values) row *= 10.0;
  for (auto& [key, z] : act10.values) z *= 10.0;
  CHECK(ncrps(fc10, act10) == doctest::Approx(base).epsilon(1e-12));

  // Zero denominator and key mismatches are rejected.
  CHECK_THROWS_WITH_AS(ncrps(single_cell_forecast(constant_row(0.0)), single_cell_actual(0.0)),
                       doctest::Contains("zero"), std::runtime_error);
  ActualSet other;
  other.values[{"s1", 2}] = 1.0;
  CHECK_THROWS_WITH_AS(ncrps(single_cell_forecast(constant_row(0.0)), other),
                       doctest::Contains("key mismatch"), std::runtime_error);
}

TEST_CASE("average_quantile_ensemble averages per cell") {
  const ForecastQuantileSet a = single_cell_forecast(constant_row(0.2));
  const ForecastQuantileSet b = single_cell_forecast(constant_row(0.4));
  const ForecastQuantileSet mean = average_quantile_ensemble({a, b});
  CHECK(mean.values.at({"s1", 1})(0) == doctest::Approx(0.3));

  const ForecastQuantileSet alone = average_quantile_ensemble({a});
  CHECK(alone.values.at({"s1", 1}) == a.values.at({"s1", 1}));

  const ForecastQuantileSet swapped = average_quantile_ensemble({b, a});
  CHECK(swapped.values.at({"s1", 1}) == mean.values.at({"s1", 1}));

  ForecastQuantileSet mismatched;
  mismatched.values[{"s2", 1}] = constant_row(0.5);
  mismatched.horizon = 1;
  CHECK_THROWS(average_quantile_ensemble({a, mismatched}));
}

TEST_CASE("ensemble average stays within the member envelope") {
  Rng rng(6);
  std::vector<ForecastQuantileSet> members;
  for (int m = 0; m < 4; ++m) {
    ForecastQuantileSet fc;
    for (long t = 1; t <= 5; ++t) {
      QuantileRow q;
      for (int i = 0; i < kQuantileLevels; ++i) q(i) = rng.uniform(-1.0, 1.0);
      std::sort(q.data(), q.data() + kQuantileLevels);
      fc.values[{"s", t}] = q;
    }
    fc.horizon = 5;
    members.push_back(std::move(fc));
  }
  const ForecastQuantileSet mean = average_quantile_ensemble(members);
  for (const auto& [key, row] : mean.values) {
    for (int i = 0; i < kQuantileLevels; ++i) {
      double lo = 1e300;
      double hi = -1e300;
      for (const auto& member : members) {
        lo = std::min(lo, member.values.at(key)(i));
        hi = std::max(hi, member.values.at(key)(i));
      }
      CHECK(row(i) >= lo - 1e-15);
      CHECK(row(i) <= hi + 1e-15);
    }
    // Mean of monotone rows is monotone.
    for (int i = 1; i < kQuantileLevels; ++i) CHECK(row(i) >= row(i - 1));
  }
}

TEST_CASE("constrained_ensemble_select walks the worked fixture") {
  const std::vector<EnsembleCandidate> candidates = {
      {{"a", {}, std::nullopt}, 0.10, 0.006},
      {{"b", {}, std::nullopt}, 0.12, 0.003},
      {{"c", {}, std::nullopt}, 0.15, 0.002},
  };
  const EnsembleSpec spec = constrained_ensemble_select(candidates, 0.005);
  REQUIRE(spec.members.size() == 2);
  CHECK(spec.members[0].model_name == "b");
  CHECK(spec.members[1].model_name == "c");
  CHECK(spec.total_latency_seconds == doctest::Approx(0.005));

  CHECK_THROWS_WITH_AS(constrained_ensemble_select(candidates, 0.0001),
                       doctest::Contains("infeasible budget"), std::runtime_error);

  std::vector<EnsembleCandidate> negative = candidates;
  negative[0].latency_seconds = -1.0;
  CHECK_THROWS(constrained_ensemble_select(negative, 0.005));
}

TEST_CASE("unconstrained selection takes the ten best predictions") {
  std::vector<EnsembleCandidate> candidates;
  for (int i = 0; i < 12; ++i) {
    candidates.push_back({{"m" + std::to_string(i), {}, std::nullopt},
                          0.30 - 0.01 * i,  // later candidates predict better
                          1.0});
  }
  const EnsembleSpec spec = constrained_ensemble_select(candidates, std::nullopt);
  REQUIRE(spec.members.size() == 10);
  CHECK(spec.members.front().model_name == "m11");
  for (std::size_t i = 1; i < spec.predicted_ncrps.size(); ++i) {
    CHECK(spec.predicted_ncrps[i] >= spec.predicted_ncrps[i - 1]);
  }
}

TEST_CASE("budgets are never violated and relaxing them never hurts") {
  Rng rng(7);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<EnsembleCandidate> candidates;
    const int n = 3 + static_cast<int>(rng.below(15));
    for (int i = 0; i < n; ++i) {
      candidates.push_back({{"m" + std::to_string(i), {}, std::nullopt}, rng.uniform(0.05, 0.6),
                            rng.uniform(0.001, 0.02)});
    }
    const double tight = rng.uniform(0.004, 0.03);
    const double loose = tight * rng.uniform(1.5, 4.0);
    EnsembleSpec a;
    try {
      a = constrained_ensemble_select(candidates, tight);
    } catch (const std::runtime_error&) {
      continue;  // infeasible tight budget
    }
    CHECK(a.total_latency_seconds <= tight * (1.0 + 1e-9));
    const EnsembleSpec b = constrained_ensemble_select(candidates, loose);
    CHECK(b.total_latency_seconds <= loose * (1.0 + 1e-9));
    const double best_a = *std::min_element(a.predicted_ncrps.begin(), a.predicted_ncrps.end());
    const double best_b = *std::min_element(b.predicted_ncrps.begin(), b.predicted_ncrps.end());
    CHECK(best_b <= best_a + 1e-15);
  }
}

TEST_CASE("forecast files round-trip and crossing quantiles are rearranged") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "moselect_forecast_test";
  fs::create_directories(dir);

  const std::string crossing = (dir / "crossing.csv").string();
  {
    std::ofstream out(crossing);
    out << "series_id,step,q10,q20,q30,q40,q50,q60,q70,q80,q90\n";
    out << "s1,1,1,2,3,4,5,6,7,8,9\n";
    out << "s1,2,2,1,3,4,5,6,7,8,9\n";  // q10 > q20
  }
  const ForecastQuantileSet fc = load_forecasts(crossing);
  CHECK(fc.rearranged_cells == 1);
  CHECK(fc.values.at({"s1", 2})(0) == 1.0);
  CHECK(fc.values.at({"s1", 2})(1) == 2.0);
  CHECK(fc.horizon == 2);

  const std::string copy = (dir / "copy.csv").string();
  save_forecasts(fc, copy);
  const ForecastQuantileSet again = load_forecasts(copy);
  CHECK(again.values.size() == fc.values.size());
  for (const auto& [key, row] : fc.values) CHECK(again.values.at(key) == row);

  ActualSet act;
  act.values[{"s1", 1}] = 5.0;
  act.values[{"s1", 2}] = 4.0;
  const std::string actuals_path = (dir / "actuals.csv").string();
  save_actuals(act, actuals_path);
  const ActualSet act_again = load_actuals(actuals_path);
  CHECK(act_again.values == act.values);

  fs::remove_all(dir);
}
