#include "moselect/forecast_ops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "moselect/detail/text.hpp"

namespace moselect {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

long ForecastQuantileSet::rearrange_monotone() {
  long fixed = 0;
  for (auto& [key, row] : values) {
    bool monotone = true;
    for (int i = 1; i < kQuantileLevels; ++i) {
      if (row(i) < row(i - 1)) monotone = false;
    }
    if (!monotone) {
      std::sort(row.data(), row.data() + kQuantileLevels);
      ++fixed;
    }
  }
  rearranged_cells += fixed;
  return fixed;
}

double quantile_loss(double alpha, double q, double z) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail("quantile_loss: alpha outside (0, 1)");
  const double indicator = z < q ? 1.0 : 0.0;
  return (alpha - indicator) * (z - q);
}

double crps_approx(const QuantileRow& quantiles, double z) {
  double total = 0.0;
  for (int i = 0; i < kQuantileLevels; ++i) {
    total += quantile_loss(kQuantileGrid[i], quantiles(i), z);
  }
  return total / kQuantileLevels;
}

double ncrps(const ForecastQuantileSet& forecast, const ActualSet& actuals) {
  if (forecast.values.size() != actuals.values.size()) {
    fail("ncrps: forecast and actuals cover different (series, step) keys");
  }
  double crps_sum = 0.0;
  double abs_sum = 0.0;
  auto fc = forecast.values.begin();
  auto ac = actuals.values.begin();
  for (; fc != forecast.values.end(); ++fc, ++ac) {
    if (fc->first != ac->first) {
      fail("ncrps: key mismatch at series '" + fc->first.series_id + "' step " +
           std::to_string(fc->first.step));
    }
    crps_sum += crps_approx(fc->second, ac->second);
    abs_sum += std::abs(ac->second);
  }
  if (abs_sum <= 0.0) fail("ncrps: sum of |actual| is zero");
  return crps_sum / abs_sum;
}

ForecastQuantileSet average_quantile_ensemble(const std::vector<ForecastQuantileSet>& members) {
  if (members.empty()) fail("average_quantile_ensemble: no members");
  ForecastQuantileSet out;
  out.horizon = members.front().horizon;
  for (const auto& member : members) {
    if (member.values.size() != members.front().values.size() ||
        member.horizon != out.horizon) {
      fail("average_quantile_ensemble: members cover different keys or horizons");
    }
  }
  for (const auto& [key, row] : members.front().values) {
    QuantileRow sum = QuantileRow::Zero();
    for (const auto& member : members) {
      const auto it = member.values.find(key);
      if (it == member.values.end()) {
        fail("average_quantile_ensemble: key mismatch at series '" + key.series_id + "' step " +
             std::to_string(key.step));
      }
      sum += it->second;
    }
    out.values[key] = sum / static_cast<double>(members.size());
  }
  return out;
}

EnsembleSpec constrained_ensemble_select(const std::vector<EnsembleCandidate>& candidates,
                                         std::optional<double> budget_seconds, int max_members) {
  if (candidates.empty()) fail("constrained_ensemble_select: no candidates");
  if (max_members < 1) fail("constrained_ensemble_select: max_members must be positive");
  for (const auto& c : candidates) {
    if (c.latency_seconds < 0.0) fail("constrained_ensemble_select: negative latency");
    if (!std::isfinite(c.predicted_ncrps)) {
      fail("constrained_ensemble_select: non-finite predicted nCRPS");
    }
  }

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].predicted_ncrps < candidates[b].predicted_ncrps;
  });

  EnsembleSpec spec;
  spec.latency_budget_seconds = budget_seconds;
  // Tiny slack so a selection that meets the budget exactly is not
  // rejected over the last float ulp.
  const double slack =
      budget_seconds ? 1e-9 * std::max(1.0, std::abs(*budget_seconds)) : 0.0;
  for (std::size_t pos : order) {
    if (static_cast<int>(spec.members.size()) >= max_members) break;
    const EnsembleCandidate& c = candidates[pos];
    if (budget_seconds && spec.total_latency_seconds + c.latency_seconds > *budget_seconds + slack) {
      continue;
    }
    spec.members.push_back(c.config);
    spec.predicted_ncrps.push_back(c.predicted_ncrps);
    spec.total_latency_seconds += c.latency_seconds;
  }
  if (spec.members.empty()) fail("infeasible budget: no candidate fits");
  return spec;
}

ForecastQuantileSet load_forecasts(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open forecast file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty forecast file");
  const auto header = detail::split(detail::strip(line), ',');
  if (header.size() != 2 + kQuantileLevels || header[0] != "series_id" || header[1] != "step") {
    fail(path + ":1: expected header series_id,step,q10,...,q90");
  }
  ForecastQuantileSet out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::strip(line).empty()) continue;
    const auto fields = detail::split(detail::strip(line), ',');
    if (fields.size() != 2 + kQuantileLevels) {
      fail(path + ":" + std::to_string(line_no) + ": malformed row");
    }
    SeriesStep key{fields[0], std::stol(fields[1])};
    QuantileRow row;
    for (int i = 0; i < kQuantileLevels; ++i) {
      row(i) = std::stod(fields[static_cast<std::size_t>(2 + i)]);
      if (!std::isfinite(row(i))) {
        fail(path + ":" + std::to_string(line_no) + ": non-finite quantile");
      }
    }
    if (!out.values.emplace(key, row).second) {
      fail(path + ":" + std::to_string(line_no) + ": duplicate (series, step)");
    }
    out.horizon = std::max(out.horizon, key.step);
  }
  if (out.values.empty()) fail(path + ": empty forecast file");
  out.rearrange_monotone();
  return out;
}

void save_forecasts(const ForecastQuantileSet& forecast, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write forecast file '" + path + "'");
  out << "series_id,step";
  for (int i = 0; i < kQuantileLevels; ++i) out << ",q" << (10 * (i + 1));
  out << "\n";
  for (const auto& [key, row] : forecast.values) {
    out << key.series_id << "," << key.step;
    for (int i = 0; i < kQuantileLevels; ++i) out << "," << detail::format_double(row(i));
    out << "\n";
  }
}

ActualSet load_actuals(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open actuals file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty actuals file");
  const auto header = detail::split(detail::strip(line), ',');
  if (header.size() != 3 || header[0] != "series_id" || header[1] != "step" ||
      header[2] != "value") {
    fail(path + ":1: expected header series_id,step,value");
  }
  ActualSet out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::strip(line).empty()) continue;
    const auto fields = detail::split(detail::strip(line), ',');
    if (fields.size() != 3) fail(path + ":" + std::to_string(line_no) + ": malformed row");
    SeriesStep key{fields[0], std::stol(fields[1])};
    const double value = std::stod(fields[2]);
    if (!std::isfinite(value)) {
      fail(path + ":" + std::to_string(line_no) + ": non-finite value");
    }
    if (!out.values.emplace(key, value).second) {
      fail(path + ":" + std::to_string(line_no) + ": duplicate (series, step)");
    }
  }
  if (out.values.empty()) fail(path + ": empty actuals file");
  return out;
}

void save_actuals(const ActualSet& actuals, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write actuals file '" + path + "'");
  out << "series_id,step,value\n";
  for (const auto& [key, value] : actuals.values) {
    out << key.series_id << "," << key.step << "," << detail::format_double(value) << "\n";
  }
}

nlohmann::json ensemble_spec_json(const EnsembleSpec& spec) {
  nlohmann::json members = nlohmann::json::array();
  for (std::size_t i = 0; i < spec.members.size(); ++i) {
    nlohmann::json member;
    member["model_name"] = spec.members[i].model_name;
    member["slug"] = config_slug(spec.members[i]);
    member["hyperparameters"] = spec.members[i].hyperparameters;
    if (spec.members[i].training_fraction) {
      member["training_fraction"] = *spec.members[i].training_fraction;
    }
    member["predicted_ncrps"] = spec.predicted_ncrps[i];
    members.push_back(std::move(member));
  }
  nlohmann::json j;
  j["members"] = members;
  if (spec.latency_budget_seconds) {
    j["latency_budget_seconds"] = *spec.latency_budget_seconds;
  } else {
    j["latency_budget_seconds"] = nullptr;
  }
  j["total_latency_seconds"] = spec.total_latency_seconds;
  j["predicted_ncrps"] = spec.predicted_ncrps;
  return j;
}

}  // namespace moselect
