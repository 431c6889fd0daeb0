#pragma once

// Quantile-forecast metrics (pinball loss, CRPS on the 9-level grid,
// normalized CRPS) and forecast ensembling: uniform quantile averaging
// plus latency-budgeted greedy member selection.
//
// Forecast file: CSV `series_id,step,q10,q20,...,q90`.
// Actuals file:  CSV `series_id,step,value`.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moselect/eval_store.hpp"
#include "moselect/types.hpp"

namespace moselect {

inline constexpr int kQuantileLevels = 9;
inline constexpr double kQuantileGrid[kQuantileLevels] = {0.1, 0.2, 0.3, 0.4, 0.5,
                                                          0.6, 0.7, 0.8, 0.9};

using QuantileRow = Eigen::Matrix<double, kQuantileLevels, 1>;

struct SeriesStep {
  std::string series_id;
  long step = 0;

  friend auto operator<=>(const SeriesStep&, const SeriesStep&) = default;
};

struct ForecastQuantileSet {
  std::map<SeriesStep, QuantileRow> values;
  long horizon = 0;          // largest step seen
  long rearranged_cells = 0;  // crossing-quantile cells fixed at ingestion

  // Sorts any non-monotone quantile rows ascending; returns how many
  // rows needed fixing and adds them to rearranged_cells.
  long rearrange_monotone();
};

struct ActualSet {
  std::map<SeriesStep, double> values;
};

// Pinball loss (alpha - 1[z < q]) (z - q); zero iff z = q.
double quantile_loss(double alpha, double q, double z);

// Mean pinball loss over the 9-level grid.
double crps_approx(const QuantileRow& quantiles, double z);

// Sum of per-(series, step) CRPS divided by the sum of |actual|.
double ncrps(const ForecastQuantileSet& forecast, const ActualSet& actuals);

// Arithmetic mean per (series, step, level); all members must share the
// same key set and horizon.
ForecastQuantileSet average_quantile_ensemble(const std::vector<ForecastQuantileSet>& members);

struct EnsembleCandidate {
  ModelConfig config;
  double predicted_ncrps = 0.0;
  double latency_seconds = 0.0;
};

struct EnsembleSpec {
  std::vector<ModelConfig> members;
  std::optional<double> latency_budget_seconds;
  std::vector<double> predicted_ncrps;  // per member, selection order
  double total_latency_seconds = 0.0;
};

// Greedy by ascending predicted nCRPS; a candidate whose latency would
// overflow the budget is skipped and scanning continues. Without a
// budget the top max_members by predicted nCRPS are taken. Throws when
// no candidate fits the budget.
EnsembleSpec constrained_ensemble_select(const std::vector<EnsembleCandidate>& candidates,
                                         std::optional<double> budget_seconds,
                                         int max_members = 10);

ForecastQuantileSet load_forecasts(const std::string& path);
void save_forecasts(const ForecastQuantileSet& forecast, const std::string& path);
ActualSet load_actuals(const std::string& path);
void save_actuals(const ActualSet& actuals, const std::string& path);

nlohmann::json ensemble_spec_json(const EnsembleSpec& spec);

}  // namespace moselect
