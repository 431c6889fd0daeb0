// moselect: learn multi-objective default model configurations from
// offline evaluation corpora, benchmark selection strategies with
// leave-one-out cross-validation, build latency-constrained forecast
// ensembles, and run the statistical comparisons behind the reports.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "moselect/analysis.hpp"
#include "moselect/detail/text.hpp"
#include "moselect/eval_store.hpp"
#include "moselect/forecast_ops.hpp"
#include "moselect/random.hpp"
#include "moselect/selector.hpp"
#include "moselect/surrogate.hpp"
#include "moselect/synthetic.hpp"
#include "moselect/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace moselect;

namespace {

// Flag combinations that cannot be validated by the parser itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_out_dir() {
  if (const char* env = std::getenv("MOSELECT_OUT_DIR")) return env;
  return ".";
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[16384];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = detail::fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return detail::hex64(h);
}

std::vector<std::string> parse_name_list(const std::string& csv) {
  std::vector<std::string> out;
  for (const auto& part : detail::split(csv, ',')) {
    const std::string name = detail::strip(part);
    if (!name.empty()) out.push_back(name);
  }
  return out;
}

json make_manifest(const std::string& command, const std::string& corpus_path,
                   const json& options) {
  json manifest;
  manifest["command"] = command;
  manifest["version"] = kVersion;
  manifest["generated_at"] = utc_timestamp();
  if (!corpus_path.empty()) {
    manifest["corpus"] = corpus_path;
    manifest["corpus_fingerprint"] = file_fingerprint(corpus_path);
  }
  manifest["options"] = options;
  return manifest;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json config_json(const ModelConfig& config) {
  json j;
  j["model_name"] = config.model_name;
  j["slug"] = config_slug(config);
  j["hyperparameters"] = config.hyperparameters;
  if (config.training_fraction) j["training_fraction"] = *config.training_fraction;
  return j;
}

struct TrainFlags {
  double learning_rate = 1e-2;
  int epochs = 200;
  double weight_decay = 0.01;
  std::string mode = "listwise-discounted";

  void attach(CLI::App* cmd) {
    cmd->add_option("--learning-rate", learning_rate, "SGD learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--epochs", epochs, "training epochs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--weight-decay", weight_decay, "L2 penalty on weights")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--mode", mode, "surrogate loss")
        ->check(CLI::IsMember({"listwise-discounted", "listwise-plain", "regression"}))
        ->capture_default_str();
  }

  TrainConfig to_config(std::uint64_t seed) const {
    TrainConfig cfg;
    cfg.learning_rate = learning_rate;
    cfg.epochs = epochs;
    cfg.weight_decay = weight_decay;
    cfg.mode = parse_train_mode(mode);
    cfg.seed = seed;
    return cfg;
  }

  json to_json() const {
    return {{"learning_rate", learning_rate},
            {"epochs", epochs},
            {"weight_decay", weight_decay},
            {"mode", mode}};
  }
};

// ---------------------------------------------------------------- synth

struct SynthOpts {
  std::string out;
  int tasks = 12;
  int methods = 10;
  int eval_seeds = 2;
  int outlier_tasks = 2;
  std::uint64_t seed = 0;
};

int run_synth(const SynthOpts& opts) {
  SyntheticSpec spec;
  spec.num_tasks = opts.tasks;
  spec.num_methods = opts.methods;
  spec.num_seeds = opts.eval_seeds;
  spec.num_outlier_tasks = opts.outlier_tasks;
  spec.seed = opts.seed;
  const EvaluationCorpus corpus = make_synthetic_corpus(spec);
  save_evaluations(corpus, opts.out);
  std::cout << "wrote " << corpus.records.size() << " records (" << corpus.num_tasks()
            << " tasks, " << corpus.configs().size() << " configs) to " << opts.out << "\n";
  return 0;
}

// --------------------------------------------------------------- select

struct SelectOpts {
  std::string corpus_path;
  std::string objectives = "ncrps,latency";
  int num_defaults = 10;
  std::uint64_t seed = 0;
  std::string exclude_task;
  std::string out = default_out_dir();
  TrainFlags train;
};

int run_select(const SelectOpts& opts) {
  const std::vector<std::string> objective_names = parse_name_list(opts.objectives);
  if (objective_names.empty()) throw UsageError("--objectives must name at least one metric");

  const EvaluationCorpus corpus = load_evaluations(opts.corpus_path, objective_names);
  EvaluationCorpus train = corpus;
  if (!opts.exclude_task.empty()) {
    if (!corpus.has_task(opts.exclude_task)) {
      throw std::runtime_error("unknown task '" + opts.exclude_task + "'");
    }
    train = corpus.without_task(opts.exclude_task);
  }
  const std::vector<ModelConfig>& candidates = train.configs();
  const TrainConfig cfg = opts.train.to_config(opts.seed);

  const SelectionResult result =
      corpus.num_objectives() == 1
          ? single_objective_select(train, candidates, opts.num_defaults, cfg)
          : pareto_select(train, candidates, opts.num_defaults, cfg);

  std::vector<double> hv_curve;
  if (!opts.exclude_task.empty()) {
    try {
      hv_curve = selection_hv_curve(corpus, opts.exclude_task, candidates, result.configs,
                                    static_cast<Index>(result.configs.size()));
    } catch (const std::runtime_error& e) {
      std::cerr << "warning: no error curve for held-out task: " << e.what() << "\n";
    }
  }

  fs::create_directories(opts.out);
  const fs::path csv_path = fs::path(opts.out) / "defaults.csv";
  {
    std::ostringstream csv;
    csv << "n,model_name,config";
    for (const auto& name : corpus.objective_names) csv << ",score:" << name;
    if (!hv_curve.empty()) csv << ",hv_error";
    csv << "\n";
    for (std::size_t i = 0; i < result.configs.size(); ++i) {
      csv << (i + 1) << "," << result.configs[i].model_name << ","
          << canonical_config_string(result.configs[i]);
      for (Index k = 0; k < result.scores.cols(); ++k) {
        csv << "," << detail::format_double(result.scores(static_cast<Index>(i), k));
      }
      if (!hv_curve.empty()) csv << "," << detail::format_double(hv_curve[i]);
      csv << "\n";
    }
    write_text(csv_path, csv.str());
  }

  json options = {{"objectives", corpus.objective_names},
                  {"num_defaults", opts.num_defaults},
                  {"seed", opts.seed},
                  {"exclude_task", opts.exclude_task},
                  {"train", opts.train.to_json()}};
  json summary;
  summary["manifest"] = make_manifest("select", opts.corpus_path, options);
  json defaults = json::array();
  for (std::size_t i = 0; i < result.configs.size(); ++i) {
    json row = config_json(result.configs[i]);
    std::vector<double> scores;
    for (Index k = 0; k < result.scores.cols(); ++k) {
      scores.push_back(result.scores(static_cast<Index>(i), k));
    }
    row["scores"] = scores;
    if (!hv_curve.empty()) row["hv_error"] = hv_curve[i];
    defaults.push_back(std::move(row));
  }
  summary["defaults"] = defaults;
  summary["files"] = {{"defaults_csv", csv_path.filename().string()}};
  write_json(fs::path(opts.out) / "select_summary.json", summary);

  std::cout << "wrote " << result.configs.size() << " defaults to " << csv_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- loocv

struct LoocvOpts {
  std::string corpus_path;
  std::string objectives = "ncrps,latency";
  std::string method = "pareto";
  int num_defaults = 10;
  int num_seeds = 5;
  std::uint64_t seed = 0;
  std::string out = default_out_dir();
  TrainFlags train;
};

int run_loocv(const LoocvOpts& opts) {
  const std::vector<std::string> objective_names = parse_name_list(opts.objectives);
  if (objective_names.empty()) throw UsageError("--objectives must name at least one metric");
  const EvaluationCorpus corpus = load_evaluations(opts.corpus_path, objective_names);

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < opts.num_seeds; ++i) seeds.push_back(opts.seed + static_cast<std::uint64_t>(i));

  const SelectorMethod method = parse_selector_method(opts.method);
  const TrainConfig cfg = opts.train.to_config(opts.seed);
  const LoocvResult result = loocv(corpus, method, opts.num_defaults, seeds, cfg);

  fs::create_directories(opts.out);
  const fs::path csv_path = fs::path(opts.out) / "loocv_curves.csv";
  {
    std::ostringstream csv;
    write_loocv_csv(result, csv);
    write_text(csv_path, csv.str());
  }

  json options = {{"objectives", corpus.objective_names}, {"method", opts.method},
                  {"num_defaults", opts.num_defaults},    {"seeds", seeds},
                  {"train", opts.train.to_json()}};
  json summary;
  summary["manifest"] = make_manifest("loocv", opts.corpus_path, options);
  summary["summary"] = loocv_summary_json(result);
  summary["files"] = {{"curves_csv", csv_path.filename().string()}};
  write_json(fs::path(opts.out) / "loocv_summary.json", summary);

  std::cout << "loocv " << opts.method << ": mean hv error at n=" << opts.num_defaults << " is "
            << result.mean_curve(result.mean_curve.size() - 1) << " over " << result.curves.size()
            << " curves\n";
  return 0;
}

// ------------------------------------------------------------- ensemble

struct EnsembleOpts {
  std::string corpus_path;
  std::string budget_ms = "none";
  int max_members = 10;
  std::string accuracy_objective = "ncrps";
  std::string latency_objective = "latency";
  std::string predictor = "surrogate";
  std::uint64_t seed = 0;
  std::string forecast_dir;
  std::string actuals_path;
  std::string out = default_out_dir();
  TrainFlags train;
};

int run_ensemble(const EnsembleOpts& opts) {
  std::optional<double> budget_seconds;
  if (opts.budget_ms != "none") {
    try {
      std::size_t used = 0;
      const double ms = std::stod(opts.budget_ms, &used);
      if (used != opts.budget_ms.size()) throw std::invalid_argument(opts.budget_ms);
      budget_seconds = ms / 1000.0;
    } catch (const std::invalid_argument&) {
      throw UsageError("--budget-ms expects a number or 'none'");
    }
  }
  if (!opts.forecast_dir.empty() && opts.actuals_path.empty()) {
    throw UsageError("--forecast-dir requires --actuals");
  }

  const EvaluationCorpus corpus =
      load_evaluations(opts.corpus_path, {opts.accuracy_objective, opts.latency_objective});
  const std::vector<ModelConfig>& candidates = corpus.configs();

  // Latency per candidate: corpus-measured mean across the tasks that
  // evaluated it.
  std::map<Index, std::pair<double, int>> latency_acc;
  for (const auto& task_id : corpus.task_ids()) {
    const TaskEvaluations evals = corpus.task_mean_evaluations(task_id);
    for (std::size_t row = 0; row < evals.config_ids.size(); ++row) {
      auto& slot = latency_acc[evals.config_ids[row]];
      slot.first += evals.objectives(static_cast<Index>(row), 1);
      slot.second += 1;
    }
  }

  // Predicted accuracy per candidate.
  Vector predicted(static_cast<Index>(candidates.size()));
  if (opts.predictor == "surrogate") {
    const EvaluationCorpus sliced = corpus.with_objectives({0});
    const TrainResult trained = train_surrogate(sliced, opts.train.to_config(opts.seed));
    const Standardizer standardizer = fit_standardizer(sliced);
    predicted = predict_all(trained.params, candidates, sliced.schema, standardizer).col(0);
  } else if (opts.predictor == "mean") {
    const NonparametricBaseline baseline =
        NonparametricBaseline::fit(corpus, 0, BaselineMode::mean_value);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      predicted(static_cast<Index>(i)) = baseline.predict(candidates[i]);
    }
  } else {
    throw UsageError("--predictor must be 'surrogate' or 'mean'");
  }

  std::vector<EnsembleCandidate> pool;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& acc = latency_acc.at(static_cast<Index>(i));
    pool.push_back({candidates[i], predicted(static_cast<Index>(i)), acc.first / acc.second});
  }
  const EnsembleSpec spec = constrained_ensemble_select(pool, budget_seconds, opts.max_members);

  json options = {{"budget_ms", opts.budget_ms},
                  {"max_members", opts.max_members},
                  {"accuracy_objective", opts.accuracy_objective},
                  {"latency_objective", opts.latency_objective},
                  {"predictor", opts.predictor},
                  {"seed", opts.seed},
                  {"train", opts.train.to_json()}};
  json output;
  output["manifest"] = make_manifest("ensemble", opts.corpus_path, options);
  output["ensemble"] = ensemble_spec_json(spec);

  if (!opts.forecast_dir.empty()) {
    std::vector<ForecastQuantileSet> forecasts;
    for (const auto& member : spec.members) {
      const fs::path path = fs::path(opts.forecast_dir) / (config_slug(member) + ".csv");
      if (!fs::exists(path)) {
        throw std::runtime_error("missing member forecast file: " + path.string());
      }
      forecasts.push_back(load_forecasts(path.string()));
    }
    const ForecastQuantileSet averaged = average_quantile_ensemble(forecasts);
    const ActualSet actuals = load_actuals(opts.actuals_path);
    output["scored_ncrps"] = ncrps(averaged, actuals);
  }

  fs::create_directories(opts.out);
  const fs::path out_path = fs::path(opts.out) / "ensemble.json";
  write_json(out_path, output);
  std::cout << "ensemble with " << spec.members.size() << " members, total latency "
            << spec.total_latency_seconds * 1000.0 << " ms, written to " << out_path.string()
            << "\n";
  return 0;
}

// -------------------------------------------------------------- analyze

struct AnalyzeOpts {
  std::string corpus_path;
  std::string mode;
  std::string objective = "ncrps";
  std::string classical;  // comma list; defaults to the registry
  std::string deep;
  std::string models;  // optional filter for ranks/corr
  std::string out = default_out_dir();
};

std::vector<std::string> group_or_default(const std::string& csv,
                                          const std::vector<std::string>& fallback,
                                          const EvaluationCorpus& corpus) {
  std::vector<std::string> names = csv.empty() ? fallback : parse_name_list(csv);
  std::vector<std::string> present;
  for (const auto& name : names) {
    if (corpus.schema.model_index(name) >= 0) present.push_back(name);
  }
  return present;
}

int run_analyze(const AnalyzeOpts& opts) {
  const EvaluationCorpus corpus = load_evaluations(opts.corpus_path, {opts.objective});
  fs::create_directories(opts.out);
  json options = {{"mode", opts.mode}, {"objective", opts.objective}};
  json summary;
  summary["files"] = json::object();

  if (opts.mode == "ks" || opts.mode == "improvement") {
    const std::vector<std::string> classical =
        group_or_default(opts.classical, classical_method_names(), corpus);
    const std::vector<std::string> deep = group_or_default(opts.deep, deep_method_names(), corpus);
    if (classical.empty() || deep.empty()) {
      throw std::runtime_error("model groups are empty for this corpus; pass --classical/--deep");
    }
    options["classical"] = classical;
    options["deep"] = deep;
    const MethodGroup classical_group{"classical", classical};
    const MethodGroup deep_group{"deep", deep};
    ensure_disjoint(classical_group, deep_group);
    const std::set<std::string> classical_set(classical.begin(), classical.end());
    const std::set<std::string> deep_set(deep.begin(), deep.end());

    if (opts.mode == "ks") {
      // Raw per-seed rows: single-model evaluations.
      json tests = json::array();
      for (const auto& task_id : corpus.task_ids()) {
        const std::vector<double> a = group_sample(corpus, task_id, classical_group, 0);
        const std::vector<double> b = group_sample(corpus, task_id, deep_group, 0);
        if (a.empty() || b.empty()) {
          std::cerr << "warning: task '" << task_id << "' lacks one group, skipped\n";
          continue;
        }
        const KsResult result = ks_two_sample(a, b);
        tests.push_back({{"task", task_id},
                         {"D", result.d},
                         {"p", result.p_value},
                         {"n_class", a.size()},
                         {"n_deep", b.size()}});
      }
      const fs::path path = fs::path(opts.out) / "ks_tests.json";
      summary["tests"] = tests;
      summary["files"]["ks_json"] = path.filename().string();
      summary["manifest"] = make_manifest("analyze", opts.corpus_path, options);
      write_json(path, summary);
      write_json(fs::path(opts.out) / "analyze_summary.json", summary);
      std::cout << "wrote " << tests.size() << " KS records to " << path.string() << "\n";
      return 0;
    }

    // improvement: best deep versus best classical per task.
    std::ostringstream csv;
    csv << "task,relative_improvement\n";
    json rows = json::array();
    for (const auto& task_id : corpus.task_ids()) {
      const TaskEvaluations evals = corpus.task_mean_evaluations(task_id);
      double best_classical = std::numeric_limits<double>::infinity();
      double best_deep = std::numeric_limits<double>::infinity();
      for (std::size_t row = 0; row < evals.config_ids.size(); ++row) {
        const auto& name =
            corpus.configs()[static_cast<std::size_t>(evals.config_ids[row])].model_name;
        const double value = evals.objectives(static_cast<Index>(row), 0);
        if (classical_set.count(name) > 0) best_classical = std::min(best_classical, value);
        if (deep_set.count(name) > 0) best_deep = std::min(best_deep, value);
      }
      if (!std::isfinite(best_classical) || !std::isfinite(best_deep)) {
        std::cerr << "warning: task '" << task_id << "' lacks one group, skipped\n";
        continue;
      }
      const double improvement = relative_improvement(best_deep, best_classical);
      csv << task_id << "," << detail::format_double(improvement) << "\n";
      rows.push_back({{"task", task_id}, {"relative_improvement", improvement}});
    }
    const fs::path path = fs::path(opts.out) / "improvement.csv";
    write_text(path, csv.str());
    summary["improvement"] = rows;
    summary["files"]["improvement_csv"] = path.filename().string();
    summary["manifest"] = make_manifest("analyze", opts.corpus_path, options);
    write_json(fs::path(opts.out) / "analyze_summary.json", summary);
    std::cout << "wrote per-task improvements to " << path.string() << "\n";
    return 0;
  }

  if (opts.mode == "ranks" || opts.mode == "corr") {
    std::function<bool(const ModelConfig&)> filter;
    if (!opts.models.empty()) {
      const std::vector<std::string> keep = parse_name_list(opts.models);
      const std::set<std::string> keep_set(keep.begin(), keep.end());
      filter = [keep_set](const ModelConfig& config) {
        return keep_set.count(config.model_name) > 0;
      };
      options["models"] = keep;
    }
    const RankTable table = rank_table(corpus, 0, filter);

    if (opts.mode == "ranks") {
      std::ostringstream csv;
      csv << "task";
      for (const auto& label : table.labels) csv << "," << label;
      csv << "\n";
      for (std::size_t t = 0; t < table.task_ids.size(); ++t) {
        csv << table.task_ids[t];
        for (Index u = 0; u < table.ranks.cols(); ++u) {
          csv << "," << detail::format_double(table.ranks(static_cast<Index>(t), u));
        }
        csv << "\n";
      }
      csv << "mean";
      for (Index u = 0; u < table.mean.size(); ++u) {
        csv << "," << detail::format_double(table.mean(u));
      }
      csv << "\nstddev";
      for (Index u = 0; u < table.stddev.size(); ++u) {
        csv << "," << detail::format_double(table.stddev(u));
      }
      csv << "\n";
      const fs::path path = fs::path(opts.out) / "ranks.csv";
      write_text(path, csv.str());

      json units = json::array();
      for (std::size_t u = 0; u < table.labels.size(); ++u) {
        units.push_back({{"label", table.labels[u]},
                         {"mean_rank", table.mean(static_cast<Index>(u))},
                         {"stddev", table.stddev(static_cast<Index>(u))}});
      }
      summary["ranks"] = units;
      summary["skipped_tasks"] = table.skipped_tasks;
      summary["files"]["ranks_csv"] = path.filename().string();
      summary["manifest"] = make_manifest("analyze", opts.corpus_path, options);
      write_json(fs::path(opts.out) / "analyze_summary.json", summary);
      std::cout << "wrote rank table (" << table.task_ids.size() << " tasks x "
                << table.labels.size() << " configs) to " << path.string() << "\n";
      return 0;
    }

    const Matrix corr = rank_correlation_matrix(table);
    std::ostringstream csv;
    csv << "task";
    for (const auto& task_id : table.task_ids) csv << "," << task_id;
    csv << "\n";
    for (Index a = 0; a < corr.rows(); ++a) {
      csv << table.task_ids[static_cast<std::size_t>(a)];
      for (Index b = 0; b < corr.cols(); ++b) {
        csv << ",";
        if (!std::isnan(corr(a, b))) csv << detail::format_double(corr(a, b));
      }
      csv << "\n";
    }
    const fs::path path = fs::path(opts.out) / "rank_correlation.csv";
    write_text(path, csv.str());
    summary["files"]["correlation_csv"] = path.filename().string();
    summary["skipped_tasks"] = table.skipped_tasks;
    summary["manifest"] = make_manifest("analyze", opts.corpus_path, options);
    write_json(fs::path(opts.out) / "analyze_summary.json", summary);
    std::cout << "wrote " << table.task_ids.size() << "x" << table.task_ids.size()
              << " correlation matrix to " << path.string() << "\n";
    return 0;
  }

  throw UsageError("--mode must be one of ks, improvement, ranks, corr");
}

// --------------------------------------------------------------- report

struct ReportOpts {
  std::string run_dir;
  std::string out = default_out_dir();
};

int run_report(const ReportOpts& opts) {
  if (!fs::is_directory(opts.run_dir)) {
    throw std::runtime_error("run directory '" + opts.run_dir + "' does not exist");
  }
  std::vector<fs::path> manifests;
  for (const auto& entry : fs::directory_iterator(opts.run_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 5 && name.substr(name.size() - 5) == ".json") manifests.push_back(entry.path());
  }
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty()) {
    throw std::runtime_error("no JSON reports found in '" + opts.run_dir + "'");
  }

  json runs = json::array();
  // method -> n -> pooled samples
  std::map<std::string, std::vector<std::vector<double>>> pooled;
  for (const auto& path : manifests) {
    std::ifstream in(path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("manifest")) {
      throw std::runtime_error("corrupt manifest in '" + path.string() + "'");
    }
    json entry;
    entry["file"] = path.filename().string();
    entry["manifest"] = j["manifest"];
    runs.push_back(entry);

    if (j["manifest"]["command"] == "loocv") {
      const json& summary = j.at("summary");
      const std::string method = summary.at("method").get<std::string>();
      auto& samples = pooled[method];
      for (const auto& curve : summary.at("curves")) {
        const auto values = curve.at("hv_error").get<std::vector<double>>();
        if (samples.size() < values.size()) samples.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) samples[i].push_back(values[i]);
      }
    }
  }

  json loocv_summary = json::object();
  std::ostringstream tsv;
  tsv << "method\tn\tmean_hv_error\tstd_hv_error\tnum_curves\n";
  for (const auto& [method, samples] : pooled) {
    std::vector<double> means;
    std::vector<double> stds;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      double mean = 0.0;
      for (double v : samples[i]) mean += v;
      mean /= static_cast<double>(samples[i].size());
      double var = 0.0;
      for (double v : samples[i]) var += (v - mean) * (v - mean);
      var /= static_cast<double>(samples[i].size());
      means.push_back(mean);
      stds.push_back(std::sqrt(var));
      tsv << method << "\t" << (i + 1) << "\t" << detail::format_double(mean) << "\t"
          << detail::format_double(std::sqrt(var)) << "\t" << samples[i].size() << "\n";
    }
    loocv_summary[method] = {{"mean_hv_error", means},
                             {"std_hv_error", stds},
                             {"num_curves", samples.empty() ? 0 : samples[0].size()}};
  }

  fs::create_directories(opts.out);
  const fs::path tsv_path = fs::path(opts.out) / "report_curves.tsv";
  write_text(tsv_path, tsv.str());

  json summary;
  summary["manifest"] = make_manifest("report", "", {{"run_dir", opts.run_dir}});
  summary["runs"] = runs;
  summary["loocv"] = loocv_summary;
  summary["files"] = {{"curves_tsv", tsv_path.filename().string()}};
  write_json(fs::path(opts.out) / "report_summary.json", summary);
  std::cout << "merged " << runs.size() << " reports into " << tsv_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-objective default-model selection from offline evaluations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SynthOpts synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic evaluation corpus");
  synth_cmd->add_option("--out", synth.out, "output corpus CSV")->required();
  synth_cmd->add_option("--tasks", synth.tasks)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--methods", synth.methods)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--eval-seeds", synth.eval_seeds)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--outlier-tasks", synth.outlier_tasks)->check(CLI::NonNegativeNumber)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();

  SelectOpts select;
  CLI::App* select_cmd = app.add_subcommand("select", "propose default configurations");
  select_cmd->add_option("corpus", select.corpus_path, "evaluation corpus (CSV or JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  select_cmd->add_option("--objectives", select.objectives, "comma-separated metric columns")
      ->capture_default_str();
  select_cmd->add_option("--num-defaults", select.num_defaults)->check(CLI::PositiveNumber)->capture_default_str();
  select_cmd->add_option("--seed", select.seed)->capture_default_str();
  select_cmd->add_option("--exclude-task", select.exclude_task,
                         "hold this task out of training; score the defaults on it");
  select_cmd->add_option("--out", select.out, "output directory")->capture_default_str();
  select.train.attach(select_cmd);

  LoocvOpts loocv_opts;
  CLI::App* loocv_cmd = app.add_subcommand("loocv", "leave-one-task-out evaluation of a selector");
  loocv_cmd->add_option("corpus", loocv_opts.corpus_path)->required()->check(CLI::ExistingFile);
  loocv_cmd->add_option("--objectives", loocv_opts.objectives)->capture_default_str();
  loocv_cmd->add_option("--method", loocv_opts.method)
      ->check(CLI::IsMember({"pareto", "single", "greedy", "random"}))
      ->capture_default_str();
  loocv_cmd->add_option("--num-defaults", loocv_opts.num_defaults)->check(CLI::PositiveNumber)->capture_default_str();
  loocv_cmd->add_option("--seeds", loocv_opts.num_seeds, "number of repetitions")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  loocv_cmd->add_option("--seed", loocv_opts.seed, "base seed")->capture_default_str();
  loocv_cmd->add_option("--out", loocv_opts.out)->capture_default_str();
  loocv_opts.train.attach(loocv_cmd);

  EnsembleOpts ensemble;
  CLI::App* ensemble_cmd = app.add_subcommand("ensemble", "build a latency-constrained ensemble");
  ensemble_cmd->add_option("corpus", ensemble.corpus_path)->required()->check(CLI::ExistingFile);
  ensemble_cmd->add_option("--budget-ms", ensemble.budget_ms, "latency budget in ms, or 'none'")
      ->capture_default_str();
  ensemble_cmd->add_option("--max-members", ensemble.max_members)->check(CLI::PositiveNumber)->capture_default_str();
  ensemble_cmd->add_option("--accuracy-objective", ensemble.accuracy_objective)->capture_default_str();
  ensemble_cmd->add_option("--latency-objective", ensemble.latency_objective)->capture_default_str();
  ensemble_cmd->add_option("--predictor", ensemble.predictor, "surrogate or mean")
      ->check(CLI::IsMember({"surrogate", "mean"}))
      ->capture_default_str();
  ensemble_cmd->add_option("--seed", ensemble.seed)->capture_default_str();
  ensemble_cmd->add_option("--forecast-dir", ensemble.forecast_dir,
                           "directory with per-config forecast CSVs named <slug>.csv");
  ensemble_cmd->add_option("--actuals", ensemble.actuals_path, "actuals CSV for scoring");
  ensemble_cmd->add_option("--out", ensemble.out)->capture_default_str();
  ensemble.train.attach(ensemble_cmd);

  AnalyzeOpts analyze;
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "statistical comparisons");
  analyze_cmd->add_option("corpus", analyze.corpus_path)->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--mode", analyze.mode)
      ->required()
      ->check(CLI::IsMember({"ks", "improvement", "ranks", "corr"}));
  analyze_cmd->add_option("--objective", analyze.objective)->capture_default_str();
  analyze_cmd->add_option("--classical", analyze.classical, "comma list of classical model names");
  analyze_cmd->add_option("--deep", analyze.deep, "comma list of deep model names");
  analyze_cmd->add_option("--models", analyze.models, "restrict ranks/corr to these model names");
  analyze_cmd->add_option("--out", analyze.out)->capture_default_str();

  ReportOpts report;
  CLI::App* report_cmd = app.add_subcommand("report", "consolidate run outputs");
  report_cmd->add_option("run_dir", report.run_dir, "directory with command outputs")->required();
  report_cmd->add_option("--out", report.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    std::cout << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*select_cmd) return run_select(select);
    if (*loocv_cmd) return run_loocv(loocv_opts);
    if (*ensemble_cmd) return run_ensemble(ensemble);
    if (*analyze_cmd) return run_analyze(analyze);
    if (*report_cmd) return run_report(report);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
