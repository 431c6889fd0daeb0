#include "moselect/eval_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "moselect/detail/text.hpp"

namespace moselect {

namespace {

using detail::format_double;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

bool parse_double(const std::string& text, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(text, &used);
    return used == text.size();
  } catch (const std::exception&) {
    return false;
  }
}

// Latency and training-time metrics must be nonnegative in raw form.
bool is_nonnegative_metric(const std::string& raw_name) {
  return raw_name.find("latency") != std::string::npos ||
         raw_name.find("training_time") != std::string::npos;
}

void validate_record(const EvaluationRecord& rec, const std::vector<std::string>& objective_names,
                     const std::string& where) {
  if (rec.objectives.size() != static_cast<Index>(objective_names.size())) {
    fail(where + ": objective count mismatch");
  }
  for (Index k = 0; k < rec.objectives.size(); ++k) {
    const std::string& name = objective_names[static_cast<std::size_t>(k)];
    const bool negated = !name.empty() && name[0] == '-';
    const std::string raw_name = negated ? name.substr(1) : name;
    const double raw_value = negated ? -rec.objectives(k) : rec.objectives(k);
    if (!std::isfinite(rec.objectives(k))) {
      fail(where + ": non-finite metric value for '" + raw_name + "'");
    }
    if (is_nonnegative_metric(raw_name) && raw_value < 0.0) {
      fail(where + ": negative " + raw_name);
    }
  }
  if (rec.config.training_fraction) {
    const double f = *rec.config.training_fraction;
    if (!(f > 0.0 && f <= 1.0)) fail(where + ": training_fraction outside (0, 1]");
  }
  for (const auto& [name, value] : rec.config.hyperparameters) {
    if (!std::isfinite(value)) fail(where + ": non-finite hyperparameter '" + name + "'");
  }
}

}  // namespace

std::string canonical_config_string(const ModelConfig& config) {
  std::string out = config.model_name;
  for (const auto& [name, value] : config.hyperparameters) {
    out += ";" + name + "=" + format_double(value);
  }
  if (config.training_fraction) {
    out += ";training_fraction=" + format_double(*config.training_fraction);
  }
  return out;
}

std::string config_slug(const ModelConfig& config) {
  const std::string canon = canonical_config_string(config);
  return config.model_name + "-" + detail::hex64(detail::fnv1a64(canon)).substr(8);
}

Index HyperparameterSchema::model_index(const std::string& name) const {
  const auto it = std::find(model_names.begin(), model_names.end(), name);
  return it == model_names.end() ? Index{-1} : static_cast<Index>(it - model_names.begin());
}

Index HyperparameterSchema::feature_index(const std::string& name) const {
  const auto it = std::find(feature_names.begin(), feature_names.end(), name);
  return it == feature_names.end() ? Index{-1} : static_cast<Index>(it - feature_names.begin());
}

std::string HyperparameterSchema::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& m : model_names) h = detail::fnv1a64(m + "|", h);
  h = detail::fnv1a64("/", h);
  for (const auto& f : feature_names) h = detail::fnv1a64(f + "|", h);
  return detail::hex64(h);
}

bool EvaluationCorpus::has_task(const std::string& task_id) const {
  return task_index_.count(task_id) > 0;
}

const std::vector<Index>& EvaluationCorpus::task_records(const std::string& task_id) const {
  const auto it = task_index_.find(task_id);
  if (it == task_index_.end()) fail("unknown task '" + task_id + "'");
  return it->second;
}

Index EvaluationCorpus::config_id(const ModelConfig& config) const {
  const auto it = config_index_.find(config);
  return it == config_index_.end() ? Index{-1} : it->second;
}

TaskEvaluations EvaluationCorpus::task_mean_evaluations(const std::string& task_id) const {
  const auto& rows = task_records(task_id);
  std::map<Index, std::pair<Vector, Index>> acc;  // config id -> (sum, count)
  for (Index row : rows) {
    const EvaluationRecord& rec = records[static_cast<std::size_t>(row)];
    const Index cid = config_index_.at(rec.config);
    auto [it, fresh] = acc.try_emplace(cid, std::make_pair(Vector::Zero(num_objectives()).eval(), Index{0}));
    it->second.first += rec.objectives;
    it->second.second += 1;
  }
  TaskEvaluations out;
  out.objectives.resize(static_cast<Index>(acc.size()), num_objectives());
  Index row = 0;
  for (const auto& [cid, sum_count] : acc) {
    out.config_ids.push_back(cid);
    out.objectives.row(row++) = sum_count.first / static_cast<double>(sum_count.second);
  }
  return out;
}

EvaluationCorpus EvaluationCorpus::without_task(const std::string& task_id) const {
  if (!has_task(task_id)) fail("unknown task '" + task_id + "'");
  std::vector<EvaluationRecord> kept;
  kept.reserve(records.size());
  for (const auto& rec : records) {
    if (rec.task_id != task_id) kept.push_back(rec);
  }
  return make_corpus(std::move(kept), objective_names);
}

EvaluationCorpus EvaluationCorpus::with_objectives(const std::vector<Index>& objective_ids) const {
  std::vector<std::string> names;
  for (Index k : objective_ids) {
    if (k < 0 || k >= num_objectives()) fail("objective index out of range");
    names.push_back(objective_names[static_cast<std::size_t>(k)]);
  }
  std::vector<EvaluationRecord> sliced = records;
  for (auto& rec : sliced) {
    Vector values(static_cast<Index>(objective_ids.size()));
    for (std::size_t k = 0; k < objective_ids.size(); ++k) {
      values(static_cast<Index>(k)) = rec.objectives(objective_ids[k]);
    }
    rec.objectives = std::move(values);
  }
  return make_corpus(std::move(sliced), std::move(names));
}

EvaluationCorpus make_corpus(std::vector<EvaluationRecord> records,
                             std::vector<std::string> objective_names) {
  if (records.empty()) fail("empty corpus");
  if (objective_names.empty()) fail("no objectives requested");
  {
    std::set<std::string> unique(objective_names.begin(), objective_names.end());
    if (unique.size() != objective_names.size()) fail("duplicate objective name");
  }

  EvaluationCorpus corpus;
  corpus.objective_names = std::move(objective_names);

  std::set<std::string> model_names;
  std::set<std::string> feature_names;
  bool any_training_fraction = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    validate_record(records[i], corpus.objective_names, "record " + std::to_string(i));
    model_names.insert(records[i].config.model_name);
    for (const auto& [name, value] : records[i].config.hyperparameters) {
      if (name == kTrainingFractionFeature) {
        fail("record " + std::to_string(i) + ": '" + std::string(kTrainingFractionFeature) +
             "' must be carried in the training_fraction field");
      }
      feature_names.insert(name);
    }
    if (records[i].config.training_fraction) any_training_fraction = true;
  }
  if (any_training_fraction) feature_names.insert(kTrainingFractionFeature);
  if (model_names.size() > static_cast<std::size_t>(kModelSlots)) {
    fail("corpus spans " + std::to_string(model_names.size()) + " models, encoder supports " +
         std::to_string(kModelSlots));
  }
  if (feature_names.size() > static_cast<std::size_t>(kFeatureSlots)) {
    fail("corpus spans " + std::to_string(feature_names.size()) +
         " hyperparameter features, encoder supports " + std::to_string(kFeatureSlots));
  }
  corpus.schema.model_names.assign(model_names.begin(), model_names.end());
  corpus.schema.feature_names.assign(feature_names.begin(), feature_names.end());

  corpus.records = std::move(records);
  std::set<std::tuple<std::string, std::string, long>> keys;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const EvaluationRecord& rec = corpus.records[i];
    const auto key = std::make_tuple(rec.task_id, canonical_config_string(rec.config), rec.seed);
    if (!keys.insert(key).second) {
      fail("duplicate (task, config, seed) key: " + rec.task_id + ", " +
           canonical_config_string(rec.config) + ", seed " + std::to_string(rec.seed));
    }
    if (corpus.task_index_.find(rec.task_id) == corpus.task_index_.end()) {
      corpus.task_order_.push_back(rec.task_id);
    }
    corpus.task_index_[rec.task_id].push_back(static_cast<Index>(i));
    if (corpus.config_index_.find(rec.config) == corpus.config_index_.end()) {
      corpus.config_index_[rec.config] = static_cast<Index>(corpus.configs_.size());
      corpus.configs_.push_back(rec.config);
    }
  }
  return corpus;
}

namespace {

struct ColumnMap {
  Index task_id = -1;
  Index model_name = -1;
  Index seed = -1;
  std::vector<std::pair<std::string, Index>> hp_columns;
  std::vector<std::pair<std::string, Index>> metric_columns;
};

ColumnMap parse_header(const std::vector<std::string>& fields, const std::string& where) {
  ColumnMap map;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const std::string name = detail::strip(fields[i]);
    const Index col = static_cast<Index>(i);
    if (name == "task_id") {
      map.task_id = col;
    } else if (name == "model_name") {
      map.model_name = col;
    } else if (name == "seed") {
      map.seed = col;
    } else if (name.rfind("hp:", 0) == 0) {
      map.hp_columns.emplace_back(name.substr(3), col);
    } else if (name.rfind("metric:", 0) == 0) {
      map.metric_columns.emplace_back(name.substr(7), col);
    } else {
      fail(where + ": unknown column '" + name + "'");
    }
  }
  if (map.task_id < 0 || map.model_name < 0 || map.seed < 0) {
    fail(where + ": header must contain task_id, model_name, seed");
  }
  return map;
}

// Positions of the requested objectives among the metric columns, and
// whether each is loaded negated.
struct ObjectivePlan {
  std::vector<Index> column;
  std::vector<bool> negate;
};

ObjectivePlan plan_objectives(const ColumnMap& map, const std::vector<std::string>& requested) {
  ObjectivePlan plan;
  for (const std::string& name : requested) {
    const bool negate = !name.empty() && name[0] == '-';
    const std::string raw = negate ? name.substr(1) : name;
    Index col = -1;
    for (const auto& [metric, c] : map.metric_columns) {
      if (metric == raw) col = c;
    }
    if (col < 0) fail("unknown objective '" + raw + "'");
    plan.column.push_back(col);
    plan.negate.push_back(negate);
  }
  return plan;
}

EvaluationRecord record_from_fields(const std::vector<std::string>& fields, const ColumnMap& map,
                                    const ObjectivePlan& plan,
                                    const std::vector<std::string>& objective_names,
                                    const std::string& where) {
  EvaluationRecord rec;
  rec.task_id = detail::strip(fields[static_cast<std::size_t>(map.task_id)]);
  rec.config.model_name = detail::strip(fields[static_cast<std::size_t>(map.model_name)]);
  if (rec.task_id.empty() || rec.config.model_name.empty()) {
    fail(where + ": empty task_id or model_name");
  }
  double seed_value = 0.0;
  if (!parse_double(detail::strip(fields[static_cast<std::size_t>(map.seed)]), seed_value) ||
      seed_value != std::floor(seed_value)) {
    fail(where + ": seed is not an integer");
  }
  rec.seed = static_cast<long>(seed_value);
  for (const auto& [name, col] : map.hp_columns) {
    const std::string cell = detail::strip(fields[static_cast<std::size_t>(col)]);
    if (cell.empty()) continue;
    double value = 0.0;
    if (!parse_double(cell, value)) fail(where + ": bad value in hp:" + name);
    if (name == kTrainingFractionFeature) {
      rec.config.training_fraction = value;
    } else {
      rec.config.hyperparameters[name] = value;
    }
  }
  rec.objectives.resize(static_cast<Index>(objective_names.size()));
  for (std::size_t k = 0; k < objective_names.size(); ++k) {
    const std::string cell = detail::strip(fields[static_cast<std::size_t>(plan.column[k])]);
    double value = 0.0;
    if (!parse_double(cell, value)) {
      fail(where + ": bad value in metric column for '" + objective_names[k] + "'");
    }
    rec.objectives(static_cast<Index>(k)) = plan.negate[k] ? -value : value;
  }
  return rec;
}

EvaluationCorpus load_csv(std::istream& in, const std::string& path,
                          const std::vector<std::string>& objective_names) {
  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty corpus");
  const ColumnMap map = parse_header(detail::split(detail::strip(line), ','), path + ":1");
  const ObjectivePlan plan = plan_objectives(map, objective_names);
  const std::size_t width = 3 + map.hp_columns.size() + map.metric_columns.size();

  std::vector<EvaluationRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::strip(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto fields = detail::split(detail::strip(line), ',');
    if (fields.size() != width) {
      fail(where + ": expected " + std::to_string(width) + " fields, found " +
           std::to_string(fields.size()));
    }
    try {
      records.push_back(record_from_fields(fields, map, plan, objective_names, where));
      validate_record(records.back(), objective_names, where);
    } catch (const std::runtime_error& e) {
      std::string msg = e.what();
      if (msg.rfind(where, 0) == 0) throw;
      fail(where + ": " + msg);
    }
  }
  if (records.empty()) fail(path + ": empty corpus");
  return make_corpus(std::move(records), objective_names);
}

EvaluationCorpus load_json_lines(std::istream& in, const std::string& path,
                                 const std::vector<std::string>& objective_names) {
  std::vector<EvaluationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::strip(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object()) fail(where + ": malformed JSON record");

    EvaluationRecord rec;
    std::map<std::string, double> metrics;
    for (const auto& [key, value] : row.items()) {
      if (key == "task_id") {
        rec.task_id = value.get<std::string>();
      } else if (key == "model_name") {
        rec.config.model_name = value.get<std::string>();
      } else if (key == "seed") {
        rec.seed = value.get<long>();
      } else if (key.rfind("hp:", 0) == 0) {
        if (value.is_null()) continue;
        const std::string name = key.substr(3);
        if (name == kTrainingFractionFeature) {
          rec.config.training_fraction = value.get<double>();
        } else {
          rec.config.hyperparameters[name] = value.get<double>();
        }
      } else if (key.rfind("metric:", 0) == 0) {
        metrics[key.substr(7)] = value.get<double>();
      } else {
        fail(where + ": unknown field '" + key + "'");
      }
    }
    if (rec.task_id.empty() || rec.config.model_name.empty()) {
      fail(where + ": missing task_id or model_name");
    }
    rec.objectives.resize(static_cast<Index>(objective_names.size()));
    for (std::size_t k = 0; k < objective_names.size(); ++k) {
      const std::string& name = objective_names[k];
      const bool negate = !name.empty() && name[0] == '-';
      const std::string raw = negate ? name.substr(1) : name;
      const auto it = metrics.find(raw);
      if (it == metrics.end()) fail(where + ": unknown objective '" + raw + "'");
      rec.objectives(static_cast<Index>(k)) = negate ? -it->second : it->second;
    }
    validate_record(rec, objective_names, where);
    records.push_back(std::move(rec));
  }
  if (records.empty()) fail(path + ": empty corpus");
  return make_corpus(std::move(records), objective_names);
}

}  // namespace

EvaluationCorpus load_evaluations(const std::string& path,
                                  const std::vector<std::string>& objective_names) {
  if (objective_names.empty()) fail("no objectives requested");
  std::ifstream in(path);
  if (!in) fail("cannot open corpus file '" + path + "'");
  const int first = in.peek();
  const bool json_lines = path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl";
  if (json_lines || first == '{') return load_json_lines(in, path, objective_names);
  return load_csv(in, path, objective_names);
}

void save_evaluations(const EvaluationCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write corpus file '" + path + "'");
  out << "task_id,model_name,seed";
  for (const auto& f : corpus.schema.feature_names) out << ",hp:" << f;
  for (const auto& name : corpus.objective_names) {
    out << ",metric:" << (name[0] == '-' ? name.substr(1) : name);
  }
  out << "\n";
  for (const auto& rec : corpus.records) {
    out << rec.task_id << "," << rec.config.model_name << "," << rec.seed;
    for (const auto& f : corpus.schema.feature_names) {
      out << ",";
      if (f == kTrainingFractionFeature) {
        if (rec.config.training_fraction) out << format_double(*rec.config.training_fraction);
      } else {
        const auto it = rec.config.hyperparameters.find(f);
        if (it != rec.config.hyperparameters.end()) out << format_double(it->second);
      }
    }
    for (std::size_t k = 0; k < corpus.objective_names.size(); ++k) {
      const bool negated = corpus.objective_names[k][0] == '-';
      const double value = rec.objectives(static_cast<Index>(k));
      out << "," << format_double(negated ? -value : value);
    }
    out << "\n";
  }
}

Standardizer fit_standardizer(const EvaluationCorpus& corpus) {
  const auto& features = corpus.schema.feature_names;
  const Index f = static_cast<Index>(features.size());
  Standardizer std_out;
  std_out.mean = Vector::Zero(f);
  std_out.stddev = Vector::Ones(f);
  std_out.constant.assign(static_cast<std::size_t>(f), false);

  for (Index j = 0; j < f; ++j) {
    const std::string& name = features[static_cast<std::size_t>(j)];
    std::vector<double> values;
    for (const auto& config : corpus.configs()) {
      if (name == kTrainingFractionFeature) {
        if (config.training_fraction) values.push_back(*config.training_fraction);
      } else {
        const auto it = config.hyperparameters.find(name);
        if (it != config.hyperparameters.end()) values.push_back(it->second);
      }
    }
    if (values.empty()) {
      std_out.constant[static_cast<std::size_t>(j)] = true;
      continue;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    std_out.mean(j) = mean;
    if (var > 0.0) {
      std_out.stddev(j) = std::sqrt(var);
    } else {
      std_out.constant[static_cast<std::size_t>(j)] = true;
    }
  }
  return std_out;
}

FeatureVector vectorize_config(const ModelConfig& config, const HyperparameterSchema& schema,
                               const Standardizer& std) {
  if (std.mean.size() != static_cast<Index>(schema.feature_names.size())) {
    fail("standardizer does not match schema");
  }
  FeatureVector out = FeatureVector::Zero();
  const Index model = schema.model_index(config.model_name);
  if (model < 0) fail("unknown model name '" + config.model_name + "'");
  out(model) = 1.0;

  const auto encode = [&](const std::string& name, double value) {
    const Index j = schema.feature_index(name);
    if (j < 0) fail("hyperparameter '" + name + "' not in schema");
    out(kModelSlots + j) = (value - std.mean(j)) / std.stddev(j);
  };
  for (const auto& [name, value] : config.hyperparameters) encode(name, value);
  if (config.training_fraction) encode(kTrainingFractionFeature, *config.training_fraction);
  return out;
}

std::vector<std::string> classical_method_names() {
  return {"arima", "ets", "npts", "prophet", "seasonal_naive", "stl_ar", "theta"};
}

std::vector<std::string> deep_method_names() {
  return {"deepar", "mqcnn", "mqrnn", "nbeats", "simple_feedforward", "tft"};
}

HyperparameterSchema benchmark_schema() {
  HyperparameterSchema schema;
  schema.model_names = classical_method_names();
  const auto deep = deep_method_names();
  schema.model_names.insert(schema.model_names.end(), deep.begin(), deep.end());
  std::sort(schema.model_names.begin(), schema.model_names.end());
  schema.feature_names = {
      "context_length_multiple", "deepar_num_cells", "deepar_num_layers", "ff_hidden_dim",
      "ff_num_layers",           "learning_rate",    "mqcnn_kernel_1",    "mqcnn_kernel_2",
      "mqcnn_kernel_3",          "mqcnn_num_filters", "nbeats_num_blocks", "nbeats_num_stacks",
      "tft_hidden_dim",          "tft_num_heads",     kTrainingFractionFeature,
  };
  return schema;
}

std::vector<ModelConfig> benchmark_model_space() {
  std::vector<ModelConfig> space;
  for (const auto& name : classical_method_names()) {
    space.push_back(ModelConfig{name, {}, std::nullopt});
  }

  const std::vector<double> fractions = {0.2, 0.4, 0.6, 0.8, 1.0};
  const double learning_rate = 1e-3;
  const auto add_deep = [&](const std::string& name, const std::vector<double>& contexts,
                            const std::vector<std::map<std::string, double>>& settings) {
    for (const auto& setting : settings) {
      for (double ctx : contexts) {
        for (double fraction : fractions) {
          ModelConfig config{name, setting, fraction};
          config.hyperparameters["context_length_multiple"] = ctx;
          config.hyperparameters["learning_rate"] = learning_rate;
          space.push_back(std::move(config));
        }
      }
    }
  };

  add_deep("deepar", {1, 2, 4},
           {{{"deepar_num_layers", 1}, {"deepar_num_cells", 20}},
            {{"deepar_num_layers", 2}, {"deepar_num_cells", 40}},
            {{"deepar_num_layers", 4}, {"deepar_num_cells", 80}}});
  add_deep("mqcnn", {2, 4, 8},
           {{{"mqcnn_num_filters", 20}, {"mqcnn_kernel_1", 3}, {"mqcnn_kernel_2", 3}, {"mqcnn_kernel_3", 2}},
            {{"mqcnn_num_filters", 30}, {"mqcnn_kernel_1", 7}, {"mqcnn_kernel_2", 3}, {"mqcnn_kernel_3", 3}},
            {{"mqcnn_num_filters", 40}, {"mqcnn_kernel_1", 14}, {"mqcnn_kernel_2", 7}, {"mqcnn_kernel_3", 3}}});
  add_deep("mqrnn", {2, 4, 8}, {{}});
  add_deep("nbeats", {1, 2, 4},
           {{{"nbeats_num_stacks", 4}, {"nbeats_num_blocks", 5}},
            {{"nbeats_num_stacks", 30}, {"nbeats_num_blocks", 1}},
            {{"nbeats_num_stacks", 30}, {"nbeats_num_blocks", 2}}});
  add_deep("simple_feedforward", {1, 2, 4},
           {{{"ff_hidden_dim", 30}, {"ff_num_layers", 1}},
            {{"ff_hidden_dim", 40}, {"ff_num_layers", 2}},
            {{"ff_hidden_dim", 80}, {"ff_num_layers", 3}}});
  add_deep("tft", {1, 2, 4},
           {{{"tft_hidden_dim", 16}, {"tft_num_heads", 2}},
            {{"tft_hidden_dim", 32}, {"tft_num_heads", 4}},
            {{"tft_hidden_dim", 64}, {"tft_num_heads", 8}}});
  return space;
}

}  // namespace moselect
