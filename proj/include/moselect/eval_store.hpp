#pragma once

// Offline evaluation tables: ingestion, validation, indexing, and the
// feature encoding of model configurations.
//
// Corpus file format (UTF-8 CSV):
//   task_id,model_name,seed,hp:<name>...,metric:<name>...
// An empty hp: cell means "hyperparameter not defined for this model".
// The reserved hyperparameter name "training_fraction" is the
// checkpoint position in (0, 1] and is absent for non-trained methods.
// A JSON-lines file with the same field names (flat keys, one record
// per line) is accepted as an alternative.
//
// Objectives are always minimized. A requested objective name with a
// leading '-' loads the corresponding metric column negated, so
// larger-is-better metrics can be carried through unchanged.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moselect/types.hpp"

namespace moselect {

struct ModelConfig {
  std::string model_name;
  std::map<std::string, double> hyperparameters;
  std::optional<double> training_fraction;

  friend auto operator<=>(const ModelConfig&, const ModelConfig&) = default;
};

// Canonical one-line rendering, stable across runs.
std::string canonical_config_string(const ModelConfig& config);

// model name plus a short content hash; safe as a file name.
std::string config_slug(const ModelConfig& config);

// The feature slot fed by ModelConfig::training_fraction.
inline constexpr const char* kTrainingFractionFeature = "training_fraction";

// Which models and hyperparameter names exist, in a fixed order, so
// encodings are reproducible. The encoder always emits kModelSlots
// one-hot entries and kFeatureSlots feature entries; corpora with fewer
// names leave the trailing slots at zero.
struct HyperparameterSchema {
  std::vector<std::string> feature_names;  // sorted, size <= kFeatureSlots
  std::vector<std::string> model_names;    // sorted, size <= kModelSlots

  Index model_index(const std::string& name) const;
  Index feature_index(const std::string& name) const;
  std::string fingerprint() const;

  friend bool operator==(const HyperparameterSchema&, const HyperparameterSchema&) = default;
};

struct EvaluationRecord {
  std::string task_id;
  ModelConfig config;
  long seed = 0;
  Vector objectives;  // aligned with EvaluationCorpus::objective_names

  friend bool operator==(const EvaluationRecord& a, const EvaluationRecord& b) {
    return a.task_id == b.task_id && a.config == b.config && a.seed == b.seed &&
           a.objectives.size() == b.objectives.size() && a.objectives == b.objectives;
  }
};

// Per-task, per-config objectives averaged over seeds. config_ids index
// into EvaluationCorpus::configs.
struct TaskEvaluations {
  std::vector<Index> config_ids;
  Matrix objectives;
};

class EvaluationCorpus {
 public:
  std::vector<std::string> objective_names;
  HyperparameterSchema schema;
  std::vector<EvaluationRecord> records;

  Index num_objectives() const { return static_cast<Index>(objective_names.size()); }
  Index num_tasks() const { return static_cast<Index>(task_order_.size()); }

  const std::vector<std::string>& task_ids() const { return task_order_; }
  bool has_task(const std::string& task_id) const;
  const std::vector<Index>& task_records(const std::string& task_id) const;

  // Distinct configurations in order of first appearance: the model
  // space the corpus spans.
  const std::vector<ModelConfig>& configs() const { return configs_; }
  Index config_id(const ModelConfig& config) const;

  TaskEvaluations task_mean_evaluations(const std::string& task_id) const;

  EvaluationCorpus without_task(const std::string& task_id) const;
  EvaluationCorpus with_objectives(const std::vector<Index>& objective_ids) const;

 private:
  friend EvaluationCorpus make_corpus(std::vector<EvaluationRecord> records,
                                      std::vector<std::string> objective_names);
  std::vector<std::string> task_order_;
  std::map<std::string, std::vector<Index>> task_index_;
  std::vector<ModelConfig> configs_;
  std::map<ModelConfig, Index> config_index_;
};

// Validates records (finiteness, nonnegative latency/training time,
// unique (task, config, seed) keys), derives the schema, and builds the
// indexes. Throws std::runtime_error on any violation.
EvaluationCorpus make_corpus(std::vector<EvaluationRecord> records,
                             std::vector<std::string> objective_names);

EvaluationCorpus load_evaluations(const std::string& path,
                                  const std::vector<std::string>& objective_names);

// Canonical CSV, the inverse of load_evaluations for the same
// objective names.
void save_evaluations(const EvaluationCorpus& corpus, const std::string& path);

struct Standardizer {
  Vector mean;                 // one entry per schema feature
  Vector stddev;               // > 0; constant or absent features get 1
  std::vector<bool> constant;  // flagged when no variation was observed
};

// Per-feature mean and population standard deviation over the distinct
// configurations that define the feature.
Standardizer fit_standardizer(const EvaluationCorpus& corpus);

// One-hot model indicator followed by standardized hyperparameter
// values; hyperparameters a model does not define stay at zero, the
// standardized mean.
FeatureVector vectorize_config(const ModelConfig& config, const HyperparameterSchema& schema,
                               const Standardizer& std);

// The benchmark registry: 7 classical methods and 6 deep-learning
// method families whose hyperparameter grid spans 247 configurations.
std::vector<std::string> classical_method_names();
std::vector<std::string> deep_method_names();
HyperparameterSchema benchmark_schema();
std::vector<ModelConfig> benchmark_model_space();

}  // namespace moselect
