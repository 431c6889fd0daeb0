#include "moselect/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "moselect/random.hpp"

namespace moselect {

namespace {

std::string padded_name(const char* prefix, Index i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%02d", prefix, static_cast<int>(i));
  return buf;
}

}  // namespace

EvaluationCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.num_tasks < 1 || spec.num_methods < 2 || spec.num_seeds < 1) {
    throw std::runtime_error("make_synthetic_corpus: bad spec");
  }
  if (spec.num_outlier_tasks >= spec.num_tasks) {
    throw std::runtime_error("make_synthetic_corpus: too many outlier tasks");
  }

  const std::vector<double> capacities = {1.0, 2.0, 3.0};
  const std::vector<double> fractions = {0.5, 1.0};

  struct Latent {
    ModelConfig config;
    double ncrps_level;
    double latency_level;
  };
  std::vector<Latent> space;
  for (Index i = 0; i < spec.num_methods; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(spec.num_methods - 1);
    // Slower methods are more accurate: a real accuracy/latency front.
    const double base_ncrps = 0.55 - 0.35 * u;
    const double base_latency = 0.0005 * std::exp(3.0 * u);
    for (double c : capacities) {
      for (double f : fractions) {
        Latent latent;
        latent.config.model_name = padded_name("m", i);
        latent.config.hyperparameters["capacity"] = c;
        latent.config.training_fraction = f;
        latent.ncrps_level = base_ncrps - 0.02 * (c - 2.0) + 0.03 * (1.0 - f);
        latent.latency_level = base_latency * (0.5 + 0.25 * c);
        space.push_back(std::move(latent));
      }
    }
  }

  Rng rng(mix_seed(spec.seed, 0x5f3759df));
  std::vector<EvaluationRecord> records;
  for (Index t = 0; t < spec.num_tasks; ++t) {
    const bool outlier = t >= spec.num_tasks - spec.num_outlier_tasks;
    const double offset = rng.uniform(0.0, 0.05);
    const double scale = rng.uniform(0.8, 1.2);
    const double latency_factor = rng.uniform(0.8, 1.2);
    for (const Latent& latent : space) {
      for (Index s = 0; s < spec.num_seeds; ++s) {
        EvaluationRecord rec;
        rec.task_id = padded_name("task_", t);
        rec.config = latent.config;
        rec.seed = static_cast<long>(s);
        double value;
        if (outlier) {
          value = spec.outlier_scale *
                  std::exp(2.0 * (latent.ncrps_level + spec.outlier_noise * rng.gaussian()));
        } else {
          value = offset + scale * (latent.ncrps_level + spec.noise * rng.gaussian());
          value = std::max(value, 1e-3);
        }
        const double latency =
            latent.latency_level * latency_factor * std::max(0.05, 1.0 + 0.03 * rng.gaussian());
        rec.objectives.resize(2);
        rec.objectives << value, latency;
        records.push_back(std::move(rec));
      }
    }
  }
  return make_corpus(std::move(records), {"ncrps", "latency"});
}

}  // namespace moselect
