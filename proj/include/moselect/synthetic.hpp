#pragma once

// Seeded synthetic evaluation corpus with planted structure: method
// quality and latency trade off against each other, configurations
// modify both monotonically, and a few heavy-tailed tasks carry large,
// noisy objective scales. Backs the tests and the bundled experiments.

#include <cstdint>

#include "moselect/eval_store.hpp"

namespace moselect {

struct SyntheticSpec {
  Index num_tasks = 12;
  Index num_methods = 10;     // 6 configs each: 3 capacities x 2 fractions
  Index num_seeds = 2;        // evaluation seeds per (task, config)
  Index num_outlier_tasks = 2;  // trailing tasks with large noisy scales
  double noise = 0.012;
  double outlier_noise = 1.2;
  double outlier_scale = 400.0;
  std::uint64_t seed = 0;
};

// Objectives are named "ncrps" and "latency".
EvaluationCorpus make_synthetic_corpus(const SyntheticSpec& spec = {});

}  // namespace moselect
