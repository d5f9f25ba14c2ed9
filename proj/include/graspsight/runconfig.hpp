#pragma once

// One JSON config drives every subcommand. Unknown keys are rejected, every
// field has a default, and flags override file values.

#include <string>
#include <vector>

#include "graspsight/dataio.hpp"
#include "graspsight/trainbench.hpp"
#include "graspsight/worldsim.hpp"

namespace gs::runconfig {

struct RunConfig {
  worldsim::WorldParams world;
  dataio::GenParams gen;
  trainbench::TrainConfig train_model_free;
  trainbench::TrainConfig train_surrogate;
  trainbench::TrainConfig train_predictive;
  trainbench::TrainConfig train_pipeline_estimator;
  double train_fraction = 0.9;
  double occlusion_tau = 0.25;
  std::vector<uint64_t> comparison_seeds = {1, 2, 3};
  bool estimator_mix_real = false;
};

// Calibrated defaults: the full three-seed comparison on the default 20k
// dataset fits a desktop CPU budget.
RunConfig default_config();

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text, const std::string& origin);

void validate(const RunConfig& cfg);

trainbench::ComparisonConfig comparison_config(const RunConfig& cfg);

}  // namespace gs::runconfig
