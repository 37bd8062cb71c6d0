#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metamdp/bms.hpp"
#include "metamdp/env.hpp"
#include "metamdp/features.hpp"
#include "metamdp/fit.hpp"
#include "metamdp/learner.hpp"

namespace metamdp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

struct CohortSection {
  int n_agents = 1;
  int n_trials = 120;
  VariantSpec variant;
  HyperParams hp;
  RewardForm reward_form = RewardForm::kImmediate;
  int max_ops = 0;
};

struct BmsSection {
  BmsOptions options;
  double prior_scale = 8.0;
  std::optional<std::filesystem::path> families_file;
};

struct ExperimentConfig {
  std::filesystem::path source;
  int version = 1;
  std::uint64_t seed = 0;
  EnvPtr env;
  FeatureSetConfig features;
  std::optional<CohortSection> cohort;
  FitOptions fit;
  BmsSection bms;
  std::filesystem::path out_dir = "outputs";
};

// Parses and validates an experiment config; relative paths inside it resolve
// against the config's directory. Throws Error(kInvalidConfig) or Error(kIo).
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Entry point of the metamdp executable. Returns the process exit code:
// 0 success, 1 partial failure, 2 invalid config or missing inputs.
int run_cli(int argc, const char* const* argv);

}  // namespace metamdp
