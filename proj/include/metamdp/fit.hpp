#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metamdp/env.hpp"
#include "metamdp/learner.hpp"
#include "metamdp/tpe.hpp"

namespace metamdp {

struct ParticipantTrial {
  GroundTruth truth;
  std::vector<NodeId> clicks;
  bool terminated = true;
};

struct ParticipantData {
  std::string id;
  std::vector<ParticipantTrial> trials;
};

// Teacher-forced decisions of one participant, independent of the model's
// hyperparameters; build once, score many times.
struct ParticipantReplay {
  std::vector<std::vector<DecisionRecord>> trials;
  double click_cost = 0.0;
  int clicks = 0;
};

// Throws kInvalidClick when a click is unavailable at its belief, exceeds the
// operation cap, or a trial does not end in termination.
ParticipantReplay build_replay(const ParticipantData& data, const EnvPtr& env,
                               const FeatureSetConfig& features, int max_ops = 0);

struct LikelihoodResult {
  double log_likelihood = 0.0;
  int n_decisions = 0;  // modeled decisions: clicks and terminations, forced ones excluded
  int n_clicks = 0;
  int n_trials = 0;
  std::vector<double> decision_probs;  // filled when requested
};

LikelihoodResult replay_log_likelihood(const ParticipantReplay& replay, const VariantSpec& spec,
                                       const HyperParams& hp,
                                       RewardForm form = RewardForm::kImmediate,
                                       bool keep_probs = false);

// Replays the participant's clicks, summing ln pi(c | b) over decisions and
// applying the variant's update after every trial.
LikelihoodResult sequence_log_likelihood(const ParticipantData& data, const VariantSpec& spec,
                                         const HyperParams& hp, const EnvPtr& env,
                                         const FeatureSetConfig& features,
                                         RewardForm form = RewardForm::kImmediate,
                                         bool keep_probs = false, int max_ops = 0);

// k * ln(n_obs) - 2 * ll; throws kDegenerateData when n_obs < 1.
double bic(double log_likelihood, int k, int n_obs);

enum class BicCount { kDecisions, kClicks, kTrials };

enum class WInitMode {
  kScalar,  // w_init = s * direction, one free parameter
  kFull,    // every entry free
};

struct FitBounds {
  ParamBound alpha{"alpha", 1e-5, 1.0, true};
  ParamBound gamma{"gamma", 0.0, 1.0, false};
  ParamBound tau{"tau", 1e-3, 1e2, true};
  ParamBound pr_weight{"pr_weight", 0.0, 10.0, false};
  ParamBound se_value{"se_value", -5.0, 5.0, false};
  ParamBound w_init{"w_init", -5.0, 5.0, false};
};

struct FitOptions {
  int budget = 2000;
  std::uint64_t seed = 0;
  FitBounds bounds;
  WInitMode w_mode = WInitMode::kScalar;
  std::vector<double> w_direction;  // length F; defaults to the is_terminate axis
  RewardForm reward_form = RewardForm::kImmediate;
  BicCount bic_count = BicCount::kDecisions;
};

struct FitResult {
  VariantSpec variant;
  HyperParams hp_best;
  double log_likelihood = 0.0;
  double bic = 0.0;
  int n_obs = 0;
  int k = 0;
  int iterations_used = 0;
};

// Unit vector along the is_terminate feature, or along the first feature when
// is_terminate is disabled.
std::vector<double> default_w_direction(const FeatureSetConfig& features);

// Free hyperparameters: alpha, gamma, tau, w_init (1 or F), +1 each for PR and SE.
int free_parameter_count(const VariantSpec& spec, std::size_t feature_count, WInitMode mode);

// Search space for a variant and the mapping from a point to HyperParams.
std::vector<ParamBound> search_space(const VariantSpec& spec, std::size_t feature_count,
                                     const FitOptions& options);
HyperParams params_from_point(std::span<const double> x, const VariantSpec& spec,
                              std::size_t feature_count, const FitOptions& options);

FitResult optimize_hyperparams(const ParticipantReplay& replay, const VariantSpec& spec,
                               std::size_t feature_count, const FitOptions& options);

// Seed used for (participant index, variant index) fits.
std::uint64_t fit_seed(std::uint64_t seed, int participant, int variant);

}  // namespace metamdp
