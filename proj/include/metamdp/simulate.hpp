#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "metamdp/env.hpp"
#include "metamdp/learner.hpp"

namespace metamdp {

enum class StrategyLabel { kAdaptive, kNoPlanning, kOther };

std::string_view to_string(StrategyLabel label);
StrategyLabel strategy_label_from_string(std::string_view s);

struct CohortConfig {
  int n_agents = 1;
  int n_trials = 120;
  std::uint64_t seed = 0;
  EnvPtr env;
  LearnerConfig learner;
  // Optional per-agent hyperparameters; overrides learner.hp when non-empty.
  std::vector<HyperParams> agent_hp;
  int jobs = 1;
};

struct TrialRecord {
  int agent = 0;
  int trial = 1;  // 1-based
  std::vector<NodeId> clicks;
  double external_score = 0.0;
  StrategyLabel label = StrategyLabel::kOther;
  GroundTruth truth;
  // Policy probability of every sampled decision, clicks then Terminate. A
  // Terminate forced by the operation cap is not a decision and is omitted.
  std::vector<double> decision_probs;
};

// Seeds: agent a uses derive_seed(seed, a); inside an agent, stream 0 draws
// ground truths and stream 1 draws computations.
std::uint64_t agent_seed(std::uint64_t cohort_seed, int agent);

// Records ordered by (agent, trial).
std::vector<TrialRecord> simulate_cohort(const CohortConfig& cfg);

// Trials for one agent; the cohort runner calls this per agent.
std::vector<TrialRecord> simulate_agent(const CohortConfig& cfg, int agent);

// "adaptive": every click hits an unobserved node of maximal prior variance
// (among nodes unobserved at that moment), and no click is made once the best
// path is settled (no realization can beat its expected value).
// "no_planning": no clicks. "other": anything else.
// Throws kInconsistentClicks if clicks disagree with b_final's observations.
StrategyLabel classify_strategy(std::span<const NodeId> clicks, const BeliefState& b_final);

struct CurvePoint {
  int trial = 0;
  double proportion = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n = 0;
};

// Per-trial adaptive proportion with p +- 1.96 sqrt(p(1-p)/n), clipped to [0, 1].
std::vector<CurvePoint> discovery_curve(std::span<const TrialRecord> records);

struct MeanStd {
  double mean = 0.0;
  double sd = 0.0;  // population std
  int n = 0;
};

MeanStd mean_std(std::span<const double> xs);
// Click counts per trial over the given records.
MeanStd mean_clicks(std::span<const TrialRecord> records);

// Fraction of adaptive trials with trial index in [first, last].
double adaptive_proportion(std::span<const TrialRecord> records, int first, int last);

}  // namespace metamdp
