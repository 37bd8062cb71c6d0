#pragma once
//
// Metacognitive REINFORCE over computations.
//
// Q(b, c) = w . f(b, c), P(c | b) proportional to exp(Q(b, c) / tau). After each
// trial the weights move along
//
//   alpha * sum_t gamma^(t-1) * r_t * grad_w ln pi_w(c_t | b_t)
//
// with r_t the meta-level reward of step t. Three optional mechanisms change
// the model:
//   PR  adds pr_weight * (pseudo-reward of the belief transition) to clicks,
//   SE  adds a subjective effort value se_value to clicks,
//   TD  replaces the learned Terminate value by the exact expected return of
//       stopping now.
//

#include <array>
#include <span>
#include <string>
#include <vector>

#include "metamdp/env.hpp"
#include "metamdp/features.hpp"
#include "metamdp/rng.hpp"

namespace metamdp {

struct VariantSpec {
  bool pr = false;
  bool se = false;
  bool td = false;

  int mechanism_count() const { return int{pr} + int{se} + int{td}; }
  // "plain", "pr", "se", "td", "pr_se", "pr_td", "se_td", "pr_se_td".
  std::string name() const;
  static VariantSpec from_name(std::string_view name);  // throws kInvalidConfig
  // The eight variants in canonical order (plain first, pr_se_td last).
  static std::array<VariantSpec, 8> all();

  friend bool operator==(const VariantSpec&, const VariantSpec&) = default;
};

enum class RewardForm {
  kImmediate,   // gamma^(t-1) * r_t, as in the update rule above
  kReturnToGo,  // gamma^(t-1) * sum_{k>=t} gamma^(k-t) r_k
};

using StrategyWeights = std::vector<double>;

struct HyperParams {
  double alpha = 0.1;
  double gamma = 1.0;
  double tau = 1.0;
  double pr_weight = 0.0;  // used only when the variant enables PR
  double se_value = 0.0;   // used only when the variant enables SE
  StrategyWeights w_init;
};

// Throws kInvalidConfig when a field is out of range or w_init has the wrong length.
void validate(const HyperParams& hp, std::size_t feature_count);

struct TrajectoryStep {
  BeliefState belief;
  Computation computation;
  double reward = 0.0;  // step_reward under the generating variant
  double prob = 1.0;    // policy probability of the computation when sampled
  bool forced = false;  // Terminate imposed by the operation cap
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;

  int clicks() const { return static_cast<int>(steps.size()) - 1; }
  const BeliefState& final_belief() const { return steps.back().belief; }
};

// Everything the policy and the update need about one decision, independent
// of the weights. Built once per decision and shared by sampling, the
// update and likelihood replay.
struct DecisionRecord {
  std::vector<double> features;  // available.size() x F, row-major
  std::vector<Computation> available;
  int chosen = 0;
  int terminate_index = 0;
  double term_reward = 0.0;     // expected_term_reward at this belief
  double pseudo_reward = 0.0;   // PR of the realized transition (clicks only)
  bool forced = false;

  bool chose_terminate() const { return chosen == terminate_index; }
  // Variant-adjusted meta-level reward of the chosen computation.
  double reward(const VariantSpec& spec, const HyperParams& hp, double click_cost) const;
};

DecisionRecord make_decision(const BeliefState& b, const FeatureSetConfig& features);

// Softmax logits Q / tau over rec.available.
std::vector<double> decision_logits(std::span<const double> w, const DecisionRecord& rec,
                                    const VariantSpec& spec, double tau);
// Numerically stable softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);
// grad_w ln pi(rec.available[index] | b).
std::vector<double> decision_grad_log(std::span<const double> w, const DecisionRecord& rec,
                                      const VariantSpec& spec, double tau, int index);
// Applies one trial's update from a sequence of decisions.
StrategyWeights reinforce_from_records(std::span<const double> w,
                                       std::span<const DecisionRecord> records,
                                       const VariantSpec& spec, const HyperParams& hp,
                                       double click_cost, RewardForm form);

double q_meta(std::span<const double> w, const BeliefState& b, Computation c,
              const VariantSpec& spec, const FeatureSetConfig& features);

struct PolicyDistribution {
  std::vector<Computation> computations;
  std::vector<double> probs;

  double prob_of(Computation c) const;
};

PolicyDistribution policy(std::span<const double> w, const BeliefState& b, const VariantSpec& spec,
                          double tau, const FeatureSetConfig& features);

// Value of the new believed-best path minus the old believed-best path, both
// evaluated under b_next. Non-negative for any one-step transition.
double pseudo_reward(const BeliefState& b_t, const BeliefState& b_next);

// meta_reward plus, for clicks only, se_value (SE) and pr_weight * PR (PR).
double step_reward(const BeliefState& b, Computation c, const BeliefState& b_next,
                   const VariantSpec& spec, const HyperParams& hp);

std::vector<double> grad_log_policy(std::span<const double> w, const BeliefState& b,
                                    Computation c, const VariantSpec& spec, double tau,
                                    const FeatureSetConfig& features);

StrategyWeights reinforce_update(std::span<const double> w, const Trajectory& traj,
                                 const VariantSpec& spec, const HyperParams& hp,
                                 const FeatureSetConfig& features,
                                 RewardForm form = RewardForm::kImmediate);

struct LearnerConfig {
  FeatureSetConfig features;
  VariantSpec spec;
  HyperParams hp;
  RewardForm reward_form = RewardForm::kImmediate;
  int max_ops = 0;  // <= 0 means the number of observable nodes
};

struct TrialOutcome {
  Trajectory trajectory;
  StrategyWeights w_next;
  double external_score = 0.0;  // realized best-path reward minus click costs
};

TrialOutcome run_trial(std::span<const double> w, const EnvPtr& env, const GroundTruth& g,
                       const LearnerConfig& cfg, Rng& rng);

int effective_max_ops(const EnvConfig& env, int max_ops);

}  // namespace metamdp
