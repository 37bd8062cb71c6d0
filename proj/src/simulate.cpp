#include "metamdp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metamdp/parallel.hpp"

namespace metamdp {

std::string_view to_string(StrategyLabel label) {
  switch (label) {
    case StrategyLabel::kAdaptive: return "adaptive";
    case StrategyLabel::kNoPlanning: return "no_planning";
    case StrategyLabel::kOther: return "other";
  }
  return "other";
}

StrategyLabel strategy_label_from_string(std::string_view s) {
  if (s == "adaptive") return StrategyLabel::kAdaptive;
  if (s == "no_planning") return StrategyLabel::kNoPlanning;
  if (s == "other") return StrategyLabel::kOther;
  throw Error(ErrorCode::kInvalidConfig, "unknown strategy label '" + std::string(s) + "'");
}

std::uint64_t agent_seed(std::uint64_t cohort_seed, int agent) {
  return derive_seed(cohort_seed, static_cast<std::uint64_t>(agent));
}

std::vector<TrialRecord> simulate_agent(const CohortConfig& cfg, int agent) {
  LearnerConfig learner = cfg.learner;
  if (!cfg.agent_hp.empty()) learner.hp = cfg.agent_hp.at(agent);
  validate(learner.hp, learner.features.size());

  const std::uint64_t seed = agent_seed(cfg.seed, agent);
  Rng truth_rng(derive_seed(seed, 0));
  Rng action_rng(derive_seed(seed, 1));

  StrategyWeights w = learner.hp.w_init;
  std::vector<TrialRecord> out;
  out.reserve(cfg.n_trials);
  for (int t = 1; t <= cfg.n_trials; ++t) {
    TrialRecord rec;
    rec.agent = agent;
    rec.trial = t;
    rec.truth = sample_ground_truth(*cfg.env, truth_rng);
    TrialOutcome res = run_trial(w, cfg.env, rec.truth, learner, action_rng);
    for (const auto& step : res.trajectory.steps) {
      if (!step.computation.is_terminate()) rec.clicks.push_back(step.computation.node);
      if (!step.forced) rec.decision_probs.push_back(step.prob);
    }
    rec.external_score = res.external_score;
    rec.label = classify_strategy(rec.clicks, res.trajectory.final_belief());
    w = std::move(res.w_next);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TrialRecord> simulate_cohort(const CohortConfig& cfg) {
  if (cfg.n_agents < 1 || cfg.n_trials < 1) {
    throw Error(ErrorCode::kInvalidConfig, "n_agents and n_trials must be positive");
  }
  if (!cfg.env) throw Error(ErrorCode::kInvalidConfig, "cohort has no environment");
  if (!cfg.agent_hp.empty() && static_cast<int>(cfg.agent_hp.size()) != cfg.n_agents) {
    throw Error(ErrorCode::kInvalidConfig, "per-agent hyperparameter list must have n_agents entries");
  }
  std::vector<std::vector<TrialRecord>> per_agent(cfg.n_agents);
  parallel_for(per_agent.size(), cfg.jobs,
               [&](std::size_t a) { per_agent[a] = simulate_agent(cfg, static_cast<int>(a)); });
  std::vector<TrialRecord> all;
  all.reserve(static_cast<std::size_t>(cfg.n_agents) * cfg.n_trials);
  for (auto& v : per_agent) std::move(v.begin(), v.end(), std::back_inserter(all));
  return all;
}

StrategyLabel classify_strategy(std::span<const NodeId> clicks, const BeliefState& b_final) {
  const EnvConfig& env = b_final.env();
  if (static_cast<int>(clicks.size()) != b_final.clicks()) {
    throw Error(ErrorCode::kInconsistentClicks, "click count disagrees with final belief");
  }
  if (clicks.empty()) return StrategyLabel::kNoPlanning;

  BeliefState b = BeliefState::initial(b_final.env_ptr());
  bool adaptive = true;
  for (NodeId n : clicks) {
    if (!env.valid_node(n) || n == env.root() || !b_final.is_observed(n) || b.is_observed(n)) {
      throw Error(ErrorCode::kInconsistentClicks,
                  "click on node " + std::to_string(n) + " is inconsistent with the final belief");
    }
    if (best_path_settled(b)) adaptive = false;  // clicked after the path was settled

    double max_var = 0.0;
    for (NodeId u : env.observable_nodes()) {
      if (!b.is_observed(u)) max_var = std::max(max_var, variance(env.prior(u)));
    }
    if (variance(env.prior(n)) < max_var - 1e-9) adaptive = false;

    b = b.observe(n, *b_final.observed(n));
  }
  return adaptive ? StrategyLabel::kAdaptive : StrategyLabel::kOther;
}

std::vector<CurvePoint> discovery_curve(std::span<const TrialRecord> records) {
  if (records.empty()) throw Error(ErrorCode::kDegenerateData, "no trial records");
  int max_trial = 0;
  for (const auto& r : records) max_trial = std::max(max_trial, r.trial);
  std::vector<int> n(max_trial + 1, 0), adaptive(max_trial + 1, 0);
  for (const auto& r : records) {
    ++n[r.trial];
    if (r.label == StrategyLabel::kAdaptive) ++adaptive[r.trial];
  }
  std::vector<CurvePoint> curve;
  for (int t = 1; t <= max_trial; ++t) {
    if (n[t] == 0) continue;
    const double p = static_cast<double>(adaptive[t]) / n[t];
    const double half = 1.96 * std::sqrt(p * (1.0 - p) / n[t]);
    curve.push_back({t, p, std::max(0.0, p - half), std::min(1.0, p + half), n[t]});
  }
  return curve;
}

MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorCode::kEmptyGroup, "mean of an empty sample");
  MeanStd r;
  r.n = static_cast<int>(xs.size());
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / r.n;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.sd = std::sqrt(ss / r.n);
  return r;
}

MeanStd mean_clicks(std::span<const TrialRecord> records) {
  std::vector<double> counts;
  counts.reserve(records.size());
  for (const auto& r : records) counts.push_back(static_cast<double>(r.clicks.size()));
  return mean_std(counts);
}

double adaptive_proportion(std::span<const TrialRecord> records, int first, int last) {
  int n = 0, k = 0;
  for (const auto& r : records) {
    if (r.trial < first || r.trial > last) continue;
    ++n;
    if (r.label == StrategyLabel::kAdaptive) ++k;
  }
  return n == 0 ? 0.0 : static_cast<double>(k) / n;
}

}  // namespace metamdp
