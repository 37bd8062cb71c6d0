#include "metamdp/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace metamdp {

std::string VariantSpec::name() const {
  if (!pr && !se && !td) return "plain";
  std::string s;
  auto add = [&](bool on, const char* tag) {
    if (!on) return;
    if (!s.empty()) s += '_';
    s += tag;
  };
  add(pr, "pr");
  add(se, "se");
  add(td, "td");
  return s;
}

VariantSpec VariantSpec::from_name(std::string_view name) {
  for (const auto& v : all()) {
    if (v.name() == name) return v;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown variant '" + std::string(name) + "'");
}

std::array<VariantSpec, 8> VariantSpec::all() {
  return {VariantSpec{false, false, false}, VariantSpec{true, false, false},
          VariantSpec{false, true, false},  VariantSpec{false, false, true},
          VariantSpec{true, true, false},   VariantSpec{true, false, true},
          VariantSpec{false, true, true},   VariantSpec{true, true, true}};
}

void validate(const HyperParams& hp, std::size_t feature_count) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
  if (!(hp.alpha >= 0.0) || !std::isfinite(hp.alpha)) fail("alpha must be finite and >= 0");
  if (!(hp.gamma >= 0.0 && hp.gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (!(hp.tau > 0.0) || !std::isfinite(hp.tau)) fail("tau must be finite and > 0");
  if (!(hp.pr_weight >= 0.0) || !std::isfinite(hp.pr_weight)) fail("pr_weight must be >= 0");
  if (!std::isfinite(hp.se_value)) fail("se_value must be finite");
  if (hp.w_init.size() != feature_count) {
    fail("w_init has " + std::to_string(hp.w_init.size()) + " entries, expected " +
         std::to_string(feature_count));
  }
  for (double x : hp.w_init) {
    if (!std::isfinite(x)) fail("w_init entries must be finite");
  }
}

double DecisionRecord::reward(const VariantSpec& spec, const HyperParams& hp,
                              double click_cost) const {
  if (chose_terminate()) return term_reward;
  double r = -click_cost;
  if (spec.se) r += hp.se_value;
  if (spec.pr) r += hp.pr_weight * pseudo_reward;
  return r;
}

DecisionRecord make_decision(const BeliefState& b, const FeatureSetConfig& features) {
  DecisionRecord rec;
  rec.available = available_computations(b);
  rec.features = feature_matrix(b, rec.available, features);
  rec.terminate_index = static_cast<int>(rec.available.size()) - 1;
  rec.chosen = rec.terminate_index;
  rec.term_reward = expected_term_reward(b);
  return rec;
}

namespace {

double dot(std::span<const double> w, const double* f) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * f[j];
  return s;
}

bool learned_entry(const DecisionRecord& rec, const VariantSpec& spec, std::size_t i) {
  return !(spec.td && static_cast<int>(i) == rec.terminate_index);
}

}  // namespace

std::vector<double> decision_logits(std::span<const double> w, const DecisionRecord& rec,
                                    const VariantSpec& spec, double tau) {
  const std::size_t m = rec.available.size();
  const std::size_t f = w.size();
  std::vector<double> z(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double q = learned_entry(rec, spec, i) ? dot(w, rec.features.data() + i * f)
                                                 : rec.term_reward;
    z[i] = q / tau;
  }
  return z;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::vector<double> decision_grad_log(std::span<const double> w, const DecisionRecord& rec,
                                      const VariantSpec& spec, double tau, int index) {
  const std::size_t f = w.size();
  const auto probs = softmax(decision_logits(w, rec, spec, tau));
  std::vector<double> g(f, 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!learned_entry(rec, spec, i)) continue;
    const double* row = rec.features.data() + i * f;
    const double coef = (static_cast<int>(i) == index ? 1.0 : 0.0) - probs[i];
    for (std::size_t j = 0; j < f; ++j) g[j] += coef * row[j];
  }
  for (double& x : g) x /= tau;
  return g;
}

StrategyWeights reinforce_from_records(std::span<const double> w,
                                       std::span<const DecisionRecord> records,
                                       const VariantSpec& spec, const HyperParams& hp,
                                       double click_cost, RewardForm form) {
  const std::size_t n = records.size();
  std::vector<double> rewards(n);
  for (std::size_t t = 0; t < n; ++t) rewards[t] = records[t].reward(spec, hp, click_cost);
  if (form == RewardForm::kReturnToGo) {
    for (std::size_t t = n; t-- > 1;) rewards[t - 1] += hp.gamma * rewards[t];
  }

  StrategyWeights next(w.begin(), w.end());
  double discount = 1.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double coef = hp.alpha * discount * rewards[t];
    discount *= hp.gamma;
    if (records[t].forced || coef == 0.0) continue;
    const auto g = decision_grad_log(w, records[t], spec, hp.tau, records[t].chosen);
    for (std::size_t j = 0; j < next.size(); ++j) next[j] += coef * g[j];
  }
  return next;
}

double q_meta(std::span<const double> w, const BeliefState& b, Computation c,
              const VariantSpec& spec, const FeatureSetConfig& features) {
  if (spec.td && c.is_terminate()) return expected_term_reward(b);
  const auto f = compute_features(b, c, features);
  return dot(w, f.data());
}

double PolicyDistribution::prob_of(Computation c) const {
  for (std::size_t i = 0; i < computations.size(); ++i) {
    if (computations[i] == c) return probs[i];
  }
  return 0.0;
}

PolicyDistribution policy(std::span<const double> w, const BeliefState& b, const VariantSpec& spec,
                          double tau, const FeatureSetConfig& features) {
  const auto rec = make_decision(b, features);
  return PolicyDistribution{rec.available, softmax(decision_logits(w, rec, spec, tau))};
}

double pseudo_reward(const BeliefState& b_t, const BeliefState& b_next) {
  const PathChoice old_best = best_path(b_t);
  const PathChoice new_best = best_path(b_next);
  return new_best.expected_value - evaluate_path_under(b_next, old_best.path);
}

double step_reward(const BeliefState& b, Computation c, const BeliefState& b_next,
                   const VariantSpec& spec, const HyperParams& hp) {
  double r = meta_reward(b, c);
  if (c.is_terminate()) return r;
  if (spec.se) r += hp.se_value;
  if (spec.pr) r += hp.pr_weight * pseudo_reward(b, b_next);
  return r;
}

std::vector<double> grad_log_policy(std::span<const double> w, const BeliefState& b,
                                    Computation c, const VariantSpec& spec, double tau,
                                    const FeatureSetConfig& features) {
  const auto rec = make_decision(b, features);
  const auto it = std::find(rec.available.begin(), rec.available.end(), c);
  if (it == rec.available.end()) {
    throw Error(ErrorCode::kUnavailableComputation,
                "computation on node " + std::to_string(c.node) + " is unavailable");
  }
  return decision_grad_log(w, rec, spec, tau, static_cast<int>(it - rec.available.begin()));
}

StrategyWeights reinforce_update(std::span<const double> w, const Trajectory& traj,
                                 const VariantSpec& spec, const HyperParams& hp,
                                 const FeatureSetConfig& features, RewardForm form) {
  std::vector<DecisionRecord> records;
  records.reserve(traj.steps.size());
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& step = traj.steps[t];
    DecisionRecord rec = make_decision(step.belief, features);
    const auto it = std::find(rec.available.begin(), rec.available.end(), step.computation);
    if (it == rec.available.end()) {
      throw Error(ErrorCode::kUnavailableComputation, "trajectory step is not available");
    }
    rec.chosen = static_cast<int>(it - rec.available.begin());
    rec.forced = step.forced;
    if (!step.computation.is_terminate()) {
      if (t + 1 >= traj.steps.size()) {
        throw Error(ErrorCode::kInvalidConfig, "trajectory must end with Terminate");
      }
      rec.pseudo_reward = pseudo_reward(step.belief, traj.steps[t + 1].belief);
    }
    records.push_back(std::move(rec));
  }
  const double cost = traj.steps.empty() ? 0.0 : traj.steps.front().belief.env().click_cost();
  return reinforce_from_records(w, records, spec, hp, cost, form);
}

int effective_max_ops(const EnvConfig& env, int max_ops) {
  const int observable = static_cast<int>(env.observable_nodes().size());
  return max_ops <= 0 ? observable : std::min(max_ops, observable);
}

TrialOutcome run_trial(std::span<const double> w, const EnvPtr& env, const GroundTruth& g,
                       const LearnerConfig& cfg, Rng& rng) {
  const int cap = effective_max_ops(*env, cfg.max_ops);
  TrialOutcome out;
  std::vector<DecisionRecord> records;
  BeliefState b = BeliefState::initial(env);

  while (true) {
    DecisionRecord rec = make_decision(b, cfg.features);
    TrajectoryStep step{b, Computation::terminate(), 0.0, 1.0, false};
    if (b.clicks() >= cap) {
      rec.forced = true;
      rec.chosen = rec.terminate_index;
    } else {
      const auto probs = softmax(decision_logits(w, rec, cfg.spec, cfg.hp.tau));
      rec.chosen = static_cast<int>(sample_index(probs, rng));
      step.prob = probs[rec.chosen];
    }
    step.computation = rec.available[rec.chosen];
    step.forced = rec.forced;

    if (rec.chose_terminate()) {
      step.reward = rec.reward(cfg.spec, cfg.hp, env->click_cost());
      out.trajectory.steps.push_back(std::move(step));
      records.push_back(std::move(rec));
      break;
    }
    BeliefState next = transition(b, step.computation, g);
    rec.pseudo_reward = pseudo_reward(b, next);
    step.reward = rec.reward(cfg.spec, cfg.hp, env->click_cost());
    out.trajectory.steps.push_back(std::move(step));
    records.push_back(std::move(rec));
    b = std::move(next);
  }

  out.w_next = reinforce_from_records(w, records, cfg.spec, cfg.hp, env->click_cost(),
                                      cfg.reward_form);
  const BeliefState& final_b = out.trajectory.final_belief();
  out.external_score = realized_path_value(g, best_path(final_b).path) -
                       env->click_cost() * final_b.clicks();
  return out;
}

}  // namespace metamdp
