#include "metamdp/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace metamdp {

ParticipantReplay build_replay(const ParticipantData& data, const EnvPtr& env,
                               const FeatureSetConfig& features, int max_ops) {
  const int cap = effective_max_ops(*env, max_ops);
  ParticipantReplay replay;
  replay.click_cost = env->click_cost();
  replay.trials.reserve(data.trials.size());
  for (std::size_t t = 0; t < data.trials.size(); ++t) {
    const auto& trial = data.trials[t];
    auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::kInvalidClick,
                  "participant " + data.id + ", trial " + std::to_string(t + 1) + ": " + what);
    };
    if (!trial.terminated) fail("trial does not end in termination");
    if (static_cast<int>(trial.clicks.size()) > cap) fail("more clicks than the operation cap");
    validate_ground_truth(*env, trial.truth);

    std::vector<DecisionRecord> records;
    BeliefState b = BeliefState::initial(env);
    for (NodeId n : trial.clicks) {
      if (!is_available(b, Computation::observe(n))) {
        fail("click on node " + std::to_string(n) + " is unavailable");
      }
      DecisionRecord rec = make_decision(b, features);
      const auto it = std::find(rec.available.begin(), rec.available.end(),
                                Computation::observe(n));
      rec.chosen = static_cast<int>(it - rec.available.begin());
      BeliefState next = b.observe(n, trial.truth(n));
      rec.pseudo_reward = pseudo_reward(b, next);
      records.push_back(std::move(rec));
      b = std::move(next);
      ++replay.clicks;
    }
    DecisionRecord stop = make_decision(b, features);
    stop.chosen = stop.terminate_index;
    stop.forced = b.clicks() >= cap;
    records.push_back(std::move(stop));
    replay.trials.push_back(std::move(records));
  }
  return replay;
}

LikelihoodResult replay_log_likelihood(const ParticipantReplay& replay, const VariantSpec& spec,
                                       const HyperParams& hp, RewardForm form,
                                       bool keep_probs) {
  LikelihoodResult res;
  res.n_trials = static_cast<int>(replay.trials.size());
  res.n_clicks = replay.clicks;
  StrategyWeights w = hp.w_init;
  for (const auto& records : replay.trials) {
    for (const auto& rec : records) {
      if (rec.forced) continue;
      const auto z = decision_logits(w, rec, spec, hp.tau);
      const double mx = *std::max_element(z.begin(), z.end());
      double total = 0.0;
      for (double v : z) total += std::exp(v - mx);
      res.log_likelihood += z[rec.chosen] - mx - std::log(total);
      ++res.n_decisions;
      if (keep_probs) res.decision_probs.push_back(softmax(z)[rec.chosen]);
    }
    w = reinforce_from_records(w, records, spec, hp, replay.click_cost, form);
  }
  return res;
}

LikelihoodResult sequence_log_likelihood(const ParticipantData& data, const VariantSpec& spec,
                                         const HyperParams& hp, const EnvPtr& env,
                                         const FeatureSetConfig& features, RewardForm form,
                                         bool keep_probs, int max_ops) {
  validate(hp, features.size());
  return replay_log_likelihood(build_replay(data, env, features, max_ops), spec, hp, form, keep_probs);
}

double bic(double log_likelihood, int k, int n_obs) {
  if (n_obs < 1) throw Error(ErrorCode::kDegenerateData, "BIC needs at least one observation");
  return k * std::log(static_cast<double>(n_obs)) - 2.0 * log_likelihood;
}

std::vector<double> default_w_direction(const FeatureSetConfig& features) {
  std::vector<double> d(features.size(), 0.0);
  const auto it = std::find(features.enabled.begin(), features.enabled.end(), Feature::kIsTerminate);
  d[it == features.enabled.end() ? 0 : static_cast<std::size_t>(it - features.enabled.begin())] = 1.0;
  return d;
}

int free_parameter_count(const VariantSpec& spec, std::size_t feature_count, WInitMode mode) {
  const int w = mode == WInitMode::kScalar ? 1 : static_cast<int>(feature_count);
  return 3 + w + int{spec.pr} + int{spec.se};
}

std::vector<ParamBound> search_space(const VariantSpec& spec, std::size_t feature_count,
                                     const FitOptions& options) {
  const auto& b = options.bounds;
  std::vector<ParamBound> space{b.alpha, b.gamma, b.tau};
  if (options.w_mode == WInitMode::kScalar) {
    space.push_back(b.w_init);
  } else {
    for (std::size_t j = 0; j < feature_count; ++j) {
      ParamBound p = b.w_init;
      p.name = "w_init_" + std::to_string(j);
      space.push_back(p);
    }
  }
  if (spec.pr) space.push_back(b.pr_weight);
  if (spec.se) space.push_back(b.se_value);
  return space;
}

HyperParams params_from_point(std::span<const double> x, const VariantSpec& spec,
                              std::size_t feature_count, const FitOptions& options) {
  HyperParams hp;
  std::size_t i = 0;
  hp.alpha = x[i++];
  hp.gamma = x[i++];
  hp.tau = x[i++];
  if (options.w_mode == WInitMode::kScalar) {
    const double s = x[i++];
    const auto dir = options.w_direction.empty()
                         ? std::vector<double>(feature_count, 0.0)
                         : options.w_direction;
    hp.w_init.resize(feature_count);
    for (std::size_t j = 0; j < feature_count; ++j) hp.w_init[j] = s * dir[j];
  } else {
    hp.w_init.assign(x.begin() + static_cast<std::ptrdiff_t>(i),
                     x.begin() + static_cast<std::ptrdiff_t>(i + feature_count));
    i += feature_count;
  }
  if (spec.pr) hp.pr_weight = x[i++];
  if (spec.se) hp.se_value = x[i++];
  return hp;
}

FitResult optimize_hyperparams(const ParticipantReplay& replay, const VariantSpec& spec,
                               std::size_t feature_count, const FitOptions& options) {
  FitOptions opts = options;
  if (opts.w_mode == WInitMode::kScalar && opts.w_direction.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "scalar w_init mode needs a direction");
  }
  if (opts.w_mode == WInitMode::kScalar && opts.w_direction.size() != feature_count) {
    throw Error(ErrorCode::kInvalidConfig, "w_init direction length differs from feature count");
  }
  const auto space = search_space(spec, feature_count, opts);
  const Objective objective = [&](std::span<const double> x) {
    const HyperParams hp = params_from_point(x, spec, feature_count, opts);
    return replay_log_likelihood(replay, spec, hp, opts.reward_form).log_likelihood;
  };
  const TpeResult search =
      tpe_maximize(objective, space, TpeOptions{.budget = opts.budget, .seed = opts.seed});

  FitResult fit;
  fit.variant = spec;
  fit.hp_best = params_from_point(search.best_x, spec, feature_count, opts);
  const LikelihoodResult best = replay_log_likelihood(replay, spec, fit.hp_best, opts.reward_form);
  fit.log_likelihood = best.log_likelihood;
  switch (opts.bic_count) {
    case BicCount::kDecisions: fit.n_obs = best.n_decisions; break;
    case BicCount::kClicks: fit.n_obs = best.n_clicks; break;
    case BicCount::kTrials: fit.n_obs = best.n_trials; break;
  }
  fit.k = free_parameter_count(spec, feature_count, opts.w_mode);
  fit.bic = bic(fit.log_likelihood, fit.k, fit.n_obs);
  fit.iterations_used = search.iterations;
  return fit;
}

std::uint64_t fit_seed(std::uint64_t seed, int participant, int variant) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(participant)),
                     static_cast<std::uint64_t>(variant));
}

}  // namespace metamdp
