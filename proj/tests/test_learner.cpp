#include "doctest.h"
#include "oracles.hpp"

#include "metamdp/error.hpp"
#include "metamdp/features.hpp"
#include "metamdp/learner.hpp"

using namespace metamdp;

namespace {

// Two computations with features [1, 0] and [0, 1].
DecisionRecord two_way_record() {
  DecisionRecord rec;
  rec.features = {1.0, 0.0, 0.0, 1.0};
  rec.available = {Computation::observe(1), Computation::terminate()};
  rec.chosen = 0;
  rec.terminate_index = 1;
  return rec;
}

double log_prob(const std::vector<double>& w, const BeliefState& b, Computation c,
                const VariantSpec& spec, double tau, const FeatureSetConfig& cfg) {
  return std::log(policy(w, b, spec, tau, cfg).prob_of(c));
}

}  // namespace

TEST_CASE("variant names round-trip in canonical order") {
  const std::vector<std::string> names{"plain", "pr", "se", "td", "pr_se", "pr_td", "se_td", "pr_se_td"};
  const auto all = VariantSpec::all();
  for (std::size_t i = 0; i < names.size(); ++i) {
    CHECK(all[i].name() == names[i]);
    CHECK(VariantSpec::from_name(names[i]) == all[i]);
  }
  CHECK_THROWS_AS(VariantSpec::from_name("td_pr"), Error);
}

TEST_CASE("q values") {
  const auto env = oracle::default_env();
  const auto cfg = FeatureSetConfig::defaults(*env);
  const BeliefState b = BeliefState::initial(env).observe(2, 4);
  const std::vector<double> zero(cfg.size(), 0.0);
  for (const auto& c : available_computations(b)) CHECK(q_meta(zero, b, c, VariantSpec{}, cfg) == 0.0);

  std::vector<double> unit(cfg.size(), 0.0);
  unit[0] = 1.0;
  CHECK(q_meta(unit, b, Computation::observe(5), VariantSpec{}, cfg) == 1.0);

  const VariantSpec td{false, false, true};
  CHECK(q_meta(unit, b, Computation::terminate(), td, cfg) == expected_term_reward(b));
}

TEST_CASE("TD replaces the Terminate value on random beliefs regardless of weights") {
  const auto env = oracle::default_env();
  const auto cfg = FeatureSetConfig::defaults(*env);
  const VariantSpec td{true, true, true};
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const BeliefState b = oracle::random_belief(env, rng, uniform01(rng));
    std::vector<double> w(cfg.size());
    for (double& x : w) x = 10.0 * (uniform01(rng) - 0.5);
    CHECK(std::abs(q_meta(w, b, Computation::terminate(), td, cfg) - oracle::best(b).value) <= 1e-12);
  }
}

TEST_CASE("softmax examples") {
  const auto p = softmax(std::vector<double>{2.0, 2.0, 2.0});
  for (double x : p) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const auto q = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-15));

  const auto env = oracle::default_env();
  const auto cfg = FeatureSetConfig::defaults(*env);
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const BeliefState b = oracle::random_belief(env, rng);
    std::vector<double> w(cfg.size());
    for (double& x : w) x = 0.05 * (uniform01(rng) - 0.5);
    const auto pol = policy(w, b, VariantSpec{}, 1000.0, cfg);
    for (double x : pol.probs) CHECK(std::abs(x - 1.0 / pol.probs.size()) < 1e-3);
  }
}

TEST_CASE("softmax is shift invariant") {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> z(1 + rng() % 12), shifted;
    for (double& x : z) x = 20.0 * (uniform01(rng) - 0.5);
    const double c = 1000.0 * (uniform01(rng) - 0.5);
    for (double x : z) shifted.push_back(x + c);
    const auto a = softmax(z), b = softmax(shifted);
    for (std::size_t k = 0; k < z.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-12);
  }
}

TEST_CASE("hand gradient of the two-way softmax") {
  const auto rec = two_way_record();
  const std::vector<double> w{0.0, 0.0};
  const auto g = decision_grad_log(w, rec, VariantSpec{}, 1.0, 0);
  CHECK(g[0] == 0.5);
  CHECK(g[1] == -0.5);

  // Same value from central differences of ln pi.
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    auto wp = w, wm = w;
    wp[j] += h;
    wm[j] -= h;
    const double fd = (std::log(softmax(decision_logits(wp, rec, VariantSpec{}, 1.0))[0]) -
                       std::log(softmax(decision_logits(wm, rec, VariantSpec{}, 1.0))[0])) /
                      (2 * h);
    CHECK(fd == doctest::Approx(g[j]).epsilon(1e-8));
  }
}

TEST_CASE("saturated softmax has a vanishing gradient") {
  const auto rec = two_way_record();
  const std::vector<double> w{50.0, 0.0};
  const auto g = decision_grad_log(w, rec, VariantSpec{}, 1.0, 0);
  CHECK(std::abs(g[0]) <= 1e-12);
  CHECK(std::abs(g[1]) <= 1e-12);
}

TEST_CASE("score-function identity and finite differences on random beliefs") {
  const auto env = oracle::default_env();
  const auto cfg = FeatureSetConfig::defaults(*env);
  Rng rng(77);
  for (int i = 0; i < 100; ++i) {
    const BeliefState b = oracle::random_belief(env, rng);
    std::vector<double> w(cfg.size());
    for (double& x : w) x = 2.0 * (uniform01(rng) - 0.5);
    const VariantSpec spec = VariantSpec::all()[rng() % 8];
    const double tau = 0.5 + 2.0 * uniform01(rng);
    const auto pol = policy(w, b, spec, tau, cfg);

    std::vector<double> expected(cfg.size(), 0.0);
    for (std::size_t k = 0; k < pol.computations.size(); ++k) {
      const auto g = grad_log_policy(w, b, pol.computations[k], spec, tau, cfg);
      for (std::size_t j = 0; j < g.size(); ++j) expected[j] += pol.probs[k] * g[j];
    }
    for (double x : expected) CHECK(std::abs(x) <= 1e-10);

    const Computation c = pol.computations[rng() % pol.computations.size()];
    const auto g = grad_log_policy(w, b, c, spec, tau, cfg);
    const double h = 1e-6;
    for (std::size_t j = 0; j < w.size(); ++j) {
      auto wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (log_prob(wp, b, c, spec, tau, cfg) - log_prob(wm, b, c, spec, tau, cfg)) / (2 * h);
      CHECK(std::abs(fd - g[j]) <= 1e-4 * std::max(1.0, std::abs(g[j])));
    }
  }
}

TEST_CASE("pseudo-reward examples on the two-path tree") {
  const auto env = oracle::two_path_env();
  const BeliefState b = BeliefState::initial(env);
  CHECK(pseudo_reward(b, b.observe(3, -10)) == 10.0);
  CHECK(pseudo_reward(b, b.observe(3, 10)) == 0.0);
  CHECK(oracle::pseudo_reward(b, 3, -10) == 10.0);
  CHECK(oracle::pseudo_reward(b, 3, 10) == 0.0);
  // Uninformative observation: A already dominates.
  const BeliefState a = b.observe(3, 10);
  CHECK(pseudo_reward(a, a.observe(4, -10)) == 0.0);
}

TEST_CASE("pseudo-reward is non-negative and matches the oracle on every reachable transition") {
  const auto env = oracle::two_path_env();
  int transitions = 0;
  oracle::for_each_reachable(env, [&](const BeliefState& b) {
    for (NodeId n : env->observable_nodes()) {
      if (b.is_observed(n)) continue;
      for (const auto& o : env->prior(n)) {
        const double pr = pseudo_reward(b, b.observe(n, o.value));
        CHECK(pr >= 0.0);
        CHECK(pr == oracle::pseudo_reward(b, n, o.value));
        ++transitions;
      }
    }
  });
  CHECK(transitions > 0);
}

TEST_CASE("step rewards compose the mechanisms") {
  const auto env = oracle::two_path_env();
  const BeliefState b = BeliefState::initial(env);
  const BeliefState down = b.observe(3, -10);
  HyperParams hp;
  CHECK(step_reward(b, Computation::observe(3), down, VariantSpec{}, hp) == -1.0);

  hp.se_value = 0.4;
  CHECK(step_reward(b, Computation::observe(3), down, VariantSpec{false, true, false}, hp) ==
        doctest::Approx(-0.6).epsilon(1e-15));

  hp = HyperParams{};
  hp.pr_weight = 1.0;
  CHECK(step_reward(b, Computation::observe(3), down, VariantSpec{true, false, false}, hp) == 9.0);
  // Terminate never receives PR or SE.
  hp.se_value = 3.0;
  CHECK(step_reward(down, Computation::terminate(), down, VariantSpec{true, true, false}, hp) ==
        expected_term_reward(down));
}

TEST_CASE("REINFORCE examples") {
  auto rec = two_way_record();
  const std::vector<DecisionRecord> one{rec};
  HyperParams hp;
  hp.alpha = 0.1;
  hp.gamma = 1.0;
  hp.tau = 1.0;
  const auto w = reinforce_from_records(std::vector<double>{0.0, 0.0}, one, VariantSpec{}, hp, 1.0,
                                        RewardForm::kImmediate);
  CHECK(w[0] == doctest::Approx(-0.05).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.05).epsilon(1e-15));

  // Zero click cost and a Terminate worth zero leave w untouched.
  auto term = rec;
  term.chosen = 1;
  const std::vector<DecisionRecord> zero_reward{rec, term};
  const std::vector<double> w0{0.3, -0.2};
  CHECK(reinforce_from_records(w0, zero_reward, VariantSpec{}, hp, 0.0, RewardForm::kImmediate) == w0);
}

TEST_CASE("gamma zero keeps only the first step") {
  const auto env = oracle::default_env();
  const auto cfg = FeatureSetConfig::defaults(*env);
  LearnerConfig lc;
  lc.features = cfg;
  lc.hp.alpha = 0.2;
  lc.hp.gamma = 0.0;
  lc.hp.tau = 1.0;
  lc.hp.w_init.assign(cfg.size(), 0.0);
  Rng rng(3);
  const GroundTruth g = sample_ground_truth(*env, rng);
  TrialOutcome out;
  do {
    out = run_trial(lc.hp.w_init, env, g, lc, rng);
  } while (out.trajectory.steps.size() < 3);

  const auto& s0 = out.trajectory.steps.front();
  const auto g0 = grad_log_policy(lc.hp.w_init, s0.belief, s0.computation, VariantSpec{}, lc.hp.tau, cfg);
  const auto full = reinforce_update(lc.hp.w_init, out.trajectory, VariantSpec{}, lc.hp, cfg);
  for (std::size_t j = 0; j < full.size(); ++j) {
    CHECK(full[j] == doctest::Approx(lc.hp.w_init[j] + lc.hp.alpha * s0.reward * g0[j]).epsilon(1e-14));
  }
  CHECK(full == out.w_next);
}

TEST_CASE("run_trial with an overwhelming Terminate preference") {
  const auto env = oracle::default_env();
  LearnerConfig lc;
  lc.features = FeatureSetConfig::defaults(*env);
  lc.hp.tau = 1.0;
  lc.hp.w_init.assign(lc.features.size(), 0.0);
  lc.hp.w_init[1] = 50.0;
  Rng rng(10);
  const GroundTruth g = sample_ground_truth(*env, rng);
  const auto out = run_trial(lc.hp.w_init, env, g, lc, rng);
  CHECK(out.trajectory.clicks() == 0);
  CHECK(out.external_score == realized_path_value(g, env->paths().front()));
}

TEST_CASE("operation cap forces termination") {
  const auto env = oracle::default_env();
  LearnerConfig lc;
  lc.features = FeatureSetConfig::defaults(*env);
  lc.hp.tau = 1.0;
  lc.hp.w_init.assign(lc.features.size(), 0.0);
  lc.hp.w_init[1] = -50.0;
  lc.max_ops = 1;
  Rng rng(10);
  for (int i = 0; i < 20; ++i) {
    const GroundTruth g = sample_ground_truth(*env, rng);
    const auto out = run_trial(lc.hp.w_init, env, g, lc, rng);
    CHECK(out.trajectory.clicks() == 1);
    CHECK(out.trajectory.steps.back().forced);
    CHECK(out.trajectory.steps.back().prob == 1.0);
  }
}

TEST_CASE("run_trial is deterministic under a fixed seed") {
  const auto env = oracle::default_env();
  LearnerConfig lc;
  lc.features = FeatureSetConfig::defaults(*env);
  lc.spec = VariantSpec{true, true, false};
  lc.hp.alpha = 0.05;
  lc.hp.pr_weight = 1.0;
  lc.hp.se_value = 0.5;
  lc.hp.tau = 2.0;
  lc.hp.w_init.assign(lc.features.size(), 0.0);
  Rng r1(99), r2(99);
  const GroundTruth g = sample_ground_truth(*env, r1);
  (void)sample_ground_truth(*env, r2);
  const auto a = run_trial(lc.hp.w_init, env, g, lc, r1);
  const auto b = run_trial(lc.hp.w_init, env, g, lc, r2);
  CHECK(a.w_next == b.w_next);
  CHECK(a.external_score == b.external_score);
  REQUIRE(a.trajectory.steps.size() == b.trajectory.steps.size());
  for (std::size_t i = 0; i < a.trajectory.steps.size(); ++i) {
    CHECK(a.trajectory.steps[i].computation == b.trajectory.steps[i].computation);
    CHECK(a.trajectory.steps[i].prob == b.trajectory.steps[i].prob);
  }
}

TEST_CASE("PR and SE with zero weight act exactly like plain") {
  const auto env = oracle::default_env();
  LearnerConfig base;
  base.features = FeatureSetConfig::defaults(*env);
  base.hp.alpha = 0.1;
  base.hp.gamma = 0.9;
  base.hp.tau = 1.5;
  base.hp.w_init.assign(base.features.size(), 0.0);
  base.hp.w_init[1] = -0.5;
  for (const VariantSpec spec : {VariantSpec{true, false, false}, VariantSpec{false, true, false},
                                 VariantSpec{true, true, false}}) {
    LearnerConfig other = base;
    other.spec = spec;
    Rng ra(5), rb(5);
    auto wa = base.hp.w_init, wb = base.hp.w_init;
    for (int t = 0; t < 30; ++t) {
      const GroundTruth g = sample_ground_truth(*env, ra);
      (void)sample_ground_truth(*env, rb);
      const auto a = run_trial(wa, env, g, base, ra);
      const auto b = run_trial(wb, env, g, other, rb);
      REQUIRE(a.trajectory.steps.size() == b.trajectory.steps.size());
      for (std::size_t i = 0; i < a.trajectory.steps.size(); ++i) {
        CHECK(a.trajectory.steps[i].computation == b.trajectory.steps[i].computation);
      }
      CHECK(a.w_next == b.w_next);
      wa = a.w_next;
      wb = b.w_next;
    }
  }
}

TEST_CASE("return-to-go sums discounted later rewards") {
  auto click = two_way_record();
  auto term = two_way_record();
  term.chosen = 1;
  term.term_reward = 6.0;
  const std::vector<DecisionRecord> recs{click, term};
  HyperParams hp;
  hp.alpha = 1.0;
  hp.gamma = 0.5;
  hp.tau = 1.0;
  const std::vector<double> w{0.0, 0.0};
  const auto immediate = reinforce_from_records(w, recs, VariantSpec{}, hp, 1.0, RewardForm::kImmediate);
  const auto rtg = reinforce_from_records(w, recs, VariantSpec{}, hp, 1.0, RewardForm::kReturnToGo);
  // Gradients: click [0.5, -0.5], terminate [-0.5, 0.5].
  CHECK(immediate[0] == doctest::Approx(-1.0 * 0.5 + 0.5 * 6.0 * -0.5));
  CHECK(rtg[0] == doctest::Approx((-1.0 + 0.5 * 6.0) * 0.5 + 0.5 * 6.0 * -0.5));
}

TEST_CASE("hyperparameter validation") {
  HyperParams hp;
  hp.w_init.assign(3, 0.0);
  CHECK_NOTHROW(validate(hp, 3));
  CHECK_THROWS_AS(validate(hp, 4), Error);
  hp.tau = 0.0;
  CHECK_THROWS_AS(validate(hp, 3), Error);
  hp.tau = 1.0;
  hp.gamma = 1.5;
  CHECK_THROWS_AS(validate(hp, 3), Error);
}
