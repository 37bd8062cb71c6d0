#include "metamdp/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace metamdp {

namespace {

constexpr std::array<std::string_view, kBuiltinFeatureCount> kNames = {
    "bias",  "is_terminate", "term_reward",    "clicks",           "myopic_voi",
    "depth", "prior_std",    "max_path_value", "unobserved_count", "click_cost",
};

// Per-belief quantities shared by every computation's feature row.
struct BeliefSummary {
  std::vector<double> path_values;
  double best_value = 0.0;
};

BeliefSummary summarize(const BeliefState& b) {
  BeliefSummary s;
  const auto& paths = b.env().paths();
  s.path_values.reserve(paths.size());
  s.best_value = -std::numeric_limits<double>::infinity();
  for (const auto& p : paths) {
    s.path_values.push_back(evaluate_path_under(b, p));
    s.best_value = std::max(s.best_value, s.path_values.back());
  }
  return s;
}

double voi_from_summary(const BeliefState& b, NodeId node, const BeliefSummary& s) {
  const auto& env = b.env();
  const auto& through = env.paths_through(node);
  // Best value over paths avoiding the node does not depend on the outcome.
  double best_without = -std::numeric_limits<double>::infinity();
  double best_through = -std::numeric_limits<double>::infinity();
  std::size_t k = 0;
  for (int i = 0; i < static_cast<int>(s.path_values.size()); ++i) {
    if (k < through.size() && through[k] == i) {
      best_through = std::max(best_through, s.path_values[i]);
      ++k;
    } else {
      best_without = std::max(best_without, s.path_values[i]);
    }
  }
  const double m = b.node_mean(node);
  double expected_best = 0.0;
  for (const auto& o : b.dist(node)) {
    expected_best += o.prob * std::max(best_without, best_through - m + o.value);
  }
  return std::max(0.0, expected_best - s.best_value);
}

double max_through(NodeId node, const BeliefState& b, const BeliefSummary& s) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i : b.env().paths_through(node)) best = std::max(best, s.path_values[i]);
  return best;
}

void fill_row(const BeliefState& b, Computation c, const FeatureSetConfig& cfg,
              const BeliefSummary& s, double* out) {
  const auto& env = b.env();
  const bool term = c.is_terminate();
  for (std::size_t j = 0; j < cfg.enabled.size(); ++j) {
    double v = 0.0;
    switch (cfg.enabled[j]) {
      case Feature::kBias: v = 1.0; break;
      case Feature::kIsTerminate: v = term ? 1.0 : 0.0; break;
      case Feature::kTermReward: v = term ? s.best_value : 0.0; break;
      case Feature::kClicks: v = b.clicks(); break;
      case Feature::kMyopicVoi: v = term ? 0.0 : voi_from_summary(b, c.node, s); break;
      case Feature::kDepth: v = term ? 0.0 : env.depth(c.node); break;
      case Feature::kPriorStd: v = term ? 0.0 : stddev(env.prior(c.node)); break;
      case Feature::kMaxPathValue: v = term ? 0.0 : max_through(c.node, b, s); break;
      case Feature::kUnobservedCount: v = b.unobserved_count(); break;
      case Feature::kClickCost: v = term ? 0.0 : -env.click_cost(); break;
    }
    out[j] = v / cfg.scales[j];
  }
}

}  // namespace

std::string_view feature_name(Feature f) { return kNames[static_cast<std::size_t>(f)]; }

Feature feature_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Feature>(i);
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown feature '" + std::string(name) + "'");
}

FeatureSetConfig FeatureSetConfig::defaults(const EnvConfig& env) {
  FeatureSetConfig cfg;
  const double value_scale = env.max_path_value() > 0.0 ? env.max_path_value() : 1.0;
  for (int i = 0; i < kBuiltinFeatureCount; ++i) {
    const auto f = static_cast<Feature>(i);
    cfg.enabled.push_back(f);
    cfg.scales.push_back(f == Feature::kTermReward || f == Feature::kMyopicVoi ? value_scale
                                                                                : 1.0);
  }
  return cfg;
}

FeatureSetConfig FeatureSetConfig::from_names(const std::vector<std::string>& names,
                                              std::vector<double> scales) {
  if (names.empty()) throw Error(ErrorCode::kInvalidConfig, "feature list is empty");
  if (scales.size() != names.size()) {
    throw Error(ErrorCode::kInvalidConfig, "features and scales differ in length");
  }
  FeatureSetConfig cfg;
  std::set<Feature> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Feature f = feature_from_name(names[i]);
    if (!seen.insert(f).second) {
      throw Error(ErrorCode::kInvalidConfig, "duplicate feature '" + names[i] + "'");
    }
    if (!(scales[i] > 0.0) || !std::isfinite(scales[i])) {
      throw Error(ErrorCode::kInvalidConfig, "scale for '" + names[i] + "' must be positive");
    }
    cfg.enabled.push_back(f);
  }
  cfg.scales = std::move(scales);
  return cfg;
}

double myopic_voi(const BeliefState& b, NodeId node) {
  if (!b.env().valid_node(node) || b.is_observed(node)) {
    throw Error(ErrorCode::kNodeObserved, "node " + std::to_string(node) + " is already observed");
  }
  return voi_from_summary(b, node, summarize(b));
}

FeatureVector compute_features(const BeliefState& b, Computation c, const FeatureSetConfig& cfg) {
  if (!is_available(b, c)) {
    throw Error(ErrorCode::kUnavailableComputation,
                "computation on node " + std::to_string(c.node) + " is unavailable");
  }
  FeatureVector f(cfg.size());
  fill_row(b, c, cfg, summarize(b), f.data());
  return f;
}

std::vector<double> feature_matrix(const BeliefState& b, std::span<const Computation> comps,
                                   const FeatureSetConfig& cfg) {
  const BeliefSummary s = summarize(b);
  std::vector<double> m(comps.size() * cfg.size());
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (!is_available(b, comps[i])) {
      throw Error(ErrorCode::kUnavailableComputation,
                  "computation on node " + std::to_string(comps[i].node) + " is unavailable");
    }
    fill_row(b, comps[i], cfg, s, m.data() + i * cfg.size());
  }
  return m;
}

}  // namespace metamdp
