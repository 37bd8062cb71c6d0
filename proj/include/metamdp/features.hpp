#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metamdp/env.hpp"

namespace metamdp {

// Built-in belief/computation features. Entries that only make sense for one
// kind of computation are 0 for the other kind.
enum class Feature {
  kBias,             // constant 1
  kIsTerminate,      // 1 for Terminate
  kTermReward,       // expected_term_reward(b), Terminate only
  kClicks,           // clicks so far
  kMyopicVoi,        // myopic VOI of the observed node
  kDepth,            // depth of the observed node
  kPriorStd,         // prior standard deviation of the observed node
  kMaxPathValue,     // best expected path value among paths through the node
  kUnobservedCount,  // unobserved observable nodes
  kClickCost,        // -click_cost for Observe
};

inline constexpr int kBuiltinFeatureCount = 10;

std::string_view feature_name(Feature f);
Feature feature_from_name(std::string_view name);  // throws kInvalidConfig

struct FeatureSetConfig {
  std::vector<Feature> enabled;
  std::vector<double> scales;  // same length as enabled, strictly positive

  // All ten features; term-reward and VOI scaled by the environment's largest
  // attainable path value, everything else by 1.
  static FeatureSetConfig defaults(const EnvConfig& env);
  // Validates uniqueness, matching lengths and positive scales.
  static FeatureSetConfig from_names(const std::vector<std::string>& names,
                                     std::vector<double> scales);

  std::size_t size() const { return enabled.size(); }
};

using FeatureVector = std::vector<double>;

// Expected gain in best-path value from observing one node and then stopping.
// Throws kNodeObserved for observed nodes (including the root).
double myopic_voi(const BeliefState& b, NodeId node);

// Throws kUnavailableComputation if c is not available in b.
FeatureVector compute_features(const BeliefState& b, Computation c, const FeatureSetConfig& cfg);

// Row-major |comps| x F matrix; shares path evaluations across rows.
std::vector<double> feature_matrix(const BeliefState& b, std::span<const Computation> comps,
                                   const FeatureSetConfig& cfg);

}  // namespace metamdp
