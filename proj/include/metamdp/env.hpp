#pragma once
//
// The planning task and its meta-level MDP.
//
// The external task is a rooted tree whose non-root nodes carry rewards
// drawn from discrete priors. A belief state tracks which nodes have been
// inspected; computations are "observe node n" or "terminate". Acting after
// termination means following the path with the highest expected reward
// under the current belief.
//

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "metamdp/error.hpp"

namespace metamdp {

using NodeId = int;

struct Outcome {
  int value = 0;
  double prob = 0.0;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

// Discrete reward distribution, outcomes sorted by value, no duplicates.
using Distribution = std::vector<Outcome>;

double mean(const Distribution& d);
double variance(const Distribution& d);
double stddev(const Distribution& d);
int max_support(const Distribution& d);
int min_support(const Distribution& d);

struct Path {
  std::vector<NodeId> nodes;  // root first, leaf last

  friend bool operator==(const Path&, const Path&) = default;
};

class EnvConfig {
 public:
  // parents[i] is the parent of node i; exactly one entry (the root) is empty.
  // Throws Error(kInvalidConfig) when the tree or priors are malformed.
  EnvConfig(std::vector<std::optional<NodeId>> parents,
            std::vector<Distribution> priors, double click_cost);

  // Three-step tree: branching 3, 1, 2 (13 nodes), depth-dependent uniform
  // priors {+-4,+-2}, {+-8,+-4}, {+-48,+-24}; click cost 1.
  static EnvConfig default_tree();

  int node_count() const { return static_cast<int>(parents_.size()); }
  NodeId root() const { return root_; }
  std::optional<NodeId> parent(NodeId n) const { return parents_.at(n); }
  const std::vector<NodeId>& children(NodeId n) const { return children_.at(n); }
  int depth(NodeId n) const { return depth_.at(n); }
  const Distribution& prior(NodeId n) const { return priors_.at(n); }
  double click_cost() const { return click_cost_; }

  // Non-root nodes in ascending id order.
  const std::vector<NodeId>& observable_nodes() const { return observable_; }
  // All root-to-leaf paths, lexicographically ordered by node ids.
  const std::vector<Path>& paths() const { return paths_; }
  // Indices into paths() of the paths that contain node n.
  const std::vector<int>& paths_through(NodeId n) const { return paths_through_.at(n); }
  // Largest realizable path reward.
  double max_path_value() const { return max_path_value_; }

  bool valid_node(NodeId n) const { return n >= 0 && n < node_count(); }

  const std::vector<std::optional<NodeId>>& parents() const { return parents_; }
  const std::vector<Distribution>& priors() const { return priors_; }

 private:
  std::vector<std::optional<NodeId>> parents_;
  std::vector<Distribution> priors_;
  double click_cost_ = 0.0;
  NodeId root_ = 0;
  std::vector<std::vector<NodeId>> children_;
  std::vector<int> depth_;
  std::vector<NodeId> observable_;
  std::vector<Path> paths_;
  std::vector<std::vector<int>> paths_through_;
  double max_path_value_ = 0.0;
};

using EnvPtr = std::shared_ptr<const EnvConfig>;

// One realized reward per node (root realizes 0).
struct GroundTruth {
  std::vector<int> realized_value;

  int operator()(NodeId n) const { return realized_value.at(n); }
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// Throws Error(kInvalidConfig) if some value has zero prior probability.
void validate_ground_truth(const EnvConfig& env, const GroundTruth& g);

// Draws each node independently from its prior.
GroundTruth sample_ground_truth(const EnvConfig& env, std::mt19937_64& rng);

struct Computation {
  static constexpr NodeId kTerminateNode = -1;

  NodeId node = kTerminateNode;

  static constexpr Computation terminate() { return Computation{}; }
  static constexpr Computation observe(NodeId n) { return Computation{n}; }
  constexpr bool is_terminate() const { return node == kTerminateNode; }

  friend constexpr bool operator==(const Computation&, const Computation&) = default;
};

class BeliefState {
 public:
  static BeliefState initial(EnvPtr env);

  const EnvConfig& env() const { return *env_; }
  const EnvPtr& env_ptr() const { return env_; }

  const Distribution& dist(NodeId n) const { return dist_.at(n); }
  std::optional<int> observed(NodeId n) const { return observed_.at(n); }
  bool is_observed(NodeId n) const { return observed_.at(n).has_value(); }
  double node_mean(NodeId n) const { return means_[static_cast<std::size_t>(n)]; }
  int clicks() const { return clicks_; }
  int unobserved_count() const;

  // Applies an observation; throws Error(kObserveUnavailable) for the root,
  // an already observed node, or an unknown id.
  BeliefState observe(NodeId n, int value) const;

  friend bool operator==(const BeliefState& a, const BeliefState& b) {
    return a.env_ == b.env_ && a.observed_ == b.observed_ && a.clicks_ == b.clicks_;
  }

 private:
  explicit BeliefState(EnvPtr env);

  EnvPtr env_;
  std::vector<Distribution> dist_;
  std::vector<std::optional<int>> observed_;
  std::vector<double> means_;
  int clicks_ = 0;
};

struct PathChoice {
  Path path;
  double expected_value = 0.0;
  int index = 0;  // into EnvConfig::paths()
};

// Observes ascending by node id, then Terminate.
std::vector<Computation> available_computations(const BeliefState& b);
bool is_available(const BeliefState& b, Computation c);

BeliefState transition(const BeliefState& b, Computation c, const GroundTruth& g);

// Best path by summed per-node expectation; ties go to the lexicographically
// smallest node sequence.
PathChoice best_path(const BeliefState& b);
double evaluate_path_under(const BeliefState& b_eval, const Path& p);
double expected_term_reward(const BeliefState& b);
double meta_reward(const BeliefState& b, Computation c);

// Largest value path p could take under any realization of its unobserved nodes.
double path_upper_bound(const BeliefState& b, const Path& p);
// True once no realization of the unobserved nodes can make another path beat
// the current best path's expected value.
bool best_path_settled(const BeliefState& b);

// Realized ground-truth reward along p.
int realized_path_value(const GroundTruth& g, const Path& p);

}  // namespace metamdp
