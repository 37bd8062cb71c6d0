#include "metamdp/env.hpp"

#include "metamdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace metamdp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kObserveUnavailable: return "ObserveUnavailable";
    case ErrorCode::kUnavailableComputation: return "UnavailableComputation";
    case ErrorCode::kNodeObserved: return "NodeObserved";
    case ErrorCode::kInconsistentClicks: return "InconsistentClicks";
    case ErrorCode::kInvalidClick: return "InvalidClick";
    case ErrorCode::kDegenerateData: return "DegenerateData";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kMissingFit: return "MissingFit";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

double mean(const Distribution& d) {
  double m = 0.0;
  for (const auto& o : d) m += o.value * o.prob;
  return m;
}

double variance(const Distribution& d) {
  const double m = mean(d);
  double v = 0.0;
  for (const auto& o : d) v += o.prob * (o.value - m) * (o.value - m);
  return v;
}

double stddev(const Distribution& d) { return std::sqrt(variance(d)); }

int max_support(const Distribution& d) { return d.back().value; }
int min_support(const Distribution& d) { return d.front().value; }

namespace {

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(ErrorCode::kInvalidConfig, msg);
}

void normalize_prior(Distribution& d, NodeId n) {
  if (d.empty()) config_error("node " + std::to_string(n) + ": empty prior");
  std::sort(d.begin(), d.end(),
            [](const Outcome& a, const Outcome& b) { return a.value < b.value; });
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d[i].prob >= 0.0 && d[i].prob <= 1.0)) {
      config_error("node " + std::to_string(n) + ": probability outside [0,1]");
    }
    if (i > 0 && d[i].value == d[i - 1].value) {
      config_error("node " + std::to_string(n) + ": duplicate prior value");
    }
    total += d[i].prob;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    config_error("node " + std::to_string(n) + ": prior probabilities sum to " +
                 std::to_string(total));
  }
}

Distribution uniform_on(std::initializer_list<int> values) {
  Distribution d;
  const double p = 1.0 / static_cast<double>(values.size());
  for (int v : values) d.push_back({v, p});
  return d;
}

}  // namespace

EnvConfig::EnvConfig(std::vector<std::optional<NodeId>> parents,
                     std::vector<Distribution> priors, double click_cost)
    : parents_(std::move(parents)), priors_(std::move(priors)), click_cost_(click_cost) {
  const int n = node_count();
  if (n < 2) config_error("tree needs a root and at least one observable node");
  if (static_cast<int>(priors_.size()) != n) config_error("one prior per node required");
  if (!(click_cost_ >= 0.0) || !std::isfinite(click_cost_)) {
    config_error("click_cost must be a finite non-negative number");
  }

  children_.assign(n, {});
  int roots = 0;
  for (NodeId i = 0; i < n; ++i) {
    if (!parents_[i]) {
      root_ = i;
      ++roots;
      continue;
    }
    const NodeId p = *parents_[i];
    if (p < 0 || p >= n || p == i) {
      config_error("node " + std::to_string(i) + ": invalid parent " + std::to_string(p));
    }
    children_[p].push_back(i);
  }
  if (roots != 1) config_error("tree must have exactly one root");

  // Depths by DFS from the root; unreached nodes mean a cycle or a forest.
  depth_.assign(n, -1);
  std::vector<NodeId> stack{root_};
  depth_[root_] = 0;
  int reached = 0;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    ++reached;
    for (NodeId c : children_[u]) {
      if (depth_[c] >= 0) config_error("tree contains a cycle");
      depth_[c] = depth_[u] + 1;
      stack.push_back(c);
    }
  }
  if (reached != n) config_error("tree is not connected");

  for (NodeId i = 0; i < n; ++i) normalize_prior(priors_[i], i);
  if (priors_[root_].size() != 1 || priors_[root_][0].value != 0) {
    config_error("root prior must be a point mass at 0");
  }

  for (NodeId i = 0; i < n; ++i) {
    if (i != root_) observable_.push_back(i);
  }

  // Children visited in ascending id order yield lexicographically sorted paths.
  for (auto& ch : children_) std::sort(ch.begin(), ch.end());
  std::vector<NodeId> prefix;
  std::function<void(NodeId)> walk = [&](NodeId u) {
    prefix.push_back(u);
    if (children_[u].empty()) {
      paths_.push_back(Path{prefix});
    } else {
      for (NodeId c : children_[u]) walk(c);
    }
    prefix.pop_back();
  };
  walk(root_);

  paths_through_.assign(n, {});
  max_path_value_ = -std::numeric_limits<double>::infinity();
  for (int pi = 0; pi < static_cast<int>(paths_.size()); ++pi) {
    double best = 0.0;
    for (NodeId u : paths_[pi].nodes) {
      paths_through_[u].push_back(pi);
      best += max_support(priors_[u]);
    }
    max_path_value_ = std::max(max_path_value_, best);
  }
}

EnvConfig EnvConfig::default_tree() {
  std::vector<std::optional<NodeId>> parents(13);
  parents[0] = std::nullopt;
  for (NodeId i = 1; i <= 3; ++i) parents[i] = 0;
  for (NodeId i = 4; i <= 6; ++i) parents[i] = i - 3;
  for (NodeId i = 7; i <= 12; ++i) parents[i] = 4 + (i - 7) / 2;

  std::vector<Distribution> priors(13);
  priors[0] = {{0, 1.0}};
  for (NodeId i = 1; i <= 3; ++i) priors[i] = uniform_on({-4, -2, 2, 4});
  for (NodeId i = 4; i <= 6; ++i) priors[i] = uniform_on({-8, -4, 4, 8});
  for (NodeId i = 7; i <= 12; ++i) priors[i] = uniform_on({-48, -24, 24, 48});
  return EnvConfig(std::move(parents), std::move(priors), 1.0);
}

void validate_ground_truth(const EnvConfig& env, const GroundTruth& g) {
  if (static_cast<int>(g.realized_value.size()) != env.node_count()) {
    throw Error(ErrorCode::kInvalidConfig, "ground truth must assign every node");
  }
  for (NodeId n = 0; n < env.node_count(); ++n) {
    const auto& d = env.prior(n);
    const bool supported = std::any_of(d.begin(), d.end(), [&](const Outcome& o) {
      return o.value == g.realized_value[n] && o.prob > 0.0;
    });
    if (!supported) {
      throw Error(ErrorCode::kInvalidConfig,
                  "ground truth for node " + std::to_string(n) + " has zero prior probability");
    }
  }
}

GroundTruth sample_ground_truth(const EnvConfig& env, std::mt19937_64& rng) {
  GroundTruth g;
  g.realized_value.resize(env.node_count());
  for (NodeId n = 0; n < env.node_count(); ++n) {
    const auto& d = env.prior(n);
    const double u = uniform01(rng);
    double acc = 0.0;
    int value = d.back().value;
    for (const auto& o : d) {
      acc += o.prob;
      if (u < acc && o.prob > 0.0) {
        value = o.value;
        break;
      }
    }
    g.realized_value[n] = value;
  }
  return g;
}

BeliefState::BeliefState(EnvPtr env) : env_(std::move(env)) {}

BeliefState BeliefState::initial(EnvPtr env) {
  BeliefState b(std::move(env));
  const auto& e = *b.env_;
  b.dist_ = e.priors();
  b.observed_.assign(e.node_count(), std::nullopt);
  b.observed_[e.root()] = 0;
  b.means_.resize(e.node_count());
  for (NodeId n = 0; n < e.node_count(); ++n) b.means_[n] = mean(b.dist_[n]);
  return b;
}

int BeliefState::unobserved_count() const {
  return static_cast<int>(std::count(observed_.begin(), observed_.end(), std::nullopt));
}

BeliefState BeliefState::observe(NodeId n, int value) const {
  if (!env_->valid_node(n) || n == env_->root() || observed_[n]) {
    throw Error(ErrorCode::kObserveUnavailable,
                "node " + std::to_string(n) + " cannot be observed");
  }
  BeliefState next = *this;
  next.dist_[n] = Distribution{{value, 1.0}};
  next.observed_[n] = value;
  next.means_[n] = static_cast<double>(value);
  ++next.clicks_;
  return next;
}

std::vector<Computation> available_computations(const BeliefState& b) {
  std::vector<Computation> out;
  for (NodeId n : b.env().observable_nodes()) {
    if (!b.is_observed(n)) out.push_back(Computation::observe(n));
  }
  out.push_back(Computation::terminate());
  return out;
}

bool is_available(const BeliefState& b, Computation c) {
  if (c.is_terminate()) return true;
  return b.env().valid_node(c.node) && c.node != b.env().root() && !b.is_observed(c.node);
}

BeliefState transition(const BeliefState& b, Computation c, const GroundTruth& g) {
  if (c.is_terminate()) {
    throw Error(ErrorCode::kObserveUnavailable, "terminate has no belief transition");
  }
  if (!is_available(b, c)) {
    throw Error(ErrorCode::kObserveUnavailable,
                "node " + std::to_string(c.node) + " cannot be observed");
  }
  return b.observe(c.node, g(c.node));
}

double evaluate_path_under(const BeliefState& b_eval, const Path& p) {
  double v = 0.0;
  for (NodeId n : p.nodes) v += b_eval.node_mean(n);
  return v;
}

PathChoice best_path(const BeliefState& b) {
  const auto& paths = b.env().paths();
  int best = 0;
  double best_value = evaluate_path_under(b, paths[0]);
  for (int i = 1; i < static_cast<int>(paths.size()); ++i) {
    const double v = evaluate_path_under(b, paths[i]);
    if (v > best_value) {
      best = i;
      best_value = v;
    }
  }
  return PathChoice{paths[best], best_value, best};
}

double expected_term_reward(const BeliefState& b) { return best_path(b).expected_value; }

double meta_reward(const BeliefState& b, Computation c) {
  if (c.is_terminate()) return expected_term_reward(b);
  return -b.env().click_cost();
}

double path_upper_bound(const BeliefState& b, const Path& p) {
  double v = 0.0;
  for (NodeId n : p.nodes) {
    v += b.is_observed(n) ? static_cast<double>(*b.observed(n)) : max_support(b.dist(n));
  }
  return v;
}

bool best_path_settled(const BeliefState& b) {
  const PathChoice best = best_path(b);
  const auto& paths = b.env().paths();
  for (int i = 0; i < static_cast<int>(paths.size()); ++i) {
    if (i == best.index) continue;
    if (path_upper_bound(b, paths[i]) > best.expected_value) return false;
  }
  return true;
}

int realized_path_value(const GroundTruth& g, const Path& p) {
  int v = 0;
  for (NodeId n : p.nodes) v += g(n);
  return v;
}

}  // namespace metamdp
