#pragma once
//
// Sequential model-based maximization in the style of a tree-structured
// Parzen estimator. Parameters live in a box; log-scaled parameters are
// searched uniformly in log space.
//
// The first ceil(warmup_fraction * budget) evaluations are uniform random.
// Afterwards the best ceil(good_quantile * sqrt(n)) of the n scores so far (at
// most max_good) form the good set and the rest the bad set; each
// side is modeled by a product of per-dimension truncated-Gaussian Parzen
// densities (plus a uniform prior component), candidates are drawn from the
// good density and the candidate maximizing l(x) / g(x) is evaluated next.
//

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace metamdp {

struct ParamBound {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  bool log_scale = false;
};

struct TpeOptions {
  int budget = 100;
  std::uint64_t seed = 0;
  double warmup_fraction = 0.1;
  double good_quantile = 0.25;
  int max_good = 25;
  int n_candidates = 24;
};

struct TpeResult {
  std::vector<double> best_x;
  double best_score = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // best score after each evaluation
};

using Objective = std::function<double(std::span<const double>)>;

// Throws kInvalidConfig for budget < 1, empty or invalid bounds.
TpeResult tpe_maximize(const Objective& objective, std::span<const ParamBound> bounds,
                       const TpeOptions& options);

}  // namespace metamdp
