#include "metamdp/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "metamdp/error.hpp"
#include "metamdp/rng.hpp"

namespace metamdp {

namespace {

constexpr double kMinBandwidth = 0.01;
constexpr double kInvSqrt2 = 0.70710678118654752440;

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double standard_normal(Rng& rng) {
  // Box-Muller; u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Parzen density on [0,1]^d: equal-weight mixture of a uniform prior and one
// truncated Gaussian per observation, bandwidth shared per dimension.
class ParzenDensity {
 public:
  ParzenDensity(std::vector<std::vector<double>> points, std::size_t dims)
      : points_(std::move(points)), bandwidth_(dims, 0.1) {
    const double n = static_cast<double>(points_.size());
    for (std::size_t d = 0; d < dims && !points_.empty(); ++d) {
      double m = 0.0;
      for (const auto& p : points_) m += p[d];
      m /= n;
      double ss = 0.0;
      for (const auto& p : points_) ss += (p[d] - m) * (p[d] - m);
      const double sd = points_.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.25;
      bandwidth_[d] = std::clamp(1.06 * sd * std::pow(n, -0.2), kMinBandwidth, 1.0);
    }
    norm_.resize(points_.size() * dims);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      for (std::size_t d = 0; d < dims; ++d) {
        const double mu = points_[i][d];
        const double s = bandwidth_[d];
        norm_[i * dims + d] = normal_cdf((1.0 - mu) / s) - normal_cdf(-mu / s);
      }
    }
  }

  std::vector<double> sample(Rng& rng) const {
    const std::size_t dims = bandwidth_.size();
    std::vector<double> x(dims);
    const auto k = static_cast<std::size_t>(uniform01(rng) * (points_.size() + 1));
    if (k >= points_.size()) {
      for (auto& v : x) v = uniform01(rng);
      return x;
    }
    for (std::size_t d = 0; d < dims; ++d) {
      double v = points_[k][d];
      for (int attempt = 0; attempt < 64; ++attempt) {
        const double cand = points_[k][d] + bandwidth_[d] * standard_normal(rng);
        if (cand >= 0.0 && cand <= 1.0) {
          v = cand;
          break;
        }
      }
      x[d] = v;
    }
    return x;
  }

  double log_density(std::span<const double> x) const {
    const std::size_t dims = bandwidth_.size();
    const double weight = 1.0 / static_cast<double>(points_.size() + 1);
    double total = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      double dens = 1.0;  // uniform prior component
      const double s = bandwidth_[d];
      for (std::size_t i = 0; i < points_.size(); ++i) {
        const double z = (x[d] - points_[i][d]) / s;
        dens += std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI) * norm_[i * dims + d]);
      }
      total += std::log(dens * weight);
    }
    return total;
  }

 private:
  std::vector<std::vector<double>> points_;
  std::vector<double> bandwidth_;
  std::vector<double> norm_;
};

double to_param(const ParamBound& b, double u) {
  if (b.log_scale) {
    return std::exp(std::log(b.lo) + u * (std::log(b.hi) - std::log(b.lo)));
  }
  return b.lo + u * (b.hi - b.lo);
}

}  // namespace

TpeResult tpe_maximize(const Objective& objective, std::span<const ParamBound> bounds,
                       const TpeOptions& options) {
  if (options.budget < 1) throw Error(ErrorCode::kInvalidConfig, "budget must be >= 1");
  if (bounds.empty()) throw Error(ErrorCode::kInvalidConfig, "no parameters to optimize");
  for (const auto& b : bounds) {
    const bool ok = std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo <= b.hi &&
                    (!b.log_scale || b.lo > 0.0);
    if (!ok) throw Error(ErrorCode::kInvalidConfig, "invalid bounds for '" + b.name + "'");
  }

  const std::size_t dims = bounds.size();
  const int warmup = std::max(
      1, static_cast<int>(std::ceil(options.warmup_fraction * options.budget - 1e-9)));
  Rng rng(options.seed);

  std::vector<std::vector<double>> history;
  std::vector<double> scores;
  TpeResult result;
  result.best_score = -std::numeric_limits<double>::infinity();

  auto evaluate = [&](std::vector<double> u) {
    std::vector<double> x(dims);
    for (std::size_t d = 0; d < dims; ++d) x[d] = to_param(bounds[d], u[d]);
    double s = objective(x);
    if (std::isnan(s)) s = -std::numeric_limits<double>::infinity();
    if (result.best_x.empty() || s > result.best_score) {
      result.best_score = s;
      result.best_x = x;
    }
    result.trace.push_back(result.best_score);
    history.push_back(std::move(u));
    scores.push_back(s);
  };

  for (int it = 0; it < options.budget; ++it) {
    if (it < warmup) {
      std::vector<double> u(dims);
      for (auto& v : u) v = uniform01(rng);
      evaluate(std::move(u));
      continue;
    }
    // Stable ordering keeps ties in evaluation order.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const double root_n = std::sqrt(static_cast<double>(order.size()));
    const auto n_good =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(options.good_quantile * root_n)), 1,
                                static_cast<std::size_t>(std::max(1, options.max_good)));
    std::vector<std::vector<double>> good, bad;
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < n_good ? good : bad).push_back(history[order[i]]);
    }
    const ParzenDensity l(std::move(good), dims);
    const ParzenDensity g(std::move(bad), dims);

    std::vector<double> best_u;
    double best_ratio = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < options.n_candidates; ++c) {
      auto u = l.sample(rng);
      const double ratio = l.log_density(u) - g.log_density(u);
      if (best_u.empty() || ratio > best_ratio) {
        best_ratio = ratio;
        best_u = std::move(u);
      }
    }
    evaluate(std::move(best_u));
  }
  result.iterations = options.budget;
  return result;
}

}  // namespace metamdp
