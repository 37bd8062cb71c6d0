#include "metamdp/bms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "metamdp/parallel.hpp"
#include "metamdp/rng.hpp"

namespace metamdp {

double digamma(double x) {
  // Shift to x >= 10 where the asymptotic series is accurate below 1e-15.
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number coefficients B_2k / (2k).
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760))))));
  return result + std::log(x) - 0.5 * inv - series;
}

void EvidenceMatrix::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
  if (models.empty()) fail("evidence matrix has no models");
  if (family_of.size() != models.size()) fail("every model needs a family");
  std::vector<int> members(families.size(), 0);
  for (int f : family_of) {
    if (f < 0 || f >= static_cast<int>(families.size())) fail("family index out of range");
    ++members[f];
  }
  for (int c : members) {
    if (c == 0) fail("every family needs at least one model");
  }
  for (const auto& row : log_evidence) {
    if (row.size() != models.size()) fail("evidence row length differs from model count");
    for (double v : row) {
      if (!std::isfinite(v)) fail("evidence entries must be finite");
    }
  }
}

std::vector<double> family_prior(const EvidenceMatrix& e, double scale) {
  std::vector<int> members(e.families.size(), 0);
  for (int f : e.family_of) ++members[f];
  std::vector<double> a0(e.models.size());
  for (std::size_t k = 0; k < a0.size(); ++k) {
    a0[k] = scale / (members[e.family_of[k]] * static_cast<double>(e.families.size()));
  }
  return a0;
}

double sample_gamma(double shape, Rng& rng) {
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a + 1) * U^(1/a).
    const double u = 1.0 - uniform01(rng);
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      const double u1 = 1.0 - uniform01(rng);
      const double u2 = uniform01(rng);
      x = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> exceedance_probabilities(const std::vector<double>& alpha, int samples,
                                             std::uint64_t seed, int jobs) {
  constexpr int kChunk = 1 << 16;
  const int chunks = (samples + kChunk - 1) / kChunk;
  std::vector<std::vector<long long>> wins(chunks, std::vector<long long>(alpha.size(), 0));
  parallel_for(static_cast<std::size_t>(chunks), jobs, [&](std::size_t c) {
    Rng rng(derive_seed(seed, c));
    const int n = std::min(kChunk, samples - static_cast<int>(c) * kChunk);
    std::vector<double> draw(alpha.size());
    for (int s = 0; s < n; ++s) {
      for (std::size_t k = 0; k < alpha.size(); ++k) draw[k] = sample_gamma(alpha[k], rng);
      const auto best = std::max_element(draw.begin(), draw.end()) - draw.begin();
      ++wins[c][static_cast<std::size_t>(best)];
    }
  });
  std::vector<double> phi(alpha.size(), 0.0);
  for (const auto& w : wins) {
    for (std::size_t k = 0; k < w.size(); ++k) phi[k] += static_cast<double>(w[k]);
  }
  for (double& p : phi) p /= samples;
  return phi;
}

BmsResult random_effects_bms(const EvidenceMatrix& e, const std::vector<double>& prior_alpha0,
                             const BmsOptions& options) {
  e.validate();
  const std::size_t n = e.participants();
  const std::size_t k = e.models.size();
  if (prior_alpha0.size() != k) {
    throw Error(ErrorCode::kInvalidConfig, "prior alpha length differs from model count");
  }

  BmsResult res;
  res.alpha = prior_alpha0;
  res.posterior.assign(n, std::vector<double>(k, 0.0));
  std::vector<double> log_u(k);
  for (int it = 1; it <= options.max_iter; ++it) {
    double a_sum = 0.0;
    for (double a : res.alpha) a_sum += a;
    const double psi_sum = digamma(a_sum);
    std::vector<double> psi(k);
    for (std::size_t j = 0; j < k; ++j) psi[j] = digamma(res.alpha[j]) - psi_sum;

    std::vector<double> next = prior_alpha0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        log_u[j] = e.log_evidence[i][j] + psi[j];
        mx = std::max(mx, log_u[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) total += std::exp(log_u[j] - mx);
      for (std::size_t j = 0; j < k; ++j) {
        res.posterior[i][j] = std::exp(log_u[j] - mx) / total;
        next[j] += res.posterior[i][j];
      }
    }
    double delta = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(next[j])) throw Error(ErrorCode::kNonFinite, "BMS update is not finite");
      delta = std::max(delta, std::abs(next[j] - res.alpha[j]));
    }
    res.alpha = std::move(next);
    res.iterations = it;
    if (delta < options.tol) {
      res.converged = true;
      break;
    }
  }

  res.family_alpha.assign(e.families.size(), 0.0);
  for (std::size_t j = 0; j < k; ++j) res.family_alpha[e.family_of[j]] += res.alpha[j];
  double total = 0.0;
  for (double a : res.family_alpha) total += a;
  for (double a : res.family_alpha) res.r.push_back(a / total);
  res.phi = exceedance_probabilities(res.family_alpha, options.samples, options.seed, options.jobs);
  return res;
}

std::vector<VariantSpec> best_fit_grouping(
    const std::vector<std::array<std::optional<double>, 8>>& bics) {
  const auto variants = VariantSpec::all();
  auto tie_key = [](const VariantSpec& v) {
    return std::make_tuple(v.mechanism_count(), v.pr, v.se, v.td);
  };
  std::vector<VariantSpec> out;
  out.reserve(bics.size());
  for (std::size_t p = 0; p < bics.size(); ++p) {
    int best = -1;
    for (int v = 0; v < 8; ++v) {
      if (!bics[p][v]) {
        throw Error(ErrorCode::kMissingFit, "participant " + std::to_string(p) +
                                                " has no fit for variant " + variants[v].name());
      }
      if (best < 0 || *bics[p][v] < *bics[p][best] ||
          (*bics[p][v] == *bics[p][best] && tie_key(variants[v]) < tie_key(variants[best]))) {
        best = v;
      }
    }
    out.push_back(variants[best]);
  }
  return out;
}

}  // namespace metamdp
