#pragma once
//
// Random-effects Bayesian model selection with family-level inference.
//
// Each participant's data is generated by one model drawn from a population
// Dirichlet(r). Variational updates:
//
//   u_nk  proportional to exp(logE_nk + psi(alpha_k) - psi(sum_j alpha_j))
//   alpha_k = alpha0_k + sum_n u_nk
//
// Family posteriors pool member-model alphas; exceedance probabilities come
// from Monte-Carlo draws of the family-level Dirichlet.
//

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metamdp/learner.hpp"

namespace metamdp {

// Digamma for x > 0 via upward recurrence and the asymptotic series.
double digamma(double x);

struct EvidenceMatrix {
  std::vector<std::vector<double>> log_evidence;  // participants x models
  std::vector<std::string> models;
  std::vector<std::string> families;
  std::vector<int> family_of;  // model -> index into families

  std::size_t participants() const { return log_evidence.size(); }
  // Throws kInvalidConfig for ragged rows, non-finite entries or a bad partition.
  void validate() const;
};

// Equal prior mass per family, split equally among its members:
// alpha0_k = scale / (|family(k)| * n_families).
std::vector<double> family_prior(const EvidenceMatrix& e, double scale);

struct BmsOptions {
  int max_iter = 1000;
  double tol = 1e-8;
  int samples = 1'000'000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct BmsResult {
  std::vector<double> alpha;         // per model
  std::vector<double> family_alpha;  // per family
  std::vector<double> r;             // expected family proportions
  std::vector<double> phi;           // family exceedance probabilities
  std::vector<std::vector<double>> posterior;  // u: participants x models
  bool converged = false;
  int iterations = 0;
};

// Throws kNonFinite if the iteration produces non-finite values.
BmsResult random_effects_bms(const EvidenceMatrix& e, const std::vector<double>& prior_alpha0,
                             const BmsOptions& options = {});

// P(family i has the largest share) under Dirichlet(alpha), by sampling.
std::vector<double> exceedance_probabilities(const std::vector<double>& alpha, int samples,
                                             std::uint64_t seed, int jobs = 1);

// Gamma(shape, 1) draw, Marsaglia-Tsang.
double sample_gamma(double shape, Rng& rng);

// Per participant, the variant with the lowest BIC; ties prefer fewer
// mechanisms, then lexicographic (pr, se, td). bics[p][v] follows
// VariantSpec::all(); a missing entry throws kMissingFit.
std::vector<VariantSpec> best_fit_grouping(
    const std::vector<std::array<std::optional<double>, 8>>& bics);

}  // namespace metamdp
