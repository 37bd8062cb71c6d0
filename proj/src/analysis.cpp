#include "metamdp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace metamdp {

std::vector<double> mann_whitney_u_counts(int n_x, int n_y) {
  // counts[i][j][u]: arrangements of i x's and j y's with U = u, built by
  // conditioning on whether the largest element is an x (adds j) or a y.
  const int max_u = n_x * n_y;
  std::vector<std::vector<std::vector<double>>> counts(
      n_x + 1, std::vector<std::vector<double>>(n_y + 1));
  for (int i = 0; i <= n_x; ++i) {
    for (int j = 0; j <= n_y; ++j) {
      auto& c = counts[i][j];
      c.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        c[0] = 1.0;
        continue;
      }
      const auto& last_x = counts[i - 1][j];
      const auto& last_y = counts[i][j - 1];
      for (std::size_t u = 0; u < last_x.size(); ++u) c[u + j] += last_x[u];
      for (std::size_t u = 0; u < last_y.size(); ++u) c[u] += last_y[u];
    }
  }
  auto out = counts[n_x][n_y];
  out.resize(max_u + 1, 0.0);
  return out;
}

namespace {

// Permutation p-value when ties are present: enumerate every way to pick
// which n_x pooled positions belong to x and score each split with midranks.
double exact_p_with_ties(const std::vector<std::pair<double, int>>& sorted, std::size_t nx,
                         double u_obs) {
  const std::size_t n = sorted.size();
  if (n > kMaxTiedExact) {
    throw Error(ErrorCode::kDegenerateData, "exact test with ties is limited to " +
                                                std::to_string(kMaxTiedExact) + " observations");
  }
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j].first == sorted[i].first) ++j;
    for (std::size_t k = i; k < j; ++k) ranks[k] = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    i = j;
  }
  const double offset = static_cast<double>(nx) * (nx + 1) / 2.0;
  const double eps = 1e-9;
  double lower = 0.0, upper = 0.0, total = 0.0;
  std::vector<std::size_t> pick(nx);
  for (std::size_t k = 0; k < nx; ++k) pick[k] = k;
  while (true) {
    double u = -offset;
    for (std::size_t k : pick) u += ranks[k];
    total += 1.0;
    if (u <= u_obs + eps) lower += 1.0;
    if (u >= u_obs - eps) upper += 1.0;
    // Next combination in lexicographic order.
    std::size_t k = nx;
    while (k > 0 && pick[k - 1] == n - nx + k - 1) --k;
    if (k == 0) break;
    ++pick[k - 1];
    for (std::size_t m = k; m < nx; ++m) pick[m] = pick[m - 1] + 1;
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                                 MwuMethod method) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::kEmptyGroup, "Mann-Whitney needs two non-empty samples");
  const std::size_t nx = x.size(), ny = y.size(), n = nx + ny;

  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double v : x) pooled.emplace_back(v, 0);
  for (double v : y) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Midranks and the tie term sum(t^3 - t).
  double rank_sum_x = 0.0, tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_x += midrank;
    }
    i = j;
  }

  MannWhitneyResult res;
  res.u = rank_sum_x - static_cast<double>(nx) * (nx + 1) / 2.0;
  const double mu = static_cast<double>(nx) * ny / 2.0;

  const bool use_exact =
      method == MwuMethod::kExact || (method == MwuMethod::kAuto && n <= 12 && !ties);
  if (use_exact && ties) {
    res.p_two_sided = exact_p_with_ties(pooled, nx, res.u);
    res.exact = true;
    return res;
  }
  if (use_exact) {
    const auto counts = mann_whitney_u_counts(static_cast<int>(nx), static_cast<int>(ny));
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto u_obs = static_cast<std::size_t>(std::llround(res.u));
    double lower = 0.0, upper = 0.0;
    for (std::size_t u = 0; u < counts.size(); ++u) {
      if (u <= u_obs) lower += counts[u];
      if (u >= u_obs) upper += counts[u];
    }
    res.p_two_sided = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    res.exact = true;
    return res;
  }

  const double nn = static_cast<double>(n);
  const double var = static_cast<double>(nx) * ny / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0.0) {
    res.p_two_sided = 1.0;
    return res;
  }
  const double z = std::max(0.0, std::abs(res.u - mu) - 0.5) / std::sqrt(var);
  res.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

GroupCompareResult group_compare(const GroupedSamples& groups, MwuMethod method) {
  if (groups.size() < 2) throw Error(ErrorCode::kEmptyGroup, "need at least two groups");
  GroupCompareResult out;
  for (const auto& [name, metrics] : groups) {
    if (metrics.empty()) throw Error(ErrorCode::kEmptyGroup, "group '" + name + "' is empty");
    for (const auto& [metric, xs] : metrics) {
      if (xs.empty()) throw Error(ErrorCode::kEmptyGroup, "group '" + name + "' is empty");
      const MeanStd ms = mean_std(xs);
      out.summaries.push_back({name, metric, ms.mean, ms.sd, ms.n});
    }
  }
  for (auto a = groups.begin(); a != groups.end(); ++a) {
    for (auto b = std::next(a); b != groups.end(); ++b) {
      for (const auto& [metric, xs] : a->second) {
        const auto it = b->second.find(metric);
        if (it == b->second.end()) continue;
        out.comparisons.push_back({a->first, b->first, metric, mann_whitney_u(xs, it->second, method)});
      }
    }
  }
  return out;
}

GroupedSamples group_records(std::span<const TrialRecord> records,
                             const std::map<int, std::string>& group_of_agent) {
  GroupedSamples g;
  for (const auto& r : records) {
    const auto it = group_of_agent.find(r.agent);
    if (it == group_of_agent.end()) continue;
    g[it->second]["score"].push_back(r.external_score);
    g[it->second]["clicks"].push_back(static_cast<double>(r.clicks.size()));
  }
  return g;
}

double curve_slope(std::span<const CurvePoint> curve) {
  if (curve.size() < 2) return 0.0;
  double mt = 0.0, mp = 0.0;
  for (const auto& c : curve) {
    mt += c.trial;
    mp += c.proportion;
  }
  mt /= curve.size();
  mp /= curve.size();
  double num = 0.0, den = 0.0;
  for (const auto& c : curve) {
    num += (c.trial - mt) * (c.proportion - mp);
    den += (c.trial - mt) * (c.trial - mt);
  }
  return den == 0.0 ? 0.0 : num / den;
}

}  // namespace metamdp
