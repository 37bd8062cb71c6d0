#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "metamdp/simulate.hpp"

namespace metamdp {

struct MannWhitneyResult {
  double u = 0.0;  // U of the first sample: pairs x > y plus half the ties
  double p_two_sided = 1.0;
  bool exact = false;
};

enum class MwuMethod { kAuto, kExact, kNormal };
inline constexpr std::size_t kMaxTiedExact = 24;

// Exact p (doubled smaller tail of the permutation distribution of U) when
// n_x + n_y <= 12 and there are no ties; otherwise the normal approximation
// with tie and continuity correction. Throws kEmptyGroup on an empty sample.
// kExact/kNormal force one path. Forced exact tests with ties enumerate every
// split of the pooled midranks (at most kMaxTiedExact observations).
MannWhitneyResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                                 MwuMethod method = MwuMethod::kAuto);

// Number of index subsets of size n_x from n_x + n_y ranks whose U equals u,
// for u in [0, n_x * n_y]. Used for the exact test.
std::vector<double> mann_whitney_u_counts(int n_x, int n_y);

struct GroupSummary {
  std::string group;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
};

struct GroupComparison {
  std::string group_a;
  std::string group_b;
  std::string metric;
  MannWhitneyResult test;
};

struct GroupCompareResult {
  std::vector<GroupSummary> summaries;
  std::vector<GroupComparison> comparisons;
};

// Observations per group, keyed by metric ("score", "clicks", ...).
using GroupedSamples = std::map<std::string, std::map<std::string, std::vector<double>>>;

// Summaries for every group/metric and one test per group pair and metric.
// Throws kEmptyGroup if fewer than two groups or a group has no observations.
GroupCompareResult group_compare(const GroupedSamples& groups, MwuMethod method = MwuMethod::kAuto);

// Score and click samples for records whose agent maps to a group name.
GroupedSamples group_records(std::span<const TrialRecord> records,
                             const std::map<int, std::string>& group_of_agent);

// Least-squares slope of proportion over trial index.
double curve_slope(std::span<const CurvePoint> curve);

}  // namespace metamdp
