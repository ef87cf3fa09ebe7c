#pragma once

// Robust aggregation across runs: interquartile mean and stratified
// percentile-bootstrap confidence intervals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "crossq/errors.hpp"
#include "crossq/random.hpp"

namespace crossq::stats {

/// 25% symmetric trimmed mean. Each sorted value owns a unit interval of
/// mass; n/4 mass is dropped from each tail, so boundary values contribute
/// fractionally when n is not a multiple of 4.
inline double iqm(std::span<const double> values) {
  if (values.empty()) throw UsageError("iqm of an empty list");
  std::vector<double> v(values.begin(), values.end());
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericalFault("iqm: non-finite score");
  }
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double lo = n / 4.0;
  const double hi = 3.0 * n / 4.0;
  const auto first = static_cast<std::size_t>(std::floor(lo));
  const auto last = std::min(v.size() - 1, static_cast<std::size_t>(std::ceil(hi)) - 1);
  if (v[first] == v[last]) return v[first];
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::max(lo, static_cast<double>(i));
    const double b = std::min(hi, static_cast<double>(i + 1));
    if (b > a) sum += (b - a) * v[i];
  }
  return sum / (hi - lo);
}

/// Linear-interpolation percentile (q in [0, 100]) of an unsorted sample.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw UsageError("percentile of an empty list");
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto k = static_cast<std::size_t>(std::floor(pos));
  if (k + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(k);
  return v[k] + frac * (v[k + 1] - v[k]);
}

/// Normalized scores, one row per task and one column per seed.
struct RunMatrix {
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> scores;
  std::int64_t step = 0;

  std::vector<double> pooled() const {
    std::vector<double> out;
    for (const auto& row : scores) out.insert(out.end(), row.begin(), row.end());
    return out;
  }
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

inline constexpr int kBootstrapReplicates = 2000;
inline constexpr double kConfidenceLevel = 0.90;

/// IQM of the pooled matrix.
inline double point_estimate(const RunMatrix& m) {
  const auto all = m.pooled();
  return iqm(all);
}

/// Percentile CI of the pooled IQM. Each replicate resamples seeds with
/// replacement within every task, then pools across tasks.
inline Interval stratified_bootstrap_ci(const RunMatrix& m, double level = kConfidenceLevel,
                                        int replicates = kBootstrapReplicates, std::uint64_t seed = 0) {
  if (m.scores.empty()) throw UsageError("bootstrap: empty run matrix");
  if (!(level > 0.0 && level < 1.0)) throw UsageError("bootstrap: level must lie in (0, 1)");
  if (replicates < 1) throw UsageError("bootstrap: need at least one replicate");
  std::size_t total = 0;
  for (std::size_t t = 0; t < m.scores.size(); ++t) {
    if (m.scores[t].size() < 2) {
      const std::string name = t < m.tasks.size() ? m.tasks[t] : std::to_string(t);
      throw UsageError("bootstrap: task '" + name + "' has fewer than 2 seeds");
    }
    total += m.scores[t].size();
  }
  Rng rng = make_rng(seed, Stream::bootstrap);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(replicates));
  std::vector<double> pool(total);
  for (int r = 0; r < replicates; ++r) {
    std::size_t k = 0;
    for (const auto& row : m.scores) {
      std::uniform_int_distribution<std::size_t> pick(0, row.size() - 1);
      for (std::size_t i = 0; i < row.size(); ++i) pool[k++] = row[pick(rng)];
    }
    stats.push_back(iqm(pool));
  }
  const double tail = (1.0 - level) / 2.0 * 100.0;
  return {percentile(stats, tail), percentile(stats, 100.0 - tail)};
}

}  // namespace crossq::stats
