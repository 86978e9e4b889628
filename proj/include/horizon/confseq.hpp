#pragma once

// Confidence sequences by running one betting test per grid value of m on
// shared data and keeping the values not yet rejected.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "horizon/core.hpp"
#include "horizon/error.hpp"
#include "horizon/random.hpp"

namespace horizon {

struct MGrid {
  std::vector<double> points;  // strictly increasing in (0,1)
  double spacing = 0.0;

  // count equally spaced points i/(count+1), i = 1..count.
  static MGrid uniform(std::size_t count) {
    if (count < 3) throw UsageError("confidence-sequence grid needs at least 3 points");
    MGrid g;
    g.spacing = 1.0 / static_cast<double>(count + 1);
    g.points.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) g.points.push_back(static_cast<double>(i) * g.spacing);
    return g;
  }
};

struct CsInterval {
  double lower = 0.0;
  double upper = 1.0;
  bool empty = false;
  bool disconnected = false;
  double width() const { return empty ? 0.0 : upper - lower; }
};

struct CsResult {
  std::vector<double> grid;
  double spacing = 0.0;
  int horizon = 0;
  // First n at which the test for grid[i] crossed; horizon + 1 if never.
  std::vector<int> eliminated_at;
  std::vector<CsInterval> intervals;  // index n = 0..horizon

  bool alive(int n, std::size_t i) const { return eliminated_at[i] > n; }
  double lcb(int n) const { return intervals[static_cast<std::size_t>(n)].lower; }
  const CsInterval& final_interval() const { return intervals.back(); }
};

// Builds the strategy for grid index i; each call must return an independent strategy.
using StrategyFactory = std::function<std::unique_ptr<Strategy>(const NullSpec&, std::size_t)>;

// Hull of the alive grid points, rounded outward by half a grid step; an
// alive extreme grid point extends the interval to 0 or 1.
inline CsInterval alive_hull(const CsResult& res, int n) {
  const std::size_t k = res.grid.size();
  std::size_t first = k, last = 0, count = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!res.alive(n, i)) continue;
    first = std::min(first, i);
    last = i;
    ++count;
  }
  CsInterval iv;
  if (count == 0) {
    iv.empty = true;
    iv.lower = iv.upper = 0.0;
    return iv;
  }
  const double half = 0.5 * res.spacing;
  iv.lower = first == 0 ? 0.0 : std::max(0.0, res.grid[first] - half);
  iv.upper = last + 1 == k ? 1.0 : std::min(1.0, res.grid[last] + half);
  iv.disconnected = count < last - first + 1;
  return iv;
}

inline CsResult cs_run(std::span<const double> data, const StrategyFactory& factory, double alpha,
                       const MGrid& grid, std::uint64_t aux_seed, double clip_eps = 1e-3) {
  if (grid.points.size() < 3) throw UsageError("confidence-sequence grid needs at least 3 points");
  CsResult res;
  res.grid = grid.points;
  res.spacing = grid.spacing;
  res.horizon = static_cast<int>(data.size());
  const int N = res.horizon;
  res.eliminated_at.assign(grid.points.size(), N + 1);

  if (N > 0) {
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
      const NullSpec spec(grid.points[i], alpha, N, clip_eps);
      const double b = spec.threshold();
      std::unique_ptr<Strategy> strategy = factory(spec, i);
      strategy->reset(spec, derive_seed(aux_seed, StreamKind::episode, i));
      for (int n = 1; n <= N; ++n) {
        strategy->decide();
        strategy->observe(data[static_cast<std::size_t>(n - 1)]);
        if (strategy->log_wealth() >= b) {
          res.eliminated_at[i] = n;
          break;
        }
      }
    }
  }

  res.intervals.reserve(static_cast<std::size_t>(N) + 1);
  for (int n = 0; n <= N; ++n) res.intervals.push_back(alive_hull(res, n));
  return res;
}

struct LcbRow {
  double x = 0.0;
  double fraction = 0.0;  // share of runs whose lower bound is <= x
};

inline std::vector<LcbRow> lcb_curve(std::span<const double> lower_bounds, std::span<const double> xs) {
  std::vector<double> sorted(lower_bounds.begin(), lower_bounds.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<LcbRow> rows;
  rows.reserve(xs.size());
  for (double x : xs) {
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
    const double frac = sorted.empty() ? 0.0 : static_cast<double>(below) / static_cast<double>(sorted.size());
    rows.push_back(LcbRow{x, frac});
  }
  return rows;
}

inline void write_cs_csv(std::ostream& os, std::span<const CsInterval> intervals) {
  os << "n,lower,upper,width\n";
  char buf[128];
  for (std::size_t n = 0; n < intervals.size(); ++n) {
    const CsInterval& iv = intervals[n];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", n, iv.lower, iv.upper, iv.width());
    os << buf;
  }
}

inline void write_lcb_csv(std::ostream& os, std::span<const LcbRow> rows) {
  os << "x,fraction\n";
  char buf[96];
  for (const LcbRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", r.x, r.fraction);
    os << buf;
  }
}

}  // namespace horizon
