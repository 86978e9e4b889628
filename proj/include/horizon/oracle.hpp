#pragma once

// Exact finite-horizon computations: first-passage probabilities for
// constant bets, the backward-induction Bellman solve over a (t, log-wealth)
// grid, phase-diagram export, and finite-alphabet Sanov quantities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "horizon/core.hpp"
#include "horizon/error.hpp"
#include "horizon/ratefun.hpp"
#include "horizon/strategies.hpp"

namespace horizon {

struct HitProbability {
  double probability = 0.0;
  double lattice_step = 0.0;  // 0 when the computation is exact
};

// P(exists k <= T : y0 + sum_{i<=k} h(bet, X_i) >= b) for i.i.d. X ~ dist.
// Two-atom laws are solved exactly over (step, success count); larger
// supports use a rounded log-wealth lattice of spacing `lattice_step`
// (default 1e-4 of the payoff span).
inline HitProbability hit_prob_exact(const FiniteDist& dist, double bet, double m, double y0, double b, int T,
                                     std::optional<double> lattice_step = std::nullopt) {
  if (T < 0) throw DomainError("hit_prob_exact needs T >= 0");
  if (y0 >= b) return {1.0, 0.0};
  if (T == 0) return {0.0, 0.0};

  std::vector<double> hv(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) hv[i] = h(bet, dist.atoms()[i], m);
  const double top = *std::max_element(hv.begin(), hv.end());
  if (top <= 0.0) return {0.0, 0.0};

  if (dist.size() == 1) {
    for (int k = 1; k <= T; ++k) {
      if (y0 + k * hv[0] >= b) return {1.0, 0.0};
    }
    return {0.0, 0.0};
  }

  if (dist.size() == 2) {
    const double p0 = dist.probs()[0], p1 = dist.probs()[1];
    std::vector<double> alive(static_cast<std::size_t>(T) + 2, 0.0), next(alive.size(), 0.0);
    alive[0] = 1.0;
    double hit = 0.0;
    for (int j = 1; j <= T; ++j) {
      std::fill(next.begin(), next.end(), 0.0);
      for (int s = 0; s < j; ++s) {
        next[s] += alive[s] * p0;
        next[s + 1] += alive[s] * p1;
      }
      for (int s = 0; s <= j; ++s) {
        if (next[s] == 0.0) continue;
        const double y = y0 + s * hv[1] + (j - s) * hv[0];
        if (y >= b) {
          hit += next[s];
          next[s] = 0.0;
        }
      }
      std::swap(alive, next);
    }
    return {hit, 0.0};
  }

  const double lo_h = *std::min_element(hv.begin(), hv.end());
  const double step = lattice_step.value_or(1e-4 * (top - lo_h));
  if (!(step > 0.0)) throw DomainError("lattice step must be positive");
  std::vector<long> inc(hv.size());
  for (std::size_t i = 0; i < hv.size(); ++i) inc[i] = std::lround(hv[i] / step);
  const long kmax = *std::max_element(inc.begin(), inc.end());
  if (kmax <= 0) return {0.0, step};
  const long target = static_cast<long>(std::ceil((b - y0) / step - 1e-9));
  // Positions below target - T*kmax can never reach the threshold.
  const long base = target - static_cast<long>(T) * kmax;
  const std::size_t width = static_cast<std::size_t>(target - base);
  std::vector<double> alive(width, 0.0), next(width, 0.0);
  alive[static_cast<std::size_t>(-base)] = 1.0;
  double hit = 0.0;
  for (int j = 1; j <= T; ++j) {
    std::fill(next.begin(), next.end(), 0.0);
    const long floor_pos = target - static_cast<long>(T - j) * kmax;
    for (std::size_t c = 0; c < width; ++c) {
      const double mass = alive[c];
      if (mass == 0.0) continue;
      const long pos = base + static_cast<long>(c);
      for (std::size_t i = 0; i < inc.size(); ++i) {
        const long np = pos + inc[i];
        const double w = mass * dist.probs()[i];
        if (np >= target) {
          hit += w;
        } else if (np >= floor_pos) {
          next[static_cast<std::size_t>(np - base)] += w;
        }
      }
    }
    std::swap(alive, next);
  }
  return {hit, step};
}

struct ActionChoice {
  Action tag = Action::none;
  double bet = 0.0;
};

// Resolve action rules against the population law: Kelly is the population
// Kelly bet, all-in the safe-range endpoint facing the mean.
inline std::vector<ActionChoice> resolve_actions(const FiniteDist& dist, const NullSpec& spec,
                                                 std::span<const Action> rules) {
  const double kelly = population_kelly(dist, spec);
  const BetRange range = spec.bet_range();
  const double gap = dist.mean() - spec.m();
  const double all_in = gap > 0.0 ? range.hi : gap < 0.0 ? range.lo : 0.0;
  std::vector<ActionChoice> out;
  for (Action a : rules) {
    switch (a) {
      case Action::half_kelly: out.push_back({a, 0.5 * kelly}); break;
      case Action::kelly: out.push_back({a, kelly}); break;
      case Action::all_in: out.push_back({a, all_in}); break;
      case Action::none: throw UsageError("action rule 'none' cannot be resolved");
    }
  }
  return out;
}

inline std::vector<ActionChoice> resolve_default_actions(const FiniteDist& dist, const NullSpec& spec) {
  const Action rules[] = {Action::half_kelly, Action::kelly, Action::all_in};
  return resolve_actions(dist, spec, rules);
}

struct GridConfig {
  double step = 0.01;
  std::optional<double> y_lo;  // default b - N * max h over the action set - margin
  std::optional<double> y_hi;  // default b + margin
  double margin = 1.0;
};

// Value and argmax tables of the finite-horizon Bellman recursion.
struct DpGrid {
  int horizon = 0;
  double threshold = 0.0;
  double y_lo = 0.0;
  double step = 0.01;
  std::size_t ny = 0;
  std::vector<ActionChoice> actions;  // sorted least aggressive first
  std::vector<double> values;         // (horizon + 1) x ny
  std::vector<std::int8_t> best;      // horizon x ny, index into actions
  double interpolation_error = 0.0;   // largest jump between adjacent nodes
  bool coarse = false;                // interpolation_error > 1e-3

  double y(std::size_t j) const { return y_lo + static_cast<double>(j) * step; }
  double value_at(int t, std::size_t j) const { return values[static_cast<std::size_t>(t) * ny + j]; }
  const ActionChoice& action_at(int t, std::size_t j) const {
    return actions[static_cast<std::size_t>(best[static_cast<std::size_t>(t) * ny + j])];
  }

  // V_t(y) by linear interpolation; 1 at or above the threshold, clamped below the grid.
  double value(int t, double yq) const {
    if (yq >= threshold) return 1.0;
    const double pos = (yq - y_lo) / step;
    if (pos <= 0.0) return value_at(t, 0);
    const auto j = static_cast<std::size_t>(pos);
    if (j + 1 >= ny) return value_at(t, ny - 1);
    const double w = pos - static_cast<double>(j);
    return (1.0 - w) * value_at(t, j) + w * value_at(t, j + 1);
  }
};

inline DpGrid bellman_solve(const FiniteDist& dist, const NullSpec& spec, std::vector<ActionChoice> actions,
                            const GridConfig& config = {}) {
  if (actions.empty()) throw UsageError("bellman_solve needs at least one action");
  if (!(config.step > 0.0)) throw UsageError("grid step must be positive");
  std::stable_sort(actions.begin(), actions.end(),
                   [](const ActionChoice& a, const ActionChoice& c) { return std::abs(a.bet) < std::abs(c.bet); });

  const int N = spec.horizon();
  const double b = spec.threshold();
  const double m = spec.m();
  const std::size_t K = actions.size();
  const std::size_t A = dist.size();

  std::vector<std::vector<double>> shift(K, std::vector<double>(A));
  double max_up = 0.0;
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t i = 0; i < A; ++i) {
      shift[a][i] = h(actions[a].bet, dist.atoms()[i], m);
      max_up = std::max(max_up, shift[a][i]);
    }
  }

  DpGrid g;
  g.horizon = N;
  g.threshold = b;
  g.step = config.step;
  // Below b - N * (largest one-step gain) the threshold is out of reach.
  const double lo_raw = config.y_lo.value_or(b - N * max_up - std::max(config.margin, config.step));
  const double hi_raw = std::max(config.y_hi.value_or(b + config.margin), b + config.step);
  g.y_lo = config.step * std::floor(lo_raw / config.step);  // keeps y = 0 on the grid
  g.ny = static_cast<std::size_t>(std::ceil((hi_raw - g.y_lo) / config.step)) + 1;
  g.actions = actions;
  const std::size_t ny = g.ny;
  g.values.assign(static_cast<std::size_t>(N + 1) * ny, 0.0);
  g.best.assign(static_cast<std::size_t>(N) * ny, 0);

  // first node at or above the threshold
  std::size_t won = 0;
  while (won < ny && g.y(won) < b) ++won;

  for (std::size_t j = won; j < ny; ++j) g.values[static_cast<std::size_t>(N) * ny + j] = 1.0;

  std::vector<double> acc(ny), best_val(ny);
  for (int t = N - 1; t >= 0; --t) {
    const double* next = &g.values[static_cast<std::size_t>(t + 1) * ny];
    double* cur = &g.values[static_cast<std::size_t>(t) * ny];
    std::int8_t* arg = &g.best[static_cast<std::size_t>(t) * ny];
    std::fill(best_val.begin(), best_val.end(), -1.0);
    for (std::size_t a = 0; a < K; ++a) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < A; ++i) {
        const double p = dist.probs()[i];
        const double s = shift[a][i];
        const double off = s / g.step;
        const long k = static_cast<long>(std::floor(off));
        const double w = off - static_cast<double>(k);
        // nodes whose successor crosses b
        long cut = static_cast<long>(std::ceil((b - s - g.y_lo) / g.step));
        cut = std::clamp(cut, 0L, static_cast<long>(ny));
        while (cut > 0 && g.y(static_cast<std::size_t>(cut - 1)) + s >= b) --cut;
        while (cut < static_cast<long>(ny) && g.y(static_cast<std::size_t>(cut)) + s < b) ++cut;
        // successor below the grid: clamp; inside: interpolate; above the last node: clamp
        const long inside_lo = std::clamp(-k, 0L, cut);
        const long inside_hi = std::clamp(static_cast<long>(ny) - 1 - k, inside_lo, cut);
        for (long j = 0; j < inside_lo; ++j) acc[static_cast<std::size_t>(j)] += p * next[0];
        const double pa = p * (1.0 - w), pb = p * w;
        double* out = acc.data();
        for (long j = inside_lo; j < inside_hi; ++j) out[j] += pa * next[j + k] + pb * next[j + k + 1];
        for (long j = inside_hi; j < cut; ++j) acc[static_cast<std::size_t>(j)] += p * next[ny - 1];
        for (long j = cut; j < static_cast<long>(ny); ++j) acc[static_cast<std::size_t>(j)] += p;
      }
      for (std::size_t j = 0; j < ny; ++j) {
        if (acc[j] > best_val[j] + 1e-12) {
          best_val[j] = acc[j];
          arg[j] = static_cast<std::int8_t>(a);
        }
      }
    }
    for (std::size_t j = 0; j < ny; ++j) cur[j] = std::min(1.0, best_val[j]);
    for (std::size_t j = won; j < ny; ++j) {
      cur[j] = 1.0;
      arg[j] = 0;
    }
  }

  for (int t = 0; t < N; ++t) {
    const double* row = &g.values[static_cast<std::size_t>(t) * ny];
    for (std::size_t j = 0; j + 1 < won && j + 1 < ny; ++j) {
      g.interpolation_error = std::max(g.interpolation_error, std::abs(row[j + 1] - row[j]));
    }
  }
  g.coarse = g.interpolation_error > 1e-3;
  return g;
}

inline constexpr double kHopelessValue = 1e-4;

struct PhaseRow {
  int t = 0;
  double y = 0.0;
  double value = 0.0;
  Action action = Action::none;
  bool hopeless = false;
};

struct PhaseExportOptions {
  std::optional<double> y_min;
  std::optional<double> y_max;
  std::size_t stride = 1;
};

// One row per (t, y) cell for t < N: value, optimal action, hopeless flag.
inline std::vector<PhaseRow> phase_export(const DpGrid& grid, const PhaseExportOptions& opts = {}) {
  std::vector<PhaseRow> rows;
  const std::size_t stride = std::max<std::size_t>(opts.stride, 1);
  for (int t = 0; t < grid.horizon; ++t) {
    for (std::size_t j = 0; j < grid.ny; j += stride) {
      const double y = grid.y(j);
      if (opts.y_min && y < *opts.y_min - 1e-12) continue;
      if (opts.y_max && y > *opts.y_max + 1e-12) continue;
      const double v = grid.value_at(t, j);
      rows.push_back(PhaseRow{t, y, v, grid.action_at(t, j).tag, v < kHopelessValue});
    }
  }
  return rows;
}

inline void write_phase_csv(std::ostream& os, std::span<const PhaseRow> rows) {
  os << "t,y,value,action,hopeless\n";
  char buf[160];
  for (const PhaseRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.10g,%s,%d\n", r.t, r.y, r.value, action_name(r.action),
                  r.hopeless ? 1 : 0);
    os << buf;
  }
}

namespace detail {

template <class Visit>
void for_each_type(std::size_t k, int n, Visit&& visit) {
  std::vector<int> counts(k, 0);
  auto rec = [&](auto&& self, std::size_t i, int left) -> void {
    if (i + 1 == k) {
      counts[i] = left;
      visit(std::span<const int>(counts));
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[i] = c;
      self(self, i + 1, left - c);
    }
  };
  rec(rec, 0, n);
}

inline bool type_reaches(std::span<const int> counts, std::span<const double> hv, int n, double r) {
  double s = 0.0;
  for (std::size_t i = 0; i < hv.size(); ++i) s += counts[i] * hv[i];
  return s >= n * r - 1e-12 * std::max(1.0, std::abs(n * r));
}

}  // namespace detail

// P((1/n) sum h(bet, X_i) >= r), summed exactly over types.
inline double block_crossing_exact(const FiniteDist& dist, double bet, double m, double r, int n) {
  if (n < 1) throw DomainError("block_crossing_exact needs n >= 1");
  const auto hv = detail::payoffs(dist, bet, m);
  double total = 0.0;
  detail::for_each_type(dist.size(), n, [&](std::span<const int> c) {
    if (!detail::type_reaches(c, hv, n, r)) return;
    double lp = std::lgamma(n + 1.0);
    for (std::size_t i = 0; i < c.size(); ++i) lp += c[i] * std::log(dist.probs()[i]) - std::lgamma(c[i] + 1.0);
    total += std::exp(lp);
  });
  return total;
}

struct SanovBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Finite-alphabet Sanov bounds for the event {E_{P_n}[h] >= r}:
// (n+1)^-k exp(-n min_{types} D) <= P <= (n+1)^k exp(-n I+).
inline SanovBounds sanov_bounds(const FiniteDist& dist, double bet, double m, double r, int n) {
  if (n < 1) throw DomainError("sanov_bounds needs n >= 1");
  const auto hv = detail::payoffs(dist, bet, m);
  const double k = static_cast<double>(dist.size());
  double best = std::numeric_limits<double>::infinity();
  detail::for_each_type(dist.size(), n, [&](std::span<const int> c) {
    if (!detail::type_reaches(c, hv, n, r)) return;
    double d = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i] == 0) continue;
      const double q = static_cast<double>(c[i]) / n;
      d += q * std::log(q / dist.probs()[i]);
    }
    best = std::min(best, d);
  });
  SanovBounds out;
  out.lower = std::isinf(best) ? 0.0 : std::exp(-k * std::log(n + 1.0) - n * best);
  const RateResult rate = rate_plus(dist, bet, m, r);
  out.upper = rate.is_infinite() ? 0.0 : std::min(1.0, std::exp(k * std::log(n + 1.0) - n * rate.value));
  return out;
}

}  // namespace horizon
