#pragma once

// Growth-rate and large-deviation toolkit for finite-support data.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "horizon/core.hpp"
#include "horizon/error.hpp"

namespace horizon {

// Distribution on finitely many atoms in [0,1].
class FiniteDist {
 public:
  FiniteDist(std::vector<double> atoms, std::vector<double> probs)
      : atoms_(std::move(atoms)), probs_(std::move(probs)) {
    if (atoms_.empty()) throw DomainError("FiniteDist needs at least one atom");
    if (atoms_.size() != probs_.size()) throw DomainError("FiniteDist atoms/probs size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (!(atoms_[i] >= 0.0 && atoms_[i] <= 1.0)) throw DomainError("FiniteDist atom outside [0,1]");
      if (i > 0 && !(atoms_[i] > atoms_[i - 1])) {
        throw DomainError("FiniteDist atoms must be strictly increasing");
      }
      if (!(probs_[i] > 0.0)) throw DomainError("FiniteDist probabilities must be positive");
      total += probs_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw DomainError("FiniteDist probabilities sum to " + std::to_string(total));
    }
  }

  static FiniteDist bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("Bernoulli p outside [0,1]");
    if (p == 0.0) return FiniteDist({0.0}, {1.0});
    if (p == 1.0) return FiniteDist({1.0}, {1.0});
    return FiniteDist({0.0, 1.0}, {1.0 - p, p});
  }

  static FiniteDist point_mass(double x) { return FiniteDist({x}, {1.0}); }

  std::size_t size() const { return atoms_.size(); }
  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& probs() const { return probs_; }
  double p_min() const { return *std::min_element(probs_.begin(), probs_.end()); }

  double mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += probs_[i] * atoms_[i];
    return s;
  }

  double variance() const {
    const double mu = mean();
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += probs_[i] * (atoms_[i] - mu) * (atoms_[i] - mu);
    return s;
  }

 private:
  std::vector<double> atoms_;
  std::vector<double> probs_;
};

// h_m(bet, x) with the domain check.
inline double h(double bet, double x, double m) { return log_payoff(bet, x, m); }

// L(bet) = E[h_m(bet, X)].
inline double growth(const FiniteDist& dist, double bet, double m) {
  double s = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) s += dist.probs()[i] * h(bet, dist.atoms()[i], m);
  return s;
}

inline double growth_derivative(const FiniteDist& dist, double bet, double m) {
  double s = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double d = dist.atoms()[i] - m;
    s += dist.probs()[i] * d / (1.0 + bet * d);
  }
  return s;
}

// Maximizer of the concave growth L over `range` by bisection on L'.
inline double kelly_solve(const FiniteDist& dist, double m, const BetRange& range) {
  bool degenerate = true;
  for (double x : dist.atoms()) degenerate = degenerate && (x == m);
  if (degenerate) return range.clip(0.0);

  double lo = range.lo;
  double hi = range.hi;
  if (growth_derivative(dist, lo, m) <= 0.0) return lo;
  if (growth_derivative(dist, hi, m) >= 0.0) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (growth_derivative(dist, mid, m) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Value of a KL projection; +infinity is a distinguished state.
struct RateResult {
  bool finite = true;
  double value = 0.0;
  double theta = 0.0;  // tilting parameter at the solution (0 when P is feasible)

  static RateResult infinite() { return RateResult{false, std::numeric_limits<double>::infinity(), 0.0}; }
  bool is_infinite() const { return !finite; }
};

namespace detail {

// log sum_i p_i exp(theta * h_i), computed around the largest exponent.
inline double log_mgf(std::span<const double> hv, std::span<const double> p, double theta) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : hv) top = std::max(top, theta * v);
  double s = 0.0;
  for (std::size_t i = 0; i < hv.size(); ++i) s += p[i] * std::exp(theta * hv[i] - top);
  return top + std::log(s);
}

inline double tilted_mean(std::span<const double> hv, std::span<const double> p, double theta) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : hv) top = std::max(top, theta * v);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < hv.size(); ++i) {
    const double w = p[i] * std::exp(theta * hv[i] - top);
    num += w * hv[i];
    den += w;
  }
  return num / den;
}

// inf { D(Q||P) : E_Q[h] >= r } over Q supported on the atoms.
inline RateResult upper_tail_rate(std::span<const double> hv, std::span<const double> p, double r) {
  double mean = 0.0;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hv.size(); ++i) {
    mean += p[i] * hv[i];
    top = std::max(top, hv[i]);
  }
  if (mean >= r) return RateResult{true, 0.0, 0.0};
  if (r > top) return RateResult::infinite();
  if (r == top) {
    double mass = 0.0;
    for (std::size_t i = 0; i < hv.size(); ++i) {
      if (hv[i] == top) mass += p[i];
    }
    return RateResult{true, -std::log(mass), std::numeric_limits<double>::infinity()};
  }

  double lo = 0.0;
  double hi = 1.0;
  while (tilted_mean(hv, p, hi) < r) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericalError("tilting parameter failed to bracket");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double e = tilted_mean(hv, p, mid);
    if (e < r) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::abs(e - r) <= 1e-13) {
      lo = hi = mid;
      break;
    }
  }
  const double theta = 0.5 * (lo + hi);
  const double value = theta * r - log_mgf(hv, p, theta);
  return RateResult{true, std::max(value, 0.0), theta};
}

inline std::vector<double> payoffs(const FiniteDist& dist, double bet, double m) {
  std::vector<double> hv(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) hv[i] = h(bet, dist.atoms()[i], m);
  return hv;
}

}  // namespace detail

// log E_P[exp(theta * h_m(bet, X))].
inline double log_mgf(const FiniteDist& dist, double bet, double m, double theta) {
  const auto hv = detail::payoffs(dist, bet, m);
  return detail::log_mgf(hv, dist.probs(), theta);
}

// Exponentially tilted law Q_theta(x) proportional to P(x) exp(theta h(bet, x)).
inline std::vector<double> tilt(const FiniteDist& dist, double bet, double m, double theta) {
  const auto hv = detail::payoffs(dist, bet, m);
  const double lm = detail::log_mgf(hv, dist.probs(), theta);
  std::vector<double> q(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) q[i] = dist.probs()[i] * std::exp(theta * hv[i] - lm);
  return q;
}

// I+(bet, r) = inf { D(Q||P) : E_Q[h_m(bet, X)] >= r }.
inline RateResult rate_plus(const FiniteDist& dist, double bet, double m, double r) {
  const auto hv = detail::payoffs(dist, bet, m);
  return detail::upper_tail_rate(hv, dist.probs(), r);
}

// I-(bet, r) = inf { D(Q||P) : E_Q[h_m(bet, X)] <= r }; theta is reported <= 0.
inline RateResult rate_minus(const FiniteDist& dist, double bet, double m, double r) {
  auto hv = detail::payoffs(dist, bet, m);
  for (double& v : hv) v = -v;
  RateResult res = detail::upper_tail_rate(hv, dist.probs(), -r);
  res.theta = -res.theta;
  return res;
}

inline double c_t_plus(int T, std::size_t k, double p_min) {
  if (T < 2) throw DomainError("c_t_plus needs T >= 2");
  const double t = T;
  const double kk = static_cast<double>(k);
  return (std::log(t / 2.0) + 2.0 * kk * std::log(t + 1.0)) / t + (kk / t) * (2.0 + std::log(t / p_min));
}

inline double c_t_minus(int T, std::size_t k, double p_min) {
  if (T < 2) throw DomainError("c_t_minus needs T >= 2");
  const double t = T;
  const double kk = static_cast<double>(k);
  return (std::log(t / 2.0) + 2.0 * kk * std::log(t + 1.0)) / t +
         (kk / t) * (2.0 + std::log(t / (2.0 * p_min)));
}

// C(n, k, p_min): cost of restricting a KL projection to n-types.
inline double quantization_bound(int n, std::size_t k, double p_min) {
  if (n < 1) throw DomainError("quantization_bound needs n >= 1");
  return (2.0 + std::log(n / p_min)) * static_cast<double>(k) / n;
}

// sup over bets in `range` and x in [0,1] of |h_m(bet, x)|. h is monotone in
// each argument, so the corners suffice.
inline double payoff_bound(const BetRange& range, double m) {
  double b = 0.0;
  for (double bet : {range.lo, range.hi}) {
    for (double x : {0.0, 1.0}) b = std::max(b, std::abs(h(bet, x, m)));
  }
  return b;
}

enum class Region { kelly_zone, behind_schedule, ahead_of_schedule, hopeless, already_won, indeterminate };

inline const char* region_name(Region r) {
  switch (r) {
    case Region::kelly_zone: return "kelly_zone";
    case Region::behind_schedule: return "behind_schedule";
    case Region::ahead_of_schedule: return "ahead_of_schedule";
    case Region::hopeless: return "hopeless";
    case Region::already_won: return "already_won";
    case Region::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

struct RegionParams {
  double delta = 0.1;
  double rho = 0.5;
  std::optional<BetRange> compact;  // defaults to the half of the safe range facing the mean
};

struct RegionReport {
  int T = 0;
  double r = 0.0;             // (b - y) / T
  double kelly_bet = 0.0;
  double L_max = 0.0;
  double B_K = 0.0;           // max over support of h(kelly, x)
  double B = 0.0;             // sup |h| over the compact range
  BetRange compact;
  double delta_big = 0.0;     // T L_max - (b - y)
  std::optional<double> eps_delta;            // L_max - max L(kelly +- delta) inside compact
  double kelly_threshold = 0.0;               // B sqrt(8 T log T)
  std::optional<double> deviation_threshold;  // rho eps T - B sqrt(8 T log 2)
  double r_minus = 0.0;                       // 2 (r - B_K / 2)
  bool deviation_suboptimal = false;          // delta_big <= deviation_threshold
  Region classification = Region::indeterminate;
  std::vector<Region> fired;
};

inline RegionReport classify_region(const FiniteDist& dist, const NullSpec& spec, int t, double y,
                                    const RegionParams& params = {}) {
  if (t >= spec.horizon()) throw DomainError("classify_region needs t < N");
  RegionReport rep;
  const double m = spec.m();
  const double b = spec.threshold();
  const BetRange safe = spec.bet_range();
  rep.T = spec.horizon() - t;
  rep.r = (b - y) / rep.T;
  rep.kelly_bet = kelly_solve(dist, m, safe);
  rep.L_max = growth(dist, rep.kelly_bet, m);
  rep.B_K = -std::numeric_limits<double>::infinity();
  for (double x : dist.atoms()) rep.B_K = std::max(rep.B_K, h(rep.kelly_bet, x, m));
  rep.compact = params.compact.value_or(dist.mean() > m ? BetRange{0.0, safe.hi} : BetRange{safe.lo, 0.0});
  rep.B = payoff_bound(rep.compact, m);
  rep.delta_big = rep.T * rep.L_max - (b - y);

  // Only the sides of the deviation set that intersect the compact range count.
  std::optional<double> worst;
  for (double side : {rep.kelly_bet - params.delta, rep.kelly_bet + params.delta}) {
    if (side < rep.compact.lo || side > rep.compact.hi) continue;
    const double l = growth(dist, side, m);
    worst = worst ? std::max(*worst, l) : l;
  }
  if (worst) rep.eps_delta = rep.L_max - *worst;

  const double Td = rep.T;
  rep.kelly_threshold = rep.B * std::sqrt(8.0 * Td * std::log(Td));
  if (rep.eps_delta) {
    rep.deviation_threshold = params.rho * *rep.eps_delta * Td - rep.B * std::sqrt(8.0 * Td * std::log(2.0));
    rep.deviation_suboptimal = rep.delta_big <= *rep.deviation_threshold;
  }
  rep.r_minus = 2.0 * (rep.r - 0.5 * rep.B_K);

  double best_step = -std::numeric_limits<double>::infinity();
  for (double bet : {safe.lo, safe.hi}) {
    for (double x : dist.atoms()) best_step = std::max(best_step, h(bet, x, m));
  }

  if (y >= b) rep.fired.push_back(Region::already_won);
  if (y < b && (b - y) > Td * best_step) rep.fired.push_back(Region::hopeless);
  if (rep.delta_big >= rep.kelly_threshold) rep.fired.push_back(Region::kelly_zone);
  if (rep.r > std::max(rep.L_max, 0.5 * rep.B_K)) rep.fired.push_back(Region::behind_schedule);
  if (0.5 * rep.B_K < rep.r && rep.r < rep.L_max) rep.fired.push_back(Region::ahead_of_schedule);
  rep.classification = rep.fired.empty() ? Region::indeterminate : rep.fired.front();
  if (rep.fired.empty()) rep.fired.push_back(Region::indeterminate);
  return rep;
}

}  // namespace horizon
