#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "horizon/error.hpp"

namespace horizon {

// Closed interval of admissible bets.
struct BetRange {
  double lo = 0.0;
  double hi = 0.0;

  double clip(double bet) const {
    if (std::isnan(bet)) return 0.0;
    return std::clamp(bet, lo, hi);
  }
  bool contains(double bet) const { return bet >= lo && bet <= hi; }
  double width() const { return hi - lo; }
};

// The testing problem H0: E[X] = m at level alpha with deadline N.
class NullSpec {
 public:
  NullSpec(double m, double alpha, int horizon, double clip_eps = 1e-3)
      : m_(m), alpha_(alpha), horizon_(horizon), clip_eps_(clip_eps) {
    if (!(m > 0.0 && m < 1.0)) {
      throw DomainError("null mean must lie strictly inside (0,1), got " + std::to_string(m));
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
      throw DomainError("alpha must lie in (0,1], got " + std::to_string(alpha));
    }
    if (horizon < 1) throw DomainError("horizon must be a positive integer");
    if (!(clip_eps >= 0.0 && clip_eps < 1.0)) {
      throw DomainError("clip_eps must lie in [0,1), got " + std::to_string(clip_eps));
    }
  }

  double m() const { return m_; }
  double alpha() const { return alpha_; }
  int horizon() const { return horizon_; }
  double clip_eps() const { return clip_eps_; }

  // b = log(1/alpha), the log-wealth rejection threshold.
  double threshold() const { return -std::log(alpha_); }

  // Safe range: 1 + bet*(x - m) >= clip_eps for every x in [0,1].
  BetRange bet_range() const {
    return BetRange{-(1.0 - clip_eps_) / (1.0 - m_), (1.0 - clip_eps_) / m_};
  }

 private:
  double m_;
  double alpha_;
  int horizon_;
  double clip_eps_;
};

inline BetRange bet_range(const NullSpec& spec) { return spec.bet_range(); }

// h_m(bet, x) = log(1 + bet*(x - m)).
inline double log_payoff(double bet, double x, double m) {
  const double z = bet * (x - m);
  if (!(1.0 + z > 0.0)) {
    throw DomainError("nonpositive payoff 1 + bet*(x-m) for bet=" + std::to_string(bet) +
                      ", x=" + std::to_string(x));
  }
  return std::log1p(z);
}

// Everything a predictable strategy may look at before the next observation.
struct WealthState {
  int t = 0;                 // observations consumed
  double log_wealth = 0.0;   // Y_t
  double s_sum = 0.0;        // sum (x_i - m)
  double v_sum = 0.0;        // sum (x_i - m)^2
  std::array<double, 4> raw_moments{};  // sum x, x^2, x^3, x^4

  std::optional<double> mean() const {
    if (t == 0) return std::nullopt;
    return raw_moments[0] / t;
  }

  // Sign of (mean - m); 0 before any data or when the mean equals m exactly.
  int mean_sign() const {
    if (t == 0 || s_sum == 0.0) return 0;
    return s_sum > 0.0 ? 1 : -1;
  }
};

// Advance the wealth process by one observation. Out-of-range bets are
// clipped to the safe range.
inline WealthState wealth_update(const WealthState& state, double bet, double x,
                                 const NullSpec& spec) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("observation outside [0,1]: " + std::to_string(x));
  }
  const double m = spec.m();
  const double lambda = spec.bet_range().clip(bet);
  WealthState next = state;
  next.log_wealth = state.log_wealth + log_payoff(lambda, x, m);
  const double d = x - m;
  next.s_sum += d;
  next.v_sum += d * d;
  const double x2 = x * x;
  next.raw_moments[0] += x;
  next.raw_moments[1] += x2;
  next.raw_moments[2] += x2 * x;
  next.raw_moments[3] += x2 * x2;
  next.t += 1;
  return next;
}

// Discrete action tags shared by the oracle, the DQN and diagnostics.
enum class Action : int { none = -1, half_kelly = 0, kelly = 1, all_in = 2 };

inline const char* action_name(Action a) {
  switch (a) {
    case Action::half_kelly: return "half_kelly";
    case Action::kelly: return "kelly";
    case Action::all_in: return "all_in";
    case Action::none: break;
  }
  return "none";
}

struct Decision {
  double bet = 0.0;
  Action action = Action::none;
};

// A predictable betting strategy that owns its wealth process. decide() sees
// only the past; observe() then applies the new observation to the bet just
// decided. Implementations may carry several internal tracks (hedging).
class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual void reset(const NullSpec& spec, std::uint64_t aux_seed) = 0;
  virtual Decision decide() = 0;
  virtual void observe(double x) = 0;

  // Log-wealth used for the stopping rule.
  virtual double log_wealth() const = 0;

  // Summary statistics of the data seen so far.
  virtual const WealthState& state() const = 0;
};

struct StopOutcome {
  bool rejected = false;
  std::optional<int> hit_time;  // first t in 1..N with Y_t >= b
  double final_log_wealth = 0.0;
};

struct StepRecord {
  double bet = 0.0;
  Action action = Action::none;
  double log_wealth = 0.0;  // Y_t after the step
};

struct EpisodeResult {
  StopOutcome outcome;
  std::vector<StepRecord> trajectory;  // empty unless recording was requested
};

// Run one test until the first crossing of b or the deadline. `next_obs` is
// any callable returning the next observation in [0,1].
template <class Source>
EpisodeResult run_episode(const NullSpec& spec, Strategy& strategy, Source&& next_obs,
                          std::uint64_t aux_seed, bool record = false) {
  strategy.reset(spec, aux_seed);
  EpisodeResult result;
  const double b = spec.threshold();
  const int n = spec.horizon();
  if (record) result.trajectory.reserve(static_cast<std::size_t>(n));
  for (int t = 1; t <= n; ++t) {
    const Decision d = strategy.decide();
    const double x = next_obs();
    strategy.observe(x);
    const double y = strategy.log_wealth();
    if (record) result.trajectory.push_back(StepRecord{d.bet, d.action, y});
    if (y >= b) {
      result.outcome.rejected = true;
      result.outcome.hit_time = t;
      result.outcome.final_log_wealth = y;
      return result;
    }
  }
  result.outcome.final_log_wealth = strategy.log_wealth();
  return result;
}

}  // namespace horizon
