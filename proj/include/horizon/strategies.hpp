#pragma once

// Predictable betting policies. A BetRule maps the past (WealthState) plus
// its own auxiliary stream to a bet; SingleTrack wraps a rule into a
// Strategy, HedgeStrategy mixes K epsilon-greedy tracks.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "horizon/core.hpp"
#include "horizon/random.hpp"
#include "horizon/ratefun.hpp"

namespace horizon {

// clip(S/V, safe range), 0 while V = 0.
inline double empirical_kelly(const WealthState& state, const NullSpec& spec) {
  if (state.v_sum == 0.0) return 0.0;
  return spec.bet_range().clip(state.s_sum / state.v_sum);
}

// All-in bet in the direction of sign(mean - m); 0 without data or when the
// mean sits exactly on m.
inline double endpoint_bet(const WealthState& state, const NullSpec& spec) {
  const BetRange range = spec.bet_range();
  switch (state.mean_sign()) {
    case 1: return range.hi;
    case -1: return range.lo;
    default: return 0.0;
  }
}

// Aggressiveness schedule: eps_t = 0 before eta*N, then ((t - eta N)/((1-eta) N))^q up to 1 at N.
struct Schedule {
  double onset = 0.5;  // eta in [0,1)
  int trend = 1;       // q: 1 linear, 2 quadratic
  int horizon = 100;

  double epsilon(int t) const {
    const double start = onset * horizon;
    if (t < start) return 0.0;
    const double frac = (t - start) / ((1.0 - onset) * horizon);
    return std::min(1.0, std::pow(frac, trend));
  }
};

// The K = 6 grid eta in {0.25, 0.5, 0.75} x q in {1, 2}.
inline std::vector<Schedule> default_schedules(int horizon) {
  std::vector<Schedule> out;
  for (double eta : {0.25, 0.50, 0.75}) {
    for (int q : {1, 2}) out.push_back(Schedule{eta, q, horizon});
  }
  return out;
}

// Mixed-strike rule for the bet at step state.t + 1: endpoint with
// probability eps, empirical Kelly otherwise. `coin` is uniform on [0,1).
inline Decision eps_greedy_bet(const WealthState& state, const NullSpec& spec, const Schedule& schedule,
                               double coin) {
  const double eps = schedule.epsilon(state.t + 1);
  if (coin < eps) return Decision{endpoint_bet(state, spec), Action::all_in};
  return Decision{empirical_kelly(state, spec), Action::kelly};
}

// Two-sided wrapper around a nonnegative magnitude: clip(sign(mean - m) * magnitude).
inline double sign_adapted_bet(double magnitude, const WealthState& state, const NullSpec& spec) {
  return spec.bet_range().clip(state.mean_sign() * std::abs(magnitude));
}

inline double population_kelly(const FiniteDist& dist, const NullSpec& spec) {
  return kelly_solve(dist, spec.m(), spec.bet_range());
}

// log((1/K) sum_k exp(y_k)).
inline double hedge_mixture(std::span<const double> track_log_wealth) {
  double top = -std::numeric_limits<double>::infinity();
  for (double y : track_log_wealth) top = std::max(top, y);
  double s = 0.0;
  for (double y : track_log_wealth) s += std::exp(y - top);
  return top + std::log(s) - std::log(static_cast<double>(track_log_wealth.size()));
}

// Bet for one of the three discrete actions.
inline double action_bet(Action action, const WealthState& state, const NullSpec& spec) {
  switch (action) {
    case Action::half_kelly: return 0.5 * empirical_kelly(state, spec);
    case Action::kelly: return empirical_kelly(state, spec);
    case Action::all_in: return endpoint_bet(state, spec);
    case Action::none: break;
  }
  return 0.0;
}

// Stand-in magnitude for the two-sided baseline (not the original STaR rule):
// the smallest bet whose second-order growth estimate a*g - a^2 v/2 meets the
// required per-step drift, or the endpoint when no bet does.
inline double required_growth_magnitude(const WealthState& state, const NullSpec& spec) {
  if (state.t == 0 || state.v_sum == 0.0) return 0.0;
  const int remaining = spec.horizon() - state.t;
  const double need = (spec.threshold() - state.log_wealth) / std::max(remaining, 1);
  if (need <= 0.0) return 0.0;
  const double g = std::abs(state.s_sum) / state.t;
  const double v = state.v_sum / state.t;
  const double disc = g * g - 2.0 * v * need;
  const BetRange range = spec.bet_range();
  const double cap = state.mean_sign() > 0 ? range.hi : -range.lo;
  if (disc < 0.0) return cap;
  return std::min(cap, (g - std::sqrt(disc)) / v);
}

class BetRule {
 public:
  virtual ~BetRule() = default;
  virtual Decision bet(const WealthState& state, const NullSpec& spec, Rng& aux) = 0;
};

class ZeroRule final : public BetRule {
 public:
  Decision bet(const WealthState&, const NullSpec&, Rng&) override { return {}; }
};

class ConstantRule final : public BetRule {
 public:
  explicit ConstantRule(double bet) : bet_(bet) {}
  Decision bet(const WealthState&, const NullSpec& spec, Rng&) override {
    return Decision{spec.bet_range().clip(bet_), Action::none};
  }

 private:
  double bet_;
};

class KellyRule final : public BetRule {
 public:
  explicit KellyRule(double fraction = 1.0) : fraction_(fraction) {}
  Decision bet(const WealthState& state, const NullSpec& spec, Rng&) override {
    const Action a = fraction_ == 1.0 ? Action::kelly : fraction_ == 0.5 ? Action::half_kelly : Action::none;
    return Decision{spec.bet_range().clip(fraction_ * empirical_kelly(state, spec)), a};
  }

 private:
  double fraction_;
};

class EndpointRule final : public BetRule {
 public:
  Decision bet(const WealthState& state, const NullSpec& spec, Rng&) override {
    return Decision{endpoint_bet(state, spec), Action::all_in};
  }
};

class EpsGreedyRule final : public BetRule {
 public:
  EpsGreedyRule(double onset, int trend) : onset_(onset), trend_(trend) {}
  Decision bet(const WealthState& state, const NullSpec& spec, Rng& aux) override {
    return eps_greedy_bet(state, spec, Schedule{onset_, trend_, spec.horizon()}, aux.uniform());
  }

 private:
  double onset_;
  int trend_;
};

class SignAdaptedRule final : public BetRule {
 public:
  using Magnitude = std::function<double(const WealthState&, const NullSpec&)>;
  explicit SignAdaptedRule(Magnitude magnitude = required_growth_magnitude) : magnitude_(std::move(magnitude)) {}
  Decision bet(const WealthState& state, const NullSpec& spec, Rng&) override {
    return Decision{sign_adapted_bet(magnitude_(state, spec), state, spec), Action::none};
  }

 private:
  Magnitude magnitude_;
};

// Uniformly random choice among the three discrete actions.
class RandomActionRule final : public BetRule {
 public:
  Decision bet(const WealthState& state, const NullSpec& spec, Rng& aux) override {
    const auto a = static_cast<Action>(aux.below(3));
    return Decision{action_bet(a, state, spec), a};
  }
};

// One wealth track driven by a BetRule.
class SingleTrack final : public Strategy {
 public:
  explicit SingleTrack(std::unique_ptr<BetRule> rule) : rule_(std::move(rule)) {}

  void reset(const NullSpec& spec, std::uint64_t aux_seed) override {
    spec_.emplace(spec);
    state_ = WealthState{};
    aux_ = Rng(derive_seed(aux_seed, StreamKind::exploration, 0));
    last_ = Decision{};
  }

  Decision decide() override {
    last_ = rule_->bet(state_, *spec_, aux_);
    last_.bet = spec_->bet_range().clip(last_.bet);
    return last_;
  }

  void observe(double x) override { state_ = wealth_update(state_, last_.bet, x, *spec_); }

  double log_wealth() const override { return state_.log_wealth; }
  const WealthState& state() const override { return state_; }

 private:
  std::unique_ptr<BetRule> rule_;
  std::optional<NullSpec> spec_;
  WealthState state_;
  Rng aux_;
  Decision last_;
};

// Uniform capital split over K epsilon-greedy schedules. Stopping uses the
// mixture wealth; each track has its own coin stream.
class HedgeStrategy final : public Strategy {
 public:
  // (onset, trend) pairs; horizons are filled in at reset.
  explicit HedgeStrategy(std::vector<Schedule> schedules = default_schedules(1)) : schedules_(std::move(schedules)) {}

  void reset(const NullSpec& spec, std::uint64_t aux_seed) override {
    spec_.emplace(spec);
    state_ = WealthState{};
    const std::size_t k = schedules_.size();
    tracks_.assign(k, 0.0);
    bets_.assign(k, 0.0);
    coins_.clear();
    for (std::size_t i = 0; i < k; ++i) {
      schedules_[i].horizon = spec.horizon();
      coins_.emplace_back(derive_seed(aux_seed, StreamKind::schedule_track, i));
    }
  }

  Decision decide() override {
    double num = 0.0, den = 0.0;
    const double top = *std::max_element(tracks_.begin(), tracks_.end());
    for (std::size_t i = 0; i < schedules_.size(); ++i) {
      bets_[i] = eps_greedy_bet(state_, *spec_, schedules_[i], coins_[i].uniform()).bet;
      const double w = std::exp(tracks_[i] - top);
      num += w * bets_[i];
      den += w;
    }
    // wealth-weighted average: the single bet equivalent to the mixture
    return Decision{num / den, Action::none};
  }

  void observe(double x) override {
    const double m = spec_->m();
    for (std::size_t i = 0; i < tracks_.size(); ++i) tracks_[i] += log_payoff(bets_[i], x, m);
    state_ = wealth_update(state_, 0.0, x, *spec_);
    state_.log_wealth = hedge_mixture(tracks_);
  }

  double log_wealth() const override { return state_.log_wealth; }
  const WealthState& state() const override { return state_; }
  std::span<const double> track_log_wealth() const { return tracks_; }
  std::size_t size() const { return schedules_.size(); }

 private:
  std::vector<Schedule> schedules_;
  std::optional<NullSpec> spec_;
  WealthState state_;
  std::vector<double> tracks_;
  std::vector<double> bets_;
  std::vector<Rng> coins_;
};

}  // namespace horizon
