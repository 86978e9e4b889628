#pragma once

// Predictable 22-slot state vector for the Q-network. Everything is computed
// from the summary statistics of the past observations and the current
// log-wealth, never from the observation about to be drawn.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "horizon/core.hpp"
#include "horizon/strategies.hpp"

namespace horizon::dqn {

inline constexpr std::size_t kFeatureCount = 22;
inline constexpr double kFeatureClamp = 10.0;
inline constexpr double kSnrRegularizer = 1e-6;
inline constexpr int kFeatureSchemaVersion = 1;

using FeatureVector = std::array<double, kFeatureCount>;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "gap",           "abs_gap",      "dist_to_threshold", "required_drift", "remaining_frac",
    "var_about_m",   "var_central",  "snr_gap",           "kelly_bet",      "endpoint_bet",
    "endpoint_minus_kelly", "growth_kelly", "growth_endpoint", "growth_advantage", "skewness",
    "excess_kurtosis", "log_conc",   "log_wealth",        "log_horizon",    "null_mean",
    "time_frac",     "no_variance"};

// FNV-1a over the version and the ordered slot names.
inline std::uint64_t feature_schema_hash() {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= static_cast<unsigned char>(';');
    h *= 1099511628211ULL;
  };
  mix("v" + std::to_string(kFeatureSchemaVersion));
  for (std::string_view name : kFeatureNames) mix(name);
  return h;
}

inline FeatureVector features(const WealthState& s, const NullSpec& spec) {
  const double m = spec.m();
  const double b = spec.threshold();
  const int N = spec.horizon();
  const double t = s.t;
  const double y = s.log_wealth;

  double gap = 0.0, var_m = 0.0, var_c = 0.0, skew = 0.0, kurt = 0.0, log_conc = 0.0;
  if (s.t > 0) {
    const double mu = s.raw_moments[0] / t;
    const double e2 = s.raw_moments[1] / t;
    const double e3 = s.raw_moments[2] / t;
    const double e4 = s.raw_moments[3] / t;
    gap = mu - m;
    var_m = s.v_sum / t;
    var_c = std::max(0.0, e2 - mu * mu);
    if (var_c > 1e-12) {
      const double m3 = e3 - 3.0 * mu * e2 + 2.0 * mu * mu * mu;
      const double m4 = e4 - 4.0 * mu * e3 + 6.0 * mu * mu * e2 - 3.0 * mu * mu * mu * mu;
      skew = m3 / std::pow(var_c, 1.5);
      kurt = m4 / (var_c * var_c) - 3.0;
      const double conc = mu * (1.0 - mu) / var_c - 1.0;
      if (conc > 0.0) log_conc = std::log(conc);
    }
  }

  const double kelly = empirical_kelly(s, spec);
  const double endpoint = endpoint_bet(s, spec);
  const double drift = s.t > 0 ? s.s_sum / t : 0.0;
  auto growth = [&](double bet) { return bet * drift - 0.5 * bet * bet * var_m; };
  const double g_kelly = growth(kelly);
  const double g_end = growth(endpoint);

  FeatureVector f{};
  f[0] = gap;
  f[1] = std::abs(gap);
  f[2] = b > 0.0 ? (b - y) / b : 0.0;
  f[3] = (b - y) / std::max(N - s.t, 1);
  f[4] = N > 1 ? (N - 1.0 - t) / (N - 1.0) : 0.0;
  f[5] = var_m;
  f[6] = var_c;
  f[7] = gap / std::sqrt(var_c + kSnrRegularizer);
  f[8] = kelly;
  f[9] = endpoint;
  f[10] = endpoint - kelly;
  f[11] = g_kelly;
  f[12] = g_end;
  f[13] = g_end - g_kelly;
  f[14] = skew;
  f[15] = kurt;
  f[16] = log_conc;
  f[17] = y;
  f[18] = std::log(static_cast<double>(N));
  f[19] = m;
  f[20] = t / N;
  f[21] = s.v_sum == 0.0 ? 1.0 : 0.0;
  for (double& v : f) v = std::isnan(v) ? 0.0 : std::clamp(v, -kFeatureClamp, kFeatureClamp);
  return f;
}

}  // namespace horizon::dqn
