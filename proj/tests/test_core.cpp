#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "horizon/core.hpp"
#include "horizon/random.hpp"
#include "horizon/strategies.hpp"

using namespace horizon;

TEST(NullSpec, RejectsInvalidParameters) {
  EXPECT_THROW(NullSpec(0.0, 0.05, 10), DomainError);
  EXPECT_THROW(NullSpec(1.0, 0.05, 10), DomainError);
  EXPECT_THROW(NullSpec(0.5, 0.0, 10), DomainError);
  EXPECT_THROW(NullSpec(0.5, 1.5, 10), DomainError);
  EXPECT_THROW(NullSpec(0.5, 0.05, 0), DomainError);
  EXPECT_THROW(NullSpec(0.5, 0.05, 10, 1.0), DomainError);
  EXPECT_NO_THROW(NullSpec(0.5, 1.0, 1));
}

TEST(NullSpec, ThresholdIsLogInverseAlpha) {
  EXPECT_DOUBLE_EQ(NullSpec(0.5, 0.05, 10).threshold(), std::log(20.0));
  EXPECT_DOUBLE_EQ(NullSpec(0.5, 1.0, 10).threshold(), 0.0);
}

TEST(BetRange, SafeRangeEndpoints) {
  const BetRange r = NullSpec(0.2, 0.05, 10).bet_range();
  EXPECT_DOUBLE_EQ(r.lo, -(1.0 - 1e-3) / 0.8);
  EXPECT_DOUBLE_EQ(r.hi, (1.0 - 1e-3) / 0.2);
  // every bet in range keeps the payoff at least eps on [0,1]
  for (double bet : {r.lo, r.hi}) {
    for (double x : {0.0, 1.0}) EXPECT_GE(1.0 + bet * (x - 0.2), 1e-3 - 1e-15);
  }
}

TEST(BetRange, ClipHandlesNaNAndOutOfRange) {
  const BetRange r{-1.0, 2.0};
  EXPECT_EQ(r.clip(5.0), 2.0);
  EXPECT_EQ(r.clip(-5.0), -1.0);
  EXPECT_EQ(r.clip(std::nan("")), 0.0);
  EXPECT_EQ(r.clip(0.3), 0.3);
}

TEST(LogPayoff, ValuesAndDomain) {
  EXPECT_DOUBLE_EQ(log_payoff(0.0, 0.7, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(log_payoff(1.0, 1.0, 0.5), std::log(1.5));
  EXPECT_THROW(log_payoff(2.5, 0.0, 0.5), DomainError);
  EXPECT_THROW(log_payoff(2.0, 0.0, 0.5), DomainError);
}

TEST(WealthUpdate, AccumulatesStatistics) {
  const NullSpec spec(0.5, 0.05, 10);
  WealthState s;
  s = wealth_update(s, 1.0, 1.0, spec);
  s = wealth_update(s, 0.5, 0.2, spec);
  EXPECT_EQ(s.t, 2);
  EXPECT_NEAR(s.log_wealth, std::log(1.5) + std::log(1.0 + 0.5 * (0.2 - 0.5)), 1e-15);
  EXPECT_NEAR(s.s_sum, 0.5 - 0.3, 1e-15);
  EXPECT_NEAR(s.v_sum, 0.25 + 0.09, 1e-15);
  EXPECT_NEAR(s.raw_moments[0], 1.2, 1e-15);
  EXPECT_NEAR(s.raw_moments[1], 1.04, 1e-15);
  EXPECT_NEAR(s.raw_moments[2], 1.008, 1e-15);
  EXPECT_NEAR(s.raw_moments[3], 1.0016, 1e-15);
  EXPECT_NEAR(*s.mean(), 0.6, 1e-15);
  EXPECT_EQ(s.mean_sign(), 1);
}

TEST(WealthUpdate, RejectsObservationsOutsideUnitInterval) {
  const NullSpec spec(0.5, 0.05, 10);
  EXPECT_THROW(wealth_update(WealthState{}, 0.1, 1.01, spec), DomainError);
  EXPECT_THROW(wealth_update(WealthState{}, 0.1, -0.01, spec), DomainError);
  EXPECT_THROW(wealth_update(WealthState{}, 0.1, std::nan(""), spec), DomainError);
}

TEST(WealthUpdate, OversizedBetIsClipped) {
  const NullSpec spec(0.5, 0.05, 10);
  const WealthState s = wealth_update(WealthState{}, 100.0, 0.0, spec);
  EXPECT_NEAR(s.log_wealth, std::log(1e-3), 1e-12);
}

TEST(RunEpisode, StopsAtFirstCrossing) {
  const NullSpec spec(0.5, 0.05, 20);
  SingleTrack strategy(std::make_unique<ConstantRule>(10.0));
  const EpisodeResult r = run_episode(spec, strategy, [] { return 1.0; }, 1, true);
  // log(1 + 1.998 * 0.5) per step; b = log 20
  const double step = std::log(1.0 + 0.999);
  const int expected = static_cast<int>(std::ceil(std::log(20.0) / step));
  ASSERT_TRUE(r.outcome.rejected);
  EXPECT_EQ(*r.outcome.hit_time, expected);
  EXPECT_EQ(r.trajectory.size(), static_cast<std::size_t>(expected));
  EXPECT_NEAR(r.outcome.final_log_wealth, expected * step, 1e-12);
}

TEST(RunEpisode, DeadlineWithoutCrossing) {
  const NullSpec spec(0.5, 0.05, 3);
  SingleTrack strategy(std::make_unique<ConstantRule>(10.0));
  const EpisodeResult r = run_episode(spec, strategy, [] { return 1.0; }, 1);
  EXPECT_FALSE(r.outcome.rejected);
  EXPECT_FALSE(r.outcome.hit_time.has_value());
  EXPECT_NEAR(r.outcome.final_log_wealth, 3 * std::log(1.999), 1e-12);
}

TEST(RunEpisode, ZeroBetNeverRejects) {
  const NullSpec spec(0.3, 0.05, 50);
  SingleTrack strategy(std::make_unique<ZeroRule>());
  Rng rng(4);
  const EpisodeResult r = run_episode(spec, strategy, [&] { return rng.uniform(); }, 2);
  EXPECT_FALSE(r.outcome.rejected);
  EXPECT_EQ(r.outcome.final_log_wealth, 0.0);
}

TEST(Validity, ConstantBetUnderBernoulliNull) {
  // Ville: P(sup W >= 1/alpha) <= alpha for a fixed bet under the null.
  const NullSpec spec(0.4, 0.1, 200);
  const int runs = 20000;
  int rejections = 0;
  for (int r = 0; r < runs; ++r) {
    SingleTrack strategy(std::make_unique<ConstantRule>(1.0));
    Rng data(derive_seed(77, StreamKind::data, static_cast<std::uint64_t>(r)));
    rejections += run_episode(spec, strategy, [&] { return data.bernoulli(0.4) ? 1.0 : 0.0; }, r).outcome.rejected;
  }
  const double rate = static_cast<double>(rejections) / runs;
  EXPECT_LE(rate, 0.1 + 3.0 * std::sqrt(0.09 / runs));
}

TEST(Random, StreamsAreReproducibleAndDistinct) {
  Rng a(derive_seed(1, StreamKind::data, 3)), b(derive_seed(1, StreamKind::data, 3));
  Rng c(derive_seed(1, StreamKind::data, 4)), d(derive_seed(1, StreamKind::exploration, 3));
  const auto x = a.next_u64();
  EXPECT_EQ(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
  EXPECT_NE(x, d.next_u64());
}

TEST(Random, UniformMomentsAndRange) {
  Rng rng(9);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4e-3);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 2e-3);
}

TEST(Random, BelowIsUniform) {
  Rng rng(10);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[rng.below(7)];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  EXPECT_LT(chi2, 22.46);  // 6 dof, p = 0.001
}

TEST(Random, NormalMoments) {
  Rng rng(11);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.015);
}
