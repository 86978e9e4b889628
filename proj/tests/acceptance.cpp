// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [criterion numbers...] [--checkpoint path] [--save-checkpoint path]
//
// Criteria 5 and 10 share one desk-scale DQN training run; --checkpoint
// reuses a saved network instead of training.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "horizon/confseq.hpp"
#include "horizon/core.hpp"
#include "horizon/distributions.hpp"
#include "horizon/dqn/agent.hpp"
#include "horizon/dqn/checkpoint.hpp"
#include "horizon/experiment.hpp"
#include "horizon/factory.hpp"
#include "horizon/oracle.hpp"
#include "horizon/ratefun.hpp"
#include "horizon/strategies.hpp"

using namespace horizon;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

double binom_se(double p, double n) { return std::sqrt(std::max(p * (1.0 - p), 0.0) / n); }

// Fraction of seeded episodes that reach the threshold by the horizon.
double rejection_rate(const NullSpec& spec, const World& world, const StrategyMaker& maker, long runs,
                      std::uint64_t seed) {
  const auto hits = hit_times(spec, world, maker, runs, seed, 1);
  long n = 0;
  for (int h : hits) n += h > 0 ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(runs);
}

// ---------------------------------------------------------------------------

Verdict c1() {
  const FiniteDist d = FiniteDist::bernoulli(0.6);
  const double r = std::log(20.0) / 20.0;
  const double agg = rate_plus(d, 1.5, 0.5, r).value;
  const double half_kelly = 0.5 * rate_plus(d, 0.4, 0.5, r).value;
  const bool ok = within(agg, 0.081, 0.002) && within(half_kelly, 0.132, 0.002);
  return {ok, fmt("I+(1.5)=%.4f (0.081+-0.002), I+(0.4)/2=%.4f (0.132+-0.002)", agg, half_kelly)};
}

Verdict c2() {
  const FiniteDist d = FiniteDist::bernoulli(0.6);
  const double b = std::log(20.0);
  const double agg = hit_prob_exact(d, 1.5, 0.5, 0.0, b, 20).probability;
  const double kel = hit_prob_exact(d, 0.4, 0.5, 0.0, b, 20).probability;
  const bool ok = within(agg, 0.13, 0.005) && within(kel, 8.6e-4, 5e-5);
  return {ok, fmt("P(lambda=1.5)=%.5f (0.13+-0.005), P(lambda=0.4)=%.3e (8.6e-4+-5e-5)", agg, kel)};
}

Verdict c3() {
  const FiniteDist d = FiniteDist::bernoulli(0.99);
  const double m = 0.2, b = std::log(20.0), r = 0.8;
  const int T = 5;
  const NullSpec spec(m, 0.05, T);
  const double kelly = kelly_solve(d, m, spec.bet_range());
  const double def = 0.75 * kelly;
  const double bk = std::max(h(kelly, 0.0, m), h(kelly, 1.0, m));
  const double r_minus = 2.0 * (r - 0.5 * bk);
  const double i_def = rate_minus(d, def, m, r).value;
  const double i_kelly_half = 0.5 * rate_minus(d, kelly, m, r_minus).value;
  const double y0 = b - r * T;
  const double p_def = hit_prob_exact(d, def, m, y0, b, T).probability;
  const double p_kel = hit_prob_exact(d, kelly, m, y0, b, T).probability;
  const bool ok = within(i_def, 0.466, 0.005) && within(i_kelly_half, 0.329, 0.005) && within(p_def, 0.999, 0.001) &&
                  within(p_kel, 0.970, 0.002);
  return {ok, fmt("kelly=%.4f I-(def)=%.4f I-(kelly,r-)/2=%.4f P(def)=%.4f P(kelly)=%.4f", kelly, i_def,
                  i_kelly_half, p_def, p_kel)};
}

Verdict c4() {
  const FiniteDist d = FiniteDist::bernoulli(0.7);
  const int T = 50000;
  const NullSpec spec(0.5, 0.05, T);
  RegionParams params;
  params.delta = 0.6;
  params.rho = 0.8;
  params.compact = BetRange{0.0, 1.0};
  const RegionReport rep = classify_region(d, spec, 0, spec.threshold() - 1475.0, params);
  const double dev = rep.deviation_threshold.value_or(NAN);
  const double eps = rep.eps_delta.value_or(NAN);
  const bool ok = std::abs(rep.kelly_threshold / 1442.0 - 1.0) <= 0.01 && std::abs(dev / 1522.0 - 1.0) <= 0.01 &&
                  within(rep.kelly_bet, 0.8, 1e-9) && within(rep.L_max, 0.082, 0.001) && within(eps, 0.047, 0.001);
  return {ok, fmt("B*sqrt(8TlogT)=%.1f rho*eps*T-B*sqrt(8Tlog2)=%.1f kelly=%.4f L_max=%.4f eps=%.4f",
                  rep.kelly_threshold, dev, rep.kelly_bet, rep.L_max, eps)};
}

Verdict c5(const std::shared_ptr<const dqn::Mlp>& net) {
  const double m = 0.45;
  const NullSpec spec(m, 0.05, 100);
  const long runs = 20000;
  const double limit = 0.05 + 3.0 * binom_se(0.05, runs);
  struct Named {
    std::string name;
    StrategyMaker maker;
  };
  std::vector<Named> strategies = {
      {"kelly", strategy_maker("kelly")},
      {"hedge:default6", strategy_maker("hedge:default6")},
      {"epsgreedy", strategy_maker("epsgreedy:eta=0.5,q=1")},
      {"dqn", [net] { return std::make_unique<SingleTrack>(std::make_unique<dqn::DqnRule>(net)); }},
  };
  const std::vector<std::pair<std::string, World>> nulls = {{"bern", World::bernoulli(m)},
                                                            {"beta6", World::beta(m, 6.0)}};
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 500;
  double worst = 0.0;
  for (const auto& s : strategies) {
    for (const auto& [wname, world] : nulls) {
      const double rate = rejection_rate(spec, world, s.maker, runs, ++seed);
      worst = std::max(worst, rate);
      ok = ok && rate <= limit;
      detail += fmt("%s/%s=%.4f ", s.name.c_str(), wname.c_str(), rate);
    }
  }
  return {ok, detail + fmt("(limit %.4f)", limit)};
}

Verdict c6() {
  Rng cfg_rng(derive_seed(6, StreamKind::config, 0));
  double worst_gap = 0.0;
  bool ok = true;
  const double logk = std::log(6.0);
  for (int e = 0; e < 1000; ++e) {
    const double m = cfg_rng.uniform(0.05, 0.95);
    const double mu = cfg_rng.uniform(0.05, 0.95);
    const double conc = cfg_rng.uniform(0.5, 10.0);
    const int N = 20 + static_cast<int>(cfg_rng.below(181));
    const World world = World::beta(mu, conc);
    const NullSpec spec(m, 0.05, N);
    HedgeStrategy hedge;
    hedge.reset(spec, derive_seed(6, StreamKind::episode, static_cast<std::uint64_t>(e)));
    Rng data(derive_seed(6, StreamKind::data, static_cast<std::uint64_t>(e)));
    for (int t = 1; t <= N; ++t) {
      hedge.decide();
      hedge.observe(world.sample(data));
      const auto tracks = hedge.track_log_wealth();
      const double top = *std::max_element(tracks.begin(), tracks.end());
      const double mix = hedge.log_wealth();
      worst_gap = std::max(worst_gap, (top - logk) - mix);
      if (mix < top - logk - 1e-12 || mix > top + 1e-12) ok = false;
    }
  }
  return {ok, fmt("max violation of mixture >= max track - log 6: %.3e (tolerance 1e-12)", std::max(worst_gap, 0.0))};
}

Verdict c7() {
  Rng rng(derive_seed(7, StreamKind::config, 0));
  int bad_dp = 0, bad_mc = 0;
  double worst_dp = 0.0, worst_z = 0.0;
  const long runs = 100000;
  for (int c = 0; c < 50; ++c) {
    const double p = rng.uniform(0.3, 0.9);
    const double m = rng.uniform(0.1, 0.9);
    const int N = 10 + static_cast<int>(rng.below(41));
    const FiniteDist d = FiniteDist::bernoulli(p);
    const NullSpec spec(m, 0.05, N);
    const BetRange range = spec.bet_range();
    const double bet = rng.uniform(0.1, 0.9) * (p > m ? range.hi : range.lo);
    const double exact = hit_prob_exact(d, bet, m, 0.0, spec.threshold(), N).probability;
    GridConfig gc;
    gc.step = 1e-4;
    const DpGrid grid = bellman_solve(d, spec, {ActionChoice{Action::none, bet}}, gc);
    const double dp = grid.value(0, 0.0);
    worst_dp = std::max(worst_dp, std::abs(dp - exact));
    if (std::abs(dp - exact) > 1e-3) {
      ++bad_dp;
      std::fprintf(stderr, "  c7 config %d: p=%.4f m=%.4f N=%d bet=%.6f exact=%.6f dp=%.6f\n", c, p, m, N, bet, exact, dp);
    }
    const double mc = rejection_rate(spec, World::bernoulli(p), [bet] { return std::make_unique<SingleTrack>(std::make_unique<ConstantRule>(bet)); }, runs,
                                     700 + static_cast<std::uint64_t>(c));
    const double se = std::max(binom_se(exact, runs), 1.0 / runs);
    const double z = std::max(std::abs(mc - exact), std::abs(mc - dp)) / se;
    worst_z = std::max(worst_z, z);
    if (z > 3.0) ++bad_mc;
  }
  return {bad_dp == 0 && bad_mc == 0,
          fmt("max |DP-exact|=%.2e (tol 1e-3, %d misses); max MC deviation %.2f s.e. (%d beyond 3)", worst_dp, bad_dp,
              worst_z, bad_mc)};
}

Verdict c8() {
  // Coarser quantizations leave atom-staircase pockets near the deadline
  // that shrink as the atom count grows; 801 atoms is past that point.
  const FiniteDist d = quantize(World::beta_mixture(0.4, 6.0), 801);
  const NullSpec spec(0.45, 0.05, 100);
  GridConfig gc;
  gc.step = 0.002;
  const DpGrid grid = bellman_solve(d, spec, resolve_default_actions(d, spec), gc);
  auto rank = [](Action a) { return a == Action::all_in ? 0 : a == Action::kelly ? 1 : 2; };
  int violations = 0, first_bad_t = -1;
  long cells = 0;
  for (int t = 0; t <= 90; ++t) {
    int prev = -1;
    for (std::size_t j = 0; j < grid.ny; ++j) {
      if (grid.y(j) >= spec.threshold()) break;
      if (grid.value_at(t, j) < kHopelessValue) continue;
      const int r = rank(grid.action_at(t, j).tag);
      ++cells;
      if (r < prev) {
        ++violations;
        if (first_bad_t < 0) first_bad_t = t;
      }
      prev = std::max(prev, r);
    }
  }
  return {violations == 0 && cells > 0,
          fmt("801 atoms, grid step 0.002: %ld live cells over t<=90, %d ordering violations%s", cells, violations,
              first_bad_t >= 0 ? fmt(" (first at t=%d)", first_bad_t).c_str() : "")};
}

Verdict c9() {
  dqn::Mlp net({4, 8, 3});
  Rng rng(derive_seed(9, StreamKind::init, 0));
  net.init_uniform(rng);
  dqn::Mlp target = net;
  Rng trng(derive_seed(9, StreamKind::init, 1));
  target.init_uniform(trng);

  dqn::Transition tr;
  Rng xs(derive_seed(9, StreamKind::data, 0));
  for (int i = 0; i < 4; ++i) {
    tr.state[static_cast<std::size_t>(i)] = static_cast<float>(xs.uniform(-1.0, 1.0));
    tr.next_state[static_cast<std::size_t>(i)] = static_cast<float>(xs.uniform(-1.0, 1.0));
  }
  tr.action = 1;
  tr.reward = 0.3f;
  tr.terminal = false;
  // Small network: run the loss on a 4-feature transition directly.
  auto loss_at = [&](const dqn::Mlp& online) {
    Eigen::MatrixXd s(4, 1), s2(4, 1);
    for (int i = 0; i < 4; ++i) {
      s(i, 0) = tr.state[static_cast<std::size_t>(i)];
      s2(i, 0) = tr.next_state[static_cast<std::size_t>(i)];
    }
    const Eigen::MatrixXd qn = online.forward(s2);
    const int a_star = dqn::argmax_action(qn.data());
    const double y = tr.reward + target.forward(s2)(a_star, 0);
    const double q = online.forward(s)(tr.action, 0);
    return dqn::huber(q - y, 1.0);
  };
  // Backprop gradient through the same composition.
  Eigen::MatrixXd s(4, 1), s2(4, 1);
  for (int i = 0; i < 4; ++i) {
    s(i, 0) = tr.state[static_cast<std::size_t>(i)];
    s2(i, 0) = tr.next_state[static_cast<std::size_t>(i)];
  }
  const int a_star = dqn::argmax_action(net.forward(s2).data());
  const double y = tr.reward + target.forward(s2)(a_star, 0);
  dqn::Mlp::Cache cache;
  const Eigen::MatrixXd q = net.forward(s, cache);
  Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(3, 1);
  dout(tr.action, 0) = std::clamp(q(tr.action, 0) - y, -1.0, 1.0);
  std::vector<double> grad;
  net.backward(cache, dout, grad);

  double worst = 0.0;
  const double eps = 1e-6;
  for (std::size_t i = 0; i < net.num_params(); ++i) {
    dqn::Mlp plus = net, minus = net;
    plus.params()[i] += eps;
    minus.params()[i] -= eps;
    const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * eps);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
    worst = std::max(worst, std::abs(fd - grad[i]) / denom);
  }
  return {worst <= 1e-5, fmt("max relative error %.2e over %zu parameters (tol 1e-5)", worst, net.num_params())};
}

struct DqnOutcome {
  std::shared_ptr<const dqn::Mlp> net;
  double best_eval = 0.0;
  int best_episode = 0;
  double seconds = 0.0;
};

dqn::TrainConfig desk_train_config() {
  dqn::TrainConfig cfg;
  cfg.episodes = 20000;
  cfg.seed = 10;
  return cfg;
}

DqnOutcome train_desk(const std::optional<std::string>& load, const std::optional<std::string>& save) {
  DqnOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  if (load) {
    out.net = std::make_shared<const dqn::Mlp>(dqn::load_checkpoint(*load).net);
  } else {
    const dqn::TrainConfig cfg = desk_train_config();
    const dqn::TrainResult res = dqn::train(cfg, ConfigRanges::desk());
    out.net = std::make_shared<const dqn::Mlp>(res.best);
    out.best_eval = res.best_eval;
    out.best_episode = res.best_episode;
    if (save) dqn::save_checkpoint(*save, res.best, {{"episode", res.best_episode}, {"eval_hit_rate", res.best_eval}});
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

Verdict c10(const DqnOutcome& dq) {
  const NullSpec spec(0.45, 0.05, 100);
  const World world = World::beta_mixture(0.4, 6.0);
  const long runs = 5000;
  const std::uint64_t seed = 1010;
  auto net = dq.net;
  const double p_dqn = rejection_rate(
      spec, world, [net] { return std::make_unique<SingleTrack>(std::make_unique<dqn::DqnRule>(net)); }, runs, seed);
  const double p_kelly = rejection_rate(spec, world, strategy_maker("kelly"), runs, seed);
  const double p_rand = rejection_rate(spec, world, strategy_maker("random"), runs, seed);
  const double se_kelly = binom_se(p_kelly, runs);
  const double se_diff = std::sqrt(binom_se(p_dqn, runs) * binom_se(p_dqn, runs) + binom_se(p_rand, runs) * binom_se(p_rand, runs));
  const bool ok = p_dqn >= p_kelly - se_kelly && p_dqn - p_rand >= 3.0 * se_diff;
  return {ok, fmt("dqn=%.4f kelly=%.4f (s.e. %.4f) random=%.4f (diff s.e. %.4f); training %.0fs, best eval %.4f at "
                  "episode %d",
                  p_dqn, p_kelly, se_kelly, p_rand, se_diff, dq.seconds, dq.best_eval, dq.best_episode)};
}

Verdict c11() {
  const MGrid grid = MGrid::uniform(999);
  const long runs = 1000;
  const double alpha = 0.05;
  const StrategyMaker kelly = strategy_maker("kelly");
  auto factory = [&](const NullSpec&, std::size_t) { return kelly(); };
  bool ok = true;
  std::string detail = "coverage:";
  const double cov_limit = 0.95 - 3.0 * binom_se(0.95, runs);
  const std::vector<std::pair<std::string, World>> fig4 = {{"mix(0.25,8)", World::beta_mixture(0.25, 8.0)},
                                                           {"mix(0.4,1)", World::beta_mixture(0.4, 1.0)},
                                                           {"mix(0.65,10)", World::beta_mixture(0.65, 10.0)}};
  std::uint64_t seed = 1100;
  for (const auto& [name, world] : fig4) {
    const double mu = world.mean();
    long covered = 0;
    ++seed;
    for (long r = 0; r < runs; ++r) {
      Rng data_rng(derive_seed(seed, StreamKind::data, static_cast<std::uint64_t>(r)));
      std::vector<double> data(100);
      for (double& x : data) x = world.sample(data_rng);
      const CsResult res = cs_run(data, factory, alpha, grid, derive_seed(seed, StreamKind::episode, static_cast<std::uint64_t>(r)));
      bool all = true;
      for (const CsInterval& iv : res.intervals) all = all && !iv.empty && iv.lower <= mu && mu <= iv.upper;
      covered += all ? 1 : 0;
    }
    const double cov = static_cast<double>(covered) / runs;
    ok = ok && cov >= cov_limit;
    detail += fmt(" %s=%.3f", name.c_str(), cov);
  }
  detail += fmt(" (limit %.3f); LCB ECDF at mean:", cov_limit);
  const double lcb_limit = 1.0 - alpha / 2.0 - 3.0 * binom_se(1.0 - alpha / 2.0, runs);
  struct Fig5 {
    std::string name;
    World world;
    int N;
  };
  const std::vector<Fig5> fig5 = {{"Beta(0.1,2)", World::beta_shapes(0.1, 2.0), 100},
                                  {"Beta(2,0.1)", World::beta_shapes(2.0, 0.1), 100},
                                  {"Beta(5.5,4.5)", World::beta_shapes(5.5, 4.5), 200}};
  for (const auto& [name, world, horizon] : fig5) {
    const double mu = world.mean();
    std::vector<double> lcbs;
    ++seed;
    for (long r = 0; r < runs; ++r) {
      Rng data_rng(derive_seed(seed, StreamKind::data, static_cast<std::uint64_t>(r)));
      std::vector<double> data(static_cast<std::size_t>(horizon));
      for (double& x : data) x = world.sample(data_rng);
      const CsResult res = cs_run(data, factory, alpha, grid, derive_seed(seed, StreamKind::episode, static_cast<std::uint64_t>(r)));
      lcbs.push_back(res.final_interval().lower);
    }
    const double xs[] = {mu};
    const double frac = lcb_curve(lcbs, xs).front().fraction;
    ok = ok && frac >= lcb_limit;
    detail += fmt(" %s=%.3f", name.c_str(), frac);
  }
  detail += fmt(" (limit %.3f)", lcb_limit);
  return {ok, detail};
}

Verdict c12() {
  const FiniteDist d = FiniteDist::bernoulli(0.6);
  int bad = 0;
  double min_ratio_lo = 1e300, min_ratio_hi = 1e300;
  for (double r : {std::log(20.0) / 20.0}) {
    for (int n = 5; n <= 40; ++n) {
      const double p = block_crossing_exact(d, 0.4, 0.5, r, n);
      const SanovBounds sb = sanov_bounds(d, 0.4, 0.5, r, n);
      if (!(sb.lower <= p && p <= sb.upper)) ++bad;
      if (p > 0) {
        min_ratio_lo = std::min(min_ratio_lo, p / sb.lower);
        min_ratio_hi = std::min(min_ratio_hi, sb.upper / p);
      }
    }
  }
  return {bad == 0, fmt("%d of 36 horizons outside the bounds; min exact/lower=%.3g, min upper/exact=%.3g", bad,
                        min_ratio_lo, min_ratio_hi)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  std::optional<std::string> load, save;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--checkpoint" && i + 1 < argc) {
      load = argv[++i];
    } else if (a == "--save-checkpoint" && i + 1 < argc) {
      save = argv[++i];
    } else {
      only.insert(std::atoi(a.c_str()));
    }
  }
  auto want = [&](int c) { return only.empty() || only.count(c) != 0; };

  const std::map<int, std::string> names = {
      {1, "rate functions of the aggressive-betting example"},
      {2, "exact hitting probabilities of the aggressive-betting example"},
      {3, "defensive-betting example: rates and hitting probabilities"},
      {4, "Kelly near-optimality thresholds"},
      {5, "validity of kelly, hedge, eps-greedy and DQN under the null"},
      {6, "hedge mixture within log 6 of the best track"},
      {7, "Bellman oracle vs exact hitting probability vs Monte Carlo"},
      {8, "phase-diagram band order"},
      {9, "finite-difference gradient check"},
      {10, "desk-scale DQN vs Kelly and random actions"},
      {11, "confidence-sequence coverage and lower-bound validity"},
      {12, "Sanov sandwich for block crossings"},
  };

  std::optional<DqnOutcome> dq;
  auto need_dqn = [&]() -> const DqnOutcome& {
    if (!dq) dq = train_desk(load, save);
    return *dq;
  };

  int failures = 0;
  for (const auto& [id, name] : names) {
    if (!want(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      switch (id) {
        case 1: v = c1(); break;
        case 2: v = c2(); break;
        case 3: v = c3(); break;
        case 4: v = c4(); break;
        case 5: v = c5(need_dqn().net); break;
        case 6: v = c6(); break;
        case 7: v = c7(); break;
        case 8: v = c8(); break;
        case 9: v = c9(); break;
        case 10: v = c10(need_dqn()); break;
        case 11: v = c11(); break;
        case 12: v = c12(); break;
      }
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %2d: %s | %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str(),
                secs);
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
