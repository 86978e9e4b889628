#pragma once

// Data-generating worlds on [0,1]: Bernoulli, Beta, 50/50 Beta mixtures and
// finite laws, plus quantile quantization and the randomized episode sampler
// used for DQN training.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "horizon/descriptor.hpp"
#include "horizon/error.hpp"
#include "horizon/random.hpp"
#include "horizon/ratefun.hpp"

namespace horizon {

// log of a Gamma(shape, 1) variate. Marsaglia-Tsang squeeze for shape >= 1;
// smaller shapes use G(a) = G(a+1) * U^(1/a). Working in logs keeps tiny
// shapes from underflowing.
inline double sample_log_gamma(Rng& rng, double shape) {
  if (!(shape > 0.0)) throw DomainError("gamma shape must be positive");
  if (shape < 1.0) return sample_log_gamma(rng, shape + 1.0) + std::log(rng.uniform_open()) / shape;
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

inline double sample_gamma(Rng& rng, double shape) { return std::exp(sample_log_gamma(rng, shape)); }

inline double sample_beta(Rng& rng, double a, double b) {
  const double la = sample_log_gamma(rng, a);
  const double lb = sample_log_gamma(rng, b);
  return 1.0 / (1.0 + std::exp(lb - la));
}

enum class WorldKind { bernoulli, beta, beta_mixture, finite };

class World {
 public:
  static World bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("Bernoulli p outside [0,1]");
    World w(WorldKind::bernoulli);
    w.mu_ = p;
    return w;
  }

  // Beta(conc * mu, conc * (1 - mu)).
  static World beta(double mu, double conc) {
    check_beta(mu, conc);
    World w(WorldKind::beta);
    w.mu_ = mu;
    w.conc_ = conc;
    return w;
  }

  static World beta_shapes(double a, double b) {
    if (!(a > 0.0 && b > 0.0)) throw DomainError("Beta shapes must be positive");
    return beta(a / (a + b), a + b);
  }

  // 50/50 mixture of Beta(conc mu, conc (1-mu)) and Beta(2 conc mu, 2 conc (1-mu)).
  static World beta_mixture(double mu, double conc) {
    check_beta(mu, conc);
    World w(WorldKind::beta_mixture);
    w.mu_ = mu;
    w.conc_ = conc;
    return w;
  }

  static World finite(FiniteDist dist) {
    World w(WorldKind::finite);
    w.mu_ = dist.mean();
    w.dist_ = std::move(dist);
    return w;
  }

  WorldKind kind() const { return kind_; }
  double mean() const { return mu_; }
  double conc() const { return conc_; }
  const FiniteDist& finite_dist() const { return *dist_; }

  double sample(Rng& rng) const {
    switch (kind_) {
      case WorldKind::bernoulli:
        return rng.bernoulli(mu_) ? 1.0 : 0.0;
      case WorldKind::beta:
        return sample_beta(rng, conc_ * mu_, conc_ * (1.0 - mu_));
      case WorldKind::beta_mixture: {
        const double scale = rng.bernoulli(0.5) ? 2.0 : 1.0;
        return sample_beta(rng, scale * conc_ * mu_, scale * conc_ * (1.0 - mu_));
      }
      case WorldKind::finite: {
        const FiniteDist& d = (*dist_);
        double u = rng.uniform();
        for (std::size_t i = 0; i + 1 < d.size(); ++i) {
          u -= d.probs()[i];
          if (u < 0.0) return d.atoms()[i];
        }
        return d.atoms().back();
      }
    }
    return 0.0;
  }

  double variance() const {
    switch (kind_) {
      case WorldKind::bernoulli: return mu_ * (1.0 - mu_);
      case WorldKind::beta: return mu_ * (1.0 - mu_) / (1.0 + conc_);
      case WorldKind::beta_mixture:
        // components share the mean, so the mixture variance is the average
        return 0.5 * mu_ * (1.0 - mu_) * (1.0 / (1.0 + conc_) + 1.0 / (1.0 + 2.0 * conc_));
      case WorldKind::finite: return (*dist_).variance();
    }
    return 0.0;
  }

  std::string descriptor() const {
    char buf[128];
    switch (kind_) {
      case WorldKind::bernoulli: std::snprintf(buf, sizeof buf, "bern:%.17g", mu_); break;
      case WorldKind::beta: std::snprintf(buf, sizeof buf, "beta:mu=%.17g,conc=%.17g", mu_, conc_); break;
      case WorldKind::beta_mixture: std::snprintf(buf, sizeof buf, "mix:mu=%.17g,conc=%.17g", mu_, conc_); break;
      case WorldKind::finite: {
        std::string s = "finite:";
        const FiniteDist& d = (*dist_);
        for (std::size_t i = 0; i < d.size(); ++i) {
          std::snprintf(buf, sizeof buf, "%s%.17g@%.17g", i ? "," : "", d.atoms()[i], d.probs()[i]);
          s += buf;
        }
        return s;
      }
    }
    return buf;
  }

 private:
  explicit World(WorldKind kind) : kind_(kind) {}

  static void check_beta(double mu, double conc) {
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("Beta mean must lie in (0,1)");
    if (!(conc > 0.0)) throw DomainError("Beta concentration must be positive");
  }

  WorldKind kind_;
  double mu_ = 0.5;
  double conc_ = 0.0;
  std::optional<FiniteDist> dist_;
};

// Variance proxy of a Beta-family world evaluated at mean `mu`:
// mu(1-mu)/(1+conc), averaged over components for mixtures.
inline double variance_proxy(WorldKind kind, double mu, double conc) {
  const double base = mu * (1.0 - mu);
  if (kind == WorldKind::beta_mixture) return 0.5 * base * (1.0 / (1.0 + conc) + 1.0 / (1.0 + 2.0 * conc));
  if (kind == WorldKind::beta) return base / (1.0 + conc);
  return base;
}

// "bern:0.6", "beta:mu=0.4,conc=6", "beta:a=2.4,b=3.6", "mix:mu=0.4,conc=1",
// "finite:0@0.3,1@0.7".
inline World parse_world(const std::string& text) {
  const Descriptor d = parse_descriptor(text);
  if (d.name == "bern") {
    if (!d.positional.empty()) return World::bernoulli(Descriptor::parse_number(d.positional.front()));
    return World::bernoulli(d.number("p"));
  }
  if (d.name == "beta" || d.name == "mix") {
    double mu, conc;
    if (d.has("a")) {
      const double a = d.number("a"), b = d.number("b");
      mu = a / (a + b);
      conc = a + b;
    } else {
      mu = d.number("mu");
      conc = d.number("conc");
    }
    return d.name == "beta" ? World::beta(mu, conc) : World::beta_mixture(mu, conc);
  }
  if (d.name == "finite") {
    std::vector<double> atoms, probs;
    for (const std::string& item : d.positional) {
      const auto at = item.find('@');
      if (at == std::string::npos) throw UsageError("finite world entries are atom@prob", item);
      atoms.push_back(Descriptor::parse_number(item.substr(0, at)));
      probs.push_back(Descriptor::parse_number(item.substr(at + 1)));
    }
    return World::finite(FiniteDist(std::move(atoms), std::move(probs)));
  }
  throw UsageError("unknown world '" + d.name + "'", d.name);
}

namespace detail {

inline double mixture_quantile(double mu, double conc, double q) {
  const boost::math::beta_distribution<double> c1(conc * mu, conc * (1.0 - mu));
  const boost::math::beta_distribution<double> c2(2.0 * conc * mu, 2.0 * conc * (1.0 - mu));
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * (boost::math::cdf(c1, mid) + boost::math::cdf(c2, mid));
    if (cdf < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Finite approximation with atoms at the (i - 1/2)/n quantiles and equal
// weights. Bernoulli and finite worlds pass through unchanged.
inline FiniteDist quantize(const World& world, int n_atoms) {
  if (world.kind() == WorldKind::bernoulli) return FiniteDist::bernoulli(world.mean());
  if (world.kind() == WorldKind::finite) return world.finite_dist();
  if (n_atoms < 1) throw DomainError("quantize needs at least one atom");

  std::vector<double> atoms, probs;
  const double w = 1.0 / n_atoms;
  const boost::math::beta_distribution<double> beta(world.conc() * world.mean(),
                                                    world.conc() * (1.0 - world.mean()));
  for (int i = 0; i < n_atoms; ++i) {
    const double q = (i + 0.5) / n_atoms;
    const double x = world.kind() == WorldKind::beta ? boost::math::quantile(beta, q)
                                                     : detail::mixture_quantile(world.mean(), world.conc(), q);
    if (!atoms.empty() && x <= atoms.back()) {
      probs.back() += w;  // coincident quantiles (extreme shapes)
    } else {
      atoms.push_back(x);
      probs.push_back(w);
    }
  }
  double total = 0.0;
  for (double p : probs) total += p;
  for (double& p : probs) p /= total;
  return FiniteDist(std::move(atoms), std::move(probs));
}

// Ranges for randomized training episodes.
struct ConfigRanges {
  int n_min = 100;
  int n_max = 350;
  double m_min = 0.01;
  double m_max = 0.99;
  double c_min = 0.70;
  double c_max = 1.30;
  double mu_min = 0.01;
  double mu_max = 0.99;
  double conc_min = 0.1;
  double conc_max = 11.0;
  double p_mixture = 0.5;
  double alpha = 0.05;
  // When set, mu is drawn uniformly from [anchor_mu_lo, anchor_mu_hi] and m is
  // placed at the coupled distance from it; otherwise m is drawn and mu placed.
  bool anchor_mean = false;
  double anchor_mu_lo = 0.35;
  double anchor_mu_hi = 0.45;

  static ConfigRanges universal() { return {}; }

  // Narrow Beta-mixture family used for desk-scale training.
  static ConfigRanges desk() {
    ConfigRanges r;
    r.n_min = 100;
    r.n_max = 150;
    r.c_min = 0.7;
    r.c_max = 2.0;
    r.conc_min = 1.0;
    r.conc_max = 6.0;
    r.p_mixture = 1.0;
    r.anchor_mean = true;
    r.anchor_mu_lo = 0.35;
    r.anchor_mu_hi = 0.45;
    return r;
  }
};

struct EpisodeConfig {
  int N = 100;
  double m = 0.5;
  double mu = 0.5;
  double conc = 1.0;
  double c = 1.0;
  WorldKind kind = WorldKind::beta;

  World world() const {
    return kind == WorldKind::beta_mixture ? World::beta_mixture(mu, conc) : World::beta(mu, conc);
  }
};

// Distance |mu - m| that keeps difficulty comparable across horizons.
inline double coupled_gap(double sigma2, double c, double alpha, int N) {
  return std::sqrt(2.0 * sigma2 * c * std::log(1.0 / alpha) / N);
}

inline EpisodeConfig sample_episode_config(Rng& rng, const ConfigRanges& ranges) {
  EpisodeConfig cfg;
  const double log_n = rng.uniform(std::log(static_cast<double>(ranges.n_min)),
                                   std::log(static_cast<double>(ranges.n_max)));
  cfg.N = std::clamp(static_cast<int>(std::lround(std::exp(log_n))), ranges.n_min, ranges.n_max);
  cfg.c = rng.uniform(ranges.c_min, ranges.c_max);
  cfg.conc = rng.uniform(ranges.conc_min, ranges.conc_max);
  cfg.kind = rng.bernoulli(ranges.p_mixture) ? WorldKind::beta_mixture : WorldKind::beta;
  const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
  if (ranges.anchor_mean) {
    cfg.mu = rng.uniform(ranges.anchor_mu_lo, ranges.anchor_mu_hi);
    const double gap = coupled_gap(variance_proxy(cfg.kind, cfg.mu, cfg.conc), cfg.c, ranges.alpha, cfg.N);
    cfg.m = std::clamp(cfg.mu + sign * gap, ranges.m_min, ranges.m_max);
  } else {
    cfg.m = rng.uniform(ranges.m_min, ranges.m_max);
    const double gap = coupled_gap(variance_proxy(cfg.kind, cfg.m, cfg.conc), cfg.c, ranges.alpha, cfg.N);
    cfg.mu = std::clamp(cfg.m + sign * gap, ranges.mu_min, ranges.mu_max);
  }
  return cfg;
}

}  // namespace horizon
