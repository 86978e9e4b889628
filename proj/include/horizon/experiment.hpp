#pragma once

// Monte-Carlo harness: experiment description with a provenance header,
// rejection-by-time curves, and a deterministic parallel loop.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <exception>
#include <optional>
#include <span>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "horizon/core.hpp"
#include "horizon/distributions.hpp"
#include "horizon/error.hpp"
#include "horizon/factory.hpp"
#include "horizon/random.hpp"

namespace horizon {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr const char* kOutDirEnv = "HORIZON_OUT_DIR";

struct ExperimentSpec {
  std::string command;
  std::string world;
  std::string strategy;
  int N = 100;
  double m = 0.5;
  double alpha = 0.05;
  long runs = 1000;
  std::uint64_t seed = 0;
  std::string output;
  std::string format = "csv";
  nlohmann::json extra = nlohmann::json::object();  // command-specific settings

  nlohmann::json to_json() const {
    return nlohmann::json{{"command", command}, {"world", world},   {"strategy", strategy}, {"N", N},
                          {"m", m},             {"alpha", alpha},   {"runs", runs},         {"seed", seed},
                          {"output", output},   {"format", format}, {"extra", extra}};
  }

  static ExperimentSpec from_json(const nlohmann::json& j) {
    ExperimentSpec s;
    try {
      s.command = j.at("command").get<std::string>();
      s.world = j.at("world").get<std::string>();
      s.strategy = j.at("strategy").get<std::string>();
      s.N = j.at("N").get<int>();
      s.m = j.at("m").get<double>();
      s.alpha = j.at("alpha").get<double>();
      s.runs = j.at("runs").get<long>();
      s.seed = j.at("seed").get<std::uint64_t>();
      s.output = j.at("output").get<std::string>();
      s.format = j.at("format").get<std::string>();
      s.extra = j.value("extra", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("malformed experiment description: ") + e.what());
    }
    return s;
  }

  bool operator==(const ExperimentSpec& o) const { return to_json() == o.to_json(); }
};

// "# horizon <version> <spec json>"
inline std::string provenance_line(const ExperimentSpec& spec) {
  return std::string("# horizon ") + kArtifactVersion + " " + spec.to_json().dump();
}

inline ExperimentSpec parse_provenance(const std::string& line) {
  const std::string prefix = "# horizon ";
  if (line.rfind(prefix, 0) != 0) throw UsageError("not a provenance header", line.substr(0, 16));
  const auto brace = line.find('{');
  if (brace == std::string::npos) throw UsageError("provenance header has no description", line);
  try {
    return ExperimentSpec::from_json(nlohmann::json::parse(line.substr(brace)));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("provenance header is not valid JSON: ") + e.what(), line);
  }
}

inline std::filesystem::path default_output(const std::string& name) {
  const char* dir = std::getenv(kOutDirEnv);
  return (dir && *dir ? std::filesystem::path(dir) : std::filesystem::path(".")) / name;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers over contiguous
// blocks. Results must be written by index so the outcome is thread-count
// independent.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::clamp<std::size_t>(threads <= 0 ? 1 : static_cast<std::size_t>(threads), 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Hit time of one seeded episode (0 when the threshold is never reached).
inline int episode_hit_time(const NullSpec& spec, const World& world, Strategy& strategy, std::uint64_t seed,
                            std::uint64_t index) {
  Rng data(derive_seed(seed, StreamKind::data, index));
  const EpisodeResult r =
      run_episode(spec, strategy, [&] { return world.sample(data); }, derive_seed(seed, StreamKind::episode, index));
  return r.outcome.hit_time ? *r.outcome.hit_time : 0;
}

struct CurveRow {
  int t = 0;
  double reject_frac = 0.0;
  double se = 0.0;
};

inline std::vector<int> hit_times(const NullSpec& spec, const World& world, const StrategyMaker& maker, long runs,
                                  std::uint64_t seed, int threads = 1) {
  std::vector<int> hits(static_cast<std::size_t>(std::max(runs, 0L)), 0);
  parallel_for(hits.size(), threads, [&](std::size_t r) {
    auto strategy = maker();
    hits[r] = episode_hit_time(spec, world, *strategy, seed, r);
  });
  return hits;
}

inline std::vector<CurveRow> rejection_curve(std::span<const int> hits, int horizon) {
  std::vector<long> first(static_cast<std::size_t>(horizon) + 2, 0);
  for (int h : hits) {
    if (h > 0) ++first[static_cast<std::size_t>(h)];
  }
  std::vector<CurveRow> rows;
  if (hits.empty()) return rows;
  const double R = static_cast<double>(hits.size());
  long cum = 0;
  for (int t = 1; t <= horizon; ++t) {
    cum += first[static_cast<std::size_t>(t)];
    const double p = static_cast<double>(cum) / R;
    rows.push_back(CurveRow{t, p, std::sqrt(p * (1.0 - p) / R)});
  }
  return rows;
}

inline void write_curve_csv(std::ostream& os, std::span<const CurveRow> rows) {
  os << "t,reject_frac,se\n";
  char buf[96];
  for (const CurveRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", r.t, r.reject_frac, r.se);
    os << buf;
  }
}

}  // namespace horizon
