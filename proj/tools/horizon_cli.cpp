// horizon: command-line front end for betting tests, phase diagrams, rate
// reports, confidence sequences and the DQN agent.
//
// Exit codes: 0 success, 2 usage, 3 numerical failure, 4 I/O.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "horizon/confseq.hpp"
#include "horizon/core.hpp"
#include "horizon/distributions.hpp"
#include "horizon/dqn/agent.hpp"
#include "horizon/dqn/checkpoint.hpp"
#include "horizon/error.hpp"
#include "horizon/experiment.hpp"
#include "horizon/factory.hpp"
#include "horizon/io.hpp"
#include "horizon/oracle.hpp"
#include "horizon/ratefun.hpp"

using namespace horizon;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
  std::string format = "csv";
};

std::string resolve_out(const Globals& g, const std::string& fallback) {
  return g.out.empty() ? default_output(fallback).string() : g.out;
}

// CSV body -> JSON array of row objects (numbers kept as numbers).
json csv_rows_to_json(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> header;
  json rows = json::array();
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (std::getline(in, line)) header = split(line);
  while (std::getline(in, line)) {
    const auto cells = split(line);
    json row = json::object();
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[i], &used);
        if (used == cells[i].size()) {
          row[header[i]] = v;
          continue;
        }
      } catch (const std::exception&) {
      }
      row[header[i]] = cells[i];
    }
    rows.push_back(row);
  }
  return rows;
}

void emit(const ExperimentSpec& spec, const std::string& csv_body, const std::string& path) {
  std::string content;
  if (spec.format == "json") {
    json doc{{"provenance", {{"artifact", "horizon"}, {"version", kArtifactVersion}, {"spec", spec.to_json()}}},
             {"rows", csv_rows_to_json(csv_body)}};
    content = doc.dump(2) + "\n";
  } else {
    content = provenance_line(spec) + "\n" + csv_body;
  }
  write_file_atomic(path, content);
  std::cerr << "wrote " << path << "\n";
}

ExperimentSpec base_spec(const Globals& g, const std::string& command) {
  ExperimentSpec s;
  s.command = command;
  s.seed = g.seed;
  s.format = g.format;
  return s;
}

void run_test(const Globals& g, ExperimentSpec s) {
  s.output = resolve_out(g, "test.csv");
  const World world = parse_world(s.world);
  const StrategyMaker maker = strategy_maker(s.strategy);
  const NullSpec spec(s.m, s.alpha, s.N);
  const auto hits = hit_times(spec, world, maker, s.runs, s.seed, g.threads);
  std::ostringstream body;
  write_curve_csv(body, rejection_curve(hits, s.N));
  emit(s, body.str(), s.output);
}

void run_phase(const Globals& g, ExperimentSpec s, int atoms, double step, std::optional<double> ymin,
               std::optional<double> ymax, int stride) {
  s.output = resolve_out(g, "phase.csv");
  s.extra = {{"atoms", atoms}, {"step", step}, {"stride", stride}};
  if (ymin) s.extra["ymin"] = *ymin;
  if (ymax) s.extra["ymax"] = *ymax;
  const FiniteDist dist = quantize(parse_world(s.world), atoms);
  const NullSpec spec(s.m, s.alpha, s.N);
  GridConfig gc;
  gc.step = step;
  const DpGrid grid = bellman_solve(dist, spec, resolve_default_actions(dist, spec), gc);
  if (grid.coarse) std::cerr << "warning: interpolation error " << grid.interpolation_error << " exceeds 1e-3\n";
  PhaseExportOptions po;
  po.y_min = ymin;
  po.y_max = ymax;
  po.stride = static_cast<std::size_t>(std::max(stride, 1));
  std::ostringstream body;
  write_phase_csv(body, phase_export(grid, po));
  emit(s, body.str(), s.output);
}

json rate_json(const RateResult& r) {
  if (r.is_infinite()) return json{{"finite", false}, {"value", "inf"}};
  return json{{"finite", true}, {"value", r.value}, {"theta", r.theta}};
}

void run_rates(const Globals& g, ExperimentSpec s, int atoms, double bet, int t, double y, std::optional<double> r_opt,
               double delta, double rho) {
  s.output = resolve_out(g, "rates.json");
  s.format = "json";
  s.extra = {{"atoms", atoms}, {"bet", bet}, {"t", t}, {"y", y}, {"delta", delta}, {"rho", rho}};
  if (r_opt) s.extra["r"] = *r_opt;
  const FiniteDist dist = quantize(parse_world(s.world), atoms);
  const NullSpec spec(s.m, s.alpha, s.N);
  RegionParams params;
  params.delta = delta;
  params.rho = rho;
  const RegionReport rep = classify_region(dist, spec, t, y, params);
  const int T = s.N - t;
  const double r = r_opt ? *r_opt : (spec.threshold() - y) / T;

  json report{{"T", rep.T},
              {"r", rep.r},
              {"kelly_bet", rep.kelly_bet},
              {"L_max", rep.L_max},
              {"B_K", rep.B_K},
              {"B", rep.B},
              {"compact", {rep.compact.lo, rep.compact.hi}},
              {"delta_big", rep.delta_big},
              {"kelly_threshold", rep.kelly_threshold},
              {"r_minus", rep.r_minus},
              {"deviation_suboptimal", rep.deviation_suboptimal},
              {"classification", region_name(rep.classification)}};
  report["eps_delta"] = rep.eps_delta ? json(*rep.eps_delta) : json(nullptr);
  report["deviation_threshold"] = rep.deviation_threshold ? json(*rep.deviation_threshold) : json(nullptr);
  json fired = json::array();
  for (Region f : rep.fired) fired.push_back(region_name(f));
  report["fired"] = fired;

  json doc;
  doc["provenance"] = {{"artifact", "horizon"}, {"version", kArtifactVersion}, {"spec", s.to_json()}};
  doc["region"] = report;
  doc["bet"] = bet;
  doc["rate_plus"] = rate_json(rate_plus(dist, bet, s.m, r));
  doc["rate_minus"] = rate_json(rate_minus(dist, bet, s.m, r));
  doc["growth"] = growth(dist, bet, s.m);
  if (T >= 2) {
    doc["c_t_plus"] = c_t_plus(T, dist.size(), dist.p_min());
    doc["c_t_minus"] = c_t_minus(T, dist.size(), dist.p_min());
    doc["quantization_bound"] = quantization_bound(T, dist.size(), dist.p_min());
  }
  write_file_atomic(s.output, doc.dump(2) + "\n");
  std::cerr << "wrote " << s.output << "\n";
}

void run_cs(const Globals& g, ExperimentSpec s, int grid_size, std::string lcb_out) {
  s.output = resolve_out(g, "cs.csv");
  if (lcb_out.empty()) {
    std::filesystem::path p(s.output);
    lcb_out = (p.parent_path() / (p.stem().string() + "_lcb" + p.extension().string())).string();
  }
  s.extra = {{"grid", grid_size}, {"lcb_output", lcb_out}};
  const World world = parse_world(s.world);
  const StrategyMaker maker = strategy_maker(s.strategy);
  const MGrid grid = MGrid::uniform(static_cast<std::size_t>(grid_size));
  const auto R = static_cast<std::size_t>(std::max(s.runs, 0L));

  std::vector<std::vector<CsInterval>> per_run(R);
  parallel_for(R, g.threads, [&](std::size_t r) {
    Rng data_rng(derive_seed(s.seed, StreamKind::data, r));
    std::vector<double> data(static_cast<std::size_t>(s.N));
    for (double& x : data) x = world.sample(data_rng);
    const CsResult res = cs_run(
        data, [&](const NullSpec&, std::size_t) { return maker(); }, s.alpha, grid,
        derive_seed(s.seed, StreamKind::episode, r));
    per_run[r] = res.intervals;
  });

  // Average interval across runs at each n.
  std::vector<CsInterval> mean(static_cast<std::size_t>(s.N) + 1);
  if (R > 0) {
    for (std::size_t n = 0; n < mean.size(); ++n) {
      double lo = 0.0, hi = 0.0;
      for (const auto& run : per_run) {
        lo += run[n].lower;
        hi += run[n].upper;
      }
      mean[n].lower = lo / R;
      mean[n].upper = hi / R;
    }
  } else {
    mean.clear();
  }
  std::ostringstream body;
  write_cs_csv(body, mean);
  emit(s, body.str(), s.output);

  std::vector<double> lcbs;
  for (const auto& run : per_run) lcbs.push_back(run.back().lower);
  std::vector<double> xs;
  for (int i = 0; i <= 100; ++i) xs.push_back(i / 100.0);
  xs.push_back(world.mean());
  std::sort(xs.begin(), xs.end());
  std::ostringstream lcb_body;
  write_lcb_csv(lcb_body, lcb_curve(lcbs, xs));
  ExperimentSpec ls = s;
  ls.output = lcb_out;
  emit(ls, lcb_body.str(), lcb_out);
}

void run_train(const Globals& g, ExperimentSpec s, dqn::TrainConfig cfg, const std::string& family,
               const std::string& out_dir_flag) {
  const std::filesystem::path dir = out_dir_flag.empty() ? default_output("dqn") : std::filesystem::path(out_dir_flag);
  cfg.seed = g.seed;
  cfg.alpha = s.alpha;
  ConfigRanges ranges;
  if (family == "desk") {
    ranges = ConfigRanges::desk();
  } else if (family == "universal") {
    ranges = ConfigRanges::universal();
  } else {
    throw UsageError("unknown training family '" + family + "'", family);
  }
  ranges.alpha = s.alpha;
  s.output = dir.string();
  s.extra = {{"family", family},
             {"episodes", cfg.episodes},
             {"lr", cfg.lr},
             {"batch", cfg.batch},
             {"min_buffer", cfg.min_buffer},
             {"target_update", cfg.target_update},
             {"eps_start", cfg.eps_start},
             {"eps_min", cfg.eps_min},
             {"eps_decay", cfg.eps_decay},
             {"buffer", cfg.buffer_capacity},
             {"envs", cfg.num_envs},
             {"train_every", cfg.train_every},
             {"eval_every", cfg.eval_every},
             {"eval_episodes", cfg.eval_episodes},
             {"grad_clip", cfg.grad_clip}};

  const json meta_base{{"provenance", s.to_json()}, {"version", kArtifactVersion}};
  const dqn::TrainResult res = dqn::train(cfg, ranges, [&](const dqn::Mlp& net, const dqn::TrainMetrics& row) {
    json meta = meta_base;
    meta["episode"] = row.episode;
    meta["eval_hit_rate"] = row.eval_hit_rate;
    dqn::save_checkpoint(dir / ("ckpt_" + std::to_string(row.episode) + ".json"), net, meta);
    std::cerr << "episode " << row.episode << ": eval hit rate " << row.eval_hit_rate << " (new best)\n";
  });
  json best_meta = meta_base;
  best_meta["episode"] = res.best_episode;
  best_meta["eval_hit_rate"] = res.best_eval;
  dqn::save_checkpoint(dir / "best.json", res.best, best_meta);

  std::ostringstream csv;
  csv << provenance_line(s) << "\n";
  csv << "episode,train_hit_rate,eval_hit_rate,epsilon,lr,loss\n";
  char buf[160];
  for (const auto& m : res.metrics) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.3e,%.6e\n", m.episode, m.train_hit_rate, m.eval_hit_rate,
                  m.epsilon, m.lr, m.loss);
    csv << buf;
  }
  write_file_atomic(dir / "metrics.csv", csv.str());
  std::cerr << "best checkpoint: episode " << res.best_episode << ", eval hit rate " << res.best_eval << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"horizon: horizon-aware betting tests, oracles and confidence sequences"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (1 = strict single-threaded)")->capture_default_str();
  app.add_option("--out", g.out, "Output file (default: $HORIZON_OUT_DIR or current directory)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  ExperimentSpec s;
  s.world = "bern:0.5";
  s.strategy = "kelly";
  auto add_common = [&s](CLI::App* sub, bool with_strategy, bool with_runs) {
    sub->add_option("--world", s.world, "World descriptor, e.g. bern:0.6, beta:mu=0.4,conc=6, mix:mu=0.4,conc=6")
        ->capture_default_str();
    sub->add_option("--N", s.N, "Horizon")->capture_default_str();
    sub->add_option("--m", s.m, "Null mean")->capture_default_str();
    sub->add_option("--alpha", s.alpha, "Level")->capture_default_str();
    if (with_strategy) {
      sub->add_option("--strategy", s.strategy, "Strategy descriptor, e.g. kelly, hedge:default6, dqn:path=best.json")
          ->capture_default_str();
    }
    if (with_runs) sub->add_option("--runs", s.runs, "Monte-Carlo runs")->capture_default_str();
  };

  auto* test = app.add_subcommand("test", "Rejection-by-time curve of a strategy");
  add_common(test, true, true);

  int atoms = 101, phase_atoms = 801, stride = 1;
  double step = 0.01;
  std::optional<double> ymin, ymax;
  auto* phase = app.add_subcommand("phase", "Optimal-action phase diagram from the Bellman oracle");
  add_common(phase, false, false);
  phase->add_option("--atoms", phase_atoms, "Quantization atoms for continuous worlds")->capture_default_str();
  phase->add_option("--step", step, "Log-wealth grid step")->capture_default_str();
  phase->add_option("--ymin", ymin, "Lowest exported log-wealth");
  phase->add_option("--ymax", ymax, "Highest exported log-wealth");
  phase->add_option("--stride", stride, "Export every k-th grid row")->capture_default_str();

  double bet = 0.5, y = 0.0, delta = 0.1, rho = 0.5;
  int t_now = 0;
  std::optional<double> rate_r;
  auto* rates = app.add_subcommand("rates", "Rate functions, correction terms and region classification");
  add_common(rates, false, false);
  rates->add_option("--atoms", atoms, "Quantization atoms for continuous worlds")->capture_default_str();
  rates->add_option("--bet", bet, "Constant bet for the rate functions")->capture_default_str();
  rates->add_option("--t", t_now, "Current time")->capture_default_str();
  rates->add_option("--y", y, "Current log-wealth")->capture_default_str();
  rates->add_option("--r", rate_r, "Target per-step drift (default (b - y)/(N - t))");
  rates->add_option("--delta", delta, "Kelly neighbourhood radius")->capture_default_str();
  rates->add_option("--rho", rho, "Deviation fraction")->capture_default_str();

  int grid_size = 999;
  std::string lcb_out;
  auto* cs = app.add_subcommand("cs", "Confidence sequences over a grid of null means");
  add_common(cs, true, true);
  cs->add_option("--grid", grid_size, "Number of grid points in (0,1)")->capture_default_str();
  cs->add_option("--lcb-out", lcb_out, "Lower-bound ECDF output (default <out>_lcb.csv)");

  dqn::TrainConfig cfg;
  std::string family = "desk", out_dir;
  auto* train = app.add_subcommand("train-dqn", "Train the Double-DQN betting agent");
  train->add_option("--alpha", s.alpha, "Level")->capture_default_str();
  train->add_option("--family", family, "Training world family")->check(CLI::IsMember({"desk", "universal"}))
      ->capture_default_str();
  train->add_option("--out-dir", out_dir, "Checkpoint and metrics directory");
  train->add_option("--episodes", cfg.episodes, "Training episodes")->capture_default_str();
  train->add_option("--lr", cfg.lr, "Learning rate")->capture_default_str();
  train->add_option("--batch", cfg.batch, "Minibatch size")->capture_default_str();
  train->add_option("--min-buffer", cfg.min_buffer, "Transitions before training starts")->capture_default_str();
  train->add_option("--target-update", cfg.target_update, "Gradient steps between target copies")
      ->capture_default_str();
  train->add_option("--eps-start", cfg.eps_start, "Initial exploration rate")->capture_default_str();
  train->add_option("--eps-min", cfg.eps_min, "Final exploration rate")->capture_default_str();
  train->add_option("--eps-decay", cfg.eps_decay, "Exploration decay per episode")->capture_default_str();
  train->add_option("--buffer", cfg.buffer_capacity, "Replay capacity")->capture_default_str();
  train->add_option("--envs", cfg.num_envs, "Lockstep environments")->capture_default_str();
  train->add_option("--train-every", cfg.train_every, "Environment steps per gradient step")->capture_default_str();
  train->add_option("--eval-every", cfg.eval_every, "Episodes between greedy evaluations")->capture_default_str();
  train->add_option("--eval-episodes", cfg.eval_episodes, "Greedy evaluation episodes")->capture_default_str();
  train->add_option("--grad-clip", cfg.grad_clip, "Gradient-norm clip")->capture_default_str();

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval-dqn", "Rejection-by-time curve of a trained checkpoint");
  add_common(eval, false, true);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (test->parsed()) {
      ExperimentSpec es = s;
      es.command = "test";
      es.seed = g.seed;
      es.format = g.format;
      run_test(g, es);
    } else if (phase->parsed()) {
      ExperimentSpec es = s;
      es.command = "phase";
      es.strategy = "oracle";
      es.runs = 0;
      es.seed = g.seed;
      es.format = g.format;
      run_phase(g, es, phase_atoms, step, ymin, ymax, stride);
    } else if (rates->parsed()) {
      ExperimentSpec es = s;
      es.command = "rates";
      es.strategy = "const:" + std::to_string(bet);
      es.runs = 0;
      es.seed = g.seed;
      run_rates(g, es, atoms, bet, t_now, y, rate_r, delta, rho);
    } else if (cs->parsed()) {
      ExperimentSpec es = s;
      es.command = "cs";
      es.seed = g.seed;
      es.format = g.format;
      run_cs(g, es, grid_size, lcb_out);
    } else if (train->parsed()) {
      ExperimentSpec es = base_spec(g, "train-dqn");
      es.world = family;
      es.strategy = "dqn";
      es.alpha = s.alpha;
      es.runs = cfg.episodes;
      run_train(g, es, cfg, family, out_dir);
    } else if (eval->parsed()) {
      ExperimentSpec es = s;
      es.command = "eval-dqn";
      es.strategy = "dqn:path=" + checkpoint;
      es.seed = g.seed;
      es.format = g.format;
      run_test(g, es);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what();
    if (!e.token().empty()) std::cerr << " [token: " << e.token() << "]";
    std::cerr << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
