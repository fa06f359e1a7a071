// adavar: command-line front end for runs, benchmarks and estimators.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "adavar/adavar.hpp"

namespace fs = std::filesystem;
using namespace adavar;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> runs;
  std::optional<double> eps;
  std::optional<std::size_t> samples;
  std::string out;
  bool coords = false;
  std::size_t bins = 200;
  std::size_t axis = 0;
  std::size_t jobs = 0;
};

// Single-line JSON on stderr so callers can parse failures.
void report_error(const char* kind, const std::string& field, const std::string& message) {
  nlohmann::json j{{"error", kind}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  std::cerr << j.dump() << '\n';
}

AppConfig effective_config(const Options& o) {
  AppConfig cfg = o.config.empty() ? AppConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.iterations) cfg.solver.iterations = *o.iterations;
  if (o.runs) cfg.experiment.runs = *o.runs;
  if (o.eps) cfg.experiment.eps = *o.eps;
  if (o.samples) cfg.estimation.samples = *o.samples;
  validate_config(cfg);
  return cfg;
}

fs::path prepare_out(const Options& o) {
  if (o.out.empty()) throw ConfigError("--out", "an output directory is required");
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError(dir, "cannot create output directory");
  return dir;
}

// config.json is the effective configuration and loads back with --config.
void write_sidecars(const fs::path& dir, const AppConfig& cfg) {
  write_json(dir / "config.json", to_json(cfg));
  write_version(dir / "VERSION");
}

int cmd_run(const Options& o) {
  const AppConfig cfg = effective_config(o);
  const SolverConfig sc = make_solver_config(cfg);
  const fs::path dir = prepare_out(o);
  Solver solver(sc, derive_stream(cfg.seed, 0));
  TraceCsvWriter w(dir / "trace.csv", sc.box.dim(), o.coords);
  w.write(solver.current());
  for (std::size_t n = 1; n <= sc.iterations; ++n) w.write(solver.step());
  w.close();
  write_sidecars(dir, cfg);
  const auto& best = solver.best();
  std::cout << "final f " << format_double(solver.current().f_value) << "  best f " << format_double(best.f_value)
            << " at n=" << best.n << '\n';
  return kExitOk;
}

int cmd_bench(const Options& o) {
  const AppConfig cfg = effective_config(o);
  const ExperimentConfig ec = make_experiment_config(cfg, o.jobs);
  const fs::path dir = prepare_out(o);
  const ConvergenceResult r = convergence_experiment(ec);
  write_curve_csv(dir / "curve.csv", r.current);
  write_curve_csv(dir / "curve_best.csv", r.best);
  write_distances_csv(dir / "distances.csv", r.current.checkpoints, r.distances);
  write_sidecars(dir, cfg);
  std::printf("%-10s %-18s %-18s\n", "n", "P(fail) current", "P(fail) best");
  for (std::size_t i = 0; i < r.current.checkpoints.size(); ++i) {
    std::printf("%-10zu %-18.4f %-18.4f\n", r.current.checkpoints[i], r.current.failure_fraction[i],
                r.best.failure_fraction[i]);
  }
  return kExitOk;
}

int cmd_estimate_levelset(const Options& o) {
  const AppConfig cfg = effective_config(o);
  const fs::path dir = prepare_out(o);
  const Objective f = make_objective(cfg);
  const BoxDomain box = make_box(cfg);
  std::optional<EmpiricalCdf> cdf;
  if (cfg.estimation.source == EstimationSource::iid) {
    RngStream rng = derive_stream(cfg.seed, 0);
    cdf.emplace(build_cdf_iid(f, box, cfg.estimation.samples, rng));
  } else {
    // Run until enough high-variance iterates are collected or the iteration
    // budget is spent.
    const SolverConfig sc = make_solver_config(cfg);
    Solver solver(sc, derive_stream(cfg.seed, 0));
    std::vector<double> values;
    for (std::size_t n = 1; n <= sc.iterations && values.size() < cfg.estimation.samples; ++n) {
      const auto& r = solver.step();
      if (is_high_variance(r)) values.push_back(r.f_value);
    }
    if (values.empty()) throw std::runtime_error("estimate-levelset: run produced no high-variance iterates");
    cdf.emplace(std::move(values), Provenance::high_variance_iterates);
  }
  std::vector<LevelSetRow> rows;
  for (double level : cfg.estimation.levels) rows.push_back({level, cdf->inverse(level), cdf->size(), cdf->provenance()});
  write_levelset_csv(dir / "levelset.csv", rows);
  write_sidecars(dir, cfg);
  for (const auto& r : rows) {
    std::cout << "level " << format_double(r.level) << "  f_hat " << format_double(r.f_hat) << "  ("
              << r.samples_used << " " << to_string(r.provenance) << " samples)\n";
  }
  return kExitOk;
}

int cmd_estimate_curvature(const Options& o) {
  const AppConfig cfg = effective_config(o);
  const fs::path dir = prepare_out(o);
  const Objective f = make_objective(cfg);
  const BoxDomain box = make_box(cfg);

  // Pilot draw fixes the level sequence: geometric from the pilot median
  // towards the pilot minimum.
  RngStream pilot_rng = derive_stream(cfg.seed, 1);
  const std::size_t pilot_n = std::clamp<std::size_t>(cfg.estimation.samples / 100, 100, 100000);
  const EmpiricalCdf pilot = build_cdf_iid(f, box, pilot_n, pilot_rng);
  const LevelSequence levels = geometric_levels(pilot.inverse(0.5), pilot.min(), cfg.estimation.m);

  RngStream rng = derive_stream(cfg.seed, 0);
  const auto source = uniform_sample_source(f, box, rng, cfg.estimation.samples);

  auto rounds_json = [](const std::vector<CurvatureEstimate>& rounds) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : rounds) {
      arr.push_back({{"l", e.round},
                     {"b1_hat", e.b1},
                     {"b2_hat", e.b2},
                     {"f_star_hat", e.f_star},
                     {"alpha_hat", e.alpha},
                     {"diameter_hat", e.diameter}});
    }
    return arr;
  };

  std::vector<CurvatureEstimate> rounds;
  int status = kExitOk;
  std::string failure;
  try {
    rounds = estimate_b1b2_iterative(source, levels, cfg.estimation.m, cfg.estimation.rounds);
  } catch (const PartialEstimateError& e) {
    rounds = e.rounds();
    failure = e.what();
    status = kExitRuntime;
  }
  nlohmann::json j{{"rounds", rounds_json(rounds)}, {"complete", status == kExitOk}};
  if (!failure.empty()) j["error"] = failure;
  write_json(dir / "curvature.json", j);
  write_sidecars(dir, cfg);
  for (const auto& e : rounds) {
    std::cout << "round " << e.round << "  b1 " << format_double(e.b1) << "  b2 " << format_double(e.b2)
              << "  f* " << format_double(e.f_star) << "  alpha " << format_double(e.alpha) << '\n';
  }
  if (status != kExitOk) report_error("runtime", "", failure);
  return status;
}

int cmd_occupancy(const Options& o) {
  const AppConfig cfg = effective_config(o);
  const SolverConfig sc = make_solver_config(cfg);
  if (o.axis >= sc.box.dim()) throw ConfigError("--axis", "axis out of range");
  if (o.bins < 1) throw ConfigError("--bins", "must be >= 1");
  const fs::path dir = prepare_out(o);
  const OccupationHistogram h = occupation_run(sc, derive_stream(cfg.seed, 0), o.bins, o.axis);
  write_histogram_csv(dir / "histogram.csv", h);
  write_sidecars(dir, cfg);
  if (sc.gradient_free) {
    const auto& reg = sc.gradient_free->region;
    const double lo = reg.low()[o.axis];
    const double hi = reg.high()[o.axis];
    std::cout << "mass of [" << format_double(lo) << ", " << format_double(hi) << "] = "
              << format_double(region_mass(h, lo, hi)) << "  (uniform share "
              << format_double((hi - lo) / sc.box.width(o.axis)) << ")\n";
  }
  return kExitOk;
}

int cmd_gradcheck(const Options& o) {
  AppConfig cfg = effective_config(o);
  const Objective f = make_objective(cfg);
  const BoxDomain box = make_box(cfg);
  const std::size_t points = o.samples.value_or(1000);
  RngStream rng = derive_stream(cfg.seed, 0);
  double worst = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const Point x = uniform_in_box(rng, box);
    const Point g = f.gradient(x);
    const Point fd = finite_diff_grad(f, x);
    worst = std::max(worst, distance(g, fd) / std::max(norm(g), 1.0));
  }
  const bool ok = worst < 1e-6;
  std::cout << "gradcheck: " << points << " points, max relative error " << format_double(worst)
            << (ok ? "  ok" : "  FAILED") << '\n';
  if (!o.out.empty()) {
    const fs::path dir = prepare_out(o);
    cfg.estimation.samples = points;
    write_json(dir / "gradcheck.json", {{"points", points}, {"max_relative_error", worst}, {"ok", ok}});
    write_sidecars(dir, cfg);
  }
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AdaVar: gradient descent with state-dependent noise"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config,-c", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed (overrides config)");
  };
  auto add_iterations = [&](CLI::App* sub) {
    sub->add_option("--iterations,-n", o.iterations, "iterations per run (overrides config)");
  };
  auto add_out = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--out,-o", o.out, "output directory");
    if (required) opt->required();
  };

  auto* run = app.add_subcommand("run", "run one trajectory and write its trace");
  add_common(run);
  add_iterations(run);
  add_out(run, true);
  run->add_flag("--coords", o.coords, "include coordinates in the trace");

  auto* bench = app.add_subcommand("bench", "convergence-probability curves over independent runs");
  add_common(bench);
  add_iterations(bench);
  add_out(bench, true);
  bench->add_option("--runs,-k", o.runs, "number of runs (overrides config)");
  bench->add_option("--eps", o.eps, "success radius (overrides config)");
  bench->add_option("--jobs,-j", o.jobs, "worker threads, 0 = all cores")->default_val(0);

  auto* levelset = app.add_subcommand("estimate-levelset", "estimate cutoffs by inverting the sublevel-volume CDF");
  add_common(levelset);
  add_iterations(levelset);
  add_out(levelset, true);
  levelset->add_option("--samples", o.samples, "sample count (overrides config)");

  auto* curvature = app.add_subcommand("estimate-curvature", "iterative estimate of the curvature bounds b1, b2");
  add_common(curvature);
  add_out(curvature, true);
  curvature->add_option("--samples", o.samples, "maximum uniform samples (overrides config)");

  auto* occupancy = app.add_subcommand("occupancy", "occupation histogram of one trajectory");
  add_common(occupancy);
  add_iterations(occupancy);
  add_out(occupancy, true);
  occupancy->add_option("--bins", o.bins, "number of bins")->default_val(200);
  occupancy->add_option("--axis", o.axis, "coordinate to histogram")->default_val(0);

  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  add_common(gradcheck);
  add_out(gradcheck, false);
  gradcheck->add_option("--samples", o.samples, "number of points (default 1000)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(o);
    if (*bench) return cmd_bench(o);
    if (*levelset) return cmd_estimate_levelset(o);
    if (*curvature) return cmd_estimate_curvature(o);
    if (*occupancy) return cmd_occupancy(o);
    if (*gradcheck) return cmd_gradcheck(o);
  } catch (const ConfigError& e) {
    report_error("config", e.field(), e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    report_error("runtime", "", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
