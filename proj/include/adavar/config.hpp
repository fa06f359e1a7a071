#pragma once

// JSON configuration: parsing with field paths, defaults, and conversion to
// solver/experiment settings. Unknown keys are errors.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "adavar/domain.hpp"
#include "adavar/estimation.hpp"
#include "adavar/experiments.hpp"
#include "adavar/objective.hpp"
#include "adavar/schedule.hpp"
#include "adavar/solver.hpp"

namespace adavar {

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ObjectiveSpec {
  std::string name = "rastrigin";
  RastriginParams params{1.0, 1.0, 0.05, 2};
  StochasticSampleParams noise;
};

struct ScheduleSpec {
  std::string kind = "practical";
  double alpha = 1.0;
  double sigma0 = 1.0;
  double sigma_high = 20.0;
  double eta = 1.0;
  double quantile = 0.5;
  ClassicalDecay classical_decay = ClassicalDecay::inverse_sqrt_n;
  bool monotone_cutoff = false;
  std::optional<double> b1;
  std::optional<double> b2;
  std::optional<double> omega0;
};

struct SolverSpec {
  Variant variant = Variant::two_stage;
  std::size_t iterations = 5000;
  BoundaryPolicy boundary = BoundaryPolicy::reflect;
  std::optional<Point> initial;
  BatchRule batch_rule = BatchRule::proposed_linear;
  std::optional<Point> region_low;
  std::optional<Point> region_high;
  double scale = 0.4;
};

struct ExperimentSpec {
  std::size_t runs = 100;
  double eps = 0.01;
  std::vector<std::size_t> checkpoints;
};

enum class EstimationSource { iid, online };

struct EstimationSpec {
  EstimationSource source = EstimationSource::iid;
  std::size_t samples = 1000000;
  std::vector<double> levels{0.85};
  std::size_t m = 50;
  std::size_t rounds = 3;
};

struct AppConfig {
  std::uint64_t seed = 0;
  ObjectiveSpec objective;
  Point domain_low{-20.0, -20.0};
  Point domain_high{20.0, 20.0};
  ScheduleSpec schedule;
  SolverSpec solver;
  ExperimentSpec experiment;
  EstimationSpec estimation;
};

// Stream reserved for setup-time sampling (cutoff tables), disjoint from runs.
inline constexpr std::uint64_t kSetupStream = ~std::uint64_t{0};

namespace detail {

template <class E>
struct EnumName {
  E value;
  const char* name;
};

inline constexpr EnumName<Variant> kVariants[] = {{Variant::restart, "restart"},
                                                  {Variant::two_stage, "two_stage"},
                                                  {Variant::classical, "classical"},
                                                  {Variant::batch, "batch"},
                                                  {Variant::gradient_free, "gradient_free"}};
inline constexpr EnumName<BoundaryPolicy> kBoundaries[] = {{BoundaryPolicy::reflect, "reflect"},
                                                           {BoundaryPolicy::clamp, "clamp"},
                                                           {BoundaryPolicy::resample, "resample"},
                                                           {BoundaryPolicy::periodic, "periodic"},
                                                           {BoundaryPolicy::none, "none"}};
inline constexpr EnumName<BatchRule> kBatchRules[] = {{BatchRule::proposed_linear, "proposed_linear"},
                                                      {BatchRule::classical_log, "classical_log"}};
inline constexpr EnumName<ClassicalDecay> kDecays[] = {{ClassicalDecay::inverse_sqrt_n, "inverse_sqrt_n"},
                                                       {ClassicalDecay::inverse_sqrt_log_n, "inverse_sqrt_log_n"}};
inline constexpr EnumName<EstimationSource> kSources[] = {{EstimationSource::iid, "iid"},
                                                          {EstimationSource::online, "online"}};

template <class E, std::size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

// Walks one JSON object, remembering which keys were consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, double& out) {
    if (const json* v = get(key)) out = as_double(*v, field(key));
  }
  void read(const std::string& key, std::optional<double>& out) {
    if (const json* v = get(key)) out = as_double(*v, field(key));
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::size_t& out) {
    if (const json* v = get(key)) out = as_size(*v, field(key));
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  template <class E, std::size_t N>
  void read(const std::string& key, E& out, const EnumName<E> (&table)[N]) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      const auto s = v->get<std::string>();
      for (const auto& e : table) {
        if (s == e.name) {
          out = e.value;
          return;
        }
      }
      std::string allowed;
      for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
      throw ConfigError(field(key), "unknown value '" + s + "' (expected one of: " + allowed + ")");
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

  static double as_double(const json& v, const std::string& f) {
    if (!v.is_number()) throw ConfigError(f, "expected a number");
    return v.get<double>();
  }

  static std::size_t as_size(const json& v, const std::string& f) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer()) {
      if (v.get<long long>() < 0) throw ConfigError(f, "expected a non-negative integer");
      return static_cast<std::size_t>(v.get<long long>());
    }
    throw ConfigError(f, "expected a non-negative integer");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// A bound given as a scalar (same on every axis) or a per-axis array.
inline Point read_bound(const json& v, const std::string& f, std::size_t dim) {
  if (v.is_number()) return Point(dim, v.get<double>());
  if (!v.is_array()) throw ConfigError(f, "expected a number or an array of numbers");
  Point out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(ObjectReader::as_double(v[i], f + "[" + std::to_string(i) + "]"));
  if (out.size() != dim) {
    throw ConfigError(f, "expected " + std::to_string(dim) + " entries, got " + std::to_string(out.size()));
  }
  return out;
}

inline json point_json(const Point& p) { return json(p); }

}  // namespace detail

inline AppConfig parse_config(const json& root) {
  using detail::ObjectReader;
  AppConfig cfg;
  ObjectReader r(root, "");

  if (const json* v = r.get("seed")) {
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      throw ConfigError("seed", "expected an unsigned 64-bit integer");
    }
    cfg.seed = v->get<std::uint64_t>();
  }

  if (const json* v = r.get("objective")) {
    ObjectReader o(*v, "objective");
    o.read("name", cfg.objective.name);
    if (cfg.objective.name != "rastrigin" && cfg.objective.name != "rastrigin_stochastic") {
      throw ConfigError("objective.name", "unknown objective '" + cfg.objective.name +
                                              "' (expected rastrigin or rastrigin_stochastic)");
    }
    o.read("a", cfg.objective.params.a);
    o.read("b", cfg.objective.params.b);
    o.read("c", cfg.objective.params.c);
    o.read("dim", cfg.objective.params.d);
    std::optional<double> noise_std;
    std::optional<double> noise_var;
    o.read("noise_std", noise_std);
    o.read("noise_variance", noise_var);
    if (noise_std && noise_var) throw ConfigError("objective.noise_std", "give noise_std or noise_variance, not both");
    if (noise_std) {
      if (!(*noise_std >= 0.0)) throw ConfigError("objective.noise_std", "must be >= 0");
      cfg.objective.noise = StochasticSampleParams::from_std(*noise_std);
    }
    if (noise_var) {
      if (!(*noise_var >= 0.0)) throw ConfigError("objective.noise_variance", "must be >= 0");
      cfg.objective.noise = StochasticSampleParams::from_variance(*noise_var);
    }
    o.finish();
    try {
      cfg.objective.params.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("objective", e.what());
    }
  }
  const std::size_t dim = cfg.objective.params.d;
  cfg.domain_low.assign(dim, -20.0);
  cfg.domain_high.assign(dim, 20.0);

  if (const json* v = r.get("domain")) {
    ObjectReader o(*v, "domain");
    if (const json* b = o.get("low")) cfg.domain_low = detail::read_bound(*b, "domain.low", dim);
    if (const json* b = o.get("high")) cfg.domain_high = detail::read_bound(*b, "domain.high", dim);
    o.finish();
  }
  try {
    BoxDomain(cfg.domain_low, cfg.domain_high);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("domain", e.what());
  }

  if (const json* v = r.get("schedule")) {
    ObjectReader o(*v, "schedule");
    auto& s = cfg.schedule;
    o.read("kind", s.kind);
    if (s.kind != "theoretical" && s.kind != "practical" && s.kind != "classical" && s.kind != "logarithmic") {
      throw ConfigError("schedule.kind", "unknown kind '" + s.kind +
                                             "' (expected theoretical, practical, classical or logarithmic)");
    }
    o.read("alpha", s.alpha);
    o.read("sigma0", s.sigma0);
    if (const json* sh = o.get("sigma_high")) {
      if (sh->is_string() && sh->get<std::string>() == "inf") {
        s.sigma_high = kInf;
      } else {
        s.sigma_high = ObjectReader::as_double(*sh, "schedule.sigma_high");
      }
    }
    o.read("eta", s.eta);
    o.read("quantile", s.quantile);
    o.read("classical_decay", s.classical_decay, detail::kDecays);
    o.read("monotone_cutoff", s.monotone_cutoff);
    o.read("b1", s.b1);
    o.read("b2", s.b2);
    o.read("omega0", s.omega0);
    o.finish();
  }

  if (const json* v = r.get("solver")) {
    ObjectReader o(*v, "solver");
    auto& s = cfg.solver;
    o.read("variant", s.variant, detail::kVariants);
    o.read("iterations", s.iterations);
    o.read("boundary", s.boundary, detail::kBoundaries);
    if (const json* p = o.get("initial")) s.initial = detail::read_bound(*p, "solver.initial", dim);
    o.read("batch_rule", s.batch_rule, detail::kBatchRules);
    if (const json* reg = o.get("region")) {
      ObjectReader rr(*reg, "solver.region");
      if (const json* b = rr.get("low")) s.region_low = detail::read_bound(*b, "solver.region.low", dim);
      if (const json* b = rr.get("high")) s.region_high = detail::read_bound(*b, "solver.region.high", dim);
      rr.finish();
      if (!s.region_low || !s.region_high) throw ConfigError("solver.region", "needs both low and high");
    }
    o.read("scale", s.scale);
    o.finish();
  }

  if (const json* v = r.get("experiment")) {
    ObjectReader o(*v, "experiment");
    o.read("runs", cfg.experiment.runs);
    o.read("eps", cfg.experiment.eps);
    if (const json* c = o.get("checkpoints")) {
      if (!c->is_array()) throw ConfigError("experiment.checkpoints", "expected an array");
      cfg.experiment.checkpoints.clear();
      for (std::size_t i = 0; i < c->size(); ++i) {
        cfg.experiment.checkpoints.push_back(
            ObjectReader::as_size((*c)[i], "experiment.checkpoints[" + std::to_string(i) + "]"));
      }
    }
    o.finish();
  }

  if (const json* v = r.get("estimation")) {
    ObjectReader o(*v, "estimation");
    o.read("source", cfg.estimation.source, detail::kSources);
    o.read("samples", cfg.estimation.samples);
    if (const json* l = o.get("levels")) {
      if (!l->is_array() || l->empty()) throw ConfigError("estimation.levels", "expected a non-empty array");
      cfg.estimation.levels.clear();
      for (std::size_t i = 0; i < l->size(); ++i) {
        cfg.estimation.levels.push_back(
            ObjectReader::as_double((*l)[i], "estimation.levels[" + std::to_string(i) + "]"));
      }
    }
    o.read("m", cfg.estimation.m);
    o.read("rounds", cfg.estimation.rounds);
    o.finish();
  }

  r.finish();
  return cfg;
}

// Checks that do not depend on which subcommand runs.
inline void validate_config(const AppConfig& cfg) {
  const auto& s = cfg.schedule;
  if (cfg.solver.iterations < 1) throw ConfigError("solver.iterations", "must be >= 1");
  if (!(cfg.solver.scale > 0.0)) throw ConfigError("solver.scale", "must be > 0");
  if (!(s.eta > 0.0)) throw ConfigError("schedule.eta", "must be > 0");
  if (!(s.alpha > 0.0)) throw ConfigError("schedule.alpha", "must be > 0");
  if (!(s.sigma0 >= 0.0)) throw ConfigError("schedule.sigma0", "must be >= 0");
  if (!(s.sigma_high > 0.0)) throw ConfigError("schedule.sigma_high", "must be > 0");
  if (!(s.quantile > 0.0 && s.quantile < 1.0)) throw ConfigError("schedule.quantile", "must lie in (0, 1)");
  if (s.omega0 && !(*s.omega0 > 0.0)) throw ConfigError("schedule.omega0", "must be > 0");
  if (s.kind == "practical" && !(s.sigma0 > 0.0)) throw ConfigError("schedule.sigma0", "must be > 0");
  if (s.kind == "theoretical") {
    if (!s.b1) throw ConfigError("schedule.b1", "required for kind theoretical");
    if (!s.b2) throw ConfigError("schedule.b2", "required for kind theoretical");
    if (!(*s.b1 > 0.0 && *s.b1 <= *s.b2)) throw ConfigError("schedule.b1", "need 0 < b1 <= b2");
    if (!(s.eta < 2.0 / *s.b2)) throw ConfigError("schedule.eta", "must be < 2 / b2");
    const double a_star = critical_constants({*s.b1, *s.b2}, s.eta).alpha_star;
    if (!(s.alpha < a_star)) {
      throw ConfigError("schedule.alpha", "must be < alpha* = " + std::to_string(a_star) + " for the given b1, b2, eta");
    }
  }
  if (cfg.solver.initial && !BoxDomain(cfg.domain_low, cfg.domain_high).contains(*cfg.solver.initial)) {
    throw ConfigError("solver.initial", "must lie inside the domain");
  }
  if (cfg.solver.variant == Variant::gradient_free && cfg.solver.region_low) {
    try {
      BoxDomain(*cfg.solver.region_low, *cfg.solver.region_high);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("solver.region", e.what());
    }
  }
  if (cfg.experiment.runs < 1) throw ConfigError("experiment.runs", "must be >= 1");
  if (!(cfg.experiment.eps > 0.0)) throw ConfigError("experiment.eps", "must be > 0");
  for (std::size_t i = 0; i < cfg.experiment.checkpoints.size(); ++i) {
    const std::string f = "experiment.checkpoints[" + std::to_string(i) + "]";
    if (cfg.experiment.checkpoints[i] > cfg.solver.iterations) throw ConfigError(f, "exceeds solver.iterations");
    if (i > 0 && cfg.experiment.checkpoints[i] <= cfg.experiment.checkpoints[i - 1]) {
      throw ConfigError(f, "checkpoints must be strictly ascending");
    }
  }
  if (cfg.estimation.samples < 1) throw ConfigError("estimation.samples", "must be >= 1");
  for (std::size_t i = 0; i < cfg.estimation.levels.size(); ++i) {
    const double l = cfg.estimation.levels[i];
    if (!(l > 0.0 && l <= 1.0)) throw ConfigError("estimation.levels[" + std::to_string(i) + "]", "must lie in (0, 1]");
  }
  if (cfg.estimation.m < 2) throw ConfigError("estimation.m", "must be >= 2");
  if (cfg.estimation.rounds < 1) throw ConfigError("estimation.rounds", "must be >= 1");
}

inline AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

// Effective configuration, suitable for the sidecar and for parse_config.
inline json to_json(const AppConfig& cfg) {
  using detail::enum_name;
  json j;
  j["seed"] = cfg.seed;
  j["objective"] = {{"name", cfg.objective.name},
                    {"a", cfg.objective.params.a},
                    {"b", cfg.objective.params.b},
                    {"c", cfg.objective.params.c},
                    {"dim", cfg.objective.params.d},
                    {"noise_std", cfg.objective.noise.sin_std}};
  j["domain"] = {{"low", cfg.domain_low}, {"high", cfg.domain_high}};
  const auto& s = cfg.schedule;
  json sj = {{"kind", s.kind},
             {"alpha", s.alpha},
             {"sigma0", s.sigma0},
             {"eta", s.eta},
             {"quantile", s.quantile},
             {"classical_decay", enum_name(detail::kDecays, s.classical_decay)},
             {"monotone_cutoff", s.monotone_cutoff}};
  if (std::isinf(s.sigma_high)) {
    sj["sigma_high"] = "inf";
  } else {
    sj["sigma_high"] = s.sigma_high;
  }
  if (s.b1) sj["b1"] = *s.b1;
  if (s.b2) sj["b2"] = *s.b2;
  if (s.omega0) sj["omega0"] = *s.omega0;
  j["schedule"] = sj;
  json so = {{"variant", enum_name(detail::kVariants, cfg.solver.variant)},
             {"iterations", cfg.solver.iterations},
             {"boundary", enum_name(detail::kBoundaries, cfg.solver.boundary)},
             {"batch_rule", enum_name(detail::kBatchRules, cfg.solver.batch_rule)},
             {"scale", cfg.solver.scale}};
  if (cfg.solver.initial) so["initial"] = *cfg.solver.initial;
  if (cfg.solver.region_low) so["region"] = {{"low", *cfg.solver.region_low}, {"high", *cfg.solver.region_high}};
  j["solver"] = so;
  j["experiment"] = {{"runs", cfg.experiment.runs}, {"eps", cfg.experiment.eps}, {"checkpoints", cfg.experiment.checkpoints}};
  j["estimation"] = {{"source", enum_name(detail::kSources, cfg.estimation.source)},
                     {"samples", cfg.estimation.samples},
                     {"levels", cfg.estimation.levels},
                     {"m", cfg.estimation.m},
                     {"rounds", cfg.estimation.rounds}};
  return j;
}

inline BoxDomain make_box(const AppConfig& cfg) { return BoxDomain(cfg.domain_low, cfg.domain_high); }

inline Objective make_objective(const AppConfig& cfg) { return rastrigin(cfg.objective.params); }

// Builds the runnable solver configuration. Volume-driven schedules get their
// cutoff table from an i.i.d. CDF drawn on the setup stream.
inline SolverConfig make_solver_config(const AppConfig& cfg) {
  validate_config(cfg);
  const BoxDomain box = make_box(cfg);
  const Objective f = make_objective(cfg);
  const auto& s = cfg.schedule;
  const int dim = static_cast<int>(cfg.objective.params.d);
  const std::size_t n_max = cfg.solver.iterations + 1;

  auto cutoff_table = [&](const std::function<double(std::size_t)>& volume) {
    RngStream rng = derive_stream(cfg.seed, kSetupStream);
    const EmpiricalCdf cdf = build_cdf_iid(f, box, cfg.estimation.samples, rng);
    return cutoffs_for_volumes(cdf, box.volume(), volume, n_max);
  };

  Schedule schedule = PracticalSchedule{};
  if (s.kind == "practical") {
    schedule = PracticalSchedule{s.sigma0, s.sigma_high, s.alpha, s.quantile, s.eta, s.monotone_cutoff};
  } else if (s.kind == "classical") {
    schedule = ClassicalSchedule{s.sigma0, s.classical_decay, s.eta};
  } else if (s.kind == "theoretical") {
    TheoreticalSchedule t;
    t.alpha = s.alpha;
    t.omega0_volume = s.omega0.value_or(box.volume());
    t.dim = dim;
    t.eta = s.eta;
    t.curvature = {*s.b1, *s.b2};
    t.sigma_high = s.sigma_high;
    t.cutoffs = cutoff_table([&t](std::size_t n) { return t.volume(n); });
    schedule = std::move(t);
  } else {
    LogarithmicSchedule l;
    l.eta0 = s.eta;
    l.omega0_volume = s.omega0.value_or(box.volume());
    l.dim = dim;
    l.sigma_high = s.sigma_high;
    l.cutoffs = cutoff_table([&l](std::size_t n) { return l.volume(n); });
    schedule = std::move(l);
  }

  SolverConfig sc{cfg.solver.variant, f, box, schedule, cfg.solver.iterations, cfg.solver.initial,
                  cfg.solver.boundary, {}, {}};
  sc.batch.rule = cfg.solver.batch_rule;
  const RastriginParams p = cfg.objective.params;
  const StochasticSampleParams noise =
      cfg.objective.name == "rastrigin_stochastic" ? cfg.objective.noise : StochasticSampleParams::from_std(0.0);
  sc.batch.sampler = [p, noise](std::span<const double> x, std::size_t m, RngStream& rng) {
    return batch_eval_grad_aggregated(p, noise, x, m, rng);
  };
  if (cfg.solver.variant == Variant::gradient_free) {
    if (!cfg.solver.region_low) throw ConfigError("solver.region", "required for the gradient_free variant");
    sc.gradient_free = GradientFreeConfig{BoxDomain(*cfg.solver.region_low, *cfg.solver.region_high), cfg.solver.scale};
  }
  try {
    sc.validate();
    std::visit([](const auto& sch) { sch.validate(); }, sc.schedule);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  return sc;
}

inline ExperimentConfig make_experiment_config(const AppConfig& cfg, std::size_t jobs) {
  return ExperimentConfig{make_solver_config(cfg), cfg.experiment.runs, cfg.experiment.eps, cfg.experiment.checkpoints,
                          cfg.seed, jobs};
}

}  // namespace adavar
