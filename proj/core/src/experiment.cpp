#include "colabel/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>

#include "colabel/diff.hpp"
#include "colabel/errors.hpp"
#include "colabel/oracle.hpp"
#include "json.hpp"

namespace colabel {
namespace {

constexpr double kPi = 3.14159265358979323846;

using nlohmann::json;

[[noreturn]] void bad_config(const std::string& message) { throw ConfigError("config: " + message); }

void expect_keys(const json& object, const char* context,
                 std::initializer_list<const char*> allowed) {
  for (const auto& item : object.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) bad_config(std::string(context) + ": unknown field '" + item.key() + "'");
  }
}

const json& require(const json& object, const char* context, const char* key) {
  const auto it = object.find(key);
  if (it == object.end())
    bad_config(std::string(context) + ": missing required field '" + key + "'");
  return *it;
}

template <typename T>
T as(const json& value, const char* context, const char* key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    bad_config(std::string(context) + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T field(const json& object, const char* context, const char* key) {
  return as<T>(require(object, context, key), context, key);
}

template <typename T>
T field_or(const json& object, const char* context, const char* key, T fallback) {
  const auto it = object.find(key);
  return it == object.end() ? fallback : as<T>(*it, context, key);
}

std::optional<double> optional_field(const json& object, const char* context, const char* key) {
  const auto it = object.find(key);
  if (it == object.end() || it->is_null()) return std::nullopt;
  return as<double>(*it, context, key);
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "self_pinn") return Algorithm::self_pinn;
  if (name == "self_pigp") return Algorithm::self_pigp;
  if (name == "gp_bootstrap_pinn") return Algorithm::gp_bootstrap_pinn;
  if (name == "co_train") return Algorithm::co_train;
  bad_config("unknown algorithm '" + name + "'");
}

ProblemConfig parse_problem(const json& j) {
  const char* ctx = "problem";
  ProblemConfig p;
  p.family = field<std::string>(j, ctx, "family");
  if (p.family == "vburgers") {
    expect_keys(j, ctx, {"family", "nu", "horizon", "x_min", "x_max", "u_left", "u_right"});
    p.nu = field<double>(j, ctx, "nu");
    p.horizon = field_or(j, ctx, "horizon", 1.0);
    p.x_min = field_or(j, ctx, "x_min", -1.0);
    p.x_max = field_or(j, ctx, "x_max", 1.0);
    p.u_left = field_or(j, ctx, "u_left", 0.0);
    p.u_right = field_or(j, ctx, "u_right", 0.0);
    if (!(p.nu > 0.0)) bad_config("problem: nu must be positive");
    if (!(p.horizon > 0.0) || !(p.x_min < p.x_max)) bad_config("problem: empty vburgers domain");
  } else if (p.family == "allen_cahn") {
    expect_keys(j, ctx, {"family"});
  } else if (p.family == "helmholtz") {
    expect_keys(j, ctx, {"family", "k", "x_min", "x_max", "y_min", "y_max"});
    p.k = field<double>(j, ctx, "k");
    p.domain.lo[0] = field_or(j, ctx, "x_min", 0.0);
    p.domain.hi[0] = field_or(j, ctx, "x_max", 1.0);
    p.domain.lo[1] = field_or(j, ctx, "y_min", 0.0);
    p.domain.hi[1] = field_or(j, ctx, "y_max", 1.0);
    if (!(p.domain.lo[0] < p.domain.hi[0]) || !(p.domain.lo[1] < p.domain.hi[1]))
      bad_config("problem: empty helmholtz domain");
  } else {
    bad_config("unknown problem family '" + p.family + "'");
  }
  return p;
}

SampleCounts parse_counts(const json& j) {
  const char* ctx = "points";
  expect_keys(j, ctx, {"collocation", "boundary", "test"});
  SampleCounts counts;
  counts.collocation = field<int>(j, ctx, "collocation");
  counts.per_boundary_group = field<std::vector<int>>(j, ctx, "boundary");
  counts.test = field<int>(j, ctx, "test");
  if (counts.collocation < 1) bad_config("points: collocation must be at least 1");
  if (counts.test < 1) bad_config("points: test must be at least 1");
  for (int n : counts.per_boundary_group)
    if (n < 1) bad_config("points: boundary counts must be at least 1");
  return counts;
}

LossWeights parse_weights(const json& j) {
  const char* ctx = "pinn.weights";
  expect_keys(j, ctx, {"residual", "boundary", "pseudo"});
  LossWeights weights;
  weights.residual = field<double>(j, ctx, "residual");
  weights.boundary = field<std::vector<double>>(j, ctx, "boundary");
  weights.pseudo = field_or(j, ctx, "pseudo", 0.0);
  return weights;
}

PinnSection parse_pinn(const json& j) {
  const char* ctx = "pinn";
  expect_keys(j, ctx, {"hidden", "steps_per_round", "learning_rate", "weights", "stop_total_loss",
                       "history_stride"});
  PinnSection pinn;
  pinn.hidden = field<std::vector<int>>(j, ctx, "hidden");
  pinn.steps_per_round = field<int>(j, ctx, "steps_per_round");
  pinn.learning_rate = field<double>(j, ctx, "learning_rate");
  pinn.weights = parse_weights(require(j, ctx, "weights"));
  pinn.stop_total_loss = optional_field(j, ctx, "stop_total_loss");
  pinn.history_stride = field_or(j, ctx, "history_stride", 100);
  if (pinn.hidden.empty()) bad_config("pinn: hidden layer list is empty");
  if (pinn.steps_per_round < 1) bad_config("pinn: steps_per_round must be at least 1");
  if (!(pinn.learning_rate > 0.0)) bad_config("pinn: learning_rate must be positive");
  return pinn;
}

PigpConfig parse_pigp(const json& j) {
  const char* ctx = "pigp";
  expect_keys(j, ctx, {"sigma", "eta", "beta", "pseudo_noise", "max_gn_iters", "tol"});
  PigpConfig pigp;
  pigp.kernel.sigma = field<std::vector<double>>(j, ctx, "sigma");
  pigp.kernel.eta = field_or(j, ctx, "eta", 1e-5);
  pigp.kernel.beta = field_or(j, ctx, "beta", 1e-5);
  pigp.pseudo_noise = field_or(j, ctx, "pseudo_noise", 1e-4);
  pigp.max_gn_iters = field_or(j, ctx, "max_gn_iters", 30);
  pigp.tol = field_or(j, ctx, "tol", 1e-12);
  validate_kernel(pigp.kernel);
  return pigp;
}

FidelityCriteria parse_criteria(const json& j, const char* ctx) {
  expect_keys(j, ctx, {"residual_threshold", "variance_threshold", "proximity_threshold",
                       "total_loss_gate", "hysteresis", "prune"});
  FidelityCriteria criteria;
  criteria.residual_threshold = field<double>(j, ctx, "residual_threshold");
  criteria.variance_threshold = optional_field(j, ctx, "variance_threshold");
  criteria.proximity_threshold = optional_field(j, ctx, "proximity_threshold");
  criteria.total_loss_gate = optional_field(j, ctx, "total_loss_gate");
  criteria.hysteresis = field_or(j, ctx, "hysteresis", 2.0);
  criteria.prune = field_or(j, ctx, "prune", true);
  validate_criteria(criteria);
  return criteria;
}

CoTrainConfig parse_co(const json& j) {
  const char* ctx = "co";
  expect_keys(j, ctx, {"pinn_criteria", "pigp_criteria", "pinn_teaches", "pigp_teaches",
                       "train_pinn", "train_pigp", "pigp_collocation", "pigp_boundary"});
  CoTrainConfig co;
  co.pinn_criteria = parse_criteria(require(j, ctx, "pinn_criteria"), "co.pinn_criteria");
  co.pigp_criteria = parse_criteria(require(j, ctx, "pigp_criteria"), "co.pigp_criteria");
  co.pinn_teaches = field_or(j, ctx, "pinn_teaches", true);
  co.pigp_teaches = field_or(j, ctx, "pigp_teaches", true);
  co.train_pinn = field_or(j, ctx, "train_pinn", true);
  co.train_pigp = field_or(j, ctx, "train_pigp", true);
  co.pigp_collocation = field_or(j, ctx, "pigp_collocation", 0);
  co.pigp_boundary = field_or(j, ctx, "pigp_boundary", std::vector<int>{});
  if (!co.pinn_teaches && !co.pigp_teaches)
    bad_config("co: at least one teaching channel must be enabled");
  if (co.pigp_collocation < 0) bad_config("co: pigp_collocation must be non-negative");
  for (int n : co.pigp_boundary)
    if (n < 1) bad_config("co: pigp_boundary counts must be at least 1");
  return co;
}

BootstrapConfig parse_bootstrap(const json& j) {
  const char* ctx = "bootstrap";
  expect_keys(j, ctx, {"near_dist", "residual_tol", "sigma", "noise", "predict_on_all_test"});
  BootstrapConfig bootstrap;
  bootstrap.near_dist = field<double>(j, ctx, "near_dist");
  bootstrap.residual_tol = field<double>(j, ctx, "residual_tol");
  bootstrap.kernel.sigma = field<std::vector<double>>(j, ctx, "sigma");
  bootstrap.noise = field_or(j, ctx, "noise", 0.0);
  bootstrap.predict_on_all_test = field_or(j, ctx, "predict_on_all_test", false);
  if (!(bootstrap.near_dist > 0.0) || !(bootstrap.residual_tol > 0.0))
    bad_config("bootstrap: filter thresholds must be positive");
  if (bootstrap.noise < 0.0) bad_config("bootstrap: noise must be non-negative");
  validate_kernel(bootstrap.kernel);
  return bootstrap;
}

MetricsGrid parse_metrics_grid(const json& j) {
  const char* ctx = "metrics_grid";
  expect_keys(j, ctx, {"n0", "n1"});
  MetricsGrid grid;
  grid.n0 = field<int>(j, ctx, "n0");
  grid.n1 = field<int>(j, ctx, "n1");
  if (grid.n0 < 2 || grid.n1 < 2) bad_config("metrics_grid: axes need at least 2 points");
  return grid;
}

PdeProblem build_problem(const ProblemConfig& p) {
  if (p.family == "vburgers")
    return make_vburgers(p.nu, p.horizon, p.x_min, p.x_max,
                         [](double x) { return std::sin(kPi * x); }, p.u_left, p.u_right);
  if (p.family == "allen_cahn") return make_allen_cahn();
  return make_helmholtz(p.k, p.domain);
}

bool uses_pinn(Algorithm a) { return a != Algorithm::self_pigp; }
bool uses_pigp(Algorithm a) { return a == Algorithm::self_pigp || a == Algorithm::co_train; }

void cross_validate(const ExperimentConfig& config) {
  const PdeProblem problem = build_problem(config.problem);
  const size_t groups = problem.boundary_groups.size();
  if (config.counts.per_boundary_group.size() != groups)
    bad_config("points: expected " + std::to_string(groups) + " boundary counts for " +
               config.problem.family);
  if (uses_pinn(config.algorithm) && config.pinn.weights.boundary.size() != groups)
    bad_config("pinn.weights: expected " + std::to_string(groups) + " boundary weights for " +
               config.problem.family);
  if (uses_pigp(config.algorithm) &&
      config.pigp.kernel.sigma.size() != static_cast<size_t>(problem.dim))
    bad_config("pigp: sigma dimension does not match the problem");
  if (config.algorithm == Algorithm::co_train) {
    if (config.co.pigp_collocation > config.counts.collocation)
      bad_config("co: pigp_collocation exceeds points.collocation");
    if (!config.co.pigp_boundary.empty()) {
      if (config.co.pigp_boundary.size() != groups)
        bad_config("co: pigp_boundary needs one count per boundary group");
      for (size_t g = 0; g < groups; ++g)
        if (config.co.pigp_boundary[g] > config.counts.per_boundary_group[g])
          bad_config("co: pigp_boundary exceeds points.boundary");
    }
  }
}

json criteria_json(const FidelityCriteria& c) {
  json j;
  j["residual_threshold"] = c.residual_threshold;
  if (c.variance_threshold) j["variance_threshold"] = *c.variance_threshold;
  if (c.proximity_threshold) j["proximity_threshold"] = *c.proximity_threshold;
  if (c.total_loss_gate) j["total_loss_gate"] = *c.total_loss_gate;
  j["hysteresis"] = c.hysteresis;
  j["prune"] = c.prune;
  return j;
}

json config_json(const ExperimentConfig& config) {
  json j;
  j["id"] = config.id;
  j["description"] = config.description;
  j["algorithm"] = to_string(config.algorithm);
  json problem;
  problem["family"] = config.problem.family;
  if (config.problem.family == "vburgers") {
    problem["nu"] = config.problem.nu;
    problem["horizon"] = config.problem.horizon;
    problem["x_min"] = config.problem.x_min;
    problem["x_max"] = config.problem.x_max;
    problem["u_left"] = config.problem.u_left;
    problem["u_right"] = config.problem.u_right;
  } else if (config.problem.family == "helmholtz") {
    problem["k"] = config.problem.k;
    problem["x_min"] = config.problem.domain.lo[0];
    problem["x_max"] = config.problem.domain.hi[0];
    problem["y_min"] = config.problem.domain.lo[1];
    problem["y_max"] = config.problem.domain.hi[1];
  }
  j["problem"] = problem;
  j["points"] = {{"collocation", config.counts.collocation},
                 {"boundary", config.counts.per_boundary_group},
                 {"test", config.counts.test}};
  j["seed"] = config.seed;
  j["rounds"] = config.rounds;
  j["scale"] = config.scale;
  j["out_dir"] = config.out_dir;
  j["metrics_grid"] = {{"n0", config.metrics_grid.n0}, {"n1", config.metrics_grid.n1}};
  if (uses_pinn(config.algorithm)) {
    json pinn;
    pinn["hidden"] = config.pinn.hidden;
    pinn["steps_per_round"] = config.pinn.steps_per_round;
    pinn["learning_rate"] = config.pinn.learning_rate;
    pinn["weights"] = {{"residual", config.pinn.weights.residual},
                       {"boundary", config.pinn.weights.boundary},
                       {"pseudo", config.pinn.weights.pseudo}};
    if (config.pinn.stop_total_loss) pinn["stop_total_loss"] = *config.pinn.stop_total_loss;
    pinn["history_stride"] = config.pinn.history_stride;
    j["pinn"] = pinn;
  }
  if (uses_pigp(config.algorithm)) {
    j["pigp"] = {{"sigma", config.pigp.kernel.sigma},   {"eta", config.pigp.kernel.eta},
                 {"beta", config.pigp.kernel.beta},     {"pseudo_noise", config.pigp.pseudo_noise},
                 {"max_gn_iters", config.pigp.max_gn_iters}, {"tol", config.pigp.tol}};
  }
  if (config.algorithm == Algorithm::self_pinn || config.algorithm == Algorithm::self_pigp)
    j["criteria"] = criteria_json(config.criteria);
  if (config.algorithm == Algorithm::co_train) {
    json co;
    co["pinn_criteria"] = criteria_json(config.co.pinn_criteria);
    co["pigp_criteria"] = criteria_json(config.co.pigp_criteria);
    co["pinn_teaches"] = config.co.pinn_teaches;
    co["pigp_teaches"] = config.co.pigp_teaches;
    co["train_pinn"] = config.co.train_pinn;
    co["train_pigp"] = config.co.train_pigp;
    if (config.co.pigp_collocation > 0) co["pigp_collocation"] = config.co.pigp_collocation;
    if (!config.co.pigp_boundary.empty()) co["pigp_boundary"] = config.co.pigp_boundary;
    j["co"] = co;
  }
  if (config.algorithm == Algorithm::gp_bootstrap_pinn) {
    j["bootstrap"] = {{"near_dist", config.bootstrap.near_dist},
                      {"residual_tol", config.bootstrap.residual_tol},
                      {"sigma", config.bootstrap.kernel.sigma},
                      {"noise", config.bootstrap.noise},
                      {"predict_on_all_test", config.bootstrap.predict_on_all_test}};
  }
  return j;
}

ReferenceField make_reference(const ExperimentConfig& config, const std::string& cache_dir) {
  const MetricsGrid& g = config.metrics_grid;
  const ProblemConfig& p = config.problem;
  if (p.family == "vburgers")
    return burgers_reference(p.nu, uniform_axis(0.0, p.horizon, g.n0),
                             uniform_axis(p.x_min, p.x_max, g.n1), cache_dir);
  if (p.family == "allen_cahn")
    return allen_cahn_reference(uniform_axis(0.0, 1.0, g.n0), uniform_axis(-1.0, 1.0, g.n1),
                                cache_dir);
  return helmholtz_reference(uniform_axis(p.domain.lo[0], p.domain.hi[0], g.n0),
                             uniform_axis(p.domain.lo[1], p.domain.hi[1], g.n1));
}

void csv_double(std::FILE* f, double v) { std::fprintf(f, "%.17g", v); }

void write_metrics_csv(const ExperimentReport& report, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  std::fputs(
      "iter,pinn_l2_rel,pinn_linf_abs,pinn_total_loss,pinn_pseudo_count,"
      "pigp_l2_rel,pigp_linf_abs,pigp_objective,pigp_pseudo_count\n",
      f);
  auto cell = [&](const std::optional<ModelRound>& round) {
    if (!round) {
      std::fputs(",,,,", f);
      return;
    }
    std::fputc(',', f);
    csv_double(f, round->metrics.l2_rel);
    std::fputc(',', f);
    csv_double(f, round->metrics.linf_abs);
    std::fputc(',', f);
    csv_double(f, round->total_loss);
    std::fprintf(f, ",%zu", round->pseudo_count);
  };
  for (const RoundSnapshot& snap : report.snapshots) {
    std::fprintf(f, "%d", snap.iteration);
    cell(snap.pinn);
    cell(snap.pigp);
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) throw IoError("failed to write " + path);
}

void write_snapshot_csv(const PointSets& base, const RoundSnapshot& snap,
                        const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  std::fputs("iter,coord0,coord1,tag,source,residual_score,variance_score\n", f);
  auto fixed_row = [&](const Point& x, const char* tag) {
    std::fprintf(f, "%d,%.17g,%.17g,%s,,,\n", snap.iteration, x[0], x[1], tag);
  };
  for (const Point& x : base.collocation) fixed_row(x, "CL");
  for (const BoundaryPoint& b : base.boundary) fixed_row(b.x, "BC");
  for (const Point& x : base.test) fixed_row(x, "TEST");
  auto pd_rows = [&](const std::optional<ModelRound>& round) {
    if (!round) return;
    for (const PseudoLabel& label : round->pseudo) {
      std::fprintf(f, "%d,%.17g,%.17g,PD,%s,%.17g,", label.iteration_added, label.x[0],
                   label.x[1], to_string(label.source), label.residual_score);
      if (label.variance_score) csv_double(f, *label.variance_score);
      std::fputc('\n', f);
    }
  };
  pd_rows(snap.pinn);
  pd_rows(snap.pigp);
  if (std::fclose(f) != 0) throw IoError("failed to write " + path);
}

const ModelRound* verdict_round(const RoundSnapshot& snap, const ExperimentConfig& config) {
  if (config.algorithm == Algorithm::self_pigp) return snap.pigp ? &*snap.pigp : nullptr;
  if (config.algorithm == Algorithm::co_train) {
    // The verdict tracks the student; with both channels open, the network.
    if (config.co.pinn_teaches && !config.co.pigp_teaches) return snap.pigp ? &*snap.pigp : nullptr;
    return snap.pinn ? &*snap.pinn : nullptr;
  }
  return snap.pinn ? &*snap.pinn : nullptr;
}

std::string make_verdict(const ExperimentReport& report) {
  if (report.diverged) return "diverged";
  if (report.snapshots.empty()) return "no rounds completed";
  const ModelRound* first = verdict_round(report.snapshots.front(), report.config);
  const ModelRound* last = verdict_round(report.snapshots.back(), report.config);
  if (!first || !last || !first->has_metrics) return "completed";
  char buffer[160];
  const char* word = last->metrics.l2_rel < first->metrics.l2_rel ? "improved"
                     : last->metrics.l2_rel > first->metrics.l2_rel ? "degraded"
                                                                    : "unchanged";
  std::snprintf(buffer, sizeof buffer, "%s: final l2_rel %.3e vs baseline %.3e", word,
                last->metrics.l2_rel, first->metrics.l2_rel);
  return buffer;
}

void write_report_txt(const ExperimentReport& report, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  const ExperimentConfig& config = report.config;
  std::fprintf(f, "experiment: %s\n", config.id.c_str());
  std::fprintf(f, "description: %s\n", config.description.c_str());
  std::fprintf(f, "algorithm: %s\n", to_string(config.algorithm));
  std::fprintf(f, "scale: %g  seed: %llu  rounds requested: %d\n", config.scale,
               static_cast<unsigned long long>(config.seed), config.rounds);
  std::fprintf(f, "oracle: %s (accuracy estimate %.3e)\n", report.oracle_provenance.c_str(),
               report.oracle_accuracy);
  std::fprintf(f, "snapshots: %zu\n", report.snapshots.size());
  std::fprintf(f, "diverged: %s\n\n", report.diverged ? "yes" : "no");
  std::fputs("iter  model  l2_rel        linf_abs      total_loss    |S_PD|  seconds\n", f);
  for (size_t i = 0; i < report.snapshots.size(); ++i) {
    const RoundSnapshot& snap = report.snapshots[i];
    const double seconds = i < report.round_seconds.size() ? report.round_seconds[i] : 0.0;
    auto line = [&](const char* name, const ModelRound& round, bool first_line) {
      std::fprintf(f, "%-5d %-6s %-13.6e %-13.6e %-13.6e %-7zu %.2f\n", snap.iteration, name,
                   round.metrics.l2_rel, round.metrics.linf_abs, round.total_loss,
                   round.pseudo_count, first_line ? seconds : 0.0);
    };
    if (snap.pinn) line("pinn", *snap.pinn, true);
    if (snap.pigp) line("pigp", *snap.pigp, !snap.pinn);
  }
  std::fprintf(f, "\nverdict: %s\n", report.verdict.c_str());
  if (std::fclose(f) != 0) throw IoError("failed to write " + path);
}

std::string cache_directory() {
  const char* env = std::getenv("COLABEL_CACHE_DIR");
  return env ? env : "";
}

}  // namespace

const char* to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::self_pinn: return "self_pinn";
    case Algorithm::self_pigp: return "self_pigp";
    case Algorithm::gp_bootstrap_pinn: return "gp_bootstrap_pinn";
    case Algorithm::co_train: return "co_train";
  }
  return "unknown";
}

int scale_count(double scale, int n) {
  return std::max(1, static_cast<int>(std::lround(scale * n)));
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    bad_config(path + " is not valid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) bad_config(path + ": top level must be an object");

  const char* ctx = "config";
  expect_keys(j, ctx,
              {"id", "description", "algorithm", "problem", "points", "seed", "rounds", "scale",
               "out_dir", "metrics_grid", "pinn", "pigp", "criteria", "co", "bootstrap"});

  ExperimentConfig config;
  config.id = field<std::string>(j, ctx, "id");
  if (config.id.empty()) bad_config("id must not be empty");
  config.description = field_or<std::string>(j, ctx, "description", "");
  config.algorithm = parse_algorithm(field<std::string>(j, ctx, "algorithm"));
  config.problem = parse_problem(require(j, ctx, "problem"));
  config.counts = parse_counts(require(j, ctx, "points"));
  config.seed = field_or<std::uint64_t>(j, ctx, "seed", 1);
  config.rounds = field<int>(j, ctx, "rounds");
  if (config.rounds < 1) bad_config("rounds must be at least 1");
  config.scale = field_or(j, ctx, "scale", 1.0);
  if (!(config.scale > 0.0) || config.scale > 1.0) bad_config("scale must lie in (0, 1]");
  config.out_dir = field_or<std::string>(j, ctx, "out_dir", "out/" + config.id);
  if (j.contains("metrics_grid")) config.metrics_grid = parse_metrics_grid(j["metrics_grid"]);

  const Algorithm a = config.algorithm;
  auto reject_unused = [&](const char* key, bool used) {
    if (!used && j.contains(key))
      bad_config(std::string("section '") + key + "' is not used by algorithm " + to_string(a));
  };
  reject_unused("pinn", uses_pinn(a));
  reject_unused("pigp", uses_pigp(a));
  reject_unused("criteria", a == Algorithm::self_pinn || a == Algorithm::self_pigp);
  reject_unused("co", a == Algorithm::co_train);
  reject_unused("bootstrap", a == Algorithm::gp_bootstrap_pinn);

  if (uses_pinn(a)) config.pinn = parse_pinn(require(j, ctx, "pinn"));
  if (uses_pigp(a)) config.pigp = parse_pigp(require(j, ctx, "pigp"));
  if (a == Algorithm::self_pinn || a == Algorithm::self_pigp)
    config.criteria = parse_criteria(require(j, ctx, "criteria"), "criteria");
  if (a == Algorithm::co_train) config.co = parse_co(require(j, ctx, "co"));
  if (a == Algorithm::gp_bootstrap_pinn)
    config.bootstrap = parse_bootstrap(require(j, ctx, "bootstrap"));
  config.co.max_rounds = config.rounds;
  config.bootstrap.max_rounds = config.rounds;

  cross_validate(config);
  return config;
}

ExperimentReport run_experiment(const ExperimentConfig& input) {
  ExperimentConfig config = input;
  config.co.max_rounds = config.rounds;
  config.bootstrap.max_rounds = config.rounds;

  SampleCounts counts = config.counts;
  counts.collocation = scale_count(config.scale, counts.collocation);
  for (int& n : counts.per_boundary_group) n = scale_count(config.scale, n);
  counts.test = scale_count(config.scale, counts.test);
  CoTrainConfig co = config.co;
  if (co.pigp_collocation > 0)
    co.pigp_collocation = scale_count(config.scale, co.pigp_collocation);
  for (int& n : co.pigp_boundary) n = scale_count(config.scale, n);
  TrainConfig round_config;
  round_config.steps = scale_count(config.scale, config.pinn.steps_per_round);
  round_config.learning_rate = config.pinn.learning_rate;
  round_config.weights = config.pinn.weights;
  round_config.stop_total_loss = config.pinn.stop_total_loss;
  round_config.history_stride = config.pinn.history_stride;

  const PdeProblem problem = build_problem(config.problem);
  PointSets sets = sample_points(problem, counts, config.seed);

  const ReferenceField reference = make_reference(config, cache_directory());
  const std::vector<Point> grid = grid_points(reference);

  ExperimentReport report;
  report.config = config;
  report.oracle_provenance = to_string(reference.provenance);
  report.oracle_accuracy = reference.accuracy_estimate;

  const auto start = std::chrono::steady_clock::now();
  const int calls_per_snapshot = config.algorithm == Algorithm::co_train ? 2 : 1;
  int metric_calls = 0;
  double last_mark = 0.0;
  const MetricsFn metrics = [&](const std::function<double(const Point&)>& predict) {
    std::vector<double> values(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) values[i] = predict(grid[i]);
    const ErrorMetrics m = error_metrics(values, reference);
    if (++metric_calls % calls_per_snapshot == 0) {
      const double now = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      report.round_seconds.push_back(now - last_mark);
      last_mark = now;
    }
    return m;
  };

  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  const auto out = [&](const char* name) { return (fs::path(config.out_dir) / name).string(); };

  Rng init_rng(config.seed + 1);
  MlpModel model;
  if (uses_pinn(config.algorithm)) model = init_mlp(problem.dim, config.pinn.hidden, init_rng);

  switch (config.algorithm) {
    case Algorithm::self_pinn: {
      const SelfTrainResult result = self_train_pinn(model, problem, sets, round_config,
                                                     config.criteria, config.rounds, metrics);
      report.snapshots = result.snapshots;
      report.diverged = result.diverged;
      save_mlp(model, out("model.ckpt"));
      break;
    }
    case Algorithm::self_pigp: {
      const PigpSelfTrainResult result =
          self_train_pigp(problem, sets, config.pigp, config.criteria, config.rounds, metrics);
      report.snapshots = result.snapshots;
      save_gp(result.solution, out("gp.ckpt"));
      break;
    }
    case Algorithm::gp_bootstrap_pinn: {
      const SelfTrainResult result = bootstrap_train_pinn(model, problem, sets, round_config,
                                                          config.bootstrap, metrics);
      report.snapshots = result.snapshots;
      report.diverged = result.diverged;
      save_mlp(model, out("model.ckpt"));
      break;
    }
    case Algorithm::co_train: {
      const CoTrainResult result =
          co_train(model, problem, sets, round_config, config.pigp, co, metrics);
      report.snapshots = result.snapshots;
      report.diverged = result.diverged;
      save_mlp(model, out("model.ckpt"));
      save_gp(result.pigp, out("gp.ckpt"));
      break;
    }
  }

  report.verdict = make_verdict(report);

  std::ofstream echo(out("config_echo.json"));
  if (!echo) throw IoError("cannot write config_echo.json");
  echo << config_json(config).dump(2) << '\n';
  echo.close();

  write_point_sets_csv(sets, out("pointsets.csv"));
  write_metrics_csv(report, out("metrics.csv"));
  for (const RoundSnapshot& snap : report.snapshots) {
    char name[48];
    std::snprintf(name, sizeof name, "snapshot_round_%03d.csv", snap.iteration);
    write_snapshot_csv(sets, snap, out(name));
  }
  write_report_txt(report, out("report.txt"));
  return report;
}

const std::vector<ExperimentInfo>& shipped_experiments() {
  static const std::vector<ExperimentInfo> table = {
      {"exp_pinn_self_vburgers", "configs/exp_pinn_self_vburgers.json",
       "Self-training PINN on viscous Burgers, nu = 0.01/pi"},
      {"exp_pigp_self_vburgers", "configs/exp_pigp_self_vburgers.json",
       "Self-training kernel-collocation GP on viscous Burgers, nu = 0.02"},
      {"exp_pinn_gp_bootstrap_allen_cahn", "configs/exp_pinn_gp_bootstrap_allen_cahn.json",
       "PINN on Allen-Cahn fed by a plain GP fit near the labeled data"},
      {"exp_cotrain_pinn_trains_pigp_vburgers", "configs/exp_cotrain_pinn_trains_pigp_vburgers.json",
       "Frozen PINN teacher labels points for a kernel GP on viscous Burgers, nu = 0.01"},
      {"exp_cotrain_pigp_trains_pinn_helmholtz", "configs/exp_cotrain_pigp_trains_pinn_helmholtz.json",
       "Kernel GP teacher labels points for a PINN on a Helmholtz problem"},
      {"smoke_self_pinn", "configs/smoke_self_pinn.json",
       "Seconds-scale PINN self-training run for pipeline checks"},
      {"smoke_self_pigp", "configs/smoke_self_pigp.json",
       "Seconds-scale GP self-training run for pipeline checks"},
      {"smoke_gp_bootstrap", "configs/smoke_gp_bootstrap.json",
       "Seconds-scale Allen-Cahn bootstrap run for pipeline checks"},
      {"smoke_pinn_trains_pigp", "configs/smoke_pinn_trains_pigp.json",
       "Seconds-scale PINN-teaches-GP run for pipeline checks"},
      {"smoke_pigp_trains_pinn", "configs/smoke_pigp_trains_pinn.json",
       "Seconds-scale GP-teaches-PINN run for pipeline checks"},
  };
  return table;
}

std::vector<CheckResult> run_self_checks(const std::string& cache_dir) {
  std::vector<CheckResult> results;
  char detail[128];

  double worst_fd = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    MlpModel model = init_mlp(2, {12, 12}, rng);
    DerivativeSpec spec;
    spec.first = {0, 1};
    spec.second = {0, 1};
    for (int i = 0; i < 5; ++i) {
      const Point x = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      worst_fd = std::max(worst_fd, fd_check(model, x, spec, 1e-5));
    }
  }
  std::snprintf(detail, sizeof detail, "max relative error %.3e", worst_fd);
  results.push_back({"derivatives vs finite differences", worst_fd < 1e-5, detail});

  try {
    const ReferenceField burgers =
        burgers_reference(0.02, uniform_axis(0.0, 1.0, 5), uniform_axis(-1.0, 1.0, 9), cache_dir);
    std::snprintf(detail, sizeof detail, "self-convergence %.3e", burgers.accuracy_estimate);
    results.push_back({"burgers quadrature self-convergence", burgers.accuracy_estimate < 1e-6,
                       detail});
  } catch (const OracleError& e) {
    results.push_back({"burgers quadrature self-convergence", false, e.what()});
  }

  try {
    const ReferenceField ac =
        allen_cahn_reference(uniform_axis(0.0, 1.0, 3), uniform_axis(-1.0, 1.0, 17), cache_dir);
    std::snprintf(detail, sizeof detail, "self-convergence %.3e", ac.accuracy_estimate);
    results.push_back({"allen-cahn spectral self-convergence", ac.accuracy_estimate < 1e-6,
                       detail});
  } catch (const OracleError& e) {
    results.push_back({"allen-cahn spectral self-convergence", false, e.what()});
  }

  const ReferenceField helm =
      helmholtz_reference(uniform_axis(0.0, 1.0, 11), uniform_axis(0.0, 1.0, 11));
  bool finite = true;
  for (double v : helm.values) finite = finite && std::isfinite(v);
  std::snprintf(detail, sizeof detail, "analytic, %zu grid values finite", helm.values.size());
  results.push_back({"helmholtz reference", finite && helm.accuracy_estimate < 1e-12, detail});
  return results;
}

}  // namespace colabel
