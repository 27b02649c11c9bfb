#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "colabel/pde.hpp"
#include "colabel/pigp.hpp"
#include "colabel/pinn.hpp"
#include "colabel/semisup.hpp"

namespace colabel {

enum class Algorithm { self_pinn, self_pigp, gp_bootstrap_pinn, co_train };

const char* to_string(Algorithm algorithm);

struct ProblemConfig {
  std::string family;  // vburgers | allen_cahn | helmholtz
  // vburgers (initial profile fixed to sin(pi x), matching the reference)
  double nu = 0.02;
  double horizon = 1.0;
  double x_min = -1.0;
  double x_max = 1.0;
  double u_left = 0.0;
  double u_right = 0.0;
  // helmholtz
  double k = 6.0;
  Box domain{{0.0, 0.0}, {1.0, 1.0}};
};

struct PinnSection {
  std::vector<int> hidden;
  int steps_per_round = 0;
  double learning_rate = 1e-3;
  LossWeights weights;
  std::optional<double> stop_total_loss;
  int history_stride = 100;
};

// Tensor-product oracle grid used for error metrics (axis order matches the
// problem's coordinates). Not affected by the scale factor.
struct MetricsGrid {
  int n0 = 101;
  int n1 = 201;
};

struct ExperimentConfig {
  std::string id;
  std::string description;
  Algorithm algorithm = Algorithm::self_pinn;
  ProblemConfig problem;
  SampleCounts counts;
  std::uint64_t seed = 1;
  int rounds = 5;
  double scale = 1.0;  // in (0, 1]; shrinks point counts and per-round steps
  std::string out_dir;
  MetricsGrid metrics_grid;
  PinnSection pinn;          // self_pinn, gp_bootstrap_pinn, co_train
  PigpConfig pigp;           // self_pigp, co_train
  FidelityCriteria criteria; // self_pinn, self_pigp
  CoTrainConfig co;          // co_train (max_rounds mirrors `rounds`)
  BootstrapConfig bootstrap; // gp_bootstrap_pinn (max_rounds mirrors `rounds`)
};

// Strict parse: unknown keys, missing required fields, wrong types, and
// sections that the chosen algorithm does not use are all ConfigErrors.
ExperimentConfig load_experiment_config(const std::string& path);

// The scale law for point and step counts: max(1, lround(scale * n)).
int scale_count(double scale, int n);

struct ExperimentReport {
  ExperimentConfig config;  // as run, with overrides applied
  std::vector<RoundSnapshot> snapshots;
  std::vector<double> round_seconds;  // wall clock per snapshot
  std::string oracle_provenance;
  double oracle_accuracy = 0.0;
  bool diverged = false;
  std::string verdict;
};

// Runs the configured loop and writes config_echo.json, pointsets.csv,
// metrics.csv, snapshot_round_*.csv, checkpoints, and report.txt into
// config.out_dir. Deterministic given the seed; metrics.csv is byte-stable
// across re-runs. The oracle cache directory comes from COLABEL_CACHE_DIR.
ExperimentReport run_experiment(const ExperimentConfig& config);

struct ExperimentInfo {
  std::string id;
  std::string config_path;  // relative to the repository root
  std::string description;
};

const std::vector<ExperimentInfo>& shipped_experiments();

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

// Derivative spot-checks against finite differences plus oracle
// self-convergence; the `check` CLI verb prints one line per entry.
std::vector<CheckResult> run_self_checks(const std::string& cache_dir);

}  // namespace colabel
