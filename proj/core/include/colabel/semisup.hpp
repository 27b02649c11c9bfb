#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "colabel/oracle.hpp"
#include "colabel/pde.hpp"
#include "colabel/pigp.hpp"
#include "colabel/pinn.hpp"

namespace colabel {

// Conjunctive gates a teacher must pass before a test point becomes a pseudo
// label. Only residual_threshold is mandatory.
struct FidelityCriteria {
  double residual_threshold = 1e-5;
  std::optional<double> variance_threshold;
  std::optional<double> proximity_threshold;  // max distance to S_BC or S_PD
  std::optional<double> total_loss_gate;      // selection runs only below this
  double hysteresis = 2.0;                    // prune slack on thresholds
  bool prune = true;
};

void validate_criteria(const FidelityCriteria& criteria);

// Uniform view of a trained model for scoring test points. `variance` is
// empty for models without a posterior (plain PINNs).
struct ModelEval {
  std::function<Jet(const Point&)> jet;
  std::function<double(const Point&)> variance;
  double total_loss = 0.0;
};

// The model is captured by reference and must outlive the eval.
ModelEval make_pinn_eval(const MlpModel& model, const PdeProblem& problem, double total_loss);
ModelEval make_pigp_eval(const GpSolution& solution, const PdeProblem& problem);

// Scores every test point in input order and returns those passing all
// active criteria, valued by the teacher's prediction.
std::vector<PseudoLabel> select_pseudo_labels(const ModelEval& model, const PdeProblem& problem,
                                              const PointSets& sets,
                                              const FidelityCriteria& criteria,
                                              PseudoLabel::Source source, int iteration);

// Re-scores existing labels under the current model and keeps those still
// inside the hysteresis-scaled thresholds. Stored scores are not rewritten.
std::vector<PseudoLabel> prune_pseudo_labels(const ModelEval& model, const PdeProblem& problem,
                                             const std::vector<PseudoLabel>& current,
                                             const FidelityCriteria& criteria);

// Labels selected into `dest`: entries for an already-labeled test point
// refresh its value and scores in place (keeping iteration_added), new test
// points append in input order. Returns the number appended.
std::size_t merge_pseudo_labels(std::vector<PseudoLabel>& dest,
                                const std::vector<PseudoLabel>& selected);

// Test points close to the labeled set with small PINN residual, smoothed by
// a plain GP fit on the PINN's values there. Fewer than 3 survivors skip the
// fit and return nothing. With predict_on_all_test the smoothed values are
// emitted at every test point instead of the survivors only.
std::vector<PseudoLabel> gp_bootstrap_labels(const ModelEval& pinn, const PdeProblem& problem,
                                             const PointSets& sets, double near_dist,
                                             double residual_tol, const KernelConfig& kernel,
                                             double noise, bool predict_on_all_test, int iteration);

// Per-model record inside a round snapshot.
struct ModelRound {
  std::vector<PseudoLabel> pseudo;  // labels feeding this model after the round
  std::size_t pseudo_count = 0;
  ErrorMetrics metrics{};
  bool has_metrics = false;
  double total_loss = 0.0;
  std::optional<LossBreakdown> losses;  // PINN rounds only
};

struct RoundSnapshot {
  int iteration = 0;  // 0 is the baseline training round
  std::optional<ModelRound> pinn;
  std::optional<ModelRound> pigp;
};

using MetricsFn = std::function<ErrorMetrics(const std::function<double(const Point&)>& predict)>;

struct SelfTrainResult {
  std::vector<RoundSnapshot> snapshots;
  bool diverged = false;
};

// Round loop shared by all drivers: baseline training, then up to max_rounds
// of {prune, select, merge, retrain}. Selection is skipped (without
// terminating) while the total-loss gate is closed; the loop breaks when a
// selection pass that did run appends nothing new.
SelfTrainResult self_train_pinn(MlpModel& model, const PdeProblem& problem, PointSets& sets,
                                const TrainConfig& round_config, const FidelityCriteria& criteria,
                                int max_rounds, const MetricsFn& metrics = {});

struct PigpSelfTrainResult {
  GpSolution solution;
  std::vector<RoundSnapshot> snapshots;
};

PigpSelfTrainResult self_train_pigp(const PdeProblem& problem, PointSets& sets,
                                    const PigpConfig& config, const FidelityCriteria& criteria,
                                    int max_rounds, const MetricsFn& metrics = {});

struct BootstrapConfig {
  double near_dist = 0.1;
  double residual_tol = 1e-3;
  KernelConfig kernel;
  double noise = 0.0;
  bool predict_on_all_test = false;
  int max_rounds = 5;
};

// Self-training with gp_bootstrap_labels as the selection step; no pruning
// (each round's fit refreshes the surviving labels' values).
SelfTrainResult bootstrap_train_pinn(MlpModel& model, const PdeProblem& problem, PointSets& sets,
                                     const TrainConfig& round_config,
                                     const BootstrapConfig& config,
                                     const MetricsFn& metrics = {});

struct CoTrainConfig {
  FidelityCriteria pinn_criteria;  // PINN as teacher, labels feed the PIGP
  FidelityCriteria pigp_criteria;  // PIGP as teacher, labels feed the PINN
  bool pinn_teaches = true;
  bool pigp_teaches = true;
  bool train_pinn = true;  // false freezes the PINN after baseline training
  bool train_pigp = true;
  int max_rounds = 5;
  // Dense kernel algebra caps the point budget the PIGP can afford, so its
  // working set may be a prefix of the shared one: 0 / empty means use all.
  int pigp_collocation = 0;
  std::vector<int> pigp_boundary;  // per-group prefix counts
};

struct CoTrainResult {
  std::vector<RoundSnapshot> snapshots;
  GpSolution pigp;
  std::vector<PseudoLabel> pinn_pseudo;  // final label sets per student
  std::vector<PseudoLabel> pigp_pseudo;
  bool diverged = false;
};

// Both models train on shared S_CL/S_BC with separate pseudo sets; each
// enabled channel labels the other's set. Breaks when any channel that ran
// adds nothing new.
CoTrainResult co_train(MlpModel& pinn, const PdeProblem& problem, const PointSets& base,
                       const TrainConfig& pinn_round, const PigpConfig& pigp_config,
                       const CoTrainConfig& config, const MetricsFn& metrics = {});

}  // namespace colabel
