#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "colabel/diff.hpp"
#include "colabel/mlp.hpp"
#include "colabel/pde.hpp"

namespace colabel {

struct LossWeights {
  double residual = 1.0;
  std::vector<double> boundary;
  double pseudo = 0.0;
};

struct LossBreakdown {
  double residual_term = 0.0;
  std::vector<double> boundary_terms;
  double pseudo_term = 0.0;
  double total = 0.0;
  LossWeights weights;

  // Mirrors the engine's accumulation order so the result matches `total`
  // exactly, not just to roundoff.
  double recompute_total() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int steps = 0;
  double learning_rate = 1e-3;
  AdamConfig adam;
  LossWeights weights;
  std::optional<double> stop_total_loss;
  int history_stride = 100;
};

class Adam {
 public:
  Adam(Eigen::Index n, const AdamConfig& config);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
  void reset();

 private:
  AdamConfig config_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

struct HistoryRow {
  int step = 0;
  LossBreakdown loss;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  int steps_run = 0;
  bool diverged = false;
  bool stopped_early = false;
};

// Terms in engine order: residual over S_CL, one term per boundary group,
// then the pseudo-label value term (always present so indices are stable).
std::vector<LossTerm> build_loss_terms(const PdeProblem& problem, const PointSets& sets,
                                       const LossWeights& weights);

LossBreakdown pinn_loss(const MlpModel& model, const PdeProblem& problem,
                        const PointSets& sets, const LossWeights& weights);

// Full-batch Adam on the composite loss. Mutates `model` in place; on a
// non-finite loss or gradient the pending update is discarded and the last
// finite parameters are kept, with `diverged` set.
TrainResult train_adam(MlpModel& model, const PdeProblem& problem, const PointSets& sets,
                       const TrainConfig& config);

std::vector<double> predict(const MlpModel& model, const std::vector<Point>& grid);

void write_history_csv(const std::vector<HistoryRow>& history, std::size_t n_boundary_groups,
                       const std::string& path);

}  // namespace colabel
