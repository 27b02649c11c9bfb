#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

#include "colabel/jet.hpp"
#include "colabel/mlp.hpp"

namespace colabel {

// Residual value at a point together with its partial derivatives with
// respect to the jet entries. A residual callback may only read du at the
// coordinates named in its DerivativeSpec.first and d2u at those in .second,
// and may only report nonzero sensitivities there.
struct ResidualSens {
  double r = 0.0;
  double d_u = 0.0;
  std::array<double, kMaxDim> d_du{};
  std::array<double, kMaxDim> d_d2u{};
};

using ResidualFn = std::function<ResidualSens(const double* x, const Jet& jet)>;

// One summand of a composite loss: weight * mean_i q_i^2, where q_i is the
// PDE residual at point i (kind residual), u(x_i) - target_i (kind value), or
// u(x_i) - u(partner_i) (kind pair, for periodic boundaries). Terms with zero
// weight or no points are skipped entirely, so they cannot perturb results
// even at the bit level.
struct LossTerm {
  enum class Kind { residual, value, pair };
  Kind kind = Kind::value;
  double weight = 1.0;
  std::vector<Point> points;
  std::vector<double> targets;  // value terms: one per point
  std::vector<Point> partners;  // pair terms: one per point
  ResidualFn residual;          // residual terms
  DerivativeSpec spec;          // residual terms: derivatives the callback reads
};

struct LossValue {
  double total = 0.0;
  std::vector<double> terms;  // unweighted mean squares, one per term
  bool finite = true;
};

// Exact value and requested input derivatives of the network at one point.
// du is filled for every coordinate; d2u only for spec.second.
Jet eval_jet(const MlpModel& model, const Point& x, const DerivativeSpec& spec);

// Batched variants (forward only).
std::vector<double> eval_values(const MlpModel& model, const std::vector<Point>& pts);
std::vector<Jet> eval_jets(const MlpModel& model, const std::vector<Point>& pts,
                           const DerivativeSpec& spec);

// Reusable evaluator for a fixed term list. Keeps per-term chunk workspaces
// alive across calls, which matters inside the full-batch training loop.
class LossEngine {
 public:
  LossEngine();
  LossEngine(const MlpModel& model, std::vector<LossTerm> terms);
  LossEngine(LossEngine&&) noexcept;
  LossEngine& operator=(LossEngine&&) noexcept;
  ~LossEngine();

  const std::vector<LossTerm>& terms() const;

  LossValue value(const MlpModel& model);
  // grad is resized to the parameter count and overwritten. Terms are
  // accumulated strictly in list order so that gradients of concatenated term
  // lists add exactly.
  LossValue value_and_grad(const MlpModel& model, Eigen::VectorXd& grad);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

LossValue loss_value(const MlpModel& model, const std::vector<LossTerm>& terms);
LossValue loss_gradient(const MlpModel& model, const std::vector<LossTerm>& terms,
                        Eigen::VectorXd& grad);

// Max relative discrepancy between eval_jet and central finite differences of
// the network value, over the derivatives named in spec.
double fd_check(const MlpModel& model, const Point& x, const DerivativeSpec& spec, double step);

}  // namespace colabel
