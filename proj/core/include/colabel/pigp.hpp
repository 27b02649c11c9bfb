#pragma once

#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "colabel/kernel.hpp"
#include "colabel/pde.hpp"

namespace colabel {

struct PigpConfig {
  KernelConfig kernel;
  double pseudo_noise = 1e-4;  // noise variance on pseudo-label rows
  int max_gn_iters = 30;
  double tol = 1e-12;  // relative Gauss-Newton step size
};

// Functional order: for each collocation point the value functional, then the
// first derivatives in problem.spec.first order, then the pure second
// derivatives in problem.spec.second order; then one value functional per
// boundary point; then one per pseudo label.
struct GpSolution {
  KernelConfig kernel;
  std::vector<Functional> functionals;
  Eigen::VectorXd coefficients;        // alpha = C^-1 z
  Eigen::VectorXd state;               // z, the converged functional values
  Eigen::LLT<Eigen::MatrixXd> factor;  // of gram + (eta + diagonal_noise) I
  double diagonal_noise = 0.0;         // extra observation noise (regression)
  bool converged = false;
  int gn_iters = 0;
  double last_step = 0.0;   // relative step of the final GN iteration
  double objective = 0.0;   // regularized loss at the returned iterate
};

struct GpPosterior {
  double mean = 0.0;
  double variance = 0.0;
  double variance_preclamp = 0.0;  // before clamping at zero
};

GpSolution pigp_solve(const PdeProblem& problem, const PointSets& sets, const PigpConfig& config,
                      const Eigen::VectorXd* warm_start = nullptr);

GpPosterior gp_posterior(const GpSolution& sol, const Point& x);
std::vector<GpPosterior> gp_posterior_many(const GpSolution& sol, const std::vector<Point>& pts);

// Posterior mean only; skips the variance solve.
double gp_mean(const GpSolution& sol, const Point& x);

// Posterior-mean value and derivatives at x; variance not included.
Jet gp_mean_jet(const GpSolution& sol, const Point& x, const DerivativeSpec& spec);

// Plain GP regression on value observations; noise is added to the Gram
// diagonal on top of eta.
GpSolution gp_regress(const std::vector<Point>& pts, const std::vector<double>& values,
                      double noise, const KernelConfig& kernel);

// Text checkpoint; the Cholesky factor is rebuilt on load.
void save_gp(const GpSolution& sol, const std::string& path);
GpSolution load_gp(const std::string& path);

void write_posterior_csv(const GpSolution& sol, const std::vector<Point>& pts,
                         const std::string& path);

}  // namespace colabel
