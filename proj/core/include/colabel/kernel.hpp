#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "colabel/jet.hpp"

namespace colabel {

struct KernelConfig {
  std::vector<double> sigma;  // per-coordinate lengthscales; size = input dim
  double eta = 1e-5;          // nugget on the Gram diagonal
  double beta = 1e-5;         // noise variance on PDE/boundary constraint rows
  bool literal_abs = false;   // audit-only exp(+sum |dx|/sigma) variant
};

// A measurement functional: value, first or pure-second derivative in one
// coordinate, anchored at a point.
struct Functional {
  enum class Kind { value, d1, d2 };
  Kind kind = Kind::value;
  int coord = 0;
  Point x{};
};

void validate_kernel(const KernelConfig& config);

double kernel_eval(const KernelConfig& config, const Point& a, const Point& b);

// L_i L_j' K(x_i, x_j') with L_i acting on the first argument and L_j' on the
// second.
double gram_entry(const KernelConfig& config, const Functional& fi, const Functional& fj);

// L_i d^q/dx_c^q K(x_i, x) with the derivative taken in the second argument.
double cross_entry(const KernelConfig& config, const Functional& fi, const Point& x,
                   int q_order, int q_coord);

// Lower triangle assembled then mirrored, so the result is symmetric exactly.
Eigen::MatrixXd assemble_gram(const KernelConfig& config, const std::vector<Functional>& fns);

// Cholesky of gram + (eta + extra_diagonal) I; failure reports the smallest
// pivot seen.
Eigen::LLT<Eigen::MatrixXd> factor_gram(const KernelConfig& config, const Eigen::MatrixXd& gram,
                                        double extra_diagonal = 0.0);

}  // namespace colabel
