#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "colabel/jet.hpp"

namespace colabel {

// Reference solution sampled on a tensor-product grid, values row-major in
// axis order (axes[0] slowest).
struct ReferenceField {
  enum class Provenance { analytic, cole_hopf, spectral };
  std::vector<std::vector<double>> axes;
  std::vector<double> values;
  Provenance provenance = Provenance::analytic;
  double accuracy_estimate = 0.0;

  std::size_t rows() const { return axes.empty() ? 0 : axes[0].size(); }
  std::size_t cols() const { return axes.size() < 2 ? 0 : axes[1].size(); }
  double value(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
};

const char* to_string(ReferenceField::Provenance provenance);

// Viscous Burgers with u(0,x) = sin(pi x) on [-1,1] via the Cole-Hopf
// transform, integrated with composite Gauss-Legendre panels. The
// accuracy_estimate is the panel-halving self-convergence delta; worse than
// 1e-6 aborts.
ReferenceField burgers_reference(double nu, std::vector<double> t_axis,
                                 std::vector<double> x_axis,
                                 const std::string& cache_dir = "");

// Allen-Cahn benchmark via 1024-mode Fourier collocation in x and ETDRK4 in
// time; accuracy_estimate is the step-halving delta, worse than 1e-6 aborts.
ReferenceField allen_cahn_reference(std::vector<double> t_axis, std::vector<double> x_axis,
                                    const std::string& cache_dir = "");

// Manufactured Helmholtz solution sin(pi x) sin(4 pi y), evaluated exactly.
ReferenceField helmholtz_reference(std::vector<double> x_axis, std::vector<double> y_axis);

struct ErrorMetrics {
  double l2_rel = 0.0;
  double linf_abs = 0.0;
  bool reference_norm_zero = false;  // l2_rel holds the absolute norm instead
};

// predicted is row-major over the reference grid.
ErrorMetrics error_metrics(const std::vector<double>& predicted, const ReferenceField& ref);

std::vector<double> uniform_axis(double lo, double hi, int n);

// Row-major flattening of the grid into evaluation points.
std::vector<Point> grid_points(const ReferenceField& field);

}  // namespace colabel
