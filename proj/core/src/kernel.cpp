#include "colabel/kernel.hpp"

#include <cmath>
#include <cstdio>

#include <Eigen/Eigenvalues>

#include "colabel/errors.hpp"

namespace colabel {
namespace {

// d^n/d(delta)^n exp(-delta^2 / (2 sigma^2)) for n in [0, 4].
double gaussian_factor(int order, double delta, double inv_s2, double e) {
  const double d2 = delta * delta;
  switch (order) {
    case 0:
      return e;
    case 1:
      return -delta * inv_s2 * e;
    case 2:
      return (d2 * inv_s2 - 1.0) * inv_s2 * e;
    case 3:
      return (3.0 - d2 * inv_s2) * delta * inv_s2 * inv_s2 * e;
    case 4:
      return ((d2 * inv_s2 - 6.0) * d2 * inv_s2 + 3.0) * inv_s2 * inv_s2 * e;
    default:
      throw ConfigError("kernel: unsupported derivative order");
  }
}

void orders_of(const Functional& f, int dim, int orders[kMaxDim]) {
  for (int c = 0; c < kMaxDim; ++c) orders[c] = 0;
  if (f.kind == Functional::Kind::value) return;
  if (f.coord < 0 || f.coord >= dim) throw ConfigError("kernel: functional coordinate out of range");
  orders[f.coord] = f.kind == Functional::Kind::d1 ? 1 : 2;
}

}  // namespace

void validate_kernel(const KernelConfig& config) {
  if (config.sigma.empty() || config.sigma.size() > kMaxDim)
    throw ConfigError("kernel: sigma must have one entry per coordinate");
  for (double s : config.sigma)
    if (!(s > 0.0)) throw ConfigError("kernel: lengthscales must be positive");
  if (!(config.eta > 0.0)) throw ConfigError("kernel: eta must be positive");
  if (!(config.beta > 0.0)) throw ConfigError("kernel: beta must be positive");
}

double kernel_eval(const KernelConfig& config, const Point& a, const Point& b) {
  const int dim = static_cast<int>(config.sigma.size());
  double s = 0.0;
  if (config.literal_abs) {
    for (int c = 0; c < dim; ++c) s += std::abs(a[c] - b[c]) / config.sigma[c];
    return std::exp(s);
  }
  for (int c = 0; c < dim; ++c) {
    const double d = a[c] - b[c];
    s += d * d / (2.0 * config.sigma[c] * config.sigma[c]);
  }
  return std::exp(-s);
}

double gram_entry(const KernelConfig& config, const Functional& fi, const Functional& fj) {
  const int dim = static_cast<int>(config.sigma.size());
  if (config.literal_abs) {
    if (fi.kind != Functional::Kind::value || fj.kind != Functional::Kind::value)
      throw ConfigError("kernel: literal-abs kernel supports value functionals only");
    return kernel_eval(config, fi.x, fj.x);
  }
  int p[kMaxDim], q[kMaxDim];
  orders_of(fi, dim, p);
  orders_of(fj, dim, q);
  double out = 1.0;
  for (int c = 0; c < dim; ++c) {
    const double delta = fi.x[c] - fj.x[c];
    const double inv_s2 = 1.0 / (config.sigma[c] * config.sigma[c]);
    const double e = std::exp(-0.5 * delta * delta * inv_s2);
    double f = gaussian_factor(p[c] + q[c], delta, inv_s2, e);
    if (q[c] & 1) f = -f;
    out *= f;
  }
  return out;
}

double cross_entry(const KernelConfig& config, const Functional& fi, const Point& x,
                   int q_order, int q_coord) {
  Functional fj;
  fj.x = x;
  if (q_order == 0) {
    fj.kind = Functional::Kind::value;
  } else if (q_order == 1) {
    fj.kind = Functional::Kind::d1;
    fj.coord = q_coord;
  } else if (q_order == 2) {
    fj.kind = Functional::Kind::d2;
    fj.coord = q_coord;
  } else {
    throw ConfigError("kernel: unsupported query derivative order");
  }
  return gram_entry(config, fi, fj);
}

Eigen::MatrixXd assemble_gram(const KernelConfig& config, const std::vector<Functional>& fns) {
  validate_kernel(config);
  const Eigen::Index n = static_cast<Eigen::Index>(fns.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i)
      gram(i, j) = gram_entry(config, fns[static_cast<size_t>(i)], fns[static_cast<size_t>(j)]);
    for (Eigen::Index i = 0; i < j; ++i) gram(i, j) = gram(j, i);
  }
  return gram;
}

Eigen::LLT<Eigen::MatrixXd> factor_gram(const KernelConfig& config, const Eigen::MatrixXd& gram,
                                        double extra_diagonal) {
  Eigen::MatrixXd c = gram;
  c.diagonal().array() += config.eta + extra_diagonal;
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
    const double pivot = ldlt.vectorD().minCoeff();
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "gram matrix is not positive definite (smallest pivot %.3e); "
                  "increase eta or thin the functional set",
                  pivot);
    throw NumericError(msg);
  }
  return llt;
}

}  // namespace colabel
