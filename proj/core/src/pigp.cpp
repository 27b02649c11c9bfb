#include "colabel/pigp.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "colabel/errors.hpp"

namespace colabel {
namespace {

// One linearized constraint row: sparse coefficients over the functional
// vector plus the current misfit m(z) (target already folded in).
struct ConstraintRow {
  int idx[4] = {0, 0, 0, 0};
  double coef[4] = {0.0, 0.0, 0.0, 0.0};
  int nnz = 0;
  double misfit = 0.0;
  double noise = 0.0;

  void add(int i, double c) {
    idx[nnz] = i;
    coef[nnz] = c;
    ++nnz;
  }
};

struct FunctionalLayout {
  std::vector<Functional> fns;
  int block = 0;  // functionals per collocation point
};

FunctionalLayout build_functionals(const PdeProblem& problem, const PointSets& sets) {
  const int nf = static_cast<int>(problem.spec.first.size());
  const int ns = static_cast<int>(problem.spec.second.size());
  FunctionalLayout layout;
  layout.block = 1 + nf + ns;
  layout.fns.reserve(sets.collocation.size() * static_cast<size_t>(layout.block) +
                     sets.boundary.size() + sets.pseudo.size());
  for (const Point& x : sets.collocation) {
    Functional f;
    f.x = x;
    f.kind = Functional::Kind::value;
    layout.fns.push_back(f);
    for (int c : problem.spec.first) {
      f.kind = Functional::Kind::d1;
      f.coord = c;
      layout.fns.push_back(f);
    }
    for (int c : problem.spec.second) {
      f.kind = Functional::Kind::d2;
      f.coord = c;
      layout.fns.push_back(f);
    }
  }
  for (const BoundaryPoint& bp : sets.boundary) {
    Functional f;
    f.x = bp.x;
    f.kind = Functional::Kind::value;
    layout.fns.push_back(f);
  }
  for (const PseudoLabel& pl : sets.pseudo) {
    Functional f;
    f.x = pl.x;
    f.kind = Functional::Kind::value;
    layout.fns.push_back(f);
  }
  return layout;
}

// Rebuilds the interior-row coefficients and every misfit at the iterate z.
void linearize(const PdeProblem& problem, const PointSets& sets, const FunctionalLayout& layout,
               const PigpConfig& config, const Eigen::VectorXd& z,
               std::vector<ConstraintRow>& rows) {
  const int nf = static_cast<int>(problem.spec.first.size());
  const int ns = static_cast<int>(problem.spec.second.size());
  const size_t n_coll = sets.collocation.size();
  const int bc_base = static_cast<int>(n_coll) * layout.block;
  const int pd_base = bc_base + static_cast<int>(sets.boundary.size());
  rows.clear();
  rows.reserve(n_coll + sets.boundary.size() + sets.pseudo.size());

  for (size_t i = 0; i < n_coll; ++i) {
    const int off = static_cast<int>(i) * layout.block;
    Jet jet;
    jet.u = z[off];
    for (int j = 0; j < nf; ++j) jet.du[static_cast<size_t>(problem.spec.first[j])] = z[off + 1 + j];
    for (int s = 0; s < ns; ++s) jet.set_d2(problem.spec.second[s], z[off + 1 + nf + s]);
    const ResidualSens sens = problem.residual(sets.collocation[i].data(), jet);
    ConstraintRow row;
    row.add(off, sens.d_u);
    for (int j = 0; j < nf; ++j) row.add(off + 1 + j, sens.d_du[static_cast<size_t>(problem.spec.first[j])]);
    for (int s = 0; s < ns; ++s)
      row.add(off + 1 + nf + s, sens.d_d2u[static_cast<size_t>(problem.spec.second[s])]);
    row.misfit = sens.r;
    row.noise = config.kernel.beta;
    rows.push_back(row);
  }
  for (size_t k = 0; k < sets.boundary.size(); ++k) {
    const BoundaryPoint& bp = sets.boundary[k];
    const int idx = bc_base + static_cast<int>(k);
    ConstraintRow row;
    row.add(idx, 1.0);
    row.misfit = z[idx] - problem.boundary_groups[static_cast<size_t>(bp.group)].target(bp.x);
    row.noise = config.kernel.beta;
    rows.push_back(row);
  }
  for (size_t p = 0; p < sets.pseudo.size(); ++p) {
    const int idx = pd_base + static_cast<int>(p);
    ConstraintRow row;
    row.add(idx, 1.0);
    row.misfit = z[idx] - sets.pseudo[p].value;
    row.noise = config.pseudo_noise;
    rows.push_back(row);
  }
}

double misfit_objective(const std::vector<ConstraintRow>& rows) {
  double q = 0.0;
  for (const ConstraintRow& row : rows) q += row.misfit * row.misfit / row.noise;
  return q;
}

void check_inputs(const PdeProblem& problem, const PointSets& sets, const PigpConfig& config) {
  validate_kernel(config.kernel);
  if (static_cast<int>(config.kernel.sigma.size()) != problem.dim)
    throw ConfigError("pigp_solve: kernel needs one lengthscale per coordinate");
  if (config.kernel.literal_abs)
    throw ConfigError("pigp_solve: literal-abs kernel has no derivative functionals");
  if (sets.collocation.empty()) throw ConfigError("pigp_solve: no collocation points");
  if (!(config.pseudo_noise > 0.0)) throw ConfigError("pigp_solve: pseudo_noise must be positive");
  if (config.max_gn_iters < 1) throw ConfigError("pigp_solve: max_gn_iters must be positive");
  if (!(config.tol > 0.0)) throw ConfigError("pigp_solve: tol must be positive");
  for (const BoundaryPoint& bp : sets.boundary) {
    if (bp.group < 0 || bp.group >= static_cast<int>(problem.boundary_groups.size()))
      throw ConfigError("pigp_solve: boundary point references unknown group");
    if (problem.boundary_groups[static_cast<size_t>(bp.group)].kind != BoundaryGroup::Kind::dirichlet)
      throw ConfigError("pigp_solve: periodic boundary groups are not supported");
  }
}

void append_hexfloat(std::ostream& out, const Eigen::VectorXd& v) {
  out << std::hexfloat;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << v[i] << "\n";
  out << std::defaultfloat;
}

double read_double(std::istream& in, const std::string& path, const char* what) {
  std::string tok;
  if (!(in >> tok)) throw IoError(std::string("load_gp: truncated ") + what + " in " + path);
  return std::strtod(tok.c_str(), nullptr);
}

}  // namespace

GpSolution pigp_solve(const PdeProblem& problem, const PointSets& sets, const PigpConfig& config,
                      const Eigen::VectorXd* warm_start) {
  check_inputs(problem, sets, config);
  FunctionalLayout layout = build_functionals(problem, sets);
  const Eigen::Index n = static_cast<Eigen::Index>(layout.fns.size());

  GpSolution sol;
  sol.kernel = config.kernel;
  sol.functionals = std::move(layout.fns);

  const Eigen::MatrixXd gram = assemble_gram(config.kernel, sol.functionals);
  sol.factor = factor_gram(config.kernel, gram);

  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  if (warm_start) {
    if (warm_start->size() != n) throw ConfigError("pigp_solve: warm start has wrong size");
    z = *warm_start;
  }

  std::vector<ConstraintRow> rows;
  const Eigen::Index m =
      static_cast<Eigen::Index>(sets.collocation.size() + sets.boundary.size() + sets.pseudo.size());
  Eigen::MatrixXd cjt(n, m);
  Eigen::MatrixXd s(m, m);
  Eigen::VectorXd yhat(m), w(m), z_new(n);

  Eigen::VectorXd best_z = z;
  double best_q = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int it = 1; it <= config.max_gn_iters; ++it) {
    linearize(problem, sets, layout, config, z, rows);

    for (Eigen::Index r = 0; r < m; ++r) {
      const ConstraintRow& row = rows[static_cast<size_t>(r)];
      cjt.col(r).setZero();
      double jz = 0.0;
      for (int k = 0; k < row.nnz; ++k) {
        cjt.col(r) += row.coef[k] * gram.col(row.idx[k]);
        cjt(row.idx[k], r) += row.coef[k] * config.kernel.eta;
        jz += row.coef[k] * z[row.idx[k]];
      }
      yhat[r] = jz - row.misfit;
    }
    for (Eigen::Index b = 0; b < m; ++b) {
      for (Eigen::Index a = 0; a < m; ++a) {
        const ConstraintRow& row = rows[static_cast<size_t>(a)];
        double v = 0.0;
        for (int k = 0; k < row.nnz; ++k) v += row.coef[k] * cjt(row.idx[k], b);
        s(a, b) = v;
      }
      s(b, b) += rows[static_cast<size_t>(b)].noise;
    }

    Eigen::LLT<Eigen::MatrixXd> sllt(s);
    if (sllt.info() != Eigen::Success)
      throw NumericError("pigp_solve: linearized system is not positive definite");
    w = sllt.solve(yhat);
    z_new.noalias() = cjt * w;
    if (!z_new.allFinite()) throw NumericError("pigp_solve: non-finite Gauss-Newton iterate");

    sol.last_step = (z_new - z).norm() / std::max(1.0, z.norm());
    z = z_new;
    sol.gn_iters = it;

    linearize(problem, sets, layout, config, z, rows);
    const double q = z.dot(sol.factor.solve(z)) + misfit_objective(rows);
    sol.objective = q;
    if (q < best_q) {
      best_q = q;
      best_z = z;
      stall = 0;
    } else {
      ++stall;
    }

    if (sol.last_step < config.tol) {
      sol.converged = true;
      break;
    }
    if (stall >= 5) break;
  }

  if (!sol.converged) {
    z = best_z;
    sol.objective = best_q;
  }
  sol.state = z;
  sol.coefficients = sol.factor.solve(z);
  return sol;
}

GpPosterior gp_posterior(const GpSolution& sol, const Point& x) {
  const Eigen::Index n = static_cast<Eigen::Index>(sol.functionals.size());
  Eigen::VectorXd kx(n);
  for (Eigen::Index i = 0; i < n; ++i)
    kx[i] = cross_entry(sol.kernel, sol.functionals[static_cast<size_t>(i)], x, 0, 0);

  GpPosterior post;
  post.mean = n > 0 ? kx.dot(sol.coefficients) : 0.0;
  const double kxx = kernel_eval(sol.kernel, x, x);
  if (n > 0) {
    const Eigen::VectorXd half = sol.factor.matrixL().solve(kx);
    post.variance_preclamp = kxx - half.squaredNorm();
  } else {
    post.variance_preclamp = kxx;
  }
  post.variance = std::max(0.0, post.variance_preclamp);
  return post;
}

std::vector<GpPosterior> gp_posterior_many(const GpSolution& sol, const std::vector<Point>& pts) {
  std::vector<GpPosterior> out;
  out.reserve(pts.size());
  for (const Point& x : pts) out.push_back(gp_posterior(sol, x));
  return out;
}

double gp_mean(const GpSolution& sol, const Point& x) {
  const Eigen::Index n = static_cast<Eigen::Index>(sol.functionals.size());
  if (n == 0) return 0.0;
  Eigen::VectorXd kx(n);
  for (Eigen::Index i = 0; i < n; ++i)
    kx[i] = cross_entry(sol.kernel, sol.functionals[static_cast<size_t>(i)], x, 0, 0);
  return kx.dot(sol.coefficients);
}

Jet gp_mean_jet(const GpSolution& sol, const Point& x, const DerivativeSpec& spec) {
  const int dim = static_cast<int>(sol.kernel.sigma.size());
  const Eigen::Index n = static_cast<Eigen::Index>(sol.functionals.size());
  Jet jet;
  Eigen::VectorXd kx(n);
  for (Eigen::Index i = 0; i < n; ++i)
    kx[i] = cross_entry(sol.kernel, sol.functionals[static_cast<size_t>(i)], x, 0, 0);
  jet.u = n > 0 ? kx.dot(sol.coefficients) : 0.0;
  for (int c = 0; c < dim; ++c) {
    for (Eigen::Index i = 0; i < n; ++i)
      kx[i] = cross_entry(sol.kernel, sol.functionals[static_cast<size_t>(i)], x, 1, c);
    jet.du[static_cast<size_t>(c)] = n > 0 ? kx.dot(sol.coefficients) : 0.0;
  }
  for (int c : spec.second) {
    if (c < 0 || c >= dim) throw ConfigError("gp_mean_jet: derivative coordinate out of range");
    for (Eigen::Index i = 0; i < n; ++i)
      kx[i] = cross_entry(sol.kernel, sol.functionals[static_cast<size_t>(i)], x, 2, c);
    jet.set_d2(c, n > 0 ? kx.dot(sol.coefficients) : 0.0);
  }
  return jet;
}

GpSolution gp_regress(const std::vector<Point>& pts, const std::vector<double>& values,
                      double noise, const KernelConfig& kernel) {
  validate_kernel(kernel);
  if (pts.size() != values.size()) throw ConfigError("gp_regress: point/value count mismatch");
  if (noise < 0.0) throw ConfigError("gp_regress: noise must be non-negative");

  GpSolution sol;
  sol.kernel = kernel;
  sol.diagonal_noise = noise;
  sol.functionals.reserve(pts.size());
  for (const Point& x : pts) {
    Functional f;
    f.x = x;
    f.kind = Functional::Kind::value;
    sol.functionals.push_back(f);
  }
  const Eigen::MatrixXd gram = assemble_gram(kernel, sol.functionals);
  sol.factor = factor_gram(kernel, gram, noise);
  sol.state = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  sol.coefficients = sol.factor.solve(sol.state);
  sol.converged = true;
  return sol;
}

namespace {
constexpr const char* kGpMagic = "colabel-gp";
constexpr int kGpVersion = 1;

const char* kind_name(Functional::Kind kind) {
  switch (kind) {
    case Functional::Kind::value:
      return "v";
    case Functional::Kind::d1:
      return "d1";
    default:
      return "d2";
  }
}
}  // namespace

void save_gp(const GpSolution& sol, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_gp: cannot open " + path);
  const int dim = static_cast<int>(sol.kernel.sigma.size());
  out << kGpMagic << " " << kGpVersion << "\n";
  out << "kernel " << dim << " literal " << (sol.kernel.literal_abs ? 1 : 0) << "\n";
  out << std::hexfloat << "sigma";
  for (double sg : sol.kernel.sigma) out << " " << sg;
  out << "\neta " << sol.kernel.eta << " beta " << sol.kernel.beta << " noise "
      << sol.diagonal_noise << "\n";
  out << std::defaultfloat << "status " << (sol.converged ? 1 : 0) << " " << sol.gn_iters << " "
      << std::hexfloat << sol.last_step << " " << sol.objective << std::defaultfloat << "\n";
  out << "functionals " << sol.functionals.size() << "\n" << std::hexfloat;
  for (const Functional& f : sol.functionals)
    out << kind_name(f.kind) << " " << f.coord << " " << f.x[0] << " " << f.x[1] << "\n";
  out << std::defaultfloat << "coefficients " << sol.coefficients.size() << "\n";
  append_hexfloat(out, sol.coefficients);
  out << "state " << sol.state.size() << "\n";
  append_hexfloat(out, sol.state);
  if (!out) throw IoError("save_gp: write failed for " + path);
}

GpSolution load_gp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_gp: cannot open " + path);
  std::string magic, key;
  int version = 0;
  in >> magic >> version;
  if (magic != kGpMagic || version != kGpVersion) throw IoError("load_gp: bad header in " + path);

  GpSolution sol;
  int dim = 0, literal = 0;
  in >> key >> dim;
  if (key != "kernel" || dim < 1 || dim > kMaxDim) throw IoError("load_gp: bad kernel line in " + path);
  in >> key >> literal;
  if (key != "literal") throw IoError("load_gp: bad kernel line in " + path);
  sol.kernel.literal_abs = literal != 0;
  in >> key;
  if (key != "sigma") throw IoError("load_gp: expected sigma in " + path);
  sol.kernel.sigma.resize(static_cast<size_t>(dim));
  for (double& sg : sol.kernel.sigma) sg = read_double(in, path, "sigma");
  in >> key;
  if (key != "eta") throw IoError("load_gp: expected eta in " + path);
  sol.kernel.eta = read_double(in, path, "eta");
  in >> key;
  if (key != "beta") throw IoError("load_gp: expected beta in " + path);
  sol.kernel.beta = read_double(in, path, "beta");
  in >> key;
  if (key != "noise") throw IoError("load_gp: expected noise in " + path);
  sol.diagonal_noise = read_double(in, path, "noise");

  int conv = 0;
  in >> key >> conv >> sol.gn_iters;
  if (key != "status") throw IoError("load_gp: expected status in " + path);
  sol.converged = conv != 0;
  sol.last_step = read_double(in, path, "status");
  sol.objective = read_double(in, path, "status");

  size_t n_fns = 0;
  in >> key >> n_fns;
  if (key != "functionals") throw IoError("load_gp: expected functionals in " + path);
  sol.functionals.resize(n_fns);
  for (Functional& f : sol.functionals) {
    std::string kind;
    if (!(in >> kind >> f.coord)) throw IoError("load_gp: truncated functionals in " + path);
    if (kind == "v")
      f.kind = Functional::Kind::value;
    else if (kind == "d1")
      f.kind = Functional::Kind::d1;
    else if (kind == "d2")
      f.kind = Functional::Kind::d2;
    else
      throw IoError("load_gp: unknown functional kind in " + path);
    f.x[0] = read_double(in, path, "functionals");
    f.x[1] = read_double(in, path, "functionals");
  }

  Eigen::Index n = 0;
  in >> key >> n;
  if (key != "coefficients" || n != static_cast<Eigen::Index>(n_fns))
    throw IoError("load_gp: bad coefficient count in " + path);
  sol.coefficients.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) sol.coefficients[i] = read_double(in, path, "coefficients");
  in >> key >> n;
  if (key != "state" || n != static_cast<Eigen::Index>(n_fns))
    throw IoError("load_gp: bad state count in " + path);
  sol.state.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) sol.state[i] = read_double(in, path, "state");

  validate_kernel(sol.kernel);
  const Eigen::MatrixXd gram = assemble_gram(sol.kernel, sol.functionals);
  sol.factor = factor_gram(sol.kernel, gram, sol.diagonal_noise);
  return sol;
}

void write_posterior_csv(const GpSolution& sol, const std::vector<Point>& pts,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_posterior_csv: cannot open " + path);
  out << "coord0,coord1,mean,variance\n";
  char buf[128];
  for (const Point& x : pts) {
    const GpPosterior post = gp_posterior(sol, x);
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", x[0], x[1], post.mean,
                  post.variance);
    out << buf;
  }
  if (!out) throw IoError("write_posterior_csv: write failed for " + path);
}

}  // namespace colabel
