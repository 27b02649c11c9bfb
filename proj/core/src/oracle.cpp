#include "colabel/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>

#include <Eigen/Dense>
#include <fftw3.h>

#include "colabel/errors.hpp"

namespace colabel {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSelfConvergenceTol = 1e-6;
constexpr int kGlOrder = 12;
constexpr double kPanelWidthSigmas = 2.0;
constexpr int kAcModes = 1024;
constexpr double kAcDtTarget = 1e-3;
constexpr int kContourPoints = 32;

struct GlRule {
  std::vector<double> nodes;   // on [-1, 1]
  std::vector<double> weights;
};

const GlRule& gauss_legendre(int n) {
  static std::map<int, GlRule> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k)
    J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success) throw NumericError("gauss-legendre eigensolve failed");

  GlRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()[i];
    const double q0 = es.eigenvectors()(0, i);
    rule.weights[i] = 2.0 * q0 * q0;
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

// Cole-Hopf solution of u_t + u u_x = nu u_xx with u(0,x) = sin(pi x):
//   u(t,x) = [integral ((x-y)/t) e^phi dy] / [integral e^phi dy],
//   phi(y) = -(x-y)^2/(4 nu t) - H(y)/(2 nu),  H(y) = (1 - cos(pi y))/pi.
// Stationary points of phi satisfy |y - x| <= t, so a window of
// t + 12 sqrt(2 nu t) captures the mass to far below roundoff. Composite
// Gauss-Legendre panels sized against the worst-case curvature keep every
// sample positive after the exponent shift, which stays stable even where
// the solution magnitude is ~e^-100 (near the walls).
double burgers_at(double nu, double t, double x, double panel_sigmas,
                  std::vector<double>& scratch) {
  if (t == 0.0) return std::sin(kPi * x);
  const GlRule& rule = gauss_legendre(kGlOrder);
  const double inv4nut = 1.0 / (4.0 * nu * t);
  const double inv2nu = 1.0 / (2.0 * nu);
  const double sigma_gauss = std::sqrt(2.0 * nu * t);
  const double sigma_min = 1.0 / std::sqrt(2.0 * inv4nut + kPi * inv2nu);
  const double half_window = t + 12.0 * sigma_gauss;
  const int n_panels =
      std::max(4, static_cast<int>(std::ceil(2.0 * half_window / (panel_sigmas * sigma_min))));
  const double panel = 2.0 * half_window / n_panels;

  scratch.clear();
  double phimax = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < n_panels; ++p) {
    const double mid = x - half_window + (p + 0.5) * panel;
    for (int i = 0; i < kGlOrder; ++i) {
      const double y = mid + 0.5 * panel * rule.nodes[i];
      const double phi = -(x - y) * (x - y) * inv4nut - (1.0 - std::cos(kPi * y)) / kPi * inv2nu;
      scratch.push_back(y);
      scratch.push_back(phi);
      phimax = std::max(phimax, phi);
    }
  }
  double num = 0.0, den = 0.0;
  std::size_t s = 0;
  for (int p = 0; p < n_panels; ++p) {
    for (int i = 0; i < kGlOrder; ++i, s += 2) {
      const double w = rule.weights[i] * std::exp(scratch[s + 1] - phimax);
      num += w * (x - scratch[s]);
      den += w;
    }
  }
  return num / (den * t);
}

std::vector<double> burgers_field(double nu, const std::vector<double>& t_axis,
                                  const std::vector<double>& x_axis, double panel_sigmas) {
  std::vector<double> scratch;
  std::vector<double> values;
  values.reserve(t_axis.size() * x_axis.size());
  for (double t : t_axis)
    for (double x : x_axis) values.push_back(burgers_at(nu, t, x, panel_sigmas, scratch));
  return values;
}

class Fft1d {
 public:
  explicit Fft1d(int n) : n_(n) {
    data_ = fftw_alloc_complex(static_cast<std::size_t>(n));
    fwd_ = fftw_plan_dft_1d(n, data_, data_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(n, data_, data_, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!data_ || !fwd_ || !bwd_) throw NumericError("fftw plan creation failed");
  }
  ~Fft1d() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(data_);
  }
  Fft1d(const Fft1d&) = delete;
  Fft1d& operator=(const Fft1d&) = delete;

  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(data_); }
  void forward() { fftw_execute(fwd_); }
  void backward() { fftw_execute(bwd_); }  // unnormalized

 private:
  int n_;
  fftw_complex* data_;
  fftw_plan fwd_, bwd_;
};

using Cvec = std::vector<std::complex<double>>;

struct Etdrk4Coeffs {
  double h = -1.0;
  Cvec e, e2;
  std::vector<double> q, f1, f2, f3;
};

// Kassam-Trefethen contour evaluation of the phi-function coefficients.
void update_coeffs(Etdrk4Coeffs& c, const std::vector<double>& lin, double h) {
  if (c.h == h) return;
  const int n = static_cast<int>(lin.size());
  c.h = h;
  c.e.resize(n);
  c.e2.resize(n);
  c.q.assign(n, 0.0);
  c.f1.assign(n, 0.0);
  c.f2.assign(n, 0.0);
  c.f3.assign(n, 0.0);

  std::vector<std::complex<double>> ring(kContourPoints);
  for (int j = 0; j < kContourPoints; ++j)
    ring[j] = std::polar(1.0, kPi * (j + 0.5) / kContourPoints);

  for (int k = 0; k < n; ++k) {
    const double hl = h * lin[k];
    c.e[k] = std::exp(hl);
    c.e2[k] = std::exp(0.5 * hl);
    double q = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
    for (int j = 0; j < kContourPoints; ++j) {
      const std::complex<double> z = hl + ring[j];
      const std::complex<double> z2 = z * z, z3 = z2 * z;
      const std::complex<double> ez = std::exp(z);
      q += ((std::exp(0.5 * z) - 1.0) / z).real();
      f1 += ((-4.0 - z + ez * (4.0 - 3.0 * z + z2)) / z3).real();
      f2 += ((2.0 + z + ez * (-2.0 + z)) / z3).real();
      f3 += ((-4.0 - 3.0 * z - z2 + ez * (4.0 - z)) / z3).real();
    }
    const double scale = h / kContourPoints;
    c.q[k] = scale * q;
    c.f1[k] = scale * f1;
    c.f2[k] = scale * f2;
    c.f3[k] = scale * f3;
  }
}

// Evaluates the trigonometric interpolant of spectrum v (forward-FFT
// convention, length N, domain [-1,1)) at point x.
double trig_eval(const Cvec& v, double x) {
  const int n = static_cast<int>(v.size());
  const double theta = kPi * (x + 1.0);
  const std::complex<double> w = std::polar(1.0, theta);
  std::complex<double> wk = w;
  double acc = v[0].real();
  for (int k = 1; k < n / 2; ++k) {
    acc += 2.0 * (v[k] * wk).real();
    wk *= w;
  }
  acc += v[n / 2].real() * std::cos(0.5 * n * theta);
  return acc / n;
}

double ac_initial(double x) { return x * x * std::cos(kPi * x); }

// Fourier/ETDRK4 integration of u_t = 1e-4 u_xx + 5(u - u^3); returns the
// solution interpolated to x_eval at each requested output time.
std::vector<std::vector<double>> ac_integrate(const std::vector<double>& t_axis,
                                              const std::vector<double>& x_eval,
                                              double dt_target) {
  const int n = kAcModes;
  Fft1d fft(n);
  std::complex<double>* buf = fft.data();

  std::vector<double> lin(n);
  for (int k = 0; k < n; ++k) {
    const int ks = k <= n / 2 ? k : k - n;
    const double kappa = kPi * ks;
    lin[k] = 5.0 - 1e-4 * kappa * kappa;
  }

  for (int j = 0; j < n; ++j) buf[j] = ac_initial(-1.0 + 2.0 * j / n);
  fft.forward();
  Cvec v(buf, buf + n);

  auto nonlinear = [&](const Cvec& spec, Cvec& out) {
    std::copy(spec.begin(), spec.end(), buf);
    fft.backward();
    for (int j = 0; j < n; ++j) {
      const double u = buf[j].real() / n;
      buf[j] = -5.0 * u * u * u;
    }
    fft.forward();
    out.assign(buf, buf + n);
  };

  Etdrk4Coeffs co;
  Cvec nv(n), a(n), na(n), b(n), nb(n), cc(n), nc(n);
  auto step = [&](double h) {
    update_coeffs(co, lin, h);
    nonlinear(v, nv);
    for (int k = 0; k < n; ++k) a[k] = co.e2[k] * v[k] + co.q[k] * nv[k];
    nonlinear(a, na);
    for (int k = 0; k < n; ++k) b[k] = co.e2[k] * v[k] + co.q[k] * na[k];
    nonlinear(b, nb);
    for (int k = 0; k < n; ++k) cc[k] = co.e2[k] * a[k] + co.q[k] * (2.0 * nb[k] - nv[k]);
    nonlinear(cc, nc);
    for (int k = 0; k < n; ++k)
      v[k] = co.e[k] * v[k] + co.f1[k] * nv[k] + 2.0 * co.f2[k] * (na[k] + nb[k]) + co.f3[k] * nc[k];
  };

  std::vector<std::vector<double>> out;
  out.reserve(t_axis.size());
  double t_now = 0.0;
  for (double t : t_axis) {
    if (t > t_now) {
      const double span = t - t_now;
      const int m = std::max(1, static_cast<int>(std::ceil(span / dt_target)));
      const double h = span / m;
      for (int i = 0; i < m; ++i) step(h);
      t_now = t;
    }
    std::vector<double> rowvals(x_eval.size());
    if (t == 0.0)
      for (std::size_t j = 0; j < x_eval.size(); ++j) rowvals[j] = ac_initial(x_eval[j]);
    else
      for (std::size_t j = 0; j < x_eval.size(); ++j) rowvals[j] = trig_eval(v, x_eval[j]);
    out.push_back(std::move(rowvals));
  }
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string cache_key(const std::string& name, double param,
                      const std::vector<double>& a0, const std::vector<double>& a1) {
  std::string s = name;
  char tmp[64];
  auto add = [&](double x) {
    std::snprintf(tmp, sizeof tmp, " %.17g", x);
    s += tmp;
  };
  add(param);
  add(static_cast<double>(a0.size()));
  for (double x : a0) add(x);
  add(static_cast<double>(a1.size()));
  for (double x : a1) add(x);
  return s;
}

std::string cache_path(const std::string& cache_dir, const std::string& name,
                       const std::string& key) {
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a(key)));
  return cache_dir + "/" + name + "_" + hex + ".ref";
}

std::optional<ReferenceField> load_reference(const std::string& path,
                                             const std::vector<double>& t_axis,
                                             const std::vector<double>& x_axis) {
  std::FILE* f = std::fopen(path.c_str(), "r");
  if (!f) return std::nullopt;
  auto fail = [&]() {
    std::fclose(f);
    return std::nullopt;
  };

  char tag[32] = {0};
  int version = 0;
  if (std::fscanf(f, "%31s %d", tag, &version) != 2 || std::string(tag) != "colabel-ref" ||
      version != 1)
    return fail();
  char prov[32] = {0};
  double accuracy = 0.0;
  unsigned long n0 = 0, n1 = 0;
  if (std::fscanf(f, "%31s %la %lu %lu", prov, &accuracy, &n0, &n1) != 4) return fail();
  if (n0 != t_axis.size() || n1 != x_axis.size()) return fail();

  ReferenceField field;
  if (std::string(prov) == "analytic") field.provenance = ReferenceField::Provenance::analytic;
  else if (std::string(prov) == "cole_hopf") field.provenance = ReferenceField::Provenance::cole_hopf;
  else if (std::string(prov) == "spectral") field.provenance = ReferenceField::Provenance::spectral;
  else return fail();
  field.accuracy_estimate = accuracy;
  field.axes = {t_axis, x_axis};
  field.values.resize(t_axis.size() * x_axis.size());

  for (const std::vector<double>& axis : field.axes)
    for (double expect : axis) {
      double got = 0.0;
      if (std::fscanf(f, "%la", &got) != 1 || got != expect) return fail();
    }
  for (double& value : field.values)
    if (std::fscanf(f, "%la", &value) != 1) return fail();
  std::fclose(f);
  return field;
}

void save_reference(const std::string& path, const ReferenceField& field) {
  const std::string tmp = path + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "w");
  if (!f) return;  // cache is best-effort
  std::fprintf(f, "colabel-ref 1\n%s %a %zu %zu\n", to_string(field.provenance),
               field.accuracy_estimate, field.axes[0].size(), field.axes[1].size());
  for (const std::vector<double>& axis : field.axes)
    for (double x : axis) std::fprintf(f, "%a\n", x);
  for (double value : field.values) std::fprintf(f, "%a\n", value);
  if (std::fclose(f) != 0) {
    std::remove(tmp.c_str());
    return;
  }
  std::rename(tmp.c_str(), path.c_str());
}

void check_axis(const std::vector<double>& axis, const char* what) {
  if (axis.empty()) throw ConfigError(std::string("oracle: empty ") + what + " axis");
  for (double x : axis)
    if (!std::isfinite(x)) throw ConfigError(std::string("oracle: non-finite ") + what + " axis");
}

}  // namespace

const char* to_string(ReferenceField::Provenance provenance) {
  switch (provenance) {
    case ReferenceField::Provenance::analytic: return "analytic";
    case ReferenceField::Provenance::cole_hopf: return "cole_hopf";
    case ReferenceField::Provenance::spectral: return "spectral";
  }
  return "unknown";
}

ReferenceField burgers_reference(double nu, std::vector<double> t_axis,
                                 std::vector<double> x_axis, const std::string& cache_dir) {
  if (!(nu > 0.0)) throw ConfigError("burgers oracle: viscosity must be positive");
  check_axis(t_axis, "t");
  check_axis(x_axis, "x");
  for (double t : t_axis)
    if (t < 0.0) throw ConfigError("burgers oracle: negative time");

  std::string path;
  if (!cache_dir.empty()) {
    path = cache_path(cache_dir, "burgers", cache_key("burgers", nu, t_axis, x_axis));
    if (auto cached = load_reference(path, t_axis, x_axis)) return *cached;
  }

  std::vector<double> coarse = burgers_field(nu, t_axis, x_axis, kPanelWidthSigmas);
  std::vector<double> fine = burgers_field(nu, t_axis, x_axis, 0.5 * kPanelWidthSigmas);
  double delta = 0.0;
  for (std::size_t i = 0; i < fine.size(); ++i)
    delta = std::max(delta, std::abs(fine[i] - coarse[i]));
  if (delta > kSelfConvergenceTol)
    throw OracleError("burgers oracle failed node-doubling self-convergence: delta = " +
                      std::to_string(delta));

  ReferenceField field;
  field.axes = {std::move(t_axis), std::move(x_axis)};
  field.values = std::move(fine);
  field.provenance = ReferenceField::Provenance::cole_hopf;
  field.accuracy_estimate = delta;
  if (!path.empty()) save_reference(path, field);
  return field;
}

ReferenceField allen_cahn_reference(std::vector<double> t_axis, std::vector<double> x_axis,
                                    const std::string& cache_dir) {
  check_axis(t_axis, "t");
  check_axis(x_axis, "x");
  for (std::size_t i = 0; i < t_axis.size(); ++i) {
    if (t_axis[i] < 0.0) throw ConfigError("allen-cahn oracle: negative time");
    if (i > 0 && t_axis[i] <= t_axis[i - 1])
      throw ConfigError("allen-cahn oracle: time axis must be strictly ascending");
  }

  std::string path;
  if (!cache_dir.empty()) {
    path = cache_path(cache_dir, "allen_cahn", cache_key("allen_cahn", 0.0, t_axis, x_axis));
    if (auto cached = load_reference(path, t_axis, x_axis)) return *cached;
  }

  auto coarse = ac_integrate(t_axis, x_axis, kAcDtTarget);
  auto fine = ac_integrate(t_axis, x_axis, 0.5 * kAcDtTarget);
  double delta = 0.0;
  for (std::size_t i = 0; i < fine.size(); ++i)
    for (std::size_t j = 0; j < fine[i].size(); ++j)
      delta = std::max(delta, std::abs(fine[i][j] - coarse[i][j]));
  if (delta > kSelfConvergenceTol)
    throw OracleError("allen-cahn oracle failed step-halving self-convergence: delta = " +
                      std::to_string(delta));

  ReferenceField field;
  field.axes = {std::move(t_axis), std::move(x_axis)};
  field.values.reserve(field.axes[0].size() * field.axes[1].size());
  for (const std::vector<double>& rowvals : fine)
    field.values.insert(field.values.end(), rowvals.begin(), rowvals.end());
  field.provenance = ReferenceField::Provenance::spectral;
  field.accuracy_estimate = delta;
  if (!path.empty()) save_reference(path, field);
  return field;
}

ReferenceField helmholtz_reference(std::vector<double> x_axis, std::vector<double> y_axis) {
  check_axis(x_axis, "x");
  check_axis(y_axis, "y");
  ReferenceField field;
  field.values.reserve(x_axis.size() * y_axis.size());
  for (double x : x_axis)
    for (double y : y_axis)
      field.values.push_back(std::sin(kPi * x) * std::sin(4.0 * kPi * y));
  field.axes = {std::move(x_axis), std::move(y_axis)};
  field.provenance = ReferenceField::Provenance::analytic;
  field.accuracy_estimate = std::numeric_limits<double>::epsilon();
  return field;
}

ErrorMetrics error_metrics(const std::vector<double>& predicted, const ReferenceField& ref) {
  if (predicted.size() != ref.values.size())
    throw ConfigError("error_metrics: prediction and reference shapes differ");
  double diff2 = 0.0, ref2 = 0.0;
  ErrorMetrics m;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - ref.values[i];
    diff2 += d * d;
    ref2 += ref.values[i] * ref.values[i];
    m.linf_abs = std::max(m.linf_abs, std::abs(d));
  }
  if (ref2 == 0.0) {
    m.reference_norm_zero = true;
    m.l2_rel = std::sqrt(diff2);
  } else {
    m.l2_rel = std::sqrt(diff2 / ref2);
  }
  return m;
}

std::vector<double> uniform_axis(double lo, double hi, int n) {
  if (n < 1) throw ConfigError("uniform_axis: need at least one point");
  if (n == 1) return {lo};
  std::vector<double> axis(n);
  for (int i = 0; i < n; ++i) axis[i] = lo + (hi - lo) * i / (n - 1);
  return axis;
}

std::vector<Point> grid_points(const ReferenceField& field) {
  if (field.axes.size() != 2) throw ConfigError("grid_points: expected a two-axis field");
  std::vector<Point> pts;
  pts.reserve(field.axes[0].size() * field.axes[1].size());
  for (double a : field.axes[0])
    for (double b : field.axes[1]) pts.push_back(Point{a, b});
  return pts;
}

}  // namespace colabel
