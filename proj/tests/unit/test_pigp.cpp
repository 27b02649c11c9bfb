#include "colabel/pigp.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <Eigen/LU>

#include "colabel/errors.hpp"
#include "colabel/oracle.hpp"
#include "colabel/pde.hpp"
#include "colabel/rng.hpp"
#include "doctest.h"

using namespace colabel;

namespace {

constexpr double kPi = 3.14159265358979323846;

Functional fn(Functional::Kind kind, int coord, double x0, double x1) {
  Functional f;
  f.kind = kind;
  f.coord = coord;
  f.x = {x0, x1};
  return f;
}

// Lowers a d2 functional to d1 and a d1 to value, for the finite-difference
// ladder over closed-form Gram entries.
Functional lowered(const Functional& f) {
  Functional g = f;
  g.kind = f.kind == Functional::Kind::d2 ? Functional::Kind::d1 : Functional::Kind::value;
  return g;
}

PdeProblem paper_burgers(double nu) {
  return make_vburgers(nu, 1.0, -1.0, 1.0, [](double x) { return std::sin(kPi * x); }, 0.0, 0.0);
}

PdeProblem unit_helmholtz() {
  Box box;
  box.lo = {0.0, 0.0};
  box.hi = {1.0, 1.0};
  return make_helmholtz(1.0, box);
}

// Laplace equation with zero forcing and zero boundary data.
PdeProblem zero_laplace() {
  PdeProblem prob;
  prob.name = "laplace_zero";
  prob.dim = 2;
  prob.domain.lo = {0.0, 0.0};
  prob.domain.hi = {1.0, 1.0};
  prob.spec.second = {0, 1};
  prob.residual = [](const double*, const Jet& jet) {
    ResidualSens s;
    s.r = jet.d2u[0] + jet.d2u[1];
    s.d_d2u = {1.0, 1.0};
    return s;
  };
  BoundaryGroup g;
  g.weight_tag = "bottom";
  g.target = [](const Point&) { return 0.0; };
  g.sample = [](Rng& rng) { return Point{rng.uniform(0.0, 1.0), 0.0}; };
  prob.boundary_groups.push_back(g);
  prob.reference = [](const Point&) { return 0.0; };
  return prob;
}

}  // namespace

TEST_SUITE_BEGIN("pigp");

TEST_CASE("kernel evaluation") {
  KernelConfig iso;
  iso.sigma = {1.0, 1.0};
  CHECK(kernel_eval(iso, {0.3, -0.7}, {0.3, -0.7}) == 1.0);
  CHECK(kernel_eval(iso, {0.0, 0.0}, {1.0, 0.0}) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(kernel_eval(iso, {0.2, 0.5}, {-0.1, 0.9}) ==
        doctest::Approx(kernel_eval(iso, {-0.1, 0.9}, {0.2, 0.5})).epsilon(1e-15));

  KernelConfig paper;
  paper.sigma = {1.0 / (3.0 * std::sqrt(2.0)), 1.0 / (21.0 * std::sqrt(2.0))};
  CHECK(kernel_eval(paper, {0.0, 0.0}, {0.1, 0.0}) ==
        doctest::Approx(std::exp(-0.09)).epsilon(1e-14));
  CHECK(std::exp(-0.09) == doctest::Approx(0.9139).epsilon(1e-4));

  KernelConfig literal = iso;
  literal.literal_abs = true;
  CHECK(kernel_eval(literal, {0.0, 0.0}, {0.0, 0.0}) == 1.0);
  CHECK(kernel_eval(literal, {0.0, 0.0}, {0.3, 0.4}) ==
        doctest::Approx(std::exp(0.7)).epsilon(1e-14));

  KernelConfig bad = iso;
  bad.sigma = {1.0, 0.0};
  CHECK_THROWS_AS(validate_kernel(bad), ConfigError);
  bad.sigma = {};
  CHECK_THROWS_AS(validate_kernel(bad), ConfigError);
  bad = iso;
  bad.eta = 0.0;
  CHECK_THROWS_AS(validate_kernel(bad), ConfigError);
  bad = iso;
  bad.beta = -1.0;
  CHECK_THROWS_AS(validate_kernel(bad), ConfigError);
}

TEST_CASE("gram entries against a finite-difference ladder") {
  KernelConfig k;
  k.sigma = {0.8, 1.3};
  const Point a{0.33, -0.41};
  const Point b{-0.12, 0.27};
  const double h = 1e-5;

  const Functional kinds_a[5] = {fn(Functional::Kind::value, 0, a[0], a[1]),
                                 fn(Functional::Kind::d1, 0, a[0], a[1]),
                                 fn(Functional::Kind::d1, 1, a[0], a[1]),
                                 fn(Functional::Kind::d2, 0, a[0], a[1]),
                                 fn(Functional::Kind::d2, 1, a[0], a[1])};
  const Functional kinds_b[5] = {fn(Functional::Kind::value, 0, b[0], b[1]),
                                 fn(Functional::Kind::d1, 0, b[0], b[1]),
                                 fn(Functional::Kind::d1, 1, b[0], b[1]),
                                 fn(Functional::Kind::d2, 0, b[0], b[1]),
                                 fn(Functional::Kind::d2, 1, b[0], b[1])};

  CHECK(gram_entry(k, kinds_a[0], kinds_b[0]) ==
        doctest::Approx(kernel_eval(k, a, b)).epsilon(1e-14));

  // Each derivative entry must match a central difference of the entry with
  // one derivative order removed, stepping the corresponding argument.
  for (const Functional& fb : kinds_b) {
    for (int ia = 1; ia < 5; ++ia) {
      const Functional& fa = kinds_a[ia];
      Functional lo = lowered(fa);
      Functional lo_p = lo, lo_m = lo;
      lo_p.x[fa.coord] += h;
      lo_m.x[fa.coord] -= h;
      const double want = (gram_entry(k, lo_p, fb) - gram_entry(k, lo_m, fb)) / (2.0 * h);
      CHECK(gram_entry(k, fa, fb) == doctest::Approx(want).epsilon(1e-7).scale(1.0));
    }
  }
  for (const Functional& fa : kinds_a) {
    for (int ib = 1; ib < 5; ++ib) {
      const Functional& fb = kinds_b[ib];
      Functional lo = lowered(fb);
      Functional lo_p = lo, lo_m = lo;
      lo_p.x[fb.coord] += h;
      lo_m.x[fb.coord] -= h;
      const double want = (gram_entry(k, fa, lo_p) - gram_entry(k, fa, lo_m)) / (2.0 * h);
      CHECK(gram_entry(k, fa, fb) == doctest::Approx(want).epsilon(1e-7).scale(1.0));
    }
  }

  // Variance of a derivative functional is positive.
  CHECK(gram_entry(k, kinds_a[1], kinds_a[1]) > 0.0);
  CHECK(gram_entry(k, kinds_a[3], kinds_a[3]) > 0.0);

  KernelConfig literal = k;
  literal.literal_abs = true;
  CHECK_THROWS_AS(gram_entry(literal, kinds_a[1], kinds_b[0]), ConfigError);
}

TEST_CASE("gram assembly") {
  KernelConfig k;
  k.sigma = {1.0, 1.0};

  SUBCASE("duplicate value points") {
    std::vector<Functional> fns = {fn(Functional::Kind::value, 0, 0.4, 0.6),
                                   fn(Functional::Kind::value, 0, 0.4, 0.6)};
    Eigen::MatrixXd g = assemble_gram(k, fns);
    CHECK(g(0, 0) == 1.0);
    CHECK(g(0, 1) == 1.0);
    CHECK(g(1, 0) == 1.0);
    CHECK(g(1, 1) == 1.0);
    CHECK_NOTHROW(factor_gram(k, g));
  }

  SUBCASE("value and ddx at the same point decouple") {
    std::vector<Functional> fns = {fn(Functional::Kind::value, 0, 0.4, 0.6),
                                   fn(Functional::Kind::d1, 0, 0.4, 0.6)};
    Eigen::MatrixXd g = assemble_gram(k, fns);
    CHECK(g(0, 1) == 0.0);
    CHECK(g(1, 0) == 0.0);
  }

  SUBCASE("random value points match kernel_eval and mirror exactly") {
    Rng rng(505);
    std::vector<Functional> fns;
    for (int i = 0; i < 5; ++i)
      fns.push_back(fn(Functional::Kind::value, 0, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)));
    fns.push_back(fn(Functional::Kind::d1, 1, 0.2, -0.3));
    fns.push_back(fn(Functional::Kind::d2, 0, -0.5, 0.1));
    Eigen::MatrixXd g = assemble_gram(k, fns);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        CHECK(g(i, j) == doctest::Approx(kernel_eval(k, fns[size_t(i)].x, fns[size_t(j)].x))
                             .epsilon(1e-14));
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("conditioning failure reports the pivot") {
    KernelConfig tiny = k;
    tiny.eta = 1e-300;
    std::vector<Functional> fns;
    for (int i = 0; i < 40; ++i) fns.push_back(fn(Functional::Kind::value, 0, 1e-13 * i, 0.0));
    Eigen::MatrixXd g = assemble_gram(tiny, fns);
    try {
      factor_gram(tiny, g);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("pivot") != std::string::npos);
    }
  }
}

TEST_CASE("regression posterior matches an independent small-matrix path") {
  KernelConfig k;
  k.sigma = {0.3};
  std::vector<Point> pts = {{0.1, 0.0}, {0.5, 0.0}, {0.9, 0.0}};
  std::vector<double> vals = {std::sin(0.1), std::sin(0.5), std::sin(0.9)};
  GpSolution sol = gp_regress(pts, vals, 0.0, k);

  Eigen::MatrixXd big(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) big(i, j) = kernel_eval(k, pts[size_t(i)], pts[size_t(j)]);
  big.diagonal().array() += k.eta;
  Eigen::VectorXd rhs(3);
  for (int i = 0; i < 3; ++i) rhs[i] = vals[size_t(i)];
  const Eigen::VectorXd alpha = big.fullPivLu().solve(rhs);
  const Eigen::MatrixXd inv = big.fullPivLu().inverse();

  double worst_mean = 0.0, worst_var = 0.0;
  for (int i = 0; i <= 100; ++i) {
    Point x{i / 100.0, 0.0};
    Eigen::VectorXd kx(3);
    for (int j = 0; j < 3; ++j) kx[j] = kernel_eval(k, x, pts[size_t(j)]);
    const double mean_ref = kx.dot(alpha);
    const double var_ref = 1.0 - kx.dot(inv * kx);
    const GpPosterior post = gp_posterior(sol, x);
    worst_mean = std::max(worst_mean, std::abs(post.mean - mean_ref));
    worst_var = std::max(worst_var, std::abs(post.variance - var_ref));
  }
  CHECK(worst_mean < 1e-10);
  CHECK(worst_var < 1e-10);
}

TEST_CASE("regression examples") {
  SUBCASE("single point interpolates as eta shrinks") {
    KernelConfig k;
    k.sigma = {0.5, 0.5};
    GpSolution sol = gp_regress({{0.0, 0.0}}, {2.0}, 0.0, k);
    CHECK(std::abs(gp_posterior(sol, {0.0, 0.0}).mean - 2.0) < 1e-4);
  }

  SUBCASE("constant field") {
    KernelConfig k;
    k.sigma = {0.4, 0.4};
    std::vector<Point> pts;
    std::vector<double> vals;
    for (int i = 0; i < 10; ++i) {
      pts.push_back({i / 9.0, 0.3});
      vals.push_back(2.5);
    }
    GpSolution sol = gp_regress(pts, vals, 0.0, k);
    for (const Point& x : pts) CHECK(gp_mean(sol, x) == doctest::Approx(2.5).epsilon(1e-3));
  }

  SUBCASE("noisy quadratic fits within the noise budget") {
    Rng rng(2024);
    std::vector<Point> pts;
    std::vector<double> vals;
    for (int i = 0; i < 20; ++i) {
      const double x = (i + 0.5) / 20.0;
      pts.push_back({x, 0.0});
      vals.push_back(x * x + rng.uniform(-0.2, 0.2));
    }
    KernelConfig k;
    k.sigma = {0.2, 0.2};
    GpSolution sol = gp_regress(pts, vals, 1e-2, k);
    double mse = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) {
      const double d = gp_mean(sol, pts[i]) - vals[i];
      mse += d * d;
    }
    mse /= double(pts.size());
    CHECK(mse <= 0.1);
  }

  SUBCASE("interpolation and prior recovery") {
    KernelConfig k;
    k.sigma = {0.3};
    k.eta = 1e-8;
    std::vector<Point> pts = {{0.1, 0.0}, {0.5, 0.0}, {0.9, 0.0}};
    std::vector<double> vals = {std::sin(0.1), std::sin(0.5), std::sin(0.9)};
    GpSolution sol = gp_regress(pts, vals, 0.0, k);
    const GpPosterior at_datum = gp_posterior(sol, pts[1]);
    CHECK(std::abs(at_datum.mean - vals[1]) < 1e-6);
    CHECK(at_datum.variance < k.eta * 10.0);
    const GpPosterior far = gp_posterior(sol, {40.0, 0.0});
    CHECK(far.mean == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
    CHECK(far.variance == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("empty data falls back to the prior") {
    KernelConfig k;
    k.sigma = {0.5, 0.5};
    GpSolution sol = gp_regress({}, {}, 0.0, k);
    const GpPosterior post = gp_posterior(sol, {0.2, 0.8});
    CHECK(post.mean == 0.0);
    CHECK(post.variance == 1.0);
  }

  SUBCASE("input validation") {
    KernelConfig k;
    k.sigma = {0.5, 0.5};
    CHECK_THROWS_AS(gp_regress({{0.0, 0.0}}, {1.0, 2.0}, 0.0, k), ConfigError);
    CHECK_THROWS_AS(gp_regress({{0.0, 0.0}}, {1.0}, -1e-3, k), ConfigError);
  }
}

TEST_CASE("linear solve on the paper helmholtz configuration") {
  PdeProblem prob = unit_helmholtz();
  SampleCounts counts;
  counts.collocation = 1024;
  counts.per_boundary_group = {33, 33, 33, 33};
  counts.test = 500;
  PointSets sets = sample_points(prob, counts, 99);

  PigpConfig cfg;
  const double sg = std::pow(1156.0, -0.25);
  cfg.kernel.sigma = {sg, sg};
  CHECK(sg == doctest::Approx(0.1715).epsilon(1e-3));

  GpSolution sol = pigp_solve(prob, sets, cfg);
  CHECK(sol.converged);
  CHECK(sol.functionals.size() == 3 * 1024 + 132);

  double num = 0.0, den = 0.0;
  for (const Point& x : sets.test) {
    const double d = gp_mean(sol, x) - prob.reference(x);
    num += d * d;
    den += prob.reference(x) * prob.reference(x);
  }
  CHECK(std::sqrt(num / den) < 5e-2);
}

TEST_CASE("nonlinear solve tracks the viscous burgers oracle") {
  PdeProblem prob = paper_burgers(0.02);
  SampleCounts counts;
  counts.collocation = 600;
  counts.per_boundary_group = {80, 25, 25};
  counts.test = 10;
  PointSets sets = sample_points(prob, counts, 7);

  PigpConfig cfg;
  cfg.kernel.sigma = {0.25, 0.08};
  GpSolution sol = pigp_solve(prob, sets, cfg);
  CHECK(sol.functionals.size() == 4 * 600 + 130);
  CHECK(sol.gn_iters >= 2);

  const std::vector<double> t_axis = uniform_axis(0.0, 1.0, 41);
  const std::vector<double> x_axis = uniform_axis(-1.0, 1.0, 81);
  const ReferenceField ref = burgers_reference(0.02, t_axis, x_axis);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < t_axis.size(); ++i)
    for (size_t j = 0; j < x_axis.size(); ++j) {
      const double d =
          gp_mean(sol, {t_axis[i], x_axis[j]}) - ref.value(int(i), int(j));
      num += d * d;
      den += ref.value(int(i), int(j)) * ref.value(int(i), int(j));
    }
  CHECK(std::sqrt(num / den) < 5e-2);
}

TEST_CASE("zero data yields the zero solution") {
  PdeProblem prob = zero_laplace();
  SampleCounts counts;
  counts.collocation = 60;
  counts.per_boundary_group = {12};
  counts.test = 10;
  PointSets sets = sample_points(prob, counts, 21);

  PigpConfig cfg;
  cfg.kernel.sigma = {0.4, 0.4};
  GpSolution sol = pigp_solve(prob, sets, cfg);
  CHECK(sol.converged);
  CHECK(sol.coefficients.cwiseAbs().maxCoeff() == 0.0);
  CHECK(gp_mean(sol, {0.5, 0.5}) == 0.0);
}

TEST_CASE("gauss-newton fixed point") {
  PdeProblem prob = paper_burgers(0.05);
  SampleCounts counts;
  counts.collocation = 200;
  counts.per_boundary_group = {40, 10, 10};
  counts.test = 10;
  PointSets sets = sample_points(prob, counts, 7);

  PigpConfig cfg;
  cfg.kernel.sigma = {0.3, 0.15};
  cfg.tol = 1e-10;
  GpSolution sol = pigp_solve(prob, sets, cfg);
  CHECK(sol.converged);

  PigpConfig one = cfg;
  one.max_gn_iters = 1;
  GpSolution refed = pigp_solve(prob, sets, one, &sol.state);
  double dval = 0.0;
  for (int i = 0; i < counts.collocation; ++i)
    dval = std::max(dval, std::abs(refed.state[i * 4] - sol.state[i * 4]));
  CHECK(dval < cfg.tol * 10.0);
}

TEST_CASE("pseudo labels enter as noisy observations") {
  PdeProblem prob = paper_burgers(0.05);
  SampleCounts counts;
  counts.collocation = 150;
  counts.per_boundary_group = {25, 8, 8};
  counts.test = 5;
  PointSets sets = sample_points(prob, counts, 13);

  PigpConfig cfg;
  cfg.kernel.sigma = {0.3, 0.15};
  GpSolution base = pigp_solve(prob, sets, cfg);
  const Point probe{0.52, 0.31};
  const double m0 = gp_mean(base, probe);

  PointSets with = sets;
  PseudoLabel pl;
  pl.x = probe;
  pl.value = 5.0;
  with.pseudo.push_back(pl);
  PigpConfig tight = cfg;
  tight.pseudo_noise = 1e-8;
  GpSolution sol = pigp_solve(prob, with, tight);
  CHECK(sol.functionals.size() == base.functionals.size() + 1);
  CHECK(std::abs(gp_mean(sol, probe) - 5.0) < 1.0);
  CHECK(std::abs(gp_mean(sol, probe) - m0) > 2.0);
}

TEST_CASE("posterior variance stays non-negative") {
  PdeProblem prob = unit_helmholtz();
  SampleCounts counts;
  counts.collocation = 256;
  counts.per_boundary_group = {33, 33, 33, 33};
  counts.test = 10;
  PointSets sets = sample_points(prob, counts, 99);

  PigpConfig cfg;
  const double sg = std::pow(388.0, -0.25);
  cfg.kernel.sigma = {sg, sg};
  GpSolution sol = pigp_solve(prob, sets, cfg);

  Rng rng(4242);
  double min_pre = 1e300;
  for (int i = 0; i < 10000; ++i) {
    const GpPosterior post = gp_posterior(sol, {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
    CHECK(post.variance >= 0.0);
    min_pre = std::min(min_pre, post.variance_preclamp);
  }
  CHECK(min_pre >= -1e-8);
}

TEST_CASE("solved coefficients minimize the regularized loss") {
  PdeProblem prob = unit_helmholtz();
  SampleCounts counts;
  counts.collocation = 120;
  counts.per_boundary_group = {15, 15, 15, 15};
  counts.test = 10;
  PointSets sets = sample_points(prob, counts, 5);

  PigpConfig cfg;
  const double sg = std::pow(180.0, -0.25);
  cfg.kernel.sigma = {sg, sg};
  GpSolution sol = pigp_solve(prob, sets, cfg);
  CHECK(sol.converged);

  Eigen::MatrixXd c = assemble_gram(cfg.kernel, sol.functionals);
  c.diagonal().array() += cfg.kernel.eta;
  const int n = int(sol.functionals.size());
  const int m = 120 + 60;
  Eigen::MatrixXd jmat = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd y(m);
  for (int i = 0; i < 120; ++i) {
    Jet jet;
    const ResidualSens s = prob.residual(sets.collocation[size_t(i)].data(), jet);
    jmat(i, i * 3) = s.d_u;
    jmat(i, i * 3 + 1) = s.d_d2u[0];
    jmat(i, i * 3 + 2) = s.d_d2u[1];
    y[i] = -s.r;
  }
  for (int k = 0; k < 60; ++k) {
    const BoundaryPoint& bp = sets.boundary[size_t(k)];
    jmat(120 + k, 360 + k) = 1.0;
    y[120 + k] = prob.boundary_groups[size_t(bp.group)].target(bp.x);
  }
  const auto loss = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd mis = jmat * (c * a) - y;
    return a.dot(c * a) + mis.squaredNorm() / cfg.kernel.beta;
  };

  const double q0 = loss(sol.coefficients);
  Rng rng(77);
  for (int p = 0; p < 20; ++p) {
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d[i] = rng.uniform(-1.0, 1.0);
    d *= 1e-3 / d.norm();
    CHECK(loss(sol.coefficients + d) >= q0);
  }
}

TEST_CASE("posterior mean jet matches finite differences") {
  KernelConfig k;
  k.sigma = {0.3};
  std::vector<Point> pts;
  std::vector<double> vals;
  for (int i = 0; i < 8; ++i) {
    const double x = i / 7.0;
    pts.push_back({x, 0.0});
    vals.push_back(std::sin(2.0 * x));
  }
  GpSolution sol = gp_regress(pts, vals, 0.0, k);

  DerivativeSpec spec;
  spec.second = {0};
  const Point x{0.37, 0.0};
  const Jet jet = gp_mean_jet(sol, x, spec);
  const double h = 1e-5;
  const double up = gp_mean(sol, {x[0] + h, 0.0});
  const double um = gp_mean(sol, {x[0] - h, 0.0});
  const double u0 = gp_mean(sol, x);
  CHECK(jet.u == u0);
  CHECK(jet.du[0] == doctest::Approx((up - um) / (2.0 * h)).epsilon(1e-6));
  CHECK(jet.has_d2(0));
  CHECK(jet.d2u[0] == doctest::Approx((up - 2.0 * u0 + um) / (h * h)).epsilon(1e-4));
  CHECK_THROWS_AS(gp_mean_jet(sol, x, DerivativeSpec{{}, {1}}), ConfigError);
}

TEST_CASE("solver input validation") {
  PdeProblem prob = paper_burgers(0.05);
  SampleCounts counts;
  counts.collocation = 20;
  counts.per_boundary_group = {5, 2, 2};
  counts.test = 2;
  PointSets sets = sample_points(prob, counts, 3);

  PigpConfig cfg;
  cfg.kernel.sigma = {0.3, 0.15};

  SUBCASE("periodic groups are rejected") {
    PdeProblem ac = make_allen_cahn();
    SampleCounts ac_counts;
    ac_counts.collocation = 10;
    ac_counts.per_boundary_group = {4, 4};
    ac_counts.test = 2;
    PointSets ac_sets = sample_points(ac, ac_counts, 3);
    PigpConfig ac_cfg;
    ac_cfg.kernel.sigma = {0.3, 0.3};
    CHECK_THROWS_AS(pigp_solve(ac, ac_sets, ac_cfg), ConfigError);
  }

  SUBCASE("bad configs") {
    PointSets empty = sets;
    empty.collocation.clear();
    CHECK_THROWS_AS(pigp_solve(prob, empty, cfg), ConfigError);

    PigpConfig one_sigma = cfg;
    one_sigma.kernel.sigma = {0.3};
    CHECK_THROWS_AS(pigp_solve(prob, sets, one_sigma), ConfigError);

    PigpConfig literal = cfg;
    literal.kernel.literal_abs = true;
    CHECK_THROWS_AS(pigp_solve(prob, sets, literal), ConfigError);

    PigpConfig bad = cfg;
    bad.max_gn_iters = 0;
    CHECK_THROWS_AS(pigp_solve(prob, sets, bad), ConfigError);
    bad = cfg;
    bad.tol = 0.0;
    CHECK_THROWS_AS(pigp_solve(prob, sets, bad), ConfigError);
    bad = cfg;
    bad.pseudo_noise = 0.0;
    CHECK_THROWS_AS(pigp_solve(prob, sets, bad), ConfigError);

    Eigen::VectorXd short_start = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(pigp_solve(prob, sets, cfg, &short_start), ConfigError);
  }
}

TEST_CASE("checkpoint round trip and posterior export") {
  PdeProblem prob = zero_laplace();
  prob.residual = [](const double* x, const Jet& jet) {
    ResidualSens s;
    s.r = jet.d2u[0] + jet.d2u[1] - std::sin(kPi * x[0]);
    s.d_d2u = {1.0, 1.0};
    return s;
  };
  SampleCounts counts;
  counts.collocation = 40;
  counts.per_boundary_group = {10};
  counts.test = 5;
  PointSets sets = sample_points(prob, counts, 11);

  PigpConfig cfg;
  cfg.kernel.sigma = {0.35, 0.45};
  cfg.kernel.eta = 2e-5;
  cfg.kernel.beta = 3e-5;
  GpSolution sol = pigp_solve(prob, sets, cfg);

  const std::filesystem::path dir = "pigp_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.gp").string();
  save_gp(sol, path);
  GpSolution back = load_gp(path);

  CHECK(back.kernel.sigma == sol.kernel.sigma);
  CHECK(back.kernel.eta == sol.kernel.eta);
  CHECK(back.kernel.beta == sol.kernel.beta);
  CHECK(back.diagonal_noise == sol.diagonal_noise);
  CHECK(back.converged == sol.converged);
  CHECK(back.gn_iters == sol.gn_iters);
  CHECK(back.last_step == sol.last_step);
  CHECK(back.objective == sol.objective);
  CHECK(back.functionals.size() == sol.functionals.size());
  for (size_t i = 0; i < sol.functionals.size(); ++i) {
    CHECK(back.functionals[i].kind == sol.functionals[i].kind);
    CHECK(back.functionals[i].x == sol.functionals[i].x);
  }
  CHECK(back.coefficients == sol.coefficients);
  CHECK(back.state == sol.state);
  for (double xv : {0.21, 0.53, 0.84}) {
    const GpPosterior a = gp_posterior(sol, {xv, 0.4});
    const GpPosterior b = gp_posterior(back, {xv, 0.4});
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
  }

  std::ofstream(path, std::ios::trunc) << "colabel-gp 1\nkernel 2";
  CHECK_THROWS_AS(load_gp(path), IoError);
  CHECK_THROWS_AS(load_gp((dir / "missing.gp").string()), IoError);

  const std::string csv = (dir / "post.csv").string();
  std::vector<Point> grid = {{0.25, 0.5}, {0.75, 0.5}};
  write_posterior_csv(sol, grid, csv);
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "coord0,coord1,mean,variance");
  const GpPosterior p0 = gp_posterior(sol, grid[0]);
  char expect[128];
  std::snprintf(expect, sizeof(expect), "%.17g,%.17g,%.17g,%.17g", grid[0][0], grid[0][1], p0.mean,
                p0.variance);
  std::getline(in, line);
  CHECK(line == expect);
  std::getline(in, line);
  CHECK(!line.empty());
  std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
