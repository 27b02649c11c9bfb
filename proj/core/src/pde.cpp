#include "colabel/pde.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "colabel/errors.hpp"

namespace colabel {

namespace {

constexpr double kPi = 3.14159265358979323846;

Point make_point(double c0, double c1) { return Point{c0, c1}; }

void check_box(const Box& domain, int dim) {
  for (int c = 0; c < dim; ++c) {
    if (!(domain.lo[c] < domain.hi[c]))
      throw ConfigError("pde: domain has empty extent in coordinate " + std::to_string(c));
  }
}

}  // namespace

const char* to_string(PseudoLabel::Source source) {
  switch (source) {
    case PseudoLabel::Source::self_pinn: return "self_pinn";
    case PseudoLabel::Source::self_pigp: return "self_pigp";
    case PseudoLabel::Source::from_pinn: return "from_pinn";
    case PseudoLabel::Source::from_pigp: return "from_pigp";
    case PseudoLabel::Source::from_plain_gp: return "from_plain_gp";
  }
  return "unknown";
}

PdeProblem make_vburgers(double nu, double T, double a, double b,
                         std::function<double(double)> u0, double ua, double ub) {
  if (!(nu > 0.0)) throw ConfigError("vburgers: viscosity must be positive");
  if (!(T > 0.0)) throw ConfigError("vburgers: horizon must be positive");
  if (!(a < b)) throw ConfigError("vburgers: empty spatial interval");
  if (!u0) throw ConfigError("vburgers: missing initial condition");

  PdeProblem p;
  p.name = "vburgers";
  p.dim = 2;
  p.domain.lo = {0.0, a};
  p.domain.hi = {T, b};
  p.spec.first = {0, 1};
  p.spec.second = {1};
  p.residual = [nu](const double*, const Jet& jet) {
    ResidualSens s;
    s.r = jet.du[0] + jet.u * jet.du[1] - nu * jet.d2u[1];
    s.d_u = jet.du[1];
    s.d_du = {1.0, jet.u};
    s.d_d2u = {0.0, -nu};
    return s;
  };

  BoundaryGroup ic;
  ic.kind = BoundaryGroup::Kind::dirichlet;
  ic.weight_tag = "ic";
  ic.target = [u0](const Point& x) { return u0(x[1]); };
  ic.sample = [a, b](Rng& rng) { return make_point(0.0, rng.uniform(a, b)); };

  BoundaryGroup left;
  left.kind = BoundaryGroup::Kind::dirichlet;
  left.weight_tag = "left";
  left.target = [ua](const Point&) { return ua; };
  left.sample = [T, a](Rng& rng) { return make_point(rng.uniform(0.0, T), a); };

  BoundaryGroup right;
  right.kind = BoundaryGroup::Kind::dirichlet;
  right.weight_tag = "right";
  right.target = [ub](const Point&) { return ub; };
  right.sample = [T, b](Rng& rng) { return make_point(rng.uniform(0.0, T), b); };

  p.boundary_groups = {std::move(ic), std::move(left), std::move(right)};
  return p;
}

PdeProblem make_allen_cahn() {
  PdeProblem p;
  p.name = "allen_cahn";
  p.dim = 2;
  p.domain.lo = {0.0, -1.0};
  p.domain.hi = {1.0, 1.0};
  p.spec.first = {0};
  p.spec.second = {1};
  p.residual = [](const double*, const Jet& jet) {
    ResidualSens s;
    s.r = jet.du[0] - 1e-4 * jet.d2u[1] + 5.0 * (jet.u * jet.u * jet.u - jet.u);
    s.d_u = 15.0 * jet.u * jet.u - 5.0;
    s.d_du = {1.0, 0.0};
    s.d_d2u = {0.0, -1e-4};
    return s;
  };

  BoundaryGroup ic;
  ic.kind = BoundaryGroup::Kind::dirichlet;
  ic.weight_tag = "ic";
  ic.target = [](const Point& x) { return x[1] * x[1] * std::cos(kPi * x[1]); };
  ic.sample = [](Rng& rng) { return make_point(0.0, rng.uniform(-1.0, 1.0)); };

  BoundaryGroup periodic;
  periodic.kind = BoundaryGroup::Kind::periodic_pair;
  periodic.weight_tag = "periodic";
  periodic.partner_map = [](const Point& x) { return make_point(x[0], -x[1]); };
  periodic.sample = [](Rng& rng) { return make_point(rng.uniform(0.0, 1.0), -1.0); };

  p.boundary_groups = {std::move(ic), std::move(periodic)};
  return p;
}

PdeProblem make_helmholtz(double k, const Box& domain) {
  check_box(domain, 2);

  PdeProblem p;
  p.name = "helmholtz";
  p.dim = 2;
  p.domain = domain;
  p.spec.first = {};
  p.spec.second = {0, 1};

  auto exact = [](const Point& x) {
    return std::sin(kPi * x[0]) * std::sin(4.0 * kPi * x[1]);
  };
  const double k2 = k * k;
  p.residual = [k2, exact](const double* x, const Jet& jet) {
    const double f = (k2 - 17.0 * kPi * kPi) * exact(Point{x[0], x[1]});
    ResidualSens s;
    s.r = jet.d2u[0] + jet.d2u[1] + k2 * jet.u - f;
    s.d_u = k2;
    s.d_du = {0.0, 0.0};
    s.d_d2u = {1.0, 1.0};
    return s;
  };
  p.reference = exact;

  const Box d = domain;
  struct Edge {
    const char* tag;
    int fixed_coord;
    bool at_hi;
  };
  const Edge edges[4] = {{"bottom", 1, false}, {"top", 1, true}, {"left", 0, false}, {"right", 0, true}};
  for (const Edge& e : edges) {
    BoundaryGroup g;
    g.kind = BoundaryGroup::Kind::dirichlet;
    g.weight_tag = e.tag;
    g.target = exact;
    const int fc = e.fixed_coord;
    const int mc = 1 - fc;
    const double fixed = e.at_hi ? d.hi[fc] : d.lo[fc];
    g.sample = [fc, mc, fixed, d](Rng& rng) {
      Point x{};
      x[fc] = fixed;
      x[mc] = rng.uniform(d.lo[mc], d.hi[mc]);
      return x;
    };
    p.boundary_groups.push_back(std::move(g));
  }
  return p;
}

PointSets sample_points(const PdeProblem& problem, const SampleCounts& counts,
                        std::uint64_t seed) {
  if (counts.collocation < 0 || counts.test < 0)
    throw ConfigError("sample_points: negative point count");
  if (counts.per_boundary_group.size() != problem.boundary_groups.size())
    throw ConfigError("sample_points: expected " + std::to_string(problem.boundary_groups.size()) +
                      " boundary group counts, got " + std::to_string(counts.per_boundary_group.size()));
  for (int n : counts.per_boundary_group)
    if (n < 0) throw ConfigError("sample_points: negative point count");
  check_box(problem.domain, problem.dim);

  Rng base(seed);
  const Box& d = problem.domain;

  auto draw_interior = [&](Rng& rng) {
    Point x{};
    for (;;) {
      bool open = true;
      for (int c = 0; c < problem.dim; ++c) {
        x[c] = rng.uniform(d.lo[c], d.hi[c]);
        if (x[c] == d.lo[c] || x[c] == d.hi[c]) open = false;
      }
      if (open) return x;
    }
  };

  PointSets sets;
  {
    Rng rng = base.fork(1);
    sets.collocation.reserve(static_cast<size_t>(counts.collocation));
    for (int i = 0; i < counts.collocation; ++i) sets.collocation.push_back(draw_interior(rng));
  }
  for (size_t g = 0; g < problem.boundary_groups.size(); ++g) {
    Rng rng = base.fork(100 + g);
    const int n = counts.per_boundary_group[g];
    for (int i = 0; i < n; ++i)
      sets.boundary.push_back(BoundaryPoint{problem.boundary_groups[g].sample(rng), static_cast<int>(g)});
  }
  {
    Rng rng = base.fork(2);
    sets.test.reserve(static_cast<size_t>(counts.test));
    for (int i = 0; i < counts.test; ++i) sets.test.push_back(draw_interior(rng));
  }
  return sets;
}

void write_point_sets_csv(const PointSets& sets, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  std::fputs("coord0,coord1,tag,group\n", f);
  auto row = [&](const Point& x, const char* tag, int group) {
    std::fprintf(f, "%.17g,%.17g,%s,%d\n", x[0], x[1], tag, group);
  };
  for (const Point& x : sets.collocation) row(x, "CL", -1);
  for (const BoundaryPoint& b : sets.boundary) row(b.x, "BC", b.group);
  for (const Point& x : sets.test) row(x, "TEST", -1);
  for (const PseudoLabel& l : sets.pseudo) row(l.x, "PD", -1);
  if (std::fclose(f) != 0) throw IoError("failed to write " + path);
}

}  // namespace colabel
