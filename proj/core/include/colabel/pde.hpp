#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "colabel/diff.hpp"
#include "colabel/jet.hpp"
#include "colabel/rng.hpp"

namespace colabel {

struct Box {
  std::array<double, kMaxDim> lo{};
  std::array<double, kMaxDim> hi{};
};

// One face (or paired faces) of the boundary with its own loss weight slot.
// Dirichlet groups fit u to `target`; periodic_pair groups fit
// u(x) - u(partner_map(x)) to zero.
struct BoundaryGroup {
  enum class Kind { dirichlet, periodic_pair };
  Kind kind = Kind::dirichlet;
  std::string weight_tag;
  std::function<double(const Point&)> target;
  std::function<Point(const Point&)> partner_map;
  std::function<Point(Rng&)> sample;
};

struct PseudoLabel {
  enum class Source { self_pinn, self_pigp, from_pinn, from_pigp, from_plain_gp };
  Point x{};
  double value = 0.0;
  double residual_score = 0.0;
  std::optional<double> variance_score;
  Source source = Source::self_pinn;
  int iteration_added = 0;
  int test_index = -1;  // position in S_Test this label was drawn from
};

const char* to_string(PseudoLabel::Source source);

struct BoundaryPoint {
  Point x{};
  int group = 0;
};

// The four point collections driving the semi-supervised loops.
struct PointSets {
  std::vector<Point> collocation;
  std::vector<BoundaryPoint> boundary;
  std::vector<Point> test;
  std::vector<PseudoLabel> pseudo;
};

// A PDE in residual form: residual(x, jet) = P(u)(x) - f(x). The callback
// reads jet.du only at spec.first coordinates and jet.d2u only at
// spec.second coordinates.
struct PdeProblem {
  std::string name;
  int dim = 2;
  Box domain;
  DerivativeSpec spec;
  ResidualFn residual;
  std::vector<BoundaryGroup> boundary_groups;
  std::function<double(const Point&)> reference;  // exact solution, if analytic

  double residual_value(const Point& x, const Jet& jet) const {
    return residual(x.data(), jet).r;
  }
};

// Viscous Burgers u_t + u u_x = nu u_xx on (0,T] x (a,b) with Dirichlet
// groups ic (u(0,x) = u0(x)), left (u(t,a) = ua), right (u(t,b) = ub).
PdeProblem make_vburgers(double nu, double T, double a, double b,
                         std::function<double(double)> u0, double ua, double ub);

// Allen-Cahn u_t - 1e-4 u_xx + 5(u^3 - u) = 0 on (0,1] x (-1,1) with IC
// u(0,x) = x^2 cos(pi x) and periodic pairing of x = -1 with x = +1.
PdeProblem make_allen_cahn();

// Helmholtz u_xx + u_yy + k^2 u = f with f manufactured from
// u*(x,y) = sin(pi x) sin(4 pi y); four Dirichlet edge groups.
PdeProblem make_helmholtz(double k, const Box& domain);

struct SampleCounts {
  int collocation = 0;
  std::vector<int> per_boundary_group;
  int test = 0;
};

// Uniform interior points for S_CL and S_Test, per-group boundary points for
// S_BC, empty S_PD. Deterministic given the seed.
PointSets sample_points(const PdeProblem& problem, const SampleCounts& counts,
                        std::uint64_t seed);

// CSV rows: coord0,coord1,tag,group with tag in {CL,BC,TEST,PD}.
void write_point_sets_csv(const PointSets& sets, const std::string& path);

}  // namespace colabel
