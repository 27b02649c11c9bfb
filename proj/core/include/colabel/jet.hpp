#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace colabel {

// Problems live in at most two coordinates (t,x) or (x,y).
inline constexpr int kMaxDim = 2;

using Point = std::array<double, kMaxDim>;

// Which partial derivatives a residual consumes: coordinate indices for
// first-order partials and for pure second-order partials. Mixed partials are
// not supported.
struct DerivativeSpec {
  std::vector<int> first;
  std::vector<int> second;
};

// Value and derivatives of a scalar field at one point. du[c] = du/dx_c for
// every input coordinate. d2u[s] holds d^2u/dx_s^2 only for requested
// coordinates; presence is tracked explicitly rather than zero-filled.
struct Jet {
  double u = 0.0;
  std::array<double, kMaxDim> du{};
  std::array<double, kMaxDim> d2u{};
  unsigned d2_present = 0;

  bool has_d2(int c) const { return (d2_present >> c) & 1u; }
  void set_d2(int c, double v) {
    d2u[static_cast<std::size_t>(c)] = v;
    d2_present |= 1u << c;
  }
};

}  // namespace colabel
