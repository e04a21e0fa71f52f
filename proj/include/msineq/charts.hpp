#ifndef MSINEQ_CHARTS_HPP
#define MSINEQ_CHARTS_HPP

// Builtin chart families. Every factory takes the per-axis resolution so that
// scenarios can be re-instantiated along a refinement schedule.

#include <vector>

#include "msineq/geometry.hpp"
#include "msineq/polynomial.hpp"

namespace msineq::charts {

/// Axis-aligned box [lo, hi]^n embedded as (x, 0, ..., 0); all faces are boundary.
Chart flat_box(int n, int ambient_dim, std::vector<double> lo, std::vector<double> hi, int resolution,
               DerivativeMode mode = DerivativeMode::Exact);

/// Flat disk of the given radius in polar parameters (r, phi), centred at
/// (cx, cy, 0, ...). The centre is a cap, r = radius is the boundary.
Chart flat_disk(int ambient_dim, double radius, int resolution, double cx = 0.0, double cy = 0.0,
                DerivativeMode mode = DerivativeMode::Exact);

/// Round sphere in spherical coordinates (theta, phi); both poles are caps.
Chart round_sphere(int ambient_dim, double radius, int resolution, DerivativeMode mode = DerivativeMode::Exact);

/// Cylinder of the given radius over z in [0, height]; two boundary circles.
Chart cylinder(int ambient_dim, double radius, double height, int resolution,
               DerivativeMode mode = DerivativeMode::Exact);

/// Torus of revolution, closed (both axes periodic).
Chart torus(int ambient_dim, double major, double minor, int resolution, DerivativeMode mode = DerivativeMode::Exact);

/// F(x) = (P_1(x), ..., P_N(x)) on a box with boundary faces everywhere.
Chart polynomial(int n, std::vector<double> lo, std::vector<double> hi, std::vector<Polynomial> coords,
                 int resolution, DerivativeMode mode = DerivativeMode::Exact);

/// Closed sphere-like surface: s(theta, phi) the unit sphere point,
/// F = (rho(s) s, extra_1(s), ..., extra_k(s)) with rho, extra polynomials in s.
Chart sphere_like(Polynomial radius, std::vector<Polynomial> extra, int resolution,
                  DerivativeMode mode = DerivativeMode::Exact);

}  // namespace msineq::charts

#endif  // MSINEQ_CHARTS_HPP
