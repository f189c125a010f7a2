#pragma once

// Built-in model metrics. The constant-curvature members have closed forms
// that the tests use as oracles.

#include <memory>

#include "geolens/metric.hpp"

namespace geolens {

// Flat unit-speed disk of Euclidean radius R.
SurfaceModel euclidean_disk(double radius = 1.0);

// 4 / (1 - r^2)^2 * Id (K = -1) restricted to r <= chart_radius < 1.
SurfaceModel poincare_disk(double chart_radius = 0.5);

// diag(cosh^2 v, 1) on R x [-b, b] with deck period L (K = -1). The waist
// v = 0 is the unique closed geodesic; the boundary has curvature tanh b.
SurfaceModel hyperbolic_cylinder(double half_width = 1.0, double period = 2.0);

// Identity metric on R x [-b, b], period L. K = 0 and geodesic boundary, so
// it is not strictly convex; used as a non-hyperbolic trapped test case.
SurfaceModel flat_cylinder(double half_width = 1.0, double period = 2.0);

// Stereographic round sphere 4 / (1 + r^2)^2 * Id (K = +1) on a chart disk
// larger than the equator; not convex. Test metric for conjugate points.
SurfaceModel round_sphere(double chart_radius = 3.0);

// e^{2 omega} g_base with omega a bump of the given amplitude.
SurfaceModel conformal_bump(const SurfaceModel& base, double amplitude, Vec2 center, double width);

// psi^* g_base on the chart of the base model.
SurfaceModel pullback(const SurfaceModel& base, std::shared_ptr<const Diffeo> diffeo);

// Same metric values as `base`, derivatives by central differences
// (step = step_fraction * chart diameter).
SurfaceModel finite_difference_copy(const SurfaceModel& base, double step_fraction = 1e-5);

}  // namespace geolens
