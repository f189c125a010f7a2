#pragma once

// Hyper-dual numbers a + b e1 + c e2 + d e1e2 with e1^2 = e2^2 = 0.
// Evaluating f(x + e1 + e2) yields f, f', f' and f'' exactly, which is how
// the catalog metrics get analytic first and second derivatives.

#include <cmath>

#include "geolens/core.hpp"

namespace geolens {

struct HyperDual {
    double a = 0.0;  // value
    double b = 0.0;  // e1 part
    double c = 0.0;  // e2 part
    double d = 0.0;  // e1e2 part

    constexpr HyperDual() = default;
    constexpr HyperDual(double v) : a(v) {}  // NOLINT(google-explicit-constructor)
    constexpr HyperDual(double v, double e1, double e2, double e12) : a(v), b(e1), c(e2), d(e12) {}
};

constexpr HyperDual operator+(HyperDual x, HyperDual y) { return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d}; }
constexpr HyperDual operator-(HyperDual x, HyperDual y) { return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d}; }
constexpr HyperDual operator-(HyperDual x) { return {-x.a, -x.b, -x.c, -x.d}; }
constexpr HyperDual operator*(HyperDual x, HyperDual y) {
    return {x.a * y.a, x.a * y.b + x.b * y.a, x.a * y.c + x.c * y.a,
            x.a * y.d + x.b * y.c + x.c * y.b + x.d * y.a};
}

// Applies a scalar function with value f0, first derivative f1, second f2.
constexpr HyperDual chain(HyperDual x, double f0, double f1, double f2) {
    return {f0, f1 * x.b, f1 * x.c, f1 * x.d + f2 * x.b * x.c};
}

inline HyperDual inv(HyperDual x) {
    const double r = 1.0 / x.a;
    return chain(x, r, -r * r, 2.0 * r * r * r);
}
inline HyperDual operator/(HyperDual x, HyperDual y) { return x * inv(y); }

inline HyperDual exp(HyperDual x) {
    const double e = std::exp(x.a);
    return chain(x, e, e, e);
}
inline HyperDual log(HyperDual x) { return chain(x, std::log(x.a), 1.0 / x.a, -1.0 / (x.a * x.a)); }
inline HyperDual sin(HyperDual x) { return chain(x, std::sin(x.a), std::cos(x.a), -std::sin(x.a)); }
inline HyperDual cos(HyperDual x) { return chain(x, std::cos(x.a), -std::sin(x.a), -std::cos(x.a)); }
inline HyperDual sinh(HyperDual x) { return chain(x, std::sinh(x.a), std::cosh(x.a), std::sinh(x.a)); }
inline HyperDual cosh(HyperDual x) { return chain(x, std::cosh(x.a), std::sinh(x.a), std::cosh(x.a)); }
inline HyperDual sqrt(HyperDual x) {
    const double s = std::sqrt(x.a);
    return chain(x, s, 0.5 / s, -0.25 / (s * x.a));
}

inline double value_of(double x) { return x; }
inline double value_of(HyperDual x) { return x.a; }

// Seeds for the three evaluations that together give the gradient and Hessian
// of a function of (u, v).
struct HessianSeeds {
    static constexpr HyperDual uu(double u) { return {u, 1.0, 1.0, 0.0}; }
    static constexpr HyperDual u1(double u) { return {u, 1.0, 0.0, 0.0}; }
    static constexpr HyperDual v2(double v) { return {v, 0.0, 1.0, 0.0}; }
    static constexpr HyperDual vv(double v) { return {v, 1.0, 1.0, 0.0}; }
};

// Jet of a scalar function f(T u, T v) templated on the scalar type.
template <class F>
ScalarJet scalar_jet(const F& f, Vec2 p) {
    const HyperDual fuu = f(HessianSeeds::uu(p.x), HyperDual(p.y));
    const HyperDual fuv = f(HessianSeeds::u1(p.x), HessianSeeds::v2(p.y));
    const HyperDual fvv = f(HyperDual(p.x), HessianSeeds::vv(p.y));
    return {fuu.a, {fuu.b, fvv.b}, {fuu.d, fuv.d, fvv.d}};
}

}  // namespace geolens
