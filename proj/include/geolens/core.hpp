#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace geolens {

inline constexpr double kPi = std::numbers::pi;

// Chart-space vector (u, v).
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// General 2x2 matrix, row-major.
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    constexpr double det() const { return a * d - b * c; }
    constexpr Vec2 apply(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    constexpr Mat2 transposed() const { return {a, c, b, d}; }
    Mat2 inverse() const {
        const double dt = det();
        return {d / dt, -b / dt, -c / dt, a / dt};
    }
};

constexpr Mat2 operator*(const Mat2& m, const Mat2& n) {
    return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
            m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
}

// Symmetric 2x2 matrix [g11 g12; g12 g22].
struct SymMat2 {
    double g11 = 1.0, g12 = 0.0, g22 = 1.0;

    constexpr double det() const { return g11 * g22 - g12 * g12; }
    constexpr Vec2 apply(Vec2 v) const { return {g11 * v.x + g12 * v.y, g12 * v.x + g22 * v.y}; }
    constexpr double inner(Vec2 a, Vec2 b) const {
        return g11 * a.x * b.x + g12 * (a.x * b.y + a.y * b.x) + g22 * a.y * b.y;
    }
    double norm(Vec2 a) const { return std::sqrt(inner(a, a)); }
    SymMat2 inverse() const {
        const double dt = det();
        return {g22 / dt, -g12 / dt, g11 / dt};
    }
    bool positive_definite() const { return g11 > 0.0 && det() > 0.0; }
};

constexpr SymMat2 operator*(double s, const SymMat2& m) { return {s * m.g11, s * m.g12, s * m.g22}; }
constexpr SymMat2 operator+(const SymMat2& m, const SymMat2& n) {
    return {m.g11 + n.g11, m.g12 + n.g12, m.g22 + n.g22};
}

// Christoffel symbols of the second kind: upper[k] holds Gamma^k_ij as a
// symmetric matrix in (i, j).
struct Christoffel {
    std::array<SymMat2, 2> upper{SymMat2{0, 0, 0}, SymMat2{0, 0, 0}};

    double operator()(int k, int i, int j) const {
        const SymMat2& m = upper[static_cast<std::size_t>(k)];
        if (i == 0 && j == 0) return m.g11;
        if (i == 1 && j == 1) return m.g22;
        return m.g12;
    }
    // Gamma^k_ij a^i b^j
    constexpr Vec2 contract(Vec2 a, Vec2 b) const { return {upper[0].inner(a, b), upper[1].inner(a, b)}; }
};

// Value, gradient and Hessian of a scalar field at a point.
struct ScalarJet {
    double value = 0.0;
    Vec2 grad{};
    SymMat2 hess{0, 0, 0};
};

// ---------------------------------------------------------------------------
// Errors. Every failure mode named by the public operations has its own type
// so callers can dispatch on it.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define GEOLENS_ERROR(Name)                            \
    class Name : public Error {                        \
    public:                                            \
        explicit Name(const std::string& what)         \
            : Error(std::string(#Name ": ") + what) {} \
    }

GEOLENS_ERROR(DomainError);
GEOLENS_ERROR(NotSpd);
GEOLENS_ERROR(NotUnit);
GEOLENS_ERROR(EventNotBracketed);
GEOLENS_ERROR(NotTrapped);
GEOLENS_ERROR(NoBracket);
GEOLENS_ERROR(SolverDiverged);
GEOLENS_ERROR(StalledAtBoundary);
GEOLENS_ERROR(BoundaryMismatch);
GEOLENS_ERROR(NoIntersection);
GEOLENS_ERROR(CurvatureSignViolation);
GEOLENS_ERROR(ProbeTrapped);
GEOLENS_ERROR(BadCornerOrder);

#undef GEOLENS_ERROR

class LeftDomain : public Error {
public:
    explicit LeftDomain(double t_exit)
        : Error("LeftDomain: orbit reached the boundary at t=" + std::to_string(t_exit)), t_exit_(t_exit) {}
    double t_exit() const { return t_exit_; }

private:
    double t_exit_;
};

// Wrap an angle into [0, 2*pi).
inline double wrap_two_pi(double a) {
    double r = std::fmod(a, 2.0 * kPi);
    if (r < 0.0) r += 2.0 * kPi;
    return r;
}

// Wrap an angle into (-pi, pi].
inline double wrap_pi(double a) {
    double r = wrap_two_pi(a);
    return r > kPi ? r - 2.0 * kPi : r;
}

}  // namespace geolens
