#pragma once

// Surfaces with boundary presented as analytic metric charts: either a
// Euclidean-radius disk, or an annulus given directly by its universal-cover
// strip R x [lower, upper] with the deck translation (u, v) -> (u + L, v).

#include <functional>
#include <memory>
#include <string>
#include <variant>

#include "geolens/core.hpp"
#include "geolens/hyperdual.hpp"

namespace geolens {

inline constexpr double kUnitTolerance = 1e-9;

enum class DerivativeMode { Analytic, FiniteDifference };

// Metric tensor g together with its Christoffel symbols and Gauss curvature.
class MetricField {
public:
    virtual ~MetricField() = default;
    virtual SymMat2 at(Vec2 p) const = 0;
    virtual Christoffel christoffel(Vec2 p) const = 0;
    virtual double curvature(Vec2 p) const = 0;
    virtual DerivativeMode mode() const = 0;
};

// g and its partial derivatives up to second order.
struct MetricJet {
    SymMat2 g;
    SymMat2 du{0, 0, 0}, dv{0, 0, 0};
    SymMat2 duu{0, 0, 0}, duv{0, 0, 0}, dvv{0, 0, 0};
};

Christoffel christoffel_from_jet(const MetricJet& jet);
// Brioschi's formula.
double curvature_from_jet(const MetricJet& jet);

// Symmetric matrix over an arbitrary scalar type, returned by catalog
// metric functors so they can be evaluated on hyper-dual numbers.
template <class T>
struct SymMat2T {
    T g11, g12, g22;
};

// Metric given by a functor `template <class T> SymMat2T<T> operator()(T u, T v)`;
// all derivatives are exact.
template <class F>
class AnalyticMetric final : public MetricField {
public:
    explicit AnalyticMetric(F f) : f_(std::move(f)) {}

    SymMat2 at(Vec2 p) const override {
        const auto m = f_(p.x, p.y);
        return {m.g11, m.g12, m.g22};
    }

    Christoffel christoffel(Vec2 p) const override {
        const auto m = f_(HyperDual(p.x, 1, 0, 0), HyperDual(p.y, 0, 1, 0));
        MetricJet jet;
        jet.g = {m.g11.a, m.g12.a, m.g22.a};
        jet.du = {m.g11.b, m.g12.b, m.g22.b};
        jet.dv = {m.g11.c, m.g12.c, m.g22.c};
        return christoffel_from_jet(jet);
    }

    double curvature(Vec2 p) const override { return curvature_from_jet(jet(p)); }

    DerivativeMode mode() const override { return DerivativeMode::Analytic; }

    MetricJet jet(Vec2 p) const {
        const auto a = f_(HessianSeeds::uu(p.x), HyperDual(p.y));
        const auto b = f_(HessianSeeds::u1(p.x), HessianSeeds::v2(p.y));
        const auto c = f_(HyperDual(p.x), HessianSeeds::vv(p.y));
        MetricJet j;
        j.g = {a.g11.a, a.g12.a, a.g22.a};
        j.du = {a.g11.b, a.g12.b, a.g22.b};
        j.dv = {c.g11.b, c.g12.b, c.g22.b};
        j.duu = {a.g11.d, a.g12.d, a.g22.d};
        j.duv = {b.g11.d, b.g12.d, b.g22.d};
        j.dvv = {c.g11.d, c.g12.d, c.g22.d};
        return j;
    }

private:
    F f_;
};

template <class F>
std::shared_ptr<const MetricField> make_analytic_metric(F f) {
    return std::make_shared<AnalyticMetric<F>>(std::move(f));
}

// Metric known only pointwise; derivatives by central differences.
class FiniteDifferenceMetric final : public MetricField {
public:
    using Closure = std::function<SymMat2(Vec2)>;

    // `step` is the first-derivative stencil; second derivatives use a
    // larger stencil to balance truncation against cancellation.
    FiniteDifferenceMetric(Closure g, double step);

    SymMat2 at(Vec2 p) const override { return g_(p); }
    Christoffel christoffel(Vec2 p) const override;
    double curvature(Vec2 p) const override;
    DerivativeMode mode() const override { return DerivativeMode::FiniteDifference; }
    double step() const { return step_; }

private:
    Closure g_;
    double step_;
    double step2_;
};

// Scalar field with exact derivatives (conformal factors).
class ScalarField {
public:
    virtual ~ScalarField() = default;
    virtual double value(Vec2 p) const = 0;
    virtual ScalarJet jet(Vec2 p) const = 0;
};

// A * exp(1 - 1 / (1 - q)), q = |x - center|^2 / width^2, zero for q >= 1.
// Smooth, compactly supported, maximum A at the center.
class BumpField final : public ScalarField {
public:
    BumpField(double amplitude, Vec2 center, double width);
    double value(Vec2 p) const override;
    ScalarJet jet(Vec2 p) const override;

    double amplitude() const { return amplitude_; }
    Vec2 center() const { return center_; }
    double width() const { return width_; }

    template <class T>
    T operator()(T u, T v) const {
        const T du = u - center_.x;
        const T dv = v - center_.y;
        const T q = (du * du + dv * dv) * (1.0 / (width_ * width_));
        if (value_of(q) >= 1.0) return T(0.0);
        using std::exp;
        return amplitude_ * exp(1.0 - inv(1.0 - q));
    }

private:
    static double inv(double x) { return 1.0 / x; }
    static HyperDual inv(HyperDual x) { return geolens::inv(x); }

    double amplitude_;
    Vec2 center_;
    double width_;
};

// e^{2 omega} g_base.
class ConformalMetric final : public MetricField {
public:
    ConformalMetric(std::shared_ptr<const MetricField> base, std::shared_ptr<const ScalarField> omega);

    SymMat2 at(Vec2 p) const override;
    Christoffel christoffel(Vec2 p) const override;
    double curvature(Vec2 p) const override;
    DerivativeMode mode() const override { return base_->mode(); }

    const MetricField& base() const { return *base_; }
    const ScalarField& omega() const { return *omega_; }

private:
    std::shared_ptr<const MetricField> base_;
    std::shared_ptr<const ScalarField> omega_;
};

// Jacobian and Hessians of a planar map. hess[m] holds d^2 psi^m / dx^i dx^j.
struct DiffeoJet {
    Vec2 value;
    Mat2 jac;
    std::array<SymMat2, 2> hess{SymMat2{0, 0, 0}, SymMat2{0, 0, 0}};
};

class Diffeo {
public:
    virtual ~Diffeo() = default;
    virtual Vec2 map(Vec2 p) const = 0;
    virtual DiffeoJet jet(Vec2 p) const = 0;
    virtual Vec2 inverse(Vec2 p) const = 0;
    virtual std::string describe() const = 0;
};

// Rotation about the origin by an angle A * beta(|x|^2 / radius^2): identity
// outside the disk of the given radius, so it fixes a neighbourhood of any
// boundary circle of larger radius.
class SwirlDiffeo final : public Diffeo {
public:
    SwirlDiffeo(double amplitude, double radius);
    Vec2 map(Vec2 p) const override;
    DiffeoJet jet(Vec2 p) const override;
    Vec2 inverse(Vec2 p) const override;
    std::string describe() const override;

    template <class T>
    std::array<T, 2> eval(T u, T v, double sign = 1.0) const {
        using std::cos;
        using std::exp;
        using std::sin;
        const T q = (u * u + v * v) * (1.0 / (radius_ * radius_));
        if (value_of(q) >= 1.0) return {u, v};
        const T angle = (sign * amplitude_) * exp(1.0 - inv_(1.0 - q));
        const T c = cos(angle);
        const T s = sin(angle);
        return {c * u - s * v, s * u + c * v};
    }

private:
    static double inv_(double x) { return 1.0 / x; }
    static HyperDual inv_(HyperDual x) { return geolens::inv(x); }
    double amplitude_;
    double radius_;
};

// x + A * beta(|x - c|^2 / w^2) * direction. A diffeomorphism while
// A * max|grad beta| < 1, checked at construction.
class ShiftDiffeo final : public Diffeo {
public:
    ShiftDiffeo(double amplitude, Vec2 center, double width, Vec2 direction);
    Vec2 map(Vec2 p) const override;
    DiffeoJet jet(Vec2 p) const override;
    Vec2 inverse(Vec2 p) const override;
    std::string describe() const override;

private:
    BumpField bump_;
    Vec2 direction_;
};

// psi^* g_base, so psi : (M, this) -> (M, g_base) is an isometry.
class PullbackMetric final : public MetricField {
public:
    PullbackMetric(std::shared_ptr<const MetricField> base, std::shared_ptr<const Diffeo> diffeo);

    SymMat2 at(Vec2 p) const override;
    Christoffel christoffel(Vec2 p) const override;
    double curvature(Vec2 p) const override { return base_->curvature(diffeo_->map(p)); }
    DerivativeMode mode() const override { return base_->mode(); }

    const Diffeo& diffeo() const { return *diffeo_; }

private:
    std::shared_ptr<const MetricField> base_;
    std::shared_ptr<const Diffeo> diffeo_;
};

// ---------------------------------------------------------------------------

struct DiskChart {
    double radius = 1.0;
};

// Universal cover of an annulus: R x [lower, upper] with deck period L.
struct StripChart {
    double lower = -1.0;
    double upper = 1.0;
    double period = 1.0;
};

using Chart = std::variant<DiskChart, StripChart>;

// A point of the boundary of the chart. Disk: component 0, param = polar
// angle. Strip: component 0 is v = lower (traversed towards +u), component 1
// is v = upper (traversed towards -u); param = u on the cover.
struct BoundaryPoint {
    int component = 0;
    double param = 0.0;
};

struct BoundaryData {
    Vec2 point;
    Vec2 normal;     // g-unit, inward
    Vec2 tangent;    // g-unit, positively oriented
    double curvature = 0.0;  // geodesic curvature w.r.t. the inward normal
    double speed = 0.0;      // |dx/ds|_g, the boundary length density
};

class SurfaceModel {
public:
    SurfaceModel(std::string name, Chart chart, std::shared_ptr<const MetricField> metric);

    const std::string& name() const { return name_; }
    const Chart& chart() const { return chart_; }
    const MetricField& metric() const { return *metric_; }
    std::shared_ptr<const MetricField> metric_ptr() const { return metric_; }

    bool is_annulus() const { return std::holds_alternative<StripChart>(chart_); }
    int boundary_components() const { return is_annulus() ? 2 : 1; }

    // Positive inside, zero on the boundary, distance-like in chart units.
    double boundary_function(Vec2 p) const;
    // Chart gradient of the boundary function component active at p.
    Vec2 boundary_function_gradient(Vec2 p) const;
    bool contains(Vec2 p, double slack = 0.0) const { return boundary_function(p) >= -slack; }

    Vec2 boundary_point(BoundaryPoint b) const;
    Vec2 boundary_velocity(BoundaryPoint b) const;
    Vec2 boundary_acceleration(BoundaryPoint b) const;
    // Boundary point nearest to p.
    BoundaryPoint locate_boundary(Vec2 p) const;

    // Period of the boundary parameter over one fundamental domain.
    double param_period() const;
    Vec2 deck(Vec2 p, int n) const;
    BoundaryPoint deck(BoundaryPoint b, int n) const;

    double chart_diameter() const;
    // Rough g-diameter; used for default horizons and step caps.
    double diameter() const { return diameter_; }

private:
    std::string name_;
    Chart chart_;
    std::shared_ptr<const MetricField> metric_;
    double diameter_ = 1.0;
};

// ---------------------------------------------------------------------------
// Pointwise operations.

SymMat2 metric_at(const SurfaceModel& model, Vec2 p);
Christoffel christoffel(const SurfaceModel& model, Vec2 p);
double gauss_curvature(const SurfaceModel& model, Vec2 p);
// +theta rotation of the g-unit vector w at p, positive orientation.
Vec2 rotate(const SurfaceModel& model, Vec2 p, Vec2 w, double theta);
// Minimum geodesic curvature over n_samples boundary points per component.
double boundary_convexity_check(const SurfaceModel& model, int n_samples);
BoundaryData boundary_data(const SurfaceModel& model, BoundaryPoint b);

// Unchecked helpers on a metric matrix.
Vec2 g_normalize(const SymMat2& g, Vec2 w);
// g-rotation by +pi/2 of w (preserves the g-norm).
Vec2 g_quarter_turn(const SymMat2& g, Vec2 w);
Vec2 g_rotate(const SymMat2& g, Vec2 w, double theta);
// Oriented g-angle from a to b, in (-pi, pi].
double g_oriented_angle(const SymMat2& g, Vec2 a, Vec2 b);
// g-length of the straight chart segment a -> b.
double chart_segment_length(const MetricField& metric, Vec2 a, Vec2 b, int nodes = 32);

}  // namespace geolens
