#include "geolens/catalog.hpp"

#include <sstream>

namespace geolens {

namespace {

struct Flat {
    template <class T>
    SymMat2T<T> operator()(T, T) const {
        return {T(1.0), T(0.0), T(1.0)};
    }
};

struct Poincare {
    template <class T>
    SymMat2T<T> operator()(T u, T v) const {
        const T d = 1.0 - (u * u + v * v);
        const T f = 4.0 * inv(d * d);
        return {f, T(0.0), f};
    }
    static double inv(double x) { return 1.0 / x; }
    static HyperDual inv(HyperDual x) { return geolens::inv(x); }
};

struct Sphere {
    template <class T>
    SymMat2T<T> operator()(T u, T v) const {
        const T d = 1.0 + (u * u + v * v);
        const T f = 4.0 * inv(d * d);
        return {f, T(0.0), f};
    }
    static double inv(double x) { return 1.0 / x; }
    static HyperDual inv(HyperDual x) { return geolens::inv(x); }
};

struct HyperbolicStrip {
    template <class T>
    SymMat2T<T> operator()(T, T v) const {
        using std::cosh;
        const T c = cosh(v);
        return {c * c, T(0.0), T(1.0)};
    }
};

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

SurfaceModel euclidean_disk(double radius) {
    return {"euclidean_disk{R=" + fmt(radius) + "}", DiskChart{radius}, make_analytic_metric(Flat{})};
}

SurfaceModel poincare_disk(double chart_radius) {
    if (!(chart_radius > 0.0 && chart_radius < 1.0)) throw DomainError("poincare_disk needs 0 < R_chart < 1");
    return {"poincare_disk{R_chart=" + fmt(chart_radius) + "}", DiskChart{chart_radius},
            make_analytic_metric(Poincare{})};
}

SurfaceModel hyperbolic_cylinder(double half_width, double period) {
    return {"hyperbolic_cylinder{b=" + fmt(half_width) + ", L=" + fmt(period) + "}",
            StripChart{-half_width, half_width, period}, make_analytic_metric(HyperbolicStrip{})};
}

SurfaceModel flat_cylinder(double half_width, double period) {
    return {"flat_cylinder{b=" + fmt(half_width) + ", L=" + fmt(period) + "}",
            StripChart{-half_width, half_width, period}, make_analytic_metric(Flat{})};
}

SurfaceModel round_sphere(double chart_radius) {
    return {"round_sphere{R_chart=" + fmt(chart_radius) + "}", DiskChart{chart_radius},
            make_analytic_metric(Sphere{})};
}

SurfaceModel conformal_bump(const SurfaceModel& base, double amplitude, Vec2 center, double width) {
    auto omega = std::make_shared<BumpField>(amplitude, center, width);
    std::string name = "conformal_bump{base=" + base.name() + ", amplitude=" + fmt(amplitude) + ", center=(" +
                       fmt(center.x) + "," + fmt(center.y) + "), width=" + fmt(width) + "}";
    return {std::move(name), base.chart(), std::make_shared<ConformalMetric>(base.metric_ptr(), omega)};
}

SurfaceModel pullback(const SurfaceModel& base, std::shared_ptr<const Diffeo> diffeo) {
    std::string name = "pullback{base=" + base.name() + ", diffeo=" + diffeo->describe() + "}";
    return {std::move(name), base.chart(), std::make_shared<PullbackMetric>(base.metric_ptr(), std::move(diffeo))};
}

SurfaceModel finite_difference_copy(const SurfaceModel& base, double step_fraction) {
    auto metric = base.metric_ptr();
    auto closure = [metric](Vec2 p) { return metric->at(p); };
    return {base.name() + "[fd]", base.chart(),
            std::make_shared<FiniteDifferenceMetric>(closure, step_fraction * base.chart_diameter())};
}

}  // namespace geolens
