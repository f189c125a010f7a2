#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "geolens/catalog.hpp"
#include "geolens/metric.hpp"

using namespace geolens;

namespace {

// Christoffel symbols from central differences of the metric values only.
Christoffel fd_christoffel(const MetricField& m, Vec2 p, double h = 1e-5) {
    auto g = [&](Vec2 q, int i, int j) {
        const SymMat2 s = m.at(q);
        return i == 0 && j == 0 ? s.g11 : (i == 1 && j == 1 ? s.g22 : s.g12);
    };
    auto dg = [&](int k, int i, int j) {
        const Vec2 e = k == 0 ? Vec2{h, 0} : Vec2{0, h};
        return (g(p + e, i, j) - g(p - e, i, j)) / (2 * h);
    };
    const SymMat2 inv = m.at(p).inverse();
    auto ginv = [&](int i, int j) { return i == 0 && j == 0 ? inv.g11 : (i == 1 && j == 1 ? inv.g22 : inv.g12); };
    Christoffel out;
    for (int k = 0; k < 2; ++k) {
        double v[2][2];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                v[i][j] = 0;
                for (int l = 0; l < 2; ++l) v[i][j] += 0.5 * ginv(k, l) * (dg(i, l, j) + dg(j, l, i) - dg(l, i, j));
            }
        out.upper[k] = {v[0][0], v[0][1], v[1][1]};
    }
    return out;
}

void expect_christoffel_near(const Christoffel& a, const Christoffel& b, double tol) {
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) EXPECT_NEAR(a(k, i, j), b(k, i, j), tol * (1.0 + std::abs(b(k, i, j)))) << k << i << j;
}

std::shared_ptr<const Diffeo> test_swirl() { return std::make_shared<SwirlDiffeo>(0.6, 0.4); }

}  // namespace

TEST(MetricAt, CatalogValues) {
    const SymMat2 e = metric_at(euclidean_disk(), {0.3, 0.4});
    EXPECT_DOUBLE_EQ(e.g11, 1.0);
    EXPECT_DOUBLE_EQ(e.g12, 0.0);
    EXPECT_DOUBLE_EQ(e.g22, 1.0);
    const SymMat2 p = metric_at(poincare_disk(0.5), {0.0, 0.0});
    EXPECT_DOUBLE_EQ(p.g11, 4.0);
    EXPECT_DOUBLE_EQ(p.g22, 4.0);
    const SymMat2 c = metric_at(hyperbolic_cylinder(1.0, 2.0), {3.7, 0.0});
    EXPECT_DOUBLE_EQ(c.g11, 1.0);
    EXPECT_DOUBLE_EQ(c.g22, 1.0);
}

TEST(MetricAt, RejectsPointsOutsideChart) {
    EXPECT_THROW(metric_at(euclidean_disk(), {0.9, 0.9}), DomainError);
    EXPECT_THROW(metric_at(hyperbolic_cylinder(1.0, 2.0), {0.0, 1.5}), DomainError);
    EXPECT_NO_THROW(metric_at(hyperbolic_cylinder(1.0, 2.0), {-1e6, 0.99}));
}

TEST(MetricAt, RejectsIndefiniteMetric) {
    auto bad = std::make_shared<FiniteDifferenceMetric>([](Vec2 p) { return SymMat2{p.x, 0.0, 1.0}; }, 1e-5);
    SurfaceModel m("bad", DiskChart{1.0}, bad);
    EXPECT_NO_THROW(metric_at(m, {0.5, 0.0}));
    EXPECT_THROW(metric_at(m, {-0.5, 0.0}), NotSpd);
}

TEST(Christoffel, FlatIsZero) {
    const Christoffel g = christoffel(euclidean_disk(), {0.2, -0.3});
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) EXPECT_EQ(g(k, i, j), 0.0);
}

TEST(Christoffel, HyperbolicStripClosedForm) {
    const SurfaceModel m = hyperbolic_cylinder(1.0, 2.0);
    const double v = 0.5;
    const Christoffel g = christoffel(m, {0.3, v});
    EXPECT_NEAR(g(0, 0, 1), std::tanh(v), 1e-14);
    EXPECT_NEAR(g(0, 0, 1), 0.46212, 1e-5);
    EXPECT_NEAR(g(1, 0, 0), -std::cosh(v) * std::sinh(v), 1e-14);
    EXPECT_NEAR(g(0, 0, 0), 0.0, 1e-15);
    EXPECT_NEAR(g(0, 1, 1), 0.0, 1e-15);
    EXPECT_NEAR(g(1, 0, 1), 0.0, 1e-15);
    EXPECT_NEAR(g(1, 1, 1), 0.0, 1e-15);
    expect_christoffel_near(g, fd_christoffel(m.metric(), {0.3, v}), 1e-8);
}

TEST(Christoffel, FiniteDifferenceModeConvergesQuadratically) {
    const SurfaceModel exact = poincare_disk(0.5);
    const Vec2 p{0.2, 0.1};
    const Christoffel ref = christoffel(exact, p);
    double err[2];
    const double fractions[2] = {1e-3, 5e-4};
    for (int r = 0; r < 2; ++r) {
        const SurfaceModel fd = finite_difference_copy(exact, fractions[r]);
        const Christoffel g = christoffel(fd, p);
        err[r] = 0.0;
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) err[r] = std::max(err[r], std::abs(g(k, i, j) - ref(k, i, j)));
    }
    // halving h divides the error by about four
    EXPECT_NEAR(err[0] / err[1], 4.0, 0.2);
    const SurfaceModel fd_default = finite_difference_copy(exact);
    expect_christoffel_near(christoffel(fd_default, p), ref, 1e-8);
}

TEST(Christoffel, MetricCompatibilityInFiniteDifferenceMode) {
    const SurfaceModel m = finite_difference_copy(conformal_bump(poincare_disk(0.5), 0.1, {0.05, 0.0}, 0.4));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    const double h = 1e-5;
    for (int s = 0; s < 10; ++s) {
        const Vec2 p{u(rng), u(rng)};
        const Christoffel gam = christoffel(m, p);
        const SymMat2 g = m.metric().at(p);
        auto gij = [&](const SymMat2& s2, int i, int j) {
            return i == 0 && j == 0 ? s2.g11 : (i == 1 && j == 1 ? s2.g22 : s2.g12);
        };
        for (int k = 0; k < 2; ++k) {
            const Vec2 e = k == 0 ? Vec2{h, 0} : Vec2{0, h};
            const SymMat2 gp = m.metric().at(p + e), gm = m.metric().at(p - e);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    double cov = (gij(gp, i, j) - gij(gm, i, j)) / (2 * h);
                    for (int l = 0; l < 2; ++l) cov -= gam(l, k, i) * gij(g, l, j) + gam(l, k, j) * gij(g, i, l);
                    EXPECT_NEAR(cov, 0.0, 1e-7);
                }
        }
    }
}

TEST(Curvature, ConstantCurvatureCatalog) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int s = 0; s < 20; ++s) {
        const Vec2 p{u(rng), u(rng)};
        EXPECT_NEAR(gauss_curvature(euclidean_disk(), p), 0.0, 1e-14);
        EXPECT_NEAR(gauss_curvature(poincare_disk(0.5), p), -1.0, 1e-12);
        EXPECT_NEAR(gauss_curvature(hyperbolic_cylinder(1.0, 2.0), {7 * p.x, 2 * p.y}), -1.0, 1e-12);
        EXPECT_NEAR(gauss_curvature(round_sphere(3.0), {5 * p.x, 5 * p.y}), 1.0, 1e-12);
        EXPECT_NEAR(gauss_curvature(flat_cylinder(1.0, 2.0), p), 0.0, 1e-14);
        EXPECT_NEAR(gauss_curvature(finite_difference_copy(poincare_disk(0.5)), p), -1.0, 1e-5);
    }
}

TEST(Curvature, ConformalMatchesLaplacianFormula) {
    // flat base: K = -e^{-2 omega} Laplacian(omega), Laplacian by differences
    const Vec2 c{0.1, -0.05};
    const SurfaceModel m = conformal_bump(euclidean_disk(), 0.3, c, 0.6);
    BumpField omega(0.3, c, 0.6);
    const double h = 1e-3;
    for (Vec2 p : {Vec2{0.1, -0.05}, Vec2{0.3, 0.1}, Vec2{-0.2, 0.2}, Vec2{0.5, -0.3}}) {
        // fourth-order five-point second differences
        auto d2 = [&](Vec2 e) {
            return (-omega.value(p + 2 * e) + 16 * omega.value(p + e) - 30 * omega.value(p) + 16 * omega.value(p - e) -
                    omega.value(p - 2 * e)) /
                   (12 * h * h);
        };
        const double lap = d2({h, 0}) + d2({0, h});
        EXPECT_NEAR(gauss_curvature(m, p), -std::exp(-2 * omega.value(p)) * lap, 1e-6);
        expect_christoffel_near(christoffel(m, p), fd_christoffel(m.metric(), p), 1e-8);
    }
}

TEST(Curvature, ConformalBumpOnPoincarePatchStaysNegative) {
    const SurfaceModel m = conformal_bump(poincare_disk(0.5), 0.1, {0.0, 0.0}, 0.45);
    double kmax = -1e9;
    for (int i = 0; i <= 60; ++i)
        for (int j = 0; j <= 60; ++j) {
            const Vec2 p{-0.5 + i / 60.0, -0.5 + j / 60.0};
            if (norm(p) > 0.5) continue;
            kmax = std::max(kmax, gauss_curvature(m, p));
        }
    EXPECT_LT(kmax, -0.2);
}

TEST(Pullback, ChristoffelAndCurvature) {
    const SurfaceModel base = poincare_disk(0.5);
    const SurfaceModel m = pullback(base, test_swirl());
    for (Vec2 p : {Vec2{0.1, 0.05}, Vec2{-0.2, 0.15}, Vec2{0.0, -0.3}, Vec2{0.45, 0.0}}) {
        expect_christoffel_near(christoffel(m, p), fd_christoffel(m.metric(), p), 1e-7);
        EXPECT_NEAR(gauss_curvature(m, p), -1.0, 1e-10);
    }
    // identity near the boundary
    const SymMat2 a = metric_at(m, {0.48, 0.0}), b = metric_at(base, {0.48, 0.0});
    EXPECT_DOUBLE_EQ(a.g11, b.g11);
    EXPECT_DOUBLE_EQ(a.g12, b.g12);
}

TEST(Diffeo, InversesRoundTrip) {
    const SwirlDiffeo swirl(0.6, 0.4);
    const ShiftDiffeo shift(0.05, {0.1, 0.0}, 0.3, {1.0, 0.5});
    for (Vec2 p : {Vec2{0.1, 0.05}, Vec2{-0.2, 0.15}, Vec2{0.0, -0.3}, Vec2{0.45, 0.0}}) {
        const Vec2 a = swirl.inverse(swirl.map(p));
        EXPECT_NEAR(a.x, p.x, 1e-14);
        EXPECT_NEAR(a.y, p.y, 1e-14);
        const Vec2 b = shift.inverse(shift.map(p));
        EXPECT_NEAR(b.x, p.x, 1e-14);
        EXPECT_NEAR(b.y, p.y, 1e-14);
    }
    EXPECT_THROW(ShiftDiffeo(1.0, {0, 0}, 0.3, {1, 0}), DomainError);
}

TEST(Rotate, Basics) {
    const SurfaceModel e = euclidean_disk();
    const Vec2 r = rotate(e, {0, 0}, {1, 0}, kPi / 2);
    EXPECT_NEAR(r.x, 0.0, 1e-15);
    EXPECT_NEAR(r.y, 1.0, 1e-15);
    EXPECT_THROW(rotate(e, {0, 0}, {1.1, 0}, 0.3), NotUnit);

    const SurfaceModel m = pullback(poincare_disk(0.5), test_swirl());
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.3, 0.3), a(0.0, kPi);
    for (int s = 0; s < 50; ++s) {
        const Vec2 p{u(rng), u(rng)};
        const SymMat2 g = metric_at(m, p);
        const Vec2 w = g_normalize(g, {u(rng) + 0.5, u(rng)});
        const double th = a(rng);
        const Vec2 same = rotate(m, p, w, 0.0);
        EXPECT_NEAR(same.x, w.x, 1e-15);
        EXPECT_NEAR(same.y, w.y, 1e-15);
        const Vec2 once = rotate(m, p, w, th);
        const Vec2 twice = rotate(m, p, rotate(m, p, w, th / 2), th / 2);
        EXPECT_NEAR(once.x, twice.x, 1e-12);
        EXPECT_NEAR(once.y, twice.y, 1e-12);
        EXPECT_NEAR(g.norm(once), 1.0, 1e-8);
        EXPECT_NEAR(g_oriented_angle(g, w, once), th, 1e-12);
        const Vec2 back = rotate(m, p, rotate(m, p, w, kPi), kPi);
        EXPECT_NEAR(g_oriented_angle(g, w, back), 0.0, 1e-12);
    }
}

TEST(Boundary, ConvexityOfCatalog) {
    EXPECT_NEAR(boundary_convexity_check(euclidean_disk(), 64), 1.0, 1e-14);
    EXPECT_NEAR(boundary_convexity_check(poincare_disk(0.5), 64), 1.25, 1e-12);
    EXPECT_NEAR(boundary_convexity_check(hyperbolic_cylinder(1.0, 2.0), 64), std::tanh(1.0), 1e-12);
    EXPECT_NEAR(boundary_convexity_check(flat_cylinder(1.0, 2.0), 16), 0.0, 1e-14);
    EXPECT_LT(boundary_convexity_check(round_sphere(3.0), 16), 0.0);
    EXPECT_THROW(boundary_convexity_check(euclidean_disk(), 4), DomainError);
}

TEST(Boundary, FrameIsOrthonormalAndInward) {
    for (const SurfaceModel& m : {poincare_disk(0.5), hyperbolic_cylinder(1.0, 2.0),
                                  pullback(poincare_disk(0.5), test_swirl())}) {
        for (int c = 0; c < m.boundary_components(); ++c)
            for (int i = 0; i < 12; ++i) {
                const BoundaryData bd = boundary_data(m, {c, m.param_period() * i / 12.0});
                const SymMat2 g = m.metric().at(bd.point);
                EXPECT_NEAR(g.inner(bd.normal, bd.normal), 1.0, 1e-14);
                EXPECT_NEAR(g.inner(bd.tangent, bd.normal), 0.0, 1e-14);
                EXPECT_GT(m.boundary_function(bd.point + 1e-3 * bd.normal), 0.0);
            }
    }
}

TEST(Annulus, DeckInvariance) {
    const SurfaceModel m = hyperbolic_cylinder(1.0, 2.0);
    for (Vec2 p : {Vec2{0.1, 0.5}, Vec2{-3.0, -0.9}, Vec2{11.0, 0.0}}) {
        const SymMat2 a = metric_at(m, p), b = metric_at(m, m.deck(p, 1)), c = metric_at(m, m.deck(p, -3));
        EXPECT_EQ(a.g11, b.g11);
        EXPECT_EQ(a.g22, b.g22);
        EXPECT_EQ(a.g11, c.g11);
    }
    const BoundaryPoint b = m.deck(BoundaryPoint{1, 0.25}, 2);
    EXPECT_EQ(b.component, 1);
    EXPECT_DOUBLE_EQ(b.param, 4.25);
}
