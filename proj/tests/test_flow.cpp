#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "geolens/catalog.hpp"
#include "geolens/flow.hpp"

using namespace geolens;

namespace {

PhasePoint unit(const SurfaceModel& m, Vec2 p, Vec2 w) { return {p, g_normalize(m.metric().at(p), w)}; }

}  // namespace

TEST(FlowStep, StraightLineInFlatDisk) {
    const PhasePoint y = flow_step(euclidean_disk(), {{0, 0}, {1, 0}}, 0.5);
    EXPECT_NEAR(y.p.x, 0.5, 1e-14);
    EXPECT_NEAR(y.p.y, 0.0, 1e-14);
    EXPECT_NEAR(y.w.x, 1.0, 1e-14);
    EXPECT_THROW(flow_step(euclidean_disk(), {{0, 0}, {1, 0}}, 1.5), LeftDomain);
    try {
        flow_step(euclidean_disk(), {{0, 0}, {1, 0}}, 1.5);
    } catch (const LeftDomain& e) {
        EXPECT_NEAR(e.t_exit(), 1.0, 1e-10);
    }
    EXPECT_THROW(flow_step(euclidean_disk(), {{0, 0}, {1.5, 0}}, 0.2), NotUnit);
}

TEST(FlowStep, PoincareDiameterChartSpeed) {
    const SurfaceModel m = poincare_disk(0.5);
    const PhasePoint y0 = unit(m, {0, 0}, {1, 1});
    EXPECT_NEAR(norm(y0.w), 0.5, 1e-15);
    const PhasePoint y = flow_step(m, y0, 0.6);
    EXPECT_NEAR(y.p.x, y.p.y, 1e-10);
    // hyperbolic distance t from the origin is Euclidean radius tanh(t/2)
    EXPECT_NEAR(norm(y.p), std::tanh(0.3), 1e-9);
}

TEST(FlowStep, WaistIsInvariant) {
    const SurfaceModel m = hyperbolic_cylinder(1.0, 2.0);
    const PhasePoint y = flow_step(m, {{0.3, 0.0}, {1.0, 0.0}}, 17.0);
    EXPECT_EQ(y.p.y, 0.0);
    EXPECT_NEAR(y.p.x, 17.3, 1e-8);
}

TEST(FlowStep, ReversibilityAndGroupProperty) {
    const SurfaceModel m = pullback(poincare_disk(0.5), std::make_shared<SwirlDiffeo>(0.6, 0.4));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.15, 0.15), a(0.0, 2 * kPi);
    for (int s = 0; s < 10; ++s) {
        const double ang = a(rng);
        const PhasePoint y = unit(m, {u(rng), u(rng)}, {std::cos(ang), std::sin(ang)});
        const PhasePoint z = flow_step(m, y, 0.4);
        const PhasePoint back = flow_step(m, reversed(z), 0.4);
        EXPECT_NEAR(back.p.x, y.p.x, 1e-6);
        EXPECT_NEAR(back.p.y, y.p.y, 1e-6);
        EXPECT_NEAR(back.w.x, -y.w.x, 1e-6);
        EXPECT_NEAR(back.w.y, -y.w.y, 1e-6);
        const PhasePoint two = flow_step(m, flow_step(m, y, 0.15), 0.25);
        EXPECT_NEAR(two.p.x, z.p.x, 1e-8);
        EXPECT_NEAR(two.p.y, z.p.y, 1e-8);
    }
}

TEST(FlowStep, UnitNormDriftIsSmall) {
    // a long orbit on the waist neighbourhood, norm checked before the
    // renormalization of the returned vector
    const SurfaceModel m = hyperbolic_cylinder(1.0, 2.0);
    const PhasePoint y0 = unit(m, {0.0, 0.0}, {1.0, 1e-4});
    EscapeResult r = escape(m, y0, 100.0, {.record_trajectory = true});
    ASSERT_TRUE(r.trajectory.has_value());
    double drift = 0.0;
    for (const auto& [t, y] : r.trajectory->samples(3)) drift = std::max(drift, std::abs(m.metric().at(y.p).norm(y.w) - 1.0));
    EXPECT_LT(drift, 1e-8);
}

TEST(Escape, ChordsOfTheUnitDisk) {
    const SurfaceModel m = euclidean_disk();
    const EscapeResult d = escape(m, {{1, 0}, {-1, 0}}, 10.0);
    EXPECT_EQ(d.status, EscapeStatus::Exited);
    EXPECT_NEAR(d.time, 2.0, 1e-10);
    EXPECT_NEAR(d.exit.p.x, -1.0, 1e-10);
    EXPECT_NEAR(d.exit.w.x, -1.0, 1e-10);

    // angle pi/3 from the inward normal
    const double th = kPi / 3;
    const EscapeResult r = escape(m, {{1, 0}, {-std::cos(th), std::sin(th)}}, 10.0);
    EXPECT_NEAR(r.time, 1.0, 1e-10);
    EXPECT_NEAR(r.exit.p.x, 0.5, 1e-10);
    EXPECT_NEAR(r.exit.p.y, std::sqrt(3.0) / 2, 1e-10);
    EXPECT_NEAR(r.exit_param.param, kPi / 3, 1e-10);
    EXPECT_NEAR(r.exit_angle, kPi / 2 - th, 1e-10);
    EXPECT_LT(m.metric().at(r.exit.p).inner(r.exit.w, boundary_data(m, r.exit_param).normal), 0.0);
}

TEST(Escape, TrappedOnWaist) {
    const SurfaceModel m = hyperbolic_cylinder(1.0, 2.0);
    const EscapeResult r = escape(m, {{0, 0}, {1, 0}}, 50.0);
    EXPECT_EQ(r.status, EscapeStatus::Trapped);
    EXPECT_EQ(r.time, 50.0);
}

TEST(Escape, GrazingAndOutgoingStarts) {
    const SurfaceModel m = euclidean_disk();
    EXPECT_EQ(escape(m, {{1, 0}, {0, 1}}, 5.0).status, EscapeStatus::Tangential);
    const EscapeResult out = escape(m, {{1, 0}, {1, 0}}, 5.0);
    EXPECT_EQ(out.status, EscapeStatus::Exited);
    EXPECT_EQ(out.time, 0.0);
    // a very shallow chord is still resolved
    const double th = 1e-3;
    const EscapeResult r = escape(m, boundary_vector(m, {0, 0.0}, th), 5.0);
    EXPECT_NEAR(r.time, 2 * std::sin(th), 1e-10);
    EXPECT_THROW(escape(m, {{1.1, 0}, {-1, 0}}, 5.0), DomainError);
}

TEST(Escape, ExitTimeSymmetry) {
    // at the default tolerances the integration error (~rtol) dominates; one
    // decade tighter the symmetry holds to the event tolerance
    const SurfaceModel m = conformal_bump(poincare_disk(0.5), 0.1, {0.0, 0.0}, 0.45);
    FlowOptions tight;
    tight.rtol = 1e-10;
    tight.atol = 1e-12;
    for (const auto& [opt, tol] : {std::pair{FlowOptions{}, 5e-9}, std::pair{tight, 1e-10}}) {
        for (double s : {0.3, 1.7, 4.0}) {
            for (double th : {0.2, 1.0, 2.5}) {
                const EscapeResult r = scattering(m, boundary_vector(m, {0, s}, th), -1.0, opt);
                ASSERT_EQ(r.status, EscapeStatus::Exited);
                const EscapeResult back = scattering(m, reversed(r.exit), -1.0, opt);
                EXPECT_NEAR(back.time, r.time, tol);
                EXPECT_NEAR(wrap_pi(back.exit_param.param - s), 0.0, 10 * tol);
                EXPECT_NEAR(boundary_angle(m, {0, s}, -back.exit.w), th, 10 * tol);
            }
        }
    }
}

TEST(Scattering, DeckEquivarianceOnAnnulus) {
    const SurfaceModel m = hyperbolic_cylinder(1.0, 2.0);
    for (double s : {0.1, 0.9}) {
        for (double th : {0.4, 1.3, 2.2}) {
            for (int c : {0, 1}) {
                const EscapeResult a = scattering(m, boundary_vector(m, {c, s}, th), 40.0);
                const EscapeResult b = scattering(m, boundary_vector(m, m.deck(BoundaryPoint{c, s}, 1), th), 40.0);
                ASSERT_EQ(a.status, b.status);
                EXPECT_NEAR(b.exit.p.x - a.exit.p.x, 2.0, 1e-8);
                EXPECT_NEAR(b.exit.p.y, a.exit.p.y, 1e-12);
                EXPECT_NEAR(b.time, a.time, 1e-8);
            }
        }
    }
    EXPECT_THROW(scattering(m, {{0.0, 0.0}, {1, 0}}, 10.0), DomainError);
    EXPECT_THROW(scattering(m, boundary_vector(m, {0, 0.0}, -0.5), 10.0), DomainError);
}

TEST(Jacobi, ClosedFormSolutions) {
    const JacobiState flat = jacobi_evolve(euclidean_disk(), {{-0.5, 0}, {1, 0}}, {0, 1}, 0.8);
    EXPECT_NEAR(flat.J, 0.8, 1e-12);
    EXPECT_NEAR(flat.dJ, 1.0, 1e-12);
    const SurfaceModel cyl = hyperbolic_cylinder(1.0, 2.0);
    const JacobiState h = jacobi_evolve(cyl, {{0, 0}, {1, 0}}, {0, 1}, 1.0);
    EXPECT_NEAR(h.J, std::sinh(1.0), 1e-8);
    EXPECT_NEAR(h.dJ, std::cosh(1.0), 1e-8);
    EXPECT_NEAR(h.J, 1.1752, 1e-4);
    const SurfaceModel sphere = round_sphere(3.0);
    const JacobiState s = jacobi_evolve(sphere, unit(sphere, {1, 0}, {0, 1}), {0, 1}, kPi);
    EXPECT_NEAR(s.J, 0.0, 1e-8);
    EXPECT_NEAR(s.dJ, -1.0, 1e-8);
    EXPECT_THROW(jacobi_evolve(euclidean_disk(), {{0, 0}, {1, 0}}, {0, 1}, 3.0), LeftDomain);
}

TEST(ConjugateScan, ClosedForms) {
    EXPECT_FALSE(conjugate_scan(euclidean_disk(), {{-0.9, 0}, {1, 0}}, 5.0).has_value());
    const SurfaceModel cyl = hyperbolic_cylinder(1.0, 2.0);
    EXPECT_FALSE(conjugate_scan(cyl, {{0, 0}, {1, 0}}, 30.0).has_value());
    const SurfaceModel sphere = round_sphere(3.0);
    const auto t = conjugate_scan(sphere, unit(sphere, {1, 0}, {0, 1}), 4.0);
    ASSERT_TRUE(t.has_value());
    EXPECT_NEAR(*t, kPi, 1e-6);
    // equator, traversed clockwise from another point
    const auto t2 = conjugate_scan(sphere, unit(sphere, {0.6, 0.8}, {0.8, -0.6}), 4.0);
    ASSERT_TRUE(t2.has_value());
    EXPECT_NEAR(*t2, kPi, 1e-6);
    EXPECT_FALSE(conjugate_scan(sphere, unit(sphere, {1, 0}, {0, 1}), 3.0).has_value());
}

TEST(Lyapunov, WaistRates) {
    const SurfaceModel cyl = hyperbolic_cylinder(1.0, 2.0);
    EXPECT_NEAR(lyapunov_estimate(cyl, {{0, 0}, {1, 0}}, 30.0), 1.0, 0.05);
    EXPECT_NEAR(lyapunov_estimate(cyl, {{0, 0}, {1, 0}}, 5.0, {1.0, -1.0}), -1.0, 1e-4);
    EXPECT_THROW(lyapunov_estimate(euclidean_disk(), {{0, 0}, {1, 0}}, 5.0), NotTrapped);
}

TEST(Cone, WaistExpansion) {
    const SurfaceModel cyl = hyperbolic_cylinder(1.0, 2.0);
    const ConeReport r = cone_expansion_check(cyl, {{0, 0}, {1, 0}}, 2.0, 0.5, 0.5);
    EXPECT_TRUE(r.contained);
    EXPECT_GE(r.min_factor, std::exp(2.0) * 0.5);
    EXPECT_NEAR(r.min_factor, std::exp(2.0) / std::sqrt(1.25), 1e-3);
    EXPECT_NEAR(r.unstable[0], r.unstable[1], 1e-6);
    EXPECT_NEAR(r.stable[0], -r.stable[1], 1e-6);
    const ConeReport z = cone_expansion_check(cyl, {{0, 0}, {1, 0}}, 0.0, 0.5, 0.5);
    EXPECT_TRUE(z.contained);
    EXPECT_NEAR(z.min_factor, 1.0, 1e-12);
    EXPECT_THROW(cone_expansion_check(euclidean_disk(), {{0, 0}, {1, 0}}, 1.0, 0.5, 0.5), NotTrapped);
}

TEST(Cone, FlatCylinderIsNotHyperbolic) {
    const SurfaceModel flat = flat_cylinder(1.0, 2.0);
    const ConeReport r = cone_expansion_check(flat, {{0, 0}, {1, 0}}, 2.0, 0.5, 0.25);
    EXPECT_FALSE(r.contained);
    EXPECT_LT(r.min_factor, 1.5);
    EXPECT_GT(r.min_factor, 0.5);
}

TEST(TrappedFraction, Catalog) {
    EXPECT_EQ(trapped_fraction(euclidean_disk(), 16, 64, 10.0), 0.0);
    EXPECT_EQ(trapped_fraction(poincare_disk(0.5), 16, 64, 10.0), 0.0);
    const auto f = trapped_fraction_curve(hyperbolic_cylinder(1.0, 2.0), 1, 4096, {2.0, 4.0, 6.0});
    EXPECT_GT(f[0], f[1]);
    EXPECT_GT(f[1], f[2]);
    EXPECT_GT(f[2], 0.0);
}

TEST(Export, TrajectoryCsvAndJson) {
    FlowOptions o;
    o.record_trajectory = true;
    const EscapeResult r = escape(euclidean_disk(), {{1, 0}, {-1, 0}}, 10.0, o);
    std::ostringstream os;
    write_trajectory_csv(os, *r.trajectory, 2);
    EXPECT_EQ(os.str().rfind("t,u,v,wu,wv\n", 0), 0u);
    const std::string line = escape_json_line(r);
    EXPECT_NE(line.find("\"status\":\"exited\""), std::string::npos);
    EXPECT_NE(line.find("\"time\":2"), std::string::npos);
}
