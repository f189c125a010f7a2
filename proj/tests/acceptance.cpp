// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: geolens_acceptance [criterion ...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "geolens/catalog.hpp"
#include "geolens/flow.hpp"
#include "geolens/lens.hpp"
#include "geolens/measure.hpp"
#include "geolens/rigidity.hpp"

using namespace geolens;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    double limit_s = 0.0;  // runtime limit, 0 = none
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double wrap(double a) {
    a = std::fmod(a, 2.0 * kPi);
    return a < 0.0 ? a + 2.0 * kPi : a;
}

double angle_gap(double a, double b) {
    const double d = wrap(a - b);
    return std::min(d, 2.0 * kPi - d);
}

double poincare_distance(Vec2 p, Vec2 q) {
    const double d2 = dot(p - q, p - q);
    return std::acosh(1.0 + 2.0 * d2 / ((1.0 - dot(p, p)) * (1.0 - dot(q, q))));
}

SurfaceModel swirled_poincare() { return pullback(poincare_disk(0.5), std::make_shared<SwirlDiffeo>(0.6, 0.4)); }

// 1. Straight chords of the unit disk.
Outcome chord_oracle() {
    const SurfaceModel m = euclidean_disk();
    double err_len = 0.0, err_exit = 0.0, err_dir = 0.0;
    int rows = 0;
    for (int i = 0; i < 16; ++i) {
        const double s = 2.0 * kPi * (i + 0.25) / 16;
        const Vec2 x{std::cos(s), std::sin(s)};
        for (int j = 0; j < 16; ++j) {
            const double theta = kPi * (j + 0.5) / 16;
            const Vec2 w{std::cos(s + 0.5 * kPi + theta), std::sin(s + 0.5 * kPi + theta)};
            const double ell = 2.0 * std::sin(theta);
            const Vec2 end = x + ell * w;
            const EscapeResult r = escape(m, boundary_vector(m, {0, s}, theta), 10.0);
            const EscapeResult sc = scattering(m, boundary_vector(m, {0, s}, theta), 10.0);
            if (!r.exited() || !sc.exited()) return {false, "chord did not exit"};
            err_len = std::max(err_len, std::abs(r.time - ell));
            err_exit = std::max({err_exit, norm(r.exit.p - end), angle_gap(r.exit_param.param, s + 2.0 * theta)});
            err_dir = std::max(err_dir, norm(sc.exit.w - w));
            ++rows;
        }
    }
    const double worst = std::max({err_len, err_exit, err_dir});
    return {worst < 1e-8,
            fmt("%d rows, max |ell-2sin| %.2e, exit point %.2e, exit direction %.2e (tol 1e-8)", rows, err_len,
                err_exit, err_dir),
            5.0};
}

// 2. Lens-side volume of SM.
Outcome volume_identity() {
    const double e_exact = 2.0 * kPi * kPi;
    const double p_exact = 2.0 * kPi * 2.0 * kPi * (std::cosh(std::log(3.0)) - 1.0);
    const auto t0 = std::chrono::steady_clock::now();
    const VolumeReport e = volume_via_lens(euclidean_disk(), make_fan_grid(euclidean_disk(), 128, 64));
    const double te = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const SurfaceModel p = poincare_disk(0.5);
    const VolumeReport h = volume_via_lens(p, make_fan_grid(p, 128, 64));
    const double th = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() - te;
    const double re = std::abs(e.lens_value - e_exact) / e_exact, rh = std::abs(h.lens_value - p_exact) / p_exact;
    return {re < 1e-3 && rh < 1e-3 && te < 60.0 && th < 60.0,
            fmt("disk rel %.2e (%.1fs), Poincare rel %.2e (%.1fs) (tol 1e-3, 60s each)", re, te, rh, th)};
}

// 3. eta(F(x, x')) = 2 d(x, x').
Outcome intersection_identity() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0.0, 2.0 * kPi);
    double disk_worst = 0.0;
    int n_disk = 0;
    for (const SurfaceModel& m : {euclidean_disk(), poincare_disk(0.5)}) {
        for (int i = 0; i < 20; ++i) {
            const double a = U(rng);
            double b = U(rng);
            if (angle_gap(a, b) < 0.2) b = a + kPi;
            const IntersectionReport r = intersection_number(m, boundary_distance(m, {0, a}, {0, b}, {}));
            disk_worst = std::max(disk_worst, r.defect / r.twice_length);
            ++n_disk;
        }
    }
    const SurfaceModel c = hyperbolic_cylinder();
    std::uniform_real_distribution<double> P(0.0, c.param_period());
    double ann_worst = 0.0;
    for (int i = 0; i < 6; ++i) {
        const int winding = i % 3 - 1;
        const IntersectionReport r =
            intersection_number(c, boundary_distance(c, {0, P(rng)}, {1, P(rng)}, {winding}), 5);
        ann_worst = std::max(ann_worst, r.defect / r.twice_length);
    }
    return {disk_worst < 1e-2 && ann_worst < 2e-2,
            fmt("%d disk pairs max rel %.2e (tol 1e-2); 6 annulus pairs, n_max 5, max rel %.2e (tol 2e-2)", n_disk,
                disk_worst, ann_worst)};
}

// 4. Fan-chart box densities.
Outcome fan_chart() {
    bool ok = true;
    std::ostringstream os;
    for (const SurfaceModel& m : {euclidean_disk(), poincare_disk(0.5)}) {
        const GeodesicRecord g = boundary_distance(m, {0, 0.0}, {0, 2.4}, {});
        const FanChartReport c4 = fan_chart_check(m, g, 8, 8, 4);
        const FanChartReport c8 = fan_chart_check(m, g, 8, 8, 8);
        // the defect is the L1 box mismatch over the total; the worst single box is reported too
        const bool pass = c4.l1_defect < 2e-2 && c4.invalid == 0 && c8.l1_defect < 0.5 * c4.l1_defect &&
                          c8.max_defect < 0.5 * c4.max_defect;
        ok = ok && pass;
        os << m.name() << fmt(": 8x8 defect %.2e (worst box %.2e), doubled edge quadrature %.2e (worst box %.2e); ",
                              c4.l1_defect, c4.max_defect, c8.l1_defect, c8.max_defect);
    }
    return {ok, os.str() + "(tol 2e-2, ratio < 0.5)"};
}

// 5. Four-corner and dyadic reconstruction.
Outcome douady() {
    bool ok = true;
    std::ostringstream os;
    for (const SurfaceModel& m : {euclidean_disk(), poincare_disk(0.5)}) {
        const DouadyReport d = douady_reconstruct(m, {0, 0.0}, {0, 0.5 * kPi}, {0, 2.0}, {0, 4.0});
        const DyadicReport y = dyadic_reconstruct(m, {0, 0.3}, {0, 0.3 + 0.5 * kPi}, 6);
        bool monotone = true;
        for (std::size_t k = 1; k < y.by_depth.size(); ++k) monotone = monotone && y.by_depth[k] >= y.by_depth[k - 1];
        const double rd = d.defect / d.direct, ry = std::abs(y.by_depth.back() - y.direct) / y.direct;
        ok = ok && rd < 1e-2 && ry < 2e-2 && monotone;
        os << m.name()
           << fmt(": four-corner rel %.2e, dyadic depth 6 rel %.2e %s; ", rd, ry, monotone ? "monotone" : "NOT monotone");
    }
    return {ok, os.str() + "(tol 1e-2 / 2e-2)"};
}

// 6. Conjugate points.
Outcome conjugate_points() {
    int found = 0, orbits = 0;
    for (const SurfaceModel& m : {euclidean_disk(), flat_cylinder(), poincare_disk(0.5), hyperbolic_cylinder()}) {
        const auto samples = liouville_samples(m, {1000, 6, 0.0});
        const double T = 5.0 * m.diameter();
        for (const auto& s : samples) {
            if (conjugate_scan(m, s.y, T)) ++found;
            ++orbits;
        }
    }
    const SurfaceModel sphere = round_sphere(3.0);
    double worst = 0.0;
    bool all_found = true;
    for (int k = 0; k < 8; ++k) {
        const double a = 2.0 * kPi * k / 8;
        // great circles through the equator tilted by less than 53 degrees stay inside the cap
        const Vec2 p{std::cos(a), std::sin(a)};
        const double tilt = 0.6 * (k % 3 - 1);
        const Vec2 w = g_normalize(sphere.metric().at(p), {-std::sin(a + tilt), std::cos(a + tilt)});
        const auto t = conjugate_scan(sphere, {p, w}, 4.0);
        if (!t) {
            all_found = false;
            continue;
        }
        worst = std::max(worst, std::abs(*t - kPi));
    }
    return {found == 0 && all_found && worst < 1e-4,
            fmt("%d/%d flat and K=-1 orbits with a conjugate point; K=+1 max |t*-pi| %.2e over 8 orbits (tol 1e-4)",
                found, orbits, worst)};
}

// 7. Hyperbolic trapped set of the hyperbolic cylinder.
Outcome hyperbolic_trapped_set() {
    const SurfaceModel c = hyperbolic_cylinder();
    const PhasePoint waist{{0.0, 0.0}, {1.0, 0.0}};
    const double lyap = lyapunov_estimate(c, waist, 30.0);
    const ConeReport cone = cone_expansion_check(c, waist, 2.0, 0.5, 0.5);
    // the metric does not depend on u, so one boundary node per component suffices
    const auto f = trapped_fraction_curve(c, 1, 200000, {10.0, 40.0});
    const bool pass = std::abs(lyap - 1.0) <= 0.05 && cone.contained && cone.min_factor >= 3.5 && f[0] > 0.0 &&
                      f[1] <= 0.1 * f[0];
    return {pass, fmt("lyapunov %.4f (1 +- 0.05); cone %s factor %.3f (>= 3.5); trapped fraction T=10 %.3e, "
                      "T=40 %.3e (>= 10x drop)",
                      lyap, cone.contained ? "contained" : "NOT contained", cone.min_factor, f[0], f[1])};
}

// 8. Rigid pair g2 = psi^* g1.
Outcome rigid_pair() {
    const auto psi = std::make_shared<SwirlDiffeo>(0.6, 0.4);
    const MetricPair pair = pullback_pair(poincare_disk(0.5), psi);
    std::vector<double> thetas;
    for (int k = 0; k <= 10; ++k) thetas.push_back(kPi * k / 10);
    const auto curve = theta_curve(pair, thetas, {10000, 8, 0.0});
    double max_z = 0.0, max_dev = 0.0, max_invalid = 0.0;
    for (const auto& e : curve) {
        max_dev = std::max(max_dev, std::abs(e.Theta - e.theta));
        max_z = std::max(max_z, std::abs(e.Theta - e.theta) / e.std_error);
        max_invalid = std::max(max_invalid, e.invalid_mass);
    }
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto point = [&](double rmax) {
        const double r = rmax * std::sqrt(U(rng)), a = 2.0 * kPi * U(rng);
        return Vec2{r * std::cos(a), r * std::sin(a)};
    };
    double psi_err = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Vec2 x = point(0.35);
        psi_err = std::max(psi_err, norm(psi_reconstruct(pair, x).psi - psi->inverse(x)));
    }
    std::vector<std::pair<Vec2, Vec2>> pts;
    for (int i = 0; i < 10; ++i) pts.emplace_back(point(0.35), point(0.35));
    const CertificateReport cert = isometry_certificate(pair, pts);
    const double cert_max = std::max({cert.max_distance_defect, cert.boundary_drift, cert.max_spread});
    return {max_z <= 2.0 && max_invalid < 1e-2 && psi_err < 1e-4 && cert_max < 1e-3,
            fmt("Theta-theta max %.2e = %.2f stderr (<= 2), invalid mass %.2e (< 1e-2), 10^4 samples x 11 angles; "
                "psi error %.2e at 50 points (tol 1e-4); certificate max %.2e (tol 1e-3)",
                max_dev, max_z, max_invalid, psi_err, cert_max),
            600.0};
}

// 9. Conformal bump with max omega = 0.1 is detected.
Outcome non_rigid_detection() {
    const SurfaceModel base = poincare_disk(0.5);
    const Vec2 center{0.03, 0.0};
    const auto bump = std::make_shared<BumpField>(0.1, center, 0.45);
    const MetricPair cf = conformal_pair(base, bump);
    // marked distance: solver error on g1 against the closed form sets the floor
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(0.0, 2.0 * kPi);
    double solver_err = 0.0, discrepancy = 0.0;
    for (int i = 0; i < 12; ++i) {
        const double a = U(rng), b = a + kPi + 0.6 * (U(rng) / kPi - 1.0);
        const GeodesicRecord g1 = boundary_distance(cf.g1, {0, a}, {0, b}, {});
        const GeodesicRecord g2 = boundary_distance(cf.g2, {0, a}, {0, b}, {});
        const double exact = poincare_distance(base.boundary_point({0, a}), base.boundary_point({0, b}));
        solver_err = std::max(solver_err, std::abs(g1.length - exact));
        discrepancy = std::max(discrepancy, std::abs(g2.length - g1.length));
    }
    const JensenReport jr = jensen_gap(cf, 0.5 * kPi, convex_function("square"), {4000, 12, 0.0});
    double min_spread = INFINITY, rigid_spread = 0.0;
    const MetricPair id = identical_pair(base);
    for (int k = 0; k < 6; ++k) {
        const double a = 2.0 * kPi * (k + 0.5) / 6;
        const Vec2 x = center + 0.15 * Vec2{std::cos(a), std::sin(a)};
        min_spread = std::min(min_spread, psi_reconstruct(cf, x).spread);
        rigid_spread = std::max(rigid_spread, psi_reconstruct(id, x).spread);
    }
    const bool pass = discrepancy > 100.0 * solver_err && discrepancy > 1e-6 && jr.gap > 3.0 * jr.std_error &&
                      min_spread > 100.0 * rigid_spread && min_spread > 1e-5;
    return {pass, fmt("distance discrepancy %.2e vs solver error %.2e; Jensen gap %.3e = %.1f stderr (> 3); "
                      "psi spread inside bump >= %.2e vs rigid %.2e",
                      discrepancy, solver_err, jr.gap, jr.gap / jr.std_error, min_spread, rigid_spread)};
}

// 10. Solved geodesics are local minima in their class.
Outcome perturbation_margin() {
    double worst = INFINITY;
    int perturbations = 0;
    const SurfaceModel s = swirled_poincare();
    const SurfaceModel c = hyperbolic_cylinder();
    const std::vector<std::pair<const SurfaceModel*, GeodesicRecord>> cases = {
        {&s, boundary_distance(s, {0, 0.1}, {0, 2.5}, {})},
        {&s, boundary_distance(s, {0, 4.0}, {0, 5.5}, {})},
        {&c, boundary_distance(c, {0, 0.2}, {1, 0.9}, {1})},
        {&c, interior_distance(c, {0.1, 0.2}, {0.1, 0.2}, {1})},
    };
    unsigned long long seed = 10;
    for (const auto& [m, g] : cases) {
        worst = std::min(worst, homotopic_perturbation_margin(*m, g, 25, 0.02, seed++));
        perturbations += 25;
    }
    return {worst > 1e-8, fmt("%d perturbations, min length gain %.3e (> 1e-8)", perturbations, worst)};
}

// 11. Shooting and curve shortening agree.
Outcome cross_solver() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const std::vector<SurfaceModel> models = {euclidean_disk(), poincare_disk(0.5), swirled_poincare(),
                                              hyperbolic_cylinder(), hyperbolic_cylinder(0.8, 3.0)};
    double worst = 0.0;
    int problems = 0, failures = 0;
    for (const SurfaceModel& m : models) {
        for (int i = 0; i < 20; ++i) {
            BoundaryPoint a{0, m.param_period() * U(rng)}, b{0, m.param_period() * U(rng)};
            HomotopyClass cls{};
            if (m.is_annulus()) {
                b.component = 1;
                cls.winding = static_cast<int>(3.0 * U(rng)) - 1;
            } else if (angle_gap(a.param, b.param) < 0.2) {
                b.param = a.param + kPi;
            }
            ShootingOptions so;
            so.fallback = false;
            ++problems;
            try {
                const GeodesicRecord shot = shoot_boundary_geodesic(m, a, b, cls, so);
                const GeodesicRecord bent = curve_shorten(
                    m, BrokenGeodesic{{m.boundary_point(a), m.boundary_point(m.deck(b, cls.winding))}});
                worst = std::max(worst, std::abs(bent.length - shot.length) / shot.length);
            } catch (const Error&) {
                ++failures;
            }
        }
    }
    return {failures == 0 && worst < 1e-6,
            fmt("%d problems on %zu models, %d solver failures, max rel difference %.2e (tol 1e-6)", problems,
                models.size(), failures, worst)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, chord_oracle},       {2, volume_identity},     {3, intersection_identity}, {4, fan_chart},
        {5, douady},             {6, conjugate_points},    {7, hyperbolic_trapped_set}, {8, rigid_pair},
        {9, non_rigid_detection}, {10, perturbation_margin}, {11, cross_solver}};
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& [id, run] : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), id) == wanted.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.limit_s > 0.0 && dt > o.limit_s) {
            o.pass = false;
            o.detail += fmt("; runtime %.1fs exceeds %.0fs", dt, o.limit_s);
        }
        if (!o.pass) ++failed;
        std::printf("criterion %2d: %s  %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), dt);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
