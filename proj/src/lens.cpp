#include "geolens/lens.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "geolens/parallel.hpp"

namespace geolens {

namespace {

double boundary_slack(const SurfaceModel& model) { return 1e-9 * model.chart_diameter(); }

// Orientation of the boundary parameter relative to +u on the strip.
double strip_sign(int component) { return component == 0 ? 1.0 : -1.0; }

// Position of an exit on the circle of ends of the cover, seen from the start
// a. Increases strictly with the entry angle.
struct ShotTarget {
    const SurfaceModel* model;
    BoundaryPoint a;
    BoundaryPoint t;  // lifted target
    double key_t = 0.0;

    double key(const EscapeResult& r, double theta) const {
        const bool near_start = r.time == 0.0;
        if (!model->is_annulus()) {
            if (r.status == EscapeStatus::Trapped) return kPi;
            if (near_start) return theta < 0.5 * kPi ? 0.0 : 2.0 * kPi;
            return wrap_two_pi(r.exit_param.param - a.param);
        }
        const double sa = strip_sign(a.component);
        if (r.status == EscapeStatus::Trapped) return sa * r.exit.w.x > 0.0 ? 0.5 * kPi : 1.5 * kPi;
        if (near_start) return theta < 0.5 * kPi ? 0.0 : 2.0 * kPi;
        const double du = r.exit_param.param - a.param;
        if (r.exit_param.component == a.component) return wrap_two_pi(std::atan(sa * du));
        return kPi + std::atan(-sa * du);
    }

    // Signed exit-parameter mismatch when r exits on the target component.
    std::optional<double> param_residual(const EscapeResult& r, double theta) const {
        if (r.status == EscapeStatus::Trapped) return std::nullopt;
        if (!model->is_annulus()) return key(r, theta) - key_t;
        if (r.exit_param.component != t.component || r.time == 0.0) return std::nullopt;
        const double sa = strip_sign(a.component);
        const double d = r.exit_param.param - t.param;
        return t.component == a.component ? sa * d : -sa * d;
    }
};

double target_key(const SurfaceModel& model, BoundaryPoint a, BoundaryPoint t) {
    if (!model.is_annulus()) return wrap_two_pi(t.param - a.param);
    const double sa = strip_sign(a.component);
    const double du = t.param - a.param;
    if (t.component == a.component) return wrap_two_pi(std::atan(sa * du));
    return kPi + std::atan(-sa * du);
}

struct Shot {
    double theta = 0.0;
    EscapeResult r;
    double key_res = 0.0;
    std::optional<double> param_res;
};

std::vector<double> running_lengths(const std::vector<double>& seg) {
    std::vector<double> out(seg.size() + 1, 0.0);
    for (std::size_t i = 0; i < seg.size(); ++i) out[i + 1] = out[i] + seg[i];
    return out;
}

// Unit-speed Hermite interpolation of a sampled geodesic: position and
// chart velocity.
PhasePoint hermite(const std::vector<double>& times, const std::vector<PhasePoint>& s, double t) {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t i = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    i = std::min(i, times.size() - 2);
    const double h = times[i + 1] - times[i];
    if (h <= 0.0) return s[i];
    const double x = (t - times[i]) / h;
    const double h00 = (1 + 2 * x) * (1 - x) * (1 - x), h10 = x * (1 - x) * (1 - x);
    const double h01 = x * x * (3 - 2 * x), h11 = x * x * (x - 1);
    const double d00 = 6 * x * (x - 1), d10 = (1 - x) * (1 - 3 * x);
    const double d01 = -d00, d11 = x * (3 * x - 2);
    const Vec2 p = h00 * s[i].p + (h10 * h) * s[i].w + h01 * s[i + 1].p + (h11 * h) * s[i + 1].w;
    const Vec2 v = (d00 / h) * s[i].p + d10 * s[i].w + (d01 / h) * s[i + 1].p + d11 * s[i + 1].w;
    return {p, v};
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<LensRow> shoot_table(const SurfaceModel& model, const std::vector<BoundaryPoint>& nodes,
                                 const std::vector<double>& thetas, double t_max, const FlowOptions& opt) {
    if (nodes.empty() || thetas.empty()) throw DomainError("shoot_table needs nonempty grids");
    for (double th : thetas)
        if (!(th > 0.0 && th < kPi)) throw DomainError("entry angles must lie in (0, pi)");
    std::vector<LensRow> rows(nodes.size() * thetas.size());
    FlowOptions o = opt;
    o.record_trajectory = false;
    parallel_for(rows.size(), [&](std::size_t k) {
        LensRow& row = rows[k];
        row.b = nodes[k / thetas.size()];
        row.theta = thetas[k % thetas.size()];
        const EscapeResult r = scattering(model, boundary_vector(model, row.b, row.theta), t_max, o);
        row.flag = r.status;
        row.ell = r.time;
        if (r.exited()) {
            row.exit = r.exit_param;
            row.theta_exit = r.exit_angle;
        }
    });
    return rows;
}

void write_lens_csv(std::ostream& os, const SurfaceModel& model, const std::vector<LensRow>& rows) {
    const auto old = os.precision(17);
    const bool annulus = model.is_annulus();
    os << "s,theta,ell,s_exit,theta_exit,flag";
    if (annulus) os << ",component,component_exit";
    os << '\n';
    for (const auto& r : rows) {
        const bool ex = r.flag != EscapeStatus::Trapped;
        os << r.b.param << ',' << r.theta << ',' << r.ell << ',';
        if (ex)
            os << r.exit.param << ',' << r.theta_exit;
        else
            os << "nan,nan";
        os << ',' << to_string(r.flag);
        if (annulus) {
            os << ',' << r.b.component << ',';
            if (ex) os << r.exit.component;
        }
        os << '\n';
    }
    os.precision(old);
}

BoundaryPoint lift_target(const SurfaceModel& model, BoundaryPoint b, HomotopyClass cls) {
    if (!model.is_annulus() && cls.winding != 0) throw DomainError("disk surfaces only have the trivial class");
    return model.deck(b, cls.winding);
}

GeodesicRecord shoot_boundary_geodesic(const SurfaceModel& model, BoundaryPoint a, BoundaryPoint b,
                                       HomotopyClass cls, const ShootingOptions& opt) {
    const BoundaryPoint t = lift_target(model, b, cls);
    if (a.component == t.component) {
        const double gap = model.is_annulus() ? std::abs(t.param - a.param)
                                              : std::abs(wrap_pi(t.param - a.param));
        if (gap < 1e-14) throw DomainError("boundary_distance needs distinct endpoints on the cover");
    }
    const double t_max = opt.t_max > 0.0 ? opt.t_max : default_horizon(model);
    FlowOptions fo = opt.flow;
    fo.record_trajectory = false;

    ShotTarget target{&model, a, t, target_key(model, a, t)};
    auto shoot = [&](double theta) {
        Shot s;
        s.theta = theta;
        s.r = escape(model, boundary_vector(model, a, theta), t_max, fo);
        s.key_res = target.key(s.r, theta) - target.key_t;
        s.param_res = target.param_residual(s.r, theta);
        return s;
    };
    // virtual ends of the fan: the tangent directions themselves
    Shot lo, hi;
    lo.theta = 0.0;
    lo.key_res = -target.key_t;
    lo.r.status = hi.r.status = EscapeStatus::Exited;
    hi.theta = kPi;
    hi.key_res = 2.0 * kPi - target.key_t;

    int evaluations = 0;
    if (opt.guess && *opt.guess > 0.0 && *opt.guess < kPi) {
        Shot g = shoot(*opt.guess);
        ++evaluations;
        if (g.key_res == 0.0) {
            lo = hi = g;
        } else {
            // expand away from the guess until the sign flips
            const bool below = g.key_res < 0.0;
            (below ? lo : hi) = g;
            double step = 1e-3;
            for (;;) {
                const double th = below ? g.theta + step : g.theta - step;
                if (th <= 0.0 || th >= kPi) break;
                Shot s = shoot(th);
                ++evaluations;
                if ((s.key_res < 0.0) == below) {
                    (below ? lo : hi) = s;
                    step *= 4.0;
                } else {
                    (below ? hi : lo) = s;
                    break;
                }
            }
        }
    } else {
        // the key is monotone in theta, so the grid cell holding the root is
        // found by bisection over the grid indices
        const int n = std::max(opt.grid, 2);
        int ilo = 0, ihi = n;
        while (ihi - ilo > 1) {
            const int mid = (ilo + ihi) / 2;
            Shot s = shoot(kPi * mid / n);
            ++evaluations;
            if (s.key_res < 0.0) {
                lo = s;
                ilo = mid;
            } else {
                hi = s;
                ihi = mid;
            }
        }
    }

    // Illinois refinement; the residual switches from the key to the exit
    // parameter once both ends exit on the target component.
    Shot best = std::abs(lo.key_res) < std::abs(hi.key_res) ? lo : hi;
    bool use_param = false;
    double wlo = 1.0, whi = 1.0;
    int side = 0;
    double width_prev = std::numeric_limits<double>::infinity(), width_prev2 = width_prev;
    auto res = [&](const Shot& s) { return use_param ? *s.param_res : s.key_res; };
    bool converged = lo.theta == hi.theta;
    for (int it = 0; !converged && it < opt.max_iterations; ++it) {
        if (!use_param && lo.param_res && hi.param_res) {
            use_param = true;
            wlo = whi = 1.0;
            side = 0;
        }
        const double flo = wlo * res(lo), fhi = whi * res(hi);
        const double width = hi.theta - lo.theta;
        double th = (lo.theta * fhi - hi.theta * flo) / (fhi - flo);
        if (!(th > lo.theta && th < hi.theta) || width > 0.5 * width_prev2) th = 0.5 * (lo.theta + hi.theta);
        width_prev2 = width_prev;
        width_prev = width;
        Shot s = shoot(th);
        ++evaluations;
        const double f = res(s);
        if (s.param_res && std::abs(*s.param_res) < (best.param_res ? std::abs(*best.param_res) : INFINITY))
            best = s;
        if (s.param_res && std::abs(*s.param_res) < opt.tol) {
            best = s;
            converged = true;
            break;
        }
        if (f < 0.0) {
            lo = s;
            wlo = 1.0;
            if (side == -1) whi *= 0.5;
            side = -1;
        } else {
            hi = s;
            whi = 1.0;
            if (side == 1) wlo *= 0.5;
            side = 1;
        }
        if (hi.theta - lo.theta < 1e-15) converged = true;
    }

    std::ostringstream where;
    where << "target (" << t.component << ", " << t.param << ") from (" << a.component << ", " << a.param
          << ") with winding " << cls.winding;
    if (!best.param_res || std::abs(*best.param_res) > 1e-7 * std::max(1.0, model.chart_diameter())) {
        const bool trapped_edge = lo.r.status == EscapeStatus::Trapped || hi.r.status == EscapeStatus::Trapped;
        std::ostringstream os;
        os << where.str() << ": ";
        if (trapped_edge) {
            os << "unreachable at horizon " << t_max << "; trapped wedge near theta in [" << lo.theta << ", "
               << hi.theta << "]";
            throw NoBracket(os.str());
        }
        os << "shooting stalled with bracket [" << lo.theta << ", " << hi.theta << "]";
        throw SolverDiverged(os.str());
    }

    FlowOptions rec = opt.flow;
    rec.record_trajectory = true;
    const PhasePoint y0 = boundary_vector(model, a, best.theta);
    EscapeResult fin = escape(model, y0, t_max, rec);
    GeodesicRecord g;
    g.start = y0.p;
    g.end = fin.exit.p;
    g.start_param = a;
    g.end_param = fin.exit_param;
    if (!model.is_annulus()) g.end_param->param = b.param;
    g.cls = cls;
    g.length = fin.time;
    g.solver = GeodesicSolver::Shooting;
    g.entry_angle = best.theta;
    g.residual = std::abs(*best.param_res);
    g.iterations = evaluations;
    for (const auto& [tt, y] : fin.trajectory->samples(4)) {
        g.times.push_back(tt);
        g.samples.push_back(y);
    }
    if (g.samples.empty()) {
        g.times = {0.0};
        g.samples = {y0};
    }
    g.trajectory = std::move(fin.trajectory);
    return g;
}

GeodesicRecord boundary_distance(const SurfaceModel& model, BoundaryPoint a, BoundaryPoint b, HomotopyClass cls,
                                 const ShootingOptions& opt) {
    try {
        return shoot_boundary_geodesic(model, a, b, cls, opt);
    } catch (const SolverDiverged&) {
        if (!opt.fallback) throw;
    }
    BrokenGeodesic init;
    init.nodes = {model.boundary_point(a), model.boundary_point(lift_target(model, b, cls))};
    GeodesicRecord g = curve_shorten(model, init);
    g.cls = cls;
    g.start_param = a;
    g.end_param = lift_target(model, b, cls);
    return g;
}

// ---------------------------------------------------------------------------

LocalGeodesic local_geodesic(const SurfaceModel& model, Vec2 x, Vec2 x2, std::optional<LocalGeodesic> guess,
                             const FlowOptions& opt) {
    const SymMat2 g0 = model.metric().at(x);
    const Vec2 chord = x2 - x;
    if (norm(chord) == 0.0) throw DomainError("local_geodesic needs distinct points");
    const Vec2 w0 = g_normalize(g0, chord);
    double phi = 0.0;
    double len = chart_segment_length(model.metric(), x, x2, 8);
    if (guess && guess->length > 0.0) {
        phi = g_oriented_angle(g0, w0, guess->w);
        len = guess->length;
    }
    const double scale = std::max(1.0, norm(chord));

    struct Eval {
        Vec2 r;
        Vec2 v;
        double J = 0.0;
        Vec2 nu;
        double err = INFINITY;
    };
    auto evaluate = [&](double ph, double L) {
        Eval e;
        const auto out = flow_with_jacobi_unbounded(model, {x, g_rotate(g0, w0, ph)}, {0.0, 1.0}, L, opt);
        const SymMat2 g1 = model.metric().at(out.y.p);
        e.r = out.y.p - x2;
        e.v = g_normalize(g1, out.y.w);
        e.nu = g_quarter_turn(g1, e.v);
        e.J = out.j.J;
        e.err = norm(e.r);
        if (!std::isfinite(e.err)) e.err = INFINITY;
        return e;
    };
    Eval cur = evaluate(phi, len);
    for (int it = 0; it < 60; ++it) {
        if (cur.err < 1e-13 * scale) return {g_rotate(g0, w0, phi), len};
        // columns d/dL = v, d/dphi = J nu
        const Vec2 c1 = cur.v, c2 = cur.J * cur.nu;
        const double det = cross(c1, c2);
        if (det == 0.0 || !std::isfinite(det)) break;
        const double dL = -cross(cur.r, c2) / det;
        const double dphi = -cross(c1, cur.r) / det;
        double lambda = 1.0;
        bool improved = false;
        for (int h = 0; h < 30; ++h, lambda *= 0.5) {
            const double L_new = len + lambda * dL;
            if (!(L_new > 0.0)) continue;
            Eval trial;
            try {
                trial = evaluate(phi + lambda * dphi, L_new);
            } catch (const Error&) {
                continue;
            }
            if (trial.err < cur.err) {
                phi += lambda * dphi;
                len = L_new;
                cur = trial;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    // adaptive steps make the endpoint map slightly rough, so Newton can
    // stagnate a little above round-off
    if (cur.err < 1e-9 * scale) return {g_rotate(g0, w0, phi), len};
    std::ostringstream os;
    os << "local two-point solve from (" << x.x << ", " << x.y << ") to (" << x2.x << ", " << x2.y
       << ") stalled at residual " << cur.err;
    throw SolverDiverged(os.str());
}

PhasePoint record_at(const SurfaceModel& model, const GeodesicRecord& record, double t) {
    if (record.trajectory) {
        const PhasePoint y = record.trajectory->at(t);
        return {y.p, g_normalize(model.metric().at(y.p), y.w)};
    }
    if (record.samples.size() < 2) throw DomainError("record has no samples");
    const PhasePoint y = hermite(record.times, record.samples, std::clamp(t, 0.0, record.times.back()));
    return {y.p, g_normalize(model.metric().at(y.p), y.w)};
}

double broken_energy(const std::vector<double>& segment_lengths) {
    double s = 0.0;
    for (double l : segment_lengths) s += l * l;
    return static_cast<double>(segment_lengths.size()) * s;
}

double polyline_length(const SurfaceModel& model, const std::vector<Vec2>& points) {
    double len = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) len += chart_segment_length(model.metric(), points[i], points[i + 1], 2);
    return len;
}

GeodesicRecord curve_shorten(const SurfaceModel& model, const BrokenGeodesic& initial, const ShorteningOptions& opt,
                             std::vector<double>* energies) {
    if (initial.nodes.size() < 2) throw DomainError("curve_shorten needs at least two nodes");
    const double slack = boundary_slack(model);
    for (const Vec2& p : initial.nodes)
        if (!model.contains(p, slack)) throw DomainError("curve_shorten nodes must lie in the closed domain");

    // subdivide the chart polyline so every piece is below the cap
    auto subdivide = [&](const std::vector<Vec2>& pts, double cap) {
        std::vector<Vec2> out{pts.front()};
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const double l = chart_segment_length(model.metric(), pts[i], pts[i + 1], 16);
            const int m = std::max(1, static_cast<int>(std::ceil(l / cap)));
            for (int j = 1; j <= m; ++j) out.push_back(pts[i] + (static_cast<double>(j) / m) * (pts[i + 1] - pts[i]));
        }
        // drop repeated nodes
        std::vector<Vec2> dedup{out.front()};
        for (std::size_t i = 1; i < out.size(); ++i)
            if (norm(out[i] - dedup.back()) > 0.0) dedup.push_back(out[i]);
        if (dedup.size() == 1) throw DomainError("curve_shorten needs distinct endpoints");
        return dedup;
    };

    double cap = opt.cap_fraction * model.diameter();
    std::vector<Vec2> nodes = initial.nodes;
    if (energies) energies->clear();
    int sweeps_total = 0;
    for (int attempt = 0; attempt < 8; ++attempt, cap *= 0.5) {
        nodes = subdivide(nodes, cap);
        // two-segment polylines still need an interior node
        if (nodes.size() == 2) nodes = {nodes[0], 0.5 * (nodes[0] + nodes[1]), nodes[1]};
        const std::size_t k = nodes.size() - 1;
        std::vector<double> seg(k);
        std::vector<std::optional<LocalGeodesic>> span(k + 1);  // geodesic between neighbours of node i
        try {
            for (std::size_t i = 0; i < k; ++i) seg[i] = local_geodesic(model, nodes[i], nodes[i + 1], {}, opt.flow).length;
            double energy = broken_energy(seg);
            if (energies && energies->empty()) energies->push_back(energy);
            bool done = false;
            for (int sweep = 0; sweep < opt.max_sweeps && !done; ++sweep, ++sweeps_total) {
                std::vector<Vec2> trial = nodes;
                std::vector<double> trial_seg = seg;
                auto trial_span = span;
                for (std::size_t parity = 0; parity < 2; ++parity)
                    for (std::size_t i = 1 + parity; i < k; i += 2) {
                        const LocalGeodesic lg = local_geodesic(model, trial[i - 1], trial[i + 1], trial_span[i], opt.flow);
                        trial_span[i] = lg;
                        const auto mid = flow_with_jacobi_unbounded(model, {trial[i - 1], lg.w}, {0.0, 1.0},
                                                                    0.5 * lg.length, opt.flow);
                        if (!model.contains(mid.y.p, slack)) {
                            std::ostringstream os;
                            os << "node moved to (" << mid.y.p.x << ", " << mid.y.p.y << ") outside " << model.name();
                            throw StalledAtBoundary(os.str());
                        }
                        trial[i] = mid.y.p;
                        trial_seg[i - 1] = trial_seg[i] = 0.5 * lg.length;
                    }
                const double e_new = broken_energy(trial_seg);
                if (e_new > energy) {
                    // an increase beyond solver noise means the cap is too coarse
                    if (e_new > energy * (1.0 + 1e-9)) throw SolverDiverged("energy increased");
                    done = true;
                    break;
                }
                const double decrease = (energy - e_new) / energy;
                nodes = std::move(trial);
                seg = std::move(trial_seg);
                span = std::move(trial_span);
                energy = e_new;
                if (energies) energies->push_back(energy);
                if (decrease < opt.energy_tol) done = true;
            }
            if (!done) throw SolverDiverged("curve shortening hit the sweep limit");

            // final segments, corner angles and samples
            GeodesicRecord g;
            g.solver = GeodesicSolver::Shortening;
            g.start = nodes.front();
            g.end = nodes.back();
            g.iterations = sweeps_total;
            std::vector<LocalGeodesic> fwd(k);
            for (std::size_t i = 0; i < k; ++i) {
                fwd[i] = local_geodesic(model, nodes[i], nodes[i + 1], {}, opt.flow);
                seg[i] = fwd[i].length;
            }
            double corner = 0.0;
            const int m = std::max(1, opt.samples_per_segment);
            const auto cum = running_lengths(seg);
            for (std::size_t i = 0; i < k; ++i) {
                for (int j = 0; j < m; ++j) {
                    const double tt = seg[i] * j / m;
                    PhasePoint y{nodes[i], fwd[i].w};
                    if (j > 0) {
                        const auto out = flow_with_jacobi_unbounded(model, y, {0.0, 1.0}, tt, opt.flow);
                        y = {out.y.p, g_normalize(model.metric().at(out.y.p), out.y.w)};
                    }
                    g.times.push_back(cum[i] + tt);
                    g.samples.push_back(y);
                }
                const auto end = flow_with_jacobi_unbounded(model, {nodes[i], fwd[i].w}, {0.0, 1.0}, seg[i], opt.flow);
                const SymMat2 ge = model.metric().at(nodes[i + 1]);
                const Vec2 w_in = g_normalize(ge, end.y.w);
                if (i + 1 < k) corner = std::max(corner, std::abs(g_oriented_angle(ge, w_in, fwd[i + 1].w)));
                if (i + 1 == k) {
                    g.times.push_back(cum[k]);
                    g.samples.push_back({nodes[k], w_in});
                }
            }
            g.length = cum[k];
            g.residual = corner;
            return g;
        } catch (const SolverDiverged&) {
            continue;
        }
    }
    throw SolverDiverged("curve shortening failed after repeated cap halving");
}

GeodesicRecord interior_distance(const SurfaceModel& model, Vec2 x, Vec2 x2, HomotopyClass cls,
                                 const ShorteningOptions& opt) {
    if (!model.is_annulus() && cls.winding != 0) throw DomainError("disk surfaces only have the trivial class");
    const Vec2 target = model.deck(x2, cls.winding);
    if (norm(target - x) == 0.0) throw DomainError("interior_distance needs x != x' or a nontrivial class");
    GeodesicRecord g = curve_shorten(model, BrokenGeodesic{{x, target}}, opt);
    g.cls = cls;
    return g;
}

double homotopic_perturbation_margin(const SurfaceModel& model, const GeodesicRecord& record, int n, double amplitude,
                                     unsigned long long seed) {
    if (record.samples.size() < 2) throw DomainError("record has no samples");
    const double ell = record.times.back();
    constexpr int kPoints = 2000;
    std::vector<Vec2> base(kPoints + 1);
    for (int i = 0; i <= kPoints; ++i) base[i] = hermite(record.times, record.samples, ell * i / kPoints).p;
    // same discretization for both curves, so the comparison is not polluted
    // by the polyline error
    const double base_len = polyline_length(model, base);
    double chart_len = 0.0;
    for (int i = 0; i < kPoints; ++i) chart_len += norm(base[i + 1] - base[i]);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const double slack = boundary_slack(model);
    double margin = INFINITY;
    std::vector<Vec2> pert(kPoints + 1);
    for (int trial = 0; trial < n; ++trial) {
        std::array<Vec2, 3> c;
        for (auto& v : c) v = {normal(rng), normal(rng)};
        double eps = amplitude * chart_len;
        bool inside = false;
        for (int shrink = 0; shrink < 40 && !inside; ++shrink, eps *= 0.5) {
            inside = true;
            for (int i = 0; i <= kPoints && inside; ++i) {
                const double s = static_cast<double>(i) / kPoints;
                Vec2 d{};
                for (int m = 0; m < 3; ++m) d += std::sin((m + 1) * kPi * s) * c[m];
                pert[i] = base[i] + eps * d;
                inside = model.contains(pert[i], slack);
            }
        }
        if (!inside) throw DomainError("no admissible perturbation found");
        margin = std::min(margin, polyline_length(model, pert) - base_len);
    }
    return margin;
}

// ---------------------------------------------------------------------------

double boundary_metric_mismatch(const SurfaceModel& g1, const SurfaceModel& g2, int n) {
    double worst = 0.0;
    for (int c = 0; c < g1.boundary_components(); ++c)
        for (int i = 0; i < n; ++i) {
            const Vec2 p = g1.boundary_point({c, g1.param_period() * i / n});
            const SymMat2 a = g1.metric().at(p), b = g2.metric().at(p);
            const double scale = std::max({std::abs(a.g11), std::abs(a.g22), 1e-300});
            worst = std::max({worst, std::abs(a.g11 - b.g11) / scale, std::abs(a.g12 - b.g12) / scale,
                              std::abs(a.g22 - b.g22) / scale});
        }
    return worst;
}

LensDistanceReport lens_vs_distance_check(const SurfaceModel& g1, const SurfaceModel& g2,
                                          const std::vector<BoundaryPair>& pairs, const ShootingOptions& opt) {
    if (g1.chart().index() != g2.chart().index() || g1.chart_diameter() != g2.chart_diameter())
        throw BoundaryMismatch("models live on different charts");
    const double mism = boundary_metric_mismatch(g1, g2);
    if (mism > 1e-8) {
        std::ostringstream os;
        os << "metrics differ on the boundary by " << mism;
        throw BoundaryMismatch(os.str());
    }
    struct Row {
        double dd = 0.0, dp = 0.0, da = 0.0;
    };
    std::vector<Row> rows(pairs.size());
    const double t_max = opt.t_max > 0.0 ? opt.t_max : default_horizon(g1);
    parallel_for(pairs.size(), [&](std::size_t i) {
        const BoundaryPair& pr = pairs[i];
        const GeodesicRecord d1 = boundary_distance(g1, pr.a, pr.b, pr.cls, opt);
        ShootingOptions o2 = opt;
        if (d1.solver == GeodesicSolver::Shooting) o2.guess = d1.entry_angle;
        const GeodesicRecord d2 = boundary_distance(g2, pr.a, pr.b, pr.cls, o2);
        rows[i].dd = std::abs(d1.length - d2.length);
        // scattering of the g1 distance-realizing vector under both metrics
        const double theta = d1.solver == GeodesicSolver::Shooting ? d1.entry_angle
                                                                     : boundary_angle(g1, pr.a, d1.samples.front().w);
        const EscapeResult e1 = scattering(g1, boundary_vector(g1, pr.a, theta), t_max, opt.flow);
        const EscapeResult e2 = scattering(g2, boundary_vector(g2, pr.a, theta), t_max, opt.flow);
        if (!e1.exited() || !e2.exited() || e1.exit_param.component != e2.exit_param.component) {
            rows[i].dp = rows[i].da = INFINITY;
            return;
        }
        const double dpar = e1.exit_param.param - e2.exit_param.param;
        rows[i].dp = g1.is_annulus() ? std::abs(dpar) : std::abs(wrap_pi(dpar));
        rows[i].da = std::abs(e1.exit_angle - e2.exit_angle);
    });
    LensDistanceReport rep;
    for (const Row& r : rows) {
        rep.max_distance_discrepancy = std::max(rep.max_distance_discrepancy, r.dd);
        rep.max_exit_param_discrepancy = std::max(rep.max_exit_param_discrepancy, r.dp);
        rep.max_exit_angle_discrepancy = std::max(rep.max_exit_angle_discrepancy, r.da);
    }
    rep.samples = static_cast<int>(pairs.size());
    return rep;
}

}  // namespace geolens
