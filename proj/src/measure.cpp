#include "geolens/measure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "geolens/parallel.hpp"
#include "geolens/quadrature.hpp"

namespace geolens {

namespace {

// Angle coordinate of an end of the cover on a circle, increasing in the
// positive boundary orientation.
double end_angle(const SurfaceModel& model, BoundaryPoint p) {
    if (!model.is_annulus()) return p.param;
    return p.component == 0 ? std::atan(p.param) : kPi - std::atan(p.param);
}

bool in_interval(const SurfaceModel& model, const BoundaryInterval& I, BoundaryPoint y) {
    if (!model.is_annulus()) return wrap_two_pi(y.param - I.lo) <= I.hi - I.lo;
    return y.component == I.component && y.param >= I.lo && y.param <= I.hi;
}

// Interior cut point of I at the boundary point f, if any.
std::optional<double> cut_point(const SurfaceModel& model, const BoundaryInterval& I, BoundaryPoint f) {
    if (!model.is_annulus()) {
        const double t = I.lo + wrap_two_pi(f.param - I.lo);
        if (t > I.lo && t < I.hi) return t;
        return std::nullopt;
    }
    if (f.component == I.component && f.param > I.lo && f.param < I.hi) return f.param;
    return std::nullopt;
}

struct EtaNode {
    BoundaryPoint y;
    double value = 0.0;  // weighted contribution
};

// Weighted contributions of the Gauss nodes of every start interval.
std::vector<EtaNode> eta_nodes(const SurfaceModel& model, const MeasureRegion& region, const EtaOptions& opt) {
    struct Piece {
        int component;
        double lo, hi;
    };
    std::vector<Piece> pieces;
    const double max_len = opt.piece * model.param_period();
    for (const BoundaryInterval& I : region.starts) {
        if (!(I.hi > I.lo)) continue;
        std::vector<double> cuts{I.lo, I.hi};
        for (BoundaryPoint f : {region.f0, region.f1})
            if (auto t = cut_point(model, I, f)) cuts.push_back(*t);
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double len = cuts[k + 1] - cuts[k];
            if (len <= 0.0) continue;
            const int m = std::max(1, static_cast<int>(std::ceil(len / max_len)));
            for (int j = 0; j < m; ++j)
                pieces.push_back({I.component, cuts[k] + len * j / m, cuts[k] + len * (j + 1) / m});
        }
    }
    const int n = std::max(1, opt.nodes_per_piece);
    std::vector<EtaNode> out(pieces.size() * static_cast<std::size_t>(n));
    parallel_for(pieces.size(), [&](std::size_t k) {
        const Piece& pc = pieces[k];
        const QuadratureRule rule = gauss_legendre(n, pc.lo, pc.hi);
        std::optional<double> g0, g1;
        for (int i = 0; i < n; ++i) {
            const BoundaryPoint y{pc.component, rule.nodes[i]};
            auto angle = [&](BoundaryPoint f, std::optional<double>& guess) {
                ShootingOptions so = opt.shooting;
                so.guess = guess;
                so.fallback = false;
                const double th = shoot_boundary_geodesic(model, y, f, {}, so).entry_angle;
                guess = th;
                return th;
            };
            const double c0 = std::cos(angle(region.f0, g0));
            const double c1 = std::cos(angle(region.f1, g1));
            // int sin(theta) over the entry angles whose exits land in the arc
            const bool inside = arc_contains(model, region.f0, y, region.f1);
            const double mass = inside ? 2.0 + c0 - c1 : c0 - c1;
            out[k * n + i] = {y, rule.weights[i] * boundary_data(model, y).speed * mass};
        }
    });
    return out;
}

double sum_values(const std::vector<EtaNode>& nodes) {
    std::vector<double> v;
    v.reserve(nodes.size());
    for (const auto& e : nodes) v.push_back(e.value);
    return pairwise_sum(v);
}

bool positive_crossing(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const Vec2 r = b - a, s = d - c;
    const double den = cross(r, s);
    if (std::abs(den) < 1e-6 * norm(r) * norm(s)) return false;
    const double t = cross(c - a, s) / den;
    const double u = cross(c - a, r) / den;
    return den > 0.0 && t >= 0.0 && t < 1.0 && u >= 0.0 && u < 1.0;
}

}  // namespace

// ---------------------------------------------------------------------------

double BoundaryFanGrid::total_weight() const {
    double s = 0.0;
    for (const auto& n : nodes) s += n.weight;
    return s;
}

double BoundaryFanGrid::masked_fraction() const {
    double m = 0.0;
    for (const auto& n : nodes)
        if (n.status == EscapeStatus::Trapped) m += n.weight;
    const double t = total_weight();
    return t > 0.0 ? m / t : 0.0;
}

BoundaryFanGrid make_fan_grid(const SurfaceModel& model, int n_s, int n_phi, double t_max, const FlowOptions& opt) {
    if (n_s < 1 || n_phi < 1) throw DomainError("fan grid needs n_s, n_phi >= 1");
    BoundaryFanGrid grid;
    grid.n_s = n_s;
    grid.n_phi = n_phi;
    grid.t_max = t_max > 0.0 ? t_max : default_horizon(model);
    const double period = model.param_period();
    const QuadratureRule rule = gauss_legendre(n_phi, -0.5 * kPi, 0.5 * kPi);
    for (int c = 0; c < model.boundary_components(); ++c)
        for (int i = 0; i < n_s; ++i) {
            const BoundaryPoint b{c, period * (i + 0.5) / n_s};
            const double ds = boundary_data(model, b).speed * period / n_s;
            for (int j = 0; j < n_phi; ++j) {
                FanNode fn;
                fn.b = b;
                fn.phi = rule.nodes[j];
                fn.weight = ds * std::cos(fn.phi) * rule.weights[j];
                grid.nodes.push_back(fn);
            }
        }
    FlowOptions o = opt;
    o.record_trajectory = false;
    parallel_for(grid.nodes.size(), [&](std::size_t k) {
        FanNode& fn = grid.nodes[k];
        const EscapeResult r = escape(model, boundary_vector(model, fn.b, fn.phi + 0.5 * kPi), grid.t_max, o);
        fn.status = r.status;
        fn.ell = r.time;
        fn.exit = r.exit_param;
    });
    return grid;
}

SantaloResult santalo_integrate(const SurfaceModel& model, const std::function<double(const PhasePoint&)>& f,
                                const BoundaryFanGrid& grid, const FlowOptions& opt) {
    const QuadratureRule gl = gauss_legendre(4, 0.0, 1.0);
    std::vector<double> contrib(grid.nodes.size(), 0.0);
    FlowOptions o = opt;
    o.record_trajectory = true;
    parallel_for(grid.nodes.size(), [&](std::size_t k) {
        const FanNode& fn = grid.nodes[k];
        if (fn.status == EscapeStatus::Trapped) return;
        const EscapeResult r = escape(model, boundary_vector(model, fn.b, fn.phi + 0.5 * kPi), grid.t_max, o);
        if (!r.exited()) return;
        double acc = 0.0;
        for (const auto& s : r.trajectory->steps()) {
            const double t1 = std::min(s.t1(), r.time);
            const double h = t1 - s.t0;
            if (h <= 0.0) continue;
            for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
                const OdeState<4> y = s.at(s.t0 + h * gl.nodes[q]);
                acc += h * gl.weights[q] * f({{y[0], y[1]}, {y[2], y[3]}});
            }
        }
        contrib[k] = fn.weight * acc;
    });
    return {pairwise_sum(contrib), grid.masked_fraction()};
}

double area_integral(const SurfaceModel& model, const std::function<double(Vec2)>& f, int n) {
    std::vector<double> vals;
    if (const auto* d = std::get_if<DiskChart>(&model.chart())) {
        const QuadratureRule r = gauss_legendre(n, 0.0, d->radius);
        for (int k = 0; k < n; ++k) {
            const double a = 2.0 * kPi * k / n;
            for (int i = 0; i < n; ++i) {
                const Vec2 p{r.nodes[i] * std::cos(a), r.nodes[i] * std::sin(a)};
                vals.push_back(f(p) * std::sqrt(model.metric().at(p).det()) * r.nodes[i] * r.weights[i] * 2.0 * kPi / n);
            }
        }
    } else {
        const auto& s = std::get<StripChart>(model.chart());
        const QuadratureRule r = gauss_legendre(n, s.lower, s.upper);
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i) {
                const Vec2 p{s.period * k / n, r.nodes[i]};
                vals.push_back(f(p) * std::sqrt(model.metric().at(p).det()) * r.weights[i] * s.period / n);
            }
    }
    return pairwise_sum(vals);
}

double area_quadrature(const SurfaceModel& model, int n) {
    return 2.0 * kPi * area_integral(model, [](Vec2) { return 1.0; }, n);
}

VolumeReport volume_via_lens(const SurfaceModel& model, const BoundaryFanGrid& grid) {
    std::vector<double> v;
    v.reserve(grid.nodes.size());
    for (const auto& n : grid.nodes)
        if (n.status != EscapeStatus::Trapped) v.push_back(n.weight * n.ell);
    VolumeReport rep;
    rep.lens_value = pairwise_sum(v);
    rep.direct_value = area_quadrature(model);
    rep.defect = std::abs(rep.lens_value - rep.direct_value);
    rep.masked_fraction = grid.masked_fraction();
    return rep;
}

// ---------------------------------------------------------------------------

bool arc_contains(const SurfaceModel& model, BoundaryPoint p, BoundaryPoint q, BoundaryPoint r) {
    const double ap = end_angle(model, p);
    const double dq = wrap_two_pi(end_angle(model, q) - ap);
    const double dr = wrap_two_pi(end_angle(model, r) - ap);
    return dq > 0.0 && dq < dr;
}

std::vector<BoundaryInterval> arc_between(const SurfaceModel& model, BoundaryPoint p, BoundaryPoint q, double center,
                                          double half_window) {
    if (!model.is_annulus()) {
        const double len = wrap_two_pi(q.param - p.param);
        if (len == 0.0) return {};
        return {{0, p.param, p.param + len}};
    }
    const double wlo = center - half_window, whi = center + half_window;
    auto forward = [](int c, double from, double to) { return c == 0 ? to > from : to < from; };
    std::vector<BoundaryInterval> out;
    auto add = [&](int c, double a, double b) {
        a = std::max(a, wlo);
        b = std::min(b, whi);
        if (b > a) out.push_back({c, a, b});
    };
    if (p.component == q.component && forward(p.component, p.param, q.param)) {
        out.push_back({p.component, std::min(p.param, q.param), std::max(p.param, q.param)});
        return out;
    }
    // rest of p's component, in its direction of travel
    if (p.component == 0)
        add(0, p.param, whi);
    else
        add(1, wlo, p.param);
    const int other = 1 - p.component;
    if (q.component == other) {
        if (other == 1)
            add(1, q.param, whi);
        else
            add(0, wlo, q.param);
    } else {
        add(other, wlo, whi);
        if (q.component == 0)
            add(0, wlo, q.param);
        else
            add(1, q.param, whi);
    }
    return out;
}

MeasureRegion region_between(const SurfaceModel& model, const BoundaryInterval& E, const BoundaryInterval& F) {
    MeasureRegion r;
    r.starts = {E};
    if (!model.is_annulus() || F.component == 0) {
        r.f0 = {F.component, F.lo};
        r.f1 = {F.component, F.hi};
    } else {
        r.f0 = {1, F.hi};
        r.f1 = {1, F.lo};
    }
    return r;
}

double eta_measure(const SurfaceModel& model, const MeasureRegion& region, const EtaOptions& opt) {
    if (end_angle(model, region.f0) == end_angle(model, region.f1)) return 0.0;
    return sum_values(eta_nodes(model, region, opt));
}

double eta_measure_grid(const SurfaceModel& model, const MeasureRegion& region, const BoundaryFanGrid& grid,
                        int n_max) {
    const int lifts = model.is_annulus() ? n_max : 0;
    std::vector<double> v(grid.nodes.size(), 0.0);
    for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
        const FanNode& fn = grid.nodes[k];
        if (fn.status == EscapeStatus::Trapped) continue;
        for (int n = -lifts; n <= lifts; ++n) {
            const BoundaryPoint y = model.deck(fn.b, n);
            bool start = false;
            for (const auto& I : region.starts) start = start || in_interval(model, I, y);
            if (start && arc_contains(model, region.f0, model.deck(fn.exit, n), region.f1)) v[k] += fn.weight;
        }
    }
    return pairwise_sum(v);
}

IntersectionReport intersection_number(const SurfaceModel& model, const GeodesicRecord& record, int n_max,
                                       const EtaOptions& opt) {
    IntersectionReport rep;
    rep.twice_length = 2.0 * record.length;
    if (!record.start_param || !record.end_param) {
        if (model.is_annulus()) throw DomainError("interior records are supported on disks only");
        rep = intersection_number_grid(model, record, make_fan_grid(model, 128, 128));
        return rep;
    }
    const BoundaryPoint x = *record.start_param, x2 = *record.end_param;
    double center = 0.0, half = 0.0, inner = 0.0;
    if (model.is_annulus()) {
        const double L = model.param_period();
        center = 0.5 * (x.param + x2.param);
        half = 0.5 * std::abs(x2.param - x.param) + (n_max + 0.5) * L;
        inner = half - L;
    }
    MeasureRegion region{arc_between(model, x, x2, center, half), x2, x};
    const auto nodes = eta_nodes(model, region, opt);
    rep.eta = sum_values(nodes);
    if (model.is_annulus())
        for (const auto& e : nodes)
            if (std::abs(e.y.param - center) > inner) rep.truncation_residual += e.value;
    rep.defect = std::abs(rep.eta - rep.twice_length);
    return rep;
}

IntersectionReport intersection_number_grid(const SurfaceModel& model, const GeodesicRecord& record,
                                            const BoundaryFanGrid& grid) {
    if (model.is_annulus()) throw DomainError("grid intersection numbers are supported on disks only");
    constexpr int kSegments = 256;
    std::vector<Vec2> alpha(kSegments + 1);
    for (int i = 0; i <= kSegments; ++i) alpha[i] = record_at(model, record, record.length * i / kSegments).p;
    Vec2 lo = alpha[0], hi = alpha[0];
    for (const Vec2& p : alpha) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    FlowOptions o;
    o.record_trajectory = true;
    std::vector<double> v(grid.nodes.size(), 0.0);
    parallel_for(grid.nodes.size(), [&](std::size_t k) {
        const FanNode& fn = grid.nodes[k];
        if (fn.status == EscapeStatus::Trapped) return;
        const EscapeResult r = escape(model, boundary_vector(model, fn.b, fn.phi + 0.5 * kPi), grid.t_max, o);
        const auto pts = r.trajectory->samples(8);
        for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
            const Vec2 c = pts[j].second.p, d = pts[j + 1].second.p;
            if (std::max(c.x, d.x) < lo.x || std::min(c.x, d.x) > hi.x || std::max(c.y, d.y) < lo.y ||
                std::min(c.y, d.y) > hi.y)
                continue;
            bool hit = false;
            for (int i = 0; i < kSegments && !hit; ++i) hit = positive_crossing(alpha[i], alpha[i + 1], c, d);
            if (hit) {
                // geodesics of the cover cross at most once
                v[k] = fn.weight;
                return;
            }
        }
    });
    IntersectionReport rep;
    rep.eta = pairwise_sum(v);
    rep.twice_length = 2.0 * record.length;
    rep.defect = std::abs(rep.eta - rep.twice_length);
    return rep;
}

// ---------------------------------------------------------------------------

FanChartReport fan_chart_check(const SurfaceModel& model, const GeodesicRecord& record, int n_tau, int n_theta,
                               int edge_points, const FlowOptions& opt) {
    if (n_tau < 1 || n_theta < 1 || edge_points < 1) throw DomainError("fan chart grid sizes must be positive");
    struct Corner {
        bool valid = false;
        BoundaryPoint b;
        double p = 0.0;  // sin of the entry angle from the normal
    };
    // lattice refining every box edge into edge_points pieces
    const int k = edge_points;
    const int nt = n_tau * k + 1, nh = n_theta * k + 1;
    std::vector<Corner> lattice(static_cast<std::size_t>(nt) * nh);
    const double d = record.length;
    FlowOptions o = opt;
    o.record_trajectory = false;
    parallel_for(lattice.size(), [&](std::size_t idx) {
        const int i = static_cast<int>(idx) / nh, j = static_cast<int>(idx) % nh;
        const PhasePoint a = record_at(model, record, d * i / (nt - 1));
        const SymMat2 g = model.metric().at(a.p);
        const PhasePoint z{a.p, g_rotate(g, a.w, kPi * j / (nh - 1))};
        // backward to the entry point of the geodesic through z
        const EscapeResult r = escape(model, reversed(z), 0.0, o);
        Corner& c = lattice[idx];
        if (r.status != EscapeStatus::Exited) return;
        const BoundaryData bd = boundary_data(model, r.exit_param);
        const SymMat2 ge = model.metric().at(bd.point);
        c.valid = true;
        c.b = r.exit_param;
        c.p = std::sin(g_oriented_angle(ge, bd.normal, -r.exit.w));
    });

    const QuadratureRule gl = gauss_legendre(8, 0.0, 1.0);
    auto arclength = [&](BoundaryPoint from, BoundaryPoint to) {
        double delta = to.param - from.param;
        if (!model.is_annulus()) delta = wrap_pi(delta);
        double s = 0.0;
        for (std::size_t q = 0; q < gl.nodes.size(); ++q)
            s += gl.weights[q] * boundary_data(model, {from.component, from.param + delta * gl.nodes[q]}).speed;
        return s * delta;
    };

    FanChartReport rep;
    double abs_err = 0.0;
    std::vector<const Corner*> ring;
    for (int i = 0; i < n_tau; ++i)
        for (int j = 0; j < n_theta; ++j) {
            const double expected =
                d / n_tau * (std::cos(kPi * j / n_theta) - std::cos(kPi * (j + 1) / n_theta));
            // boundary of the box, counterclockwise in (tau, theta)
            ring.clear();
            const int i0 = i * k, j0 = j * k;
            for (int q = 0; q < k; ++q) ring.push_back(&lattice[(i0 + q) * nh + j0]);
            for (int q = 0; q < k; ++q) ring.push_back(&lattice[(i0 + k) * nh + j0 + q]);
            for (int q = 0; q < k; ++q) ring.push_back(&lattice[(i0 + k - q) * nh + j0 + k]);
            for (int q = 0; q < k; ++q) ring.push_back(&lattice[i0 * nh + j0 + k - q]);
            ++rep.boxes;
            bool ok = true;
            for (const Corner* c : ring) ok = ok && c->valid && c->b.component == ring[0]->b.component;
            if (!ok) {
                ++rep.invalid;
                continue;
            }
            const std::size_t n = ring.size();
            std::vector<double> x(n), y(n);
            for (std::size_t q = 0; q < n; ++q) {
                x[q] = arclength(ring[0]->b, ring[q]->b);
                y[q] = ring[q]->p;
            }
            double area = 0.0;
            for (std::size_t q = 0; q < n; ++q) area += x[q] * y[(q + 1) % n] - x[(q + 1) % n] * y[q];
            area = 0.5 * std::abs(area);
            rep.total_eta += area;
            rep.total_expected += expected;
            abs_err += std::abs(area - expected);
            if (expected > 0.0) rep.max_defect = std::max(rep.max_defect, std::abs(area - expected) / expected);
        }
    rep.l1_defect = rep.total_expected > 0.0 ? abs_err / rep.total_expected : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------

DouadyReport douady_reconstruct(const SurfaceModel& model, BoundaryPoint x1, BoundaryPoint x2, BoundaryPoint x3,
                                BoundaryPoint x4, const EtaOptions& opt) {
    auto same = [&](BoundaryPoint a, BoundaryPoint b) { return end_angle(model, a) == end_angle(model, b); };
    if (same(x1, x2) || same(x3, x4)) return {};
    if (!(arc_contains(model, x1, x2, x3) && arc_contains(model, x2, x3, x4) && arc_contains(model, x3, x4, x1))) {
        std::ostringstream os;
        os << "corners must be in positive cyclic order with disjoint E = [x1, x2], F = [x3, x4]";
        throw BadCornerOrder(os.str());
    }
    auto dist = [&](BoundaryPoint a, BoundaryPoint b) { return boundary_distance(model, a, b, {}, opt.shooting).length; };
    DouadyReport rep;
    rep.four_corner = dist(x1, x3) + dist(x4, x2) - dist(x2, x3) - dist(x1, x4);
    MeasureRegion region{arc_between(model, x1, x2), x3, x4};
    rep.direct = eta_measure(model, region, opt);
    rep.defect = std::abs(rep.four_corner - rep.direct);
    return rep;
}

DyadicReport dyadic_reconstruct(const SurfaceModel& model, BoundaryPoint a, BoundaryPoint b, int depth,
                                const EtaOptions& opt) {
    if (depth < 0 || depth > 20) throw DomainError("dyadic depth must lie in [0, 20]");
    DyadicReport rep;
    const auto arc = arc_between(model, a, b);
    if (arc.empty()) {
        rep.by_depth.assign(static_cast<std::size_t>(depth) + 1, 0.0);
        return rep;
    }
    if (arc.size() != 1) throw DomainError("dyadic reconstruction needs a single boundary interval");
    const BoundaryInterval E = arc.front();
    // oriented so that the points run from a to b
    const bool reverse = model.is_annulus() && a.component == 1;
    const long long leaves = 1LL << depth;
    auto point = [&](long long k) {
        const double t = static_cast<double>(k) / static_cast<double>(leaves);
        return BoundaryPoint{E.component, reverse ? E.hi - t * (E.hi - E.lo) : E.lo + t * (E.hi - E.lo)};
    };
    std::map<std::pair<long long, long long>, double> cache;
    auto dist = [&](long long i, long long j) {
        auto it = cache.find({i, j});
        if (it != cache.end()) return it->second;
        const double v = boundary_distance(model, point(i), point(j), {}, opt.shooting).length;
        cache[{i, j}] = v;
        return v;
    };
    double total = 0.0;
    rep.by_depth.push_back(0.0);
    for (int level = 1; level <= depth; ++level) {
        const long long step = leaves >> (level - 1);
        for (long long lo = 0; lo < leaves; lo += step) {
            const long long mid = lo + step / 2, hi = lo + step;
            total += 2.0 * (dist(lo, mid) + dist(mid, hi) - dist(lo, hi));
        }
        rep.by_depth.push_back(total);
    }
    rep.direct = eta_measure(model, MeasureRegion{{E}, a, b}, opt);
    return rep;
}

}  // namespace geolens
