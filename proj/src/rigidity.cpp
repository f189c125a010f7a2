#include "geolens/rigidity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "geolens/catalog.hpp"
#include "geolens/parallel.hpp"
#include "geolens/quadrature.hpp"

namespace geolens {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_chart(const Chart& a, const Chart& b) {
    if (a.index() != b.index()) return false;
    if (const auto* d = std::get_if<DiskChart>(&a)) return d->radius == std::get<DiskChart>(b).radius;
    const auto& s = std::get<StripChart>(a);
    const auto& t = std::get<StripChart>(b);
    return s.lower == t.lower && s.upper == t.upper && s.period == t.period;
}

MetricPair checked_pair(MetricPair p) {
    if (!same_chart(p.g1.chart(), p.g2.chart())) throw BoundaryMismatch("the two models live on different charts");
    const double m = boundary_metric_mismatch(p.g1, p.g2);
    if (m > 1e-8) {
        std::ostringstream os;
        os << "metrics differ on the boundary by " << m;
        throw BoundaryMismatch(os.str());
    }
    return p;
}

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Uniform on (0, 1) from the counter (seed, index, stream).
double counter_uniform(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
    const std::uint64_t z = splitmix64(splitmix64(seed) ^ (index * 8 + stream));
    return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
}

double horizon(const SurfaceModel& g, double t_max) { return t_max > 0.0 ? t_max : default_horizon(g); }

// Crossing of the chart segments p0 p1 and q0 q1 as fractions along each.
bool segment_crossing(Vec2 p0, Vec2 p1, Vec2 q0, Vec2 q1, double& u, double& v) {
    const Vec2 r = p1 - p0, s = q1 - q0;
    const double den = cross(r, s);
    if (den == 0.0) return false;
    const Vec2 d = q0 - p0;
    u = cross(d, s) / den;
    v = cross(d, r) / den;
    return u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0;
}

struct Box {
    double x0, x1, y0, y1;
    bool overlaps(const Box& o) const { return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1; }
};

constexpr std::size_t kChunk = 8;

std::vector<Box> chunk_boxes(const std::vector<PhasePoint>& pts) {
    std::vector<Box> boxes;
    for (std::size_t i = 0; i + 1 < pts.size(); i += kChunk) {
        Box b{pts[i].p.x, pts[i].p.x, pts[i].p.y, pts[i].p.y};
        for (std::size_t k = i + 1; k <= std::min(i + kChunk, pts.size() - 1); ++k) {
            b.x0 = std::min(b.x0, pts[k].p.x);
            b.x1 = std::max(b.x1, pts[k].p.x);
            b.y0 = std::min(b.y0, pts[k].p.y);
            b.y1 = std::max(b.y1, pts[k].p.y);
        }
        boxes.push_back(b);
    }
    return boxes;
}

// Per-sample transferred angles for a list of thetas.
struct TransferTable {
    std::vector<double> weight;                // Liouville weight, trapped included
    std::vector<std::vector<double>> theta2;   // [theta][sample], NaN when invalid
};

TransferTable transfer_table(const MetricPair& pair, const std::vector<double>& thetas, const SamplingSpec& spec,
                             const TransferOptions& opt) {
    const std::vector<LiouvilleSample> samples = liouville_samples(pair.g1, spec, opt.flow);
    TransferTable tab;
    tab.weight.resize(samples.size());
    tab.theta2.assign(thetas.size(), std::vector<double>(samples.size(), kNaN));
    parallel_for(samples.size(), [&](std::size_t i) {
        const LiouvilleSample& s = samples[i];
        tab.weight[i] = s.weight;
        if (s.trapped) return;
        const TransferLine base = transfer_line(pair, s.y, opt);
        for (std::size_t k = 0; k < thetas.size(); ++k) {
            const AngleSample a = theta_transfer(pair, s.y, base, thetas[k], opt);
            if (a.valid) tab.theta2[k][i] = a.theta2;
        }
    });
    return tab;
}

struct Moments {
    double total = 0.0;  // all weight
    double valid = 0.0;  // weight of valid samples
    int count = 0;
};

Moments moments(const TransferTable& tab, std::size_t k) {
    std::vector<double> w(tab.weight.size(), 0.0);
    Moments m;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (!std::isnan(tab.theta2[k][i])) {
            w[i] = tab.weight[i];
            ++m.count;
        }
    m.total = pairwise_sum(tab.weight);
    m.valid = pairwise_sum(w);
    return m;
}

// Weighted mean of h(theta2) over the valid samples of row k.
template <class H>
double weighted_mean(const TransferTable& tab, std::size_t k, double valid_weight, H h) {
    std::vector<double> v(tab.weight.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isnan(tab.theta2[k][i])) v[i] = tab.weight[i] * h(tab.theta2[k][i]);
    return pairwise_sum(v) / valid_weight;
}

// sqrt(sum (w e)^2) / sum w over the valid samples: the linearized standard
// error of a ratio estimator with influence e.
template <class E>
double ratio_std_error(const TransferTable& tab, std::size_t k, double valid_weight, E e) {
    std::vector<double> v(tab.weight.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isnan(tab.theta2[k][i])) {
            const double x = tab.weight[i] * e(tab.theta2[k][i]);
            v[i] = x * x;
        }
    return std::max(std::sqrt(pairwise_sum(v)) / valid_weight, kStderrFloor);
}

ThetaEstimate estimate(const TransferTable& tab, std::size_t k, double theta) {
    ThetaEstimate e;
    e.theta = theta;
    const Moments m = moments(tab, k);
    e.samples = m.count;
    e.invalid_mass = m.total > 0.0 ? (m.total - m.valid) / m.total : 1.0;
    if (m.count == 0) {
        e.Theta = kNaN;
        e.std_error = kNaN;
        return e;
    }
    e.Theta = weighted_mean(tab, k, m.valid, [](double x) { return x; });
    e.std_error = ratio_std_error(tab, k, m.valid, [&](double x) { return x - e.Theta; });
    return e;
}

}  // namespace

std::string to_string(Relation r) {
    switch (r) {
        case Relation::Identical: return "identical";
        case Relation::Pullback: return "pullback";
        case Relation::Conformal: return "conformal";
        case Relation::Unrelated: return "unrelated";
    }
    return "unknown";
}

MetricPair identical_pair(const SurfaceModel& g) { return checked_pair({g, g, Relation::Identical, nullptr, nullptr}); }

MetricPair pullback_pair(const SurfaceModel& g1, std::shared_ptr<const Diffeo> psi) {
    SurfaceModel g2 = pullback(g1, psi);
    return checked_pair({g1, std::move(g2), Relation::Pullback, std::move(psi), nullptr});
}

MetricPair conformal_pair(const SurfaceModel& g1, std::shared_ptr<const ScalarField> omega) {
    SurfaceModel g2{"conformal{base=" + g1.name() + "}", g1.chart(),
                    std::make_shared<ConformalMetric>(g1.metric_ptr(), omega)};
    return checked_pair({g1, std::move(g2), Relation::Conformal, nullptr, std::move(omega)});
}

MetricPair unrelated_pair(const SurfaceModel& g1, const SurfaceModel& g2) {
    return checked_pair({g1, g2, Relation::Unrelated, nullptr, nullptr});
}

// ---------------------------------------------------------------------------

TransferLine transfer_line(const MetricPair& pair, const PhasePoint& y, const TransferOptions& opt) {
    TransferLine line;
    const double t_max = horizon(pair.g1, opt.t_max);
    FlowOptions fo = opt.flow;
    fo.record_trajectory = false;
    const EscapeResult fwd = escape(pair.g1, y, t_max, fo);
    const EscapeResult bwd = escape(pair.g1, reversed(y), t_max, fo);
    if (fwd.status == EscapeStatus::Trapped || bwd.status == EscapeStatus::Trapped) {
        line.failure = "ray trapped at the horizon";
        return line;
    }
    line.start = bwd.exit_param;
    line.end = fwd.exit_param;
    line.time_at_base = bwd.time;
    line.g1_length = bwd.time + fwd.time;
    ShootingOptions so = opt.shooting;
    so.guess = boundary_angle(pair.g1, line.start, -bwd.exit.w);
    try {
        line.g2 = boundary_distance(pair.g2, line.start, line.end, {0}, so);
    } catch (const Error& e) {
        line.failure = e.what();
        return line;
    }
    line.valid = true;
    return line;
}

Crossing intersect_geodesics(const SurfaceModel& model, const GeodesicRecord& a, const GeodesicRecord& b) {
    const auto& pa = a.samples;
    const auto& pb = b.samples;
    if (pa.size() < 2 || pb.size() < 2) throw NoIntersection("records need at least two samples");
    const std::vector<Box> ba = chunk_boxes(pa), bb = chunk_boxes(pb);
    bool found = false;
    double s = 0.0, t = 0.0;
    for (std::size_t ca = 0; ca < ba.size() && !found; ++ca)
        for (std::size_t cb = 0; cb < bb.size() && !found; ++cb) {
            if (!ba[ca].overlaps(bb[cb])) continue;
            const std::size_t ia1 = std::min(ca * kChunk + kChunk, pa.size() - 1);
            const std::size_t ib1 = std::min(cb * kChunk + kChunk, pb.size() - 1);
            for (std::size_t i = ca * kChunk; i < ia1 && !found; ++i)
                for (std::size_t j = cb * kChunk; j < ib1 && !found; ++j) {
                    double u, v;
                    if (!segment_crossing(pa[i].p, pa[i + 1].p, pb[j].p, pb[j + 1].p, u, v)) continue;
                    s = a.times[i] + u * (a.times[i + 1] - a.times[i]);
                    t = b.times[j] + v * (b.times[j + 1] - b.times[j]);
                    found = true;
                }
        }
    if (!found) throw NoIntersection("the polylines do not cross");

    const double scale = std::max(1.0, model.chart_diameter());
    PhasePoint A = record_at(model, a, s), B = record_at(model, b, t);
    for (int it = 0; it < 50; ++it) {
        const Vec2 F = A.p - B.p;
        if (norm(F) < 1e-14 * scale) break;
        const double det = -cross(A.w, B.w);
        if (det == 0.0) break;
        // [A.w, -B.w] (ds, dt) = -F
        const double ds = cross(-F, -B.w) / det;
        const double dt = cross(A.w, -F) / det;
        s = std::clamp(s + ds, 0.0, a.length);
        t = std::clamp(t + dt, 0.0, b.length);
        A = record_at(model, a, s);
        B = record_at(model, b, t);
        if (std::abs(ds) + std::abs(dt) < 1e-15 * scale) break;
    }
    if (norm(A.p - B.p) > 1e-9 * scale) throw NoIntersection("crossing refinement did not converge");
    Crossing c;
    c.s = s;
    c.t = t;
    c.point = 0.5 * (A.p + B.p);
    c.angle = g_oriented_angle(model.metric().at(c.point), A.w, B.w);
    return c;
}

AngleSample theta_transfer(const MetricPair& pair, const PhasePoint& y, const TransferLine& base, double theta,
                           const TransferOptions& opt) {
    AngleSample a;
    a.y = y;
    a.theta = theta;
    a.x2 = {kNaN, kNaN};
    if (theta <= 0.0 || theta >= kPi) {
        // coinciding or opposite rays
        a.theta2 = std::clamp(theta, 0.0, kPi);
        a.valid = true;
        return a;
    }
    if (!base.valid) {
        a.failure = base.failure;
        return a;
    }
    const PhasePoint y2{y.p, rotate(pair.g1, y.p, y.w, theta)};
    const TransferLine other = transfer_line(pair, y2, opt);
    if (!other.valid) {
        a.failure = other.failure;
        return a;
    }
    try {
        const Crossing c = intersect_geodesics(pair.g2, base.g2, other.g2);
        if (c.angle <= 0.0) {
            a.failure = "crossing with reversed orientation";
            return a;
        }
        a.theta2 = c.angle;
        a.x2 = c.point;
        a.valid = true;
    } catch (const NoIntersection& e) {
        a.failure = e.what();
    }
    return a;
}

AngleSample theta_transfer(const MetricPair& pair, const PhasePoint& y, double theta, const TransferOptions& opt) {
    if (theta <= 0.0 || theta >= kPi) return theta_transfer(pair, y, TransferLine{}, theta, opt);
    return theta_transfer(pair, y, transfer_line(pair, y, opt), theta, opt);
}

SymmetryReport symmetry_check(const MetricPair& pair, const std::vector<AngleProbe>& samples,
                              const TransferOptions& opt) {
    std::vector<double> res(samples.size(), kNaN);
    parallel_for(samples.size(), [&](std::size_t i) {
        const AngleProbe& p = samples[i];
        const AngleSample a = theta_transfer(pair, p.y, p.theta, opt);
        const PhasePoint y2{p.y.p, rotate(pair.g1, p.y.p, p.y.w, p.theta)};
        const AngleSample b = theta_transfer(pair, y2, kPi - p.theta, opt);
        if (a.valid && b.valid) res[i] = std::abs(a.theta2 + b.theta2 - kPi);
    });
    SymmetryReport r;
    for (double x : res) {
        if (std::isnan(x)) {
            ++r.invalid;
            continue;
        }
        ++r.valid;
        r.max_residual = std::max(r.max_residual, x);
    }
    return r;
}

double sampled_max_curvature(const SurfaceModel& g, int n) {
    double k = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Vec2 p;
            if (const auto* d = std::get_if<DiskChart>(&g.chart())) {
                const double r = d->radius * (i + 0.5) / n, a = 2.0 * kPi * j / n;
                p = {r * std::cos(a), r * std::sin(a)};
            } else {
                const auto& s = std::get<StripChart>(g.chart());
                p = {s.period * (i + 0.5) / n, s.lower + (s.upper - s.lower) * (j + 0.5) / n};
            }
            k = std::max(k, gauss_curvature(g, p));
        }
    return k;
}

SubadditivityReport subadditivity_check(const MetricPair& pair, const std::vector<SubadditivityProbe>& samples,
                                        const TransferOptions& opt) {
    const double k = sampled_max_curvature(pair.g2);
    if (k >= 0.0) {
        std::ostringstream os;
        os << "g2 has curvature " << k << " >= 0 on the sample grid";
        throw CurvatureSignViolation(os.str());
    }
    SubadditivityReport r;
    r.residuals.assign(samples.size(), kNaN);
    parallel_for(samples.size(), [&](std::size_t i) {
        const SubadditivityProbe& p = samples[i];
        if (p.theta1 < 0.0 || p.theta2 < 0.0 || p.theta1 + p.theta2 > kPi) return;
        const TransferLine base = transfer_line(pair, p.y, opt);
        const AngleSample whole = theta_transfer(pair, p.y, base, p.theta1 + p.theta2, opt);
        const AngleSample first = theta_transfer(pair, p.y, base, p.theta1, opt);
        const PhasePoint y1{p.y.p, rotate(pair.g1, p.y.p, p.y.w, p.theta1)};
        const AngleSample second = theta_transfer(pair, y1, p.theta2, opt);
        if (whole.valid && first.valid && second.valid)
            r.residuals[i] = whole.theta2 - first.theta2 - second.theta2;
    });
    r.min_residual = std::numeric_limits<double>::infinity();
    r.max_residual = -std::numeric_limits<double>::infinity();
    for (double x : r.residuals) {
        if (std::isnan(x)) {
            ++r.invalid;
            continue;
        }
        ++r.valid;
        r.min_residual = std::min(r.min_residual, x);
        r.max_residual = std::max(r.max_residual, x);
    }
    if (r.valid == 0) r.min_residual = r.max_residual = kNaN;
    return r;
}

// ---------------------------------------------------------------------------

std::vector<LiouvilleSample> liouville_samples(const SurfaceModel& g1, const SamplingSpec& spec,
                                               const FlowOptions& opt) {
    if (spec.samples < 1) throw DomainError("sampling needs at least one sample");
    const double t_max = horizon(g1, spec.t_max);
    FlowOptions fo = opt;
    fo.record_trajectory = true;
    std::vector<LiouvilleSample> out(static_cast<std::size_t>(spec.samples));
    parallel_for(out.size(), [&](std::size_t i) {
        const int comp = g1.is_annulus() && counter_uniform(spec.seed, i, 0) >= 0.5 ? 1 : 0;
        const BoundaryPoint b{comp, g1.param_period() * counter_uniform(spec.seed, i, 1)};
        const double phi = std::asin(2.0 * counter_uniform(spec.seed, i, 2) - 1.0);
        const PhasePoint y0 = boundary_vector(g1, b, phi + 0.5 * kPi);
        const double speed = boundary_data(g1, b).speed;
        const EscapeResult r = escape(g1, y0, t_max, fo);
        LiouvilleSample& s = out[i];
        if (r.status == EscapeStatus::Trapped) {
            s.y = y0;
            s.trapped = true;
            s.weight = speed * t_max;
            return;
        }
        const double t = counter_uniform(spec.seed, i, 3) * r.time;
        const PhasePoint y = r.trajectory->empty() ? y0 : r.trajectory->at(t);
        s.y = {y.p, g_normalize(g1.metric().at(y.p), y.w)};
        s.weight = speed * r.time;
    });
    return out;
}

std::vector<ThetaEstimate> theta_curve(const MetricPair& pair, const std::vector<double>& thetas,
                                       const SamplingSpec& spec, const TransferOptions& opt) {
    const TransferTable tab = transfer_table(pair, thetas, spec, opt);
    std::vector<ThetaEstimate> out;
    for (std::size_t k = 0; k < thetas.size(); ++k) out.push_back(estimate(tab, k, thetas[k]));
    return out;
}

ThetaEstimate average_angle(const MetricPair& pair, double theta, const SamplingSpec& spec,
                            const TransferOptions& opt) {
    return theta_curve(pair, {theta}, spec, opt).front();
}

ConvexFunction convex_function(const std::string& name) {
    if (name == "square") return {name, [](double x) { return x * x; }, [](double x) { return 2.0 * x; }};
    if (name == "exp") return {name, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); }};
    if (name == "neg_sin") return {name, [](double x) { return -std::sin(x); }, [](double x) { return -std::cos(x); }};
    if (name == "linear") return {name, [](double x) { return 2.0 * x + 1.0; }, [](double) { return 2.0; }};
    throw DomainError("unknown convex function '" + name + "'");
}

JensenReport jensen_gap(const MetricPair& pair, double theta, const ConvexFunction& f, const SamplingSpec& spec,
                        const TransferOptions& opt) {
    const TransferTable tab = transfer_table(pair, {theta}, spec, opt);
    const ThetaEstimate e = estimate(tab, 0, theta);
    JensenReport r;
    r.theta = theta;
    r.Theta = e.Theta;
    r.invalid_mass = e.invalid_mass;
    r.samples = e.samples;
    if (e.samples == 0) {
        r.mean_f = r.f_Theta = r.gap = r.std_error = kNaN;
        return r;
    }
    const double valid = moments(tab, 0).valid;
    r.mean_f = weighted_mean(tab, 0, valid, f.f);
    r.f_Theta = f.f(e.Theta);
    r.gap = r.mean_f - r.f_Theta;
    const double slope = f.df(e.Theta);
    r.std_error = ratio_std_error(tab, 0, valid,
                                  [&](double x) { return f.f(x) - r.mean_f - slope * (x - e.Theta); });
    return r;
}

// ---------------------------------------------------------------------------

PsiEstimate psi_reconstruct(const MetricPair& pair, Vec2 x, int n_probes, const TransferOptions& opt) {
    if (n_probes < 3) throw DomainError("psi_reconstruct needs at least three probe directions");
    if (!pair.g1.contains(x)) throw DomainError("psi_reconstruct needs an interior point");
    const SymMat2 g = pair.g1.metric().at(x);
    const Vec2 e = g_normalize(g, {1.0, 0.0});
    std::vector<TransferLine> lines(static_cast<std::size_t>(n_probes));
    parallel_for(lines.size(), [&](std::size_t k) {
        lines[k] = transfer_line(pair, {x, g_rotate(g, e, kPi * static_cast<double>(k) / n_probes)}, opt);
    });
    for (std::size_t k = 0; k < lines.size(); ++k)
        if (!lines[k].valid) {
            std::ostringstream os;
            os << "probe " << k << " at (" << x.x << ", " << x.y << "): " << lines[k].failure;
            throw ProbeTrapped(os.str());
        }
    std::vector<Vec2> pts;
    for (std::size_t i = 0; i < lines.size(); ++i)
        for (std::size_t j = i + 1; j < lines.size(); ++j)
            pts.push_back(intersect_geodesics(pair.g2, lines[i].g2, lines[j].g2).point);
    PsiEstimate r;
    r.x = x;
    r.crossings = static_cast<int>(pts.size());
    std::vector<double> xs, ys;
    for (const Vec2& p : pts) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    r.psi = Vec2{pairwise_sum(xs), pairwise_sum(ys)} / static_cast<double>(pts.size());
    const SymMat2 g2 = pair.g2.metric().at(r.psi);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) r.spread = std::max(r.spread, g2.norm(pts[i] - pts[j]));
    return r;
}

CertificateReport isometry_certificate(const MetricPair& pair, const std::vector<std::pair<Vec2, Vec2>>& pairs,
                                       const CertificateOptions& opt) {
    std::vector<Vec2> points;
    auto index_of = [&](Vec2 p) {
        for (std::size_t i = 0; i < points.size(); ++i)
            if (points[i].x == p.x && points[i].y == p.y) return i;
        points.push_back(p);
        return points.size() - 1;
    };
    std::vector<std::pair<std::size_t, std::size_t>> idx;
    for (const auto& [a, b] : pairs) idx.emplace_back(index_of(a), index_of(b));

    // near-boundary points
    std::vector<Vec2> edge;
    for (int c = 0; c < pair.g1.boundary_components(); ++c)
        for (int k = 0; k < opt.boundary_samples; ++k) {
            const BoundaryPoint b{c, pair.g1.param_period() * k / opt.boundary_samples};
            const BoundaryData bd = boundary_data(pair.g1, b);
            edge.push_back(bd.point + opt.boundary_offset * (bd.normal / norm(bd.normal)));
        }

    std::vector<PsiEstimate> psi(points.size()), psi_edge(edge.size());
    parallel_for(points.size(), [&](std::size_t i) {
        psi[i] = psi_reconstruct(pair, points[i], opt.n_probes, opt.transfer);
    });
    parallel_for(edge.size(), [&](std::size_t i) {
        psi_edge[i] = psi_reconstruct(pair, edge[i], opt.n_probes, opt.transfer);
    });

    std::vector<double> defect(idx.size(), 0.0);
    parallel_for(idx.size(), [&](std::size_t k) {
        const auto [i, j] = idx[k];
        const double d1 = interior_distance(pair.g1, points[i], points[j], {}).length;
        const double d2 = interior_distance(pair.g2, psi[i].psi, psi[j].psi, {}).length;
        defect[k] = std::abs(d2 - d1);
    });

    CertificateReport r;
    r.pairs = static_cast<int>(idx.size());
    for (double d : defect) r.max_distance_defect = std::max(r.max_distance_defect, d);
    for (const PsiEstimate& p : psi) r.max_spread = std::max(r.max_spread, p.spread);
    for (const PsiEstimate& p : psi_edge) {
        r.max_spread = std::max(r.max_spread, p.spread);
        r.boundary_drift = std::max(r.boundary_drift, pair.g1.metric().at(p.x).norm(p.psi - p.x));
    }
    return r;
}

// ---------------------------------------------------------------------------

CrokeReport croke_conformal_check(const MetricPair& pair, const CrokeOptions& opt) {
    if (pair.relation != Relation::Conformal || !pair.omega)
        throw DomainError("croke_conformal_check needs a conformal pair");
    const ScalarField& omega = *pair.omega;
    for (int c = 0; c < pair.g1.boundary_components(); ++c)
        for (int k = 0; k < 64; ++k) {
            const Vec2 p = pair.g1.boundary_point({c, pair.g1.param_period() * k / 64});
            if (std::abs(omega.value(p)) > 1e-12) throw BoundaryMismatch("omega does not vanish on the boundary");
        }

    CrokeReport r;
    r.vol1 = area_quadrature(pair.g1, opt.area_grid);
    r.vol2 = area_quadrature(pair.g2, opt.area_grid);
    r.e_omega = 2.0 * kPi * area_integral(pair.g1, [&](Vec2 p) { return std::exp(omega.value(p)); }, opt.area_grid);
    r.holder_defect = std::sqrt(r.vol1 * r.vol2) - r.e_omega;

    const BoundaryFanGrid grid = make_fan_grid(pair.g1, opt.n_s, opt.n_phi, opt.t_max);
    r.masked_fraction = grid.masked_fraction();
    r.vol1_lens = volume_via_lens(pair.g1, grid).lens_value;
    r.e_omega_santalo =
        santalo_integrate(pair.g1, [&](const PhasePoint& y) { return std::exp(omega.value(y.p)); }, grid).value;

    std::vector<double> chain(grid.nodes.size(), 0.0), disc(grid.nodes.size(), 0.0);
    std::vector<int> failed(grid.nodes.size(), 0);
    parallel_for(grid.nodes.size(), [&](std::size_t k) {
        const FanNode& n = grid.nodes[k];
        if (n.status == EscapeStatus::Trapped) return;
        ShootingOptions so = opt.shooting;
        so.guess = n.phi + 0.5 * kPi;
        try {
            const double d2 = boundary_distance(pair.g2, n.b, n.exit, {0}, so).length;
            chain[k] = n.weight * d2;
            disc[k] = std::abs(d2 - n.ell);
        } catch (const Error&) {
            failed[k] = 1;
        }
    });
    r.distance_chain = pairwise_sum(chain);
    for (double d : disc) r.max_distance_discrepancy = std::max(r.max_distance_discrepancy, d);
    for (int f : failed) r.distance_failures += f;
    return r;
}

}  // namespace geolens
