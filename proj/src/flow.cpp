#include "geolens/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "geolens/parallel.hpp"

namespace geolens {

namespace {

struct GeodesicRhs {
    const MetricField* metric;
    template <std::size_t N>
    void operator()(const OdeState<N>& y, OdeState<N>& f) const {
        const Vec2 w{y[2], y[3]};
        const Vec2 a = metric->christoffel({y[0], y[1]}).contract(w, w);
        f[0] = y[2];
        f[1] = y[3];
        f[2] = -a.x;
        f[3] = -a.y;
        if constexpr (N == 6) {
            f[4] = y[5];
            f[5] = -metric->curvature({y[0], y[1]}) * y[4];
        }
    }
};

template <std::size_t N>
Vec2 pos(const OdeState<N>& y) { return {y[0], y[1]}; }
template <std::size_t N>
Vec2 vel(const OdeState<N>& y) { return {y[2], y[3]}; }

double boundary_slack(const SurfaceModel& model) { return 1e-9 * model.chart_diameter(); }

enum class Stop { Horizon, Boundary, Hook };

template <std::size_t N>
struct RunOutcome {
    Stop reason = Stop::Horizon;
    double t = 0.0;
    OdeState<N> y{};
};

// Crossing of the boundary function inside [t0, t1] of a dense step.
template <std::size_t N>
std::optional<double> find_crossing(const SurfaceModel& model, const DenseStep<N>& d, double t0, double t1,
                                    bool from_boundary, double tol) {
    auto b = [&](double t) { return model.boundary_function(pos(d.at(t))); };
    auto bdot = [&](double t) {
        const OdeState<N> s = d.at(t);
        return dot(model.boundary_function_gradient(pos(s)), vel(s));
    };
    auto refine = [&](double lo, double hi) {
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if (b(mid) < 0.0)
                hi = mid;
            else
                lo = mid;
        }
        double t = hi;
        for (int i = 0; i < 3; ++i) {
            const double slope = bdot(t);
            if (slope == 0.0) break;
            const double next = t - b(t) / slope;
            if (!(next >= lo - tol && next <= hi + tol)) break;
            t = next;
        }
        return t;
    };

    const int n = from_boundary ? 32 : 4;
    double prev_t = t0;
    double prev_dot = bdot(t0);
    for (int k = 1; k <= n; ++k) {
        const double t = k == n ? t1 : t0 + (t1 - t0) * k / n;
        if (b(t) < 0.0) return refine(prev_t, t);
        const double cur_dot = bdot(t);
        if (prev_dot < 0.0 && cur_dot > 0.0) {
            // the orbit dipped towards the boundary between samples
            double lo = prev_t, hi = t;
            for (int i = 0; i < 50 && hi - lo > tol; ++i) {
                const double mid = 0.5 * (lo + hi);
                if (bdot(mid) < 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            if (b(lo) < 0.0) return refine(prev_t, lo);
        }
        prev_t = t;
        prev_dot = cur_dot;
    }
    return std::nullopt;
}

// Integrates from y0 up to t_end, stopping at the first boundary crossing.
// hook(step, ta, tb) may return a stop time inside [ta, tb].
template <std::size_t N, class Hook>
RunOutcome<N> run_flow(const SurfaceModel& model, const OdeState<N>& y0, double t_end, const FlowOptions& opt,
                       Hook&& hook, std::vector<DenseStep<N>>* record, bool detect_boundary = true) {
    const MetricField& metric = model.metric();
    IntegratorOptions io;
    io.rtol = opt.rtol;
    io.atol = opt.atol;
    io.h_max = opt.h_max > 0.0 ? opt.h_max : 0.25 * model.diameter();
    DormandPrince<N, GeodesicRhs> dp(GeodesicRhs{&metric}, io);
    dp.reset(0.0, y0);

    const double b0 = model.boundary_function(pos(y0));
    bool from_boundary = b0 <= boundary_slack(model);
    if (from_boundary) {
        const double rate = dot(model.boundary_function_gradient(pos(y0)), vel(y0));
        dp.limit_next_step(std::max(0.25 * model.diameter() * std::max(rate, 1e-6), 1e-9));
    }

    RunOutcome<N> out;
    if (t_end <= 0.0) {
        out.y = y0;
        return out;
    }
    while (dp.t() < t_end) {
        const double ta = dp.t();
        const DenseStep<N>& d = dp.step(t_end);
        const double tb = dp.t();
        const auto crossing = detect_boundary ? find_crossing(model, d, ta, tb, from_boundary, opt.event_tol)
                                              : std::optional<double>{};
        from_boundary = false;
        const double hook_end = crossing ? *crossing : tb;
        const std::optional<double> hook_stop = hook(d, ta, hook_end);
        if (record) record->push_back(d);
        if (hook_stop) {
            out.reason = Stop::Hook;
            out.t = *hook_stop;
            out.y = d.at(*hook_stop);
            return out;
        }
        if (crossing) {
            out.reason = Stop::Boundary;
            out.t = *crossing;
            out.y = d.at(*crossing);
            return out;
        }
        // renormalize w; the geodesic spray is quadratic in w, so the
        // derivative rescales exactly
        OdeState<N> y = dp.y();
        OdeState<N> f = dp.derivative();
        const double c = 1.0 / metric.at(pos(y)).norm(vel(y));
        y[2] *= c;
        y[3] *= c;
        f[0] *= c;
        f[1] *= c;
        f[2] *= c * c;
        f[3] *= c * c;
        dp.replace_state(y, f);
    }
    out.reason = Stop::Horizon;
    out.t = t_end;
    out.y = dp.y();
    return out;
}

struct NoHook {
    template <std::size_t N>
    std::optional<double> operator()(const DenseStep<N>&, double, double) const {
        return std::nullopt;
    }
};

void check_unit(const SurfaceModel& model, const PhasePoint& y) {
    const double n = metric_at(model, y.p).norm(y.w);
    if (std::abs(n - 1.0) > kUnitTolerance) {
        std::ostringstream os;
        os << "tangent vector has g-norm " << n;
        throw NotUnit(os.str());
    }
}

void check_start(const SurfaceModel& model, const PhasePoint& y) {
    if (!model.contains(y.p, boundary_slack(model))) {
        std::ostringstream os;
        os << "start point (" << y.p.x << ", " << y.p.y << ") outside " << model.name();
        throw DomainError(os.str());
    }
    check_unit(model, y);
}

OdeState<4> to_state(const PhasePoint& y) { return {y.p.x, y.p.y, y.w.x, y.w.y}; }
OdeState<6> to_state(const PhasePoint& y, JacobiState j) { return {y.p.x, y.p.y, y.w.x, y.w.y, j.J, j.dJ}; }

// Starts on the boundary that are not strictly inward exit immediately.
std::optional<EscapeResult> immediate_exit(const SurfaceModel& model, const PhasePoint& y, const FlowOptions& opt) {
    if (model.boundary_function(y.p) > boundary_slack(model)) return std::nullopt;
    const BoundaryPoint bp = model.locate_boundary(y.p);
    const BoundaryData bd = boundary_data(model, bp);
    const SymMat2 g = model.metric().at(bd.point);
    const double gn = g.inner(y.w, bd.normal);
    if (gn >= opt.tangent_tol) return std::nullopt;
    EscapeResult r;
    r.status = gn > -opt.tangent_tol ? EscapeStatus::Tangential : EscapeStatus::Exited;
    r.time = 0.0;
    r.exit = {bd.point, y.w};
    r.exit_param = bp;
    r.exit_angle = -g_oriented_angle(g, bd.tangent, y.w);
    return r;
}

EscapeResult make_exit(const SurfaceModel& model, const OdeState<4>& y, double t, const FlowOptions& opt) {
    EscapeResult r;
    const BoundaryPoint bp = model.locate_boundary(pos(y));
    const BoundaryData bd = boundary_data(model, bp);
    const SymMat2 g = model.metric().at(bd.point);
    const Vec2 w = g_normalize(g, vel(y));
    const double gn = g.inner(w, bd.normal);
    r.status = std::abs(gn) < opt.tangent_tol ? EscapeStatus::Tangential : EscapeStatus::Exited;
    r.time = t;
    r.exit = {bd.point, w};
    r.exit_param = bp;
    r.exit_angle = -g_oriented_angle(g, bd.tangent, w);
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------

PhasePoint Trajectory::at(double t) const {
    if (steps_.empty()) throw DomainError("empty trajectory");
    t = std::clamp(t, 0.0, t_end_);
    auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                               [](double v, const DenseStep<4>& s) { return v < s.t1(); });
    const DenseStep<4>& s = it == steps_.end() ? steps_.back() : *it;
    const OdeState<4> y = s.at(t);
    return {{y[0], y[1]}, {y[2], y[3]}};
}

std::vector<std::pair<double, PhasePoint>> Trajectory::samples(int per_step) const {
    std::vector<std::pair<double, PhasePoint>> out;
    if (steps_.empty()) return out;
    per_step = std::max(1, per_step);
    out.emplace_back(0.0, at(0.0));
    for (const auto& s : steps_) {
        const double t1 = std::min(s.t1(), t_end_);
        for (int k = 1; k <= per_step; ++k) {
            const double t = s.t0 + (t1 - s.t0) * k / per_step;
            const OdeState<4> y = s.at(t);
            out.emplace_back(t, PhasePoint{{y[0], y[1]}, {y[2], y[3]}});
        }
        if (t1 >= t_end_) break;
    }
    return out;
}

std::string to_string(EscapeStatus s) {
    switch (s) {
        case EscapeStatus::Exited: return "exited";
        case EscapeStatus::Tangential: return "tangential";
        case EscapeStatus::Trapped: return "trapped";
    }
    return "unknown";
}

double default_horizon(const SurfaceModel& model) { return 20.0 * model.diameter(); }

PhasePoint flow_step(const SurfaceModel& model, const PhasePoint& y, double t, const FlowOptions& opt) {
    check_start(model, y);
    if (t < 0.0) throw DomainError("flow_step needs t >= 0");
    const auto out = run_flow<4>(model, to_state(y), t, opt, NoHook{}, nullptr);
    if (out.reason == Stop::Boundary) throw LeftDomain(out.t);
    const SymMat2 g = model.metric().at(pos(out.y));
    return {pos(out.y), g_normalize(g, vel(out.y))};
}

EscapeResult escape(const SurfaceModel& model, const PhasePoint& y, double t_max, const FlowOptions& opt) {
    check_start(model, y);
    if (t_max <= 0.0) t_max = default_horizon(model);
    if (auto r = immediate_exit(model, y, opt)) {
        if (opt.record_trajectory) r->trajectory = Trajectory({}, 0.0);
        return *r;
    }
    std::vector<DenseStep<4>> steps;
    const auto out = run_flow<4>(model, to_state(y), t_max, opt, NoHook{}, opt.record_trajectory ? &steps : nullptr);
    EscapeResult r;
    if (out.reason == Stop::Boundary) {
        r = make_exit(model, out.y, out.t, opt);
    } else {
        r.status = EscapeStatus::Trapped;
        r.time = t_max;
        r.exit = {pos(out.y), vel(out.y)};
    }
    if (opt.record_trajectory) r.trajectory = Trajectory(std::move(steps), r.time);
    return r;
}

EscapeResult scattering(const SurfaceModel& model, const PhasePoint& y, double t_max, const FlowOptions& opt) {
    if (std::abs(model.boundary_function(y.p)) > boundary_slack(model))
        throw DomainError("scattering needs a boundary base point");
    const BoundaryData bd = boundary_data(model, model.locate_boundary(y.p));
    if (!(model.metric().at(y.p).inner(y.w, bd.normal) > 0.0))
        throw DomainError("scattering needs an inward-pointing vector");
    return escape(model, y, t_max, opt);
}

PhasePoint boundary_vector(const SurfaceModel& model, BoundaryPoint b, double theta) {
    const BoundaryData bd = boundary_data(model, b);
    const SymMat2 g = model.metric().at(bd.point);
    return {bd.point, g_rotate(g, bd.tangent, theta)};
}

double boundary_angle(const SurfaceModel& model, BoundaryPoint b, Vec2 w) {
    const BoundaryData bd = boundary_data(model, b);
    return g_oriented_angle(model.metric().at(bd.point), bd.tangent, w);
}

JacobiState jacobi_evolve(const SurfaceModel& model, const PhasePoint& y, JacobiState j0, double t,
                          const FlowOptions& opt) {
    check_start(model, y);
    if (t < 0.0) throw DomainError("jacobi_evolve needs t >= 0");
    const auto out = run_flow<6>(model, to_state(y, j0), t, opt, NoHook{}, nullptr);
    if (out.reason == Stop::Boundary) throw LeftDomain(out.t);
    return {out.y[4], out.y[5]};
}

JacobiFlowResult flow_with_jacobi(const SurfaceModel& model, const PhasePoint& y, JacobiState j0, double t,
                                  const FlowOptions& opt) {
    check_start(model, y);
    if (t < 0.0) throw DomainError("flow_with_jacobi needs t >= 0");
    const auto out = run_flow<6>(model, to_state(y, j0), t, opt, NoHook{}, nullptr);
    if (out.reason == Stop::Boundary) throw LeftDomain(out.t);
    return {{pos(out.y), vel(out.y)}, {out.y[4], out.y[5]}};
}

JacobiFlowResult flow_with_jacobi_unbounded(const SurfaceModel& model, const PhasePoint& y, JacobiState j0, double t,
                                            const FlowOptions& opt) {
    if (t < 0.0) throw DomainError("flow_with_jacobi needs t >= 0");
    const auto out = run_flow<6>(model, to_state(y, j0), t, opt, NoHook{}, nullptr, false);
    return {{pos(out.y), vel(out.y)}, {out.y[4], out.y[5]}};
}

std::optional<double> conjugate_scan(const SurfaceModel& model, const PhasePoint& y, double T,
                                     const FlowOptions& opt) {
    check_start(model, y);
    // J > 0 just after t = 0 since J'(0) = 1
    double prev_t = 0.0;
    bool prev_positive = true;
    auto hook = [&](const DenseStep<6>& d, double ta, double tb) -> std::optional<double> {
        constexpr int n = 4;
        for (int k = 1; k <= n; ++k) {
            const double t = k == n ? tb : ta + (tb - ta) * k / n;
            const double j = d.at(t)[4];
            if (t > 0.0 && (j == 0.0 || (j > 0.0) != prev_positive)) {
                double lo = prev_t, hi = t;
                for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++i) {
                    const double mid = 0.5 * (lo + hi);
                    if ((d.at(mid)[4] > 0.0) == prev_positive)
                        lo = mid;
                    else
                        hi = mid;
                }
                return 0.5 * (lo + hi);
            }
            prev_t = t;
            prev_positive = j > 0.0;
        }
        return std::nullopt;
    };
    const auto out = run_flow<6>(model, to_state(y, {0.0, 1.0}), T, opt, hook, nullptr);
    if (out.reason == Stop::Hook) return out.t;
    return std::nullopt;
}

double lyapunov_estimate(const SurfaceModel& model, const PhasePoint& y, double T, JacobiState j0,
                         const FlowOptions& opt) {
    check_start(model, y);
    if (!(T > 0.0)) throw DomainError("lyapunov_estimate needs T > 0");
    const auto out = run_flow<6>(model, to_state(y, j0), T, opt, NoHook{}, nullptr);
    if (out.reason == Stop::Boundary) {
        std::ostringstream os;
        os << "orbit exits at t=" << out.t << " before T=" << T;
        throw NotTrapped(os.str());
    }
    const double n0 = std::hypot(j0.J, j0.dJ);
    return std::log(std::hypot(out.y[4], out.y[5]) / n0) / T;
}

ConeReport cone_expansion_check(const SurfaceModel& model, const PhasePoint& y, double tau, double alpha, double rho,
                                double settle, int fan_size, const FlowOptions& opt) {
    auto trapped = [&](auto&& f) {
        try {
            return f();
        } catch (const LeftDomain& e) {
            throw NotTrapped(std::string("cone check orbit left the domain: ") + e.what());
        }
    };
    auto normalized = [](JacobiState j) {
        const double n = std::hypot(j.J, j.dJ);
        return std::array<double, 2>{j.J / n, j.dJ / n};
    };
    // unstable direction at z: forward transport from the past
    auto unstable_at = [&](const PhasePoint& z) {
        const PhasePoint past = reversed(flow_step(model, reversed(z), settle, opt));
        return normalized(jacobi_evolve(model, past, {0.0, 1.0}, settle, opt));
    };
    // stable direction at z: backward transport from the future; reversing
    // time flips the sign of J'
    auto stable_at = [&](const PhasePoint& z) {
        const PhasePoint fut = flow_step(model, z, settle, opt);
        const JacobiState jr = jacobi_evolve(model, reversed(fut), {0.0, 1.0}, settle, opt);
        return normalized({jr.J, -jr.dJ});
    };

    ConeReport rep;
    trapped([&] {
        const PhasePoint z = tau > 0.0 ? flow_step(model, y, tau, opt) : y;
        const auto eu = unstable_at(y);
        const auto es = stable_at(y);
        const auto eu2 = unstable_at(z);
        const auto es2 = stable_at(z);
        JacobiState c0{1.0, 0.0}, c1{0.0, 1.0};
        if (tau > 0.0) {
            c0 = jacobi_evolve(model, y, {1.0, 0.0}, tau, opt);
            c1 = jacobi_evolve(model, y, {0.0, 1.0}, tau, opt);
        }
        const double det = eu2[0] * es2[1] - eu2[1] * es2[0];
        rep.unstable = eu;
        rep.stable = es;
        rep.min_factor = std::numeric_limits<double>::infinity();
        rep.max_ratio = 0.0;
        const int n = std::max(fan_size, 2);
        for (int i = 0; i < n; ++i) {
            const double beta = -alpha + 2.0 * alpha * i / (n - 1);
            const double zj = eu[0] + beta * es[0];
            const double zd = eu[1] + beta * es[1];
            const double ij = c0.J * zj + c1.J * zd;
            const double id = c0.dJ * zj + c1.dJ * zd;
            const double a = (ij * es2[1] - id * es2[0]) / det;
            const double b = (eu2[0] * id - eu2[1] * ij) / det;
            rep.max_ratio = std::max(rep.max_ratio, std::abs(b) / std::abs(a));
            rep.min_factor = std::min(rep.min_factor, std::hypot(ij, id) / std::hypot(zj, zd));
        }
        return 0;
    });
    rep.contained = rep.max_ratio <= rho;
    return rep;
}

std::vector<FanSample> equal_mass_fan(const SurfaceModel& model, int n_s, int n_phi) {
    if (n_s < 1 || n_phi < 1) throw DomainError("fan needs n_s, n_phi >= 1");
    std::vector<FanSample> out;
    out.reserve(static_cast<std::size_t>(model.boundary_components() * n_s * n_phi));
    const double period = model.param_period();
    for (int c = 0; c < model.boundary_components(); ++c)
        for (int i = 0; i < n_s; ++i) {
            const BoundaryPoint bp{c, period * (i + 0.5) / n_s};
            const BoundaryData bd = boundary_data(model, bp);
            const SymMat2 g = model.metric().at(bd.point);
            const double ds = bd.speed * period / n_s;
            for (int j = 0; j < n_phi; ++j) {
                const double phi = std::asin(-1.0 + (2.0 * j + 1.0) / n_phi);
                FanSample fs;
                fs.b = bp;
                fs.phi = phi;
                fs.y = {bd.point, g_rotate(g, bd.normal, phi)};
                fs.weight = ds * 2.0 / n_phi;
                out.push_back(fs);
            }
        }
    return out;
}

std::vector<double> trapped_fraction_curve(const SurfaceModel& model, int n_s, int n_phi,
                                           const std::vector<double>& horizons, const FlowOptions& opt) {
    const auto fan = equal_mass_fan(model, n_s, n_phi);
    double t_max = 0.0;
    for (double h : horizons) t_max = std::max(t_max, h);
    std::vector<double> times(fan.size());
    FlowOptions o = opt;
    o.record_trajectory = false;
    parallel_for(fan.size(), [&](std::size_t i) {
        const EscapeResult r = escape(model, fan[i].y, t_max, o);
        times[i] = r.status == EscapeStatus::Trapped ? std::numeric_limits<double>::infinity() : r.time;
    });
    double total = 0.0;
    for (const auto& f : fan) total += f.weight;
    std::vector<double> out;
    for (double h : horizons) {
        double trapped = 0.0;
        for (std::size_t i = 0; i < fan.size(); ++i)
            if (times[i] > h) trapped += fan[i].weight;
        out.push_back(trapped / total);
    }
    return out;
}

double trapped_fraction(const SurfaceModel& model, int n_s, int n_phi, double t_max, const FlowOptions& opt) {
    return trapped_fraction_curve(model, n_s, n_phi, {t_max}, opt).front();
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr, int per_step) {
    const auto old = os.precision(17);
    os << "t,u,v,wu,wv\n";
    for (const auto& [t, y] : tr.samples(per_step))
        os << t << ',' << y.p.x << ',' << y.p.y << ',' << y.w.x << ',' << y.w.y << '\n';
    os.precision(old);
}

std::string escape_json_line(const EscapeResult& r) {
    nlohmann::json j;
    j["status"] = to_string(r.status);
    j["time"] = r.time;
    j["exit"] = {{"u", r.exit.p.x}, {"v", r.exit.p.y}, {"wu", r.exit.w.x}, {"wv", r.exit.w.y}};
    if (r.exited()) {
        j["exit_component"] = r.exit_param.component;
        j["exit_param"] = r.exit_param.param;
        j["exit_angle"] = r.exit_angle;
    }
    return j.dump();
}

}  // namespace geolens
