#include "geolens/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "geolens/quadrature.hpp"

namespace geolens {

namespace {

double comp(const SymMat2& m, int i, int j) {
    if (i == 0 && j == 0) return m.g11;
    if (i == 1 && j == 1) return m.g22;
    return m.g12;
}

double det3(const double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

SymMat2 sym_scale_add(const SymMat2& a, double s, const SymMat2& b) {
    return {a.g11 + s * b.g11, a.g12 + s * b.g12, a.g22 + s * b.g22};
}

}  // namespace

Christoffel christoffel_from_jet(const MetricJet& jet) {
    const SymMat2 inv = jet.g.inverse();
    const SymMat2* d[2] = {&jet.du, &jet.dv};
    // lower[l](i,j) = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
    double lower[2][2][2];
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                lower[l][i][j] = 0.5 * (comp(*d[i], l, j) + comp(*d[j], l, i) - comp(*d[l], i, j));
    Christoffel gamma;
    for (int k = 0; k < 2; ++k) {
        double v[2][2];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) v[i][j] = comp(inv, k, 0) * lower[0][i][j] + comp(inv, k, 1) * lower[1][i][j];
        gamma.upper[static_cast<std::size_t>(k)] = {v[0][0], 0.5 * (v[0][1] + v[1][0]), v[1][1]};
    }
    return gamma;
}

double curvature_from_jet(const MetricJet& jet) {
    const double E = jet.g.g11, F = jet.g.g12, G = jet.g.g22;
    const double Eu = jet.du.g11, Ev = jet.dv.g11;
    const double Fu = jet.du.g12, Fv = jet.dv.g12;
    const double Gu = jet.du.g22, Gv = jet.dv.g22;
    const double Evv = jet.dvv.g11, Fuv = jet.duv.g12, Guu = jet.duu.g22;
    const double a[3][3] = {{-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev},
                            {Fv - 0.5 * Gu, E, F},
                            {0.5 * Gv, F, G}};
    const double b[3][3] = {{0.0, 0.5 * Ev, 0.5 * Gu}, {0.5 * Ev, E, F}, {0.5 * Gu, F, G}};
    const double den = E * G - F * F;
    return (det3(a) - det3(b)) / (den * den);
}

// ---------------------------------------------------------------------------

FiniteDifferenceMetric::FiniteDifferenceMetric(Closure g, double step)
    : g_(std::move(g)), step_(step), step2_(100.0 * step) {
    if (!(step > 0.0)) throw DomainError("finite-difference step must be positive");
}

Christoffel FiniteDifferenceMetric::christoffel(Vec2 p) const {
    const double h = step_;
    MetricJet jet;
    jet.g = g_(p);
    jet.du = (1.0 / (2.0 * h)) * sym_scale_add(g_({p.x + h, p.y}), -1.0, g_({p.x - h, p.y}));
    jet.dv = (1.0 / (2.0 * h)) * sym_scale_add(g_({p.x, p.y + h}), -1.0, g_({p.x, p.y - h}));
    return christoffel_from_jet(jet);
}

double FiniteDifferenceMetric::curvature(Vec2 p) const {
    const double h = step2_;
    const SymMat2 c = g_(p);
    const SymMat2 up = g_({p.x + h, p.y}), um = g_({p.x - h, p.y});
    const SymMat2 vp = g_({p.x, p.y + h}), vm = g_({p.x, p.y - h});
    const SymMat2 pp = g_({p.x + h, p.y + h}), pm = g_({p.x + h, p.y - h});
    const SymMat2 mp = g_({p.x - h, p.y + h}), mm = g_({p.x - h, p.y - h});
    MetricJet jet;
    jet.g = c;
    jet.du = (1.0 / (2.0 * h)) * sym_scale_add(up, -1.0, um);
    jet.dv = (1.0 / (2.0 * h)) * sym_scale_add(vp, -1.0, vm);
    jet.duu = (1.0 / (h * h)) * sym_scale_add(up + um, -2.0, c);
    jet.dvv = (1.0 / (h * h)) * sym_scale_add(vp + vm, -2.0, c);
    jet.duv = (1.0 / (4.0 * h * h)) * sym_scale_add(sym_scale_add(pp, -1.0, pm), -1.0, sym_scale_add(mp, -1.0, mm));
    return curvature_from_jet(jet);
}

// ---------------------------------------------------------------------------

BumpField::BumpField(double amplitude, Vec2 center, double width)
    : amplitude_(amplitude), center_(center), width_(width) {
    if (!(width > 0.0)) throw DomainError("bump width must be positive");
}

double BumpField::value(Vec2 p) const { return (*this)(p.x, p.y); }

ScalarJet BumpField::jet(Vec2 p) const { return scalar_jet(*this, p); }

ConformalMetric::ConformalMetric(std::shared_ptr<const MetricField> base, std::shared_ptr<const ScalarField> omega)
    : base_(std::move(base)), omega_(std::move(omega)) {}

SymMat2 ConformalMetric::at(Vec2 p) const { return std::exp(2.0 * omega_->value(p)) * base_->at(p); }

Christoffel ConformalMetric::christoffel(Vec2 p) const {
    Christoffel gamma = base_->christoffel(p);
    const ScalarJet w = omega_->jet(p);
    if (w.grad.x == 0.0 && w.grad.y == 0.0) return gamma;
    const SymMat2 gb = base_->at(p);
    const Vec2 sharp = gb.inverse().apply(w.grad);
    const double dw[2] = {w.grad.x, w.grad.y};
    for (int k = 0; k < 2; ++k) {
        SymMat2& m = gamma.upper[static_cast<std::size_t>(k)];
        const double s = k == 0 ? sharp.x : sharp.y;
        // delta^k_i w_j + delta^k_j w_i
        m.g11 += (k == 0 ? 2.0 * dw[0] : 0.0) - gb.g11 * s;
        m.g12 += dw[1 - k] - gb.g12 * s;
        m.g22 += (k == 1 ? 2.0 * dw[1] : 0.0) - gb.g22 * s;
    }
    return gamma;
}

double ConformalMetric::curvature(Vec2 p) const {
    const ScalarJet w = omega_->jet(p);
    const double kb = base_->curvature(p);
    if (w.value == 0.0 && w.grad.x == 0.0 && w.grad.y == 0.0 && w.hess.g11 == 0.0 && w.hess.g12 == 0.0 &&
        w.hess.g22 == 0.0)
        return kb;
    const SymMat2 inv = base_->at(p).inverse();
    const Christoffel gb = base_->christoffel(p);
    // Laplace-Beltrami of omega w.r.t. the base metric
    const double h[2][2] = {{w.hess.g11, w.hess.g12}, {w.hess.g12, w.hess.g22}};
    double lap = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            lap += comp(inv, i, j) * (h[i][j] - gb(0, i, j) * w.grad.x - gb(1, i, j) * w.grad.y);
    return std::exp(-2.0 * w.value) * (kb - lap);
}

// ---------------------------------------------------------------------------

SwirlDiffeo::SwirlDiffeo(double amplitude, double radius) : amplitude_(amplitude), radius_(radius) {
    if (!(radius > 0.0)) throw DomainError("swirl radius must be positive");
}

Vec2 SwirlDiffeo::map(Vec2 p) const {
    const auto r = eval(p.x, p.y);
    return {r[0], r[1]};
}

DiffeoJet SwirlDiffeo::jet(Vec2 p) const {
    const ScalarJet a = scalar_jet([this](auto u, auto v) { return eval(u, v)[0]; }, p);
    const ScalarJet b = scalar_jet([this](auto u, auto v) { return eval(u, v)[1]; }, p);
    DiffeoJet j;
    j.value = {a.value, b.value};
    j.jac = {a.grad.x, a.grad.y, b.grad.x, b.grad.y};
    j.hess = {a.hess, b.hess};
    return j;
}

Vec2 SwirlDiffeo::inverse(Vec2 p) const {
    // The rotation angle depends on |x| only, which the map preserves.
    const auto r = eval(p.x, p.y, -1.0);
    return {r[0], r[1]};
}

std::string SwirlDiffeo::describe() const {
    std::ostringstream os;
    os << "swirl{amplitude=" << amplitude_ << ", radius=" << radius_ << "}";
    return os.str();
}

ShiftDiffeo::ShiftDiffeo(double amplitude, Vec2 center, double width, Vec2 direction)
    : bump_(amplitude, center, width), direction_(direction) {
    // beta(q) = exp(1 - 1/(1-q)); sup of |grad| over the support
    double max_grad = 0.0;
    for (int i = 1; i < 2000; ++i) {
        const double r = width * i / 2000.0;
        const Vec2 g = bump_.jet({center.x + r, center.y}).grad;
        max_grad = std::max(max_grad, norm(g));
    }
    if (max_grad * norm(direction) >= 0.9)
        throw DomainError("shift diffeo is not invertible: amplitude * |grad beta| * |direction| >= 0.9");
}

Vec2 ShiftDiffeo::map(Vec2 p) const { return p + bump_.value(p) * direction_; }

DiffeoJet ShiftDiffeo::jet(Vec2 p) const {
    const ScalarJet b = bump_.jet(p);
    DiffeoJet j;
    j.value = p + b.value * direction_;
    j.jac = {1.0 + direction_.x * b.grad.x, direction_.x * b.grad.y, direction_.y * b.grad.x,
             1.0 + direction_.y * b.grad.y};
    j.hess = {direction_.x * b.hess, direction_.y * b.hess};
    return j;
}

Vec2 ShiftDiffeo::inverse(Vec2 p) const {
    Vec2 x = p;
    for (int iter = 0; iter < 60; ++iter) {
        const DiffeoJet j = jet(x);
        const Vec2 r = j.value - p;
        if (norm(r) < 1e-15) break;
        x -= j.jac.inverse().apply(r);
    }
    return x;
}

std::string ShiftDiffeo::describe() const {
    std::ostringstream os;
    os << "shift{amplitude=" << bump_.amplitude() << ", center=(" << bump_.center().x << "," << bump_.center().y
       << "), width=" << bump_.width() << ", direction=(" << direction_.x << "," << direction_.y << ")}";
    return os.str();
}

PullbackMetric::PullbackMetric(std::shared_ptr<const MetricField> base, std::shared_ptr<const Diffeo> diffeo)
    : base_(std::move(base)), diffeo_(std::move(diffeo)) {}

SymMat2 PullbackMetric::at(Vec2 p) const {
    const DiffeoJet j = diffeo_->jet(p);
    const SymMat2 gb = base_->at(j.value);
    const Vec2 c0{j.jac.a, j.jac.c};
    const Vec2 c1{j.jac.b, j.jac.d};
    return {gb.inner(c0, c0), gb.inner(c0, c1), gb.inner(c1, c1)};
}

Christoffel PullbackMetric::christoffel(Vec2 p) const {
    const DiffeoJet j = diffeo_->jet(p);
    const Christoffel gb = base_->christoffel(j.value);
    const Mat2 jinv = j.jac.inverse();
    const Vec2 cols[2] = {{j.jac.a, j.jac.c}, {j.jac.b, j.jac.d}};
    // T^m_ij = H^m_ij + Gamma_b^m(J e_i, J e_j)
    double t[2][2][2];
    for (int i = 0; i < 2; ++i)
        for (int k = i; k < 2; ++k) {
            const Vec2 g = gb.contract(cols[i], cols[k]);
            t[0][i][k] = comp(j.hess[0], i, k) + g.x;
            t[1][i][k] = comp(j.hess[1], i, k) + g.y;
        }
    Christoffel out;
    const double ji[2][2] = {{jinv.a, jinv.b}, {jinv.c, jinv.d}};
    for (int k = 0; k < 2; ++k) {
        auto val = [&](int i, int l) { return ji[k][0] * t[0][i][l] + ji[k][1] * t[1][i][l]; };
        out.upper[static_cast<std::size_t>(k)] = {val(0, 0), val(0, 1), val(1, 1)};
    }
    return out;
}

// ---------------------------------------------------------------------------

SurfaceModel::SurfaceModel(std::string name, Chart chart, std::shared_ptr<const MetricField> metric)
    : name_(std::move(name)), chart_(chart), metric_(std::move(metric)) {
    if (!metric_) throw DomainError("surface model needs a metric");
    if (const auto* d = std::get_if<DiskChart>(&chart_)) {
        if (!(d->radius > 0.0)) throw DomainError("disk radius must be positive");
        double best = 0.0;
        for (int i = 0; i < 8; ++i) {
            const double a = kPi * i / 8.0;
            const Vec2 e{std::cos(a), std::sin(a)};
            best = std::max(best, chart_segment_length(*metric_, -d->radius * e, d->radius * e, 48));
        }
        diameter_ = best;
    } else {
        const auto& s = std::get<StripChart>(chart_);
        if (!(s.upper > s.lower) || !(s.period > 0.0)) throw DomainError("strip chart needs lower < upper, L > 0");
        const double width = chart_segment_length(*metric_, {0.0, s.lower}, {0.0, s.upper}, 48);
        const double lo = chart_segment_length(*metric_, {0.0, s.lower}, {s.period, s.lower}, 48);
        const double hi = chart_segment_length(*metric_, {0.0, s.upper}, {s.period, s.upper}, 48);
        diameter_ = std::max(width, 0.5 * std::max(lo, hi));
    }
}

double SurfaceModel::boundary_function(Vec2 p) const {
    if (const auto* d = std::get_if<DiskChart>(&chart_)) return d->radius - norm(p);
    const auto& s = std::get<StripChart>(chart_);
    return std::min(p.y - s.lower, s.upper - p.y);
}

Vec2 SurfaceModel::boundary_function_gradient(Vec2 p) const {
    if (std::holds_alternative<DiskChart>(chart_)) {
        const double r = norm(p);
        return r > 0.0 ? -1.0 / r * p : Vec2{0.0, 0.0};
    }
    const auto& s = std::get<StripChart>(chart_);
    return (p.y - s.lower) <= (s.upper - p.y) ? Vec2{0.0, 1.0} : Vec2{0.0, -1.0};
}

Vec2 SurfaceModel::boundary_point(BoundaryPoint b) const {
    if (const auto* d = std::get_if<DiskChart>(&chart_)) return {d->radius * std::cos(b.param), d->radius * std::sin(b.param)};
    const auto& s = std::get<StripChart>(chart_);
    return {b.param, b.component == 0 ? s.lower : s.upper};
}

Vec2 SurfaceModel::boundary_velocity(BoundaryPoint b) const {
    if (const auto* d = std::get_if<DiskChart>(&chart_)) return {-d->radius * std::sin(b.param), d->radius * std::cos(b.param)};
    return {b.component == 0 ? 1.0 : -1.0, 0.0};
}

Vec2 SurfaceModel::boundary_acceleration(BoundaryPoint b) const {
    if (const auto* d = std::get_if<DiskChart>(&chart_)) return {-d->radius * std::cos(b.param), -d->radius * std::sin(b.param)};
    return {0.0, 0.0};
}

BoundaryPoint SurfaceModel::locate_boundary(Vec2 p) const {
    if (std::holds_alternative<DiskChart>(chart_)) return {0, wrap_two_pi(std::atan2(p.y, p.x))};
    const auto& s = std::get<StripChart>(chart_);
    return {(p.y - s.lower) <= (s.upper - p.y) ? 0 : 1, p.x};
}

double SurfaceModel::param_period() const {
    if (std::holds_alternative<DiskChart>(chart_)) return 2.0 * kPi;
    return std::get<StripChart>(chart_).period;
}

Vec2 SurfaceModel::deck(Vec2 p, int n) const {
    if (std::holds_alternative<DiskChart>(chart_)) return p;
    return {p.x + n * std::get<StripChart>(chart_).period, p.y};
}

BoundaryPoint SurfaceModel::deck(BoundaryPoint b, int n) const {
    if (std::holds_alternative<DiskChart>(chart_)) return b;
    return {b.component, b.param + n * std::get<StripChart>(chart_).period};
}

double SurfaceModel::chart_diameter() const {
    if (const auto* d = std::get_if<DiskChart>(&chart_)) return 2.0 * d->radius;
    const auto& s = std::get<StripChart>(chart_);
    return std::hypot(s.upper - s.lower, s.period);
}

// ---------------------------------------------------------------------------

SymMat2 metric_at(const SurfaceModel& model, Vec2 p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !model.contains(p, 1e-12 * model.chart_diameter())) {
        std::ostringstream os;
        os << "point (" << p.x << ", " << p.y << ") outside the chart of " << model.name();
        throw DomainError(os.str());
    }
    const SymMat2 g = model.metric().at(p);
    if (!g.positive_definite() || !std::isfinite(g.det())) {
        std::ostringstream os;
        os << "metric of " << model.name() << " is not positive definite at (" << p.x << ", " << p.y << ")";
        throw NotSpd(os.str());
    }
    return g;
}

Christoffel christoffel(const SurfaceModel& model, Vec2 p) {
    metric_at(model, p);
    return model.metric().christoffel(p);
}

double gauss_curvature(const SurfaceModel& model, Vec2 p) {
    metric_at(model, p);
    return model.metric().curvature(p);
}

Vec2 g_normalize(const SymMat2& g, Vec2 w) { return (1.0 / g.norm(w)) * w; }

Vec2 g_quarter_turn(const SymMat2& g, Vec2 w) {
    const double s = 1.0 / std::sqrt(g.det());
    return {s * (-g.g12 * w.x - g.g22 * w.y), s * (g.g11 * w.x + g.g12 * w.y)};
}

Vec2 g_rotate(const SymMat2& g, Vec2 w, double theta) {
    return std::cos(theta) * w + std::sin(theta) * g_quarter_turn(g, w);
}

double g_oriented_angle(const SymMat2& g, Vec2 a, Vec2 b) {
    return std::atan2(std::sqrt(g.det()) * cross(a, b), g.inner(a, b));
}

Vec2 rotate(const SurfaceModel& model, Vec2 p, Vec2 w, double theta) {
    const SymMat2 g = metric_at(model, p);
    const double n = g.norm(w);
    if (std::abs(n - 1.0) > kUnitTolerance) {
        std::ostringstream os;
        os << "tangent vector has g-norm " << n;
        throw NotUnit(os.str());
    }
    return g_rotate(g, w, theta);
}

BoundaryData boundary_data(const SurfaceModel& model, BoundaryPoint b) {
    BoundaryData out;
    out.point = model.boundary_point(b);
    const Vec2 vel = model.boundary_velocity(b);
    const Vec2 acc = model.boundary_acceleration(b);
    const MetricField& m = model.metric();
    const SymMat2 g = m.at(out.point);
    out.speed = g.norm(vel);
    out.tangent = (1.0 / out.speed) * vel;
    out.normal = g_quarter_turn(g, out.tangent);
    const Vec2 cov = acc + m.christoffel(out.point).contract(vel, vel);
    out.curvature = g.inner(cov, out.normal) / (out.speed * out.speed);
    return out;
}

double boundary_convexity_check(const SurfaceModel& model, int n_samples) {
    if (n_samples < 8) throw DomainError("boundary_convexity_check needs at least 8 samples");
    double kmin = std::numeric_limits<double>::infinity();
    for (int c = 0; c < model.boundary_components(); ++c)
        for (int i = 0; i < n_samples; ++i) {
            const double s = model.param_period() * i / n_samples;
            kmin = std::min(kmin, boundary_data(model, {c, s}).curvature);
        }
    return kmin;
}

double chart_segment_length(const MetricField& metric, Vec2 a, Vec2 b, int nodes) {
    const QuadratureRule rule = gauss_legendre(nodes, 0.0, 1.0);
    const Vec2 d = b - a;
    double len = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) len += rule.weights[i] * metric.at(a + rule.nodes[i] * d).norm(d);
    return len;
}

}  // namespace geolens
