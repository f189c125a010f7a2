#pragma once

// Dormand-Prince 5(4) with the continuous extension of Hairer, Norsett and
// Wanner (DOPRI5 / CONTD5), which is 4th-order accurate inside each step.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "geolens/core.hpp"

namespace geolens {

template <std::size_t N>
using OdeState = std::array<double, N>;

template <std::size_t N>
struct DenseStep {
    double t0 = 0.0;
    double h = 0.0;
    std::array<OdeState<N>, 5> r{};

    double t1() const { return t0 + h; }

    OdeState<N> at(double t) const {
        const double th = h != 0.0 ? (t - t0) / h : 0.0;
        const double th1 = 1.0 - th;
        OdeState<N> y;
        for (std::size_t i = 0; i < N; ++i)
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        return y;
    }
};

struct IntegratorOptions {
    double rtol = 1e-9;
    double atol = 1e-11;
    double h_max = 1.0;
    double h_init = 0.0;  // 0: automatic
    int max_rejections = 200;
};

// Rhs: void(const OdeState<N>& y, OdeState<N>& dydt). Autonomous systems only.
template <std::size_t N, class Rhs>
class DormandPrince {
public:
    DormandPrince(Rhs rhs, IntegratorOptions opt) : rhs_(std::move(rhs)), opt_(opt) {}

    void reset(double t, const OdeState<N>& y) {
        t_ = t;
        y_ = y;
        rhs_(y_, k1_);
        h_ = opt_.h_init > 0.0 ? opt_.h_init : initial_step();
        h_ = std::min(h_, opt_.h_max);
    }

    double t() const { return t_; }
    const OdeState<N>& y() const { return y_; }
    const OdeState<N>& derivative() const { return k1_; }
    double suggested_step() const { return h_; }
    void limit_next_step(double h) { h_ = std::min(h_, h); }

    // Overwrite the current state and its derivative (used after projecting
    // the state back onto an invariant manifold).
    void replace_state(const OdeState<N>& y, const OdeState<N>& dydt) {
        y_ = y;
        k1_ = dydt;
    }

    // Take one accepted step, not past t_limit. Returns the dense output of
    // the step just taken.
    const DenseStep<N>& step(double t_limit) {
        int rejections = 0;
        for (;;) {
            double h = std::min({h_, opt_.h_max, t_limit - t_});
            if (!(h > 0.0)) throw SolverDiverged("integrator asked to step with non-positive length");
            const bool last = h >= t_limit - t_;
            OdeState<N> y1, err;
            stages(h, y1, err);
            double e = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y_[i]), std::abs(y1[i]));
                const double q = err[i] / sc;
                e += q * q;
            }
            e = std::sqrt(e / static_cast<double>(N));
            if (!std::isfinite(e)) e = 1e10;
            if (e <= 1.0) {
                dense_.t0 = t_;
                dense_.h = h;
                build_dense(h, y1);
                t_ = last ? t_limit : t_ + h;
                y_ = y1;
                k1_ = k7_;
                const double fac = e > 0.0 ? std::clamp(0.9 * std::pow(e, -0.2), 0.2, 10.0) : 10.0;
                // a step shortened to hit t_limit says little about the next one
                const double proposal = h * fac;
                h_ = (last && h < h_) ? std::max(h_, proposal) : proposal;
                return dense_;
            }
            h_ = h * std::max(0.2, 0.9 * std::pow(e, -0.2));
            if (++rejections > opt_.max_rejections || h_ < 1e-14 * std::max(1.0, std::abs(t_)))
                throw SolverDiverged("step size underflow in Dormand-Prince integrator");
        }
    }

private:
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    void stages(double h, OdeState<N>& y1, OdeState<N>& err) {
        OdeState<N> tmp;
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y_[i] + h * a21 * k1_[i];
        rhs_(tmp, k2_);
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
        rhs_(tmp, k3_);
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
        rhs_(tmp, k4_);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
        rhs_(tmp, k5_);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i]);
        rhs_(tmp, k6_);
        for (std::size_t i = 0; i < N; ++i)
            y1[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]);
        rhs_(y1, k7_);
        for (std::size_t i = 0; i < N; ++i)
            err[i] = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] + e7 * k7_[i]);
    }

    void build_dense(double h, const OdeState<N>& y1) {
        for (std::size_t i = 0; i < N; ++i) {
            const double dy = y1[i] - y_[i];
            const double bspl = h * k1_[i] - dy;
            dense_.r[0][i] = y_[i];
            dense_.r[1][i] = dy;
            dense_.r[2][i] = bspl;
            dense_.r[3][i] = dy - h * k7_[i] - bspl;
            dense_.r[4][i] = h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] + d6 * k6_[i] + d7 * k7_[i]);
        }
    }

    double initial_step() {
        double d0 = 0.0, d1n = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = opt_.atol + opt_.rtol * std::abs(y_[i]);
            d0 += (y_[i] / sc) * (y_[i] / sc);
            d1n += (k1_[i] / sc) * (k1_[i] / sc);
        }
        d0 = std::sqrt(d0 / N);
        d1n = std::sqrt(d1n / N);
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        h0 = std::min(h0, opt_.h_max);
        OdeState<N> y1, f1;
        for (std::size_t i = 0; i < N; ++i) y1[i] = y_[i] + h0 * k1_[i];
        rhs_(y1, f1);
        double d2 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = opt_.atol + opt_.rtol * std::abs(y_[i]);
            d2 += ((f1[i] - k1_[i]) / sc) * ((f1[i] - k1_[i]) / sc);
        }
        d2 = std::sqrt(d2 / N) / h0;
        const double dm = std::max(d1n, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        return std::min(100.0 * h0, h1);
    }

    Rhs rhs_;
    IntegratorOptions opt_;
    double t_ = 0.0;
    double h_ = 0.0;
    OdeState<N> y_{}, k1_{}, k2_{}, k3_{}, k4_{}, k5_{}, k6_{}, k7_{};
    DenseStep<N> dense_;
};

}  // namespace geolens
