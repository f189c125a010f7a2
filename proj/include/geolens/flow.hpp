#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geolens/integrator.hpp"
#include "geolens/metric.hpp"

namespace geolens {

// Point of the unit tangent bundle: base point and g-unit vector.
struct PhasePoint {
    Vec2 p;
    Vec2 w;
};

inline PhasePoint reversed(const PhasePoint& y) { return {y.p, -y.w}; }

struct FlowOptions {
    double rtol = 1e-9;
    double atol = 1e-11;
    double h_max = 0.0;          // 0: 0.25 * diameter
    double event_tol = 1e-10;    // boundary crossing time tolerance
    double tangent_tol = 1e-6;   // |g(w, nu)| below this flags a grazing exit
    bool record_trajectory = false;
};

// Dense geodesic trajectory on [0, t_end]; state = (u, v, wu, wv).
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(std::vector<DenseStep<4>> steps, double t_end) : steps_(std::move(steps)), t_end_(t_end) {}

    double t_end() const { return t_end_; }
    const std::vector<DenseStep<4>>& steps() const { return steps_; }
    bool empty() const { return steps_.empty(); }
    PhasePoint at(double t) const;
    // Step endpoints plus `per_step - 1` interior points per step.
    std::vector<std::pair<double, PhasePoint>> samples(int per_step = 1) const;

private:
    std::vector<DenseStep<4>> steps_;
    double t_end_ = 0.0;
};

enum class EscapeStatus { Exited, Tangential, Trapped };

std::string to_string(EscapeStatus s);

struct EscapeResult {
    EscapeStatus status = EscapeStatus::Trapped;
    double time = 0.0;          // exit time, or the horizon when trapped
    PhasePoint exit{};          // valid unless trapped
    BoundaryPoint exit_param{};  // boundary parameter of the exit point
    // Angle in (0, pi) from the boundary tangent, measured clockwise, so a
    // chord leaves with the same angle it entered with in the flat disk.
    double exit_angle = 0.0;
    std::optional<Trajectory> trajectory;

    bool exited() const { return status != EscapeStatus::Trapped; }
};

struct JacobiState {
    double J = 0.0;
    double dJ = 0.0;
};

// Geodesic flow for time t >= 0. Throws LeftDomain if the orbit reaches the
// boundary first.
PhasePoint flow_step(const SurfaceModel& model, const PhasePoint& y, double t, const FlowOptions& opt = {});

// Forward flow until the boundary or the horizon t_max (t_max <= 0 selects
// 20 * diameter). A start on the boundary counts as inside.
EscapeResult escape(const SurfaceModel& model, const PhasePoint& y, double t_max, const FlowOptions& opt = {});

// escape() restricted to inward-pointing boundary vectors.
EscapeResult scattering(const SurfaceModel& model, const PhasePoint& y, double t_max, const FlowOptions& opt = {});

// Inward unit vector at a boundary point with angle theta in (0, pi) from the
// positively oriented tangent.
PhasePoint boundary_vector(const SurfaceModel& model, BoundaryPoint b, double theta);
// Angle of w from the boundary tangent at b (counterclockwise, (-pi, pi]).
double boundary_angle(const SurfaceModel& model, BoundaryPoint b, Vec2 w);

// Scalar normal Jacobi field J'' + K J = 0 along the geodesic of y.
JacobiState jacobi_evolve(const SurfaceModel& model, const PhasePoint& y, JacobiState j0, double t,
                          const FlowOptions& opt = {});

struct JacobiFlowResult {
    PhasePoint y;
    JacobiState j;
};
// Flow and Jacobi field together; throws LeftDomain like flow_step.
JacobiFlowResult flow_with_jacobi(const SurfaceModel& model, const PhasePoint& y, JacobiState j0, double t,
                                  const FlowOptions& opt = {});
// Same, but ignores the boundary (the metric must be defined beyond it).
JacobiFlowResult flow_with_jacobi_unbounded(const SurfaceModel& model, const PhasePoint& y, JacobiState j0, double t,
                                            const FlowOptions& opt = {});

// First zero in (0, T] of the Jacobi field with J(0) = 0, J'(0) = 1, scanning
// until the orbit leaves the domain or T is reached.
std::optional<double> conjugate_scan(const SurfaceModel& model, const PhasePoint& y, double T,
                                     const FlowOptions& opt = {});

// log(|(J, J')(T)| / |(J, J')(0)|) / T. Throws NotTrapped if the orbit exits
// before T.
double lyapunov_estimate(const SurfaceModel& model, const PhasePoint& y, double T, JacobiState j0 = {0.0, 1.0},
                         const FlowOptions& opt = {});

struct ConeReport {
    bool contained = false;
    double min_factor = 0.0;
    double max_ratio = 0.0;       // max |b| / |a| of the images in the target basis
    std::array<double, 2> unstable{};  // (J, J') direction at y
    std::array<double, 2> stable{};
};

// Transports the alpha-cone around the numeric unstable Jacobi direction for
// time tau and reports containment in the rho-cone at the image point. The
// unstable/stable directions come from transporting over `settle` time units
// from the past/future, which must also stay trapped.
ConeReport cone_expansion_check(const SurfaceModel& model, const PhasePoint& y, double tau, double alpha, double rho,
                                double settle = 8.0, int fan_size = 17, const FlowOptions& opt = {});

// Inward boundary directions with equal mu_{g,nu}-mass: n_s boundary nodes
// per component (equal length) times n_phi angle nodes (equal cos-mass).
struct FanSample {
    PhasePoint y;
    BoundaryPoint b;
    double phi = 0.0;  // angle from the inward normal, (-pi/2, pi/2)
    double weight = 0.0;
};
std::vector<FanSample> equal_mass_fan(const SurfaceModel& model, int n_s, int n_phi);

// Mass fraction of the fan still inside at t_max.
double trapped_fraction(const SurfaceModel& model, int n_s, int n_phi, double t_max, const FlowOptions& opt = {});
// Same sample set evaluated at several horizons from one integration each.
std::vector<double> trapped_fraction_curve(const SurfaceModel& model, int n_s, int n_phi,
                                           const std::vector<double>& horizons, const FlowOptions& opt = {});

// Export helpers.
void write_trajectory_csv(std::ostream& os, const Trajectory& tr, int per_step = 4);
std::string escape_json_line(const EscapeResult& r);

double default_horizon(const SurfaceModel& model);

}  // namespace geolens
