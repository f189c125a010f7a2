#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "geolens/flow.hpp"

namespace geolens {

// Deck-translation count; always 0 on disks.
struct HomotopyClass {
    int winding = 0;
};

enum class GeodesicSolver { Shooting, Shortening };

struct GeodesicRecord {
    Vec2 start;
    Vec2 end;  // on the cover: the lift selected by the class
    std::optional<BoundaryPoint> start_param;
    std::optional<BoundaryPoint> end_param;
    HomotopyClass cls;
    double length = 0.0;
    std::vector<double> times;           // arclength of each sample
    std::vector<PhasePoint> samples;     // polyline of the geodesic
    std::optional<Trajectory> trajectory;  // dense output when shot
    GeodesicSolver solver = GeodesicSolver::Shooting;
    double entry_angle = 0.0;  // shooting: angle from the boundary tangent
    double residual = 0.0;     // shooting: endpoint mismatch; shortening: max corner angle
    int iterations = 0;
};

struct LensRow {
    BoundaryPoint b;
    double theta = 0.0;
    EscapeStatus flag = EscapeStatus::Trapped;
    double ell = 0.0;
    BoundaryPoint exit;
    double theta_exit = 0.0;
};

// One scattering computation per (boundary node, angle) pair, rows ordered by
// node then angle.
std::vector<LensRow> shoot_table(const SurfaceModel& model, const std::vector<BoundaryPoint>& nodes,
                                 const std::vector<double>& thetas, double t_max = 0.0, const FlowOptions& opt = {});

// CSV with header s,theta,ell,s_exit,theta_exit,flag (plus the components on
// annuli).
void write_lens_csv(std::ostream& os, const SurfaceModel& model, const std::vector<LensRow>& rows);

struct ShootingOptions {
    int grid = 512;                // bracketing scan when no guess is given
    std::optional<double> guess;   // entry angle to start from
    double tol = 1e-12;            // in the exit parameter
    int max_iterations = 200;
    double t_max = 0.0;            // 0: default horizon
    bool fallback = true;          // curve shortening if shooting fails
    FlowOptions flow;
};

struct ShorteningOptions {
    double cap_fraction = 0.2;   // segment cap as a fraction of the diameter
    double energy_tol = 1e-12;   // relative energy decrease to stop
    int max_sweeps = 5000;
    int samples_per_segment = 8;
    FlowOptions flow{.rtol = 1e-12, .atol = 1e-14};
};

// Boundary point of the cover at which the class-n geodesic from a to b ends.
BoundaryPoint lift_target(const SurfaceModel& model, BoundaryPoint b, HomotopyClass cls);

// Marked boundary distance by shooting on the cover (curve shortening as the
// fallback). Throws NoBracket if the target sits inside the trapped wedge at
// the horizon, SolverDiverged if both solvers fail.
GeodesicRecord boundary_distance(const SurfaceModel& model, BoundaryPoint a, BoundaryPoint b, HomotopyClass cls,
                                 const ShootingOptions& opt = {});

// Shooting only; never falls back.
GeodesicRecord shoot_boundary_geodesic(const SurfaceModel& model, BoundaryPoint a, BoundaryPoint b,
                                       HomotopyClass cls, const ShootingOptions& opt = {});

struct BrokenGeodesic {
    std::vector<Vec2> nodes;  // chart points on the cover; endpoints fixed
};

// Energy k * sum L_i^2 of a broken geodesic with k segments.
double broken_energy(const std::vector<double>& segment_lengths);

// Birkhoff curve shortening. The energy history is recorded in `energies`
// when given. Throws StalledAtBoundary if a node leaves the domain.
GeodesicRecord curve_shorten(const SurfaceModel& model, const BrokenGeodesic& initial,
                             const ShorteningOptions& opt = {}, std::vector<double>* energies = nullptr);

// Shortening from the straight chart polyline joining x to the class lift of x'.
GeodesicRecord interior_distance(const SurfaceModel& model, Vec2 x, Vec2 x2, HomotopyClass cls,
                                 const ShorteningOptions& opt = {});

struct LocalGeodesic {
    Vec2 w;  // unit initial direction at the start
    double length = 0.0;
};
// Two-point geodesic between nearby points by Newton on (direction, length)
// with the Jacobian taken from a Jacobi field.
LocalGeodesic local_geodesic(const SurfaceModel& model, Vec2 x, Vec2 x2, std::optional<LocalGeodesic> guess = {},
                             const FlowOptions& opt = {});

// Point of a solved geodesic at arclength t (dense output when shot, unit-speed
// Hermite interpolation of the samples otherwise).
PhasePoint record_at(const SurfaceModel& model, const GeodesicRecord& record, double t);

// g-length of a chart polyline (two-point Gauss rule per segment).
double polyline_length(const SurfaceModel& model, const std::vector<Vec2>& points);

// Minimum of (perturbed length - geodesic length) over n random smooth
// fixed-endpoint perturbations of relative size `amplitude`.
double homotopic_perturbation_margin(const SurfaceModel& model, const GeodesicRecord& record, int n, double amplitude,
                                     unsigned long long seed);

struct BoundaryPair {
    BoundaryPoint a;
    BoundaryPoint b;
    HomotopyClass cls;
};

struct LensDistanceReport {
    double max_distance_discrepancy = 0.0;
    double max_exit_param_discrepancy = 0.0;
    double max_exit_angle_discrepancy = 0.0;
    int samples = 0;
};

// Compares marked boundary distances and scattering data of two models on the
// same chart. Throws BoundaryMismatch if the metrics differ on the boundary.
LensDistanceReport lens_vs_distance_check(const SurfaceModel& g1, const SurfaceModel& g2,
                                          const std::vector<BoundaryPair>& pairs, const ShootingOptions& opt = {});

// Max relative difference of the metric tensors at n boundary samples.
double boundary_metric_mismatch(const SurfaceModel& g1, const SurfaceModel& g2, int n = 64);

}  // namespace geolens
