#pragma once

#include <functional>
#include <vector>

#include "geolens/lens.hpp"

namespace geolens {

// Nodes (s_i, phi_j) on the inward boundary directions. s is the periodic
// trapezoid rule per component, phi is Gauss-Legendre on (-pi/2, pi/2); the
// weight is |x'(s)|_g ds * cos(phi) dphi, the measure mu_{g,nu}.
struct FanNode {
    BoundaryPoint b;
    double phi = 0.0;     // angle from the inward normal
    double weight = 0.0;
    EscapeStatus status = EscapeStatus::Trapped;
    double ell = 0.0;
    BoundaryPoint exit;
};

struct BoundaryFanGrid {
    int n_s = 0;
    int n_phi = 0;
    double t_max = 0.0;
    std::vector<FanNode> nodes;

    double total_weight() const;
    // mu-mass fraction of Trapped nodes.
    double masked_fraction() const;
};

// Builds the grid and runs one escape per node.
BoundaryFanGrid make_fan_grid(const SurfaceModel& model, int n_s = 256, int n_phi = 256, double t_max = 0.0,
                              const FlowOptions& opt = {});

struct SantaloResult {
    double value = 0.0;
    double masked_fraction = 0.0;
};

// Sum over nodes of weight * int_0^ell f(phi_t(x, v)) dt, with a 4-point
// Gauss rule on every integrator step. Trapped nodes are skipped.
SantaloResult santalo_integrate(const SurfaceModel& model, const std::function<double(const PhasePoint&)>& f,
                                const BoundaryFanGrid& grid, const FlowOptions& opt = {});

// int f dA_g over the chart (one fundamental domain): Gauss-Legendre in the
// radius or v, trapezoid in the angle or u.
double area_integral(const SurfaceModel& model, const std::function<double(Vec2)>& f, int n = 128);
// 2*pi * area.
double area_quadrature(const SurfaceModel& model, int n = 128);

struct VolumeReport {
    double lens_value = 0.0;    // sum of weight * ell
    double direct_value = 0.0;  // 2*pi * area
    double defect = 0.0;        // |lens - direct|
    double masked_fraction = 0.0;
};
VolumeReport volume_via_lens(const SurfaceModel& model, const BoundaryFanGrid& grid);

// ---------------------------------------------------------------------------
// Regions of the space of geodesics of the cover, given by the start and end
// points of the geodesics.

// Arc of the boundary of the cover. Disk: param from lo to hi counterclockwise
// (hi - lo <= 2 pi). Strip: u in [lo, hi] on the component.
struct BoundaryInterval {
    int component = 0;
    double lo = 0.0;
    double hi = 0.0;
};

// Geodesics starting in one of `starts` and ending in the positively
// oriented arc of ends from f0 to f1.
struct MeasureRegion {
    std::vector<BoundaryInterval> starts;
    BoundaryPoint f0;
    BoundaryPoint f1;
};

// The region G_{E,F}.
MeasureRegion region_between(const SurfaceModel& model, const BoundaryInterval& E, const BoundaryInterval& F);

// True if q lies strictly inside the positively oriented arc of ends from p
// to r of the cover (the circle of ends of a strip is component 0 with u
// increasing followed by component 1 with u decreasing).
bool arc_contains(const SurfaceModel& model, BoundaryPoint p, BoundaryPoint q, BoundaryPoint r);

// Positively oriented arc from p to q as boundary intervals; infinite ends
// on the strip are cut to [center - half_window, center + half_window].
std::vector<BoundaryInterval> arc_between(const SurfaceModel& model, BoundaryPoint p, BoundaryPoint q,
                                          double center = 0.0, double half_window = 0.0);

struct EtaOptions {
    int nodes_per_piece = 24;  // Gauss-Legendre nodes per piece of a start interval
    double piece = 0.5;        // maximal piece length as a fraction of the period
    ShootingOptions shooting;
};

// eta of the region. For a start y, the directions ending in the target arc
// form a single angle interval (monotone exits on the cover), located by
// shooting at the arc's corners; the cos-weight integrates exactly over it.
// The start intervals are integrated with Gauss-Legendre, split at f0, f1.
double eta_measure(const SurfaceModel& model, const MeasureRegion& region, const EtaOptions& opt = {});

// Indicator quadrature of the same quantity on a precomputed fan grid; on a
// strip every node is tried on the lifts |n| <= n_max.
double eta_measure_grid(const SurfaceModel& model, const MeasureRegion& region, const BoundaryFanGrid& grid,
                        int n_max = 5);

struct IntersectionReport {
    double eta = 0.0;
    double twice_length = 0.0;
    double defect = 0.0;             // |eta - 2 length|
    double truncation_residual = 0.0;  // eta carried by the outermost lift on each side
};

// eta(F(x, x')) for the geodesic of the record: geodesics crossing it
// positively. Boundary records use the arc test of ends (exact on the cover);
// interior records on disks use crossings of polylines on the fan grid.
IntersectionReport intersection_number(const SurfaceModel& model, const GeodesicRecord& record, int n_max = 5,
                                       const EtaOptions& opt = {});
IntersectionReport intersection_number_grid(const SurfaceModel& model, const GeodesicRecord& record,
                                            const BoundaryFanGrid& grid);

struct FanChartReport {
    double l1_defect = 0.0;   // sum |eta_box - sin box| / sum sin box
    double max_defect = 0.0;  // max relative box defect
    double total_eta = 0.0;
    double total_expected = 0.0;
    int boxes = 0;
    int invalid = 0;          // boxes with a trapped or grazing corner
};

// Pushforward check for phi(tau, theta): the boundary of each (tau, theta) box
// is mapped through edge_points points per edge to boundary coordinates
// (arclength, sin phi), where eta is the Euclidean area of the image polygon;
// compared against the integral of sin(theta) over the box.
FanChartReport fan_chart_check(const SurfaceModel& model, const GeodesicRecord& record, int n_tau, int n_theta,
                               int edge_points = 4, const FlowOptions& opt = {});

struct DouadyReport {
    double four_corner = 0.0;
    double direct = 0.0;
    double defect = 0.0;  // |four_corner - direct|
};

// E = [x1, x2], F = [x3, x4] with the corners in positive cyclic order.
// Throws BadCornerOrder otherwise.
DouadyReport douady_reconstruct(const SurfaceModel& model, BoundaryPoint x1, BoundaryPoint x2, BoundaryPoint x3,
                                BoundaryPoint x4, const EtaOptions& opt = {});

struct DyadicReport {
    std::vector<double> by_depth;  // partial sums after each depth 0..d_max
    double direct = 0.0;
};
// eta(G_{E,E}) for E = [a, b] by dyadic splitting: every split at m adds
// 2 (d(a, m) + d(m, b) - d(a, b)).
DyadicReport dyadic_reconstruct(const SurfaceModel& model, BoundaryPoint a, BoundaryPoint b, int depth,
                                const EtaOptions& opt = {});

}  // namespace geolens
