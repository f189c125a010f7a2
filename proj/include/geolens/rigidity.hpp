#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "geolens/lens.hpp"
#include "geolens/measure.hpp"

namespace geolens {

enum class Relation { Identical, Pullback, Conformal, Unrelated };

std::string to_string(Relation r);

// Two metrics on the same chart. Angles and the sampling measure are taken
// from g1.
struct MetricPair {
    SurfaceModel g1;
    SurfaceModel g2;
    Relation relation = Relation::Unrelated;
    // Pullback: g2 = diffeo^* g1, so the expected reconstruction is its inverse.
    std::shared_ptr<const Diffeo> diffeo;
    // Conformal: g2 = e^{2 omega} g1.
    std::shared_ptr<const ScalarField> omega;
};

// Factories; all throw BoundaryMismatch if the metrics differ on the boundary
// or the charts differ.
MetricPair identical_pair(const SurfaceModel& g);
MetricPair pullback_pair(const SurfaceModel& g1, std::shared_ptr<const Diffeo> psi);
MetricPair conformal_pair(const SurfaceModel& g1, std::shared_ptr<const ScalarField> omega);
MetricPair unrelated_pair(const SurfaceModel& g1, const SurfaceModel& g2);

struct TransferOptions {
    double t_max = 0.0;  // 0: default horizon of g1
    ShootingOptions shooting;
    FlowOptions flow;
};

// g1-geodesic through a phase point, with its endpoints on the cover and the
// g2-geodesic joining them.
struct TransferLine {
    bool valid = false;
    std::string failure;
    BoundaryPoint start;
    BoundaryPoint end;
    double g1_length = 0.0;
    double time_at_base = 0.0;  // arclength from start to the base point
    GeodesicRecord g2;
};

TransferLine transfer_line(const MetricPair& pair, const PhasePoint& y, const TransferOptions& opt = {});

struct AngleSample {
    PhasePoint y;
    double theta = 0.0;
    double theta2 = 0.0;  // transferred angle
    Vec2 x2;              // intersection of the two g2-geodesics
    bool valid = false;
    std::string failure;
};

// The g2-geodesics with the endpoints of the g1-geodesics through y and
// R_theta y meet at x2 with g2-angle theta2. theta = 0 and pi return theta
// unchanged.
AngleSample theta_transfer(const MetricPair& pair, const PhasePoint& y, double theta, const TransferOptions& opt = {});
// Same with the line of y already solved.
AngleSample theta_transfer(const MetricPair& pair, const PhasePoint& y, const TransferLine& base, double theta,
                           const TransferOptions& opt = {});

// Crossing of two solved geodesics: Newton on the dense records from the
// polyline crossing. Throws NoIntersection.
struct Crossing {
    double s = 0.0;  // arclength along a
    double t = 0.0;  // arclength along b
    Vec2 point;
    double angle = 0.0;  // oriented g-angle from a to b at the crossing
};
Crossing intersect_geodesics(const SurfaceModel& model, const GeodesicRecord& a, const GeodesicRecord& b);

struct AngleProbe {
    PhasePoint y;
    double theta = 0.0;
};

struct SymmetryReport {
    double max_residual = 0.0;  // max |theta2(y, t) + theta2(R_t y, pi - t) - pi|
    int valid = 0;
    int invalid = 0;
};
SymmetryReport symmetry_check(const MetricPair& pair, const std::vector<AngleProbe>& samples,
                              const TransferOptions& opt = {});

struct SubadditivityProbe {
    PhasePoint y;
    double theta1 = 0.0;
    double theta2 = 0.0;
};

struct SubadditivityReport {
    double min_residual = 0.0;
    double max_residual = 0.0;
    std::vector<double> residuals;  // NaN for invalid samples
    int valid = 0;
    int invalid = 0;
};

// Max curvature of g over an n x n chart grid of one fundamental domain.
double sampled_max_curvature(const SurfaceModel& g, int n = 24);

// residual = theta2(y, t1 + t2) - theta2(y, t1) - theta2(R_t1 y, t2). Throws
// CurvatureSignViolation if g2 is not negatively curved on the sample grid.
SubadditivityReport subadditivity_check(const MetricPair& pair, const std::vector<SubadditivityProbe>& samples,
                                        const TransferOptions& opt = {});

// Liouville sampling of SM for g1 through the boundary: s uniform in the
// boundary parameter with weight |x'(s)|, phi = asin(2U - 1) (density
// cos phi / 2), t uniform on the chord with weight ell. Random numbers come
// from a counter-based generator keyed by (seed, sample index, stream).
struct SamplingSpec {
    int samples = 2000;
    unsigned long long seed = 1;
    double t_max = 0.0;  // horizon for the chords; 0: default
};

struct LiouvilleSample {
    PhasePoint y;
    double weight = 0.0;  // 0 when the chord is trapped
    bool trapped = false;
};
std::vector<LiouvilleSample> liouville_samples(const SurfaceModel& g1, const SamplingSpec& spec,
                                               const FlowOptions& opt = {});

struct ThetaEstimate {
    double theta = 0.0;
    double Theta = 0.0;
    double std_error = 0.0;
    double invalid_mass = 0.0;  // weighted fraction of trapped or failed samples
    int samples = 0;
};

// Floor on reported standard errors, the angle resolution of one transfer.
inline constexpr double kStderrFloor = 1e-6;

ThetaEstimate average_angle(const MetricPair& pair, double theta, const SamplingSpec& spec,
                            const TransferOptions& opt = {});
// One sample set shared by all angles; the line of each sample is solved once.
std::vector<ThetaEstimate> theta_curve(const MetricPair& pair, const std::vector<double>& thetas,
                                       const SamplingSpec& spec, const TransferOptions& opt = {});

struct ConvexFunction {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> df;
};
// Catalog: "square", "exp", "neg_sin", "linear" (affine, the equality case).
ConvexFunction convex_function(const std::string& name);

struct JensenReport {
    double theta = 0.0;
    double Theta = 0.0;
    double mean_f = 0.0;   // E[f(theta2)]
    double f_Theta = 0.0;  // f(Theta)
    double gap = 0.0;
    double std_error = 0.0;  // delta method
    double invalid_mass = 0.0;
    int samples = 0;
};
JensenReport jensen_gap(const MetricPair& pair, double theta, const ConvexFunction& f, const SamplingSpec& spec,
                        const TransferOptions& opt = {});

struct PsiEstimate {
    Vec2 x;
    Vec2 psi;             // mean of the pairwise crossings
    double spread = 0.0;  // max g2-distance between pairwise crossings
    int crossings = 0;
};

// Probe directions at x: the g1-unit chart direction e_u rotated by k pi / n,
// k < n.
PsiEstimate psi_reconstruct(const MetricPair& pair, Vec2 x, int n_probes = 4, const TransferOptions& opt = {});

struct CertificateReport {
    double max_distance_defect = 0.0;  // max |d2(psi x, psi x') - d1(x, x')|
    double max_spread = 0.0;
    double boundary_drift = 0.0;       // max |psi(x) - x|_g1 at near-boundary points
    int pairs = 0;
};

struct CertificateOptions {
    int n_probes = 4;
    int boundary_samples = 8;
    double boundary_offset = 1e-3;  // chart depth of the near-boundary points
    TransferOptions transfer;
};

CertificateReport isometry_certificate(const MetricPair& pair, const std::vector<std::pair<Vec2, Vec2>>& pairs,
                                       const CertificateOptions& opt = {});

struct CrokeReport {
    double vol1 = 0.0;             // 2 pi Area(g1)
    double vol2 = 0.0;             // 2 pi Area(g2)
    double vol1_lens = 0.0;        // Santalo, f = 1
    double e_omega = 0.0;          // 2 pi int e^omega dA_1
    double e_omega_santalo = 0.0;  // Santalo on g1, f = e^omega
    double holder_defect = 0.0;    // sqrt(vol1 vol2) - e_omega
    // Santalo sum of weight * d_g2(ends) over the g1 chords; equals vol1_lens
    // when the marked distances agree.
    double distance_chain = 0.0;
    double max_distance_discrepancy = 0.0;
    double masked_fraction = 0.0;
    int distance_failures = 0;  // chords whose g2 two-point problem failed
};

struct CrokeOptions {
    int area_grid = 128;
    int n_s = 64;
    int n_phi = 32;
    double t_max = 0.0;
    ShootingOptions shooting;
};

// Requires relation Conformal; throws BoundaryMismatch if omega does not
// vanish on the boundary.
CrokeReport croke_conformal_check(const MetricPair& pair, const CrokeOptions& opt = {});

}  // namespace geolens
