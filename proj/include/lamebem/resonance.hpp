#pragma once

#include "lamebem/asymptotics.hpp"
#include "lamebem/spectral.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace lamebem {

// Real root of k (k^2 - k0^2) = g in (-1/2, 1/2) closest to `near`.
// Throws SpectralInconsistency when there is none.
double cubic_root_near(double g, double k0, double near);

// c0 = c(k*) where k* solves h(k*) = g_n next to the NP eigenvalue n.
double resonant_contrast(const SpectralData& sd, int n);

// Traction on the reference boundary of the field y -> grad F(z) y.
Density constant_gradient_traction(const SurfaceMesh& mesh, const PointForceSource& src, const LameParams& p,
                                   const Vec3& z);

// phi_F = ((K*)^2 + k K* + (k^2 - k0^2) I)[t] for the traction t above.
Density phi_F(const ReferenceShape& B, double k, double k0, const Density& traction);

// Groups of NP eigenvalue indices equal to within `tol` (chained, sorted by value).
std::vector<std::vector<int>> np_clusters(const SpectralData& sd, double tol = 1e-7);

// H-norm of the projection of phi_F onto span{phi_n : n in modes}, relative to
// ||phi_F||_H, with k = the root for modes[0]. For one mode this is
// |(phi_n, phi_F)_H| / ||phi_F||_H.
class ProjectionDiagnostic {
public:
    ProjectionDiagnostic(const ReferenceShape& B, const SpectralData& sd, const HInnerProduct& ip,
                         const PointForceSource& src, const Vec3& z);
    double operator()(const std::vector<int>& modes) const;
    // Single-mode values for each of `modes`, sharing the root of modes[0].
    std::vector<double> each(const std::vector<int>& modes) const;

private:
    const SpectralData& sd_;
    const HInnerProduct& ip_;
    Density t_, Kt_, KKt_;
};

double projection_magnitude(const ReferenceShape& B, const SpectralData& sd, const HInnerProduct& ip, int n,
                            const PointForceSource& src, const Vec3& z);

constexpr double kProjectionThreshold = 1e-6;

struct ModeChoice {
    int index = -1;          // cluster member with the largest single projection
    int multiplicity = 0;
    double np = 0, gb = 0, c0 = 0;
    double isolation = 0;    // distance of g_n to the other clusters
    double projection = 0;   // cluster projection
};

// Candidates are clusters with |k| < 1/2 - margin and projection above the
// threshold; the strongest projection wins, larger |g| breaking ties.
// Index -1 when no cluster qualifies.
ModeChoice select_resonant_mode(const ReferenceShape& B, const SpectralData& sd, const HInnerProduct& ip,
                                const PointForceSource& src, const Vec3& z, double margin = 1e-2);

struct SweepRow {
    double c0 = 0, tau = 0;
    cplx kappa = 0;
    double distance = 0;       // d(h(kappa), spectrum of G_B)
    double p_norm = 0;         // l2 norm over probes of the delta^3 far-field term
    double emt_frobenius = 0;
    double condition = 0;
    double projection = 0;
    std::string flag;          // ok, near_resonance, singular
};

struct SweepResult {
    std::vector<SweepRow> rows;  // descending tau
    std::vector<Vec3> probes;
    double delta = 0;
    Vec3 z = Vec3::Zero();
};

// Rows for c = c0 + i tau. `projection` is copied into every row.
SweepResult sweep(const ReferenceShape& B, const SpectralData& sd, double c0, const std::vector<double>& taus,
                  const BodyFrame& frame, const PointForceSource& src, const std::vector<Vec3>& probes,
                  double projection = 0);

struct Slope {
    double slope = 0, lo = 0, hi = 0;  // 95% interval
    int points = 0;
};

// Least-squares slope of log p_norm against log tau over finite rows.
Slope blowup_exponent(const SweepResult& r);

// Geometric grid from tau_max down to tau_min with `per_decade` points per decade.
std::vector<double> tau_grid(double tau_max, double tau_min, int per_decade = 2);

void write_sweep_csv(std::ostream& out, const SweepResult& r);
// gnuplot script plotting p_norm against tau on log axes from `csv_name`.
void write_sweep_gnuplot(std::ostream& out, const std::string& csv_name);

}  // namespace lamebem
