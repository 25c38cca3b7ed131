#pragma once

#include "lamebem/operators.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lamebem {

struct PointForceSource {
    std::vector<Vec3> locations;
    std::vector<Vec3c> amplitudes;
    double omega = 1.0;
};

// Checks sizes, omega > 0, and that every location lies outside the closed
// domain by more than twice the local mesh size.
void validate_source(const PointForceSource& src, const SurfaceMesh& mesh);

struct TransmissionProblem {
    MeshPtr mesh;
    cplx contrast = 1.0;
    LameParams params;
    double omega = 1.0;  // background frequency omega_2

    cplx omega1() const { return omega * omega1_factor(contrast); }
    // Throws InvalidParameter for Im c < 0, c = 0, non-finite c or omega <= 0.
    void validate() const;
};

// Displacement and its first derivatives: gradient[l] = d/dx_l F.
struct FieldValue {
    Vec3c value = Vec3c::Zero();
    std::array<Vec3c, 3> gradient{Vec3c::Zero(), Vec3c::Zero(), Vec3c::Zero()};
};

// F(x) = sum_i Gamma^omega(x - y_i) q_i. derivative_order 0 or 1.
std::vector<FieldValue> source_field(const PointForceSource& src, const LameParams& p,
                                     const std::vector<Vec3>& targets, int derivative_order = 0);
// d^alpha F(x) for |alpha| <= 2.
Vec3c source_derivative(const PointForceSource& src, const LameParams& p, const Vec3& x, const MultiIndex& alpha);
// Traction of a displacement with known gradient.
Vec3c traction_of(const std::array<Vec3c, 3>& gradient, const Vec3& nu, const LameParams& p);

// Boundary data (F, dF/dnu) at element centroids.
Density source_trace(const SurfaceMesh& mesh, const PointForceSource& src, const LameParams& p);
Density source_normal_trace(const SurfaceMesh& mesh, const PointForceSource& src, const LameParams& p);

inline constexpr double kResonanceConditionThreshold = 1e12;

struct TransmissionSolution {
    Density phi, psi;
    double condition = 0;  // 1-norm condition estimate of the block matrix
    double residual = 0;   // ||A x - b|| / ||b||
    std::optional<std::string> warning;
};

// Holds the static operators and the background-frequency operators so that
// several contrasts can be solved on one mesh.
class TransmissionSolver {
public:
    TransmissionSolver(MeshPtr mesh, const LameParams& p, double omega);

    TransmissionSolution solve(cplx contrast, const PointForceSource& src) const;
    TransmissionSolution solve(cplx contrast, const Density& F, const Density& dF) const;

    const MeshPtr& mesh() const { return mesh_; }
    double omega() const { return omega_; }
    const LameParams& params() const { return p_; }

private:
    MeshPtr mesh_;
    LameParams p_;
    double omega_;
    Eigen::MatrixXd S0_, K0_;
    Eigen::MatrixXcd S2_, K2_;
};

TransmissionSolution solve_transmission(const TransmissionProblem& prob, const PointForceSource& src);

// u = S^{omega_1}[phi] inside, S^{omega_2}[psi] + F outside.
struct SolutionValue {
    Vec3 target;
    Vec3c u;
    bool interior;
};
std::vector<SolutionValue> evaluate_solution(const TransmissionProblem& prob, const TransmissionSolution& sol,
                                             const PointForceSource& src, const std::vector<Vec3>& targets);

// A posteriori check of the transmission conditions on the given elements:
// both representations are evaluated at centroid +- t h nu (t = 0.1, 0.05),
// extrapolated to the surface, and compared. Returns the relative mismatch
// of displacement and of (scaled) traction.
struct TransmissionMismatch {
    double displacement = 0;
    double traction = 0;
};
TransmissionMismatch transmission_mismatch(const TransmissionProblem& prob, const TransmissionSolution& sol,
                                           const PointForceSource& src, const std::vector<int>& elements);

// JSON array of {target, u_re, u_im, branch}.
void write_solution_json(std::ostream& out, const std::vector<SolutionValue>& values);

}  // namespace lamebem
