#pragma once

#include "lamebem/transmission.hpp"

#include <Eigen/LU>

#include <array>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <vector>

namespace lamebem {

// kappa_c = (c + 1) / (2 (c - 1)) and its inverse c = (2 kappa + 1) / (2 kappa - 1).
cplx kappa_of_c(cplx c);
cplx c_of_kappa(cplx kappa);

// LU of (K* - kappa I) for one kappa.
class NpResolvent {
public:
    NpResolvent(const Eigen::MatrixXd& Kstar, cplx kappa);
    Density solve(const Density& rhs) const;
    cplx kappa() const { return kappa_; }
    double condition() const { return condition_; }
    bool near_resonance() const { return condition_ > kResonanceConditionThreshold; }

private:
    cplx kappa_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
    double condition_;
};

// Static operators of the reference shape B (centered at its own origin).
class ReferenceShape {
public:
    ReferenceShape(MeshPtr mesh, const LameParams& p);
    // From precomputed static S and K* (e.g. read from archives).
    ReferenceShape(MeshPtr mesh, const LameParams& p, Eigen::MatrixXd S, Eigen::MatrixXd Kstar);

    const MeshPtr& mesh() const { return mesh_; }
    const LameParams& params() const { return p_; }
    const Eigen::MatrixXd& S() const { return S_; }
    const Eigen::MatrixXd& Kstar() const { return Ks_; }
    // Assembled on first use.
    const Eigen::MatrixXd& PB() const;
    const Eigen::MatrixXd& IB() const;
    double volume() const { return volume_; }
    double radius() const { return radius_; }

    Density solve_S(const Density& f) const;
    // (-I/2 + K*) S^-1 [f]
    Density interior_np_of_S_inverse(const Density& f) const;
    // Resolvent of K* at kappa; the last one is kept.
    std::shared_ptr<const NpResolvent> resolvent(cplx kappa) const;

private:
    MeshPtr mesh_;
    LameParams p_;
    void init();

    Eigen::MatrixXd S_, Ks_;
    mutable Eigen::MatrixXd PB_, IB_;
    mutable std::once_flag volume_ops_;
    Eigen::PartialPivLU<Eigen::MatrixXd> S_lu_;
    double volume_, radius_;
    mutable std::mutex mutex_;
    mutable std::shared_ptr<const NpResolvent> last_;
};

// Centroid samples of y^beta a, and the traction of that polynomial field.
Density polynomial_trace(const SurfaceMesh& mesh, const MultiIndex& beta, const Vec3c& a);
Density polynomial_traction(const SurfaceMesh& mesh, const MultiIndex& beta, const Vec3c& a, const LameParams& p);

// psi_{beta,0} = (K* - kappa I)^-1 [d_nu(y^beta dF) - c (-I/2 + K*) S^-1 [y^beta dF]] / (c - 1)
// with dF = d^beta F(z).
Density psi_beta0(const ReferenceShape& B, cplx c, const MultiIndex& beta, const Vec3c& dF);
// For |beta| = 1: -(K* - kappa I)^-1 [d_nu(y^beta dF)].
Density psi_beta0_short(const ReferenceShape& B, cplx c, const MultiIndex& beta, const Vec3c& dF);
// psi_{0,1} = c omega1 / (c - 1) (K* - kappa I)^-1 (-I/2 + K*) S^-1 R_B[S^-1 F(z)]
Density psi_01(const ReferenceShape& B, cplx c, cplx omega1, const Vec3c& Fz);
// psi_{0,2} = -c omega1^2 / (c - 1) (K* - kappa I)^-1 (P_B - (-I/2 + K*) S^-1 I_B) S^-1 [F(z)]
Density psi_02(const ReferenceShape& B, cplx c, cplx omega1, const Vec3c& Fz);

// Second-order moment identities and the cancellation of the monopole
// coefficient of the delta^3 term. The |beta| = 2 sum runs over ordered
// index pairs (k, l), i.e. sum_beta 2/beta! int psi_beta.
struct MomentReport {
    Vec3c sum_beta2, target_a;  // target_a = -2 |B| (L F)(z)
    Vec3c int_psi02, target_b;  // target_b = -omega^2 |B| F(z)
    Vec3c monopole;             // int psi_02 + sum_beta2 / 2
    double residual_a = 0, residual_b = 0, residual_c = 0;
};
MomentReport moment_identity_residuals(const ReferenceShape& B, cplx c, const PointForceSource& src, const Vec3& z);

// (L F)(x) from second derivatives of the source field.
Vec3c lame_of_source(const PointForceSource& src, const LameParams& p, const Vec3& x);

struct Emt {
    // value(j, a, b) is the vector int y_a (K* - kappa I)^-1 [d_nu(y_b e_j)].
    std::array<Vec3c, 27> values;
    cplx contrast = 0;
    double lambda = 0, mu = 0;
    std::uint64_t mesh_hash = 0;
    double condition = 0;
    bool near_resonance = false;

    const Vec3c& operator()(int j, int a, int b) const { return values[9 * j + 3 * a + b]; }
    Vec3c& operator()(int j, int a, int b) { return values[9 * j + 3 * a + b]; }
    double frobenius() const;
};

// Long: right-hand side d_nu(y_b e_j) - c (-I/2 + K*) S^-1 [y_b e_j], scaled by
// -1/(c - 1) (the general psi_{beta,0} formula). Short: d_nu(y_b e_j) alone.
// The two agree up to the discrete error of (-I/2 + K*) S^-1 on linear fields;
// the long form is the one the discrete transmission solve reproduces as
// delta -> 0.
enum class EmtForm { Long, Short };
Emt compute_emt(const ReferenceShape& B, cplx c, EmtForm form = EmtForm::Long);

// F(x) + delta^3 sum_j sum_a sum_b d_a Gamma^omega(x - z) M^j_{a,b} d_b F_j(z).
// Targets within 2 delta R_B of z raise NearFieldError.
std::vector<Vec3c> far_field_expansion(const Emt& emt, const ReferenceShape& B, const PointForceSource& src,
                                       const BodyFrame& frame, const std::vector<Vec3>& targets);

// JSON object with metadata and values[j][a][b][i] = [re, im].
void write_emt_json(std::ostream& out, const Emt& emt, const std::string& extra_json = "{}");
// Inverse of write_emt_json; extra keys are ignored.
Emt read_emt_json(std::istream& in);

}  // namespace lamebem
