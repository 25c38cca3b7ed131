#pragma once

#include "lamebem/geometry.hpp"
#include "lamebem/kernels.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace lamebem {

// Piecewise-constant vector density, element-major: entry 3*e + k.
using Density = Eigen::VectorXcd;
using RealDensity = Eigen::VectorXd;
using MeshPtr = std::shared_ptr<const SurfaceMesh>;
// Density given pointwise on the surface.
using DensityField = std::function<Vec3c(const Vec3&)>;

enum class OpKind { S, K, Kstar, D, RB, IB, PB, GB };
const char* to_string(OpKind k);
OpKind op_kind_from_string(const std::string& s);

struct BoundaryOperator {
    Eigen::MatrixXcd matrix;
    OpKind kind = OpKind::S;
    cplx omega = 0.0;
    MeshPtr mesh;

    Density apply(const Density& phi) const;
};

// Density sampled from a vector field at element centroids.
Density sample(const SurfaceMesh& mesh, const DensityField& f);
Density constant_density(const SurfaceMesh& mesh, const Vec3c& a);
// Area-weighted pairing sum_e a_e conj(g_e) . h_e
cplx pairing(const SurfaceMesh& mesh, const Density& g, const Density& h);
Vec3c integrate(const SurfaceMesh& mesh, const Density& phi);
double l2_norm(const SurfaceMesh& mesh, const Density& phi);

// Elastostatic blocks (real). The S self-term uses a Duffy-transformed tensor
// rule; near pairs are subdivided adaptively.
Eigen::MatrixXd assemble_single_layer_static(const SurfaceMesh& mesh, const LameParams& p);
// K*: off-diagonal blocks by quadrature (averaged over the target element
// for near pairs), diagonal blocks fixed so that the weighted adjoint K
// maps constants to half themselves.
Eigen::MatrixXd assemble_np_adjoint_static(const SurfaceMesh& mesh, const LameParams& p);
// K as the weighted adjoint of K*.
Eigen::MatrixXd assemble_np_static(const SurfaceMesh& mesh, const LameParams& p);
// Weighted adjoint: K = A^-1 K*^T A with A the element areas.
Eigen::MatrixXd weighted_adjoint(const SurfaceMesh& mesh, const Eigen::MatrixXd& Kstar);
Eigen::MatrixXcd weighted_adjoint(const SurfaceMesh& mesh, const Eigen::MatrixXcd& Kstar);

// Frequency corrections: regular quadrature of the bounded difference kernels.
Eigen::MatrixXcd single_layer_correction(const SurfaceMesh& mesh, cplx w, const LameParams& p);
Eigen::MatrixXcd np_adjoint_correction(const SurfaceMesh& mesh, cplx w, const LameParams& p);
Eigen::MatrixXcd np_correction(const SurfaceMesh& mesh, cplx w, const LameParams& p);

BoundaryOperator assemble_single_layer(const MeshPtr& mesh, cplx omega, const LameParams& p);
BoundaryOperator assemble_np_adjoint(const MeshPtr& mesh, cplx omega, const LameParams& p);
BoundaryOperator assemble_np(const MeshPtr& mesh, cplx omega, const LameParams& p);

// Off-surface potentials. Targets closer than 2 local mesh sizes raise
// NearFieldError.
std::vector<Vec3c> evaluate_single_layer(const SurfaceMesh& mesh, const Density& phi, cplx omega,
                                         const LameParams& p, const std::vector<Vec3>& targets);

// Adaptive evaluation valid arbitrarily close to the surface (off it).
struct NearValue {
    Vec3c value;
    Vec3c traction;
};
NearValue single_layer_near(const SurfaceMesh& mesh, const Density& phi, cplx omega, const LameParams& p,
                            const Vec3& x, const Vec3& nu);
NearValue single_layer_near(const SurfaceMesh& mesh, const DensityField& f, cplx omega, const LameParams& p,
                            const Vec3& x, const Vec3& nu);
Vec3c double_layer_near(const SurfaceMesh& mesh, const Density& phi, const LameParams& p, const Vec3& x);
Vec3c double_layer_near(const SurfaceMesh& mesh, const DensityField& f, const LameParams& p, const Vec3& x);

// One-sided surface limits of the single layer traction and of the double
// layer, averaged over each element, by extrapolation from offsets t*h along
// the normal (side = +1 exterior, -1 interior). Values are returned for
// `elements` in order, or for every element when it is empty. The element
// average uses the 6-point rule on `refine` levels of subdivision.
struct LimitOptions {
    double t1 = 0.02, t2 = 0.01;
    int refine = 0;
    std::vector<int> elements;
};
Density single_layer_traction_limit(const SurfaceMesh& mesh, const Density& phi, cplx omega, const LameParams& p,
                                    int side, const LimitOptions& opt = {});
Density double_layer_limit(const SurfaceMesh& mesh, const Density& phi, const LameParams& p, int side,
                           const LimitOptions& opt = {});
Density single_layer_traction_limit(const SurfaceMesh& mesh, const DensityField& f, cplx omega, const LameParams& p,
                                    int side, const LimitOptions& opt = {});
Density double_layer_limit(const SurfaceMesh& mesh, const DensityField& f, const LameParams& p, int side,
                           const LimitOptions& opt = {});

// Auxiliary operators of the small-body expansion.
Vec3c apply_RB(const SurfaceMesh& mesh, const Density& phi, const LameParams& p);
Eigen::MatrixXd assemble_IB(const SurfaceMesh& mesh, const LameParams& p);
Eigen::MatrixXd assemble_PB(const SurfaceMesh& mesh, const LameParams& p);
Density apply_IB(const SurfaceMesh& mesh, const Density& phi, const LameParams& p);
Density apply_PB(const SurfaceMesh& mesh, const Density& phi, const LameParams& p);
// I_B potential at arbitrary points (the kernel is continuous).
std::vector<Vec3c> evaluate_IB(const SurfaceMesh& mesh, const Density& phi, const LameParams& p,
                               const std::vector<Vec3>& targets);

// Binary archive: "LAMEBEM-OP 1\n", 8-byte little-endian header length, JSON
// header, then row-major complex doubles (re, im).
void write_operator_archive(std::ostream& out, const BoundaryOperator& op, const LameParams& p,
                            const std::string& extra_json = "{}");
void write_operator_archive_file(const std::string& path, const BoundaryOperator& op, const LameParams& p,
                                 const std::string& extra_json = "{}");
struct ArchiveHeader {
    OpKind kind;
    cplx omega;
    double lambda, mu;
    std::uint64_t mesh_hash;
    int n;
};
BoundaryOperator read_operator_archive(std::istream& in, const MeshPtr& mesh, ArchiveHeader* header = nullptr);
BoundaryOperator read_operator_archive_file(const std::string& path, const MeshPtr& mesh,
                                            ArchiveHeader* header = nullptr);

}  // namespace lamebem
