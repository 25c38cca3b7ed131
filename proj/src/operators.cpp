#include "lamebem/operators.hpp"

#include "lamebem/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace lamebem {

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;

constexpr double kNearFactor = 3.0;   // subdivide while centroid distance < factor * diameter
constexpr int kMaxDepth = 12;
constexpr int kDuffyOrder = 10;

double tri_diameter(const Vec3& a, const Vec3& b, const Vec3& c) {
    return std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
}

// Calls f(y, w) on a quadrature rule refined around x.
template <class F>
void integrate_adaptive(const Vec3& x, const Vec3& a, const Vec3& b, const Vec3& c, F&& f, int depth = 0) {
    const Vec3 cen = (a + b + c) / 3.0;
    if (depth >= kMaxDepth || (x - cen).norm() > kNearFactor * tri_diameter(a, b, c)) {
        const double area = 0.5 * (b - a).cross(c - a).norm();
        const auto& rule = dunavant6();
        for (int q = 0; q < kQuadPoints; ++q) {
            const auto& l = rule.bary[q];
            f(Vec3(l[0] * a + l[1] * b + l[2] * c), area * rule.weight[q]);
        }
        return;
    }
    const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    integrate_adaptive(x, a, ab, ca, f, depth + 1);
    integrate_adaptive(x, ab, b, bc, f, depth + 1);
    integrate_adaptive(x, ca, bc, c, f, depth + 1);
    integrate_adaptive(x, ab, bc, ca, f, depth + 1);
}

// Polar (Duffy) rule around an interior point x of the triangle: the 1/r
// singularity is cancelled by the radial Jacobian.
template <class F>
void integrate_duffy(const Vec3& x, const Vec3& a, const Vec3& b, const Vec3& c, F&& f) {
    static const LineRule g = gauss_legendre01(kDuffyOrder);
    const Vec3* v[3] = {&a, &b, &c};
    for (int k = 0; k < 3; ++k) {
        const Vec3 e1 = *v[k] - x, e2 = *v[(k + 1) % 3] - *v[k];
        const double J = e1.cross(e2).norm();
        for (int i = 0; i < kDuffyOrder; ++i)
            for (int j = 0; j < kDuffyOrder; ++j) {
                const double s = g.x[i], t = g.x[j];
                f(Vec3(x + s * (e1 + t * e2)), g.w[i] * g.w[j] * s * J);
            }
    }
}

// 6-point rule on the 4^level uniform refinement of a triangle.
template <class F>
void integrate_refined(const Vec3& a, const Vec3& b, const Vec3& c, int level, F&& f) {
    if (level <= 0) {
        const double area = 0.5 * (b - a).cross(c - a).norm();
        const auto& rule = dunavant6();
        for (int q = 0; q < kQuadPoints; ++q) {
            const auto& l = rule.bary[q];
            f(Vec3(l[0] * a + l[1] * b + l[2] * c), area * rule.weight[q]);
        }
        return;
    }
    const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    integrate_refined(a, ab, ca, level - 1, f);
    integrate_refined(ab, b, bc, level - 1, f);
    integrate_refined(ca, bc, c, level - 1, f);
    integrate_refined(ab, bc, ca, level - 1, f);
}

template <class F>
void for_each_quad(const SurfaceMesh& m, int e, F&& f) {
    for (int q = 0; q < kQuadPoints; ++q) f(m.quad_point(e, q), m.quad_weight(e, q));
}

void check_density(const SurfaceMesh& mesh, Eigen::Index n) {
    if (n != mesh.num_dofs())
        throw DimensionError("density length " + std::to_string(n) + " does not match mesh (" +
                             std::to_string(mesh.num_dofs()) + ")");
}

Vec3c block_apply(const Mat3c& B, const Density& phi, int j) { return B * phi.segment<3>(3 * j); }

}  // namespace

const char* to_string(OpKind k) {
    switch (k) {
        case OpKind::S: return "S";
        case OpKind::K: return "K";
        case OpKind::Kstar: return "Kstar";
        case OpKind::D: return "D";
        case OpKind::RB: return "RB";
        case OpKind::IB: return "IB";
        case OpKind::PB: return "PB";
        case OpKind::GB: return "GB";
    }
    return "?";
}

OpKind op_kind_from_string(const std::string& s) {
    for (OpKind k : {OpKind::S, OpKind::K, OpKind::Kstar, OpKind::D, OpKind::RB, OpKind::IB, OpKind::PB, OpKind::GB})
        if (s == to_string(k)) return k;
    throw InvalidParameter("unknown operator kind: " + s);
}

Density BoundaryOperator::apply(const Density& phi) const {
    if (phi.size() != matrix.cols()) throw DimensionError("density does not match operator size");
    return matrix * phi;
}

Density sample(const SurfaceMesh& mesh, const DensityField& f) {
    Density d(mesh.num_dofs());
    for (int e = 0; e < mesh.num_elements(); ++e) d.segment<3>(3 * e) = f(mesh.centroids()[e]);
    return d;
}

Density constant_density(const SurfaceMesh& mesh, const Vec3c& a) {
    return sample(mesh, [&a](const Vec3&) { return a; });
}

cplx pairing(const SurfaceMesh& mesh, const Density& g, const Density& h) {
    check_density(mesh, g.size());
    check_density(mesh, h.size());
    cplx s = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e)
        s += mesh.areas()[e] * g.segment<3>(3 * e).dot(h.segment<3>(3 * e));
    return s;
}

Vec3c integrate(const SurfaceMesh& mesh, const Density& phi) {
    check_density(mesh, phi.size());
    Vec3c s = Vec3c::Zero();
    for (int e = 0; e < mesh.num_elements(); ++e) s += mesh.areas()[e] * phi.segment<3>(3 * e);
    return s;
}

double l2_norm(const SurfaceMesh& mesh, const Density& phi) { return std::sqrt(std::abs(pairing(mesh, phi, phi))); }

MatrixXd assemble_single_layer_static(const SurfaceMesh& mesh, const LameParams& p) {
    const int n = mesh.num_elements();
    MatrixXd S(3 * n, 3 * n);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        const Vec3 c = mesh.centroids()[i];
        const double reach = kNearFactor * mesh.diameters()[i];
        for (int j = 0; j < n; ++j) {
            Mat3 blk = Mat3::Zero();
            auto inner = [&](const Vec3& x, double wx) {
                auto acc = [&](const Vec3& y, double w) { blk += (wx * w) * kelvin_matrix(x - y, p); };
                if (i == j)
                    integrate_duffy(x, mesh.vertex(j, 0), mesh.vertex(j, 1), mesh.vertex(j, 2), acc);
                else
                    integrate_adaptive(x, mesh.vertex(j, 0), mesh.vertex(j, 1), mesh.vertex(j, 2), acc);
            };
            if ((mesh.centroids()[j] - c).norm() <= reach) {
                for_each_quad(mesh, i, inner);
                blk /= mesh.areas()[i];
            } else {
                inner(c, 1.0);
            }
            S.block<3, 3>(3 * i, 3 * j) = blk;
        }
    }
    // Symmetrize the area-weighted matrix: both one-sided rules approximate
    // the same double integral.
    const auto& a = mesh.areas();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) {
            const Mat3 m = 0.5 * (a[i] * S.block<3, 3>(3 * i, 3 * j) + a[j] * S.block<3, 3>(3 * j, 3 * i).transpose());
            S.block<3, 3>(3 * i, 3 * j) = m / a[i];
            S.block<3, 3>(3 * j, 3 * i) = m.transpose() / a[j];
        }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const Mat3 m = S.block<3, 3>(3 * i, 3 * i);
        S.block<3, 3>(3 * i, 3 * i) = 0.5 * (m + m.transpose());
    }
    return S;
}

MatrixXd assemble_np_adjoint_static(const SurfaceMesh& mesh, const LameParams& p) {
    const int n = mesh.num_elements();
    MatrixXd K(3 * n, 3 * n);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        const Vec3 c = mesh.centroids()[i], nu = mesh.normals()[i];
        const double reach = kNearFactor * mesh.diameters()[i];
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            Mat3 blk = Mat3::Zero();
            auto inner = [&](const Vec3& x, double wx) {
                integrate_adaptive(x, mesh.vertex(j, 0), mesh.vertex(j, 1), mesh.vertex(j, 2),
                                   [&](const Vec3& y, double w) { blk += (wx * w) * traction_kernel_static(x - y, nu, p); });
            };
            // Near pairs are averaged over the target element; the strongly
            // singular kernel makes a single outer point too crude there.
            if ((mesh.centroids()[j] - c).norm() <= reach) {
                for_each_quad(mesh, i, inner);
                blk /= mesh.areas()[i];
            } else {
                inner(c, 1.0);
            }
            K.block<3, 3>(3 * i, 3 * j) = blk;
        }
    }
    // Diagonal from the closure K[a] = a/2 of the weighted adjoint.
    const auto& a = mesh.areas();
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
        Mat3 s = Mat3::Zero();
        for (int i = 0; i < n; ++i)
            if (i != j) s += (a[i] / a[j]) * K.block<3, 3>(3 * i, 3 * j);
        K.block<3, 3>(3 * j, 3 * j) = 0.5 * Mat3::Identity() - s;
    }
    return K;
}

MatrixXd assemble_np_static(const SurfaceMesh& mesh, const LameParams& p) {
    return weighted_adjoint(mesh, assemble_np_adjoint_static(mesh, p));
}

template <class Mat>
static Mat weighted_adjoint_impl(const SurfaceMesh& mesh, const Mat& Ks) {
    const int n = mesh.num_elements();
    if (Ks.rows() != 3 * n || Ks.cols() != 3 * n) throw DimensionError("operator does not match mesh");
    Mat K(3 * n, 3 * n);
    const auto& a = mesh.areas();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) K.template block<3, 3>(3 * i, 3 * j) = (a[j] / a[i]) * Ks.template block<3, 3>(3 * j, 3 * i).transpose();
    return K;
}

MatrixXd weighted_adjoint(const SurfaceMesh& mesh, const MatrixXd& Kstar) { return weighted_adjoint_impl(mesh, Kstar); }
MatrixXcd weighted_adjoint(const SurfaceMesh& mesh, const MatrixXcd& Kstar) { return weighted_adjoint_impl(mesh, Kstar); }

MatrixXcd single_layer_correction(const SurfaceMesh& mesh, cplx w, const LameParams& p) {
    const int n = mesh.num_elements();
    MatrixXcd S(3 * n, 3 * n);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        const Vec3 x = mesh.centroids()[i];
        for (int j = 0; j < n; ++j) {
            Mat3c blk = Mat3c::Zero();
            for_each_quad(mesh, j, [&](const Vec3& y, double wq) { blk += wq * kupradze_matrix_c(x - y, w, p, false); });
            S.block<3, 3>(3 * i, 3 * j) = blk;
        }
    }
    return S;
}

MatrixXcd np_adjoint_correction(const SurfaceMesh& mesh, cplx w, const LameParams& p) {
    const int n = mesh.num_elements();
    MatrixXcd K(3 * n, 3 * n);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        const Vec3 x = mesh.centroids()[i], nu = mesh.normals()[i];
        for (int j = 0; j < n; ++j) {
            Mat3c blk = Mat3c::Zero();
            auto acc = [&](const Vec3& y, double wq) { blk += wq * traction_kernel_c(x - y, nu, w, p, false); };
            // The difference kernel is bounded but direction-dependent at r = 0.
            if (i == j)
                integrate_duffy(x, mesh.vertex(j, 0), mesh.vertex(j, 1), mesh.vertex(j, 2), acc);
            else
                for_each_quad(mesh, j, acc);
            K.block<3, 3>(3 * i, 3 * j) = blk;
        }
    }
    return K;
}

MatrixXcd np_correction(const SurfaceMesh& mesh, cplx w, const LameParams& p) {
    const int n = mesh.num_elements();
    MatrixXcd K(3 * n, 3 * n);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        const Vec3 x = mesh.centroids()[i];
        for (int j = 0; j < n; ++j) {
            const Vec3 nu = mesh.normals()[j];
            Mat3c blk = Mat3c::Zero();
            auto acc = [&](const Vec3& y, double wq) { blk += wq * traction_kernel_c(y - x, nu, w, p, false).transpose(); };
            if (i == j)
                integrate_duffy(x, mesh.vertex(j, 0), mesh.vertex(j, 1), mesh.vertex(j, 2), acc);
            else
                for_each_quad(mesh, j, acc);
            K.block<3, 3>(3 * i, 3 * j) = blk;
        }
    }
    return K;
}

BoundaryOperator assemble_single_layer(const MeshPtr& mesh, cplx omega, const LameParams& p) {
    BoundaryOperator op;
    op.kind = OpKind::S;
    op.omega = omega;
    op.mesh = mesh;
    op.matrix = assemble_single_layer_static(*mesh, p).cast<cplx>();
    if (omega != 0.0) op.matrix += single_layer_correction(*mesh, omega, p);
    return op;
}

BoundaryOperator assemble_np_adjoint(const MeshPtr& mesh, cplx omega, const LameParams& p) {
    BoundaryOperator op;
    op.kind = OpKind::Kstar;
    op.omega = omega;
    op.mesh = mesh;
    op.matrix = assemble_np_adjoint_static(*mesh, p).cast<cplx>();
    if (omega != 0.0) op.matrix += np_adjoint_correction(*mesh, omega, p);
    return op;
}

BoundaryOperator assemble_np(const MeshPtr& mesh, cplx omega, const LameParams& p) {
    BoundaryOperator op;
    op.kind = OpKind::K;
    op.omega = omega;
    op.mesh = mesh;
    op.matrix = assemble_np_static(*mesh, p).cast<cplx>();
    if (omega != 0.0) op.matrix += np_correction(*mesh, omega, p);
    return op;
}

std::vector<Vec3c> evaluate_single_layer(const SurfaceMesh& mesh, const Density& phi, cplx omega,
                                         const LameParams& p, const std::vector<Vec3>& targets) {
    check_density(mesh, phi.size());
    std::vector<Vec3c> out(targets.size());
    for (const auto& x : targets) {
        int e = -1;
        const double d = mesh.distance_to_surface(x, &e);
        const double guard = 2.0 * mesh.diameters()[e];
        if (d <= guard)
            throw NearFieldError("target at distance " + std::to_string(d) + " is inside the near-field guard " +
                                     std::to_string(guard),
                                 d, guard);
    }
    const int n = mesh.num_elements();
#pragma omp parallel for schedule(static)
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const Vec3 x = targets[t];
        Vec3c u = Vec3c::Zero();
        for (int j = 0; j < n; ++j) {
            Mat3c blk = Mat3c::Zero();
            for_each_quad(mesh, j, [&](const Vec3& y, double w) { blk += w * kupradze_matrix_c(x - y, omega, p); });
            u += block_apply(blk, phi, j);
        }
        out[t] = u;
    }
    return out;
}

namespace {

// Density accessors: value on element j at point y.
struct PiecewiseConstant {
    const Density& phi;
    Vec3c operator()(int j, const Vec3&) const { return phi.segment<3>(3 * j); }
};
struct Pointwise {
    const DensityField& f;
    Vec3c operator()(int, const Vec3& y) const { return f(y); }
};

template <class Dens>
NearValue single_layer_near_impl(const SurfaceMesh& mesh, const Dens& dens, cplx omega, const LameParams& p,
                                 const Vec3& x, const Vec3& nu) {
    NearValue out{Vec3c::Zero(), Vec3c::Zero()};
    for (int j = 0; j < mesh.num_elements(); ++j) {
        integrate_adaptive(x, mesh.vertex(j, 0), mesh.vertex(j, 1), mesh.vertex(j, 2), [&](const Vec3& y, double w) {
            const Vec3 d = x - y;
            const double r = d.norm();
            const Radial rad = kupradze_radial(omega, r, p);
            const Vec3 u = d / r;
            const Vec3c v = w * dens(j, y);
            out.value += (rad.A * Mat3c::Identity() + rad.B * (u * u.transpose()).cast<cplx>()) * v;
            out.traction += traction_from_radial(rad, d, nu, p) * v;
        });
    }
    return out;
}

template <class Dens>
Vec3c double_layer_near_impl(const SurfaceMesh& mesh, const Dens& dens, const LameParams& p, const Vec3& x) {
    Vec3c out = Vec3c::Zero();
    for (int j = 0; j < mesh.num_elements(); ++j) {
        const Vec3 nu = mesh.normals()[j];
        integrate_adaptive(x, mesh.vertex(j, 0), mesh.vertex(j, 1), mesh.vertex(j, 2), [&](const Vec3& y, double w) {
            out += (w * traction_kernel_static(y - x, nu, p).transpose()).cast<cplx>() * dens(j, y);
        });
    }
    return out;
}

template <class Eval>
Density one_sided_limit(const SurfaceMesh& mesh, int side, const LimitOptions& opt, Eval&& eval) {
    if (side != 1 && side != -1) throw InvalidParameter("side must be +1 or -1");
    const double t1 = opt.t1, t2 = opt.t2;
    if (!(t1 > t2 && t2 > 0)) throw InvalidParameter("offsets must satisfy t1 > t2 > 0");
    if (opt.refine < 0 || opt.refine > 4) throw InvalidParameter("refine must be in [0, 4]");
    std::vector<int> elems = opt.elements;
    if (elems.empty())
        for (int e = 0; e < mesh.num_elements(); ++e) elems.push_back(e);
    for (int e : elems)
        if (e < 0 || e >= mesh.num_elements()) throw InvalidParameter("element index out of range");
    const int n = static_cast<int>(elems.size());
    Density out(3 * n);
#pragma omp parallel for schedule(dynamic, 4)
    for (int k = 0; k < n; ++k) {
        const int i = elems[k];
        const Vec3 nu = mesh.normals()[i];
        const double h = mesh.diameters()[i];
        Vec3c acc = Vec3c::Zero();
        integrate_refined(mesh.vertex(i, 0), mesh.vertex(i, 1), mesh.vertex(i, 2), opt.refine, [&](const Vec3& c, double w) {
            const Vec3c f1 = eval(Vec3(c + side * t1 * h * nu), nu);
            const Vec3c f2 = eval(Vec3(c + side * t2 * h * nu), nu);
            acc += w * (t1 * f2 - t2 * f1) / (t1 - t2);
        });
        out.segment<3>(3 * k) = acc / mesh.areas()[i];
    }
    return out;
}

}  // namespace

NearValue single_layer_near(const SurfaceMesh& mesh, const Density& phi, cplx omega, const LameParams& p,
                            const Vec3& x, const Vec3& nu) {
    check_density(mesh, phi.size());
    return single_layer_near_impl(mesh, PiecewiseConstant{phi}, omega, p, x, nu);
}

NearValue single_layer_near(const SurfaceMesh& mesh, const DensityField& f, cplx omega, const LameParams& p,
                            const Vec3& x, const Vec3& nu) {
    return single_layer_near_impl(mesh, Pointwise{f}, omega, p, x, nu);
}

Vec3c double_layer_near(const SurfaceMesh& mesh, const Density& phi, const LameParams& p, const Vec3& x) {
    check_density(mesh, phi.size());
    return double_layer_near_impl(mesh, PiecewiseConstant{phi}, p, x);
}

Vec3c double_layer_near(const SurfaceMesh& mesh, const DensityField& f, const LameParams& p, const Vec3& x) {
    return double_layer_near_impl(mesh, Pointwise{f}, p, x);
}

Density single_layer_traction_limit(const SurfaceMesh& mesh, const Density& phi, cplx omega, const LameParams& p,
                                    int side, const LimitOptions& opt) {
    check_density(mesh, phi.size());
    return one_sided_limit(mesh, side, opt, [&](const Vec3& x, const Vec3& nu) {
        return single_layer_near_impl(mesh, PiecewiseConstant{phi}, omega, p, x, nu).traction;
    });
}

Density single_layer_traction_limit(const SurfaceMesh& mesh, const DensityField& f, cplx omega, const LameParams& p,
                                    int side, const LimitOptions& opt) {
    return one_sided_limit(mesh, side, opt, [&](const Vec3& x, const Vec3& nu) {
        return single_layer_near_impl(mesh, Pointwise{f}, omega, p, x, nu).traction;
    });
}

Density double_layer_limit(const SurfaceMesh& mesh, const Density& phi, const LameParams& p, int side,
                           const LimitOptions& opt) {
    check_density(mesh, phi.size());
    return one_sided_limit(mesh, side, opt,
                           [&](const Vec3& x, const Vec3&) { return double_layer_near_impl(mesh, PiecewiseConstant{phi}, p, x); });
}

Density double_layer_limit(const SurfaceMesh& mesh, const DensityField& f, const LameParams& p, int side,
                           const LimitOptions& opt) {
    return one_sided_limit(mesh, side, opt,
                           [&](const Vec3& x, const Vec3&) { return double_layer_near_impl(mesh, Pointwise{f}, p, x); });
}

Vec3c apply_RB(const SurfaceMesh& mesh, const Density& phi, const LameParams& p) {
    return p.gamma3() * integrate(mesh, phi);
}

MatrixXd assemble_IB(const SurfaceMesh& mesh, const LameParams& p) {
    const int n = mesh.num_elements();
    MatrixXd M(3 * n, 3 * n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const Vec3 x = mesh.centroids()[i];
        for (int j = 0; j < n; ++j) {
            Mat3 blk = Mat3::Zero();
            for_each_quad(mesh, j, [&](const Vec3& y, double w) { blk += w * lambda_matrix(x - y, p); });
            M.block<3, 3>(3 * i, 3 * j) = blk;
        }
    }
    return M;
}

MatrixXd assemble_PB(const SurfaceMesh& mesh, const LameParams& p) {
    const int n = mesh.num_elements();
    MatrixXd M(3 * n, 3 * n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const Vec3 x = mesh.centroids()[i], nu = mesh.normals()[i];
        for (int j = 0; j < n; ++j) {
            Mat3 blk = Mat3::Zero();
            auto acc = [&](const Vec3& y, double w) { blk += w * lambda_traction(x - y, nu, p); };
            if (i == j)
                integrate_duffy(x, mesh.vertex(j, 0), mesh.vertex(j, 1), mesh.vertex(j, 2), acc);
            else
                for_each_quad(mesh, j, acc);
            M.block<3, 3>(3 * i, 3 * j) = blk;
        }
    }
    return M;
}

Density apply_IB(const SurfaceMesh& mesh, const Density& phi, const LameParams& p) {
    check_density(mesh, phi.size());
    return assemble_IB(mesh, p).cast<cplx>() * phi;
}

Density apply_PB(const SurfaceMesh& mesh, const Density& phi, const LameParams& p) {
    check_density(mesh, phi.size());
    return assemble_PB(mesh, p).cast<cplx>() * phi;
}

std::vector<Vec3c> evaluate_IB(const SurfaceMesh& mesh, const Density& phi, const LameParams& p,
                               const std::vector<Vec3>& targets) {
    check_density(mesh, phi.size());
    std::vector<Vec3c> out(targets.size());
#pragma omp parallel for schedule(static)
    for (std::size_t t = 0; t < targets.size(); ++t) {
        Vec3c u = Vec3c::Zero();
        for (int j = 0; j < mesh.num_elements(); ++j) {
            Mat3 blk = Mat3::Zero();
            for_each_quad(mesh, j, [&](const Vec3& y, double w) { blk += w * lambda_matrix(targets[t] - y, p); });
            u += blk.cast<cplx>() * phi.segment<3>(3 * j);
        }
        out[t] = u;
    }
    return out;
}

// ---------------------------------------------------------------- archive

namespace {
const char kMagic[] = "LAMEBEM-OP 1\n";

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}
}  // namespace

void write_operator_archive(std::ostream& out, const BoundaryOperator& op, const LameParams& p,
                            const std::string& extra_json) {
    if (!op.mesh) throw InvalidParameter("operator has no mesh");
    nlohmann::json h;
    h["format"] = "lamebem-operator";
    h["version"] = 1;
    h["kind"] = to_string(op.kind);
    h["omega"] = {op.omega.real(), op.omega.imag()};
    h["lambda"] = p.lambda();
    h["mu"] = p.mu();
    h["mesh_hash"] = hex64(op.mesh->hash());
    h["n"] = op.matrix.rows();
    h["extra"] = nlohmann::json::parse(extra_json);
    const std::string hs = h.dump();
    const std::uint64_t len = hs.size();
    out.write(kMagic, sizeof(kMagic) - 1);
    unsigned char lb[8];
    for (int k = 0; k < 8; ++k) lb[k] = static_cast<unsigned char>((len >> (8 * k)) & 0xff);
    out.write(reinterpret_cast<const char*>(lb), 8);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = op.matrix;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(cplx)));
    if (!out) throw Error("failed writing operator archive");
}

void write_operator_archive_file(const std::string& path, const BoundaryOperator& op, const LameParams& p,
                                 const std::string& extra_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open archive for writing: " + path);
    write_operator_archive(out, op, p, extra_json);
}

BoundaryOperator read_operator_archive(std::istream& in, const MeshPtr& mesh, ArchiveHeader* header) {
    char magic[sizeof(kMagic) - 1];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error("not an operator archive");
    unsigned char lb[8];
    in.read(reinterpret_cast<char*>(lb), 8);
    std::uint64_t len = 0;
    for (int k = 0; k < 8; ++k) len |= static_cast<std::uint64_t>(lb[k]) << (8 * k);
    if (!in || len > (1u << 24)) throw Error("corrupt archive header");
    std::string hs(len, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(len));
    const auto h = nlohmann::json::parse(hs);
    ArchiveHeader hd;
    hd.kind = op_kind_from_string(h.at("kind").get<std::string>());
    hd.omega = cplx(h.at("omega")[0].get<double>(), h.at("omega")[1].get<double>());
    hd.lambda = h.at("lambda").get<double>();
    hd.mu = h.at("mu").get<double>();
    hd.mesh_hash = std::stoull(h.at("mesh_hash").get<std::string>(), nullptr, 16);
    hd.n = h.at("n").get<int>();
    if (mesh && mesh->hash() != hd.mesh_hash) throw DimensionError("archive was assembled on a different mesh");
    if (mesh && mesh->num_dofs() != hd.n) throw DimensionError("archive size does not match mesh");
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(hd.n, hd.n);
    in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(cplx)));
    if (!in) throw Error("truncated operator archive");
    BoundaryOperator op;
    op.kind = hd.kind;
    op.omega = hd.omega;
    op.mesh = mesh;
    op.matrix = rm;
    if (header) *header = hd;
    return op;
}

BoundaryOperator read_operator_archive_file(const std::string& path, const MeshPtr& mesh, ArchiveHeader* header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DependencyError(path);
    return read_operator_archive(in, mesh, header);
}

}  // namespace lamebem
