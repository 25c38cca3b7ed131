#include "lamebem/transmission.hpp"

#include "lamebem/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>

namespace lamebem {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;

namespace {

void check_source_sizes(const PointForceSource& src) {
    if (src.locations.size() != src.amplitudes.size())
        throw DimensionError("point force locations and amplitudes differ in number");
    if (src.locations.empty()) throw InvalidParameter("point force source is empty");
    if (!(src.omega > 0.0) || !std::isfinite(src.omega)) throw InvalidParameter("source frequency must be positive");
}

void require_off_sources(const PointForceSource& src, const Vec3& x) {
    for (const auto& y : src.locations)
        if ((x - y).norm() == 0.0) throw SingularPoint("field evaluated at a point force location");
}

}  // namespace

void validate_source(const PointForceSource& src, const SurfaceMesh& mesh) {
    check_source_sizes(src);
    for (const auto& y : src.locations) {
        int e = -1;
        const double d = mesh.distance_to_surface(y, &e);
        const double guard = 2.0 * mesh.diameters()[e];
        if (contains(mesh, y)) throw InvalidParameter("point force lies inside the inclusion");
        if (d <= guard) throw NearFieldError("point force too close to the inclusion surface", d, guard);
    }
}

void TransmissionProblem::validate() const {
    if (!mesh) throw InvalidParameter("transmission problem has no mesh");
    if (!std::isfinite(contrast.real()) || !std::isfinite(contrast.imag()))
        throw InvalidParameter("contrast must be finite");
    if (contrast.imag() < 0.0) throw InvalidParameter("contrast must satisfy Im c >= 0");
    if (contrast == 0.0) throw InvalidParameter("contrast must be nonzero");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw InvalidParameter("frequency must be positive");
}

std::vector<FieldValue> source_field(const PointForceSource& src, const LameParams& p,
                                     const std::vector<Vec3>& targets, int derivative_order) {
    check_source_sizes(src);
    if (derivative_order < 0 || derivative_order > 1) throw UnsupportedOrder("source_field supports order 0 or 1");
    std::vector<FieldValue> out(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const Vec3& x = targets[t];
        require_off_sources(src, x);
        for (std::size_t i = 0; i < src.locations.size(); ++i) {
            const Vec3 d = x - src.locations[i];
            const Vec3c& q = src.amplitudes[i];
            out[t].value += kupradze_matrix(d, src.omega, p) * q;
            if (derivative_order == 1) {
                const auto g = gamma_gradient(d, src.omega, p);
                for (int l = 0; l < 3; ++l) out[t].gradient[l] += g[l] * q;
            }
        }
    }
    return out;
}

Vec3c source_derivative(const PointForceSource& src, const LameParams& p, const Vec3& x, const MultiIndex& alpha) {
    check_source_sizes(src);
    require_off_sources(src, x);
    Vec3c out = Vec3c::Zero();
    for (std::size_t i = 0; i < src.locations.size(); ++i)
        out += gamma_derivative(x - src.locations[i], src.omega, p, alpha) * src.amplitudes[i];
    return out;
}

Vec3c traction_of(const std::array<Vec3c, 3>& gradient, const Vec3& nu, const LameParams& p) {
    // J(i, l) = d_l u_i
    Mat3c J;
    for (int l = 0; l < 3; ++l) J.col(l) = gradient[l];
    const Vec3c n = nu.cast<cplx>();
    return p.lambda() * J.trace() * n + p.mu() * (J + J.transpose()) * n;
}

Density source_trace(const SurfaceMesh& mesh, const PointForceSource& src, const LameParams& p) {
    const auto f = source_field(src, p, mesh.centroids(), 0);
    Density out(mesh.num_dofs());
    for (int e = 0; e < mesh.num_elements(); ++e) out.segment<3>(3 * e) = f[e].value;
    return out;
}

Density source_normal_trace(const SurfaceMesh& mesh, const PointForceSource& src, const LameParams& p) {
    const auto f = source_field(src, p, mesh.centroids(), 1);
    Density out(mesh.num_dofs());
    for (int e = 0; e < mesh.num_elements(); ++e)
        out.segment<3>(3 * e) = traction_of(f[e].gradient, mesh.normals()[e], p);
    return out;
}

TransmissionSolver::TransmissionSolver(MeshPtr mesh, const LameParams& p, double omega)
    : mesh_(std::move(mesh)), p_(p), omega_(omega) {
    if (!mesh_) throw InvalidParameter("transmission solver has no mesh");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw InvalidParameter("frequency must be positive");
    S0_ = assemble_single_layer_static(*mesh_, p_);
    K0_ = assemble_np_adjoint_static(*mesh_, p_);
    S2_ = S0_.cast<cplx>() + single_layer_correction(*mesh_, omega_, p_);
    K2_ = K0_.cast<cplx>() + np_adjoint_correction(*mesh_, omega_, p_);
}

TransmissionSolution TransmissionSolver::solve(cplx contrast, const PointForceSource& src) const {
    check_source_sizes(src);
    if (src.omega != omega_) throw InvalidParameter("source frequency differs from the solver frequency");
    return solve(contrast, source_trace(*mesh_, src, p_), source_normal_trace(*mesh_, src, p_));
}

TransmissionSolution TransmissionSolver::solve(cplx c, const Density& F, const Density& dF) const {
    TransmissionProblem{mesh_, c, p_, omega_}.validate();
    const int n = mesh_->num_dofs();
    if (F.size() != n || dF.size() != n) throw DimensionError("boundary data does not match the mesh");
    const cplx w1 = omega_ * omega1_factor(c);

    const MatrixXcd S1 = S0_.cast<cplx>() + single_layer_correction(*mesh_, w1, p_);
    const MatrixXcd K1 = K0_.cast<cplx>() + np_adjoint_correction(*mesh_, w1, p_);
    auto apply = [&](const VectorXcd& x) {
        const auto phi = x.head(n), psi = x.tail(n);
        VectorXcd y(2 * n);
        y.head(n) = S1 * phi - S2_ * psi;
        y.tail(n) = c * (K1 * phi - 0.5 * phi) - 0.5 * psi - K2_ * psi;
        return y;
    };

    MatrixXcd A(2 * n, 2 * n);
    A.topLeftCorner(n, n) = S1;
    A.topRightCorner(n, n) = -S2_;
    A.bottomLeftCorner(n, n) = c * K1;
    A.bottomLeftCorner(n, n).diagonal().array() -= 0.5 * c;
    A.bottomRightCorner(n, n) = -K2_;
    A.bottomRightCorner(n, n).diagonal().array() -= 0.5;

    VectorXcd b(2 * n);
    b << F, dF;
    Eigen::PartialPivLU<Eigen::Ref<MatrixXcd>> lu(A);  // factorizes A in place
    const double rcond = lu.rcond();
    VectorXcd x = lu.solve(b);
    if (!(rcond > 0.0) || !x.allFinite()) throw SolverError("transmission block matrix is singular");

    const double bn = b.norm();
    VectorXcd r = b - apply(x);
    for (int it = 0; it < 2 && r.norm() > 1e-12 * bn; ++it) {
        x += lu.solve(r);
        r = b - apply(x);
    }

    TransmissionSolution sol;
    sol.phi = x.head(n);
    sol.psi = x.tail(n);
    sol.condition = 1.0 / rcond;
    sol.residual = bn > 0 ? r.norm() / bn : r.norm();
    if (sol.condition > kResonanceConditionThreshold) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "near resonance: condition estimate %.3e", sol.condition);
        sol.warning = buf;
    }
    return sol;
}

TransmissionSolution solve_transmission(const TransmissionProblem& prob, const PointForceSource& src) {
    prob.validate();
    if (src.omega != prob.omega) throw InvalidParameter("source frequency differs from the problem frequency");
    return TransmissionSolver(prob.mesh, prob.params, prob.omega).solve(prob.contrast, src);
}

std::vector<SolutionValue> evaluate_solution(const TransmissionProblem& prob, const TransmissionSolution& sol,
                                             const PointForceSource& src, const std::vector<Vec3>& targets) {
    prob.validate();
    const SurfaceMesh& mesh = *prob.mesh;
    std::vector<Vec3> in, out;
    std::vector<int> where(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const bool inside = contains(mesh, targets[t]);
        where[t] = static_cast<int>(inside ? in.size() : out.size());
        (inside ? in : out).push_back(targets[t]);
    }
    const auto u_in = evaluate_single_layer(mesh, sol.phi, prob.omega1(), prob.params, in);
    const auto u_out = evaluate_single_layer(mesh, sol.psi, prob.omega, prob.params, out);
    const auto f_out = source_field(src, prob.params, out, 0);
    std::vector<SolutionValue> res(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const bool inside = contains(mesh, targets[t]);
        const int k = where[t];
        res[t] = {targets[t], inside ? u_in[k] : Vec3c(u_out[k] + f_out[k].value), inside};
    }
    return res;
}

TransmissionMismatch transmission_mismatch(const TransmissionProblem& prob, const TransmissionSolution& sol,
                                           const PointForceSource& src, const std::vector<int>& elements) {
    prob.validate();
    const SurfaceMesh& mesh = *prob.mesh;
    const LameParams& p = prob.params;
    const cplx w1 = prob.omega1();
    const auto& rule = dunavant6();
    double du = 0, dt = 0, nu_ = 0, nt = 0;
    for (int e : elements) {
        if (e < 0 || e >= mesh.num_elements()) throw InvalidParameter("element index out of range");
        const Vec3 nu = mesh.normals()[e];
        const double h = mesh.diameters()[e];
        // Element averages of the one-sided limits, extrapolated from t and t/2.
        Vec3c ui = Vec3c::Zero(), ue = Vec3c::Zero(), ti = Vec3c::Zero(), te = Vec3c::Zero();
        for (int q = 0; q < kQuadPoints; ++q) {
            const Vec3 y = mesh.quad_point(e, q);
            const double w = rule.weight[q];
            auto limit = [&](int side, auto&& eval) {
                const NearValue a = eval(y + side * 0.1 * h * nu), b = eval(y + side * 0.05 * h * nu);
                return NearValue{2.0 * b.value - a.value, 2.0 * b.traction - a.traction};
            };
            const NearValue in = limit(-1, [&](const Vec3& x) {
                return single_layer_near(mesh, sol.phi, w1, p, x, nu);
            });
            const NearValue ex = limit(+1, [&](const Vec3& x) {
                return single_layer_near(mesh, sol.psi, prob.omega, p, x, nu);
            });
            const FieldValue f = source_field(src, p, {y}, 1)[0];
            ui += w * in.value;
            ti += w * prob.contrast * in.traction;
            ue += w * (ex.value + f.value);
            te += w * (ex.traction + traction_of(f.gradient, nu, p));
        }
        du += (ui - ue).squaredNorm();
        dt += (ti - te).squaredNorm();
        nu_ += ue.squaredNorm();
        nt += te.squaredNorm();
    }
    return {std::sqrt(du / nu_), std::sqrt(dt / nt)};
}

void write_solution_json(std::ostream& out, const std::vector<SolutionValue>& values) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& v : values) {
        nlohmann::ordered_json rec;
        rec["target"] = {v.target[0], v.target[1], v.target[2]};
        rec["u_re"] = {v.u[0].real(), v.u[1].real(), v.u[2].real()};
        rec["u_im"] = {v.u[0].imag(), v.u[1].imag(), v.u[2].imag()};
        rec["branch"] = v.interior ? "interior" : "exterior";
        arr.push_back(rec);
    }
    out << arr.dump(2) << "\n";
}

}  // namespace lamebem
