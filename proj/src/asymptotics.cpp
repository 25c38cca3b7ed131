#include "lamebem/asymptotics.hpp"

#include "lamebem/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

namespace lamebem {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;

cplx kappa_of_c(cplx c) {
    if (c == 1.0) throw PoleError("kappa_c has a pole at c = 1");
    return (c + 1.0) / (2.0 * (c - 1.0));
}

cplx c_of_kappa(cplx kappa) {
    if (kappa == 0.5) throw PoleError("c(kappa) has a pole at kappa = 1/2");
    return (2.0 * kappa + 1.0) / (2.0 * kappa - 1.0);
}

NpResolvent::NpResolvent(const MatrixXd& Kstar, cplx kappa) : kappa_(kappa) {
    MatrixXcd A = Kstar.cast<cplx>();
    A.diagonal().array() -= kappa;
    lu_.compute(A);
    const double rc = lu_.rcond();
    if (!(rc > 0.0)) throw SolverError("K* - kappa I is singular");
    condition_ = 1.0 / rc;
}

Density NpResolvent::solve(const Density& rhs) const {
    if (rhs.size() != lu_.rows()) throw DimensionError("right-hand side does not match K*");
    return lu_.solve(rhs);
}

ReferenceShape::ReferenceShape(MeshPtr mesh, const LameParams& p) : mesh_(std::move(mesh)), p_(p) {
    if (!mesh_) throw InvalidParameter("reference shape has no mesh");
    S_ = assemble_single_layer_static(*mesh_, p_);
    Ks_ = assemble_np_adjoint_static(*mesh_, p_);
    init();
}

ReferenceShape::ReferenceShape(MeshPtr mesh, const LameParams& p, MatrixXd S, MatrixXd Kstar)
    : mesh_(std::move(mesh)), p_(p), S_(std::move(S)), Ks_(std::move(Kstar)) {
    if (!mesh_) throw InvalidParameter("reference shape has no mesh");
    const int n = mesh_->num_dofs();
    if (S_.rows() != n || S_.cols() != n || Ks_.rows() != n || Ks_.cols() != n)
        throw DimensionError("operators do not match the reference mesh");
    init();
}

const MatrixXd& ReferenceShape::PB() const {
    std::call_once(volume_ops_, [this] {
        PB_ = assemble_PB(*mesh_, p_);
        IB_ = assemble_IB(*mesh_, p_);
    });
    return PB_;
}

const MatrixXd& ReferenceShape::IB() const {
    PB();
    return IB_;
}

void ReferenceShape::init() {
    S_lu_.compute(S_);
    volume_ = mesh_->volume();
    radius_ = 0;
    for (const auto& v : mesh_->vertices()) radius_ = std::max(radius_, v.norm());
}

Density ReferenceShape::solve_S(const Density& f) const {
    if (f.size() != S_.rows()) throw DimensionError("density does not match the reference mesh");
    Density out(f.size());
    out.real() = S_lu_.solve(f.real());
    out.imag() = S_lu_.solve(f.imag());
    return out;
}

Density ReferenceShape::interior_np_of_S_inverse(const Density& f) const {
    const Density g = solve_S(f);
    return Ks_ * g - 0.5 * g;
}

std::shared_ptr<const NpResolvent> ReferenceShape::resolvent(cplx kappa) const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!last_ || last_->kappa() != kappa) last_ = std::make_shared<NpResolvent>(Ks_, kappa);
    return last_;
}

namespace {

double monomial(const Vec3& y, const MultiIndex& b) {
    return std::pow(y[0], b[0]) * std::pow(y[1], b[1]) * std::pow(y[2], b[2]);
}

Vec3 monomial_gradient(const Vec3& y, const MultiIndex& b) {
    Vec3 g;
    for (int l = 0; l < 3; ++l) {
        if (b[l] == 0) {
            g[l] = 0;
            continue;
        }
        MultiIndex d = b;
        --d[l];
        g[l] = b[l] * monomial(y, d);
    }
    return g;
}

void check_order(const MultiIndex& beta, int max_order) {
    if (beta[0] < 0 || beta[1] < 0 || beta[2] < 0) throw InvalidParameter("negative multi-index");
    if (order(beta) > max_order) throw UnsupportedOrder("multi-index order too high");
}

MultiIndex unit(int k) {
    MultiIndex a{0, 0, 0};
    a[k] = 1;
    return a;
}

}  // namespace

Density polynomial_trace(const SurfaceMesh& mesh, const MultiIndex& beta, const Vec3c& a) {
    Density out(mesh.num_dofs());
    for (int e = 0; e < mesh.num_elements(); ++e) out.segment<3>(3 * e) = monomial(mesh.centroids()[e], beta) * a;
    return out;
}

Density polynomial_traction(const SurfaceMesh& mesh, const MultiIndex& beta, const Vec3c& a, const LameParams& p) {
    Density out(mesh.num_dofs());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        // grad(m a): d_l u_i = a_i d_l m
        const Vec3 g = monomial_gradient(mesh.centroids()[e], beta);
        std::array<Vec3c, 3> grad;
        for (int l = 0; l < 3; ++l) grad[l] = g[l] * a;
        out.segment<3>(3 * e) = traction_of(grad, mesh.normals()[e], p);
    }
    return out;
}

Density psi_beta0(const ReferenceShape& B, cplx c, const MultiIndex& beta, const Vec3c& dF) {
    check_order(beta, 2);
    const cplx kappa = kappa_of_c(c);
    const SurfaceMesh& m = *B.mesh();
    const Density rhs = polynomial_traction(m, beta, dF, B.params()) -
                        c * B.interior_np_of_S_inverse(polynomial_trace(m, beta, dF));
    return B.resolvent(kappa)->solve(rhs) / (c - 1.0);
}

Density psi_beta0_short(const ReferenceShape& B, cplx c, const MultiIndex& beta, const Vec3c& dF) {
    check_order(beta, 2);
    if (order(beta) != 1) throw UnsupportedOrder("the short form holds for |beta| = 1 only");
    return -B.resolvent(kappa_of_c(c))->solve(polynomial_traction(*B.mesh(), beta, dF, B.params()));
}

Density psi_01(const ReferenceShape& B, cplx c, cplx omega1, const Vec3c& Fz) {
    const SurfaceMesh& m = *B.mesh();
    const Density phi00 = B.solve_S(constant_density(m, Fz));
    const Vec3c r = apply_RB(m, phi00, B.params());
    const Density rhs = B.interior_np_of_S_inverse(constant_density(m, r));
    return c * omega1 / (c - 1.0) * B.resolvent(kappa_of_c(c))->solve(rhs);
}

Density psi_02(const ReferenceShape& B, cplx c, cplx omega1, const Vec3c& Fz) {
    const SurfaceMesh& m = *B.mesh();
    const Density phi00 = B.solve_S(constant_density(m, Fz));
    const Density IBphi = B.IB().cast<cplx>() * phi00;
    const Density rhs = B.PB().cast<cplx>() * phi00 - B.interior_np_of_S_inverse(IBphi);
    return -c * omega1 * omega1 / (c - 1.0) * B.resolvent(kappa_of_c(c))->solve(rhs);
}

Vec3c lame_of_source(const PointForceSource& src, const LameParams& p, const Vec3& x) {
    // H[k][l] = d_k d_l F
    Vec3c H[3][3];
    for (int k = 0; k < 3; ++k)
        for (int l = k; l < 3; ++l) {
            MultiIndex a{0, 0, 0};
            ++a[k];
            ++a[l];
            H[k][l] = H[l][k] = source_derivative(src, p, x, a);
        }
    Vec3c out = Vec3c::Zero();
    for (int k = 0; k < 3; ++k) {
        out += p.mu() * H[k][k];
        for (int i = 0; i < 3; ++i) out[i] += (p.lambda() + p.mu()) * H[i][k][k];
    }
    return out;
}

MomentReport moment_identity_residuals(const ReferenceShape& B, cplx c, const PointForceSource& src, const Vec3& z) {
    const SurfaceMesh& m = *B.mesh();
    const LameParams& p = B.params();
    const double omega = src.omega;
    const Vec3c Fz = source_field(src, p, {z})[0].value;
    MomentReport r;
    r.sum_beta2 = Vec3c::Zero();
    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
            MultiIndex beta{0, 0, 0};
            ++beta[k];
            ++beta[l];
            const Vec3c dF = source_derivative(src, p, z, beta);
            r.sum_beta2 += integrate(m, psi_beta0(B, c, beta, dF));
        }
    r.target_a = -2.0 * B.volume() * lame_of_source(src, p, z);
    r.int_psi02 = integrate(m, psi_02(B, c, omega * omega1_factor(c), Fz));
    r.target_b = -omega * omega * B.volume() * Fz;
    r.monopole = r.int_psi02 + 0.5 * r.sum_beta2;
    r.residual_a = (r.sum_beta2 - r.target_a).norm() / r.target_a.norm();
    r.residual_b = (r.int_psi02 - r.target_b).norm() / r.target_b.norm();
    r.residual_c = r.monopole.norm() / r.target_b.norm();
    return r;
}

double Emt::frobenius() const {
    double s = 0;
    for (const auto& v : values) s += v.squaredNorm();
    return std::sqrt(s);
}

Emt compute_emt(const ReferenceShape& B, cplx c, EmtForm form) {
    const SurfaceMesh& m = *B.mesh();
    const auto R = B.resolvent(kappa_of_c(c));
    Emt emt;
    emt.contrast = c;
    emt.lambda = B.params().lambda();
    emt.mu = B.params().mu();
    emt.mesh_hash = m.hash();
    emt.condition = R->condition();
    emt.near_resonance = R->near_resonance();
    const int n = m.num_elements();
    std::array<Density, 9> sol;
#pragma omp parallel for schedule(static)
    for (int jb = 0; jb < 9; ++jb) {
        const int j = jb / 3, b = jb % 3;
        Vec3c ej = Vec3c::Zero();
        ej[j] = 1.0;
        Density rhs = polynomial_traction(m, unit(b), ej, B.params());
        if (form == EmtForm::Long)
            rhs = (c * B.interior_np_of_S_inverse(polynomial_trace(m, unit(b), ej)) - rhs) / (c - 1.0);
        sol[jb] = R->solve(rhs);
    }
    for (int j = 0; j < 3; ++j)
        for (int b = 0; b < 3; ++b) {
            const Density& X = sol[3 * j + b];
            for (int a = 0; a < 3; ++a) {
                Vec3c v = Vec3c::Zero();
                for (int e = 0; e < n; ++e) v += m.areas()[e] * m.centroids()[e][a] * X.segment<3>(3 * e);
                emt(j, a, b) = v;
            }
        }
    return emt;
}

std::vector<Vec3c> far_field_expansion(const Emt& emt, const ReferenceShape& B, const PointForceSource& src,
                                       const BodyFrame& frame, const std::vector<Vec3>& targets) {
    const LameParams& p = B.params();
    if (p.lambda() != emt.lambda || p.mu() != emt.mu) throw InvalidParameter("EMT computed for other Lame parameters");
    if (B.mesh()->hash() != emt.mesh_hash) throw DimensionError("EMT computed on another reference mesh");
    const Vec3& z = frame.center;
    const double d3 = std::pow(frame.delta, 3);
    const double guard = 2.0 * frame.delta * B.radius();
    const auto Fz = source_field(src, p, {z}, 1)[0];
    std::vector<Vec3c> out;
    out.reserve(targets.size());
    for (const auto& x : targets) {
        const double d = (x - z).norm();
        if (d <= guard) throw NearFieldError("far-field target inside the near zone of the inclusion", d, guard);
        const auto dG = gamma_gradient(x - z, src.omega, p);
        Vec3c corr = Vec3c::Zero();
        for (int j = 0; j < 3; ++j)
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) corr += dG[a] * emt(j, a, b) * Fz.gradient[b][j];
        out.push_back(source_field(src, p, {x})[0].value + d3 * corr);
    }
    return out;
}

void write_emt_json(std::ostream& out, const Emt& emt, const std::string& extra_json) {
    nlohmann::ordered_json j;
    j["contrast"] = {emt.contrast.real(), emt.contrast.imag()};
    j["lambda"] = emt.lambda;
    j["mu"] = emt.mu;
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(emt.mesh_hash));
    j["mesh_hash"] = hash;
    j["condition"] = emt.condition;
    j["near_resonance"] = emt.near_resonance;
    j["index_order"] = "values[j][alpha][beta][i] = [re, im]";
    nlohmann::ordered_json vals = nlohmann::ordered_json::array();
    for (int jj = 0; jj < 3; ++jj) {
        nlohmann::ordered_json ja = nlohmann::ordered_json::array();
        for (int a = 0; a < 3; ++a) {
            nlohmann::ordered_json jb = nlohmann::ordered_json::array();
            for (int b = 0; b < 3; ++b) {
                nlohmann::ordered_json ji = nlohmann::ordered_json::array();
                for (int i = 0; i < 3; ++i) ji.push_back({emt(jj, a, b)[i].real(), emt(jj, a, b)[i].imag()});
                jb.push_back(ji);
            }
            ja.push_back(jb);
        }
        vals.push_back(ja);
    }
    j["values"] = vals;
    const auto extra = nlohmann::ordered_json::parse(extra_json);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    out << j.dump(2) << "\n";
}

Emt read_emt_json(std::istream& in) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        Emt e;
        e.contrast = cplx(j.at("contrast").at(0).get<double>(), j.at("contrast").at(1).get<double>());
        e.lambda = j.at("lambda").get<double>();
        e.mu = j.at("mu").get<double>();
        e.mesh_hash = std::stoull(j.at("mesh_hash").get<std::string>(), nullptr, 16);
        e.condition = j.at("condition").get<double>();
        e.near_resonance = j.at("near_resonance").get<bool>();
        const auto& v = j.at("values");
        for (int jj = 0; jj < 3; ++jj)
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    for (int i = 0; i < 3; ++i) {
                        const auto& x = v.at(jj).at(a).at(b).at(i);
                        e(jj, a, b)[i] = cplx(x.at(0).get<double>(), x.at(1).get<double>());
                    }
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(std::string("malformed EMT JSON: ") + ex.what());
    }
}

}  // namespace lamebem
