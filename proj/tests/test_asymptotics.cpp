#include <doctest.h>

#include "lamebem/asymptotics.hpp"
#include "lamebem/errors.hpp"

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

using namespace lamebem;

namespace {

const LameParams kP(1.0, 1.0);

const ReferenceShape& shape(int level) {
    static std::map<int, std::unique_ptr<ReferenceShape>> cache;
    auto& s = cache[level];
    if (!s) s = std::make_unique<ReferenceShape>(std::make_shared<SurfaceMesh>(make_unit_sphere_mesh(level)), kP);
    return *s;
}

const PointForceSource kSrc{{Vec3(5.0, 0.0, 0.0)}, {Vec3c(1.0, 0.0, 0.0)}, 1.0};
const PointForceSource kSrc2{{Vec3(1.0, 4.0, -2.0)}, {Vec3c(0.3, 1.0, cplx(0, 0.5))}, 1.0};

MultiIndex unit(int k) {
    MultiIndex a{0, 0, 0};
    a[k] = 1;
    return a;
}

double rel(const Density& a, const Density& b) { return (a - b).norm() / b.norm(); }

// Least-squares fit of M(j,a,b)_i by the isotropic basis
// d_ij d_ab, d_ia d_jb, d_ib d_ja; returns the relative residual.
double isotropy_residual(const Emt& m) {
    Eigen::MatrixXcd A(81, 3);
    Eigen::VectorXcd y(81);
    int r = 0;
    for (int j = 0; j < 3; ++j)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int i = 0; i < 3; ++i, ++r) {
                    A(r, 0) = double(i == j && a == b);
                    A(r, 1) = double(i == a && j == b);
                    A(r, 2) = double(i == b && j == a);
                    y[r] = m(j, a, b)[i];
                }
    const Eigen::VectorXcd coef = A.colPivHouseholderQr().solve(y);
    return (A * coef - y).norm() / y.norm();
}

double major_asymmetry(const Emt& m) {
    double d = 0;
    for (int j = 0; j < 3; ++j)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int i = 0; i < 3; ++i) d += std::norm(m(j, a, b)[i] - m(i, b, a)[j]);
    return std::sqrt(d) / m.frobenius();
}

double emt_distance(const Emt& a, const Emt& b) {
    double d = 0;
    for (int k = 0; k < 27; ++k) d += (a.values[k] - b.values[k]).squaredNorm();
    return std::sqrt(d);
}

}  // namespace

TEST_CASE("contrast parameter maps") {
    CHECK(kappa_of_c(-1.0) == 0.0);
    CHECK(c_of_kappa(0.0) == -1.0);
    CHECK(kappa_of_c(3.0) == 1.0);
    CHECK(kappa_of_c(2.0) == 1.5);
    CHECK_THROWS_AS(kappa_of_c(1.0), PoleError);
    CHECK_THROWS_AS(c_of_kappa(0.5), PoleError);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-5, 5), v(0, 5);
    for (int t = 0; t < 50; ++t) {
        const cplx c(u(rng), v(rng));
        CHECK(std::abs(c_of_kappa(kappa_of_c(c)) - c) < 1e-12 * std::abs(c));
        const cplx k(u(rng), u(rng));
        CHECK(std::abs(kappa_of_c(c_of_kappa(k)) - k) < 1e-12 * (1 + std::abs(k)));
        // Positive contrasts map outside [-1/2, 1/2].
        const double cp = v(rng) + 1e-3;
        if (cp != 1.0) CHECK(std::abs(kappa_of_c(cp)) > 0.5);
    }
}

TEST_CASE("polynomial tractions") {
    const auto& B = shape(1);
    const SurfaceMesh& m = *B.mesh();
    // u = y_0 e_0: div u = 1, grad u = e_0 e_0^T.
    const Density t = polynomial_traction(m, unit(0), Vec3c(1, 0, 0), kP);
    for (int e = 0; e < m.num_elements(); ++e) {
        const Vec3 nu = m.normals()[e];
        const Vec3 expect = kP.lambda() * nu + 2 * kP.mu() * nu[0] * Vec3::UnitX();
        CHECK((t.segment<3>(3 * e) - expect.cast<cplx>()).norm() < 1e-14);
    }
    // A rigid rotation has zero traction.
    const Density r = polynomial_traction(m, unit(1), Vec3c(1, 0, 0), kP) -
                      polynomial_traction(m, unit(0), Vec3c(0, 1, 0), kP);
    CHECK(r.norm() < 1e-13);
    CHECK_THROWS_AS(psi_beta0(B, 3.0, {1, 1, 1}, Vec3c::Ones()), UnsupportedOrder);
    CHECK_THROWS_AS(psi_beta0_short(B, 3.0, {2, 0, 0}, Vec3c::Ones()), UnsupportedOrder);
}

TEST_CASE("leading densities") {
    const auto& B = shape(3);
    const SurfaceMesh& m = *B.mesh();
    const Vec3 z = Vec3::Zero();
    const cplx c = 3.0;
    const Vec3c Fz = source_field(kSrc2, kP, {z})[0].value;

    SUBCASE("psi_00 vanishes") {
        const Density scale = B.solve_S(constant_density(m, Fz));
        CHECK(psi_beta0(B, c, {0, 0, 0}, Fz).norm() < 1e-2 * scale.norm());
    }
    SUBCASE("psi_01 vanishes") {
        const Density scale = B.solve_S(constant_density(m, Fz));
        CHECK(psi_01(B, c, omega1_factor(c), Fz).norm() < 1e-2 * scale.norm());
    }
    SUBCASE("first order: zero mean") {
        for (int k = 0; k < 3; ++k) {
            const Vec3c dF = source_derivative(kSrc2, kP, z, unit(k));
            const Density lf = psi_beta0(B, c, unit(k), dF);
            CHECK(integrate(m, lf).norm() < 1e-10 * l2_norm(m, lf));
        }
    }
    SUBCASE("psi_02 linearity and frequency scaling") {
        const cplx w1 = omega1_factor(c);
        const Density a = psi_02(B, c, w1, Fz);
        CHECK(rel(psi_02(B, c, w1, 2.0 * Fz), 2.0 * a) < 1e-15);
        CHECK(rel(psi_02(B, c, 2.0 * w1, Fz), 4.0 * a) < 1e-15);
    }
}

namespace {

struct FirstOrderPair {
    Density long_form, short_form;
};

// Long and short first-order densities with one dense matrix alive at a time,
// so that level 4 fits in memory. Real contrast only.
FirstOrderPair first_order_lean(const SurfaceMesh& m, double c, const MultiIndex& beta, const Vec3c& dF) {
    const double kappa = kappa_of_c(c).real();
    const Density f = polynomial_trace(m, beta, dF), t = polynomial_traction(m, beta, dF, kP);
    Density x(f.size());
    {
        Eigen::MatrixXd S = assemble_single_layer_static(m, kP);
        Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXd>> lu(S);
        x.real() = lu.solve(f.real());
        x.imag() = lu.solve(f.imag());
    }
    Eigen::MatrixXd K = assemble_np_adjoint_static(m, kP);
    const Density rl = (t - c * (K * x - 0.5 * x)) / (c - 1.0), rs = -t;
    K.diagonal().array() -= kappa;
    Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXd>> lu(K);
    FirstOrderPair out{Density(f.size()), Density(f.size())};
    out.long_form.real() = lu.solve(rl.real());
    out.long_form.imag() = lu.solve(rl.imag());
    out.short_form.real() = lu.solve(rs.real());
    out.short_form.imag() = lu.solve(rs.imag());
    return out;
}

}  // namespace

TEST_CASE("first-order long and short forms converge") {
    const Vec3c dF(1.0, 0.5, 0.2);
    const MultiIndex beta = unit(0);
    const auto& B = shape(3);
    const FirstOrderPair p3 = first_order_lean(*B.mesh(), 3.0, beta, dF);
    CHECK(rel(p3.long_form, psi_beta0(B, 3.0, beta, dF)) < 1e-10);
    CHECK(rel(p3.short_form, psi_beta0_short(B, 3.0, beta, dF)) < 1e-10);
    const double gap3 = rel(p3.long_form, p3.short_form);
    const FirstOrderPair p4 = first_order_lean(make_unit_sphere_mesh(4), 3.0, beta, dF);
    const double gap4 = rel(p4.long_form, p4.short_form);
    MESSAGE("long/short gap: level 3 ", gap3, ", level 4 ", gap4);
    CHECK(gap4 < gap3);
    CHECK(gap4 < 1e-2);
}

TEST_CASE("moment identities") {
    const auto& B = shape(3);
    for (cplx c : {cplx(3, 0), cplx(-2, 0.3)}) {
        const MomentReport r = moment_identity_residuals(B, c, kSrc2, Vec3::Zero());
        CHECK(r.residual_a < 5e-2);
        CHECK(r.residual_b < 3e-2);
        CHECK(r.residual_c < 5e-2);
    }
    // Against the exact ball volume rather than the mesh volume.
    const Vec3c Fz = source_field(kSrc, kP, {Vec3::Zero()})[0].value;
    const Vec3c I = integrate(*B.mesh(), psi_02(B, 3.0, omega1_factor(3.0), Fz));
    const Vec3c target = -(4.0 * M_PI / 3.0) * Fz;
    CHECK((I - target).norm() < 3e-2 * target.norm());
}

TEST_CASE("lower-order far-field terms vanish") {
    const auto& B = shape(2);
    const SurfaceMesh& m = *B.mesh();
    const Vec3 z = Vec3::Zero(), x(0.5, 3.0, -1.0);
    const double delta = 0.1;
    const cplx c = 3.0, w1 = omega1_factor(c);
    const Vec3c Fz = source_field(kSrc2, kP, {z})[0].value;
    const Mat3c G = kupradze_matrix(x - z, 1.0, kP);
    const auto dG = gamma_gradient(x - z, 1.0, kP);

    const Density p00 = psi_beta0(B, c, {0, 0, 0}, Fz), p01 = psi_01(B, c, w1, Fz);
    Vec3c low = delta * G * (integrate(m, p00) + delta * integrate(m, p01));
    for (int k = 0; k < 3; ++k) {
        const Density pb = psi_beta0(B, c, unit(k), source_derivative(kSrc2, kP, z, unit(k)));
        low += delta * delta * G * integrate(m, pb);
        Vec3c mom = Vec3c::Zero();
        for (int e = 0; e < m.num_elements(); ++e) mom += m.areas()[e] * m.centroids()[e][k] * p00.segment<3>(3 * e);
        low -= delta * delta * dG[k] * mom;
    }
    const Emt emt = compute_emt(B, c);
    const Vec3c third = far_field_expansion(emt, B, kSrc2, {delta, z}, {x})[0] - source_field(kSrc2, kP, {x})[0].value;
    CHECK(low.norm() < 1e-2 * third.norm());
}

TEST_CASE("elastic moment tensor of the ball") {
    const auto& B = shape(3);
    const Emt m = compute_emt(B, 3.0);
    CHECK_FALSE(m.near_resonance);
    CHECK(m.frobenius() > 0);
    CHECK(isotropy_residual(m) < 2e-2);
    CHECK(major_asymmetry(m) < 2e-2);
    const Emt s = compute_emt(B, 3.0, EmtForm::Short);
    CHECK(isotropy_residual(s) < 2e-2);
    CHECK(major_asymmetry(s) < 2e-2);
    CHECK(emt_distance(m, s) < 2e-2 * m.frobenius());
    const Emt m2 = compute_emt(B, 3.0 + 1e-3);
    CHECK(emt_distance(m, m2) < 1e-1 * m.frobenius());
}

TEST_CASE("EMT on the positive contrast axis") {
    const auto& B = shape(2);
    double prev = -1;
    for (double c = 0.1; c < 20; c *= 1.5) {
        if (std::abs(c - 1.0) < 1e-9) continue;
        const Emt m = compute_emt(B, c);
        bool finite = true;
        for (const auto& v : m.values) finite = finite && v.allFinite();
        CHECK(finite);
        CHECK_FALSE(m.near_resonance);
        if (prev >= 0) CHECK(std::isfinite(m.frobenius()));
        prev = m.frobenius();
    }
}

TEST_CASE("far-field expansion") {
    const auto& B = shape(2);
    const Emt emt = compute_emt(B, 3.0);
    const Vec3 z(0.2, -0.1, 0.0), x(0.0, 3.0, 0.5);
    const Vec3c F = source_field(kSrc, kP, {x})[0].value;
    SUBCASE("delta cubed scaling") {
        const Vec3c a = far_field_expansion(emt, B, kSrc, {0.1, z}, {x})[0] - F;
        const Vec3c b = far_field_expansion(emt, B, kSrc, {0.05, z}, {x})[0] - F;
        CHECK((a - 8.0 * b).norm() < 1e-12 * F.norm());
        CHECK(a.norm() > 1e-6 * F.norm());
    }
    SUBCASE("near zone") {
        CHECK_THROWS_AS(far_field_expansion(emt, B, kSrc, {0.1, z}, {z + Vec3(0.15, 0, 0)}), NearFieldError);
    }
    SUBCASE("agrees with the full solve") {
        std::vector<double> err;
        const std::vector<Vec3> targets = {Vec3(0, 3, 0), Vec3(-2, 2, 1), Vec3(1, -1, 2.6)};
        for (double delta : {0.2, 0.1}) {
            const BodyFrame frame{delta, Vec3::Zero()};
            const TransmissionProblem prob{std::make_shared<SurfaceMesh>(scale_translate(*B.mesh(), frame)), 3.0, kP,
                                           1.0};
            const auto full = evaluate_solution(prob, solve_transmission(prob, kSrc), kSrc, targets);
            const auto asym = far_field_expansion(emt, B, kSrc, frame, targets);
            double num = 0, den = 0;
            for (std::size_t t = 0; t < targets.size(); ++t) {
                const Vec3c f = source_field(kSrc, kP, {targets[t]})[0].value;
                num += (full[t].u - asym[t]).squaredNorm();
                den += (full[t].u - f).squaredNorm();
            }
            err.push_back(std::sqrt(num / den));
        }
        CHECK(err[0] < 3e-2);
        CHECK(err[1] < err[0]);
    }
    SUBCASE("source-receiver swap") {
        const Vec3 xa(2.5, 0.5, -0.4), xb(-0.6, 2.8, 1.0);
        const Vec3c qa(1.0, 0.3, 0.0), qb(0.0, 0.4, 1.0);
        const BodyFrame frame{0.1, Vec3::Zero()};
        const PointForceSource a{{xa}, {qa}, 1.0}, b{{xb}, {qb}, 1.0};
        const cplx ab = qb.transpose() * (far_field_expansion(emt, B, a, frame, {xb})[0] -
                                          source_field(a, kP, {xb})[0].value);
        const cplx ba = qa.transpose() * (far_field_expansion(emt, B, b, frame, {xa})[0] -
                                          source_field(b, kP, {xa})[0].value);
        CHECK(std::abs(ab - ba) < 1e-2 * std::abs(ab));
    }
    SUBCASE("mesh and parameter checks") {
        const ReferenceShape other(std::make_shared<SurfaceMesh>(make_unit_sphere_mesh(1)), kP);
        CHECK_THROWS_AS(far_field_expansion(emt, other, kSrc, {0.1, z}, {x}), DimensionError);
    }
}

TEST_CASE("EMT JSON export") {
    const auto& B = shape(1);
    const Emt m = compute_emt(B, cplx(-2, 0.5));
    std::ostringstream os;
    write_emt_json(os, m, R"({"version":"test"})");
    const auto j = nlohmann::json::parse(os.str());
    CHECK(j["contrast"][0].get<double>() == -2.0);
    CHECK(j["contrast"][1].get<double>() == 0.5);
    CHECK(j["version"] == "test");
    REQUIRE(j["values"].size() == 3);
    for (int jj = 0; jj < 3; ++jj)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int i = 0; i < 3; ++i) {
                    CHECK(j["values"][jj][a][b][i][0].get<double>() == m(jj, a, b)[i].real());
                    CHECK(j["values"][jj][a][b][i][1].get<double>() == m(jj, a, b)[i].imag());
                }
}
