#include <doctest.h>

#include "lamebem/errors.hpp"
#include "lamebem/operators.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <sstream>

using namespace lamebem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const LameParams kP(1.0, 1.0);

struct Level {
    MeshPtr mesh;
    MatrixXd S, Ks, K;
};

const Level& level(int l) {
    static std::map<int, Level> cache;
    auto it = cache.find(l);
    if (it != cache.end()) return it->second;
    Level lv;
    lv.mesh = std::make_shared<SurfaceMesh>(make_unit_sphere_mesh(l));
    lv.S = assemble_single_layer_static(*lv.mesh, kP);
    lv.Ks = assemble_np_adjoint_static(*lv.mesh, kP);
    lv.K = assemble_np_static(*lv.mesh, kP);
    return cache.emplace(l, std::move(lv)).first->second;
}

VectorXd unit_constant(int n, int k) {
    VectorXd c = VectorXd::Zero(3 * n);
    for (int e = 0; e < n; ++e) c[3 * e + k] = 1.0;
    return c;
}

MatrixXd area_weighted(const SurfaceMesh& m, const MatrixXd& M) {
    VectorXd a(m.num_dofs());
    for (int e = 0; e < m.num_elements(); ++e) a.segment<3>(3 * e).setConstant(m.areas()[e]);
    return a.asDiagonal() * M;
}

double constant_np_residual(const Level& lv, int k) {
    const VectorXd phi = lv.S.partialPivLu().solve(unit_constant(lv.mesh->num_elements(), k));
    return (lv.Ks * phi - 0.5 * phi).norm() / phi.norm();
}

Vec3c smooth_field(const Vec3& x) {
    return Vec3c(x[0] * x[1] + 0.3, x[2] * x[2] - x[0], 0.5 * x[1] + std::sin(x[2]));
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]), my += std::log(y[i]);
    mx /= x.size(), my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace

TEST_CASE("static single layer is symmetric and negative definite") {
    for (int l : {1, 2}) {
        const auto& lv = level(l);
        const MatrixXd AS = area_weighted(*lv.mesh, lv.S);
        CHECK((AS - AS.transpose()).norm() < 1e-14 * AS.norm());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(-AS, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() > 0);
    }
    const auto& lv = level(3);
    Eigen::LLT<MatrixXd> llt(-area_weighted(*lv.mesh, lv.S));
    CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("single layer of a constant density is constant on the sphere") {
    const auto& lv = level(3);
    const int n = lv.mesh->num_elements();
    for (int k = 0; k < 3; ++k) {
        const VectorXd u = lv.S * unit_constant(n, k);
        const VectorXd uk = Eigen::Map<const VectorXd, 0, Eigen::InnerStride<3>>(u.data() + k, n);
        const double mean = uk.mean();
        CHECK((uk.array() - mean).abs().maxCoeff() < 1e-2 * std::abs(mean));
    }
}

TEST_CASE("single layer self-convergence") {
    // Pair S_L[phi] with a fixed smooth test field; successive differences shrink.
    std::vector<Vec3c> moments;
    for (int l = 1; l <= 3; ++l) {
        const auto& lv = level(l);
        const Density phi = sample(*lv.mesh, smooth_field);
        const Density u = lv.S.cast<cplx>() * phi;
        Vec3c m;
        for (int k = 0; k < 3; ++k) {
            const Density g = sample(*lv.mesh, [k](const Vec3& x) {
                Vec3c v = Vec3c::Zero();
                v[k] = 1.0 + x[(k + 1) % 3] * x[(k + 1) % 3];
                return v;
            });
            m[k] = pairing(*lv.mesh, g, u);
        }
        moments.push_back(m);
    }
    const double d12 = (moments[0] - moments[1]).norm(), d23 = (moments[1] - moments[2]).norm();
    CHECK(d23 < d12);
}

TEST_CASE("constant-density identities") {
    for (int l : {2, 3}) {
        const auto& lv = level(l);
        const int n = lv.mesh->num_elements();
        for (int k = 0; k < 3; ++k) {
            const VectorXd c = unit_constant(n, k);
            CHECK((lv.K * c - 0.5 * c).norm() / c.norm() < 1e-12);
            CHECK(constant_np_residual(lv, k) < 1e-2);
        }
    }
    CHECK(constant_np_residual(level(3), 0) < constant_np_residual(level(2), 0));
    CHECK(constant_np_residual(level(2), 0) < constant_np_residual(level(1), 0));
}

TEST_CASE("K is the weighted transpose of K*") {
    const auto& lv = level(2);
    CHECK((lv.K - weighted_adjoint(*lv.mesh, lv.Ks)).norm() == 0.0);
    // Adjointness under the area-weighted pairing.
    const Density g = sample(*lv.mesh, smooth_field);
    const Density h = sample(*lv.mesh, [](const Vec3& x) { return Vec3c(x[2], 1.0, x[0] * x[1]); });
    const cplx lhs = pairing(*lv.mesh, g, lv.Ks.cast<cplx>() * h);
    const cplx rhs = pairing(*lv.mesh, lv.K.cast<cplx>() * g, h);
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::abs(lhs));
}

TEST_CASE("Calderon identity") {
    for (int l : {2, 3}) {
        const auto& lv = level(l);
        const double r = (lv.S * lv.Ks - lv.K * lv.S).norm() / (lv.S.norm() * lv.Ks.norm());
        CHECK(r < 1e-2);
    }
}

TEST_CASE("jump relations for a smooth density") {
    const auto& lv = level(2);
    const auto& m = *lv.mesh;
    LimitOptions opt;
    opt.refine = 1;
    for (int e = 0; e < m.num_elements(); e += 8) opt.elements.push_back(e);
    const Density phi = sample(m, smooth_field);
    auto pick = [&](const Density& v) {
        Density o(3 * opt.elements.size());
        for (std::size_t k = 0; k < opt.elements.size(); ++k) o.segment<3>(3 * k) = v.segment<3>(3 * opt.elements[k]);
        return o;
    };
    const Density ks = pick(lv.Ks.cast<cplx>() * phi), k = pick(lv.K.cast<cplx>() * phi), ph = pick(phi);
    for (int side : {1, -1}) {
        CAPTURE(side);
        const Density t = single_layer_traction_limit(m, DensityField(smooth_field), 0.0, kP, side, opt);
        const Density tref = side * 0.5 * ph + ks;
        CHECK((t - tref).norm() < 2e-2 * tref.norm());
        const Density d = double_layer_limit(m, DensityField(smooth_field), kP, side, opt);
        const Density dref = -side * 0.5 * ph + k;
        CHECK((d - dref).norm() < 2e-2 * dref.norm());
    }
}

TEST_CASE("traction jump of a piecewise-constant density equals the density") {
    const auto& m = *level(1).mesh;
    const Density phi = sample(m, smooth_field);
    LimitOptions opt;
    opt.elements = {0, 7, 33, 64};
    const Density tp = single_layer_traction_limit(m, phi, 0.0, kP, 1, opt);
    const Density tm = single_layer_traction_limit(m, phi, 0.0, kP, -1, opt);
    for (std::size_t k = 0; k < opt.elements.size(); ++k) {
        const Vec3c jump = tp.segment<3>(3 * k) - tm.segment<3>(3 * k);
        CHECK((jump - phi.segment<3>(3 * opt.elements[k])).norm() < 5e-3 * phi.segment<3>(3 * opt.elements[k]).norm());
    }
    CHECK_THROWS_AS(single_layer_traction_limit(m, phi, 0.0, kP, 0, opt), InvalidParameter);
}

TEST_CASE("double layer of a constant density") {
    const auto& m = *level(2).mesh;
    const Density a = constant_density(m, Vec3c(0.2, -1.0, 0.7));
    for (const Vec3& x : {Vec3(0, 0, 0), Vec3(0.3, -0.4, 0.5), Vec3(0.0, 0.9, 0.0)}) {
        CHECK((double_layer_near(m, a, kP, x) - a.segment<3>(0)).norm() < 1e-6);
    }
    for (const Vec3& x : {Vec3(1.5, 0, 0), Vec3(0.0, -1.05, 0.1), Vec3(3, 3, 3)}) {
        CHECK(double_layer_near(m, a, kP, x).norm() < 1e-6);
    }
}

TEST_CASE("exterior single layer decays like a monopole") {
    const auto& m = *level(2).mesh;
    const Density a = constant_density(m, Vec3c(1, 0, 0));
    const auto u = evaluate_single_layer(m, a, 0.0, kP, {Vec3(2, 0, 0), Vec3(4, 0, 0)});
    CHECK(std::abs(u[1][0] / u[0][0]) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("single layer solves the Lame system off the surface") {
    const auto& m = *level(1).mesh;
    const Density phi = sample(m, smooth_field);
    const cplx w = 1.0;
    const Vec3 x0(2.5, 0.3, -0.2);
    const double h = 1e-3;
    std::vector<Vec3> pts;
    // 3x3x3 stencil plus the center.
    for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
            for (int c = -1; c <= 1; ++c) pts.push_back(x0 + h * Vec3(a, b, c));
    const auto u = evaluate_single_layer(m, phi, w, kP, pts);
    auto at = [&](int a, int b, int c) { return u[(a + 1) * 9 + (b + 1) * 3 + (c + 1)]; };
    auto d2 = [&](int i, int j) -> Vec3c {
        int e[2][3] = {{0, 0, 0}, {0, 0, 0}};
        e[0][i] = 1;
        e[1][j] = 1;
        if (i == j) return (at(e[0][0], e[0][1], e[0][2]) - 2.0 * at(0, 0, 0) + at(-e[0][0], -e[0][1], -e[0][2])) / (h * h);
        return (at(e[0][0] + e[1][0], e[0][1] + e[1][1], e[0][2] + e[1][2]) -
                at(e[0][0] - e[1][0], e[0][1] - e[1][1], e[0][2] - e[1][2]) -
                at(-e[0][0] + e[1][0], -e[0][1] + e[1][1], -e[0][2] + e[1][2]) +
                at(-e[0][0] - e[1][0], -e[0][1] - e[1][1], -e[0][2] - e[1][2])) /
               (4 * h * h);
    };
    Vec3c lap = Vec3c::Zero(), graddiv = Vec3c::Zero();
    for (int i = 0; i < 3; ++i) {
        lap += d2(i, i);
        for (int j = 0; j < 3; ++j) graddiv[i] += d2(i, j)[j];
    }
    const Vec3c res = kP.mu() * lap + (kP.lambda() + kP.mu()) * graddiv + w * w * at(0, 0, 0);
    const double scale = kP.mu() * lap.norm() + (kP.lambda() + kP.mu()) * graddiv.norm() + std::norm(w) * at(0, 0, 0).norm();
    CHECK(res.norm() < 1e-3 * scale);
}

TEST_CASE("near-field evaluation is refused") {
    const auto& m = *level(2).mesh;
    const Density phi = sample(m, smooth_field);
    try {
        evaluate_single_layer(m, phi, 0.0, kP, {Vec3(1.05, 0, 0)});
        FAIL("expected NearFieldError");
    } catch (const NearFieldError& e) {
        CHECK(e.distance() < e.guard());
        CHECK(e.distance() > 0);
    }
    CHECK_NOTHROW(evaluate_single_layer(m, phi, 0.0, kP, {Vec3(3, 0, 0)}));
    CHECK_THROWS_AS(evaluate_single_layer(m, Density::Zero(6), 0.0, kP, {Vec3(3, 0, 0)}), DimensionError);
}

TEST_CASE("R_B annihilates an odd density") {
    const auto& m = *level(2).mesh;
    const Density odd = sample(m, [](const Vec3& x) { return Vec3c(x[0], x[1], x[2]); });
    CHECK(apply_RB(m, odd, kP).norm() < 1e-14);
    const Density a = constant_density(m, Vec3c(1, 0, 0));
    const Vec3c r = apply_RB(m, a, kP);
    CHECK(std::abs(r[0] - kP.gamma3() * m.total_area()) < 1e-12);
}

TEST_CASE("Lame operator of the I_B potential is minus the single layer") {
    const auto& m = *level(2).mesh;
    const Density phi = sample(m, smooth_field);
    const double h = 1e-3;
    for (const Vec3& x0 : {Vec3(0.1, 0.05, -0.1), Vec3(-0.15, 0.1, 0.0)}) {
        std::vector<Vec3> pts;
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b)
                for (int c = -1; c <= 1; ++c) pts.push_back(x0 + h * Vec3(a, b, c));
        const auto v = evaluate_IB(m, phi, kP, pts);
        auto at = [&](const Eigen::Vector3i& o) { return v[(o[0] + 1) * 9 + (o[1] + 1) * 3 + (o[2] + 1)]; };
        Vec3c lap = Vec3c::Zero(), graddiv = Vec3c::Zero();
        const Eigen::Vector3i z = Eigen::Vector3i::Zero();
        for (int i = 0; i < 3; ++i) {
            const Eigen::Vector3i ei = Eigen::Vector3i::Unit(i);
            lap += (at(ei) - 2.0 * at(z) + at(-ei)) / (h * h);
            for (int j = 0; j < 3; ++j) {
                const Eigen::Vector3i ej = Eigen::Vector3i::Unit(j);
                const Vec3c dij = i == j ? Vec3c((at(ei) - 2.0 * at(z) + at(-ei)) / (h * h))
                                         : Vec3c((at(ei + ej) - at(ei - ej) - at(ej - ei) + at(-ei - ej)) / (4 * h * h));
                graddiv[i] += dij[j];
            }
        }
        const Vec3c L = kP.mu() * lap + (kP.lambda() + kP.mu()) * graddiv;
        const Vec3c s = evaluate_single_layer(m, phi, 0.0, kP, {x0})[0];
        CHECK((L + s).norm() < 1e-2 * s.norm());
    }
}

TEST_CASE("P_B integrates to minus the volume times the constant") {
    const auto& lv = level(2);
    const auto& m = *lv.mesh;
    const MatrixXd P = assemble_PB(m, kP);
    for (int k = 0; k < 3; ++k) {
        const VectorXd phi = lv.S.partialPivLu().solve(unit_constant(m.num_elements(), k));
        const Vec3c total = integrate(m, (P * phi).cast<cplx>());
        Vec3c expect = Vec3c::Zero();
        expect[k] = -m.volume();
        CHECK((total - expect).norm() < 2e-2 * m.volume());
    }
}

TEST_CASE("I_B matrix matches off-surface evaluation at centroids") {
    const auto& m = *level(1).mesh;
    const Density phi = sample(m, smooth_field);
    const Density a = apply_IB(m, phi, kP);
    const auto b = evaluate_IB(m, phi, kP, m.centroids());
    for (int e = 0; e < m.num_elements(); ++e) CHECK((a.segment<3>(3 * e) - b[e]).norm() < 1e-12 * (1 + b[e].norm()));
}

TEST_CASE("frequency continuity") {
    const auto& lv = level(1);
    const std::vector<double> ws = {1e-1, 1e-2, 1e-3};
    std::vector<double> dS, dKs, dK;
    for (double w : ws) {
        dS.push_back((assemble_single_layer(lv.mesh, w, kP).matrix - lv.S.cast<cplx>()).norm());
        dKs.push_back((assemble_np_adjoint(lv.mesh, w, kP).matrix - lv.Ks.cast<cplx>()).norm());
        dK.push_back((assemble_np(lv.mesh, w, kP).matrix - lv.K.cast<cplx>()).norm());
    }
    CHECK(slope(ws, dS) == doctest::Approx(1.0).epsilon(0.1));
    // The first-order kernel term is a constant matrix, whose traction vanishes.
    CHECK(slope(ws, dKs) == doctest::Approx(2.0).epsilon(0.1));
    CHECK(slope(ws, dK) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("K at positive frequency is close to the weighted transpose of K*") {
    const auto& lv = level(2);
    const auto Ks = assemble_np_adjoint(lv.mesh, 0.5, kP);
    const auto K = assemble_np(lv.mesh, 0.5, kP);
    CHECK((K.matrix - weighted_adjoint(*lv.mesh, Ks.matrix)).norm() < 1e-2 * K.matrix.norm());
}

TEST_CASE("operator archive round trip") {
    const auto& lv = level(1);
    const auto op = assemble_np_adjoint(lv.mesh, cplx(0.3, 0.01), kP);
    std::stringstream ss;
    write_operator_archive(ss, op, kP, R"({"note":"x"})");
    ArchiveHeader hd;
    const auto back = read_operator_archive(ss, lv.mesh, &hd);
    CHECK(back.kind == OpKind::Kstar);
    CHECK(back.omega == op.omega);
    CHECK(hd.n == lv.mesh->num_dofs());
    CHECK(hd.mesh_hash == lv.mesh->hash());
    CHECK((back.matrix - op.matrix).norm() == 0.0);

    SUBCASE("mesh mismatch is rejected") {
        std::stringstream s2;
        write_operator_archive(s2, op, kP);
        auto other = std::make_shared<SurfaceMesh>(scale_translate(*lv.mesh, {0.5, Vec3::Zero()}));
        CHECK_THROWS_AS(read_operator_archive(s2, other), DimensionError);
    }
    SUBCASE("garbage is rejected") {
        std::stringstream s3("not an archive at all");
        CHECK_THROWS_AS(read_operator_archive(s3, lv.mesh), Error);
    }
    SUBCASE("missing file names the artifact") {
        CHECK_THROWS_AS(read_operator_archive_file("/nonexistent/op.bin", lv.mesh), DependencyError);
    }
}

TEST_CASE("op kind names round trip") {
    for (OpKind k : {OpKind::S, OpKind::K, OpKind::Kstar, OpKind::D, OpKind::RB, OpKind::IB, OpKind::PB, OpKind::GB})
        CHECK(op_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(op_kind_from_string("Q"), InvalidParameter);
}
