#include <doctest.h>

#include "lamebem/errors.hpp"
#include "lamebem/resonance.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <sstream>

using namespace lamebem;

namespace {

const LameParams kP(1.0, 1.0);
const PointForceSource kSrc{{Vec3(5.0, 0.0, 0.0)}, {Vec3c(1.0, 0.0, 0.0)}, 1.0};
const std::vector<Vec3> kProbes = {Vec3(0, 3, 0), Vec3(-2, 2, 1), Vec3(1, -1, 2.6)};
const BodyFrame kFrame{0.1, Vec3::Zero()};

struct Level {
    MeshPtr mesh;
    std::unique_ptr<ReferenceShape> B;
    std::unique_ptr<HInnerProduct> ip;
    SpectralData sd;
};

const Level& level(int l) {
    static std::map<int, Level> cache;
    Level& lv = cache[l];
    if (!lv.B) {
        lv.mesh = std::make_shared<SurfaceMesh>(make_unit_sphere_mesh(l));
        lv.B = std::make_unique<ReferenceShape>(lv.mesh, kP);
        lv.ip = std::make_unique<HInnerProduct>(BoundaryOperator{lv.B->S().cast<cplx>(), OpKind::S, 0.0, lv.mesh});
        lv.sd = symmetrized_np_spectrum(BoundaryOperator{lv.B->Kstar().cast<cplx>(), OpKind::Kstar, 0.0, lv.mesh},
                                        *lv.ip, kP);
    }
    return lv;
}

SweepResult synthetic(const std::vector<double>& taus, double (*p)(double)) {
    SweepResult r;
    for (double t : taus) {
        SweepRow row;
        row.tau = t;
        row.p_norm = p(t);
        r.rows.push_back(row);
    }
    return r;
}

}  // namespace

TEST_CASE("resonant contrast from the cubic") {
    SpectralData sd;
    sd.k0 = 1.0 / 6.0;
    sd.np_eigenvalues = {0.0};
    sd.gb_eigenvalues = {0.0};
    CHECK(cubic_root_near(0.0, sd.k0, 0.0) == 0.0);
    CHECK(resonant_contrast(sd, 0) == -1.0);
    CHECK_THROWS_AS(resonant_contrast(sd, 1), InvalidParameter);
    CHECK_THROWS_AS(cubic_root_near(0.2, sd.k0, 0.0), SpectralInconsistency);

    const SpectralData& s1 = level(1).sd;
    int checked = 0;
    for (std::size_t n = 0; n < s1.np_eigenvalues.size(); ++n) {
        const double k = s1.np_eigenvalues[n];
        if (std::abs(k) >= 0.5 - 1e-9) continue;
        CHECK(std::abs(cubic_root_near(h_poly(k, s1.k0), s1.k0, k) - k) < 1e-10);
        CHECK(resonant_contrast(s1, static_cast<int>(n)) < 0.0);
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("blow-up exponent on constructed rows") {
    const std::vector<double> taus = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
    const Slope a = blowup_exponent(synthetic(taus, [](double t) { return 2.5 / t; }));
    CHECK(a.slope == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(a.lo <= a.slope);
    CHECK(a.hi >= a.slope);
    const Slope b = blowup_exponent(synthetic(taus, [](double) { return 7.0; }));
    CHECK(std::abs(b.slope) < 1e-12);
    CHECK_THROWS_AS(blowup_exponent(synthetic({1e-1, 1e-2}, [](double t) { return 1 / t; })), InsufficientData);
    SweepResult c = synthetic(taus, [](double t) { return 1 / t; });
    c.rows[1].p_norm = c.rows[2].p_norm = c.rows[3].p_norm = INFINITY;
    CHECK_THROWS_AS(blowup_exponent(c), InsufficientData);
}

TEST_CASE("tau grid") {
    const auto g = tau_grid(1e-1, 1e-3, 2);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == 1e-1);
    CHECK(g.back() == doctest::Approx(1e-3).epsilon(1e-14));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i - 1] / g[i] == doctest::Approx(std::sqrt(10.0)));
    CHECK_THROWS_AS(tau_grid(1e-3, 1e-1), InvalidParameter);
}

TEST_CASE("projection diagnostic") {
    const Level& lv = level(2);
    const ProjectionDiagnostic proj(*lv.B, lv.sd, *lv.ip, kSrc, Vec3::Zero());
    // The full eigenbasis captures all of phi_F.
    std::vector<int> all(lv.sd.np_eigenvalues.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    int inner = 0;
    while (std::abs(lv.sd.np_eigenvalues[inner]) > 0.4) ++inner;
    std::swap(all[0], all[inner]);
    CHECK(proj(all) == doctest::Approx(1.0).epsilon(1e-8));
    // Modes near +-1/2 do not see the traction of a linear field.
    for (std::size_t n = 0; n < all.size(); ++n)
        if (std::abs(lv.sd.np_eigenvalues[n]) > 0.45 && std::abs(lv.sd.np_eigenvalues[n]) < 0.5 - 1e-9)
            CHECK(proj({static_cast<int>(n)}) < kProjectionThreshold);
    CHECK(projection_magnitude(*lv.B, lv.sd, *lv.ip, inner, kSrc, Vec3::Zero()) <= 1.0);
    CHECK_THROWS_AS(proj({-1}), InvalidParameter);
    CHECK_THROWS_AS(proj({0}), SpectralInconsistency);  // k = 1/2 has no resonant root

    const auto clusters = np_clusters(lv.sd);
    std::size_t total = 0;
    for (const auto& c : clusters) {
        total += c.size();
        for (int i : c) CHECK(std::abs(lv.sd.np_eigenvalues[i] - lv.sd.np_eigenvalues[c[0]]) < 1e-5);
    }
    CHECK(total == all.size());
}

TEST_CASE("resonant and control sweeps") {
    const Level& lv = level(2);
    const ModeChoice mode = select_resonant_mode(*lv.B, lv.sd, *lv.ip, kSrc, Vec3::Zero());
    REQUIRE(mode.index >= 0);
    CHECK(mode.c0 < 0);
    CHECK(mode.projection > kProjectionThreshold);
    MESSAGE("mode ", mode.index, " k = ", mode.np, " c0 = ", mode.c0, " multiplicity ", mode.multiplicity,
            " projection ", mode.projection);

    const std::vector<double> taus = {1e-1, 1e-2, 1e-3};
    const SweepResult r = sweep(*lv.B, lv.sd, mode.c0, taus, kFrame, kSrc, kProbes, mode.projection);
    REQUIRE(r.rows.size() == 3);
    for (const auto& row : r.rows) {
        CHECK(row.flag == "ok");
        CHECK(row.projection == mode.projection);
        CHECK(std::isfinite(row.p_norm));
    }
    // distance to the spectrum is linear in tau
    for (int i = 0; i < 2; ++i) CHECK(r.rows[i].distance / r.rows[i + 1].distance == doctest::Approx(10.0).epsilon(0.3));
    CHECK(r.rows[2].p_norm / r.rows[1].p_norm == doctest::Approx(10.0).epsilon(0.3));
    CHECK(blowup_exponent(r).slope == doctest::Approx(-1.0).epsilon(0.15));

    const SweepResult ctrl = sweep(*lv.B, lv.sd, 3.0, taus, kFrame, kSrc, kProbes);
    double lo = INFINITY, hi = 0;
    for (const auto& row : ctrl.rows) lo = std::min(lo, row.p_norm), hi = std::max(hi, row.p_norm);
    CHECK(hi / lo < 1.1);
    CHECK(std::abs(blowup_exponent(ctrl).slope) < 0.1);
}

TEST_CASE("sweep guards") {
    const Level& lv = level(1);
    CHECK_THROWS_AS(sweep(*lv.B, lv.sd, -2.0, {}, kFrame, kSrc, kProbes), InvalidParameter);
    CHECK_THROWS_AS(sweep(*lv.B, lv.sd, -2.0, {1e-2, 1e-1}, kFrame, kSrc, kProbes), InvalidParameter);
    CHECK_THROWS_AS(sweep(*lv.B, lv.sd, -2.0, {1e-1, -1e-2}, kFrame, kSrc, kProbes), InvalidParameter);
    CHECK_THROWS_AS(sweep(*lv.B, lv.sd, -2.0, {1e-1}, kFrame, kSrc, {Vec3(0.15, 0, 0)}), NearFieldError);
}

TEST_CASE("positive contrasts stay off resonance") {
    const Level& lv = level(2);
    const ResolventEvaluator res(BoundaryOperator{lv.B->Kstar().cast<cplx>(), OpKind::Kstar, 0.0, lv.mesh}, *lv.ip);
    const double C = fit_resolvent_constant(lv.sd.np_eigenvalues, lv.sd.k0, 2.0, 0.0, 2.0);
    for (cplx c : {cplx(0.1, 0), cplx(0.5, 0), cplx(2, 0), cplx(3, 0), cplx(10, 0), cplx(3, 0.5), cplx(0.3, 1.0)}) {
        const cplx kappa = kappa_of_c(c);
        const double d = spectral_distance(h_poly(kappa, lv.sd.k0), lv.sd.gb_eigenvalues);
        CHECK(res.norm(kappa) <= C / d);
        CHECK_FALSE(compute_emt(*lv.B, c).near_resonance);
    }
}

TEST_CASE("sweep CSV and plot script") {
    SweepResult r;
    SweepRow a;
    a.c0 = -1.0374201;
    a.tau = 0.1;
    a.kappa = cplx(0.1 / 3, -1.0 / 7);
    a.distance = 1e-3 / 3;
    a.p_norm = 2.0 / 3;
    a.emt_frobenius = 12.5;
    a.condition = 42;
    a.projection = 0.9;
    a.flag = "ok";
    r.rows.push_back(a);
    a.tau = 0.01;
    a.p_norm = INFINITY;
    a.flag = "singular";
    r.rows.push_back(a);
    std::ostringstream os;
    write_sweep_csv(os, r);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "c0_re,tau,kappa_re,kappa_im,dist,P_norm,emt_frobenius,cond_est,projection_mag,flag");
    std::getline(is, line);
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string tok; std::getline(ls, tok, ',');) f.push_back(tok);
    REQUIRE(f.size() == 10);
    CHECK(std::stod(f[0]) == a.c0);
    CHECK(std::stod(f[2]) == a.kappa.real());
    CHECK(std::stod(f[3]) == a.kappa.imag());
    CHECK(std::stod(f[4]) == a.distance);
    CHECK(std::stod(f[5]) == 2.0 / 3);
    CHECK(f[9] == "ok");
    std::getline(is, line);
    CHECK(line.find("inf") != std::string::npos);
    CHECK(line.substr(line.size() - 8) == "singular");

    std::ostringstream gp;
    write_sweep_gnuplot(gp, "sweep.csv");
    CHECK(gp.str().find("logscale xy") != std::string::npos);
    CHECK(gp.str().find("'sweep.csv'") != std::string::npos);
}
