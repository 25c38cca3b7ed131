#include "lamebem/resonance.hpp"

#include "lamebem/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace lamebem {

double cubic_root_near(double g, double k0, double near) {
    // Companion matrix of k^3 - k0^2 k - g.
    Eigen::Matrix3d C;
    C << 0, k0 * k0, g, 1, 0, 0, 0, 1, 0;
    const Eigen::Vector3cd r = C.eigenvalues();
    double best = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < 3; ++i) {
        if (std::abs(r[i].imag()) > 1e-7) continue;
        double k = r[i].real();
        for (int it = 0; it < 3; ++it) {
            const double d = 3 * k * k - k0 * k0;
            if (d == 0) break;
            k -= (h_poly(k, k0) - g) / d;
        }
        if (!(k > -0.5 && k < 0.5)) continue;
        if (std::isnan(best) || std::abs(k - near) < std::abs(best - near)) best = k;
    }
    if (std::isnan(best)) throw SpectralInconsistency("no root of h(k) = g in (-1/2, 1/2)");
    return best;
}

double resonant_contrast(const SpectralData& sd, int n) {
    if (n < 0 || n >= static_cast<int>(sd.gb_eigenvalues.size())) throw InvalidParameter("eigenvalue index out of range");
    const double k = cubic_root_near(sd.gb_eigenvalues[n], sd.k0, sd.np_eigenvalues[n]);
    const double c0 = c_of_kappa(k).real();
    if (!(c0 < 0)) throw SpectralInconsistency("resonant contrast with nonnegative real part");
    return c0;
}

Density constant_gradient_traction(const SurfaceMesh& mesh, const PointForceSource& src, const LameParams& p,
                                   const Vec3& z) {
    const auto f = source_field(src, p, {z}, 1)[0];
    Density t = Density::Zero(mesh.num_dofs());
    for (int k = 0; k < 3; ++k) {
        MultiIndex b{0, 0, 0};
        b[k] = 1;
        t += polynomial_traction(mesh, b, f.gradient[k], p);
    }
    return t;
}

namespace {

Density real_times(const Eigen::MatrixXd& A, const Density& x) {
    Density y(A.rows());
    y.real() = A * x.real();
    y.imag() = A * x.imag();
    return y;
}

}  // namespace

Density phi_F(const ReferenceShape& B, double k, double k0, const Density& traction) {
    const Density Kt = real_times(B.Kstar(), traction);
    return real_times(B.Kstar(), Kt) + k * Kt + (k * k - k0 * k0) * traction;
}

std::vector<std::vector<int>> np_clusters(const SpectralData& sd, double tol) {
    const int n = static_cast<int>(sd.np_eigenvalues.size());
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return sd.np_eigenvalues[a] < sd.np_eigenvalues[b]; });
    std::vector<std::vector<int>> out;
    for (int i = 0; i < n; ++i) {
        const double k = sd.np_eigenvalues[idx[i]];
        if (out.empty() || k - sd.np_eigenvalues[out.back().back()] > tol * std::max(1.0, std::abs(k)))
            out.emplace_back();
        out.back().push_back(idx[i]);
    }
    return out;
}

ProjectionDiagnostic::ProjectionDiagnostic(const ReferenceShape& B, const SpectralData& sd, const HInnerProduct& ip,
                                           const PointForceSource& src, const Vec3& z)
    : sd_(sd), ip_(ip) {
    if (sd.eigenfunctions.rows() != B.Kstar().rows()) throw DimensionError("spectrum does not match the reference mesh");
    t_ = constant_gradient_traction(*B.mesh(), src, B.params(), z);
    Kt_ = real_times(B.Kstar(), t_);
    KKt_ = real_times(B.Kstar(), Kt_);
}

std::vector<double> ProjectionDiagnostic::each(const std::vector<int>& modes) const {
    if (modes.empty()) throw InvalidParameter("empty mode list");
    for (int n : modes)
        if (n < 0 || n >= sd_.eigenfunctions.cols()) throw InvalidParameter("eigenvalue index out of range");
    const double k = cubic_root_near(sd_.gb_eigenvalues[modes[0]], sd_.k0, sd_.np_eigenvalues[modes[0]]);
    const Density f = KKt_ + k * Kt_ + (k * k - sd_.k0 * sd_.k0) * t_;
    const Density Gf = real_times(ip_.gram(), f);
    const double nf = std::sqrt(std::abs(f.dot(Gf)));
    std::vector<double> out(modes.size(), 0.0);
    if (nf == 0) return out;
    for (std::size_t i = 0; i < modes.size(); ++i)
        out[i] = std::abs(sd_.eigenfunctions.col(modes[i]).cast<cplx>().dot(Gf)) / nf;
    return out;
}

double ProjectionDiagnostic::operator()(const std::vector<int>& modes) const {
    double s = 0;
    for (double v : each(modes)) s += v * v;
    return std::sqrt(s);
}

double projection_magnitude(const ReferenceShape& B, const SpectralData& sd, const HInnerProduct& ip, int n,
                            const PointForceSource& src, const Vec3& z) {
    return ProjectionDiagnostic(B, sd, ip, src, z)({n});
}

ModeChoice select_resonant_mode(const ReferenceShape& B, const SpectralData& sd, const HInnerProduct& ip,
                                const PointForceSource& src, const Vec3& z, double margin) {
    const ProjectionDiagnostic proj(B, sd, ip, src, z);
    const auto clusters = np_clusters(sd);
    ModeChoice pick;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const auto& members = clusters[c];
        const int i0 = members[0];
        if (std::abs(sd.np_eigenvalues[i0]) >= 0.5 - margin) continue;
        ModeChoice m;
        const std::vector<double> single = proj.each(members);
        double s = 0, best_single = -1;
        for (std::size_t i = 0; i < members.size(); ++i) {
            s += single[i] * single[i];
            if (single[i] > best_single) best_single = single[i], m.index = members[i];
        }
        m.projection = std::sqrt(s);
        if (m.projection <= kProjectionThreshold) continue;
        m.multiplicity = static_cast<int>(members.size());
        m.np = sd.np_eigenvalues[m.index];
        m.gb = sd.gb_eigenvalues[m.index];
        m.isolation = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < clusters.size(); ++o)
            if (o != c) m.isolation = std::min(m.isolation, std::abs(sd.gb_eigenvalues[clusters[o][0]] - m.gb));
        if (m.projection > pick.projection || (m.projection == pick.projection && std::abs(m.gb) > std::abs(pick.gb)))
            pick = m;
    }
    if (pick.index >= 0) pick.c0 = resonant_contrast(sd, pick.index);
    return pick;
}

SweepResult sweep(const ReferenceShape& B, const SpectralData& sd, double c0, const std::vector<double>& taus,
                  const BodyFrame& frame, const PointForceSource& src, const std::vector<Vec3>& probes,
                  double projection) {
    if (taus.empty()) throw InvalidParameter("empty tau list");
    for (std::size_t i = 0; i < taus.size(); ++i) {
        if (!(taus[i] > 0) || !std::isfinite(taus[i])) throw InvalidParameter("tau must be positive");
        if (i > 0 && !(taus[i] < taus[i - 1])) throw InvalidParameter("tau list must be strictly descending");
    }
    if (probes.empty()) throw InvalidParameter("no probe points");
    const auto F = source_field(src, B.params(), probes, 0);
    SweepResult res;
    res.probes = probes;
    res.delta = frame.delta;
    res.z = frame.center;
    for (double tau : taus) {
        SweepRow row;
        row.c0 = c0;
        row.tau = tau;
        const cplx c(c0, tau);
        row.kappa = kappa_of_c(c);
        row.distance = spectral_distance(h_poly(row.kappa, sd.k0), sd.gb_eigenvalues);
        row.projection = projection;
        try {
            const Emt emt = compute_emt(B, c);
            const auto u = far_field_expansion(emt, B, src, frame, probes);
            double s = 0;
            for (std::size_t t = 0; t < probes.size(); ++t) s += (u[t] - F[t].value).squaredNorm();
            row.p_norm = std::sqrt(s);
            row.emt_frobenius = emt.frobenius();
            row.condition = emt.condition;
            row.flag = emt.near_resonance ? "near_resonance" : "ok";
        } catch (const SolverError&) {
            row.p_norm = row.emt_frobenius = row.condition = std::numeric_limits<double>::infinity();
            row.flag = "singular";
        }
        res.rows.push_back(row);
    }
    return res;
}

Slope blowup_exponent(const SweepResult& r) {
    std::vector<double> x, y;
    for (const auto& row : r.rows)
        if (std::isfinite(row.p_norm) && row.p_norm > 0) {
            x.push_back(std::log(row.tau));
            y.push_back(std::log(row.p_norm));
        }
    const int n = static_cast<int>(x.size());
    if (n < 3) throw InsufficientData("blow-up fit needs at least 3 finite rows");
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) mx += x[i], my += y[i];
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
    if (sxx == 0) throw InsufficientData("blow-up fit needs distinct tau values");
    Slope s;
    s.points = n;
    s.slope = sxy / sxx;
    double sse = 0;
    for (int i = 0; i < n; ++i) {
        const double e = y[i] - my - s.slope * (x[i] - mx);
        sse += e * e;
    }
    // Two-sided 97.5% Student t quantiles for 1..10 degrees of freedom.
    static const double t975[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228};
    const int df = n - 2;
    const double t = df <= 10 ? t975[df - 1] : 1.96;
    const double se = std::sqrt(sse / df / sxx);
    s.lo = s.slope - t * se;
    s.hi = s.slope + t * se;
    return s;
}

std::vector<double> tau_grid(double tau_max, double tau_min, int per_decade) {
    if (!(tau_max > tau_min) || !(tau_min > 0) || per_decade < 1) throw InvalidParameter("bad tau grid");
    const int steps = static_cast<int>(std::lround(per_decade * std::log10(tau_max / tau_min)));
    std::vector<double> out;
    for (int i = 0; i <= steps; ++i) out.push_back(tau_max * std::pow(tau_min / tau_max, double(i) / steps));
    return out;
}

void write_sweep_csv(std::ostream& out, const SweepResult& r) {
    out << "c0_re,tau,kappa_re,kappa_im,dist,P_norm,emt_frobenius,cond_est,projection_mag,flag\n";
    char buf[512];
    for (const auto& w : r.rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", w.c0, w.tau,
                      w.kappa.real(), w.kappa.imag(), w.distance, w.p_norm, w.emt_frobenius, w.condition, w.projection,
                      w.flag.c_str());
        out << buf;
    }
}

void write_sweep_gnuplot(std::ostream& out, const std::string& csv_name) {
    const std::string f = "'" + csv_name + "'";
    out << "set datafile separator ','\n"
           "set logscale xy\n"
           "set xlabel 'tau'\n"
           "set ylabel 'P_norm'\n"
           "stats "
        << f << " every ::1::1 using 2:6 nooutput\n"
        << "ref(x) = STATS_max_y * STATS_max_x / x\n"
        << "plot " << f << " every ::1 using 2:6 with linespoints title 'P_norm', ref(x) dashtype 2 title 'tau^-1'\n";
}

}  // namespace lamebem
