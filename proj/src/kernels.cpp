#include "lamebem/kernels.hpp"

#include "lamebem/errors.hpp"

#include <cmath>

namespace lamebem {

namespace {

constexpr double kFourPi = 4.0 * M_PI;
const cplx I1(0.0, 1.0);

// Series is used below this value of |w| r / c_T; the closed form loses
// roughly (|k| r)^-3 relative digits as the argument shrinks.
constexpr double kSeriesSwitch = 1.0;

void require_nonzero(double r, const char* what) {
    if (!(r > 0.0)) throw SingularPoint(std::string(what) + ": evaluation at the singular point x = 0");
}

Radial static_radial(double r, const LameParams& p) {
    const double g1 = p.gamma1() / kFourPi, g2 = p.gamma2() / kFourPi;
    return {-g1 / r, g1 / (r * r), -g2 / r, g2 / (r * r)};
}

// Power series with terms (i w r / c)^n; stops once terms fall below roundoff.
Radial series_sum(cplx w, double r, const LameParams& p, int n_start, int n_max, bool adaptive) {
    const double cT2 = p.mu(), cL2 = p.lambda() + 2.0 * p.mu();
    const cplx uT = I1 * w * r / p.c_T(), uL = I1 * w * r / p.c_L();
    cplx pT = 1.0, pL = 1.0;
    double fact = 1.0;
    cplx sa = 0.0, sb = 0.0, sda = 0.0, sdb = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        if (n > 0) {
            pT *= uT;
            pL *= uL;
            fact *= n;
        }
        if (n < n_start) continue;
        const double den = (n + 2) * fact;
        const cplx ta = ((n + 1.0) * pT / cT2 + pL / cL2) / den;
        const cplx tb = (n - 1.0) * (pT / cT2 - pL / cL2) / den;
        sa += ta;
        sb += tb;
        sda += (n - 1.0) * ta;
        sdb += (n - 1.0) * tb;
        if (adaptive && n > 2 && std::abs(pT) / fact < 1e-18) break;
    }
    const double s1 = 1.0 / (kFourPi * r), s2 = s1 / r;
    return {-s1 * sa, -s2 * sda, s1 * sb, s2 * sdb};
}

struct GDerivs {
    cplx g, g1, g2, g3;
};

GDerivs outgoing(cplx k, double r) {
    const cplx e = std::exp(I1 * k * r);
    const cplx kr = k * r;
    const double r2 = r * r;
    return {e / r, e * (I1 * kr - 1.0) / r2, e * (-kr * kr - 2.0 * I1 * kr + 2.0) / (r2 * r),
            e * (-I1 * kr * kr * kr + 3.0 * kr * kr + 6.0 * I1 * kr - 6.0) / (r2 * r2)};
}

}  // namespace

LameParams::LameParams(double lambda, double mu) : lambda_(lambda), mu_(mu) {
    if (!std::isfinite(lambda) || !std::isfinite(mu) || !(mu > 0.0) || !(3.0 * lambda + 2.0 * mu > 0.0))
        throw InvalidParameter("Lame parameters violate strong convexity (mu > 0, 3 lambda + 2 mu > 0)");
}

cplx LameParams::gamma3() const {
    return -I1 / (12.0 * M_PI) * (2.0 / std::pow(c_T(), 3) + 1.0 / std::pow(c_L(), 3));
}

Contrast::Contrast(cplx c) : c_(c) {
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw InvalidParameter("contrast must be finite");
    if (c.imag() < 0.0) throw InvalidParameter("contrast must satisfy Im c >= 0");
    if (c == cplx(1.0, 0.0)) throw PoleError("contrast c = 1 is a pole of kappa_c");
}

cplx Contrast::kappa() const { return (c_ + 1.0) / (2.0 * (c_ - 1.0)); }

cplx Contrast::omega1_factor() const { return lamebem::omega1_factor(c_); }

cplx omega1_factor(cplx c) {
    if (c.imag() == 0.0) c = cplx(c.real(), +0.0);
    cplx s = 1.0 / std::sqrt(c);
    if (s.real() < 0.0) s = -s;
    if (s.imag() > 0.0) s = std::conj(s);
    return s;
}

Radial kupradze_radial_closed(cplx w, double r, const LameParams& p) {
    require_nonzero(r, "kupradze_radial_closed");
    if (w == 0.0) throw InvalidParameter("closed form requires nonzero frequency");
    const GDerivs t = outgoing(w / p.c_T(), r), l = outgoing(w / p.c_L(), r);
    const cplx f1 = l.g1 - t.g1, f2 = l.g2 - t.g2, f3 = l.g3 - t.g3;
    const cplx s = 1.0 / (kFourPi * w * w);
    const double m = 1.0 / (kFourPi * p.mu());
    Radial out;
    out.A = -m * t.g + s * f1 / r;
    out.dA = -m * t.g1 + s * (f2 / r - f1 / (r * r));
    out.B = s * (f2 - f1 / r);
    out.dB = s * (f3 - f2 / r + f1 / (r * r));
    return out;
}

Radial kupradze_radial_series(cplx w, double r, const LameParams& p, int N, int n_start) {
    require_nonzero(r, "kupradze_radial_series");
    return series_sum(w, r, p, n_start, N, false);
}

Radial kupradze_radial(cplx w, double r, const LameParams& p, bool static_part) {
    require_nonzero(r, "kupradze_radial");
    if (w == 0.0) return static_part ? static_radial(r, p) : Radial{0.0, 0.0, 0.0, 0.0};
    if (std::abs(w) * r / p.c_T() < kSeriesSwitch) return series_sum(w, r, p, static_part ? 0 : 1, 80, true);
    Radial out = kupradze_radial_closed(w, r, p);
    if (!static_part) {
        const Radial s = static_radial(r, p);
        out.A -= s.A;
        out.dA -= s.dA;
        out.B -= s.B;
        out.dB -= s.dB;
    }
    return out;
}

Mat3 kelvin_matrix(const Vec3& x, const LameParams& p) {
    const double r = x.norm();
    require_nonzero(r, "kelvin_matrix");
    const double a = -p.gamma1() / (kFourPi * r), b = -p.gamma2() / (kFourPi * r);
    const Vec3 u = x / r;
    Mat3 G;
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) G(i, j) = G(j, i) = (i == j ? a : 0.0) + b * (u[i] * u[j]);
    return G;
}

Mat3c kupradze_matrix_c(const Vec3& x, cplx w, const LameParams& p, bool static_part) {
    const double r = x.norm();
    require_nonzero(r, "kupradze_matrix");
    const Radial rad = kupradze_radial(w, r, p, static_part);
    const Vec3 u = x / r;
    Mat3c G;
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) G(i, j) = G(j, i) = (i == j ? rad.A : cplx(0.0)) + rad.B * (u[i] * u[j]);
    return G;
}

Mat3c kupradze_matrix(const Vec3& x, double omega, const LameParams& p) {
    if (!(omega > 0.0)) throw InvalidParameter("kupradze_matrix needs omega > 0; use kelvin_matrix for omega = 0");
    return kupradze_matrix_c(x, omega, p);
}

Mat3c kupradze_series(const Vec3& x, double delta, const LameParams& p, int N) {
    const double r = x.norm();
    require_nonzero(r, "kupradze_series");
    if (N < 0) throw InvalidParameter("series truncation order must be nonnegative");
    const double cT = p.c_T(), cL = p.c_L();
    Mat3c out = Mat3c::Zero();
    const Mat3 xx = x * x.transpose();
    for (int n = 0; n <= N; ++n) {
        const cplx in = std::pow(I1, n);
        const double nf = std::tgamma(n + 1.0);
        const cplx c1 = -in / ((n + 2.0) * nf) * ((n + 1.0) / std::pow(cT, n + 2) + 1.0 / std::pow(cL, n + 2)) / kFourPi;
        const cplx c2 = in * (n - 1.0) / ((n + 2.0) * nf) * (1.0 / std::pow(cT, n + 2) - 1.0 / std::pow(cL, n + 2)) / kFourPi;
        out += c1 * std::pow(delta, n) * std::pow(r, n - 1) * Mat3c::Identity();
        out += c2 * std::pow(delta, n) * std::pow(r, n - 3) * xx.cast<cplx>();
    }
    return out;
}

Mat3 lambda_matrix(const Vec3& x, const LameParams& p) {
    const double r = x.norm();
    if (r == 0.0) return Mat3::Zero();
    const double a = (3.0 / std::pow(p.c_T(), 4) + 1.0 / std::pow(p.c_L(), 4)) / (32.0 * M_PI);
    const double b = (1.0 / std::pow(p.c_T(), 4) - 1.0 / std::pow(p.c_L(), 4)) / (32.0 * M_PI);
    return a * r * Mat3::Identity() - b * (x * x.transpose()) / r;
}

Mat3c traction_from_radial(const Radial& rad, const Vec3& d, const Vec3& nu, const LameParams& p) {
    const double r = d.norm();
    require_nonzero(r, "traction");
    const Vec3 u = d / r;
    const double un = u.dot(nu);
    const cplx Br = rad.B / r;
    const cplx div = rad.dA + rad.dB + 2.0 * Br;
    const cplx q = rad.dB - 2.0 * Br;
    const double lam = p.lambda(), mu = p.mu();
    Mat3c T;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            const double dik = (i == k) ? 1.0 : 0.0;
            T(i, k) = lam * nu[i] * u[k] * div +
                      mu * (rad.dA * (un * dik + u[i] * nu[k]) + 2.0 * q * un * u[i] * u[k] +
                            Br * (2.0 * nu[i] * u[k] + nu[k] * u[i] + dik * un));
        }
    return T;
}

Mat3c traction_kernel_c(const Vec3& d, const Vec3& nu, cplx w, const LameParams& p, bool static_part) {
    const double r = d.norm();
    require_nonzero(r, "traction_kernel");
    return traction_from_radial(kupradze_radial(w, r, p, static_part), d, nu, p);
}

Mat3c traction_kernel(const Vec3& x, const Vec3& y, const Vec3& nu_x, double omega, const LameParams& p) {
    if (omega < 0.0) throw InvalidParameter("traction_kernel needs omega >= 0");
    return traction_kernel_c(x - y, nu_x, omega, p);
}

Mat3 traction_kernel_static(const Vec3& d, const Vec3& nu, const LameParams& p) {
    const double r2 = d.squaredNorm();
    const double r = std::sqrt(r2);
    require_nonzero(r, "traction_kernel");
    const Vec3 u = d / r;
    const double un = u.dot(nu);
    const double g1 = p.gamma1() / kFourPi, g2 = p.gamma2() / kFourPi;
    // A' = g1/r^2, B' = g2/r^2, B/r = -g2/r^2.
    const double dA = g1 / r2, Br = -g2 / r2, q = g2 / r2 - 2.0 * Br;
    const double div = dA + g2 / r2 + 2.0 * Br;
    const double lam = p.lambda(), mu = p.mu();
    Mat3 T = (lam * div) * nu * u.transpose() + (mu * dA) * (un * Mat3::Identity() + u * nu.transpose()) +
             (2.0 * mu * q * un) * u * u.transpose() +
             (mu * Br) * (2.0 * nu * u.transpose() + u * nu.transpose() + un * Mat3::Identity());
    return T;
}

Mat3 lambda_traction(const Vec3& d, const Vec3& nu, const LameParams& p) {
    const double r = d.norm();
    require_nonzero(r, "lambda_traction");
    const double a = (3.0 / std::pow(p.c_T(), 4) + 1.0 / std::pow(p.c_L(), 4)) / (32.0 * M_PI);
    const double b = -(1.0 / std::pow(p.c_T(), 4) - 1.0 / std::pow(p.c_L(), 4)) / (32.0 * M_PI);
    const Radial rad{a * r, a, b * r, b};
    return traction_from_radial(rad, d, nu, p).real();
}

std::array<Mat3c, 3> gamma_gradient(const Vec3& x, cplx w, const LameParams& p) {
    const double r = x.norm();
    require_nonzero(r, "gamma_gradient");
    const Radial rad = kupradze_radial(w, r, p);
    const Vec3 u = x / r;
    const cplx Br = rad.B / r, q = rad.dB - 2.0 * Br;
    std::array<Mat3c, 3> g;
    for (int l = 0; l < 3; ++l)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double dij = (i == j), dil = (i == l), djl = (j == l);
                g[l](i, j) = rad.dA * u[l] * dij + q * u[i] * u[j] * u[l] + Br * (dil * u[j] + djl * u[i]);
            }
    return g;
}

Mat3c gamma_derivative(const Vec3& x, double omega, const LameParams& p, const MultiIndex& alpha) {
    if (alpha[0] < 0 || alpha[1] < 0 || alpha[2] < 0) throw InvalidParameter("negative multi-index");
    const int n = order(alpha);
    if (n > 2) throw UnsupportedOrder("gamma_derivative supports |alpha| <= 2");
    if (omega < 0.0) throw InvalidParameter("gamma_derivative needs omega >= 0");
    require_nonzero(x.norm(), "gamma_derivative");
    if (n == 0) return kupradze_matrix_c(x, omega, p);
    if (n == 1) {
        const int l = alpha[0] ? 0 : (alpha[1] ? 1 : 2);
        return gamma_gradient(x, omega, p)[l];
    }
    // Second order: centered difference of the analytic gradient, one
    // Richardson level.
    int a = -1, b = -1;
    for (int k = 0; k < 3; ++k)
        for (int m = 0; m < alpha[k]; ++m) (a < 0 ? a : b) = k;
    const double h = 1e-5 * std::max(1.0, x.norm());
    auto central = [&](double s) {
        Vec3 e = Vec3::Zero();
        e[b] = s;
        return Mat3c((gamma_gradient(x + e, omega, p)[a] - gamma_gradient(x - e, omega, p)[a]) / (2.0 * s));
    };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

}  // namespace lamebem
