#pragma once

#include "lamebem/geometry.hpp"

#include <Eigen/Dense>

#include <array>
#include <complex>

namespace lamebem {

using cplx = std::complex<double>;
using Mat3 = Eigen::Matrix3d;
using Mat3c = Eigen::Matrix3cd;
using Vec3c = Eigen::Vector3cd;
using MultiIndex = std::array<int, 3>;

class LameParams {
public:
    LameParams(double lambda = 1.0, double mu = 1.0);

    double lambda() const { return lambda_; }
    double mu() const { return mu_; }
    double c_T() const { return std::sqrt(mu_); }
    double c_L() const { return std::sqrt(lambda_ + 2.0 * mu_); }
    double gamma1() const { return 0.5 * (1.0 / mu_ + 1.0 / (2.0 * mu_ + lambda_)); }
    double gamma2() const { return 0.5 * (1.0 / mu_ - 1.0 / (2.0 * mu_ + lambda_)); }
    double k0() const { return mu_ / (2.0 * (2.0 * mu_ + lambda_)); }
    cplx k_T(cplx omega) const { return omega / c_T(); }
    cplx k_L(cplx omega) const { return omega / c_L(); }
    // n = 1 coefficient of the low-frequency expansion of the isotropic part.
    cplx gamma3() const;

private:
    double lambda_;
    double mu_;
};

class Contrast {
public:
    explicit Contrast(cplx c);
    cplx c() const { return c_; }
    cplx kappa() const;
    // 1/sqrt(c) on the branch Re > 0, Im <= 0 (negative reals taken from Im c > 0).
    cplx omega1_factor() const;

private:
    cplx c_;
};

// Same branch for any admissible c, including c = 1.
cplx omega1_factor(cplx c);

// Gamma(x) = A(r) I + B(r) xhat xhat^T together with dA/dr and dB/dr.
struct Radial {
    cplx A, dA, B, dB;
};

// Radial profile of the Kupradze matrix for complex frequency w (w = 0 gives
// Kelvin). With static_part = false the Kelvin profile is subtracted, leaving
// the bounded difference kernel.
Radial kupradze_radial(cplx w, double r, const LameParams& p, bool static_part = true);
Radial kupradze_radial_closed(cplx w, double r, const LameParams& p);
// Same quantities summed from the low-frequency power series (n = 0..N).
Radial kupradze_radial_series(cplx w, double r, const LameParams& p, int N, int n_start = 0);

Mat3 kelvin_matrix(const Vec3& x, const LameParams& p);
Mat3c kupradze_matrix(const Vec3& x, double omega, const LameParams& p);
Mat3c kupradze_matrix_c(const Vec3& x, cplx w, const LameParams& p, bool static_part = true);
Mat3c kupradze_series(const Vec3& x, double delta, const LameParams& p, int N);
Mat3 lambda_matrix(const Vec3& x, const LameParams& p);

// Traction in x (normal nu_x) applied columnwise to Gamma(x - y).
Mat3c traction_kernel(const Vec3& x, const Vec3& y, const Vec3& nu_x, double omega, const LameParams& p);
Mat3c traction_kernel_c(const Vec3& d, const Vec3& nu, cplx w, const LameParams& p, bool static_part = true);
Mat3 traction_kernel_static(const Vec3& d, const Vec3& nu, const LameParams& p);
// Traction of the columns of Lambda(d) in the normal nu.
Mat3 lambda_traction(const Vec3& d, const Vec3& nu, const LameParams& p);
// Traction built from an arbitrary radial profile.
Mat3c traction_from_radial(const Radial& rad, const Vec3& d, const Vec3& nu, const LameParams& p);

// grad[l](i,j) = d/dx_l Gamma_ij(x).
std::array<Mat3c, 3> gamma_gradient(const Vec3& x, cplx w, const LameParams& p);
Mat3c gamma_derivative(const Vec3& x, double omega, const LameParams& p, const MultiIndex& alpha);

inline int order(const MultiIndex& a) { return a[0] + a[1] + a[2]; }

}  // namespace lamebem
