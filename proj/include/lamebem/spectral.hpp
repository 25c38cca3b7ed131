#pragma once

#include "lamebem/operators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace lamebem {

// (g, h)_H = -<g, S0 h> with the area-weighted pairing. The Gram matrix is
// the symmetric part of -A S0.
class HInnerProduct {
public:
    explicit HInnerProduct(const BoundaryOperator& S0);

    cplx operator()(const Density& g, const Density& h) const;
    const Eigen::MatrixXd& gram() const { return gram_; }
    const Eigen::LLT<Eigen::MatrixXd>& cholesky() const { return llt_; }
    const MeshPtr& mesh() const { return mesh_; }

private:
    MeshPtr mesh_;
    Eigen::MatrixXd gram_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

cplx h_inner_product(const Density& g, const Density& h, const HInnerProduct& ip);

// h(k) = k (k^2 - k0^2)
double h_poly(double k, double k0);
cplx h_poly(cplx k, double k0);

struct SpectralData {
    // Ordered by descending |gb|; np[i] and column i of the eigenfunctions
    // belong to gb[i].
    std::vector<double> gb_eigenvalues;
    std::vector<double> np_eigenvalues;
    Eigen::MatrixXd eigenfunctions;  // H-orthonormal columns
    double k0 = 0;
    // max |h(np) - eig(G_B)| after sorting; negative when not checked.
    double gb_check = -1;
    // ||G K* - (G K*)^T|| / ||G K*||: how far the discrete K* is from H-self-adjoint.
    double asymmetry = 0;

    std::vector<double> np_sorted() const;
};

// H-symmetric part of K*: K_H = G^-1 (G K* + K*^T G)/2.
Eigen::MatrixXd symmetrize_np(const Eigen::MatrixXd& Kstar, const HInnerProduct& ip);

SpectralData symmetrized_np_spectrum(const BoundaryOperator& Kstar, const HInnerProduct& ip, const LameParams& p,
                                     bool verify_gb = false);

// G_B = K* ((K*)^2 - k0^2 I) of the given (static) K* matrix.
BoundaryOperator assemble_GB(const BoundaryOperator& Kstar, const LameParams& p);

// Largest |Im| over the eigenvalues of K_H computed by a general
// (nonsymmetric) eigensolver.
double max_imag_eigenvalue(const Eigen::MatrixXd& KH);

// H-norm of (kappa I - K*)^-1. The H-symmetric K* is reduced to tridiagonal
// form once; each evaluation runs Lanczos on the inverse normal operator with
// pivoted tridiagonal solves. Singular kappa gives +inf.
class ResolventEvaluator {
public:
    ResolventEvaluator(const BoundaryOperator& Kstar, const HInnerProduct& ip);
    double norm(cplx kappa) const;
    int size() const { return static_cast<int>(diag_.size()); }

private:
    Eigen::VectorXd diag_, sub_;
};

double resolvent_norm(const BoundaryOperator& Kstar, cplx kappa, const HInnerProduct& ip);

double spectral_distance(cplx value, const std::vector<double>& spectrum);

// Resolvent constant from the factorization
// (kappa - K*)^-1 = (K*^2 + kappa K* + kappa^2 - k0^2)(h(kappa) - G_B)^-1:
// max over the spectrum of |k^2 + kappa k + kappa^2 - k0^2|.
double resolvent_factor(cplx kappa, const std::vector<double>& np, double k0);

// Sup of resolvent_factor over the closed strip |Re| <= re_max,
// im_min <= |Im| <= im_max, attained on its boundary.
double fit_resolvent_constant(const std::vector<double>& np, double k0, double re_max, double im_min, double im_max,
                              int samples_per_side = 400);

// Cluster label of an NP eigenvalue: "0", "+k0", "-k0" or "none".
const char* cluster_label(double k, double k0, double tol = 0.05);

// CSV columns: index,np_eigenvalue,gb_eigenvalue,cluster
void write_spectrum_csv(std::ostream& out, const SpectralData& sd);

}  // namespace lamebem
