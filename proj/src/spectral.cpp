#include "lamebem/spectral.hpp"

#include "lamebem/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace lamebem {

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

VectorXd area_vector(const SurfaceMesh& m) {
    VectorXd a(m.num_dofs());
    for (int e = 0; e < m.num_elements(); ++e) a.segment<3>(3 * e).setConstant(m.areas()[e]);
    return a;
}

MatrixXd static_real(const BoundaryOperator& op, OpKind kind, const char* what) {
    if (op.kind != kind) throw InvalidParameter(std::string(what) + ": wrong operator kind " + to_string(op.kind));
    if (op.omega != 0.0) throw InvalidParameter(std::string(what) + ": operator must be assembled at omega = 0");
    if (op.matrix.imag().cwiseAbs().maxCoeff() != 0.0)
        throw InvalidParameter(std::string(what) + ": static operator has a nonzero imaginary part");
    return op.matrix.real();
}

void check_same_size(const BoundaryOperator& op, const HInnerProduct& ip) {
    if (op.matrix.rows() != ip.gram().rows()) throw DimensionError("operator and inner product sizes differ");
}

// C = L^-1 M L^-T for the Cholesky factor of the Gram matrix.
MatrixXd congruence(const MatrixXd& M, const HInnerProduct& ip) {
    const auto L = ip.cholesky().matrixL();
    MatrixXd X = L.solve(M);
    MatrixXd C = L.solve(X.transpose());
    return 0.5 * (C + C.transpose());
}

MatrixXd symmetric_product(const MatrixXd& Ks, const HInnerProduct& ip) {
    const MatrixXd GK = ip.gram() * Ks;
    return 0.5 * (GK + GK.transpose());
}

// Tridiagonal LU with partial pivoting for (kappa - T), T real symmetric
// tridiagonal. Row operations are recorded so several right-hand sides can be
// solved.
struct TriLU {
    std::vector<cplx> d, du, du2, mult;
    std::vector<char> op;  // 0: nothing, 1: eliminate, 2: swap and eliminate
    bool singular = false;

    TriLU(const VectorXd& diag, const VectorXd& sub, cplx kappa) {
        const int n = static_cast<int>(diag.size());
        d.resize(n);
        du.assign(n, 0.0);
        du2.assign(n, 0.0);
        mult.assign(n, 0.0);
        op.assign(n, 0);
        std::vector<cplx> dl(n, 0.0);
        for (int i = 0; i < n; ++i) d[i] = kappa - diag[i];
        for (int i = 0; i + 1 < n; ++i) dl[i] = du[i] = -sub[i];
        auto abs1 = [](cplx z) { return std::abs(z.real()) + std::abs(z.imag()); };
        for (int k = 0; k + 1 < n; ++k) {
            if (dl[k] == 0.0) {
                if (d[k] == 0.0) {
                    singular = true;
                    return;
                }
            } else if (abs1(d[k]) >= abs1(dl[k])) {
                mult[k] = dl[k] / d[k];
                d[k + 1] -= mult[k] * du[k];
                op[k] = 1;
            } else {
                mult[k] = d[k] / dl[k];
                d[k] = dl[k];
                const cplx t = d[k + 1];
                d[k + 1] = du[k] - mult[k] * t;
                if (k + 2 < n) {
                    du2[k] = du[k + 1];
                    du[k + 1] = -mult[k] * du2[k];
                }
                du[k] = t;
                op[k] = 2;
            }
        }
        if (n > 0 && d[n - 1] == 0.0) singular = true;
    }

    void solve(VectorXcd& b) const {
        const int n = static_cast<int>(d.size());
        for (int k = 0; k + 1 < n; ++k) {
            if (op[k] == 1) {
                b[k + 1] -= mult[k] * b[k];
            } else if (op[k] == 2) {
                const cplx t = b[k];
                b[k] = b[k + 1];
                b[k + 1] = t - mult[k] * b[k + 1];
            }
        }
        b[n - 1] /= d[n - 1];
        if (n > 1) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        for (int k = n - 3; k >= 0; --k) b[k] = (b[k] - du[k] * b[k + 1] - du2[k] * b[k + 2]) / d[k];
    }
};

}  // namespace

HInnerProduct::HInnerProduct(const BoundaryOperator& S0) : mesh_(S0.mesh) {
    if (!mesh_) throw InvalidParameter("single layer operator has no mesh");
    const MatrixXd S = static_real(S0, OpKind::S, "H inner product");
    const MatrixXd AS = area_vector(*mesh_).asDiagonal() * S;
    gram_ = -0.5 * (AS + AS.transpose());
    llt_.compute(gram_);
    if (llt_.info() != Eigen::Success) throw AssemblyFault("H Gram matrix is not positive definite");
}

cplx HInnerProduct::operator()(const Density& g, const Density& h) const {
    if (g.size() != gram_.rows() || h.size() != gram_.rows()) throw DimensionError("density does not match H space");
    const VectorXcd Gh = gram_ * h.real() + cplx(0, 1) * (gram_ * h.imag());
    return g.dot(Gh);
}

cplx h_inner_product(const Density& g, const Density& h, const HInnerProduct& ip) { return ip(g, h); }

double h_poly(double k, double k0) { return k * (k * k - k0 * k0); }
cplx h_poly(cplx k, double k0) { return k * (k * k - k0 * k0); }

std::vector<double> SpectralData::np_sorted() const {
    std::vector<double> v = np_eigenvalues;
    std::sort(v.begin(), v.end());
    return v;
}

MatrixXd symmetrize_np(const MatrixXd& Kstar, const HInnerProduct& ip) {
    if (Kstar.rows() != ip.gram().rows()) throw DimensionError("operator and inner product sizes differ");
    return ip.cholesky().solve(symmetric_product(Kstar, ip));
}

SpectralData symmetrized_np_spectrum(const BoundaryOperator& Kstar, const HInnerProduct& ip, const LameParams& p,
                                     bool verify_gb) {
    check_same_size(Kstar, ip);
    const MatrixXd Ks = static_real(Kstar, OpKind::Kstar, "NP spectrum");
    const MatrixXd GK = ip.gram() * Ks;
    const MatrixXd M = 0.5 * (GK + GK.transpose());

    SpectralData sd;
    sd.k0 = p.k0();
    sd.asymmetry = (GK - GK.transpose()).norm() / GK.norm();

    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(M, ip.gram(), Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) throw AssemblyFault("generalized eigensolver failed");
    const VectorXd k = es.eigenvalues();
    const int n = static_cast<int>(k.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double ha = std::abs(h_poly(k[a], sd.k0)), hb = std::abs(h_poly(k[b], sd.k0));
        if (ha != hb) return ha > hb;
        return k[a] < k[b];
    });
    sd.eigenfunctions.resize(n, n);
    for (int i = 0; i < n; ++i) {
        sd.np_eigenvalues.push_back(k[order[i]]);
        sd.gb_eigenvalues.push_back(h_poly(k[order[i]], sd.k0));
        sd.eigenfunctions.col(i) = es.eigenvectors().col(order[i]);
    }

    if (verify_gb) {
        const MatrixXd C = congruence(M, ip);
        MatrixXd P = C * (C * C - sd.k0 * sd.k0 * MatrixXd::Identity(n, n));
        P = 0.5 * (P + P.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> eg(P, Eigen::EigenvaluesOnly);
        std::vector<double> a(eg.eigenvalues().data(), eg.eigenvalues().data() + n);
        std::vector<double> b = sd.gb_eigenvalues;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        double d = 0;
        for (int i = 0; i < n; ++i) d = std::max(d, std::abs(a[i] - b[i]));
        sd.gb_check = d;
    }
    return sd;
}

BoundaryOperator assemble_GB(const BoundaryOperator& Kstar, const LameParams& p) {
    const MatrixXd K = static_real(Kstar, OpKind::Kstar, "G_B");
    const double k0 = p.k0();
    const MatrixXd K2 = K * K;
    BoundaryOperator op;
    op.kind = OpKind::GB;
    op.omega = 0.0;
    op.mesh = Kstar.mesh;
    op.matrix = (K * K2 - k0 * k0 * K).cast<cplx>();
    return op;
}

double max_imag_eigenvalue(const MatrixXd& KH) {
    Eigen::EigenSolver<MatrixXd> es(KH, false);
    if (es.info() != Eigen::Success) throw AssemblyFault("eigensolver failed");
    return es.eigenvalues().imag().cwiseAbs().maxCoeff();
}

ResolventEvaluator::ResolventEvaluator(const BoundaryOperator& Kstar, const HInnerProduct& ip) {
    check_same_size(Kstar, ip);
    const MatrixXd Ks = static_real(Kstar, OpKind::Kstar, "resolvent");
    const MatrixXd C = congruence(symmetric_product(Ks, ip), ip);
    Eigen::Tridiagonalization<MatrixXd> tri(C);
    diag_ = tri.diagonal();
    sub_ = tri.subDiagonal();
}

double ResolventEvaluator::norm(cplx kappa) const {
    const int n = size();
    const TriLU fwd(diag_, sub_, kappa), adj(diag_, sub_, std::conj(kappa));
    if (fwd.singular || adj.singular) return std::numeric_limits<double>::infinity();

    // Lanczos on R^H R with R = (kappa - T)^-1, full reorthogonalization.
    const int m = std::min(n, 160);
    std::vector<VectorXcd> Q;
    std::vector<double> alpha, beta;
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    VectorXcd q(n);
    for (int i = 0; i < n; ++i) q[i] = cplx(U(rng), U(rng));
    q.normalize();
    double prev = 0, theta = 0;
    for (int j = 0; j < m; ++j) {
        Q.push_back(q);
        VectorXcd w = q;
        fwd.solve(w);
        adj.solve(w);
        if (!w.allFinite()) return std::numeric_limits<double>::infinity();
        const double a = q.dot(w).real();
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& v : Q) w -= v.dot(w) * v;
        const double b = w.norm();
        const bool last = (j + 1 == m) || b <= 1e-14 * std::abs(a);
        if ((j + 1) % 8 == 0 || last) {
            const int s = static_cast<int>(alpha.size());
            MatrixXd Tm = MatrixXd::Zero(s, s);
            for (int i = 0; i < s; ++i) Tm(i, i) = alpha[i];
            for (int i = 0; i + 1 < s; ++i) Tm(i, i + 1) = Tm(i + 1, i) = beta[i];
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(Tm, Eigen::EigenvaluesOnly);
            theta = es.eigenvalues().maxCoeff();
            if (last || std::abs(theta - prev) <= 1e-15 * theta) break;
            prev = theta;
        }
        beta.push_back(b);
        q = w / b;
    }
    if (!(theta > 0) || !std::isfinite(theta)) return std::numeric_limits<double>::infinity();
    return std::sqrt(theta);
}

double resolvent_norm(const BoundaryOperator& Kstar, cplx kappa, const HInnerProduct& ip) {
    return ResolventEvaluator(Kstar, ip).norm(kappa);
}

double spectral_distance(cplx value, const std::vector<double>& spectrum) {
    if (spectrum.empty()) throw InsufficientData("spectral distance to an empty spectrum");
    double d = std::numeric_limits<double>::infinity();
    for (double s : spectrum) d = std::min(d, std::abs(value - s));
    return d;
}

double resolvent_factor(cplx kappa, const std::vector<double>& np, double k0) {
    double c = 0;
    for (double k : np) c = std::max(c, std::abs(k * k + kappa * k + kappa * kappa - k0 * k0));
    return c;
}

double fit_resolvent_constant(const std::vector<double>& np, double k0, double re_max, double im_min, double im_max,
                              int samples_per_side) {
    if (np.empty()) throw InsufficientData("resolvent constant needs a spectrum");
    if (!(re_max > 0 && im_max > im_min && im_min >= 0 && samples_per_side >= 2))
        throw InvalidParameter("invalid probe strip");
    double c = 0;
    const int s = samples_per_side;
    for (int i = 0; i < s; ++i) {
        const double t = static_cast<double>(i) / (s - 1);
        const double re = -re_max + 2 * re_max * t, im = im_min + (im_max - im_min) * t;
        for (cplx z : {cplx(re, im_min), cplx(re, im_max), cplx(-re_max, im), cplx(re_max, im)})
            c = std::max(c, resolvent_factor(z, np, k0));
    }
    // The factor is Lipschitz in kappa with constant max|k| + 2 max|kappa|;
    // add half a sample spacing worth of it so the sampled max bounds the sup.
    double kmax = 0;
    for (double k : np) kmax = std::max(kmax, std::abs(k));
    const double lip = kmax + 2 * std::hypot(re_max, im_max);
    const double h = std::max(2 * re_max, im_max - im_min) / (s - 1);
    return c + 0.5 * lip * h;
}

const char* cluster_label(double k, double k0, double tol) {
    const double d0 = std::abs(k), dp = std::abs(k - k0), dm = std::abs(k + k0);
    const double best = std::min({d0, dp, dm});
    if (best > tol) return "none";
    if (best == d0) return "0";
    return best == dp ? "+k0" : "-k0";
}

void write_spectrum_csv(std::ostream& out, const SpectralData& sd) {
    out << "index,np_eigenvalue,gb_eigenvalue,cluster\n";
    char buf[128];
    for (std::size_t i = 0; i < sd.np_eigenvalues.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%s\n", i, sd.np_eigenvalues[i], sd.gb_eigenvalues[i],
                      cluster_label(sd.np_eigenvalues[i], sd.k0));
        out << buf;
    }
}

}  // namespace lamebem
