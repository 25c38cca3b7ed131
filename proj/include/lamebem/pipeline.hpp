#pragma once

#include "lamebem/config.hpp"
#include "lamebem/asymptotics.hpp"
#include "lamebem/resonance.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace lamebem {

// Individual invariant residuals; all relative.

// || mu lap u + (lambda + mu) grad div u + S[phi] || / ||S[phi]|| for u = I_B[phi]
// at two interior points, with second differences of step 1e-3.
double residual_lame_of_IB(const SurfaceMesh& mesh, const LameParams& p);
// max_k ||(-I/2 + K*) S^-1 [e_k]|| / ||S^-1 [e_k]||
double residual_np_of_S_inverse(const Eigen::MatrixXd& S, const Eigen::MatrixXd& Kstar);
// max_k ||K e_k - e_k / 2|| / ||e_k|| with K the weighted transpose of K*
double residual_K_constants(const SurfaceMesh& mesh, const Eigen::MatrixXd& Kstar);
// ||S K* - K S|| / (||S|| ||K*||)
double residual_calderon(const SurfaceMesh& mesh, const Eigen::MatrixXd& S, const Eigen::MatrixXd& Kstar);

// Random smooth densities a + B x + c sin(w.x + p); limits from both sides at
// `max_elements` evenly spaced elements. Returns the worst relative error
// against (+-I/2 + K*)[phi].
struct JumpCheck {
    double interior = 0, exterior = 0;
    double worst() const { return std::max(interior, exterior); }
};
JumpCheck residual_jump_relations(const SurfaceMesh& mesh, const LameParams& p, const Eigen::MatrixXd& Kstar,
                                  std::uint64_t seed, int densities = 5, int max_elements = 20);

// Resolvent bound ||(kappa - K*)^-1||_H <= C / d(h(kappa), sigma(G_B)) with C
// fitted on the strip |Re| <= 0.6, 1e-3 <= |Im| <= 0.1 and `probes` random
// held-out kappa in the same strip. ratio = max norm d / C (pass when <= 1).
struct ResolventCheck {
    double constant = 0, ratio = 0;
    int probes = 0;
};
ResolventCheck check_resolvent_bound(const BoundaryOperator& Kstar, const HInnerProduct& ip, const SpectralData& sd,
                                     std::uint64_t seed, int probes = 50);

struct CheckLine {
    std::string name;
    double residual = 0, tolerance = 0;
    bool pass = false;
};

struct ValidationReport {
    std::vector<CheckLine> lines;
    bool pass = false;
};

ValidationReport run_invariant_suite(const RunConfig& cfg);

// Subcommands: mesh, assemble, spectrum, solve, emt, farfield, sweep, validate.
// Returns the process exit status; see docs/cli.md.
int run(const std::string& subcommand, const RunConfig& cfg, std::ostream& log);

}  // namespace lamebem
