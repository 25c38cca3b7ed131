#include "lamebem/pipeline.hpp"

#include "lamebem/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace lamebem {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using ojson = nlohmann::ordered_json;

namespace {

VectorXd unit_constant(int elements, int k) {
    VectorXd c = VectorXd::Zero(3 * elements);
    for (int e = 0; e < elements; ++e) c[3 * e + k] = 1.0;
    return c;
}

Vec3c smooth_field(const Vec3& x) {
    return Vec3c(x[0] * x[1] + 0.3, x[2] * x[2] - x[0], 0.5 * x[1] + std::sin(x[2]));
}

Vec3 vertex_mean(const SurfaceMesh& m) {
    Vec3 c = Vec3::Zero();
    for (const auto& v : m.vertices()) c += v;
    return c / m.num_vertices();
}

}  // namespace

double residual_lame_of_IB(const SurfaceMesh& m, const LameParams& p) {
    const Vec3 c = vertex_mean(m);
    const double r = m.distance_to_surface(c);
    const Density phi = sample(m, smooth_field);
    const double h = 1e-3;
    double worst = 0;
    for (Vec3 dir : {Vec3(1, 0.5, -1), Vec3(-1.5, 1, 0)}) {
        const Vec3 x0 = c + 0.3 * r * dir.normalized();
        std::vector<Vec3> pts;
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b)
                for (int d = -1; d <= 1; ++d) pts.push_back(x0 + h * Vec3(a, b, d));
        const auto v = evaluate_IB(m, phi, p, pts);
        auto at = [&](const Eigen::Vector3i& o) { return v[(o[0] + 1) * 9 + (o[1] + 1) * 3 + (o[2] + 1)]; };
        const Eigen::Vector3i z = Eigen::Vector3i::Zero();
        Vec3c lap = Vec3c::Zero(), graddiv = Vec3c::Zero();
        for (int i = 0; i < 3; ++i) {
            const Eigen::Vector3i ei = Eigen::Vector3i::Unit(i);
            const Vec3c dii = (at(ei) - 2.0 * at(z) + at(-ei)) / (h * h);
            lap += dii;
            for (int j = 0; j < 3; ++j) {
                const Eigen::Vector3i ej = Eigen::Vector3i::Unit(j);
                const Vec3c dij = i == j ? dii : Vec3c((at(ei + ej) - at(ei - ej) - at(ej - ei) + at(-ei - ej)) / (4 * h * h));
                graddiv[i] += dij[j];
            }
        }
        const Vec3c L = p.mu() * lap + (p.lambda() + p.mu()) * graddiv;
        const Vec3c s = single_layer_near(m, phi, 0.0, p, x0, Vec3::UnitZ()).value;
        worst = std::max(worst, (L + s).norm() / s.norm());
    }
    return worst;
}

double residual_np_of_S_inverse(const MatrixXd& S, const MatrixXd& Kstar) {
    const Eigen::PartialPivLU<MatrixXd> lu(S);
    double worst = 0;
    for (int k = 0; k < 3; ++k) {
        const VectorXd phi = lu.solve(unit_constant(static_cast<int>(S.rows() / 3), k));
        worst = std::max(worst, (Kstar * phi - 0.5 * phi).norm() / phi.norm());
    }
    return worst;
}

double residual_K_constants(const SurfaceMesh& mesh, const MatrixXd& Kstar) {
    const MatrixXd K = weighted_adjoint(mesh, Kstar);
    double worst = 0;
    for (int k = 0; k < 3; ++k) {
        const VectorXd c = unit_constant(mesh.num_elements(), k);
        worst = std::max(worst, (K * c - 0.5 * c).norm() / c.norm());
    }
    return worst;
}

double residual_calderon(const SurfaceMesh& mesh, const MatrixXd& S, const MatrixXd& Kstar) {
    const MatrixXd K = weighted_adjoint(mesh, Kstar);
    return (S * Kstar - K * S).norm() / (S.norm() * Kstar.norm());
}

JumpCheck residual_jump_relations(const SurfaceMesh& m, const LameParams& p, const MatrixXd& Kstar,
                                  std::uint64_t seed, int densities, int max_elements) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    LimitOptions opt;
    opt.refine = 1;
    const int stride = std::max(1, m.num_elements() / std::max(1, max_elements));
    for (int e = 0; e < m.num_elements(); e += stride) opt.elements.push_back(e);
    JumpCheck out;
    for (int d = 0; d < densities; ++d) {
        Vec3 a, c, w;
        Eigen::Matrix3d B;
        for (int i = 0; i < 3; ++i) a[i] = N(rng);
        for (int i = 0; i < 9; ++i) B(i) = N(rng);
        for (int i = 0; i < 3; ++i) c[i] = N(rng);
        for (int i = 0; i < 3; ++i) w[i] = N(rng);
        const double ph = N(rng);
        const DensityField f = [=](const Vec3& x) {
            return Vec3c((a + B * x + c * std::sin(w.dot(x) + ph)).cast<cplx>());
        };
        const Density phi = sample(m, f);
        Density ks(phi.size());
        ks.real() = Kstar * phi.real();
        ks.imag() = Kstar * phi.imag();
        for (int side : {1, -1}) {
            const Density t = single_layer_traction_limit(m, f, 0.0, p, side, opt);
            double num = 0, den = 0;
            for (std::size_t k = 0; k < opt.elements.size(); ++k) {
                const int e = opt.elements[k];
                const Vec3c ref = side * 0.5 * phi.segment<3>(3 * e) + ks.segment<3>(3 * e);
                num += (t.segment<3>(3 * k) - ref).squaredNorm();
                den += ref.squaredNorm();
            }
            double& slot = side > 0 ? out.exterior : out.interior;
            slot = std::max(slot, std::sqrt(num / den));
        }
    }
    return out;
}

ResolventCheck check_resolvent_bound(const BoundaryOperator& Kstar, const HInnerProduct& ip, const SpectralData& sd,
                                     std::uint64_t seed, int probes) {
    const ResolventEvaluator R(Kstar, ip);
    const auto v = sd.np_sorted();
    ResolventCheck out;
    out.constant = fit_resolvent_constant(v, sd.k0, 0.6, 1e-3, 1e-1);
    out.probes = probes;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> re(-0.6, 0.6), lg(-3.0, -1.0), sg(0.0, 1.0);
    for (int t = 0; t < probes; ++t) {
        const double im = std::pow(10.0, lg(rng)) * (sg(rng) < 0.5 ? -1.0 : 1.0);
        const cplx kappa(re(rng), im);
        const double d = spectral_distance(h_poly(kappa, sd.k0), sd.gb_eigenvalues);
        out.ratio = std::max(out.ratio, R.norm(kappa) * d / out.constant);
    }
    return out;
}

ValidationReport run_invariant_suite(const RunConfig& cfg) {
    const LameParams& p = cfg.params;
    const auto mesh = std::make_shared<SurfaceMesh>(cfg.reference_mesh());
    const MatrixXd S = assemble_single_layer_static(*mesh, p);
    const MatrixXd Ks = assemble_np_adjoint_static(*mesh, p);

    ValidationReport rep;
    auto add = [&](const std::string& name, double r, double tol) { rep.lines.push_back({name, r, tol, r <= tol}); };

    add("lame_of_IB_potential", residual_lame_of_IB(*mesh, p), 1e-2);
    add("np_of_S_inverse_constants", residual_np_of_S_inverse(S, Ks), 1e-2);
    add("K_constant_eigenvector", residual_K_constants(*mesh, Ks), 1e-2);
    add("calderon", residual_calderon(*mesh, S, Ks), 1e-2);
    const JumpCheck jc = residual_jump_relations(*mesh, p, Ks, cfg.seed);
    add("jump_relation_interior", jc.interior, 1e-2);
    add("jump_relation_exterior", jc.exterior, 1e-2);

    const BoundaryOperator Sop{S.cast<cplx>(), OpKind::S, 0.0, mesh};
    const BoundaryOperator Kop{Ks.cast<cplx>(), OpKind::Kstar, 0.0, mesh};
    const HInnerProduct ip(Sop);
    const SpectralData sd = symmetrized_np_spectrum(Kop, ip, p);
    add("resolvent_bound_ratio", check_resolvent_bound(Kop, ip, sd, cfg.seed).ratio, 1.0);

    const ReferenceShape B(mesh, p, S, Ks);
    const PointForceSource src = cfg.source();
    const cplx c = cfg.contrast == 1.0 ? cplx(3.0) : cfg.contrast;
    const MomentReport mr = moment_identity_residuals(B, c, src, Vec3::Zero());
    add("moment_second_order_sum", mr.residual_a, 5e-2);
    add("moment_psi02_integral", mr.residual_b, 3e-2);
    add("monopole_cancellation", mr.residual_c, 5e-2);
    const Vec3c dF = source_derivative(src, p, Vec3::Zero(), {1, 0, 0});
    const Density lf = psi_beta0(B, c, {1, 0, 0}, dF), sf = psi_beta0_short(B, c, {1, 0, 0}, dF);
    add("first_order_long_short", (lf - sf).norm() / sf.norm(), 1e-2);

    rep.pass = true;
    for (const auto& l : rep.lines) rep.pass = rep.pass && l.pass;
    return rep;
}

namespace {

ojson meta(const RunConfig& cfg) {
    ojson j;
    j["version"] = kVersion;
    j["config_hash"] = cfg.hash;
    return j;
}

std::string comment_header(const RunConfig& cfg) {
    return std::string("# ") + kVersion + "\n# config_hash " + cfg.hash + "\n";
}

fs::path out_path(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.output_dir);
    return fs::path(cfg.output_dir) / name;
}

fs::path require(const RunConfig& cfg, const std::string& name) {
    const fs::path path = fs::path(cfg.output_dir) / name;
    if (!fs::exists(path)) throw DependencyError(path.string());
    return path;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

MeshPtr load_mesh(const RunConfig& cfg) { return std::make_shared<SurfaceMesh>(read_off_file(require(cfg, "mesh.off").string())); }

MatrixXd load_static(const RunConfig& cfg, const MeshPtr& mesh, const std::string& name) {
    ArchiveHeader hd;
    const BoundaryOperator op = read_operator_archive_file(require(cfg, name).string(), mesh, &hd);
    if (hd.lambda != cfg.params.lambda() || hd.mu != cfg.params.mu())
        throw InvalidParameter(name + " was assembled with different Lame parameters");
    if (hd.omega != 0.0) throw InvalidParameter(name + " is not a static operator");
    return op.matrix.real();
}

ReferenceShape load_shape(const RunConfig& cfg) {
    const MeshPtr mesh = load_mesh(cfg);
    return ReferenceShape(mesh, cfg.params, load_static(cfg, mesh, "S.op"), load_static(cfg, mesh, "Kstar.op"));
}

ojson records(const std::vector<Vec3>& targets, const std::vector<Vec3c>& u, const std::vector<bool>& interior,
              const char* exterior_branch) {
    ojson arr = ojson::array();
    for (std::size_t t = 0; t < targets.size(); ++t) {
        ojson rec;
        rec["target"] = {targets[t][0], targets[t][1], targets[t][2]};
        rec["u_re"] = {u[t][0].real(), u[t][1].real(), u[t][2].real()};
        rec["u_im"] = {u[t][0].imag(), u[t][1].imag(), u[t][2].imag()};
        rec["branch"] = interior[t] ? "interior" : exterior_branch;
        arr.push_back(rec);
    }
    return arr;
}

void write_json(const fs::path& path, const ojson& j) { open_out(path) << j.dump(2) << "\n"; }

void write_csv_with_header(const fs::path& path, const RunConfig& cfg, const std::string& body) {
    open_out(path) << comment_header(cfg) << body;
}

int cmd_mesh(const RunConfig& cfg, std::ostream& log) {
    const SurfaceMesh m = cfg.reference_mesh();
    auto out = open_out(out_path(cfg, "mesh.off"));
    out << comment_header(cfg);
    write_off(m, out);
    log << "mesh: " << m.num_vertices() << " vertices, " << m.num_elements() << " elements\n";
    return 0;
}

int cmd_assemble(const RunConfig& cfg, std::ostream& log) {
    const MeshPtr mesh = load_mesh(cfg);
    const std::string extra = meta(cfg).dump();
    write_operator_archive_file(out_path(cfg, "S.op").string(), assemble_single_layer(mesh, 0.0, cfg.params),
                                cfg.params, extra);
    write_operator_archive_file(out_path(cfg, "Kstar.op").string(), assemble_np_adjoint(mesh, 0.0, cfg.params),
                                cfg.params, extra);
    log << "assemble: S.op, Kstar.op (" << mesh->num_dofs() << " dofs)\n";
    return 0;
}

int cmd_spectrum(const RunConfig& cfg, std::ostream& log) {
    const MeshPtr mesh = load_mesh(cfg);
    const BoundaryOperator S{load_static(cfg, mesh, "S.op").cast<cplx>(), OpKind::S, 0.0, mesh};
    const BoundaryOperator K{load_static(cfg, mesh, "Kstar.op").cast<cplx>(), OpKind::Kstar, 0.0, mesh};
    const HInnerProduct ip(S);
    const SpectralData sd = symmetrized_np_spectrum(K, ip, cfg.params);
    std::ostringstream body;
    write_spectrum_csv(body, sd);
    write_csv_with_header(out_path(cfg, "spectrum.csv"), cfg, body.str());
    const auto v = sd.np_sorted();
    log << "spectrum: " << v.size() << " eigenvalues in [" << v.front() << ", " << v.back() << "]\n";
    return 0;
}

int cmd_emt(const RunConfig& cfg, std::ostream& log) {
    const ReferenceShape B = load_shape(cfg);
    const Emt emt = compute_emt(B, cfg.contrast);
    auto out = open_out(out_path(cfg, "emt.json"));
    write_emt_json(out, emt, meta(cfg).dump());
    log << "emt: |M| = " << emt.frobenius() << ", condition " << emt.condition
        << (emt.near_resonance ? " (near resonance)" : "") << "\n";
    return 0;
}

int cmd_farfield(const RunConfig& cfg, std::ostream& log) {
    const ReferenceShape B = load_shape(cfg);
    std::ifstream in(require(cfg, "emt.json"));
    const Emt emt = read_emt_json(in);
    const auto u = far_field_expansion(emt, B, cfg.source(), cfg.frame(), cfg.probes);
    ojson j = meta(cfg);
    j["delta"] = cfg.delta;
    j["center"] = {cfg.center[0], cfg.center[1], cfg.center[2]};
    j["values"] = records(cfg.probes, u, std::vector<bool>(u.size(), false), "far_field");
    write_json(out_path(cfg, "farfield.json"), j);
    log << "farfield: " << u.size() << " probes\n";
    return 0;
}

int cmd_solve(const RunConfig& cfg, std::ostream& log) {
    const MeshPtr ref = load_mesh(cfg);
    const TransmissionProblem prob{std::make_shared<SurfaceMesh>(scale_translate(*ref, cfg.frame())), cfg.contrast,
                                   cfg.params, cfg.omega};
    const PointForceSource src = cfg.source();
    validate_source(src, *prob.mesh);
    const TransmissionSolution sol = solve_transmission(prob, src);
    const auto vals = evaluate_solution(prob, sol, src, cfg.probes);
    std::vector<Vec3c> u;
    std::vector<bool> inside;
    for (const auto& v : vals) u.push_back(v.u), inside.push_back(v.interior);
    ojson j = meta(cfg);
    j["condition"] = sol.condition;
    j["residual"] = sol.residual;
    j["warning"] = sol.warning ? ojson(*sol.warning) : ojson(nullptr);
    j["values"] = records(cfg.probes, u, inside, "exterior");
    write_json(out_path(cfg, "solution.json"), j);
    log << "solve: condition " << sol.condition << ", residual " << sol.residual << "\n";
    if (sol.warning) log << "warning: " << *sol.warning << "\n";
    return 0;
}

ojson slope_json(const SweepResult& r) {
    ojson j;
    try {
        const Slope s = blowup_exponent(r);
        j["slope"] = s.slope;
        j["ci95"] = {s.lo, s.hi};
        j["points"] = s.points;
    } catch (const InsufficientData& e) {
        j["slope"] = nullptr;
        j["error"] = e.what();
    }
    return j;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
    const ReferenceShape B = load_shape(cfg);
    const MeshPtr& mesh = B.mesh();
    const HInnerProduct ip(BoundaryOperator{B.S().cast<cplx>(), OpKind::S, 0.0, mesh});
    const SpectralData sd =
        symmetrized_np_spectrum(BoundaryOperator{B.Kstar().cast<cplx>(), OpKind::Kstar, 0.0, mesh}, ip, cfg.params);
    const PointForceSource src = cfg.source();

    ModeChoice mode;
    if (cfg.sweep.mode < 0) {
        mode = select_resonant_mode(B, sd, ip, src, Vec3::Zero());
    } else {
        if (cfg.sweep.mode >= static_cast<int>(sd.np_eigenvalues.size()))
            throw InvalidParameter("sweep.mode exceeds the number of eigenvalues");
        mode.index = cfg.sweep.mode;
        mode.multiplicity = 1;
        mode.np = sd.np_eigenvalues[mode.index];
        mode.gb = sd.gb_eigenvalues[mode.index];
        mode.projection = ProjectionDiagnostic(B, sd, ip, src, Vec3::Zero())({mode.index});
        mode.c0 = resonant_contrast(sd, mode.index);
    }
    if (mode.index < 0 && !cfg.sweep.c0) throw SpectralInconsistency("no eigenvalue couples to the source");
    const double c0 = cfg.sweep.c0 ? *cfg.sweep.c0 : mode.c0;
    const bool coupled = mode.projection > kProjectionThreshold;

    const SweepResult r = sweep(B, sd, c0, cfg.sweep.taus, cfg.frame(), src, cfg.probes, mode.projection);
    std::ostringstream body;
    write_sweep_csv(body, r);
    write_csv_with_header(out_path(cfg, "sweep.csv"), cfg, body.str());
    open_out(out_path(cfg, "sweep.gp")) << comment_header(cfg) << [&] {
        std::ostringstream gp;
        write_sweep_gnuplot(gp, "sweep.csv");
        return gp.str();
    }();

    ojson j = meta(cfg);
    ojson m;
    m["index"] = mode.index;
    m["np_eigenvalue"] = mode.np;
    m["gb_eigenvalue"] = mode.gb;
    m["multiplicity"] = mode.multiplicity;
    m["projection"] = mode.projection;
    j["mode"] = m;
    j["c0"] = c0;
    if (coupled) {
        j["resonant"] = slope_json(r);
        j["verdict"] = "slope";
    } else {
        j["resonant"] = nullptr;
        j["verdict"] = "eigenfunction-orthogonal source";
    }
    log << "sweep: c0 = " << c0 << ", projection " << mode.projection;
    if (coupled && !j["resonant"]["slope"].is_null()) log << ", slope " << j["resonant"]["slope"].get<double>();
    log << "\n";

    if (cfg.sweep.control_c0) {
        const SweepResult ctrl = sweep(B, sd, *cfg.sweep.control_c0, cfg.sweep.taus, cfg.frame(), src, cfg.probes);
        std::ostringstream cb;
        write_sweep_csv(cb, ctrl);
        write_csv_with_header(out_path(cfg, "sweep_control.csv"), cfg, cb.str());
        j["control_c0"] = *cfg.sweep.control_c0;
        j["control"] = slope_json(ctrl);
        if (!j["control"]["slope"].is_null())
            log << "control: c0 = " << *cfg.sweep.control_c0 << ", slope " << j["control"]["slope"].get<double>() << "\n";
    }
    write_json(out_path(cfg, "sweep_summary.json"), j);
    return 0;
}

int cmd_validate(const RunConfig& cfg, std::ostream& log) {
    const ValidationReport rep = run_invariant_suite(cfg);
    ojson j = meta(cfg);
    ojson lines = ojson::array();
    for (const auto& l : rep.lines) {
        ojson o;
        o["name"] = l.name;
        o["residual"] = l.residual;
        o["tolerance"] = l.tolerance;
        o["pass"] = l.pass;
        lines.push_back(o);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-28s %.3e  (tol %.0e)  %s\n", l.name.c_str(), l.residual, l.tolerance,
                      l.pass ? "PASS" : "FAIL");
        log << buf;
    }
    j["lines"] = lines;
    j["pass"] = rep.pass;
    write_json(out_path(cfg, "validate.json"), j);
    log << "validate: " << (rep.pass ? "PASS" : "FAIL") << "\n";
    return rep.pass ? 0 : 1;
}

}  // namespace

int run(const std::string& sub, const RunConfig& cfg, std::ostream& log) {
    if (sub == "mesh") return cmd_mesh(cfg, log);
    if (sub == "assemble") return cmd_assemble(cfg, log);
    if (sub == "spectrum") return cmd_spectrum(cfg, log);
    if (sub == "solve") return cmd_solve(cfg, log);
    if (sub == "emt") return cmd_emt(cfg, log);
    if (sub == "farfield") return cmd_farfield(cfg, log);
    if (sub == "sweep") return cmd_sweep(cfg, log);
    if (sub == "validate") return cmd_validate(cfg, log);
    throw InvalidParameter("unknown subcommand: " + sub);
}

}  // namespace lamebem
