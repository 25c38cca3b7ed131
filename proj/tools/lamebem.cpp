#include "lamebem/config.hpp"
#include "lamebem/errors.hpp"
#include "lamebem/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Elastic inclusion boundary element tool"};
    app.set_version_flag("--version", lamebem::kVersion);
    app.require_subcommand(1, 1);
    std::string config;
    const std::vector<std::pair<const char*, const char*>> subs = {
        {"mesh", "write the reference mesh (mesh.off)"},
        {"assemble", "assemble S and K* archives (S.op, Kstar.op)"},
        {"spectrum", "NP and G_B eigenvalues (spectrum.csv)"},
        {"solve", "transmission solve at the probes (solution.json)"},
        {"emt", "elastic moment tensor (emt.json)"},
        {"farfield", "leading far-field correction at the probes (farfield.json)"},
        {"sweep", "contrast sweep toward a resonance (sweep.csv, sweep.gp, sweep_summary.json)"},
        {"validate", "invariant checks (validate.json)"},
    };
    for (const auto& [name, help] : subs)
        app.add_subcommand(name, help)->add_option("--config,-c", config, "JSON run configuration")->required();
    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        const lamebem::RunConfig cfg = lamebem::load_config(config);
        return lamebem::run(sub, cfg, std::cout);
    } catch (const lamebem::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const lamebem::DependencyError& e) {
        std::cerr << e.what() << "\nrun the producing subcommand first\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
