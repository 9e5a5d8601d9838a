// kgspec: spectral Klein-Gordon runs from a JSON scenario.
//
//   kgspec simulate --config scenarios/interval_dirichlet.json --out out/
//   kgspec spectrum --config ... --out ...
//   kgspec greens   --config ... --out ...
//   kgspec verify   --config ... --out ...     (exit code 1 if a check fails)

#include "kgspec/cli_io.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

using kgspec::cli_io::ScenarioConfig;

struct Overrides {
    std::string solver;
    int modes = -1;
    std::string fault;
    std::uint64_t seed = 0;  // accepted for interface stability; every run is deterministic
};

ScenarioConfig load(const std::string& path, const Overrides& o) {
    auto c = kgspec::cli_io::load_config(path);
    if (!o.solver.empty()) {
        if (o.solver != "spectral" && o.solver != "fd" && o.solver != "both")
            throw kgspec::cli_io::ConfigError("--solver", "must be spectral, fd or both");
        c.solver = o.solver;
    }
    if (o.modes >= 0) c.truncation.modes = static_cast<std::size_t>(o.modes);
    if (!o.fault.empty()) {
        if (o.fault != "eigenvalue") throw kgspec::cli_io::ConfigError("--inject-fault", "only 'eigenvalue' is supported");
        c.fault = o.fault;
    }
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Klein-Gordon evolution on 1+1 static spacetimes via self-adjoint extensions"};
    app.require_subcommand(1);

    std::string config, out = "out";
    Overrides ov;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory")->capture_default_str();
        sub->add_option("--solver", ov.solver, "spectral, fd or both (overrides the config)");
        sub->add_option("--modes", ov.modes, "fixed number of modes per component (0: Parseval rule)");
        sub->add_option("--seed", ov.seed, "accepted for compatibility; runs are deterministic");
        sub->add_option("--inject-fault", ov.fault, "corrupt the basis on purpose (eigenvalue)");
    };
    auto* simulate = app.add_subcommand("simulate", "evolve the data and write snapshots");
    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues, eigenfunction coefficients and classification");
    auto* greens = app.add_subcommand("greens", "resolvent kernel on a grid");
    auto* verify = app.add_subcommand("verify", "run the invariant checks");
    for (auto* s : {simulate, spectrum, greens, verify}) add_common(s);

    CLI11_PARSE(app, argc, argv);

    try {
        const ScenarioConfig c = load(config, ov);
        if (simulate->parsed()) {
            const auto meta = kgspec::cli_io::run_simulate(c, out);
            for (const auto& w : meta["truncation"]["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
            std::cout << "wrote " << out << " (hash " << meta["hash"].get<std::string>() << ")\n";
        } else if (spectrum->parsed()) {
            const auto s = kgspec::cli_io::run_spectrum(c, out);
            std::cout << "classification: " << s["classification"].get<std::string>() << "\n";
        } else if (greens->parsed()) {
            kgspec::cli_io::run_greens(c, out);
            std::cout << "wrote " << out << "/greens.csv\n";
        } else if (verify->parsed()) {
            const auto rep = kgspec::cli_io::run_verify(c, out);
            for (const auto& ch : rep["checks"])
                std::cout << (ch["pass"].get<bool>() ? "PASS " : "FAIL ") << ch["name"].get<std::string>() << " "
                          << ch["value"].get<double>() << " <= " << ch["tolerance"].get<double>() << "\n";
            return rep["pass"].get<bool>() ? 0 : 1;
        }
    } catch (const kgspec::cli_io::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
