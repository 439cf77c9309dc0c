#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "laplab/config.hpp"
#include "laplab/runner.hpp"

namespace {

laplab::RunConfig make_config(const std::string& path,
                              const std::vector<std::string>& sets) {
    laplab::RunConfig cfg;
    if (!path.empty()) cfg = laplab::load_config_file(path);
    for (const std::string& s : sets) laplab::apply_override(cfg, s);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"limiting-absorption laboratory for Schrodinger grids"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("-c,--config", config_path, "config file (defaults apply when omitted)");
    app.add_option("--set", sets, "override a config key, e.g. --set grid.points=401");

    bool r_doubling = false;
    CLI::App* check = app.add_subcommand("check", "hypothesis gate: conditions, c1, S > 0");
    check->add_flag("--r-doubling", r_doubling, "recompute the constants at doubled extent");

    bool lap_force = false;
    std::string replay_dir;
    CLI::App* lap = app.add_subcommand("lap", "resolvent sweep over (lambda, mu)");
    lap->add_flag("--force", lap_force, "sweep even when the gate fails");
    lap->add_option("--replay", replay_dir, "re-run an archived output dir and compare CSVs");

    bool trace_force = false;
    CLI::App* trace = app.add_subcommand("proof-trace",
                                         "regularized trace with inequality residuals");
    trace->add_flag("--force", trace_force, "trace even when the gate fails");

    bool smooth_force = false;
    std::string selector = "lmax";
    CLI::App* smooth = app.add_subcommand("smooth", "multiplication-weight smoothness probe");
    smooth->add_flag("--force", smooth_force, "probe an undominated weight");
    smooth->add_option("-L,--weight", selector, "weight selector: zero|one|lmax|scale:<a>");

    CLI::App* oracle = app.add_subcommand("oracle-test", "dense-oracle resolvent cross-check");
    CLI::App* comm = app.add_subcommand("commutator-test",
                                        "two-grid commutator consistency check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? laplab::kExitPass : laplab::kExitUsage;
    }

    try {
        const laplab::RunConfig cfg = make_config(config_path, sets);
        if (check->parsed()) return laplab::cmd_check(cfg, r_doubling);
        if (lap->parsed()) return laplab::cmd_lap(cfg, lap_force, replay_dir);
        if (trace->parsed()) return laplab::cmd_proof_trace(cfg, trace_force);
        if (smooth->parsed()) return laplab::cmd_smooth(cfg, selector, smooth_force);
        if (oracle->parsed()) return laplab::cmd_oracle_test(cfg);
        if (comm->parsed()) return laplab::cmd_commutator_test(cfg);
        std::fprintf(stderr, "no subcommand\n");
        return laplab::kExitUsage;
    } catch (const laplab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return laplab::kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return laplab::kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return laplab::kExitNumerical;
    }
}
