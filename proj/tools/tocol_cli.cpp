#include "tocol/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Minimum-time trajectory optimization by Hermite-Simpson collocation"};
    app.require_subcommand(1);

    tocol::cli::Options opt;
    std::string out_dir;
    if (const char* env = std::getenv("TOCOL_OUT")) out_dir = env;
    std::string scenario;
    app.add_option("--seed", opt.seed, "Seed for randomized sampling");
    app.add_flag("--quiet", opt.quiet, "Suppress progress output");

    auto add = [&](const char* name, const char* help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory (default $TOCOL_OUT or .)");
        sub->add_option("--seed", opt.seed, "Seed for randomized sampling");
        sub->add_flag("--quiet", opt.quiet, "Suppress progress output");
        return sub;
    };
    CLI::App* solve = add("solve", "Solve one scenario");
    CLI::App* mpc = add("mpc", "Run the shrinking-horizon closed loop");
    CLI::App* compare = add("compare", "Solve under every control parameterization and form");
    CLI::App* bounds = add("bounds", "Sample start states and record distance/cost pairs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : tocol::cli::kExitInputError;
    }
    if (!out_dir.empty()) opt.out_dir = out_dir;

    try {
        if (*solve) return tocol::cli::cmd_solve(scenario, opt);
        if (*mpc) return tocol::cli::cmd_mpc(scenario, opt);
        if (*compare) return tocol::cli::cmd_compare(scenario, opt);
        if (*bounds) return tocol::cli::cmd_bounds(scenario, opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return tocol::cli::kExitNotOptimal;
    }
    return tocol::cli::kExitInputError;
}
