#include <CLI11.hpp>

#include <iostream>

#include "dfmix/cli.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"dfmix: mixed finite elements for Darcy-Forchheimer gas flow"};
    app.require_subcommand(1);
    auto* run = app.add_subcommand("run", "Run the mode selected in a config file");
    std::string config;
    std::string out;
    long long seed = -1;
    bool verbose = false;
    run->add_option("config", config, "Config file")->required();
    run->add_option("--out", out, "Output directory (default: [run] output, relative to cwd)");
    run->add_option("--seed", seed, "RNG seed, overrides [run] seed")->check(CLI::NonNegativeNumber);
    run->add_flag("--verbose", verbose, "Progress and timings on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return dfmix::cli::exit_usage;
    }

    dfmix::cli::RunConfig rc;
    try {
        rc = dfmix::cli::ingest_file(config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << config << ": " << e.what() << '\n';
        return dfmix::cli::exit_usage;
    }
    if (seed >= 0)
        rc.seed = static_cast<std::uint64_t>(seed);
    return dfmix::cli::execute(rc, out.empty() ? rc.output : out, std::cerr, verbose);
}
