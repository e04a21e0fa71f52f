// Command-line front end: run a JSON configuration, list the builtin
// scenarios, or run a convergence study of one scenario.
//
// Exit status: 0 all checks pass, 1 a numerical check failed, 2 bad
// configuration or input.

#include <CLI11.hpp>

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "msineq/error.hpp"
#include "msineq/runner.hpp"

namespace {

constexpr int kFailed = 1;
constexpr int kBadInput = 2;

void print_summary(const msineq::RunReport& report, const std::filesystem::path& dir)
{
    for (const msineq::ScenarioResult& s : report.scenarios) {
        std::cout << (s.passed() ? "PASS " : "FAIL ") << s.name;
        if (!s.error.empty()) std::cout << "  error: " << s.error;
        for (const msineq::Check& c : s.checks)
            if (!c.passed)
                std::cout << "  " << c.name << "@" << c.resolution << "=" << c.value << " (limit " << c.limit << ")";
        std::cout << '\n';
    }
    std::cout << "config " << report.config_hash << " seed " << report.seed << " -> " << dir.string() << '\n';
}

int execute(msineq::RunConfig config, const std::filesystem::path& out, int workers)
{
    const msineq::RunReport report = msineq::run(config, workers);
    msineq::write_outputs(report, out);
    print_summary(report, out);
    return report.passed() ? 0 : kFailed;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sobolev inequality and ABP checks on discretized submanifolds"};
    app.require_subcommand(1);

    std::string config_path;
    std::string scenario;
    std::vector<int> resolutions;
    std::uint64_t seed = 0;
    std::string out;
    int workers = msineq::default_workers();

    CLI::App* run_cmd = app.add_subcommand("run", "Run the pipeline described by a JSON configuration");
    run_cmd->add_option("config", config_path, "Configuration file")->required();
    CLI::Option* run_seed = run_cmd->add_option("--seed", seed, "Override the configured seed");
    run_cmd->add_option("--out", out, "Output directory (overrides the configured one)");
    run_cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    CLI::App* list_cmd = app.add_subcommand("list-scenarios", "Print the builtin scenarios");

    CLI::App* conv_cmd = app.add_subcommand("convergence", "Refinement study of one builtin scenario");
    conv_cmd->add_option("scenario", scenario, "Builtin scenario name")->required();
    conv_cmd->add_option("--resolutions", resolutions, "Comma-separated, strictly increasing")
        ->required()
        ->delimiter(',');
    conv_cmd->add_option("--seed", seed, "Seed recorded in the outputs");
    conv_cmd->add_option("--out", out, "Output directory")->default_str("out");
    conv_cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kBadInput;
    }

    try {
        if (list_cmd->parsed()) {
            for (const msineq::Scenario& s : msineq::builtin_scenarios())
                std::cout << std::left << std::setw(24) << s.name << ' ' << s.description << " [" << s.exercises
                          << "]\n";
            return 0;
        }
        if (run_cmd->parsed()) {
            msineq::RunConfig config = msineq::load_config(config_path);
            if (run_seed->count() > 0) msineq::override_seed(config, seed);
            const std::filesystem::path dir = out.empty() ? config.output : std::filesystem::path(out);
            return execute(std::move(config), dir, workers);
        }
        msineq::RunConfig config = msineq::convergence_config(scenario, resolutions, seed);
        return execute(std::move(config), out.empty() ? std::filesystem::path("out") : std::filesystem::path(out),
                       workers);
    } catch (const msineq::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailed;
    }
}
