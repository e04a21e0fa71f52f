#ifndef MSINEQ_RUNNER_HPP
#define MSINEQ_RUNNER_HPP

// Scenario runner: JSON run configurations, the inequality / ABP / rigidity /
// convergence pipelines and the report and CSV writers behind the CLI.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "msineq/abp.hpp"
#include "msineq/sobolev.hpp"

namespace msineq {

enum class Pipeline { Inequality, AbpFull, Rigidity, Convergence };

[[nodiscard]] std::string to_string(Pipeline p);
/// Parses "inequality", "abp-full", "rigidity" or "convergence".
[[nodiscard]] Pipeline pipeline_from_string(const std::string& s);

struct RunTolerances {
    double ratio_slack = 5.0;     ///< ratio >= 1 - ratio_slack * eps_mesh
    double exact_ratio = 1e-2;    ///< |ratio - exact| at the finest resolution
    double min_slope = 1.9;
    double rigidity = 5e-3;
    double rigidity_floor = 1e-6; ///< diagnostics below this count as converged
    AbpTolerances abp;
};

struct RunConfig {
    std::vector<Scenario> scenarios;
    Pipeline pipeline = Pipeline::Inequality;
    std::vector<int> resolutions;  ///< overrides every scenario schedule when non-empty
    std::uint64_t seed = 0;
    std::filesystem::path output = "out";
    RunTolerances tolerances;
    int coverage_samples = 1000;
    int v_samples = 10000;
    int jacobian_samples = 100;
    double sigma = 0.5;
    std::string canonical;  ///< normalized JSON echo, without the output path

    [[nodiscard]] std::string hash() const;
};

/// Parses a configuration document; `base` resolves scenario file references.
/// Throws ConfigError naming the offending field (or line and column for
/// malformed JSON). Scenarios are validated before returning.
[[nodiscard]] RunConfig parse_config(const std::string& text, const std::filesystem::path& base = ".");
[[nodiscard]] RunConfig load_config(const std::filesystem::path& file);

/// Replaces the seed and refreshes the canonical echo.
void override_seed(RunConfig& config, std::uint64_t seed);

/// Configuration for a convergence study of one builtin scenario.
[[nodiscard]] RunConfig convergence_config(const std::string& scenario, const std::vector<int>& resolutions,
                                           std::uint64_t seed = 0);

struct Check {
    std::string name;
    int resolution = 0;
    double value = 0.0;
    double limit = 0.0;
    bool passed = false;
};

struct RigidityRow {
    int resolution = 0;
    double mesh_size = 0.0;
    Rigidity rigidity;
};

struct StageTime {
    std::string stage;
    double seconds = 0.0;
};

struct ScenarioResult {
    std::string name;
    std::string description;
    std::string exercises;
    std::vector<SobolevReport> sobolev;  ///< one per resolution
    std::vector<AbpReport> abp;
    std::vector<RigidityRow> rigidity;
    std::optional<ConvergenceStudy> convergence;
    std::vector<Check> checks;
    std::vector<StageTime> timings;
    std::string error;  ///< numerical failure that stopped the pipeline

    [[nodiscard]] bool passed() const;
};

struct RunReport {
    std::string config_hash;
    std::uint64_t seed = 0;
    Pipeline pipeline = Pipeline::Inequality;
    std::string config;
    std::vector<ScenarioResult> scenarios;

    [[nodiscard]] bool passed() const;
};

/// Runs every scenario, in parallel up to `workers`. Results keep config order.
[[nodiscard]] RunReport run(const RunConfig& config, int workers = default_workers());

[[nodiscard]] std::string report_json(const RunReport& report);
[[nodiscard]] std::string sobolev_csv(const RunReport& report);
[[nodiscard]] std::string abp_sweep_csv(const RunReport& report);
[[nodiscard]] std::string coverage_csv(const RunReport& report);

/// Writes report.json, sobolev.csv, abp_sweep.csv and coverage.csv into dir.
void write_outputs(const RunReport& report, const std::filesystem::path& dir);

}  // namespace msineq

#endif  // MSINEQ_RUNNER_HPP
