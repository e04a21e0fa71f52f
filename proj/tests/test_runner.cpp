#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "msineq/error.hpp"
#include "msineq/runner.hpp"

using namespace msineq;

namespace {

std::string field_of(const std::string& text)
{
    try {
        (void)parse_config(text);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<no error>";
}

std::string message_of(const std::string& text)
{
    try {
        (void)parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "<no error>";
}

std::vector<std::string> lines(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

const char* kInequality = R"({"pipeline": "inequality", "scenarios": ["flat-disk-equality"], "resolutions": [17, 33], "seed": 5})";

}  // namespace

TEST(Config, ParsesDefaultsAndOverrides)
{
    const RunConfig c = parse_config(R"({
        "scenarios": [{"builtin": "flat-disk-metric", "name": "scaled", "field_scale": 2.0, "resolutions": [9, 17]}],
        "seed": 18446744073709551615,
        "tolerances": {"ratio_slack": 3, "coverage_fraction": 0.95},
        "abp": {"v_samples": 50}
    })");
    EXPECT_EQ(c.pipeline, Pipeline::Inequality);
    ASSERT_EQ(c.scenarios.size(), 1u);
    EXPECT_EQ(c.scenarios[0].name, "scaled");
    EXPECT_EQ(c.scenarios[0].field_scale, 2.0);
    EXPECT_EQ(c.scenarios[0].resolutions, (std::vector<int>{9, 17}));
    EXPECT_EQ(c.seed, 18446744073709551615ULL);
    EXPECT_EQ(c.tolerances.ratio_slack, 3.0);
    EXPECT_EQ(c.tolerances.abp.coverage_fraction, 0.95);
    EXPECT_EQ(c.tolerances.min_slope, 1.9);
    EXPECT_EQ(c.v_samples, 50);
    EXPECT_EQ(c.coverage_samples, 1000);
}

TEST(Config, GlobalResolutionsOverrideScenarioSchedules)
{
    const RunConfig c = parse_config(R"({"scenarios": [{"builtin": "flat-disk-metric", "resolutions": [9, 17]}],
                                         "resolutions": [33]})");
    EXPECT_EQ(c.scenarios[0].resolutions, (std::vector<int>{33}));
}

TEST(Config, RandomBlockExpands)
{
    const RunConfig c = parse_config(R"({"scenarios": [{"random": {"count": 4, "seed": 2}}, "flat-disk-metric"]})");
    ASSERT_EQ(c.scenarios.size(), 5u);
    EXPECT_EQ(c.scenarios.back().name, "flat-disk-metric");
}

TEST(Config, ErrorsNameTheField)
{
    EXPECT_EQ(field_of(R"({"scenarios": ["no-such-scenario"]})"), "scenarios[0]");
    EXPECT_EQ(field_of(R"({"scenarios": ["flat-disk-metric"], "pipelin": "abp-full"})"), "pipelin");
    EXPECT_EQ(field_of(R"({"scenarios": ["flat-disk-metric"], "pipeline": "everything"})"), "pipeline");
    EXPECT_EQ(field_of(R"({"scenarios": ["flat-disk-metric"], "resolutions": [33, 17]})"), "resolutions");
    EXPECT_EQ(field_of(R"({"scenarios": ["flat-disk-metric"], "resolutions": [2]})"), "resolutions[0]");
    EXPECT_EQ(field_of(R"({"scenarios": ["flat-disk-metric"], "seed": -1})"), "seed");
    EXPECT_EQ(field_of(R"({"scenarios": ["flat-disk-metric"], "abp": {"sigma": 1.5}})"), "abp.sigma");
    EXPECT_EQ(field_of(R"({"scenarios": ["flat-disk-metric"], "tolerances": {"slack": 1}})"), "tolerances.slack");
    EXPECT_EQ(field_of(R"({"scenarios": []})"), "scenarios");
    EXPECT_EQ(field_of(R"({"pipeline": "inequality"})"), "scenarios");
    EXPECT_EQ(field_of(R"({"scenarios": [{"builtin": "flat-disk-metric", "mode": "fd3"}]})"), "scenarios[0].mode");
    EXPECT_EQ(field_of(R"({"scenarios": [{"file": "missing.json"}]})"), "scenarios[0].file");
}

TEST(Config, SelectorMismatchFailsBeforeSolving)
{
    EXPECT_EQ(field_of(R"({"scenarios": ["flat-disk-metric", {"builtin": "sphere-codim1-lift", "theorem": "codim2"}]})"),
              "scenarios[1].theorem");
    EXPECT_EQ(field_of(R"({"scenarios": [{"builtin": "flat-disk-metric", "theorem": "codim1"}]})"),
              "scenarios[0].theorem");
}

TEST(Config, PipelineRequirements)
{
    EXPECT_EQ(field_of(R"({"pipeline": "abp-full", "scenarios": ["disconnected-two-disks"]})"), "scenarios[0]");
    EXPECT_EQ(field_of(R"({"pipeline": "rigidity", "scenarios": ["disconnected-two-disks"]})"), "scenarios[0]");
    EXPECT_EQ(field_of(R"({"pipeline": "convergence", "scenarios": ["flat-disk-metric"], "resolutions": [33]})"),
              "scenarios[0]");
}

TEST(Config, MalformedJsonReportsPosition)
{
    const std::string msg = message_of("{\n  \"scenarios\": [\"flat-disk-metric\",]\n}");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column"), std::string::npos) << msg;
}

TEST(Config, FileReferencesResolveRelativeToTheConfig)
{
    const auto dir = std::filesystem::temp_directory_path() / "msineq_runner_files";
    std::filesystem::create_directories(dir / "sub");
    std::ofstream(dir / "sub" / "pieces.json") << R"([{"builtin": "flat-disk-metric", "name": "from-file"}])";
    std::ofstream(dir / "run.json") << R"({"scenarios": [{"file": "sub/pieces.json"}], "output": "results"})";
    const RunConfig c = load_config(dir / "run.json");
    ASSERT_EQ(c.scenarios.size(), 1u);
    EXPECT_EQ(c.scenarios[0].name, "from-file");
    EXPECT_EQ(c.output, dir / "results");

    std::ofstream(dir / "sub" / "broken.json") << "[\"flat-disk-metric\"";
    std::ofstream(dir / "bad.json") << R"({"scenarios": [{"file": "sub/broken.json"}]})";
    EXPECT_THROW((void)load_config(dir / "bad.json"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST(Config, HashTracksContentNotLayout)
{
    const RunConfig a = parse_config(kInequality);
    const RunConfig b = parse_config(R"({"seed":5,"resolutions":[17,33],"scenarios":["flat-disk-equality"],
                                         "output": "elsewhere"})");
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.hash().size(), 16u);
    RunConfig c = a;
    override_seed(c, 6);
    EXPECT_EQ(c.seed, 6u);
    EXPECT_NE(c.hash(), a.hash());
    const RunConfig d = parse_config(R"({"seed":5,"resolutions":[17,65],"scenarios":["flat-disk-equality"]})");
    EXPECT_NE(d.hash(), a.hash());
}

TEST(Run, InequalityPipeline)
{
    const RunReport r = run(parse_config(kInequality), 2);
    ASSERT_EQ(r.scenarios.size(), 1u);
    const ScenarioResult& s = r.scenarios[0];
    EXPECT_TRUE(s.passed());
    ASSERT_EQ(s.sobolev.size(), 2u);
    EXPECT_EQ(s.sobolev[0].resolution, 17);
    EXPECT_NEAR(s.sobolev[1].ratio, 1.0, 1e-8);
    EXPECT_EQ(s.timings.size(), 2u);
    EXPECT_TRUE(r.passed());
}

TEST(Run, FailedCheckFailsTheRun)
{
    const RunReport r = run(parse_config(R"({"scenarios": ["sphere-codim1-lift"], "resolutions": [17],
                                             "tolerances": {"exact_ratio": 0}})"));
    EXPECT_FALSE(r.passed());
    bool found = false;
    for (const Check& c : r.scenarios[0].checks)
        if (c.name == "exact_ratio") {
            found = true;
            EXPECT_FALSE(c.passed);
        }
    EXPECT_TRUE(found);
}

TEST(Run, AbpPipelineAndCsvLayout)
{
    const RunReport r = run(parse_config(R"({"pipeline": "abp-full", "scenarios": ["flat-disk-equality"],
                                             "resolutions": [33], "seed": 9,
                                             "abp": {"coverage_samples": 50, "v_samples": 200, "jacobian_samples": 10}})"));
    EXPECT_TRUE(r.passed());
    ASSERT_EQ(r.scenarios[0].abp.size(), 1u);

    const auto cov = lines(coverage_csv(r));
    ASSERT_EQ(cov.size(), 51u);
    EXPECT_EQ(cov[0].rfind("config_hash,seed,scenario,resolution,sample,xi,phi", 0), 0u);
    const auto sweep = lines(abp_sweep_csv(r));
    ASSERT_EQ(sweep.size(), 2u);
    for (const auto& file : {cov, sweep})
        for (std::size_t i = 1; i < file.size(); ++i) EXPECT_EQ(file[i].rfind(r.config_hash + ",9,", 0), 0u);
    EXPECT_EQ(lines(sobolev_csv(r)).size(), 1u);
}

TEST(Run, RigidityPipelineDetectsNonEquality)
{
    const RunReport r = run(parse_config(R"({"pipeline": "rigidity", "resolutions": [33, 65],
                                             "scenarios": ["flat-disk-equality", "flat-disk-anisotropic"]})"));
    ASSERT_EQ(r.scenarios.size(), 2u);
    EXPECT_TRUE(r.scenarios[0].passed());
    EXPECT_EQ(r.scenarios[0].rigidity.size(), 2u);
    EXPECT_TRUE(r.scenarios[1].passed());
    EXPECT_EQ(r.scenarios[1].checks.front().name, "rigidity_detected");
}

TEST(Run, ConvergencePipeline)
{
    const RunReport r = run(convergence_config("sphere-conformal", {17, 33, 65}));
    ASSERT_TRUE(r.scenarios[0].convergence.has_value());
    EXPECT_TRUE(r.passed());
    EXPECT_GE(*r.scenarios[0].convergence->slope, 1.9);
    EXPECT_EQ(lines(sobolev_csv(r)).size(), 4u);
    EXPECT_THROW((void)convergence_config("sphere-conformal", {33, 17}), ConfigError);
    EXPECT_THROW((void)convergence_config("nope", {17, 33}), ConfigError);
}

TEST(Run, DeterministicOutputs)
{
    const char* cfg = R"({"pipeline": "abp-full", "scenarios": ["sphere-conformal", "flat-disk-anisotropic"],
                          "resolutions": [17], "seed": 77,
                          "abp": {"coverage_samples": 40, "v_samples": 100, "jacobian_samples": 5}})";
    const RunReport a = run(parse_config(cfg), 1);
    const RunReport b = run(parse_config(cfg), 4);
    EXPECT_EQ(sobolev_csv(a), sobolev_csv(b));
    EXPECT_EQ(abp_sweep_csv(a), abp_sweep_csv(b));
    EXPECT_EQ(coverage_csv(a), coverage_csv(b));
}

TEST(Run, WritesAllOutputs)
{
    const auto dir = std::filesystem::temp_directory_path() / "msineq_runner_out";
    std::filesystem::remove_all(dir);
    write_outputs(run(parse_config(kInequality)), dir);
    for (const char* f : {"report.json", "sobolev.csv", "abp_sweep.csv", "coverage.csv"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    std::ifstream in(dir / "report.json");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_NE(ss.str().find("\"config_hash\""), std::string::npos);
    EXPECT_NE(ss.str().find("\"seed\": 5"), std::string::npos);
    std::filesystem::remove_all(dir);
}
