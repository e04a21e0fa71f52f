#include "msineq/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>

#include "msineq/error.hpp"

namespace msineq {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kMaxFileDepth = 4;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed)
{
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
            throw ConfigError(join(path, it.key()), "unknown key");
}

const json& object_at(const json& j, const std::string& path)
{
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    return j;
}

double number_at(const json& j, const std::string& path)
{
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

int int_at(const json& j, const std::string& path)
{
    if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
    const auto v = j.get<long long>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw ConfigError(path, "integer out of range");
    return static_cast<int>(v);
}

int positive_int_at(const json& j, const std::string& path)
{
    const int v = int_at(j, path);
    if (v <= 0) throw ConfigError(path, "must be positive");
    return v;
}

std::uint64_t seed_at(const json& j, const std::string& path)
{
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
    throw ConfigError(path, "expected a non-negative 64-bit integer");
}

std::string string_at(const json& j, const std::string& path)
{
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

std::vector<int> resolutions_at(const json& j, const std::string& path)
{
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const int r = int_at(j[i], index(path, i));
        if (r < 3) throw ConfigError(index(path, i), "resolution must be at least 3");
        if (!out.empty() && r <= out.back()) throw ConfigError(path, "resolutions must be strictly increasing");
        out.push_back(r);
    }
    return out;
}

DerivativeMode mode_from_string(const std::string& s, const std::string& path)
{
    if (s == "exact") return DerivativeMode::Exact;
    if (s == "fd2") return DerivativeMode::CentralFD2;
    if (s == "fd4") return DerivativeMode::CentralFD4;
    throw ConfigError(path, "unknown derivative mode '" + s + "' (exact, fd2, fd4)");
}

std::string position_message(const std::string& text, std::size_t byte, const std::string& what)
{
    byte = std::min(byte, text.size());
    int line = 1;
    int column = 1;
    for (std::size_t i = 0; i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
}

json parse_json(const std::string& text, const std::string& field)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(field, position_message(text, e.byte, "malformed JSON"));
    }
}

std::string read_file(const fs::path& file, const std::string& field)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError(field, "cannot open '" + file.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Message of a ConfigError without its field prefix.
std::string bare_message(const ConfigError& e)
{
    const std::string what = e.what();
    const std::string prefix = e.field() + ": ";
    return (!e.field().empty() && what.rfind(prefix, 0) == 0) ? what.substr(prefix.size()) : what;
}

struct ParsedScenario {
    Scenario scenario;
    std::string path;
};

Scenario builtin_or_throw(const std::string& name, const std::string& path)
{
    auto s = builtin_scenario(name);
    if (!s) throw ConfigError(path, "unknown builtin scenario '" + name + "'");
    return *s;
}

void parse_scenarios(const json& j, const std::string& path, const fs::path& base, int depth,
                     std::vector<ParsedScenario>& out, json& echo)
{
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) parse_scenarios(j[i], index(path, i), base, depth, out, echo);
        return;
    }
    if (j.is_string()) {
        out.push_back({builtin_or_throw(j.get<std::string>(), path), path});
        echo.push_back(j);
        return;
    }
    object_at(j, path);
    if (j.contains("file")) {
        check_keys(j, path, {"file"});
        if (depth >= kMaxFileDepth) throw ConfigError(join(path, "file"), "scenario files nested too deeply");
        const fs::path file = base / string_at(j["file"], join(path, "file"));
        const std::string field = join(path, "file");
        const json inner = [&] {
            try {
                return parse_json(read_file(file, field), field);
            } catch (const ConfigError& e) {
                throw ConfigError(field, file.string() + ": " + bare_message(e));
            }
        }();
        parse_scenarios(inner, path, file.parent_path(), depth + 1, out, echo);
        return;
    }
    if (j.contains("random")) {
        check_keys(j, path, {"random"});
        const std::string rpath = join(path, "random");
        const json& r = object_at(j["random"], rpath);
        check_keys(r, rpath, {"count", "seed"});
        if (!r.contains("count")) throw ConfigError(join(rpath, "count"), "required");
        const int count = positive_int_at(r["count"], join(rpath, "count"));
        const std::uint64_t seed = r.contains("seed") ? seed_at(r["seed"], join(rpath, "seed")) : 0;
        for (Scenario& s : random_scenarios(count, seed)) out.push_back({std::move(s), path});
        echo.push_back(json{{"random", {{"count", count}, {"seed", seed}}}});
        return;
    }
    check_keys(j, path, {"builtin", "name", "theorem", "resolutions", "field_scale", "mode"});
    if (!j.contains("builtin")) throw ConfigError(path, "expected a builtin name, a file or a random block");
    Scenario s = builtin_or_throw(string_at(j["builtin"], join(path, "builtin")), join(path, "builtin"));
    json e = json::object();
    e["builtin"] = j["builtin"];
    if (j.contains("name")) s.name = string_at(j["name"], join(path, "name"));
    if (j.contains("theorem")) {
        try {
            s.theorem = theorem_from_string(string_at(j["theorem"], join(path, "theorem")));
        } catch (const ConfigError& err) {
            throw ConfigError(join(path, "theorem"), bare_message(err));
        }
    }
    if (j.contains("resolutions")) s.resolutions = resolutions_at(j["resolutions"], join(path, "resolutions"));
    if (j.contains("field_scale")) s.field_scale = number_at(j["field_scale"], join(path, "field_scale"));
    if (j.contains("mode")) s.mode = mode_from_string(string_at(j["mode"], join(path, "mode")), join(path, "mode"));
    e["name"] = s.name;
    e["theorem"] = to_string(s.theorem);
    e["resolutions"] = s.resolutions;
    e["field_scale"] = s.field_scale;
    e["mode"] = s.mode == DerivativeMode::Exact ? "exact" : s.mode == DerivativeMode::CentralFD2 ? "fd2" : "fd4";
    out.push_back({std::move(s), path});
    echo.push_back(std::move(e));
}

void parse_tolerances(const json& j, const std::string& path, RunTolerances& t)
{
    object_at(j, path);
    check_keys(j, path, {"ratio_slack", "exact_ratio", "min_slope", "rigidity", "rigidity_floor", "coverage_fraction",
                         "coverage_residual", "jacobian_bound", "jacobian_agreement", "volume"});
    const auto set = [&](const char* key, double& target) {
        if (!j.contains(key)) return;
        target = number_at(j[key], join(path, key));
        if (!(target >= 0.0)) throw ConfigError(join(path, key), "must be non-negative");
    };
    set("ratio_slack", t.ratio_slack);
    set("exact_ratio", t.exact_ratio);
    set("min_slope", t.min_slope);
    set("rigidity", t.rigidity);
    set("rigidity_floor", t.rigidity_floor);
    set("coverage_fraction", t.abp.coverage_fraction);
    set("coverage_residual", t.abp.coverage_residual);
    set("jacobian_bound", t.abp.bound);
    set("jacobian_agreement", t.abp.jacobian);
    set("volume", t.abp.volume);
    if (t.abp.coverage_fraction > 1.0) throw ConfigError(join(path, "coverage_fraction"), "must not exceed 1");
}

json tolerances_json(const RunTolerances& t)
{
    return {{"ratio_slack", t.ratio_slack},
            {"exact_ratio", t.exact_ratio},
            {"min_slope", t.min_slope},
            {"rigidity", t.rigidity},
            {"rigidity_floor", t.rigidity_floor},
            {"coverage_fraction", t.abp.coverage_fraction},
            {"coverage_residual", t.abp.coverage_residual},
            {"jacobian_bound", t.abp.bound},
            {"jacobian_agreement", t.abp.jacobian},
            {"volume", t.abp.volume}};
}

void refresh_canonical(RunConfig& c, const json& scenario_echo)
{
    json j;
    j["pipeline"] = to_string(c.pipeline);
    j["scenarios"] = scenario_echo;
    if (!c.resolutions.empty()) j["resolutions"] = c.resolutions;
    j["seed"] = c.seed;
    j["tolerances"] = tolerances_json(c.tolerances);
    j["abp"] = {{"coverage_samples", c.coverage_samples},
                {"v_samples", c.v_samples},
                {"jacobian_samples", c.jacobian_samples},
                {"sigma", c.sigma}};
    c.canonical = j.dump();
}

void finish_scenarios(RunConfig& c, std::vector<ParsedScenario> parsed)
{
    if (parsed.empty()) throw ConfigError("scenarios", "at least one scenario is required");
    const bool abp = c.pipeline == Pipeline::AbpFull || c.pipeline == Pipeline::Rigidity;
    for (ParsedScenario& p : parsed) {
        if (!c.resolutions.empty()) p.scenario.resolutions = c.resolutions;
        try {
            validate(p.scenario);
        } catch (const ConfigError& e) {
            throw ConfigError(join(p.path, e.field()), bare_message(e));
        }
        if (abp && p.scenario.pieces.size() != 1)
            throw ConfigError(p.path, "the " + to_string(c.pipeline) + " pipeline needs a connected scenario");
        if (c.pipeline == Pipeline::Convergence && p.scenario.resolutions.size() < 2)
            throw ConfigError(p.path, "a convergence study needs at least two resolutions");
        c.scenarios.push_back(std::move(p.scenario));
    }
}

// FNV-1a, 64 bit.
std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

using Clock = std::chrono::steady_clock;

template <typename Fn>
auto timed(ScenarioResult& r, std::string stage, Fn&& fn)
{
    const auto t0 = Clock::now();
    auto value = fn();
    r.timings.push_back({std::move(stage), std::chrono::duration<double>(Clock::now() - t0).count()});
    return value;
}

void run_inequality(const Scenario& s, const RunConfig& c, ScenarioResult& r)
{
    for (int res : s.resolutions) {
        Scenario one = s;
        one.resolutions = {res};
        const SobolevReport rep = timed(r, "inequality@" + std::to_string(res), [&] { return evaluate_inequality(one); });
        r.sobolev.push_back(rep);
        const double limit = 1.0 - c.tolerances.ratio_slack * rep.eps_mesh;
        r.checks.push_back({"ratio_lower_bound", res, rep.ratio, limit, rep.ratio >= limit});
    }
    if (s.exact_ratio) {
        const SobolevReport& fine = r.sobolev.back();
        const double err = std::abs(fine.ratio - *s.exact_ratio);
        r.checks.push_back({"exact_ratio", fine.resolution, err, c.tolerances.exact_ratio, err <= c.tolerances.exact_ratio});
    }
}

void run_abp_full(const Scenario& s, const RunConfig& c, int workers, ScenarioResult& r)
{
    AbpRunOptions o;
    o.coverage_samples = c.coverage_samples;
    o.v_samples = c.v_samples;
    o.jacobian_samples = c.jacobian_samples;
    o.sigma = c.sigma;
    o.seed = c.seed;
    o.tolerances = c.tolerances.abp;
    o.workers = workers;
    for (int res : s.resolutions) {
        AbpReport a = timed(r, "abp@" + std::to_string(res), [&] { return run_abp(s, res, o); });
        const CoverageStats& cs = a.coverage.stats;
        r.checks.push_back({"coverage_fraction", res, cs.success_fraction(), a.min_coverage, a.coverage_passed()});
        r.checks.push_back({"boundary_sign", res, static_cast<double>(cs.boundary_sign_failures), 0.0,
                            cs.boundary_sign_failures == 0});
        r.checks.push_back({"jacobian_bound", res, static_cast<double>(a.bound.violations), 0.0, a.bound_passed()});
        r.checks.push_back({"jacobian_agreement", res, a.agreement.max_difference, a.agreement.tolerance,
                            a.agreement.passed()});
        r.checks.push_back({"volume_bound", res, a.volume.slack(), -a.volume.tolerance, a.volume.holds});
        r.checks.push_back({"volume_chain", res, a.volume.chain_holds ? 1.0 : 0.0, 1.0, a.volume.chain_holds});
        r.abp.push_back(std::move(a));
    }
}

std::array<double, 5> diagnostics(const Rigidity& g)
{
    return {g.sup_II, g.sup_divA, g.cofactor_residual, g.boundary_grad_deficit, g.gradient_image_hausdorff};
}

constexpr std::array<const char*, 5> kDiagnosticNames{"sup_II", "sup_divA", "cofactor_residual",
                                                       "boundary_grad_deficit", "gradient_image_hausdorff"};

void run_rigidity(const Scenario& s, const RunConfig& c, int workers, ScenarioResult& r)
{
    SolverOptions solver;
    solver.workers = workers;
    for (int res : s.resolutions) {
        RigidityRow row = timed(r, "rigidity@" + std::to_string(res), [&] {
            const AbpProblem p = make_abp_problem(s, res);
            return RigidityRow{res, p.mesh_size(), rigidity_diagnostics(p, assemble_and_solve(p, solver))};
        });
        r.rigidity.push_back(row);
    }
    const double tol = c.tolerances.rigidity;
    const RigidityRow& fine = r.rigidity.back();
    const auto fd = diagnostics(fine.rigidity);
    if (!s.equality_case) {
        const double worst = *std::max_element(fd.begin(), fd.end());
        r.checks.push_back({"rigidity_detected", fine.resolution, worst, tol, worst >= tol});
        return;
    }
    for (std::size_t k = 0; k < fd.size(); ++k)
        r.checks.push_back({std::string(kDiagnosticNames[k]), fine.resolution, fd[k], tol, fd[k] < tol});
    for (std::size_t i = 1; i < r.rigidity.size(); ++i) {
        const auto prev = diagnostics(r.rigidity[i - 1].rigidity);
        const auto cur = diagnostics(r.rigidity[i].rigidity);
        for (std::size_t k = 0; k < cur.size(); ++k) {
            const double limit = std::max(prev[k], c.tolerances.rigidity_floor);
            r.checks.push_back({std::string(kDiagnosticNames[k]) + "_decreasing", r.rigidity[i].resolution, cur[k],
                                limit, cur[k] <= limit});
        }
    }
}

void run_convergence(const Scenario& s, const RunConfig& c, ScenarioResult& r)
{
    ConvergenceStudy study = timed(r, "convergence", [&] { return convergence_study(s, s.resolutions); });
    r.sobolev = study.reports;
    const double slope = study.slope.value_or(std::numeric_limits<double>::quiet_NaN());
    const bool ok = study.roundoff_limited || (study.slope && *study.slope >= c.tolerances.min_slope);
    r.checks.push_back({"convergence_slope", s.resolutions.back(), slope, c.tolerances.min_slope, ok});
    r.convergence = std::move(study);
}

ScenarioResult run_scenario(const Scenario& s, const RunConfig& c, int workers)
{
    ScenarioResult r;
    r.name = s.name;
    r.description = s.description;
    r.exercises = s.exercises;
    try {
        switch (c.pipeline) {
        case Pipeline::Inequality: run_inequality(s, c, r); break;
        case Pipeline::AbpFull: run_abp_full(s, c, workers, r); break;
        case Pipeline::Rigidity: run_rigidity(s, c, workers, r); break;
        case Pipeline::Convergence: run_convergence(s, c, r); break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

std::string num(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

std::string vec(const AmbientVec& v)
{
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += num(v(i));
    }
    return out;
}

class CsvWriter {
public:
    CsvWriter(const RunReport& report, std::initializer_list<const char*> columns)
        : prefix_(report.config_hash + "," + std::to_string(report.seed))
    {
        out_ << "config_hash,seed";
        for (const char* col : columns) out_ << ',' << col;
        out_ << '\n';
    }
    void row(std::initializer_list<std::string> cells)
    {
        out_ << prefix_;
        for (const std::string& cell : cells) out_ << ',' << cell;
        out_ << '\n';
    }
    [[nodiscard]] std::string str() const { return out_.str(); }

private:
    std::string prefix_;
    std::ostringstream out_;
};

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json rigidity_json(const Rigidity& g)
{
    return {{"sup_II", num_json(g.sup_II)},
            {"sup_divA", num_json(g.sup_divA)},
            {"cofactor_residual", num_json(g.cofactor_residual)},
            {"boundary_grad_deficit", num_json(g.boundary_grad_deficit)},
            {"gradient_image_hausdorff", num_json(g.gradient_image_hausdorff)}};
}

}  // namespace

std::string to_string(Pipeline p)
{
    switch (p) {
    case Pipeline::Inequality: return "inequality";
    case Pipeline::AbpFull: return "abp-full";
    case Pipeline::Rigidity: return "rigidity";
    case Pipeline::Convergence: return "convergence";
    }
    return "inequality";
}

Pipeline pipeline_from_string(const std::string& s)
{
    if (s == "inequality") return Pipeline::Inequality;
    if (s == "abp-full") return Pipeline::AbpFull;
    if (s == "rigidity") return Pipeline::Rigidity;
    if (s == "convergence") return Pipeline::Convergence;
    throw ConfigError("pipeline", "unknown pipeline '" + s + "' (inequality, abp-full, rigidity, convergence)");
}

std::string RunConfig::hash() const
{
    std::array<char, 17> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + 16, fnv1a(canonical), 16);
    std::string h(buf.data(), res.ptr);
    return std::string(16 - h.size(), '0') + h;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base)
{
    const json j = parse_json(text, "");
    object_at(j, "config");
    check_keys(j, "", {"scenarios", "pipeline", "resolutions", "seed", "output", "tolerances", "abp"});
    RunConfig c;
    if (j.contains("pipeline")) c.pipeline = pipeline_from_string(string_at(j["pipeline"], "pipeline"));
    if (j.contains("resolutions")) c.resolutions = resolutions_at(j["resolutions"], "resolutions");
    if (j.contains("seed")) c.seed = seed_at(j["seed"], "seed");
    if (j.contains("output")) c.output = string_at(j["output"], "output");
    if (j.contains("tolerances")) parse_tolerances(j["tolerances"], "tolerances", c.tolerances);
    if (j.contains("abp")) {
        const json& a = object_at(j["abp"], "abp");
        check_keys(a, "abp", {"coverage_samples", "v_samples", "jacobian_samples", "sigma"});
        if (a.contains("coverage_samples")) c.coverage_samples = positive_int_at(a["coverage_samples"], "abp.coverage_samples");
        if (a.contains("v_samples")) c.v_samples = positive_int_at(a["v_samples"], "abp.v_samples");
        if (a.contains("jacobian_samples")) c.jacobian_samples = positive_int_at(a["jacobian_samples"], "abp.jacobian_samples");
        if (a.contains("sigma")) {
            c.sigma = number_at(a["sigma"], "abp.sigma");
            if (!(c.sigma >= 0.0 && c.sigma < 1.0)) throw ConfigError("abp.sigma", "must lie in [0, 1)");
        }
    }
    if (!j.contains("scenarios")) throw ConfigError("scenarios", "required");
    if (!j["scenarios"].is_array()) throw ConfigError("scenarios", "expected an array");
    std::vector<ParsedScenario> parsed;
    json echo = json::array();
    parse_scenarios(j["scenarios"], "scenarios", base, 0, parsed, echo);
    finish_scenarios(c, std::move(parsed));
    refresh_canonical(c, echo);
    return c;
}

RunConfig load_config(const std::filesystem::path& file)
{
    RunConfig c = parse_config(read_file(file, "config"), file.parent_path());
    if (c.output.is_relative()) c.output = file.parent_path() / c.output;
    return c;
}

void override_seed(RunConfig& config, std::uint64_t seed)
{
    config.seed = seed;
    json j = json::parse(config.canonical);
    j["seed"] = seed;
    config.canonical = j.dump();
}

RunConfig convergence_config(const std::string& scenario, const std::vector<int>& resolutions, std::uint64_t seed)
{
    json j;
    j["pipeline"] = "convergence";
    j["scenarios"] = json::array({scenario});
    j["resolutions"] = resolutions;
    j["seed"] = seed;
    return parse_config(j.dump());
}

bool ScenarioResult::passed() const
{
    return error.empty() && !checks.empty()
           && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

bool RunReport::passed() const
{
    return std::all_of(scenarios.begin(), scenarios.end(), [](const ScenarioResult& s) { return s.passed(); });
}

RunReport run(const RunConfig& config, int workers)
{
    RunReport report;
    report.config_hash = config.hash();
    report.seed = config.seed;
    report.pipeline = config.pipeline;
    report.config = config.canonical;

    const int count = static_cast<int>(config.scenarios.size());
    workers = std::max(1, workers);
    const int outer = std::min(workers, count);
    const int inner = std::max(1, workers / outer);
    report.scenarios.resize(config.scenarios.size());
    std::vector<std::exception_ptr> errors(config.scenarios.size());
    parallel_for(count, outer, [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            try {
                report.scenarios[static_cast<std::size_t>(i)] =
                    run_scenario(config.scenarios[static_cast<std::size_t>(i)], config, inner);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return report;
}

std::string report_json(const RunReport& report)
{
    nlohmann::ordered_json j;
    j["config_hash"] = report.config_hash;
    j["seed"] = report.seed;
    j["pipeline"] = to_string(report.pipeline);
    j["passed"] = report.passed();
    j["config"] = json::parse(report.config);
    j["scenarios"] = nlohmann::ordered_json::array();
    for (const ScenarioResult& s : report.scenarios) {
        nlohmann::ordered_json e;
        e["name"] = s.name;
        e["description"] = s.description;
        e["exercises"] = s.exercises;
        e["passed"] = s.passed();
        if (!s.error.empty()) e["error"] = s.error;
        e["checks"] = nlohmann::ordered_json::array();
        for (const Check& c : s.checks)
            e["checks"].push_back({{"name", c.name}, {"resolution", c.resolution}, {"seed", report.seed},
                                   {"value", num_json(c.value)}, {"limit", num_json(c.limit)}, {"passed", c.passed}});
        e["sobolev"] = nlohmann::ordered_json::array();
        for (const SobolevReport& r : s.sobolev)
            e["sobolev"].push_back({{"resolution", r.resolution}, {"seed", report.seed}, {"n", r.n}, {"m", r.m},
                                    {"mesh_size", r.mesh_size}, {"lhs_interior", r.lhs_interior},
                                    {"lhs_boundary", r.lhs_boundary}, {"rhs_integral", r.rhs_integral},
                                    {"constant", r.constant}, {"ratio", r.ratio}, {"eps_mesh", r.eps_mesh}});
        e["abp"] = nlohmann::ordered_json::array();
        for (const AbpReport& a : s.abp) {
            const CoverageStats& cs = a.coverage.stats;
            e["abp"].push_back(
                {{"resolution", a.resolution},
                 {"seed", report.seed},
                 {"mesh_size", a.mesh_size},
                 {"lambda", a.lambda},
                 {"compatibility", a.compatibility},
                 {"eps_mesh", a.eps_mesh},
                 {"eps_ratio", a.eps_ratio},
                 {"eps_jacobian", a.eps_jacobian},
                 {"solver", {{"method", a.method},
                             {"algebraic_residual", a.algebraic_residual},
                             {"interior_residual", a.interior_residual},
                             {"boundary_residual", a.boundary_residual}}},
                 {"coverage", {{"samples", cs.samples},
                               {"successes", cs.successes},
                               {"interior", cs.interior},
                               {"v_members", cs.v_members},
                               {"boundary_candidates", cs.boundary_candidates},
                               {"boundary_sign_failures", cs.boundary_sign_failures},
                               {"max_residual", cs.max_residual},
                               {"threshold", cs.threshold}}},
                 {"jacobian_bound", {{"checked", a.bound.checked},
                                     {"attempts", a.v_attempts},
                                     {"violations", a.bound.violations},
                                     {"max_excess", a.bound.max_excess},
                                     {"tolerance", a.bound.tolerance}}},
                 {"jacobian_agreement", {{"samples", a.agreement.samples},
                                         {"max_difference", a.agreement.max_difference},
                                         {"tolerance", a.agreement.tolerance}}},
                 {"volume", {{"lhs", a.volume.lhs},
                             {"rhs", a.volume.rhs},
                             {"slack", a.volume.slack()},
                             {"tolerance", a.volume.tolerance},
                             {"sigma", a.volume.sigma},
                             {"annulus_volume", a.volume.annulus_volume},
                             {"fiber_integral", a.volume.fiber_integral},
                             {"fiber_bound", a.volume.fiber_bound}}},
                 {"rigidity", rigidity_json(a.rigidity)}});
        }
        e["rigidity"] = nlohmann::ordered_json::array();
        for (const RigidityRow& row : s.rigidity) {
            nlohmann::ordered_json r{{"resolution", row.resolution}, {"seed", report.seed}, {"mesh_size", row.mesh_size}};
            const json diag = rigidity_json(row.rigidity);
            for (auto it = diag.begin(); it != diag.end(); ++it) r[it.key()] = *it;
            e["rigidity"].push_back(r);
        }
        if (s.convergence) {
            const ConvergenceStudy& c = *s.convergence;
            std::vector<json> errors;
            for (double v : c.errors) errors.push_back(num_json(v));
            e["convergence"] = {{"resolutions", c.resolutions},
                                {"seed", report.seed},
                                {"mesh_sizes", c.mesh_sizes},
                                {"errors", errors},
                                {"slope", c.slope ? num_json(*c.slope) : json(nullptr)},
                                {"roundoff_limited", c.roundoff_limited}};
        }
        e["timings"] = nlohmann::ordered_json::object();
        for (const StageTime& t : s.timings) e["timings"][t.stage] = t.seconds;
        j["scenarios"].push_back(e);
    }
    return j.dump(2) + "\n";
}

std::string sobolev_csv(const RunReport& report)
{
    CsvWriter w(report, {"scenario", "resolution", "n", "m", "mesh_size", "lhs_interior", "lhs_boundary",
                         "rhs_integral", "constant", "ratio", "eps_mesh"});
    for (const ScenarioResult& s : report.scenarios)
        for (const SobolevReport& r : s.sobolev)
            w.row({s.name, std::to_string(r.resolution), std::to_string(r.n), std::to_string(r.m), num(r.mesh_size),
                   num(r.lhs_interior), num(r.lhs_boundary), num(r.rhs_integral), num(r.constant), num(r.ratio),
                   num(r.eps_mesh)});
    return w.str();
}

std::string abp_sweep_csv(const RunReport& report)
{
    CsvWriter w(report, {"scenario", "resolution", "kind", "mesh_size", "lambda", "compatibility", "eps_mesh",
                         "coverage_fraction", "coverage_max_residual", "coverage_threshold", "boundary_sign_failures",
                         "v_samples", "v_attempts", "bound_violations", "bound_max_excess", "bound_tolerance",
                         "jacobian_max_difference", "jacobian_tolerance", "volume_slack", "volume_chain", "sup_II",
                         "sup_divA", "cofactor_residual", "boundary_grad_deficit", "gradient_image_hausdorff",
                         "passed"});
    for (const ScenarioResult& s : report.scenarios) {
        for (const AbpReport& a : s.abp) {
            const CoverageStats& cs = a.coverage.stats;
            const Rigidity& g = a.rigidity;
            w.row({s.name, std::to_string(a.resolution), "abp-full", num(a.mesh_size), num(a.lambda),
                   num(a.compatibility), num(a.eps_mesh), num(cs.success_fraction()), num(cs.max_residual),
                   num(cs.threshold), std::to_string(cs.boundary_sign_failures), std::to_string(a.bound.checked),
                   std::to_string(a.v_attempts), std::to_string(a.bound.violations), num(a.bound.max_excess),
                   num(a.bound.tolerance), num(a.agreement.max_difference), num(a.agreement.tolerance),
                   num(a.volume.slack()), a.volume.chain_holds ? "1" : "0", num(g.sup_II), num(g.sup_divA),
                   num(g.cofactor_residual), num(g.boundary_grad_deficit), num(g.gradient_image_hausdorff),
                   a.passed() ? "1" : "0"});
        }
        for (const RigidityRow& row : s.rigidity) {
            const Rigidity& g = row.rigidity;
            w.row({s.name, std::to_string(row.resolution), "rigidity", num(row.mesh_size), "", "", "", "", "", "", "",
                   "", "", "", "", "", "", "", "", "", num(g.sup_II), num(g.sup_divA), num(g.cofactor_residual),
                   num(g.boundary_grad_deficit), num(g.gradient_image_hausdorff), ""});
        }
    }
    return w.str();
}

std::string coverage_csv(const RunReport& report)
{
    CsvWriter w(report, {"scenario", "resolution", "sample", "xi", "phi", "residual", "interior", "in_v", "psd_min",
                         "boundary_sign"});
    for (const ScenarioResult& s : report.scenarios)
        for (const AbpReport& a : s.abp)
            for (std::size_t i = 0; i < a.coverage.samples.size(); ++i) {
                const CoverageSample& c = a.coverage.samples[i];
                w.row({s.name, std::to_string(a.resolution), std::to_string(i), vec(c.xi), vec(c.phi), num(c.residual),
                       c.interior ? "1" : "0", c.in_V ? "1" : "0", num(c.psd_min),
                       c.boundary_sign ? num(*c.boundary_sign) : ""});
            }
    return w.str();
}

void write_outputs(const RunReport& report, const std::filesystem::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("output", "cannot create '" + dir.string() + "': " + ec.message());
    const auto write = [&](const char* name, const std::string& body) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("output", "cannot write '" + (dir / name).string() + "'");
        out << body;
    };
    write("report.json", report_json(report));
    write("sobolev.csv", sobolev_csv(report));
    write("abp_sweep.csv", abp_sweep_csv(report));
    write("coverage.csv", coverage_csv(report));
}

}  // namespace msineq
