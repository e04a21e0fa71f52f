// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Runtime budgets are checked alongside the numbers.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "msineq/abp.hpp"
#include "msineq/linalg.hpp"
#include "msineq/random.hpp"
#include "msineq/runner.hpp"
#include "msineq/sobolev.hpp"

using namespace msineq;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Scenario named(const std::string& name) { return *builtin_scenario(name); }

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// |B^n| from the two-step recursion, independent of the library's Gamma form.
double ball_volume(int n)
{
    if (n == 1) return 2.0;
    if (n == 2) return kPi;
    return 2.0 * kPi / n * ball_volume(n - 2);
}

Outcome equality_reproduction()
{
    const Scenario s = named("flat-disk-equality");
    std::vector<double> err;
    double worst_time = 0.0;
    bool ok = true;
    for (int res : {65, 129}) {
        const auto t0 = std::chrono::steady_clock::now();
        const SobolevReport r = evaluate_at(s, res);
        worst_time = std::max(worst_time, seconds_since(t0));
        const double e = std::abs(r.ratio - 1.0);
        ok = ok && e <= (res == 65 ? 1e-2 : 2.5e-3);
        err.push_back(e);
    }
    const ConvergenceStudy study = convergence_study(s, {33, 65, 129});
    const bool slope_ok = study.roundoff_limited || (study.slope && *study.slope >= 1.9);
    std::string slope = study.slope ? fmt("%.3f", *study.slope) : std::string("n/a (round-off limited)");
    return {ok && slope_ok && worst_time < 10.0,
            fmt("|ratio-1| = %.2e @65, %.2e @129; slope %s; max %.2fs per resolution", err[0], err[1], slope.c_str(),
                worst_time)};
}

Outcome sphere_ratio()
{
    const auto t0 = std::chrono::steady_clock::now();
    const SobolevReport r = evaluate_at(named("sphere-codim1-lift"), 129);
    const double t = seconds_since(t0);
    const double expected = std::sqrt(4.0 * kPi / kPi);
    const double e = std::abs(r.ratio - expected);
    return {e <= 1e-2 && t < 10.0, fmt("ratio %.6f vs %.1f (|diff| %.2e), %.2fs", r.ratio, expected, e, t)};
}

Outcome constant_identity()
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int n = 2; n <= 6; ++n)
        worst = std::max(worst, std::abs(michael_simon_constant(n, 2) - n * std::pow(ball_volume(n), 1.0 / n)));
    const double t = seconds_since(t0);
    return {worst <= 1e-12 && t < 1e-3, fmt("max deviation %.2e over n = 2..6, %.3f ms", worst, 1e3 * t)};
}

Eigen::MatrixXd random_matrix(const CounterRng& rng, std::uint64_t index, int n)
{
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = rng.normal(index, static_cast<std::uint64_t>(i * n + j));
    return m;
}

Outcome amgm_suite()
{
    const auto t0 = std::chrono::steady_clock::now();
    const CounterRng rng(2024, 4);
    int gaps_ok = 0;
    double min_gap = 1e300;
    for (int k = 0; k < 1000; ++k) {
        const int n = 2 + k % 4;
        const Eigen::MatrixXd g = random_matrix(rng, 2 * k, n);
        const Eigen::MatrixXd a = g * g.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd f = random_matrix(rng, 2 * k + 1, n);
        if (k % 5 == 0) f.col(0).setZero();  // singular B
        const Eigen::MatrixXd b = f * f.transpose();
        const AmgmResult r = matrix_amgm_check(a, b);
        min_gap = std::min(min_gap, r.gap);
        gaps_ok += r.holds ? 1 : 0;
    }
    int flagged = 0;
    for (int k = 0; k < 100; ++k) {
        const int n = 2 + k % 4;
        const Eigen::MatrixXd g = random_matrix(rng, 5000 + k, n);
        const Eigen::MatrixXd a = g * g.transpose() + Eigen::MatrixXd::Identity(n, n);
        const double lambda = 0.5 + rng.uniform(5000 + k, 99);
        Eigen::MatrixXd b = lambda * a.inverse();
        b = 0.5 * (b + b.transpose()).eval();
        flagged += matrix_amgm_check(a, b).equality_flag ? 1 : 0;
    }
    const double t = seconds_since(t0);
    return {gaps_ok == 1000 && flagged == 100 && t < 1.0,
            fmt("%d/1000 gaps >= 0 (min %.2e), %d/100 equality cases flagged, %.3fs", gaps_ok, min_gap, flagged, t)};
}

Outcome inequality_sweep()
{
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Scenario> sweep = random_scenarios(50, 20240501);
    std::vector<double> margin(sweep.size(), -1e300);
    std::vector<int> ok(sweep.size(), 0);
    parallel_for(static_cast<int>(sweep.size()), default_workers(), [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const SobolevReport r = evaluate_inequality(sweep[static_cast<std::size_t>(i)]);
            margin[static_cast<std::size_t>(i)] = r.ratio - (1.0 - 5.0 * r.eps_mesh);
            ok[static_cast<std::size_t>(i)] = margin[static_cast<std::size_t>(i)] >= 0.0 && r.m == 2;
        }
    });
    const double t = seconds_since(t0);
    const int passed = static_cast<int>(std::count(ok.begin(), ok.end(), 1));
    const double min_margin = *std::min_element(margin.begin(), margin.end());
    return {passed == static_cast<int>(sweep.size()) && t < 300.0,
            fmt("%d/%zu scenarios with ratio >= 1 - 5 eps_mesh (min margin %.3e), %.1fs", passed, sweep.size(),
                min_margin, t)};
}

Outcome abp_pipeline()
{
    const auto t0 = std::chrono::steady_clock::now();
    AbpRunOptions opts;
    opts.seed = 6;
    bool ok = true;
    std::string detail;
    for (const char* name : {"flat-disk-equality", "flat-disk-metric", "sphere-codim1-lift", "sphere-conformal"}) {
        const AbpReport r = run_abp(named(name), 65, opts);
        const bool pass = r.passed() && r.coverage.stats.samples == 1000 && r.bound.checked == 10000
                          && r.agreement.samples == 100 && r.volume.slack() >= -r.eps_mesh;
        ok = ok && pass;
        detail += fmt("%s%s: cov %.1f%% viol %d |dJ| %.1e/%.1e slack %.1e; ", pass ? "" : "!", name,
                      100.0 * r.coverage.stats.success_fraction(), r.bound.violations, r.agreement.max_difference,
                      r.agreement.tolerance, r.volume.slack());
    }
    const double t = seconds_since(t0);
    return {ok && t < 120.0, detail + fmt("%.1fs", t)};
}

Outcome rigidity()
{
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario flat = named("flat-disk-equality");
    std::vector<std::array<double, 5>> diag;
    for (int res : {65, 129}) {
        const AbpProblem p = make_abp_problem(flat, res);
        const Rigidity r = rigidity_diagnostics(p, assemble_and_solve(p));
        diag.push_back({r.sup_II, r.sup_divA, r.cofactor_residual, r.boundary_grad_deficit, r.gradient_image_hausdorff});
    }
    constexpr double kFloor = 1e-6;
    bool ok = true;
    for (std::size_t k = 0; k < 5; ++k) {
        ok = ok && diag[1][k] < 5e-3;
        ok = ok && (diag[1][k] <= diag[0][k] || diag[1][k] <= kFloor);
    }
    const AbpProblem sphere = make_abp_problem(named("sphere-codim1-lift"), 129);
    const Rigidity rs = rigidity_diagnostics(sphere, assemble_and_solve(sphere));
    const bool sphere_ok = std::abs(rs.sup_II - 2.0) <= 1e-2;
    const double t = seconds_since(t0);
    return {ok && sphere_ok && t < 60.0,
            fmt("flat @129: II %.1e div %.1e cof %.1e bgd %.1e haus %.1e (haus @65 %.1e); sphere sup_II %.4f; %.1fs",
                diag[1][0], diag[1][1], diag[1][2], diag[1][3], diag[1][4], diag[0][4], rs.sup_II, t)};
}

Outcome disconnected()
{
    const auto t0 = std::chrono::steady_clock::now();
    const SobolevReport r = evaluate_inequality(named("disconnected-two-disks"));
    const double t = seconds_since(t0);
    const double e = std::abs(r.ratio - std::sqrt(2.0));
    return {e <= 1e-2 && t < 10.0, fmt("ratio %.6f vs sqrt 2 (|diff| %.2e) @%d, %.2fs", r.ratio, e, r.resolution, t)};
}

Outcome scaling_invariance()
{
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Scenario> all = builtin_scenarios();
    std::vector<double> worst(all.size(), 0.0);
    parallel_for(static_cast<int>(all.size()), default_workers(), [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const Scenario& s = all[static_cast<std::size_t>(i)];
            const int res = s.resolutions.front();
            const double base = evaluate_at(s, res).ratio;
            for (double lambda : {0.5, 2.0, 10.0}) {
                Scenario scaled = s;
                scaled.field_scale = s.field_scale * lambda;
                const double q = evaluate_at(scaled, res).ratio / base;
                worst[static_cast<std::size_t>(i)] = std::max(worst[static_cast<std::size_t>(i)], std::abs(q - 1.0));
            }
        }
    });
    const double t = seconds_since(t0);
    const double w = *std::max_element(worst.begin(), worst.end());
    return {w <= 1e-10 && t < 30.0, fmt("max |ratio(lA)/ratio(A) - 1| = %.2e over %zu scenarios, %.1fs", w, all.size(), t)};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism()
{
    const char* config = R"({"pipeline": "abp-full", "seed": 31337, "resolutions": [33],
        "scenarios": ["flat-disk-equality", "sphere-conformal", "flat-disk-anisotropic"],
        "abp": {"coverage_samples": 300, "v_samples": 2000, "jacobian_samples": 20}})";
    const auto root = std::filesystem::temp_directory_path() / "msineq_acceptance_determinism";
    std::filesystem::remove_all(root);
    write_outputs(run(parse_config(config), default_workers()), root / "a");
    write_outputs(run(parse_config(config), 1), root / "b");
    bool same = true;
    std::size_t bytes = 0;
    for (const char* f : {"sobolev.csv", "abp_sweep.csv", "coverage.csv"}) {
        const std::string a = slurp(root / "a" / f);
        same = same && !a.empty() && a == slurp(root / "b" / f);
        bytes += a.size();
    }
    std::filesystem::remove_all(root);
    return {same, fmt("%zu CSV bytes compared across two runs (different worker counts)", bytes)};
}

}  // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"equality reproduction", equality_reproduction},
        {"sphere ratio", sphere_ratio},
        {"constant identity", constant_identity},
        {"AM-GM property suite", amgm_suite},
        {"inequality sweep", inequality_sweep},
        {"ABP pipeline", abp_pipeline},
        {"rigidity diagnostics", rigidity},
        {"disconnected strict inequality", disconnected},
        {"scaling invariance", scaling_invariance},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.passed ? 0 : 1;
        std::printf("%s %2zu %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
    return failures == 0 ? 0 : 1;
}
