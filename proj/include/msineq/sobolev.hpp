#ifndef MSINEQ_SOBOLEV_HPP
#define MSINEQ_SOBOLEV_HPP

// Sobolev functionals for tensor fields, sharp constants and scenarios.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "msineq/geometry.hpp"
#include "msineq/report.hpp"
#include "msineq/tensorfield.hpp"

namespace msineq {

/// Which form of the inequality a scenario exercises.
enum class Theorem {
    GeneralCodim,  ///< any m >= 2, constant n[(n+m)|B^{n+m}|/(m|B^m|)]^{1/n}
    SharpCodim2,   ///< m = 2, constant n|B^n|^{1/n}
    Codim1Lift,    ///< m = 1, evaluated after lifting into one more dimension
};

[[nodiscard]] std::string to_string(Theorem t);
/// Parses "general", "codim2" or "codim1"; throws ConfigError otherwise.
[[nodiscard]] Theorem theorem_from_string(const std::string& s);

/// n[(n+m)|B^{n+m}|/(m|B^m|)]^{1/n}; rejects n < 2 and m < 2.
[[nodiscard]] double michael_simon_constant(int n, int m);

using ChartBuilder = std::function<Chart(int resolution, DerivativeMode mode)>;
using FieldBuilder = std::function<TensorField(const Patch&)>;

/// One connected component: a chart family and the tensor field on it.
struct ScenarioPiece {
    ChartBuilder chart;
    FieldBuilder field;
};

struct Scenario {
    std::string name;
    std::string description;
    std::string exercises;  ///< statement the scenario checks
    Theorem theorem = Theorem::SharpCodim2;
    std::vector<ScenarioPiece> pieces;
    std::vector<int> resolutions{33, 65};
    DerivativeMode mode = DerivativeMode::Exact;
    double field_scale = 1.0;
    std::optional<double> exact_ratio;  ///< closed-form continuum ratio when known
    bool equality_case = false;         ///< constructed so that the ratio is 1
};

/// Charts, patches and fields of a scenario at one resolution.
struct Discretization {
    int n = 0;
    int m = 0;
    int resolution = 0;
    std::vector<Patch> patches;
    std::vector<TensorField> fields;
    [[nodiscard]] double mesh_size() const;
};

/// Fail-fast validation of dimensions, selector and schedule; throws ConfigError.
void validate(const Scenario& scenario);
[[nodiscard]] Discretization discretize(const Scenario& scenario, int resolution);
/// The functionals summed over all pieces (eps_mesh left at 0).
[[nodiscard]] SobolevReport functionals(const Discretization& disc, Theorem theorem);
[[nodiscard]] SobolevReport evaluate_at(const Scenario& scenario, int resolution);

/// Resolution paired with `fine` for Richardson estimates.
[[nodiscard]] int coarse_resolution(int fine);
/// |fine - coarse| / ((h_coarse/h_fine)^order - 1), floored at 1e-12 * |fine|.
[[nodiscard]] double richardson_error(double fine, double coarse, double h_fine, double h_coarse, int order);
/// Quadrature order of a derivative mode.
[[nodiscard]] int quadrature_order(DerivativeMode mode);

/// Report at the finest scheduled resolution with eps_mesh from a Richardson
/// comparison against coarse_resolution(finest).
[[nodiscard]] SobolevReport evaluate_inequality(const Scenario& scenario);

/// a^{(n-1)/n} + b^{(n-1)/n} > (a+b)^{(n-1)/n} with margin above 1e-12.
[[nodiscard]] bool superadditivity_check(double a, double b, int n);

/// A = cof D^2 u on a flat chart; u is given on ambient coordinates.
/// Throws std::invalid_argument for a curved chart, std::domain_error if D^2 u
/// is not positive definite at some node.
[[nodiscard]] TensorField cofactor_field_from_convex_potential(const JetScalar& u, const Patch& patch);
[[nodiscard]] TensorField cofactor_field_from_convex_potential(const JetScalar& u, const Chart& chart);

/// ratio - 1.
[[nodiscard]] double equality_gap(const Scenario& scenario, const SobolevReport& report);

struct ConvergenceStudy {
    std::vector<int> resolutions;
    std::vector<double> mesh_sizes;
    std::vector<SobolevReport> reports;
    /// |ratio - exact| when the exact ratio is known, otherwise successive differences.
    std::vector<double> errors;
    std::optional<double> slope;  ///< least-squares log-log slope of errors above the round-off floor
    bool roundoff_limited = false;  ///< every error is below the round-off floor
};

inline constexpr double kRoundoffFloor = 1e-10;

[[nodiscard]] ConvergenceStudy convergence_study(const Scenario& scenario, const std::vector<int>& resolutions);
/// Least-squares slope of log(err) against log(h).
[[nodiscard]] double loglog_slope(const std::vector<double>& h, const std::vector<double>& err);

/// Code-defined scenarios referenced by name.
[[nodiscard]] std::vector<Scenario> builtin_scenarios();
[[nodiscard]] std::optional<Scenario> builtin_scenario(const std::string& name);

/// Randomized codimension-2 scenarios: near-flat polynomial graphs and
/// sphere-like surfaces carrying random positive-definite fields.
[[nodiscard]] std::vector<Scenario> random_scenarios(int count, std::uint64_t seed);

}  // namespace msineq

#endif  // MSINEQ_SOBOLEV_HPP
