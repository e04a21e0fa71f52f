#ifndef MSINEQ_ABP_HPP
#define MSINEQ_ABP_HPP

// The ABP construction on a discretized submanifold: the Neumann problem for
// div(A grad u), the transport map over the normal bundle, and the coverage,
// Jacobian, volume and rigidity checks built on it.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msineq/geometry.hpp"
#include "msineq/parallel.hpp"
#include "msineq/report.hpp"
#include "msineq/sobolev.hpp"
#include "msineq/tensorfield.hpp"

namespace msineq {

struct SolverOptions {
    double tolerance = 1e-10;               ///< relative residual of the linear system
    double compatibility_tolerance = 1e-8;  ///< relative mismatch of source and boundary flux
    bool force_iterative = false;           ///< skip the direct factorization
    int max_iterations = 5000;
    std::vector<double> initial_guess;      ///< nodal values, iterative solver only
    int workers = default_workers();
};

struct NeumannSolution {
    std::vector<double> u;  ///< zero mean
    double algebraic_residual = 0.0;
    std::vector<double> residual_history;
    std::string method;
};

/// Bilinear (multilinear) finite elements for div(A grad u) = source with
/// <A grad u, nu> = flux, using the zero-mean gauge. `flux` is indexed like
/// patch.boundary. Throws CompatibilityError when the data are not solvable
/// within tolerance and SolverError when the linear solve fails.
[[nodiscard]] NeumannSolution solve_neumann(const Patch& patch, const TensorField& a, std::span<const double> source,
                                            std::span<const double> flux, const SolverOptions& options = {});

/// Normalized field and Neumann data on one connected patch.
struct AbpProblem {
    Patch patch;
    TensorField a;                   ///< rescaled so that LHS = n * integral (det A)^(1/(n-1))
    double lambda = 1.0;             ///< the applied rescaling
    std::vector<double> det_power;   ///< (det g^{-1}A)^(1/(n-1)) per node
    std::vector<double> source;      ///< n det_power - sqrt(|div A|^2 + |<A, II>|^2)
    std::vector<double> flux;        ///< |A(nu)| per boundary sample
    double compatibility = 0.0;      ///< |int s - int_boundary b| / (n int det_power)
    SobolevReport report;            ///< functionals of the normalized field

    [[nodiscard]] int n() const { return patch.chart.intrinsic_dim(); }
    [[nodiscard]] int m() const { return patch.chart.codimension(); }
    [[nodiscard]] double mesh_size() const { return patch.metric.mesh_size; }
};

[[nodiscard]] AbpProblem make_abp_problem(const Patch& patch, const TensorField& a);
/// Single-piece scenarios only; throws ConfigError otherwise.
[[nodiscard]] AbpProblem make_abp_problem(const Scenario& scenario, int resolution);

struct AbpSolution {
    std::vector<double> u;
    std::vector<Vec> du;                   ///< d_i u
    std::vector<Vec> grad;                 ///< chart components of grad u
    std::vector<AmbientVec> grad_ambient;  ///< grad u as an ambient vector
    std::vector<Mat> hess;                 ///< covariant Hessian D^2 u
    double mean = 0.0;                     ///< integral of u
    double algebraic_residual = 0.0;
    double interior_residual = 0.0;        ///< quadrature RMS of div(A grad u) - s over non-boundary nodes
    double boundary_residual = 0.0;        ///< max |<A grad u, nu> - b|
    std::vector<double> residual_history;
    std::string method;
};

[[nodiscard]] AbpSolution assemble_and_solve(const AbpProblem& problem, const SolverOptions& options = {});
/// Gradient, Hessian and residuals of given nodal values.
[[nodiscard]] AbpSolution derive_solution(const AbpProblem& problem, std::vector<double> u);

/// A point of the normal bundle: grid node plus normal-frame coefficients.
struct TransportPoint {
    int node = -1;
    Vec y;
    bool in_U = false;
    bool in_V = false;
    double psd_min = 0.0;  ///< smallest eigenvalue of g^{-1}(D^2u - <II, y>)
    double eps_psd = 0.0;
};

/// 10 h^2 (1 + |H|) with H the orthonormalized ABP matrix.
[[nodiscard]] double default_eps_psd(double mesh_size, const Mat& orthonormal_matrix);

[[nodiscard]] TransportPoint make_transport_point(const AbpProblem& problem, const AbpSolution& sol, int node,
                                                  const Vec& y, std::optional<double> eps_psd = std::nullopt);
/// D^2 u(x) - sum_alpha y^alpha II^alpha(x).
[[nodiscard]] Mat abp_matrix(const AbpProblem& problem, const AbpSolution& sol, int node, const Vec& y);

/// grad u(x) + sum_alpha y^alpha nu_alpha(x).
[[nodiscard]] AmbientVec transport_map(const AbpProblem& problem, const AbpSolution& sol, const TransportPoint& p);
/// det g^{-1}(D^2 u - <II, y>).
[[nodiscard]] double jacobian_determinant(const AbpProblem& problem, const AbpSolution& sol, const TransportPoint& p);
/// det of the grid-differenced differential of the transport map over
/// (chart x fiber) coordinates, divided by det[dF | nu].
[[nodiscard]] double fd_jacobian(const AbpProblem& problem, const AbpSolution& sol, const TransportPoint& p);

struct JacobianBound {
    int checked = 0;
    int violations = 0;
    double max_excess = 0.0;  ///< largest J - det_power (or -J) seen, may be negative
    double tolerance = 0.0;
};

/// Throws std::invalid_argument if a sample is not in V.
[[nodiscard]] JacobianBound jacobian_bound_check(const AbpProblem& problem, const AbpSolution& sol,
                                                 std::span<const TransportPoint> samples, double tol);

struct VSampleSet {
    std::vector<TransportPoint> points;
    long long attempts = 0;
};

/// Base nodes drawn with the quadrature measure, fibers uniform in the m-ball
/// of radius sqrt(1 - |grad u|^2); only V members are kept, in draw order.
[[nodiscard]] VSampleSet sample_v_points(const AbpProblem& problem, const AbpSolution& sol, int count,
                                         std::uint64_t seed, std::optional<double> eps_psd = std::nullopt,
                                         int workers = default_workers());

/// Random interior points of U (no V restriction), for the Jacobian oracle.
[[nodiscard]] std::vector<TransportPoint> sample_u_points(const AbpProblem& problem, const AbpSolution& sol,
                                                          int count, std::uint64_t seed);

struct CoverageSample {
    AmbientVec xi;
    int node = -1;                   ///< grid minimizer of u - <F, xi>
    Vec x0;                          ///< refined minimizer (chart parameters)
    AmbientVec y0;                   ///< normal part of xi at x0
    AmbientVec phi;                  ///< grad u(x0) + y0
    double residual = 0.0;           ///< |phi - xi|
    bool interior = false;
    bool in_V = false;
    double psd_min = 0.0;
    double eps_psd = 0.0;
    std::optional<double> boundary_sign;  ///< |A(nu)| - <xi, A(nu)> at a boundary minimizer
};

[[nodiscard]] CoverageSample coverage_oracle(const AbpProblem& problem, const AbpSolution& sol, const AmbientVec& xi,
                                             std::optional<double> eps_psd = std::nullopt);

struct CoverageStats {
    int samples = 0;
    int interior = 0;
    int successes = 0;  ///< interior, in V and residual below threshold
    int v_members = 0;  ///< interior samples in V
    int boundary_candidates = 0;
    int boundary_sign_failures = 0;
    double max_residual = 0.0;  ///< over interior samples
    double threshold = 0.0;
    [[nodiscard]] double success_fraction() const { return samples ? static_cast<double>(successes) / samples : 0.0; }
};

struct CoverageSweep {
    CoverageStats stats;
    std::vector<CoverageSample> samples;
};

/// xi uniform in the unit (n+m)-ball; threshold defaults to 10 h^2.
[[nodiscard]] CoverageSweep coverage_sweep(const AbpProblem& problem, const AbpSolution& sol, int count,
                                           std::uint64_t seed, std::optional<double> threshold = std::nullopt,
                                           std::optional<double> eps_psd = std::nullopt,
                                           int workers = default_workers());

struct VolumeBound {
    double lhs = 0.0;  ///< (n+m)|B^{n+m}|
    double rhs = 0.0;  ///< m|B^m| integral det_power
    bool holds = false;
    double tolerance = 0.0;  ///< relative
    double sigma = 0.5;
    double annulus_volume = 0.0;    ///< |B^{n+m}|(1 - sigma^{n+m})
    double fiber_integral = 0.0;    ///< integral over Omega of det_power * fiber annulus volume
    double fiber_bound = 0.0;       ///< (m/2)|B^m|(1 - sigma^2) integral over Omega of det_power
    bool chain_holds = false;       ///< annulus_volume <= fiber_integral <= fiber_bound

    [[nodiscard]] double slack() const { return (rhs - lhs) / lhs; }
};

[[nodiscard]] VolumeBound volume_bound_check(const AbpProblem& problem, const AbpSolution& sol, double tol,
                                             double sigma = 0.5);

struct Rigidity {
    double sup_II = 0.0;                    ///< max over nodes and unit normals of the nuclear norm of the shape operator
    double sup_divA = 0.0;
    double cofactor_residual = 0.0;         ///< max |A - cof D^2 u| in an orthonormal frame
    double boundary_grad_deficit = 0.0;     ///< max over boundary of |1 - |grad u||
    double gradient_image_hausdorff = 0.0;  ///< sampled distance between grad u(grid) and the closed unit n-ball
};

[[nodiscard]] Rigidity rigidity_diagnostics(const AbpProblem& problem, const AbpSolution& sol);

/// Multipliers of the mesh quantities used by the pass/fail predicates.
struct AbpTolerances {
    double coverage_fraction = 0.99;
    double coverage_residual = 10.0;  ///< times h^2
    double bound = 10.0;              ///< times eps_mesh
    double jacobian = 10.0;           ///< times h
    double volume = 1.0;              ///< times eps_mesh
};

struct AbpRunOptions {
    int coverage_samples = 1000;
    int v_samples = 10000;
    int jacobian_samples = 100;
    double sigma = 0.5;
    std::uint64_t seed = 0;
    std::optional<double> eps_psd;
    SolverOptions solver;
    AbpTolerances tolerances;
    int workers = default_workers();
};

struct JacobianAgreement {
    int samples = 0;
    double max_difference = 0.0;
    double tolerance = 0.0;  ///< 10 h
    [[nodiscard]] bool passed() const { return max_difference <= tolerance; }
};

struct JacobianRecord {
    TransportPoint point;
    double analytic = 0.0;
    double bound = 0.0;  ///< det_power at the base node
};

/// Solve plus every check at one resolution. eps_mesh is the largest of the
/// Richardson estimates of the ratio, of det D^2 u at the nodes and of the
/// fiber integral, all against coarse_resolution(resolution).
struct AbpReport {
    std::string scenario;
    int resolution = 0;
    double mesh_size = 0.0;
    double lambda = 1.0;
    double compatibility = 0.0;
    double eps_ratio = 0.0;
    double eps_jacobian = 0.0;
    double eps_mesh = 0.0;
    double algebraic_residual = 0.0;
    double interior_residual = 0.0;
    double boundary_residual = 0.0;
    std::string method;
    CoverageSweep coverage;
    JacobianBound bound;
    JacobianAgreement agreement;
    VolumeBound volume;
    Rigidity rigidity;
    std::vector<JacobianRecord> v_samples;
    long long v_attempts = 0;
    double min_coverage = 0.99;

    [[nodiscard]] bool coverage_passed() const { return coverage.stats.success_fraction() >= min_coverage
                                                        && coverage.stats.boundary_sign_failures == 0; }
    [[nodiscard]] bool bound_passed() const { return bound.violations == 0 && bound.checked > 0; }
    [[nodiscard]] bool volume_passed() const { return volume.holds && volume.chain_holds; }
    [[nodiscard]] bool passed() const { return coverage_passed() && bound_passed() && agreement.passed() && volume_passed(); }
};

[[nodiscard]] AbpReport run_abp(const Scenario& scenario, int resolution, const AbpRunOptions& options = {});

}  // namespace msineq

#endif  // MSINEQ_ABP_HPP
