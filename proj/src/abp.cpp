#include "msineq/abp.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "msineq/error.hpp"
#include "msineq/linalg.hpp"
#include "msineq/random.hpp"

namespace msineq {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

std::size_t at(int i) { return static_cast<std::size_t>(i); }

/// Volume measure of each node: parameter weight times sqrt(det g).
std::vector<double> nodal_measure(const Patch& patch)
{
    const auto& w = patch.chart.grid().weights();
    std::vector<double> c(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) c[i] = w[i] * patch.metric.sqrt_det_g[i];
    return c;
}

/// Flux tensor sqrt(g) g^{-1} A g^{-1} per node.
std::vector<Mat> flux_tensors(const Patch& patch, const TensorField& a)
{
    const MetricData& md = patch.metric;
    std::vector<Mat> k(at(md.size()));
    for (int i = 0; i < md.size(); ++i) {
        const Mat& gi = md.g_inv[at(i)];
        k[at(i)] = md.sqrt_det_g[at(i)] * gi * a(i) * gi;
    }
    return k;
}

/// Shape values and reference gradients at the 2^n Gauss points.
struct GaussRule {
    int points = 0;
    std::vector<double> phi;    ///< q * V + v
    std::vector<double> dphi;   ///< (q * V + v) * n + a, derivative in the reference coordinate
    double weight = 0.0;        ///< reference weight per point

    GaussRule(int n, int vertices) : points(vertices)
    {
        const double off = 0.5 / std::sqrt(3.0);
        phi.resize(at(points * vertices));
        dphi.resize(at(points * vertices * n));
        weight = std::pow(0.5, n);
        for (int q = 0; q < points; ++q) {
            std::array<double, kMaxIntrinsic> xi{};
            for (int a = 0; a < n; ++a) xi[at(a)] = (q >> a & 1) ? 0.5 + off : 0.5 - off;
            for (int v = 0; v < vertices; ++v) {
                double value = 1.0;
                for (int a = 0; a < n; ++a) value *= (v >> a & 1) ? xi[at(a)] : 1.0 - xi[at(a)];
                phi[at(q * vertices + v)] = value;
                for (int a = 0; a < n; ++a) {
                    double d = (v >> a & 1) ? 1.0 : -1.0;
                    for (int b = 0; b < n; ++b)
                        if (b != a) d *= (v >> b & 1) ? xi[at(b)] : 1.0 - xi[at(b)];
                    dphi[at((q * vertices + v) * n + a)] = d;
                }
            }
        }
    }
};

Vec parameter_point(const Grid& grid, int node)
{
    const auto idx = grid.multi_index(node);
    Vec p(grid.dim());
    for (int a = 0; a < grid.dim(); ++a) p(a) = grid.axis(a).coord(idx[at(a)]);
    return p;
}

/// Metric at a parameter point: g and sqrt(det g).
struct PointMetric {
    Mat lower;  ///< Cholesky factor of g
    double sqrt_det = 0.0;
};

PointMetric point_metric(const Chart& chart, std::span<const double> p)
{
    const PointGeometry geo = chart.evaluate(p);
    const Mat g = geo.tangents.transpose() * geo.tangents;
    const Eigen::LLT<Mat> llt(g);
    PointMetric pm;
    pm.lower = llt.matrixL();
    pm.sqrt_det = pm.lower.diagonal().prod();
    return pm;
}

/// One multilinear element in parameter space. Vertices index unknowns;
/// on cap cells the vertices at the degenerate end all map to the pole.
struct Cell {
    std::array<int, 16> verts{};
    std::array<int, 16> source{};  ///< grid node whose field values the vertex uses
    std::array<double, kMaxIntrinsic> origin{};
    std::array<double, kMaxIntrinsic> size{};
};

/// Extra unknown closing a degenerate end of the first axis.
struct Pole {
    int ring = 0;        ///< node ring next to the pole
    double coord = 0.0;  ///< parameter value of the degenerate end
    int unknown = 0;
};

struct Mesh {
    std::vector<Cell> cells;
    std::vector<Pole> poles;
    int unknowns = 0;
};


bool has_caps(const Grid& grid)
{
    for (int a = 0; a < grid.dim(); ++a) {
        const Axis& ax = grid.axis(a);
        if (!ax.periodic && (ax.low == AxisEnd::Cap || ax.high == AxisEnd::Cap)) return true;
    }
    return false;
}

Mesh build_mesh(const Grid& grid)
{
    const int n = grid.dim();
    Mesh mesh;
    mesh.unknowns = grid.size();

    std::array<int, kMaxIntrinsic> cells{};
    int total = 1;
    for (int a = 0; a < n; ++a) {
        const Axis& ax = grid.axis(a);
        cells[at(a)] = ax.periodic ? ax.count : ax.count - 1;
        total *= cells[at(a)];
    }
    mesh.cells.reserve(at(total));
    for (int c = 0; c < total; ++c) {
        std::array<int, kMaxIntrinsic> base{};
        int rest = c;
        for (int a = n - 1; a >= 0; --a) {
            base[at(a)] = rest % cells[at(a)];
            rest /= cells[at(a)];
        }
        Cell cell;
        for (int a = 0; a < n; ++a) {
            cell.origin[at(a)] = grid.axis(a).coord(base[at(a)]);
            cell.size[at(a)] = grid.axis(a).spacing();
        }
        for (int v = 0; v < (1 << n); ++v) {
            std::array<int, kMaxIntrinsic> idx = base;
            for (int a = 0; a < n; ++a) {
                if (v >> a & 1) idx[at(a)] += 1;
                if (idx[at(a)] == grid.axis(a).count) idx[at(a)] = 0;
            }
            cell.verts[at(v)] = cell.source[at(v)] = grid.node(idx);
        }
        mesh.cells.push_back(cell);
    }

    if (!has_caps(grid)) return mesh;
    const Axis& radial = grid.axis(0);
    if (n != 2 || !grid.axis(1).periodic || radial.periodic)
        throw std::invalid_argument("solve_neumann: caps are supported on the first axis of a polar 2D chart only");
    const Axis& angular = grid.axis(1);
    for (int side = 0; side < 2; ++side) {
        if ((side == 0 ? radial.low : radial.high) != AxisEnd::Cap) continue;
        Pole pole;
        pole.ring = side == 0 ? 0 : radial.count - 1;
        pole.coord = side == 0 ? radial.lo : radial.hi;
        pole.unknown = mesh.unknowns++;
        const double ring_coord = radial.coord(pole.ring);
        for (int k = 0; k < angular.count; ++k) {
            Cell cell;
            cell.origin = {std::min(pole.coord, ring_coord), angular.coord(k)};
            cell.size = {std::abs(ring_coord - pole.coord), angular.spacing()};
            for (int v = 0; v < 4; ++v) {
                const int node = grid.node({pole.ring, (k + (v >> 1 & 1)) % angular.count});
                const bool at_pole = (v & 1) == side;
                cell.source[at(v)] = node;
                cell.verts[at(v)] = at_pole ? pole.unknown : node;
            }
            mesh.cells.push_back(cell);
        }
        mesh.poles.push_back(pole);
    }
    return mesh;
}

/// Integral of sqrt(det g) over a parameter box, 2-point Gauss per axis.
double box_volume(const Chart& chart, std::span<const double> lo, std::span<const double> hi)
{
    const int n = chart.intrinsic_dim();
    const double off = 0.5 / std::sqrt(3.0);
    double acc = 0.0;
    for (int q = 0; q < (1 << n); ++q) {
        std::array<double, kMaxIntrinsic> p{};
        double w = 1.0;
        for (int a = 0; a < n; ++a) {
            const double t = (q >> a & 1) ? 0.5 + off : 0.5 - off;
            p[at(a)] = lo[at(a)] + t * (hi[at(a)] - lo[at(a)]);
            w *= 0.5 * (hi[at(a)] - lo[at(a)]);
        }
        acc += w * point_metric(chart, std::span<const double>(p.data(), at(n))).sqrt_det;
    }
    return acc;
}

/// Volume of each unknown's dual cell: boxes bounded by the midpoints between
/// neighbouring unknowns (poles included), clipped to the chart.
std::vector<double> dual_volumes(const Chart& chart, const Mesh& mesh)
{
    const Grid& grid = chart.grid();
    const int n = grid.dim();
    std::vector<double> vol(at(mesh.unknowns));
    for (int node = 0; node < grid.size(); ++node) {
        const auto idx = grid.multi_index(node);
        std::array<double, kMaxIntrinsic> lo{};
        std::array<double, kMaxIntrinsic> hi{};
        for (int a = 0; a < n; ++a) {
            const Axis& ax = grid.axis(a);
            const double x = ax.coord(idx[at(a)]);
            const double h = ax.spacing();
            lo[at(a)] = x - 0.5 * h;
            hi[at(a)] = x + 0.5 * h;
            if (!ax.periodic) {
                if (idx[at(a)] == 0) lo[at(a)] = ax.low == AxisEnd::Cap ? 0.5 * (ax.lo + x) : x;
                if (idx[at(a)] == ax.count - 1) hi[at(a)] = ax.high == AxisEnd::Cap ? 0.5 * (ax.hi + x) : x;
            }
        }
        vol[at(node)] = box_volume(chart, std::span<const double>(lo.data(), at(n)), std::span<const double>(hi.data(), at(n)));
    }
    for (const Pole& pole : mesh.poles) {
        const Axis& angular = grid.axis(1);
        const double mid = 0.5 * (pole.coord + grid.axis(0).coord(pole.ring));
        double acc = 0.0;
        for (int k = 0; k < angular.count; ++k) {
            const double phi = angular.coord(k) - 0.5 * angular.spacing();
            const std::array<double, 2> lo{std::min(pole.coord, mid), phi};
            const std::array<double, 2> hi{std::max(pole.coord, mid), phi + angular.spacing()};
            acc += box_volume(chart, lo, hi);
        }
        vol[at(pole.unknown)] = acc;
    }
    return vol;
}

SpMat assemble_system(const Patch& patch, const TensorField& a, const Mesh& mesh, const std::vector<double>& measure,
                      int workers)
{
    const Grid& grid = patch.chart.grid();
    const int n = grid.dim();
    const int nv = 1 << n;
    const GaussRule rule(n, nv);
    const double off = 0.5 / std::sqrt(3.0);
    // A in the orthonormal frame of the Cholesky factor of g: smooth even
    // where the chart degenerates, so it interpolates well.
    std::vector<Mat> frame_a(at(grid.size()));
    for (int i = 0; i < grid.size(); ++i) frame_a[at(i)] = orthonormalize(a(i), patch.metric.g[at(i)]);

    // Element matrices are computed concurrently into fixed slots and
    // scattered serially, so the sum order never depends on the schedule.
    const int total = static_cast<int>(mesh.cells.size());
    std::vector<double> local(at(total) * at(nv * nv));
    parallel_for(total, workers, [&](int begin, int end) {
        for (int c = begin; c < end; ++c) {
            const Cell& cell = mesh.cells[at(c)];
            double* e = local.data() + at(c) * at(nv * nv);
            double volume = 1.0;
            for (int d = 0; d < n; ++d) volume *= cell.size[at(d)];
            for (int q = 0; q < rule.points; ++q) {
                Mat aq = Mat::Zero(n, n);
                for (int v = 0; v < nv; ++v) aq += rule.phi[at(q * nv + v)] * frame_a[at(cell.source[at(v)])];
                std::array<double, kMaxIntrinsic> p{};
                for (int d = 0; d < n; ++d)
                    p[at(d)] = cell.origin[at(d)] + cell.size[at(d)] * ((q >> d & 1) ? 0.5 + off : 0.5 - off);
                const PointMetric pm = point_metric(patch.chart, std::span<const double>(p.data(), at(n)));
                const Mat linv = pm.lower.triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
                const Mat kq = pm.sqrt_det * linv.transpose() * aq * linv;
                Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxIntrinsic, 16> grads(n, nv);
                for (int v = 0; v < nv; ++v)
                    for (int d = 0; d < n; ++d) grads(d, v) = rule.dphi[at((q * nv + v) * n + d)] / cell.size[at(d)];
                const double w = rule.weight * volume;
                for (int v = 0; v < nv; ++v) {
                    const Vec kg = kq * grads.col(v);
                    for (int u = 0; u < nv; ++u) e[v * nv + u] += w * grads.col(u).dot(kg);
                }
            }
        }
    });

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(local.size() + 2 * at(mesh.unknowns));
    for (int c = 0; c < total; ++c) {
        const Cell& cell = mesh.cells[at(c)];
        const double* e = local.data() + at(c) * at(nv * nv);
        for (int v = 0; v < nv; ++v)
            for (int u = 0; u < nv; ++u) triplets.emplace_back(cell.verts[at(v)], cell.verts[at(u)], e[v * nv + u]);
    }
    const int lagrange = mesh.unknowns;
    for (int i = 0; i < grid.size(); ++i) {
        triplets.emplace_back(i, lagrange, measure[at(i)]);
        triplets.emplace_back(lagrange, i, measure[at(i)]);
    }
    SpMat m(lagrange + 1, lagrange + 1);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

Eigen::VectorXd solve_iterative(const SpMat& m, const Eigen::VectorXd& rhs, Eigen::VectorXd x,
                                const SolverOptions& options, std::vector<double>& history)
{
    Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> solver;
    solver.preconditioner().setDroptol(1e-6);
    solver.preconditioner().setFillfactor(20);
    solver.compute(m);
    if (solver.info() != Eigen::Success) throw SolverError("preconditioner setup failed", history);
    solver.setTolerance(options.tolerance);
    constexpr int kChunk = 50;
    solver.setMaxIterations(kChunk);
    int used = 0;
    while (used < options.max_iterations) {
        x = solver.solveWithGuess(rhs, x);
        used += static_cast<int>(solver.iterations());
        history.push_back(solver.error());
        if (solver.info() == Eigen::Success && solver.error() <= options.tolerance) return x;
        if (solver.iterations() == 0) break;
    }
    throw SolverError("BiCGSTAB did not reach relative residual " + std::to_string(options.tolerance), history);
}

double relative_residual(const SpMat& m, const Eigen::VectorXd& x, const Eigen::VectorXd& rhs)
{
    const double scale = std::max(rhs.norm(), 1e-300);
    return (m * x - rhs).norm() / scale;
}

Mat hessian_matrix(const AbpProblem& problem, const AbpSolution& sol, int node, const Vec& y)
{
    Mat h = sol.hess[at(node)];
    for (int alpha = 0; alpha < y.size(); ++alpha) h -= y(alpha) * problem.patch.second_form.component(node, alpha);
    return (h + h.transpose()) / 2.0;
}

double max_abs_eigenvalue(const Mat& m)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Uniform point in the unit d-ball from the counter generator.
Eigen::VectorXd ball_point(const CounterRng& rng, std::uint64_t index, int d, std::uint64_t lane0)
{
    Eigen::VectorXd v(d);
    for (int k = 0; k < d; ++k) v(k) = rng.normal(index, lane0 + static_cast<std::uint64_t>(k));
    const double norm = v.norm();
    if (norm == 0.0) return Eigen::VectorXd::Zero(d);
    const double r = std::pow(rng.uniform(index, lane0 + 977), 1.0 / d);
    return v * (r / norm);
}


/// Keeps p inside the chart, stopping just short of degenerate ends, and
/// wraps periodic axes.
void clamp_to_chart(const Grid& grid, Vec& p)
{
    for (int a = 0; a < grid.dim(); ++a) {
        const Axis& ax = grid.axis(a);
        if (ax.periodic) {
            const double len = ax.hi - ax.lo;
            p(a) = ax.lo + std::fmod(std::fmod(p(a) - ax.lo, len) + len, len);
            continue;
        }
        const double margin = 1e-6 * ax.spacing();
        const double lo = ax.low == AxisEnd::Cap ? ax.lo + margin : ax.coord(0);
        const double hi = ax.high == AxisEnd::Cap ? ax.hi - margin : ax.coord(ax.count - 1);
        p(a) = std::clamp(p(a), lo, hi);
    }
}

/// Multilinear interpolation of an ambient vector field that also covers the
/// cap regions, blending radially towards the ring average at the pole.
AmbientVec interpolate_ambient(const Grid& grid, const std::vector<AmbientVec>& field, const Vec& p)
{
    const std::span<const double> ps(p.data(), at(static_cast<int>(p.size())));
    if (!has_caps(grid)) return interpolate(grid, field, ps);
    const Axis& radial = grid.axis(0);
    const Axis& angular = grid.axis(1);
    const double first = radial.coord(0);
    const double last = radial.coord(radial.count - 1);
    int ring = -1;
    double pole = 0.0;
    if (radial.low == AxisEnd::Cap && p(0) < first) {
        ring = 0;
        pole = radial.lo;
    } else if (radial.high == AxisEnd::Cap && p(0) > last) {
        ring = radial.count - 1;
        pole = radial.hi;
    }
    if (ring < 0) return interpolate(grid, field, ps);
    AmbientVec centre = AmbientVec::Zero(field.front().size());
    for (int k = 0; k < angular.count; ++k) centre += field[at(grid.node({ring, k}))];
    centre /= angular.count;
    const std::array<double, 2> on_ring{radial.coord(ring), p(1)};
    const AmbientVec rim = interpolate(grid, field, on_ring);
    const double t = (p(0) - pole) / (radial.coord(ring) - pole);
    return (1.0 - t) * centre + t * rim;
}

/// Eligible base nodes (|grad u| < 1) with cumulative measure.
struct BaseSampler {
    std::vector<int> nodes;
    std::vector<double> cumulative;

    BaseSampler(const AbpProblem& problem, const AbpSolution& sol)
    {
        const std::vector<double> c = nodal_measure(problem.patch);
        double acc = 0.0;
        for (int i = 0; i < problem.patch.metric.size(); ++i) {
            if (sol.grad_ambient[at(i)].squaredNorm() >= 1.0 || c[at(i)] <= 0.0) continue;
            acc += c[at(i)];
            nodes.push_back(i);
            cumulative.push_back(acc);
        }
    }

    [[nodiscard]] int draw(double u) const
    {
        const double target = u * cumulative.back();
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
        return nodes[std::min(at(static_cast<int>(it - cumulative.begin())), nodes.size() - 1)];
    }
};

std::optional<TransportPoint> draw_fiber_point(const AbpProblem& problem, const AbpSolution& sol,
                                               const BaseSampler& base, const CounterRng& rng, std::uint64_t index,
                                               std::optional<double> eps_psd)
{
    const int node = base.draw(rng.uniform(index, 0));
    const double radius = std::sqrt(std::max(0.0, 1.0 - sol.grad_ambient[at(node)].squaredNorm()));
    const Eigen::VectorXd dir = ball_point(rng, index, problem.m(), 10);
    Vec y = radius * dir;
    TransportPoint p = make_transport_point(problem, sol, node, y, eps_psd);
    if (!p.in_U) return std::nullopt;
    return p;
}

constexpr std::uint64_t kStreamV = 1;
constexpr std::uint64_t kStreamU = 2;
constexpr std::uint64_t kStreamCoverage = 3;

}  // namespace

NeumannSolution solve_neumann(const Patch& patch, const TensorField& a, std::span<const double> source,
                              std::span<const double> flux, const SolverOptions& options)
{
    const int size = patch.metric.size();
    if (static_cast<int>(source.size()) != size || flux.size() != patch.boundary.size() || a.size() != size)
        throw std::invalid_argument("solve_neumann: data do not match the patch");

    const std::vector<double> c = nodal_measure(patch);
    const Mesh mesh = build_mesh(patch.chart.grid());
    const int unknowns = mesh.unknowns + 1;
    const std::vector<double> dual = dual_volumes(patch.chart, mesh);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns);
    for (const Pole& pole : mesh.poles) {
        const Axis& angular = patch.chart.grid().axis(1);
        double mean_source = 0.0;
        for (int k = 0; k < angular.count; ++k) mean_source += source[at(patch.chart.grid().node({pole.ring, k}))];
        rhs(pole.unknown) = -dual[at(pole.unknown)] * mean_source / angular.count;
    }
    double interior = 0.0;
    double boundary = 0.0;
    double scale = 0.0;
    for (int i = 0; i < size; ++i) {
        rhs(i) = -dual[at(i)] * source[at(i)];
        interior += c[at(i)] * source[at(i)];
        scale += c[at(i)] * (std::abs(source[at(i)]) + 1.0);
    }
    for (std::size_t k = 0; k < patch.boundary.size(); ++k) {
        const BoundarySample& b = patch.boundary[k];
        rhs(b.node) += b.weight * flux[k];
        boundary += b.weight * flux[k];
        scale += b.weight * std::abs(flux[k]);
    }
    const double mismatch = std::abs(interior - boundary) / scale;
    if (mismatch > options.compatibility_tolerance)
        throw CompatibilityError("Neumann data incompatible: relative mismatch " + std::to_string(mismatch));

    const SpMat m = assemble_system(patch, a, mesh, c, options.workers);

    NeumannSolution out;
    Eigen::VectorXd x;
    bool solved = false;
    if (!options.force_iterative) {
        Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(m);
        if (lu.info() == Eigen::Success) {
            x = lu.solve(rhs);
            const double r = relative_residual(m, x, rhs);
            out.residual_history.push_back(r);
            if (lu.info() == Eigen::Success && r <= options.tolerance) {
                solved = true;
                out.method = "SparseLU";
            }
        }
    }
    if (!solved) {
        Eigen::VectorXd guess = Eigen::VectorXd::Zero(unknowns);
        if (static_cast<int>(options.initial_guess.size()) == size)
            for (int i = 0; i < size; ++i) guess(i) = options.initial_guess[at(i)];
        x = solve_iterative(m, rhs, guess, options, out.residual_history);
        out.method = "BiCGSTAB";
    }
    out.algebraic_residual = relative_residual(m, x, rhs);

    double mean = 0.0;
    double total = 0.0;
    for (int i = 0; i < size; ++i) {
        mean += c[at(i)] * x(i);
        total += c[at(i)];
    }
    mean /= total;
    out.u.resize(at(size));
    for (int i = 0; i < size; ++i) out.u[at(i)] = x(i) - mean;
    return out;
}

AbpProblem make_abp_problem(const Patch& patch, const TensorField& a)
{
    const int n = patch.chart.intrinsic_dim();
    const int m = patch.chart.codimension();
    if (m < 2) throw ConfigError("codimension", "the ABP construction needs codimension >= 2 (lift first)");

    Discretization disc{n, m, patch.chart.resolution(), {patch}, {a}};
    const Theorem theorem = m == 2 ? Theorem::SharpCodim2 : Theorem::GeneralCodim;
    const SobolevReport raw = functionals(disc, theorem);
    auto [normalized, lambda] = normalize_scaling(a, raw, patch.metric);

    AbpProblem p;
    p.patch = patch;
    p.a = std::move(normalized);
    p.lambda = lambda;
    disc.fields = {p.a};
    p.report = functionals(disc, theorem);

    const std::vector<double> det = tensor_det(p.a, patch.metric);
    const CovectorField div = divergence(p.a, patch.metric);
    const NormalField h = contract_with_second_form(p.a, patch.second_form, patch.metric);
    p.det_power.resize(det.size());
    p.source.resize(det.size());
    for (int i = 0; i < patch.metric.size(); ++i) {
        const double d = div.norm(patch.metric, i);
        const double c = h.norm(i);
        p.det_power[at(i)] = std::pow(det[at(i)], 1.0 / (n - 1));
        p.source[at(i)] = n * p.det_power[at(i)] - std::sqrt(d * d + c * c);
    }
    p.flux.reserve(patch.boundary.size());
    for (const BoundarySample& b : patch.boundary) p.flux.push_back(conormal_flux_norm(p.a, b, patch.metric));

    const double interior = integrate(patch.chart, patch.metric, p.source);
    double boundary = 0.0;
    for (std::size_t k = 0; k < patch.boundary.size(); ++k) boundary += patch.boundary[k].weight * p.flux[k];
    p.compatibility = std::abs(interior - boundary) / (n * integrate(patch.chart, patch.metric, p.det_power));
    return p;
}

AbpProblem make_abp_problem(const Scenario& scenario, int resolution)
{
    if (scenario.pieces.size() != 1)
        throw ConfigError("pieces", "the ABP pipeline needs a connected submanifold (exactly one chart)");
    const Discretization disc = discretize(scenario, resolution);
    return make_abp_problem(disc.patches.front(), disc.fields.front());
}

AbpSolution derive_solution(const AbpProblem& problem, std::vector<double> u)
{
    const Patch& patch = problem.patch;
    const MetricData& md = patch.metric;
    const Grid& grid = patch.chart.grid();
    const int n = problem.n();
    const int size = md.size();

    AbpSolution sol;
    const ScalarSamples d = differentiate_nodal(grid, u);
    sol.u = std::move(u);
    sol.du = d.grad;
    sol.grad.resize(at(size));
    sol.grad_ambient.resize(at(size));
    sol.hess.resize(at(size));
    for (int i = 0; i < size; ++i) {
        sol.grad[at(i)] = md.g_inv[at(i)] * d.grad[at(i)];
        sol.grad_ambient[at(i)] = md.tangents[at(i)] * sol.grad[at(i)];
        sol.hess[at(i)] = covariant_hessian(md, i, d.grad[at(i)], d.hess[at(i)]);
    }
    sol.mean = integrate(patch.chart, md, sol.u);

    const std::vector<Mat> k = flux_tensors(patch, problem.a);
    std::vector<std::vector<double>> q(at(n), std::vector<double>(at(size)));
    for (int i = 0; i < size; ++i) {
        const Vec f = k[at(i)] * d.grad[at(i)];
        for (int a = 0; a < n; ++a) q[at(a)][at(i)] = f(a);
    }
    double acc = 0.0;
    double total = 0.0;
    const auto& w = grid.weights();
    for (int i = 0; i < size; ++i) {
        if (grid.on_boundary(i)) continue;
        double div = 0.0;
        for (int a = 0; a < n; ++a) div += grid.d1(q[at(a)], i, a);
        const double r = div / md.sqrt_det_g[at(i)] - problem.source[at(i)];
        const double c = w[at(i)] * md.sqrt_det_g[at(i)];
        acc += c * r * r;
        total += c;
    }
    sol.interior_residual = total > 0.0 ? std::sqrt(acc / total) : 0.0;

    for (std::size_t s = 0; s < patch.boundary.size(); ++s) {
        const BoundarySample& b = patch.boundary[s];
        const double flux = b.conormal.dot(problem.a(b.node) * sol.grad[at(b.node)]);
        sol.boundary_residual = std::max(sol.boundary_residual, std::abs(flux - problem.flux[s]));
    }
    return sol;
}

AbpSolution assemble_and_solve(const AbpProblem& problem, const SolverOptions& options)
{
    if (problem.compatibility > options.compatibility_tolerance)
        throw CompatibilityError("normalized data incompatible: relative mismatch "
                                 + std::to_string(problem.compatibility));
    NeumannSolution ns = solve_neumann(problem.patch, problem.a, problem.source, problem.flux, options);
    AbpSolution sol = derive_solution(problem, std::move(ns.u));
    sol.algebraic_residual = ns.algebraic_residual;
    sol.residual_history = std::move(ns.residual_history);
    sol.method = std::move(ns.method);
    return sol;
}

double default_eps_psd(double mesh_size, const Mat& orthonormal_matrix)
{
    return 10.0 * mesh_size * mesh_size * (1.0 + max_abs_eigenvalue(orthonormal_matrix));
}

Mat abp_matrix(const AbpProblem& problem, const AbpSolution& sol, int node, const Vec& y)
{
    return hessian_matrix(problem, sol, node, y);
}

TransportPoint make_transport_point(const AbpProblem& problem, const AbpSolution& sol, int node, const Vec& y,
                                    std::optional<double> eps_psd)
{
    if (y.size() != problem.m()) throw std::invalid_argument("make_transport_point: fiber coordinates have wrong size");
    TransportPoint p;
    p.node = node;
    p.y = y;
    p.in_U = sol.grad_ambient[at(node)].squaredNorm() + y.squaredNorm() < 1.0;
    const Mat h = orthonormalize(hessian_matrix(problem, sol, node, y), problem.patch.metric.g[at(node)]);
    p.psd_min = min_eigenvalue(h);
    p.eps_psd = eps_psd ? *eps_psd : default_eps_psd(problem.mesh_size(), h);
    p.in_V = p.in_U && p.psd_min >= -p.eps_psd;
    return p;
}

AmbientVec transport_map(const AbpProblem& problem, const AbpSolution& sol, const TransportPoint& p)
{
    return sol.grad_ambient[at(p.node)] + problem.patch.frame.basis[at(p.node)] * p.y;
}

double jacobian_determinant(const AbpProblem& problem, const AbpSolution& sol, const TransportPoint& p)
{
    return det(orthonormalize(hessian_matrix(problem, sol, p.node, p.y), problem.patch.metric.g[at(p.node)]));
}

double fd_jacobian(const AbpProblem& problem, const AbpSolution& sol, const TransportPoint& p)
{
    const Patch& patch = problem.patch;
    const Grid& grid = patch.chart.grid();
    const int n = problem.n();
    const int m = problem.m();
    const AmbientFrame& centre = patch.frame.basis[at(p.node)];

    // Phi over a frame aligned to the centre node, which keeps the fiber
    // coordinates smooth across the stencil even where the stored frame is not.
    struct PhiField {
        using value_type = AmbientVec;
        const AbpSolution* sol;
        const NormalFrame* frame;
        const AmbientFrame* centre;
        const Vec* y;
        AmbientVec operator[](std::size_t j) const
        {
            const AmbientFrame& f = frame->basis[j];
            const Eigen::MatrixXd overlap = f.transpose() * *centre;
            const Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const Eigen::MatrixXd rot = svd.matrixU() * svd.matrixV().transpose();
            return sol->grad_ambient[j] + f * (rot * *y);
        }
    };
    const PhiField phi{&sol, &patch.frame, &centre, &p.y};

    const int big_n = n + m;
    Eigen::MatrixXd d(big_n, big_n);
    for (int a = 0; a < n; ++a) d.col(a) = grid.d1(phi, p.node, a);
    for (int alpha = 0; alpha < m; ++alpha) d.col(n + alpha) = centre.col(alpha);
    Eigen::MatrixXd basis(big_n, big_n);
    basis.leftCols(n) = patch.metric.tangents[at(p.node)];
    basis.rightCols(m) = centre;
    return d.determinant() / basis.determinant();
}

JacobianBound jacobian_bound_check(const AbpProblem& problem, const AbpSolution& sol,
                                   std::span<const TransportPoint> samples, double tol)
{
    JacobianBound out;
    out.tolerance = tol;
    out.max_excess = samples.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
    for (const TransportPoint& p : samples) {
        if (!p.in_V) throw std::invalid_argument("jacobian_bound_check: sample outside V");
        const double j = jacobian_determinant(problem, sol, p);
        const double excess = std::max(j - problem.det_power[at(p.node)], -j);
        out.max_excess = std::max(out.max_excess, excess);
        if (excess > tol) ++out.violations;
        ++out.checked;
    }
    return out;
}

VSampleSet sample_v_points(const AbpProblem& problem, const AbpSolution& sol, int count, std::uint64_t seed,
                           std::optional<double> eps_psd, int workers)
{
    VSampleSet out;
    if (count <= 0) return out;
    const BaseSampler base(problem, sol);
    if (base.nodes.empty()) return out;
    const CounterRng rng(seed, kStreamV);
    const long long limit = 50LL * count;
    const int batch = std::max(count, 1024);
    long long next = 0;
    while (static_cast<int>(out.points.size()) < count && next < limit) {
        std::vector<std::optional<TransportPoint>> drawn(at(batch));
        parallel_for(batch, workers, [&](int begin, int end) {
            for (int k = begin; k < end; ++k) {
                auto p = draw_fiber_point(problem, sol, base, rng, static_cast<std::uint64_t>(next + k), eps_psd);
                if (p && p->in_V) drawn[at(k)] = std::move(p);
            }
        });
        for (int k = 0; k < batch && static_cast<int>(out.points.size()) < count; ++k) {
            ++out.attempts;
            if (drawn[at(k)]) out.points.push_back(*drawn[at(k)]);
        }
        next += batch;
    }
    return out;
}

std::vector<TransportPoint> sample_u_points(const AbpProblem& problem, const AbpSolution& sol, int count,
                                            std::uint64_t seed)
{
    std::vector<TransportPoint> out;
    const BaseSampler base(problem, sol);
    if (base.nodes.empty()) return out;
    const CounterRng rng(seed, kStreamU);
    const Grid& grid = problem.patch.chart.grid();
    for (std::uint64_t k = 0; static_cast<int>(out.size()) < count && k < 100ULL * static_cast<std::uint64_t>(count);
         ++k) {
        auto p = draw_fiber_point(problem, sol, base, rng, k, std::nullopt);
        if (p && !grid.on_boundary(p->node)) out.push_back(*p);
    }
    return out;
}

CoverageSample coverage_oracle(const AbpProblem& problem, const AbpSolution& sol, const AmbientVec& xi,
                               std::optional<double> eps_psd)
{
    const Patch& patch = problem.patch;
    const MetricData& md = patch.metric;
    const Grid& grid = patch.chart.grid();
    const int n = problem.n();
    const int size = md.size();

    CoverageSample cs;
    cs.xi = xi;
    std::vector<double> omega(at(size));
    int best = 0;
    for (int i = 0; i < size; ++i) {
        omega[at(i)] = sol.u[at(i)] - md.positions[at(i)].dot(xi);
        if (omega[at(i)] < omega[at(best)]) best = i;
    }
    cs.node = best;
    cs.interior = !grid.on_boundary(best);

    if (!cs.interior) {
        double sign = std::numeric_limits<double>::infinity();
        for (const BoundarySample& b : patch.boundary) {
            if (b.node != best) continue;
            const Vec an = conormal_flux(problem.a, b, md);
            const AmbientVec an_ambient = md.tangents[at(best)] * an;
            sign = std::min(sign, conormal_flux_norm(problem.a, b, md) - xi.dot(an_ambient));
        }
        if (std::isfinite(sign)) cs.boundary_sign = sign;
    }

    // One Newton step on the local quadratic model, at most one cell per axis.
    Vec p = parameter_point(grid, best);
    Vec g(n);
    Mat h(n, n);
    for (int a = 0; a < n; ++a) {
        g(a) = grid.d1(omega, best, a);
        for (int b = 0; b < n; ++b) h(a, b) = grid.d2(omega, best, a, b);
    }
    h = (h + h.transpose()) / 2.0;
    if (min_eigenvalue(h) > 0.0) {
        Vec step = -h.ldlt().solve(g);
        for (int a = 0; a < n; ++a) {
            const double sp = grid.axis(a).spacing();
            step(a) = std::clamp(step(a), -sp, sp);
        }
        p += step;
    }
    clamp_to_chart(grid, p);
    cs.x0 = p;

    const std::span<const double> ps(p.data(), at(n));
    const PointGeometry geo = patch.chart.evaluate(ps);
    const Mat gp = geo.tangents.transpose() * geo.tangents;
    const AmbientVec tangential = geo.tangents * gp.ldlt().solve(geo.tangents.transpose() * xi);
    cs.y0 = xi - tangential;
    const AmbientVec grad = interpolate_ambient(grid, sol.grad_ambient, p);
    cs.phi = grad + cs.y0;
    cs.residual = (cs.phi - xi).norm();

    Mat abp = interpolate(grid, sol.hess, ps);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) abp(i, j) -= geo.second[at(i * n + j)].dot(cs.y0);
    abp = (abp + abp.transpose()) / 2.0;
    const Mat on = orthonormalize(abp, gp);
    cs.psd_min = min_eigenvalue(on);
    cs.eps_psd = eps_psd ? *eps_psd : default_eps_psd(problem.mesh_size(), on);
    cs.in_V = cs.psd_min >= -cs.eps_psd && grad.squaredNorm() + cs.y0.squaredNorm() < 1.0 + cs.eps_psd;
    return cs;
}

CoverageSweep coverage_sweep(const AbpProblem& problem, const AbpSolution& sol, int count, std::uint64_t seed,
                             std::optional<double> threshold, std::optional<double> eps_psd, int workers)
{
    CoverageSweep out;
    const double h = problem.mesh_size();
    out.stats.threshold = threshold ? *threshold : 10.0 * h * h;
    out.samples.resize(at(std::max(count, 0)));
    const CounterRng rng(seed, kStreamCoverage);
    const int big_n = problem.n() + problem.m();
    parallel_for(count, workers, [&](int begin, int end) {
        for (int k = begin; k < end; ++k) {
            const AmbientVec xi = ball_point(rng, static_cast<std::uint64_t>(k), big_n, 0);
            out.samples[at(k)] = coverage_oracle(problem, sol, xi, eps_psd);
        }
    });
    CoverageStats& st = out.stats;
    st.samples = count;
    for (const CoverageSample& cs : out.samples) {
        if (cs.boundary_sign) {
            ++st.boundary_candidates;
            if (!(*cs.boundary_sign > 0.0)) ++st.boundary_sign_failures;
        }
        if (!cs.interior) continue;
        ++st.interior;
        st.max_residual = std::max(st.max_residual, cs.residual);
        if (cs.in_V) ++st.v_members;
        if (cs.in_V && cs.residual < st.threshold) ++st.successes;
    }
    return out;
}

VolumeBound volume_bound_check(const AbpProblem& problem, const AbpSolution& sol, double tol, double sigma)
{
    if (!(sigma >= 0.0 && sigma < 1.0)) throw std::invalid_argument("volume_bound_check: sigma must lie in [0, 1)");
    const int n = problem.n();
    const int m = problem.m();
    const Patch& patch = problem.patch;
    const double ball_nm = unit_ball_volume(n + m);
    const double ball_m = unit_ball_volume(m);

    VolumeBound vb;
    vb.tolerance = tol;
    vb.sigma = sigma;
    vb.lhs = (n + m) * ball_nm;
    vb.rhs = m * ball_m * integrate(patch.chart, patch.metric, problem.det_power);
    vb.holds = vb.lhs <= vb.rhs + tol * vb.lhs;

    const double half_m = 0.5 * m;
    std::vector<double> fiber(problem.det_power.size());
    std::vector<double> omega(problem.det_power.size());
    for (std::size_t i = 0; i < fiber.size(); ++i) {
        const double t = sol.grad_ambient[i].squaredNorm();
        if (t >= 1.0) continue;
        const double outer = std::pow(1.0 - t, half_m);
        const double inner = t < sigma * sigma ? std::pow(sigma * sigma - t, half_m) : 0.0;
        fiber[i] = problem.det_power[i] * ball_m * (outer - inner);
        omega[i] = problem.det_power[i];
    }
    vb.annulus_volume = ball_nm * (1.0 - std::pow(sigma, n + m));
    vb.fiber_integral = integrate(patch.chart, patch.metric, fiber);
    vb.fiber_bound = half_m * ball_m * (1.0 - sigma * sigma) * integrate(patch.chart, patch.metric, omega);
    vb.chain_holds = vb.annulus_volume <= vb.fiber_integral + tol * vb.annulus_volume
                     && vb.fiber_integral <= vb.fiber_bound + tol * vb.fiber_bound;
    return vb;
}

Rigidity rigidity_diagnostics(const AbpProblem& problem, const AbpSolution& sol)
{
    const Patch& patch = problem.patch;
    const MetricData& md = patch.metric;
    const Grid& grid = patch.chart.grid();
    const int n = problem.n();
    const int m = problem.m();
    const int size = md.size();
    Rigidity r;

    // Unit normal directions: a fine circle for m = 2, a Fibonacci sphere for
    // m = 3, coordinate axes plus seeded Gaussian directions above.
    std::vector<Vec> dirs;
    if (m == 2) {
        constexpr int kAngles = 720;
        for (int k = 0; k < kAngles / 2; ++k) {
            const double t = std::numbers::pi * k / (kAngles / 2);
            Vec d(2);
            d << std::cos(t), std::sin(t);
            dirs.push_back(d);
        }
    } else if (m == 3) {
        constexpr int kPoints = 2000;
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < kPoints; ++k) {
            const double z = 1.0 - 2.0 * (k + 0.5) / kPoints;
            const double rad = std::sqrt(1.0 - z * z);
            Vec d(3);
            d << rad * std::cos(golden * k), rad * std::sin(golden * k), z;
            dirs.push_back(d);
        }
    } else {
        for (int a = 0; a < m; ++a) dirs.push_back(Vec::Unit(m, a));
        const CounterRng rng(0, 7);
        for (int k = 0; k < 4000; ++k) {
            Vec d(m);
            for (int a = 0; a < m; ++a) d(a) = rng.normal(static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(a));
            dirs.push_back(d.normalized());
        }
    }

    const CovectorField div = divergence(problem.a, md);
    for (int i = 0; i < size; ++i) {
        const Mat& g = md.g[at(i)];
        std::vector<Mat> comps;
        for (int alpha = 0; alpha < m; ++alpha) comps.push_back(orthonormalize(patch.second_form.component(i, alpha), g));
        for (const Vec& d : dirs) {
            Mat s = Mat::Zero(n, n);
            for (int alpha = 0; alpha < m; ++alpha) s += d(alpha) * comps[at(alpha)];
            Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
            r.sup_II = std::max(r.sup_II, es.eigenvalues().cwiseAbs().sum());
        }
        r.sup_divA = std::max(r.sup_divA, div.norm(md, i));
        const Mat a_on = orthonormalize(problem.a(i), g);
        const Mat h_on = orthonormalize(sol.hess[at(i)], g);
        r.cofactor_residual = std::max(r.cofactor_residual, (a_on - cofactor_matrix(h_on)).norm());
        r.gradient_image_hausdorff = std::max(r.gradient_image_hausdorff, sol.grad_ambient[at(i)].norm() - 1.0);
    }
    for (const BoundarySample& b : patch.boundary)
        r.boundary_grad_deficit = std::max(r.boundary_grad_deficit, std::abs(1.0 - sol.grad_ambient[at(b.node)].norm()));

    // Other direction: points of the closed unit ball in the tangent plane at
    // the central node, each located through the coverage oracle.
    std::array<int, kMaxIntrinsic> mid{};
    for (int a = 0; a < n; ++a) mid[at(a)] = grid.axis(a).count / 2;
    const int centre = grid.node(mid);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(md.tangents[at(centre)])};
    const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(n + m, n);
    std::vector<Eigen::VectorXd> dirs_t;
    if (n == 2) {
        for (int k = 0; k < 16; ++k) {
            const double t = 2.0 * std::numbers::pi * k / 16;
            dirs_t.push_back(Eigen::Vector2d(std::cos(t), std::sin(t)));
        }
    } else {
        for (int a = 0; a < n; ++a) {
            dirs_t.push_back(Eigen::VectorXd::Unit(n, a));
            dirs_t.push_back(-Eigen::VectorXd::Unit(n, a));
        }
        dirs_t.push_back(Eigen::VectorXd::Ones(n).normalized());
        dirs_t.push_back(-Eigen::VectorXd::Ones(n).normalized());
    }
    double far = 0.0;
    for (double radius : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        for (const Eigen::VectorXd& d : dirs_t) {
            const AmbientVec zeta = basis * (radius * d);
            const CoverageSample cs = coverage_oracle(problem, sol, zeta);
            far = std::max(far, (cs.phi - cs.y0 - zeta).norm());
            if (radius == 0.0) break;
        }
    }
    r.gradient_image_hausdorff = std::max(r.gradient_image_hausdorff, far);
    return r;
}

AbpReport run_abp(const Scenario& scenario, int resolution, const AbpRunOptions& options)
{
    AbpReport rep;
    rep.scenario = scenario.name;
    rep.resolution = resolution;

    const AbpProblem problem = make_abp_problem(scenario, resolution);
    SolverOptions solver = options.solver;
    solver.workers = options.workers;
    const AbpSolution sol = assemble_and_solve(problem, solver);
    rep.mesh_size = problem.mesh_size();
    rep.lambda = problem.lambda;
    rep.compatibility = problem.compatibility;
    rep.algebraic_residual = sol.algebraic_residual;
    rep.interior_residual = sol.interior_residual;
    rep.boundary_residual = sol.boundary_residual;
    rep.method = sol.method;

    // Mesh error budget from the coarse companion resolution.
    const int coarse = coarse_resolution(resolution);
    const AbpProblem cproblem = make_abp_problem(scenario, coarse);
    const AbpSolution csol = assemble_and_solve(cproblem, solver);
    const int order = quadrature_order(scenario.mode);
    const double hf = problem.mesh_size();
    const double hc = cproblem.mesh_size();
    const double ratio = problem.report.ratio;
    rep.eps_ratio = richardson_error(ratio, cproblem.report.ratio, hf, hc, order) / ratio;
    const Grid& grid = problem.patch.chart.grid();
    const Grid& cgrid = cproblem.patch.chart.grid();
    std::vector<double> cjac(at(cproblem.patch.metric.size()));
    for (int i = 0; i < cproblem.patch.metric.size(); ++i)
        cjac[at(i)] = det(orthonormalize(csol.hess[at(i)], cproblem.patch.metric.g[at(i)]));
    double jdiff = 0.0;
    for (int i = 0; i < problem.patch.metric.size(); ++i) {
        const Vec p = parameter_point(grid, i);
        const double jf = det(orthonormalize(sol.hess[at(i)], problem.patch.metric.g[at(i)]));
        const double jc = interpolate(cgrid, cjac, std::span<const double>(p.data(), at(p.size())));
        jdiff = std::max(jdiff, std::abs(jf - jc));
    }
    const double factor = std::pow(hc / hf, order) - 1.0;
    rep.eps_jacobian = jdiff / factor;
    const VolumeBound vf = volume_bound_check(problem, sol, 0.0, options.sigma);
    const VolumeBound vc = volume_bound_check(cproblem, csol, 0.0, options.sigma);
    const double eps_fiber = std::abs(vf.fiber_integral - vc.fiber_integral) / factor / vf.fiber_integral;
    rep.eps_mesh = std::max({rep.eps_ratio, rep.eps_jacobian, eps_fiber});

    const AbpTolerances& tol = options.tolerances;
    rep.min_coverage = tol.coverage_fraction;
    rep.coverage = coverage_sweep(problem, sol, options.coverage_samples, options.seed,
                                  tol.coverage_residual * hf * hf, options.eps_psd, options.workers);

    const VSampleSet vs = sample_v_points(problem, sol, options.v_samples, options.seed, options.eps_psd,
                                          options.workers);
    rep.v_attempts = vs.attempts;
    rep.bound = jacobian_bound_check(problem, sol, vs.points, tol.bound * rep.eps_mesh);
    rep.v_samples.reserve(vs.points.size());
    for (const TransportPoint& p : vs.points)
        rep.v_samples.push_back({p, jacobian_determinant(problem, sol, p), problem.det_power[at(p.node)]});

    rep.agreement.tolerance = tol.jacobian * rep.mesh_size;
    for (const TransportPoint& p : sample_u_points(problem, sol, options.jacobian_samples, options.seed)) {
        const double diff = std::abs(jacobian_determinant(problem, sol, p) - fd_jacobian(problem, sol, p));
        rep.agreement.max_difference = std::max(rep.agreement.max_difference, diff);
        ++rep.agreement.samples;
    }

    rep.volume = volume_bound_check(problem, sol, tol.volume * rep.eps_mesh, options.sigma);
    rep.rigidity = rigidity_diagnostics(problem, sol);
    return rep;
}

}  // namespace msineq
