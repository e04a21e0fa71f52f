#include "msineq/sobolev.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "msineq/charts.hpp"
#include "msineq/error.hpp"
#include "msineq/linalg.hpp"
#include "msineq/random.hpp"

namespace msineq {

namespace {

constexpr double kFlatTolerance = 1e-8;

double codim2_constant(int n) { return n * std::pow(unit_ball_volume(n), 1.0 / n); }

double piece_interior(const Patch& p, const TensorField& a)
{
    const CovectorField div = divergence(a, p.metric);
    const NormalField h = contract_with_second_form(a, p.second_form, p.metric);
    std::vector<double> integrand(static_cast<std::size_t>(p.metric.size()));
    for (int node = 0; node < p.metric.size(); ++node) {
        const double d = div.norm(p.metric, node);
        const double c = h.norm(node);
        integrand[static_cast<std::size_t>(node)] = std::sqrt(d * d + c * c);
    }
    return integrate(p.chart, p.metric, integrand);
}

double piece_boundary(const Patch& p, const TensorField& a)
{
    double acc = 0.0;
    for (const BoundarySample& b : p.boundary) acc += b.weight * conormal_flux_norm(a, b, p.metric);
    return acc;
}

double piece_rhs(const Patch& p, const TensorField& a)
{
    std::vector<double> integrand = tensor_det(a, p.metric);
    const double e = 1.0 / (p.metric.n - 1);
    for (double& v : integrand) v = std::pow(v, e);
    return integrate(p.chart, p.metric, integrand);
}

JetScalar half_square_norm()
{
    return [](std::span<const Jet> x) {
        Jet acc(0.0);
        for (const Jet& c : x) acc += c * c;
        return 0.5 * acc;
    };
}

FieldBuilder metric_field()
{
    return [](const Patch& p) { return fields::metric(p.chart, p.metric); };
}

AmbientMatrixFn conformal_plus_constant(std::vector<double> a, Eigen::MatrixXd s)
{
    return [a = std::move(a), s = std::move(s)](std::span<const Jet> x) {
        const auto big_n = static_cast<Eigen::Index>(x.size());
        Jet lin(0.0);
        for (std::size_t c = 0; c < std::min(a.size(), x.size()); ++c) lin += a[c] * x[c];
        const Jet f = exp(lin);
        std::vector<Jet> out;
        out.reserve(static_cast<std::size_t>(big_n * big_n));
        for (Eigen::Index r = 0; r < big_n; ++r)
            for (Eigen::Index c = 0; c < big_n; ++c) {
                const double sc = r < s.rows() && c < s.cols() ? s(r, c) : 0.0;
                out.push_back(r == c ? f + Jet(sc) : Jet(sc));
            }
        return out;
    };
}

}  // namespace

std::string to_string(Theorem t)
{
    switch (t) {
    case Theorem::GeneralCodim:
        return "general";
    case Theorem::SharpCodim2:
        return "codim2";
    case Theorem::Codim1Lift:
        return "codim1";
    }
    return "unknown";
}

Theorem theorem_from_string(const std::string& s)
{
    if (s == "general") return Theorem::GeneralCodim;
    if (s == "codim2") return Theorem::SharpCodim2;
    if (s == "codim1") return Theorem::Codim1Lift;
    throw ConfigError("theorem", "expected one of general, codim2, codim1 (got \"" + s + "\")");
}

double michael_simon_constant(int n, int m)
{
    if (n < 2) throw std::invalid_argument("michael_simon_constant: n must be at least 2");
    if (m < 2) throw std::invalid_argument("michael_simon_constant: m = 1 is handled by lifting to codimension 2");
    const double q = (n + m) * unit_ball_volume(n + m) / (m * unit_ball_volume(m));
    return n * std::pow(q, 1.0 / n);
}

double Discretization::mesh_size() const
{
    double h = 0.0;
    for (const Patch& p : patches) h = std::max(h, p.metric.mesh_size);
    return h;
}

void validate(const Scenario& scenario)
{
    if (scenario.pieces.empty()) throw ConfigError("pieces", "scenario has no charts");
    if (scenario.resolutions.empty()) throw ConfigError("resolutions", "at least one resolution is required");
    for (std::size_t i = 0; i < scenario.resolutions.size(); ++i) {
        if (scenario.resolutions[i] < 3) throw ConfigError("resolutions", "every resolution must be at least 3");
        if (i > 0 && scenario.resolutions[i] <= scenario.resolutions[i - 1])
            throw ConfigError("resolutions", "resolutions must be strictly increasing");
    }
    if (!(scenario.field_scale > 0.0)) throw ConfigError("field_scale", "must be positive");
    int n = -1;
    int m = -1;
    for (std::size_t i = 0; i < scenario.pieces.size(); ++i) {
        const ScenarioPiece& piece = scenario.pieces[i];
        const std::string where = "pieces[" + std::to_string(i) + "]";
        if (!piece.chart || !piece.field) throw ConfigError(where, "chart and field are required");
        Chart c;
        try {
            c = piece.chart(3, scenario.mode);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(where + ".chart", e.what());
        }
        if (n >= 0 && (c.intrinsic_dim() != n || c.codimension() != m))
            throw ConfigError(where, "all pieces must share intrinsic dimension and codimension");
        n = c.intrinsic_dim();
        m = c.codimension();
        if (scenario.theorem == Theorem::Codim1Lift && c.ambient_dim() + 1 > kMaxAmbient)
            throw ConfigError(where, "lifted ambient dimension exceeds 8");
    }
    if (n < 2) throw ConfigError("pieces", "intrinsic dimension must be at least 2");
    switch (scenario.theorem) {
    case Theorem::Codim1Lift:
        if (m != 1) throw ConfigError("theorem", "codim1 selector requires codimension 1, chart has " + std::to_string(m));
        break;
    case Theorem::SharpCodim2:
        if (m != 2) throw ConfigError("theorem", "codim2 selector requires codimension 2, chart has " + std::to_string(m));
        break;
    case Theorem::GeneralCodim:
        if (m < 2) throw ConfigError("theorem", "general selector requires codimension >= 2; use codim1 for m = 1");
        break;
    }
}

Discretization discretize(const Scenario& scenario, int resolution)
{
    Discretization d;
    d.resolution = resolution;
    for (const ScenarioPiece& piece : scenario.pieces) {
        Chart c = piece.chart(resolution, scenario.mode);
        if (scenario.theorem == Theorem::Codim1Lift) c = lift_codimension(c);
        Patch p = build_patch(c);
        TensorField a = piece.field(p);
        if (scenario.field_scale != 1.0) a = fields::scaled(a, scenario.field_scale, p.metric);
        d.n = c.intrinsic_dim();
        d.m = c.codimension();
        d.patches.push_back(std::move(p));
        d.fields.push_back(std::move(a));
    }
    return d;
}

SobolevReport functionals(const Discretization& disc, Theorem theorem)
{
    SobolevReport r;
    r.n = disc.n;
    r.m = disc.m;
    r.resolution = disc.resolution;
    r.mesh_size = disc.mesh_size();
    for (std::size_t i = 0; i < disc.patches.size(); ++i) {
        r.lhs_interior += piece_interior(disc.patches[i], disc.fields[i]);
        r.lhs_boundary += piece_boundary(disc.patches[i], disc.fields[i]);
        r.rhs_integral += piece_rhs(disc.patches[i], disc.fields[i]);
    }
    r.constant = theorem == Theorem::GeneralCodim ? michael_simon_constant(r.n, r.m) : codim2_constant(r.n);
    r.ratio = r.lhs() / (r.constant * std::pow(r.rhs_integral, (r.n - 1.0) / r.n));
    return r;
}

SobolevReport evaluate_at(const Scenario& scenario, int resolution)
{
    return functionals(discretize(scenario, resolution), scenario.theorem);
}

int coarse_resolution(int fine) { return std::max(3, (fine + 1) / 2); }

int quadrature_order(DerivativeMode mode) { return mode == DerivativeMode::CentralFD4 ? 4 : 2; }

double richardson_error(double fine, double coarse, double h_fine, double h_coarse, int order)
{
    const double factor = std::pow(h_coarse / h_fine, order) - 1.0;
    const double raw = factor > 0.0 ? std::abs(fine - coarse) / factor : std::abs(fine - coarse);
    return std::max(raw, 1e-12 * std::abs(fine));
}

SobolevReport evaluate_inequality(const Scenario& scenario)
{
    validate(scenario);
    const int fine = scenario.resolutions.back();
    SobolevReport r = evaluate_at(scenario, fine);
    const SobolevReport c = evaluate_at(scenario, coarse_resolution(fine));
    r.eps_mesh = richardson_error(r.ratio, c.ratio, r.mesh_size, c.mesh_size, quadrature_order(scenario.mode));
    return r;
}

bool superadditivity_check(double a, double b, int n)
{
    if (!(a > 0.0) || !(b > 0.0) || n < 2) throw std::invalid_argument("superadditivity_check: need a, b > 0, n >= 2");
    const double e = (n - 1.0) / n;
    return std::pow(a, e) + std::pow(b, e) - std::pow(a + b, e) > 1e-12;
}

TensorField cofactor_field_from_convex_potential(const JetScalar& u, const Patch& patch)
{
    const Chart& chart = patch.chart;
    const MetricData& md = patch.metric;
    for (double v : patch.second_form.data)
        if (std::abs(v) > kFlatTolerance)
            throw std::invalid_argument("cofactor_field_from_convex_potential: chart is not flat");
    const int n = chart.intrinsic_dim();

    auto require_convex = [&](const Mat& h, const Mat& g, int node) {
        const double e = min_eigenvalue(orthonormalize(h, g));
        if (!(e >= kPsdTolerance))
            throw std::domain_error("cofactor_field_from_convex_potential: Hessian not positive definite at node "
                                    + std::to_string(node));
    };

    if (chart.mode() != DerivativeMode::Exact) {
        const ScalarSamples s = sample_ambient_scalar(chart, u);
        std::vector<Mat> values(static_cast<std::size_t>(md.size()));
        for (int node = 0; node < md.size(); ++node) {
            const Mat h = covariant_hessian(md, node, s.grad[static_cast<std::size_t>(node)],
                                            s.hess[static_cast<std::size_t>(node)]);
            require_convex(h, md.g[static_cast<std::size_t>(node)], node);
            values[static_cast<std::size_t>(node)] = cofactor_tensor(h, md.g[static_cast<std::size_t>(node)]);
        }
        return fields::tabulated(chart, md, std::move(values));
    }

    // Covariant Hessian at an arbitrary parameter point from jets; the
    // Christoffel symbols come from <d_i d_j F, d_l F>.
    auto hessian_at = [&chart, &u, n](std::span<const double> p, Mat& g) {
        const std::vector<Jet> f = chart.jets(p);
        const Jet uj = u(f);
        g = Mat::Zero(n, n);
        Mat h = uj.h.topLeftCorner(n, n);
        std::vector<Mat> lowered(static_cast<std::size_t>(n), Mat::Zero(n, n));  // [l](i, j) = <F_ij, F_l>
        for (const Jet& c : f)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    g(i, j) += c.g(i) * c.g(j);
                    for (int l = 0; l < n; ++l) lowered[static_cast<std::size_t>(l)](i, j) += c.h(i, j) * c.g(l);
                }
        const Mat gi = g.inverse();
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
                h -= gi(k, l) * uj.g(k) * lowered[static_cast<std::size_t>(l)];
        return Mat(0.5 * (h + h.transpose()));
    };
    for (int node = 0; node < md.size(); ++node) {
        const Vec p = chart.node_coords(node);
        Mat g;
        const Mat h = hessian_at(std::span<const double>(p.data(), static_cast<std::size_t>(n)), g);
        require_convex(h, g, node);
    }
    return fields::pointwise(chart, md, [hessian_at](std::span<const double> p) {
        Mat g;
        const Mat h = hessian_at(p, g);
        return cofactor_tensor(h, g);
    });
}

TensorField cofactor_field_from_convex_potential(const JetScalar& u, const Chart& chart)
{
    return cofactor_field_from_convex_potential(u, build_patch(chart));
}

double equality_gap(const Scenario& scenario, const SobolevReport& report)
{
    (void)scenario;
    return report.ratio - 1.0;
}

double loglog_slope(const std::vector<double>& h, const std::vector<double>& err)
{
    if (h.size() != err.size() || h.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double x = std::log(h[i]);
        const double y = std::log(err[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

ConvergenceStudy convergence_study(const Scenario& scenario, const std::vector<int>& resolutions)
{
    Scenario s = scenario;
    s.resolutions = resolutions;
    validate(s);
    ConvergenceStudy study;
    study.resolutions = resolutions;
    for (int res : resolutions) {
        study.reports.push_back(evaluate_at(s, res));
        study.mesh_sizes.push_back(study.reports.back().mesh_size);
    }
    std::vector<double> h;
    if (scenario.exact_ratio) {
        for (std::size_t i = 0; i < study.reports.size(); ++i) {
            study.errors.push_back(std::abs(study.reports[i].ratio - *scenario.exact_ratio));
            h.push_back(study.mesh_sizes[i]);
        }
    } else {
        for (std::size_t i = 0; i + 1 < study.reports.size(); ++i) {
            study.errors.push_back(std::abs(study.reports[i].ratio - study.reports[i + 1].ratio));
            h.push_back(study.mesh_sizes[i]);
        }
    }
    std::vector<double> hs;
    std::vector<double> es;
    for (std::size_t i = 0; i < study.errors.size(); ++i)
        if (study.errors[i] >= kRoundoffFloor) {
            hs.push_back(h[i]);
            es.push_back(study.errors[i]);
        }
    study.roundoff_limited = !study.errors.empty() && hs.empty();
    if (hs.size() >= 2) study.slope = loglog_slope(hs, es);
    return study;
}

std::vector<Scenario> builtin_scenarios()
{
    constexpr double pi = std::numbers::pi;
    std::vector<Scenario> out;

    {
        Scenario s;
        s.name = "flat-disk-equality";
        s.description = "flat unit disk in R^4, A = cof D^2(|x|^2/2)";
        s.exercises = "sharp codim-2 inequality, equality case";
        s.theorem = Theorem::SharpCodim2;
        s.pieces.push_back({[](int r, DerivativeMode m) { return charts::flat_disk(4, 1.0, r, 0.0, 0.0, m); },
                            [](const Patch& p) { return cofactor_field_from_convex_potential(half_square_norm(), p); }});
        s.resolutions = {33, 65};
        s.exact_ratio = 1.0;
        s.equality_case = true;
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "flat-disk-metric";
        s.description = "flat unit disk in R^4, A = g";
        s.exercises = "sharp codim-2 inequality, equality case";
        s.pieces.push_back({[](int r, DerivativeMode m) { return charts::flat_disk(4, 1.0, r, 0.0, 0.0, m); },
                            metric_field()});
        s.exact_ratio = 1.0;
        s.equality_case = true;
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "flat-disk-anisotropic";
        s.description = "flat unit disk in R^4, A = diag(1, 2)";
        s.exercises = "sharp codim-2 inequality, strict (not a cofactor field)";
        s.pieces.push_back({[](int r, DerivativeMode m) { return charts::flat_disk(4, 1.0, r, 0.0, 0.0, m); },
                            [](const Patch& p) {
                                Eigen::MatrixXd d = Eigen::MatrixXd::Identity(4, 4);
                                d(1, 1) = 2.0;
                                return fields::ambient(p.chart, p.metric, conformal_plus_constant({}, d - Eigen::MatrixXd::Identity(4, 4)));
                            }});
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "sphere-codim1-lift";
        s.description = "unit sphere in R^3 lifted to R^4, A = g";
        s.exercises = "codimension-1 corollary via lift";
        s.theorem = Theorem::Codim1Lift;
        s.pieces.push_back({[](int r, DerivativeMode m) { return charts::round_sphere(3, 1.0, r, m); }, metric_field()});
        s.resolutions = {65, 129};
        s.exact_ratio = 2.0;
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "sphere-conformal";
        s.description = "unit sphere in R^3 lifted to R^4, A = exp(0.4 x + 0.3 y z) g";
        s.exercises = "codimension-1 corollary, conformal field";
        s.theorem = Theorem::Codim1Lift;
        s.pieces.push_back({[](int r, DerivativeMode m) { return charts::round_sphere(3, 1.0, r, m); },
                            [](const Patch& p) {
                                return fields::conformal(p.chart, p.metric, [](std::span<const Jet> x) {
                                    return exp(0.4 * x[0] + 0.3 * x[1] * x[2]);
                                });
                            }});
        s.resolutions = {33, 65, 129};
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "disconnected-two-disks";
        s.description = "two disjoint flat unit disks in R^4, A = g";
        s.exercises = "strict inequality for disconnected submanifolds";
        for (double cx : {0.0, 3.0})
            s.pieces.push_back({[cx](int r, DerivativeMode m) { return charts::flat_disk(4, 1.0, r, cx, 0.0, m); },
                                metric_field()});
        s.exact_ratio = std::sqrt(2.0);
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "cylinder-codim1-lift";
        s.description = "cylinder of radius 0.5 and height 1 in R^3 lifted to R^4, A = g";
        s.exercises = "codimension-1 corollary, surface with boundary";
        s.theorem = Theorem::Codim1Lift;
        s.pieces.push_back({[](int r, DerivativeMode m) { return charts::cylinder(3, 0.5, 1.0, r, m); }, metric_field()});
        // |H| = 2 and area pi give interior 2 pi; the two boundary circles add 2 pi
        s.exact_ratio = 2.0;
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "flat-square-metric";
        s.description = "flat unit square in R^4, A = g";
        s.exercises = "sharp codim-2 inequality, strict (square is not a ball)";
        s.pieces.push_back({[](int r, DerivativeMode m) { return charts::flat_box(2, 4, {0, 0}, {1, 1}, r, m); },
                            metric_field()});
        s.exact_ratio = 4.0 / (2.0 * std::sqrt(pi));
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "graph-surface-codim2";
        s.description = "graph (x, y, 0.4xy, 0.3(x^2 - y^2)) over [-1/2, 1/2]^2, A = exp(0.3 X1) I + S";
        s.exercises = "sharp codim-2 inequality, curved surface with anisotropic field";
        s.pieces.push_back({[](int r, DerivativeMode m) {
                                Polynomial z1;
                                z1.add(0.4, {1, 1});
                                Polynomial z2;
                                z2.add(0.3, {2, 0}).add(-0.3, {0, 2});
                                return charts::polynomial(2, {-0.5, -0.5}, {0.5, 0.5},
                                                          {Polynomial::linear(0), Polynomial::linear(1), z1, z2}, r, m);
                            },
                            [](const Patch& p) {
                                Eigen::MatrixXd sm(4, 4);
                                sm << 0.5, 0.1, 0.0, 0.1, 0.1, 0.3, 0.1, 0.0, 0.0, 0.1, 0.4, 0.0, 0.1, 0.0, 0.0, 0.2;
                                return fields::ambient(p.chart, p.metric, conformal_plus_constant({0.3}, sm));
                            }});
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "graph-surface-codim3";
        s.description = "graph (x, y, 0.4xy, 0.3(x^2 - y^2), 0.2x^3) over [-1/2, 1/2]^2 in R^5, conformal field";
        s.exercises = "general-codimension inequality, m = 3";
        s.theorem = Theorem::GeneralCodim;
        s.pieces.push_back({[](int r, DerivativeMode m) {
                                Polynomial z1;
                                z1.add(0.4, {1, 1});
                                Polynomial z2;
                                z2.add(0.3, {2, 0}).add(-0.3, {0, 2});
                                Polynomial z3;
                                z3.add(0.2, {3, 0});
                                return charts::polynomial(2, {-0.5, -0.5}, {0.5, 0.5},
                                                          {Polynomial::linear(0), Polynomial::linear(1), z1, z2, z3}, r, m);
                            },
                            [](const Patch& p) {
                                return fields::conformal(p.chart, p.metric, [](std::span<const Jet> x) {
                                    return exp(0.5 * x[0] - 0.2 * x[1]);
                                });
                            }});
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "torus-codim1-lift";
        s.description = "torus of revolution (R = 2, r = 1/2) in R^3 lifted to R^4, A = g";
        s.exercises = "codimension-1 corollary, closed surface of genus one";
        s.theorem = Theorem::Codim1Lift;
        s.pieces.push_back({[](int r, DerivativeMode m) { return charts::torus(3, 2.0, 0.5, r, m); }, metric_field()});
        out.push_back(std::move(s));
    }
    {
        Scenario s;
        s.name = "flat-cube-3d";
        s.description = "flat unit cube in R^5 (n = 3), A = cof D^2(|x|^2/2) = I";
        s.exercises = "sharp codim-2 inequality in dimension three";
        s.pieces.push_back({[](int r, DerivativeMode m) { return charts::flat_box(3, 5, {0, 0, 0}, {1, 1, 1}, r, m); },
                            [](const Patch& p) { return cofactor_field_from_convex_potential(half_square_norm(), p); }});
        s.resolutions = {9, 17};
        s.exact_ratio = 6.0 / codim2_constant(3);
        out.push_back(std::move(s));
    }
    return out;
}

std::optional<Scenario> builtin_scenario(const std::string& name)
{
    for (Scenario& s : builtin_scenarios())
        if (s.name == name) return std::move(s);
    return std::nullopt;
}

std::vector<Scenario> random_scenarios(int count, std::uint64_t seed)
{
    std::vector<Scenario> out;
    for (int i = 0; i < count; ++i) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i))));
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::normal_distribution<double> normal;

        std::vector<double> a{0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng)};
        Eigen::MatrixXd b(4, 4);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) b(r, c) = normal(rng);
        const Eigen::MatrixXd sm = 0.3 * b * b.transpose() / 4.0;
        FieldBuilder field = [a, sm](const Patch& p) {
            return fields::ambient(p.chart, p.metric, conformal_plus_constant(a, sm));
        };

        Scenario s;
        s.theorem = Theorem::SharpCodim2;
        s.resolutions = {17, 33};
        if (i % 2 == 0) {
            // Near-flat graph over a square with small quadratic and cubic terms.
            auto random_poly = [&]() {
                Polynomial p;
                for (const auto& powers : std::vector<std::vector<int>>{{2, 0}, {1, 1}, {0, 2}, {3, 0}, {1, 2}})
                    p.add(0.3 * u(rng), powers);
                return p;
            };
            const Polynomial z1 = random_poly();
            const Polynomial z2 = random_poly();
            s.name = "random-graph-" + std::to_string(i);
            s.description = "near-flat polynomial graph in R^4 with a random positive-definite field";
            s.pieces.push_back({[z1, z2](int r, DerivativeMode m) {
                                    return charts::polynomial(2, {-0.5, -0.5}, {0.5, 0.5},
                                                              {Polynomial::linear(0), Polynomial::linear(1), z1, z2}, r, m);
                                },
                                field});
        } else {
            Polynomial radius = Polynomial::constant(1.0);
            for (int c = 0; c < 3; ++c) {
                std::vector<int> lin(3, 0);
                lin[static_cast<std::size_t>(c)] = 1;
                radius.add(0.1 * u(rng), lin);
                std::vector<int> quad(3, 0);
                quad[static_cast<std::size_t>(c)] = 2;
                radius.add(0.1 * u(rng), quad);
            }
            Polynomial extra;
            extra.add(0.2 * u(rng), {1, 0, 0}).add(0.2 * u(rng), {0, 1, 1}).add(0.2 * u(rng), {0, 0, 2});
            s.name = "random-sphere-" + std::to_string(i);
            s.description = "sphere-like surface in R^4 with a random positive-definite field";
            s.pieces.push_back({[radius, extra](int r, DerivativeMode m) {
                                    return charts::sphere_like(radius, {extra}, r, m);
                                },
                                field});
        }
        s.exercises = "sharp codim-2 inequality, randomized";
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace msineq
