#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "msineq/charts.hpp"
#include "msineq/error.hpp"
#include "msineq/tensorfield.hpp"

using namespace msineq;

namespace {

Jet smooth_f(std::span<const Jet> x)
{
    return exp(0.3 * x[0] + 0.2 * x[1] * x[2]) + 0.5 * sin(x[1]) * sin(x[1]);
}

// Independent oracle: ambient gradient of smooth_f projected on the tangent plane.
double tangential_gradient_norm(const AmbientVec& pos, const AmbientFrame& tangents)
{
    const double x = pos(0);
    const double y = pos(1);
    const double z = pos(2);
    const double e = std::exp(0.3 * x + 0.2 * y * z);
    AmbientVec grad = AmbientVec::Zero(pos.size());
    grad(0) = 0.3 * e;
    grad(1) = 0.2 * z * e + std::sin(y) * std::cos(y);
    grad(2) = 0.2 * y * e;
    const Eigen::MatrixXd t = tangents;
    const Eigen::MatrixXd proj = t * (t.transpose() * t).inverse() * t.transpose();
    return (proj * Eigen::VectorXd(grad)).norm();
}

std::vector<Chart> scenario_charts(DerivativeMode mode)
{
    return {charts::flat_disk(4, 1.0, 17, 0.0, 0.0, mode), charts::round_sphere(3, 1.0, 17, mode),
            charts::cylinder(3, 0.7, 2.0, 17, mode), charts::torus(3, 2.0, 0.5, 16, mode),
            charts::flat_box(3, 5, {0, 0, 0}, {1, 1, 1}, 7, mode)};
}

AmbientMatrixFn constant_ambient(const Eigen::MatrixXd& m)
{
    return [m](std::span<const Jet>) {
        std::vector<Jet> out;
        for (Eigen::Index a = 0; a < m.rows(); ++a)
            for (Eigen::Index b = 0; b < m.cols(); ++b) out.emplace_back(m(a, b));
        return out;
    };
}

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n)
{
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) x(i, j) = normal(rng);
    return x * x.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST(TensorField, RejectsOneDimensionalCharts)
{
    const Chart c = charts::flat_box(1, 2, {0}, {1}, 5);
    const MetricData md = induced_metric(c);
    EXPECT_THROW(fields::metric(c, md), std::invalid_argument);
}

TEST(TensorField, RejectsIndefiniteField)
{
    const Chart c = charts::flat_box(2, 3, {0, 0}, {1, 1}, 5);
    const MetricData md = induced_metric(c);
    Polynomial p = Polynomial::constant(-0.5);
    p.add(1.0, {1});
    EXPECT_THROW(fields::diagonal(c, md, {Polynomial::constant(1.0), p}), SpdViolation);
}

TEST(TensorField, EllipticityCertificate)
{
    const Chart c = charts::round_sphere(3, 1.0, 9);
    const MetricData md = induced_metric(c);
    const TensorField a = fields::scaled(fields::metric(c, md), 3.0, md);
    EXPECT_NEAR(a.ellipticity().min_eigenvalue, 3.0, 1e-12);
    EXPECT_TRUE(a.ellipticity().valid());
}

TEST(Divergence, MetricIsParallelOnEveryChart)
{
    for (auto mode : {DerivativeMode::Exact, DerivativeMode::CentralFD2, DerivativeMode::CentralFD4})
        for (const Chart& c : scenario_charts(mode)) {
            const MetricData md = induced_metric(c);
            const CovectorField w = divergence(fields::metric(c, md), md);
            for (int node = 0; node < md.size(); ++node) ASSERT_LT(w.norm(md, node), 1e-8) << c.name();
        }
}

TEST(Divergence, LinearDiagonalField)
{
    for (auto mode : {DerivativeMode::Exact, DerivativeMode::CentralFD2}) {
        const Chart c = charts::flat_box(2, 3, {0, 0}, {1, 1}, 9, mode);
        const MetricData md = induced_metric(c);
        Polynomial p = Polynomial::constant(1.0);
        p.add(1.0, {1});
        const CovectorField w = divergence(fields::diagonal(c, md, {p, p}), md);
        for (int node = 0; node < md.size(); ++node) {
            EXPECT_NEAR(w.data[static_cast<std::size_t>(node)](0), 1.0, 1e-12);
            EXPECT_NEAR(w.data[static_cast<std::size_t>(node)](1), 0.0, 1e-12);
            EXPECT_NEAR(w.norm(md, node), 1.0, 1e-12);
        }
    }
}

TEST(ConformalReduction, AllThreeQuantities)
{
    for (const Chart& c : {charts::round_sphere(3, 1.0, 33), charts::cylinder(3, 0.7, 2.0, 33),
                           charts::flat_disk(4, 1.0, 33)}) {
        const Patch p = build_patch(c);
        const TensorField a = fields::conformal(c, p.metric, smooth_f);
        const TensorField g = fields::metric(c, p.metric);
        const CovectorField w = divergence(a, p.metric);
        const NormalField h = contract_with_second_form(g, p.second_form, p.metric);
        const NormalField fh = contract_with_second_form(a, p.second_form, p.metric);
        for (int node = 0; node < p.metric.size(); ++node) {
            const auto& pos = p.metric.positions[static_cast<std::size_t>(node)];
            std::vector<Jet> x(pos.data(), pos.data() + pos.size());
            const double f = smooth_f(x).v;
            ASSERT_NEAR(w.norm(p.metric, node),
                        tangential_gradient_norm(pos, p.metric.tangents[static_cast<std::size_t>(node)]), 1e-6)
                << c.name();
            ASSERT_NEAR(fh.norm(node), f * h.norm(node), 1e-6);
        }
        for (const auto& b : p.boundary) {
            const auto& pos = b.point;
            std::vector<Jet> x(pos.data(), pos.data() + pos.size());
            ASSERT_NEAR(conormal_flux_norm(a, b, p.metric), smooth_f(x).v, 1e-6);
        }
    }
}

TEST(Contraction, FlatSphereCylinder)
{
    const Patch flat = build_patch(charts::flat_disk(4, 1.0, 17));
    std::mt19937_64 rng(1);
    const TensorField any = fields::ambient(flat.chart, flat.metric, constant_ambient(random_spd(rng, 4)));
    const NormalField z = contract_with_second_form(any, flat.second_form, flat.metric);
    for (int node = 0; node < flat.metric.size(); ++node) EXPECT_LT(z.norm(node), 1e-12);

    const Patch sphere = build_patch(charts::round_sphere(3, 1.0, 17));
    const NormalField hs = contract_with_second_form(fields::metric(sphere.chart, sphere.metric), sphere.second_form,
                                                     sphere.metric);
    for (int node = 0; node < sphere.metric.size(); ++node) EXPECT_NEAR(hs.norm(node), 2.0, 1e-12);

    const double r = 0.6;
    const Patch cyl = build_patch(charts::cylinder(3, r, 1.0, 17));
    const NormalField hc = contract_with_second_form(fields::metric(cyl.chart, cyl.metric), cyl.second_form, cyl.metric);
    for (int node = 0; node < cyl.metric.size(); ++node) EXPECT_NEAR(hc.norm(node), 1.0 / r, 1e-12);
}

TEST(ConormalFlux, MetricAndDiagonal)
{
    const Patch disk = build_patch(charts::flat_disk(4, 1.0, 17));
    const TensorField g = fields::metric(disk.chart, disk.metric);
    for (const auto& b : disk.boundary) EXPECT_NEAR(conormal_flux_norm(g, b, disk.metric), 1.0, 1e-14);

    const Patch sq = build_patch(charts::flat_box(2, 3, {0, 0}, {1, 1}, 9));
    const TensorField a = fields::diagonal(sq.chart, sq.metric, {Polynomial::constant(4.0), Polynomial::constant(1.0)});
    int checked = 0;
    for (const auto& b : sq.boundary)
        if (b.axis == 0 && b.side == 1) {
            EXPECT_NEAR(conormal_flux_norm(a, b, sq.metric), 4.0, 1e-14);
            ++checked;
        }
    EXPECT_EQ(checked, 9);
}

TEST(TensorDet, Examples)
{
    const Patch sq = build_patch(charts::flat_box(2, 3, {0, 0}, {1, 1}, 5));
    for (double d : tensor_det(fields::metric(sq.chart, sq.metric), sq.metric)) EXPECT_NEAR(d, 1.0, 1e-15);
    const TensorField a = fields::diagonal(sq.chart, sq.metric, {Polynomial::constant(2.0), Polynomial::constant(3.0)});
    for (double d : tensor_det(a, sq.metric)) EXPECT_NEAR(d, 6.0, 1e-14);

    const Patch sphere = build_patch(charts::round_sphere(3, 1.0, 17));
    const TensorField twice = fields::scaled(fields::metric(sphere.chart, sphere.metric), 2.0, sphere.metric);
    for (double d : tensor_det(twice, sphere.metric)) EXPECT_NEAR(d, 4.0, 1e-12);
}

TEST(Cofactor, Examples)
{
    const Patch sphere = build_patch(charts::round_sphere(3, 1.0, 17));
    const TensorField t = cofactor_tensor(fields::metric(sphere.chart, sphere.metric), sphere.metric);
    for (int node = 0; node < sphere.metric.size(); ++node)
        EXPECT_LT((t(node) - sphere.metric.g[static_cast<std::size_t>(node)]).cwiseAbs().maxCoeff(), 1e-12);

    const Patch sq = build_patch(charts::flat_box(2, 3, {0, 0}, {1, 1}, 5));
    const TensorField s = fields::diagonal(sq.chart, sq.metric, {Polynomial::constant(2.0), Polynomial::constant(3.0)});
    const TensorField c = cofactor_tensor(s, sq.metric);
    EXPECT_NEAR(c(0)(0, 0), 3.0, 1e-14);
    EXPECT_NEAR(c(0)(1, 1), 2.0, 1e-14);
    EXPECT_NEAR(c(0)(0, 1), 0.0, 1e-14);
}

TEST(Cofactor, DefiningIdentityAndDeterminantOnRandomFields)
{
    std::mt19937_64 rng(42);
    const Patch sphere = build_patch(charts::round_sphere(3, 1.0, 9));
    const Patch cube = build_patch(charts::flat_box(3, 4, {0, 0, 0}, {1, 1, 1}, 4));
    for (int trial = 0; trial < 100; ++trial) {
        const Patch& p = trial % 2 ? cube : sphere;
        const TensorField s = fields::ambient(p.chart, p.metric, constant_ambient(random_spd(rng, p.metric.ambient)));
        const TensorField t = cofactor_tensor(s, p.metric);
        const std::vector<double> ds = tensor_det(s, p.metric);
        const std::vector<double> dt = tensor_det(t, p.metric);
        const int n = p.metric.n;
        for (int node = 0; node < p.metric.size(); ++node) {
            const auto& g = p.metric.g[static_cast<std::size_t>(node)];
            const Mat composed = t(node) * p.metric.g_inv[static_cast<std::size_t>(node)] * s(node);
            const double d = ds[static_cast<std::size_t>(node)];
            ASSERT_LT((composed - d * g).cwiseAbs().maxCoeff(), 1e-9);
            ASSERT_NEAR(dt[static_cast<std::size_t>(node)], std::pow(d, n - 1), 1e-8 * std::max(1.0, std::pow(d, n - 1)));
        }
    }
}

TEST(Cofactor, DerivativesMatchPointwiseDifferences)
{
    const Chart c = charts::round_sphere(3, 1.0, 13);
    const MetricData md = induced_metric(c);
    Eigen::MatrixXd m(3, 3);
    m << 2.0, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 1.0;
    auto mfn = [m](std::span<const Jet> x) {
        std::vector<Jet> out;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) out.push_back((1.0 + 0.2 * x[0] * x[0]) * m(a, b));
        return out;
    };
    const TensorField t = cofactor_tensor(fields::ambient(c, md, mfn), md);
    // Oracle: the same tensor built pointwise and differentiated numerically.
    const TensorField oracle = fields::pointwise(c, md, [&](std::span<const double> p) {
        const PointGeometry pg = c.evaluate(p);
        const Mat g = pg.tangents.transpose() * pg.tangents;
        std::vector<Jet> x(pg.position.data(), pg.position.data() + pg.position.size());
        const auto mx = mfn(x);
        Eigen::Matrix3d mm;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) mm(a, b) = mx[static_cast<std::size_t>(a * 3 + b)].v;
        const Mat s = pg.tangents.transpose() * mm * pg.tangents;
        return cofactor_tensor(s, g);
    });
    for (std::size_t i = 0; i < t.derivatives().size(); ++i)
        ASSERT_NEAR(t.derivatives()[i], oracle.derivatives()[i], 1e-7);
}

TEST(Linearity, AllQuantitiesScale)
{
    const Patch p = build_patch(charts::round_sphere(3, 1.0, 17));
    const TensorField a = fields::conformal(p.chart, p.metric, smooth_f);
    for (double lambda : {0.5, 2.0, 10.0}) {
        const TensorField b = fields::scaled(a, lambda, p.metric);
        const CovectorField wa = divergence(a, p.metric);
        const CovectorField wb = divergence(b, p.metric);
        const NormalField ha = contract_with_second_form(a, p.second_form, p.metric);
        const NormalField hb = contract_with_second_form(b, p.second_form, p.metric);
        for (int node = 0; node < p.metric.size(); ++node) {
            ASSERT_NEAR(wb.norm(p.metric, node), lambda * wa.norm(p.metric, node), 1e-13 * lambda * (1 + wa.norm(p.metric, node)));
            ASSERT_NEAR(hb.norm(node), lambda * ha.norm(node), 1e-13 * lambda * ha.norm(node));
        }
    }
}

TEST(NormalizeScaling, FixedPointAndHalving)
{
    const Patch p = build_patch(charts::flat_box(2, 3, {0, 0}, {1, 1}, 5));
    const TensorField a0 = fields::metric(p.chart, p.metric);
    SobolevReport r0;
    r0.n = 2;
    r0.lhs_boundary = 2.0;
    r0.rhs_integral = 1.0;  // LHS = n * integral already
    auto [same, lambda0] = normalize_scaling(a0, r0, p.metric);
    EXPECT_DOUBLE_EQ(lambda0, 1.0);

    // Doubling A doubles the LHS and multiplies the determinant integral by 2^(n/(n-1)) = 4.
    SobolevReport r1 = r0;
    r1.lhs_boundary = 4.0;
    r1.rhs_integral = 4.0;
    auto [halved, lambda1] = normalize_scaling(fields::scaled(a0, 2.0, p.metric), r1, p.metric);
    EXPECT_DOUBLE_EQ(lambda1, 0.5);
    EXPECT_NEAR(halved(0)(0, 0), 1.0, 1e-15);

    SobolevReport bad = r0;
    bad.rhs_integral = 0.0;
    EXPECT_THROW((void)normalize_scaling(a0, bad, p.metric), std::domain_error);
}
