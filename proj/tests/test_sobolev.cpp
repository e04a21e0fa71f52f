#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "msineq/charts.hpp"
#include "msineq/error.hpp"
#include "msineq/sobolev.hpp"

using namespace msineq;
constexpr double kPi = std::numbers::pi;

namespace {

// Ball volumes from the recursion |B^d| = 2 pi / d |B^{d-2}|, |B^1| = 2, |B^2| = pi.
double ball_recursive(int d)
{
    if (d == 1) return 2.0;
    if (d == 2) return kPi;
    return 2.0 * kPi / d * ball_recursive(d - 2);
}

Scenario named(const std::string& name)
{
    auto s = builtin_scenario(name);
    EXPECT_TRUE(s.has_value()) << name;
    return *s;
}

Jet cubic_potential(std::span<const Jet> x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.1 * ipow(x[0], 3); }

}  // namespace

TEST(Constant, Examples)
{
    EXPECT_NEAR(michael_simon_constant(2, 2), 2.0 * std::sqrt(kPi), 1e-12);
    EXPECT_NEAR(michael_simon_constant(2, 2), 3.544908, 1e-6);
    const double b5 = 8.0 * kPi * kPi / 15.0;
    const double b3 = 4.0 * kPi / 3.0;
    EXPECT_NEAR(michael_simon_constant(2, 3), 2.0 * std::sqrt(5.0 * b5 / (3.0 * b3)), 1e-12);
    EXPECT_NEAR(michael_simon_constant(3, 2), 3.0 * std::cbrt(4.0 * kPi / 3.0), 1e-12);
    EXPECT_THROW((void)michael_simon_constant(2, 1), std::invalid_argument);
    EXPECT_THROW((void)michael_simon_constant(1, 2), std::invalid_argument);
}

TEST(Constant, CodimTwoCollapse)
{
    for (int n = 2; n <= 6; ++n)
        EXPECT_NEAR(michael_simon_constant(n, 2), n * std::pow(ball_recursive(n), 1.0 / n), 1e-12) << n;
}

TEST(Superadditivity, Examples)
{
    EXPECT_TRUE(superadditivity_check(1.0, 1.0, 2));
    EXPECT_TRUE(superadditivity_check(kPi, kPi, 2));
    EXPECT_TRUE(superadditivity_check(1e-8, 1.0, 3));
    const double margin = std::pow(1e-8, 2.0 / 3.0) + 1.0 - std::pow(1.0 + 1e-8, 2.0 / 3.0);
    EXPECT_GT(margin, 1e-12);
    EXPECT_LT(margin, 1e-5);
    EXPECT_THROW((void)superadditivity_check(0.0, 1.0, 2), std::invalid_argument);
}

TEST(Evaluate, FlatDiskEqualityTerms)
{
    const SobolevReport r = evaluate_inequality(named("flat-disk-metric"));
    EXPECT_NEAR(r.lhs_interior, 0.0, 1e-12);
    EXPECT_NEAR(r.lhs_boundary, 2.0 * kPi, 1e-10);
    EXPECT_NEAR(r.rhs_integral, kPi, 1e-10);
    EXPECT_NEAR(r.constant, 2.0 * std::sqrt(kPi), 1e-12);
    EXPECT_NEAR(r.ratio, 1.0, 1e-10);
    EXPECT_GE(r.ratio, 1.0 - r.eps_mesh);
}

TEST(Evaluate, SphereLiftedRatioIsTwo)
{
    const SobolevReport r = evaluate_inequality(named("sphere-codim1-lift"));
    EXPECT_EQ(r.m, 2);
    EXPECT_NEAR(r.ratio, 2.0, 1e-3);
    EXPECT_GE(r.ratio, 1.0 - r.eps_mesh);
}

TEST(Evaluate, TwoDisksRatioIsRootTwo)
{
    const SobolevReport r = evaluate_inequality(named("disconnected-two-disks"));
    EXPECT_NEAR(r.ratio, std::sqrt(2.0), 1e-9);
    // a = b = pi reproduces the same factor through superadditivity
    EXPECT_TRUE(superadditivity_check(kPi, kPi, 2));
}

TEST(Evaluate, RejectsSelectorMismatch)
{
    Scenario s = named("flat-disk-metric");
    s.theorem = Theorem::Codim1Lift;
    EXPECT_THROW(validate(s), ConfigError);
    s.theorem = Theorem::SharpCodim2;
    s.resolutions = {33, 17};
    EXPECT_THROW(validate(s), ConfigError);
    Scenario g = named("graph-surface-codim3");
    g.theorem = Theorem::SharpCodim2;
    EXPECT_THROW(validate(g), ConfigError);
}

TEST(Evaluate, CodimOneLiftMatchesLiftedChart)
{
    const Scenario direct = named("sphere-conformal");
    Scenario lifted = direct;
    lifted.theorem = Theorem::SharpCodim2;
    const ChartBuilder base = direct.pieces[0].chart;
    lifted.pieces[0].chart = [base](int r, DerivativeMode m) { return lift_codimension(base(r, m)); };
    const SobolevReport a = evaluate_at(direct, 33);
    const SobolevReport b = evaluate_at(lifted, 33);
    EXPECT_NEAR(a.lhs_interior, b.lhs_interior, 1e-12);
    EXPECT_NEAR(a.lhs_boundary, b.lhs_boundary, 1e-12);
    EXPECT_NEAR(a.rhs_integral, b.rhs_integral, 1e-12);
    EXPECT_NEAR(a.ratio, b.ratio, 1e-12);
}

TEST(Evaluate, ScalingInvariance)
{
    for (const Scenario& base : builtin_scenarios()) {
        Scenario s = base;
        const int res = s.pieces[0].chart(3, s.mode).intrinsic_dim() == 3 ? 7 : 17;
        const double r0 = evaluate_at(s, res).ratio;
        for (double lambda : {0.5, 2.0, 10.0}) {
            s.field_scale = lambda;
            EXPECT_NEAR(evaluate_at(s, res).ratio / r0, 1.0, 1e-10) << s.name << " lambda " << lambda;
        }
    }
}

TEST(Evaluate, NormalizationSatisfiesScalingIdentity)
{
    Scenario s = named("sphere-conformal");
    const Discretization d = discretize(s, 33);
    const SobolevReport r = functionals(d, s.theorem);
    auto [a, lambda] = normalize_scaling(d.fields[0], r, d.patches[0].metric);
    Discretization scaled = d;
    scaled.fields[0] = a;
    const SobolevReport r2 = functionals(scaled, s.theorem);
    EXPECT_NEAR(r2.lhs() / (r2.n * r2.rhs_integral), 1.0, 1e-10);
    EXPECT_NE(lambda, 1.0);

    const Scenario disk = named("flat-disk-metric");
    const SobolevReport rd = evaluate_at(disk, 33);
    EXPECT_NEAR(scaling_factor(rd), 1.0, 1e-10);
}

TEST(Evaluate, RandomSweepSubset)
{
    for (const Scenario& s : random_scenarios(6, 7)) {
        const SobolevReport r = evaluate_inequality(s);
        EXPECT_GE(r.ratio, 1.0 - 5.0 * r.eps_mesh) << s.name;
        EXPECT_EQ(r.m, 2);
    }
}

TEST(Evaluate, RandomScenariosAreDeterministic)
{
    const auto a = random_scenarios(2, 11);
    const auto b = random_scenarios(2, 11);
    EXPECT_EQ(evaluate_at(a[1], 17).ratio, evaluate_at(b[1], 17).ratio);
    EXPECT_NE(evaluate_at(a[0], 17).ratio, evaluate_at(random_scenarios(1, 12)[0], 17).ratio);
}

TEST(CofactorPotential, QuadraticOnDiskIsMetric)
{
    const Patch p = build_patch(charts::flat_disk(4, 1.0, 17));
    const TensorField a = cofactor_field_from_convex_potential(
        [](std::span<const Jet> x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); }, p);
    const CovectorField w = divergence(a, p.metric);
    for (int node = 0; node < p.metric.size(); ++node) {
        EXPECT_LT((a(node) - p.metric.g[static_cast<std::size_t>(node)]).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(w.norm(p.metric, node), 1e-8);
    }
}

TEST(CofactorPotential, CubicPerturbationIsDivergenceFree)
{
    for (const Chart& c : {charts::flat_disk(4, 0.5, 33), charts::flat_box(2, 4, {-0.5, -0.5}, {0.5, 0.5}, 33)}) {
        const Patch p = build_patch(c);
        const TensorField a = cofactor_field_from_convex_potential(cubic_potential, p);
        const CovectorField w = divergence(a, p.metric);
        double worst = 0.0;
        for (int node = 0; node < p.metric.size(); ++node) worst = std::max(worst, w.norm(p.metric, node));
        EXPECT_LT(worst, 1e-6) << c.name();
    }
}

TEST(CofactorPotential, CubeInThreeDimensions)
{
    const Patch p = build_patch(charts::flat_box(3, 5, {0, 0, 0}, {1, 1, 1}, 5));
    const TensorField a = cofactor_field_from_convex_potential(
        [](std::span<const Jet> x) { return 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); }, p);
    for (double d : tensor_det(a, p.metric)) EXPECT_NEAR(d, 1.0, 1e-12);
    EXPECT_LT((a(0) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CofactorPotential, Rejections)
{
    const Patch disk = build_patch(charts::flat_disk(4, 1.0, 9));
    EXPECT_THROW((void)cofactor_field_from_convex_potential(
                     [](std::span<const Jet> x) { return 0.5 * (x[0] * x[0] - x[1] * x[1]); }, disk),
                 std::domain_error);
    const Patch sphere = build_patch(charts::round_sphere(4, 1.0, 9));
    EXPECT_THROW((void)cofactor_field_from_convex_potential(
                     [](std::span<const Jet> x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); }, sphere),
                 std::invalid_argument);
}

TEST(EqualityGap, EqualityCaseConverges)
{
    const Scenario s = named("flat-disk-equality");
    const ConvergenceStudy study = convergence_study(s, {17, 33, 65});
    for (const auto& r : study.reports) EXPECT_NEAR(equality_gap(s, r), 0.0, 1e-9);
    EXPECT_TRUE(study.roundoff_limited || (study.slope && *study.slope >= 1.9));
}

TEST(EqualityGap, StrictCasesStayAway)
{
    const Scenario sphere = named("sphere-codim1-lift");
    EXPECT_NEAR(equality_gap(sphere, evaluate_at(sphere, 65)), 1.0, 1e-3);
    const Scenario aniso = named("flat-disk-anisotropic");
    for (int res : {17, 33, 65}) EXPECT_GT(equality_gap(aniso, evaluate_at(aniso, res)), 0.08);
}

TEST(Convergence, SphereConformalRefinesAtQuadratureOrder)
{
    const ConvergenceStudy study = convergence_study(named("sphere-conformal"), {17, 33, 65, 129});
    ASSERT_TRUE(study.slope.has_value());
    EXPECT_GE(*study.slope, 1.9);
    for (std::size_t i = 1; i < study.errors.size(); ++i) EXPECT_LT(study.errors[i], study.errors[i - 1]);
}

TEST(Convergence, LoglogSlopeOfExactPowerLaw)
{
    EXPECT_NEAR(loglog_slope({0.1, 0.05, 0.025}, {0.01, 0.0025, 0.000625}), 2.0, 1e-12);
}

TEST(Richardson, EstimateAndFloor)
{
    // error c h^2 with c = 1: fine h = 0.1 (0.01), coarse 0.2 (0.04)
    EXPECT_NEAR(richardson_error(1.01, 1.04, 0.1, 0.2, 2), 0.01, 1e-12);
    EXPECT_DOUBLE_EQ(richardson_error(1.0, 1.0, 0.1, 0.2, 2), 1e-12);
    EXPECT_EQ(coarse_resolution(65), 33);
    EXPECT_EQ(coarse_resolution(3), 3);
}
