#include "msineq/tensorfield.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "msineq/error.hpp"

namespace msineq {

namespace {

using JetMatrix = std::vector<Jet>;  // n*n row-major

std::size_t at3(int node, int n, int k, int i, int j)
{
    return static_cast<std::size_t>(((node * n + k) * n + i) * n + j);
}

std::vector<double> grid_derivatives(const Grid& grid, const std::vector<Mat>& comps)
{
    const int n = grid.dim();
    std::vector<double> d(static_cast<std::size_t>(grid.size() * n * n * n), 0.0);
    for (int node = 0; node < grid.size(); ++node)
        for (int k = 0; k < n; ++k) {
            const Mat dk = grid.d1(comps, node, k);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) d[at3(node, n, k, i, j)] = 0.5 * (dk(i, j) + dk(j, i));
        }
    return d;
}

// Tangent vectors dF/dx^i as jets carrying their first derivatives.
std::vector<Jet> tangent_jets(const std::vector<Jet>& f, int n)
{
    std::vector<Jet> t;
    t.reserve(f.size() * static_cast<std::size_t>(n));
    for (const Jet& c : f)
        for (int i = 0; i < n; ++i) {
            Jet j(c.g(i));
            j.g = c.h.col(i);
            t.push_back(j);
        }
    return t;  // index a*n + i
}

// Builds a field from a per-node jet matrix (exact mode).
template <typename F>
TensorField from_jets(const Chart& chart, const MetricData& metric, F&& jet_matrix)
{
    const int n = chart.intrinsic_dim();
    const int count = chart.grid().size();
    std::vector<Mat> comps(static_cast<std::size_t>(count));
    std::vector<double> d(static_cast<std::size_t>(count * n * n * n), 0.0);
    for (int node = 0; node < count; ++node) {
        const JetMatrix a = jet_matrix(node);
        Mat v(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Jet& lo = a[static_cast<std::size_t>(i * n + j)];
                const Jet& hi = a[static_cast<std::size_t>(j * n + i)];
                v(i, j) = 0.5 * (lo.v + hi.v);
                for (int k = 0; k < n; ++k) d[at3(node, n, k, i, j)] = 0.5 * (lo.g(k) + hi.g(k));
            }
        comps[static_cast<std::size_t>(node)] = v;
    }
    return {std::move(comps), std::move(d), metric};
}

TensorField from_nodal(const Chart& chart, const MetricData& metric, std::vector<Mat> comps)
{
    for (Mat& c : comps) c = (0.5 * (c + c.transpose())).eval();
    std::vector<double> d = grid_derivatives(chart.grid(), comps);
    return {std::move(comps), std::move(d), metric};
}

std::span<const double> as_span(const Vec& p) { return {p.data(), static_cast<std::size_t>(p.size())}; }

}  // namespace

TensorField::TensorField(std::vector<Mat> components, std::vector<double> derivatives, const MetricData& metric)
    : components_(std::move(components)), derivatives_(std::move(derivatives))
{
    if (components_.empty()) throw std::invalid_argument("TensorField: no components");
    n_ = static_cast<int>(components_.front().rows());
    if (n_ < 2) throw std::invalid_argument("TensorField: intrinsic dimension must be at least 2");
    if (static_cast<int>(components_.size()) != metric.size() || n_ != metric.n)
        throw std::invalid_argument("TensorField: components do not match the metric grid");
    if (derivatives_.size() != components_.size() * static_cast<std::size_t>(n_ * n_ * n_))
        throw std::invalid_argument("TensorField: derivative array has the wrong size");
    double lowest = std::numeric_limits<double>::infinity();
    for (int node = 0; node < size(); ++node) {
        const double e = min_eigenvalue(orthonormalize(components_[static_cast<std::size_t>(node)],
                                                       metric.g[static_cast<std::size_t>(node)]));
        if (!(e >= ellipticity_.tolerance)) throw SpdViolation(node, e, "TensorField");
        lowest = std::min(lowest, e);
    }
    ellipticity_.min_eigenvalue = lowest;
}

Mat TensorField::derivative(int node, int k) const
{
    Mat d(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) d(i, j) = derivative(node, k, i, j);
    return d;
}

double CovectorField::norm(const MetricData& metric, int node) const
{
    const Vec& w = data[static_cast<std::size_t>(node)];
    return std::sqrt(std::max(0.0, w.dot(metric.g_inv[static_cast<std::size_t>(node)] * w)));
}

namespace fields {

TensorField metric(const Chart& chart, const MetricData& metric)
{
    (void)chart;
    return {metric.g, metric.dg, metric};
}

TensorField conformal(const Chart& chart, const MetricData& metric, const JetScalar& f)
{
    const int n = chart.intrinsic_dim();
    if (chart.mode() != DerivativeMode::Exact) {
        const ScalarSamples s = sample_ambient_scalar(chart, f);
        std::vector<Mat> comps(static_cast<std::size_t>(metric.size()));
        for (int node = 0; node < metric.size(); ++node)
            comps[static_cast<std::size_t>(node)] = s.value[static_cast<std::size_t>(node)] * metric.g[static_cast<std::size_t>(node)];
        return from_nodal(chart, metric, std::move(comps));
    }
    return from_jets(chart, metric, [&](int node) {
        const Vec p = chart.node_coords(node);
        const std::vector<Jet> x = chart.jets(as_span(p));
        const Jet fx = f(x);
        const std::vector<Jet> t = tangent_jets(x, n);
        JetMatrix a(static_cast<std::size_t>(n * n), Jet(0.0));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Jet gij(0.0);
                for (std::size_t c = 0; c < x.size(); ++c)
                    gij += t[c * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)]
                         * t[c * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
                a[static_cast<std::size_t>(i * n + j)] = fx * gij;
            }
        return a;
    });
}

TensorField diagonal(const Chart& chart, const MetricData& metric, const std::vector<Polynomial>& entries)
{
    const int n = chart.intrinsic_dim();
    if (static_cast<int>(entries.size()) != n) throw std::invalid_argument("fields::diagonal: need n entries");
    if (chart.mode() != DerivativeMode::Exact) {
        std::vector<Mat> comps(static_cast<std::size_t>(metric.size()));
        for (int node = 0; node < metric.size(); ++node) {
            const Vec p = chart.node_coords(node);
            const std::vector<Jet> x(p.data(), p.data() + p.size());
            Mat a = Mat::Zero(n, n);
            for (int i = 0; i < n; ++i) a(i, i) = entries[static_cast<std::size_t>(i)](x).v;
            comps[static_cast<std::size_t>(node)] = a;
        }
        return from_nodal(chart, metric, std::move(comps));
    }
    return from_jets(chart, metric, [&](int node) {
        const std::vector<Jet> x = seed_variables(chart.node_coords(node));
        JetMatrix a(static_cast<std::size_t>(n * n), Jet(0.0));
        for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i * n + i)] = entries[static_cast<std::size_t>(i)](x);
        return a;
    });
}

TensorField ambient(const Chart& chart, const MetricData& metric, const AmbientMatrixFn& m)
{
    const int n = chart.intrinsic_dim();
    const int big_n = chart.ambient_dim();
    auto check = [&](const std::vector<Jet>& mx) {
        if (static_cast<int>(mx.size()) != big_n * big_n)
            throw std::invalid_argument("fields::ambient: matrix function must return N*N entries");
    };
    if (chart.mode() != DerivativeMode::Exact) {
        std::vector<Mat> comps(static_cast<std::size_t>(metric.size()));
        for (int node = 0; node < metric.size(); ++node) {
            const AmbientVec& pos = metric.positions[static_cast<std::size_t>(node)];
            const std::vector<Jet> x(pos.data(), pos.data() + pos.size());
            const std::vector<Jet> mx = m(x);
            check(mx);
            Eigen::MatrixXd mm(big_n, big_n);
            for (int a = 0; a < big_n; ++a)
                for (int b = 0; b < big_n; ++b) mm(a, b) = mx[static_cast<std::size_t>(a * big_n + b)].v;
            const AmbientFrame& t = metric.tangents[static_cast<std::size_t>(node)];
            comps[static_cast<std::size_t>(node)] = t.transpose() * mm * t;
        }
        return from_nodal(chart, metric, std::move(comps));
    }
    return from_jets(chart, metric, [&](int node) {
        const Vec p = chart.node_coords(node);
        const std::vector<Jet> x = chart.jets(as_span(p));
        const std::vector<Jet> mx = m(x);
        check(mx);
        const std::vector<Jet> t = tangent_jets(x, n);
        auto tj = [&](int a, int i) -> const Jet& { return t[static_cast<std::size_t>(a * n + i)]; };
        JetMatrix out(static_cast<std::size_t>(n * n), Jet(0.0));
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                Jet acc(0.0);
                for (int a = 0; a < big_n; ++a) {
                    Jet row(0.0);
                    for (int b = 0; b < big_n; ++b) row += mx[static_cast<std::size_t>(a * big_n + b)] * tj(b, j);
                    acc += tj(a, i) * row;
                }
                out[static_cast<std::size_t>(i * n + j)] = acc;
                out[static_cast<std::size_t>(j * n + i)] = acc;
            }
        return out;
    });
}

TensorField tabulated(const Chart& chart, const MetricData& metric, std::vector<Mat> values)
{
    if (static_cast<int>(values.size()) != chart.grid().size())
        throw std::invalid_argument("fields::tabulated: one matrix per grid node expected");
    return from_nodal(chart, metric, std::move(values));
}

TensorField pointwise(const Chart& chart, const MetricData& metric, const PointwiseMatrixFn& a)
{
    const Grid& grid = chart.grid();
    const int n = chart.intrinsic_dim();
    std::vector<Mat> comps(static_cast<std::size_t>(grid.size()));
    for (int node = 0; node < grid.size(); ++node) {
        const Vec p = chart.node_coords(node);
        const Mat v = a(as_span(p));
        comps[static_cast<std::size_t>(node)] = 0.5 * (v + v.transpose());
    }
    if (chart.mode() != DerivativeMode::Exact) return from_nodal(chart, metric, std::move(comps));

    std::vector<double> d(static_cast<std::size_t>(grid.size() * n * n * n), 0.0);
    for (int node = 0; node < grid.size(); ++node) {
        const Vec p = chart.node_coords(node);
        for (int k = 0; k < n; ++k) {
            const double delta = 1e-3 * grid.axis(k).spacing();
            auto shifted = [&](double s) {
                Vec q = p;
                q(k) += s * delta;
                return Mat(a(as_span(q)));
            };
            const Mat dk = (-shifted(2) + 8.0 * shifted(1) - 8.0 * shifted(-1) + shifted(-2)) / (12.0 * delta);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) d[at3(node, n, k, i, j)] = 0.5 * (dk(i, j) + dk(j, i));
        }
    }
    return {std::move(comps), std::move(d), metric};
}

TensorField scaled(const TensorField& a, double lambda, const MetricData& metric)
{
    std::vector<Mat> comps = a.components();
    for (Mat& c : comps) c *= lambda;
    std::vector<double> d = a.derivatives();
    for (double& v : d) v *= lambda;
    return {std::move(comps), std::move(d), metric};
}

TensorField sum(const TensorField& a, const TensorField& b, const MetricData& metric)
{
    if (a.size() != b.size() || a.dim() != b.dim()) throw std::invalid_argument("fields::sum: mismatched fields");
    std::vector<Mat> comps = a.components();
    for (std::size_t i = 0; i < comps.size(); ++i) comps[i] += b.components()[i];
    std::vector<double> d = a.derivatives();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += b.derivatives()[i];
    return {std::move(comps), std::move(d), metric};
}

}  // namespace fields

CovectorField divergence(const TensorField& a, const MetricData& metric)
{
    const int n = a.dim();
    CovectorField out;
    out.data.resize(static_cast<std::size_t>(a.size()));
    for (int node = 0; node < a.size(); ++node) {
        const Mat& gi = metric.g_inv[static_cast<std::size_t>(node)];
        const Mat& av = a(node);
        Vec w = Vec::Zero(n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int i = 0; i < n; ++i) {
                    double cov = a.derivative(node, k, i, j);
                    for (int l = 0; l < n; ++l)
                        cov -= metric.christoffel(node, l, k, i) * av(l, j) + metric.christoffel(node, l, k, j) * av(i, l);
                    w(j) += gi(k, i) * cov;
                }
        out.data[static_cast<std::size_t>(node)] = w;
    }
    return out;
}

NormalField contract_with_second_form(const TensorField& a, const SecondFundamentalFormField& ii,
                                      const MetricData& metric)
{
    NormalField out;
    out.data.resize(static_cast<std::size_t>(a.size()));
    for (int node = 0; node < a.size(); ++node) {
        const Mat& gi = metric.g_inv[static_cast<std::size_t>(node)];
        const Mat raised = gi * a(node) * gi;
        AmbientVec v(ii.m);
        for (int alpha = 0; alpha < ii.m; ++alpha) v(alpha) = (raised.cwiseProduct(ii.component(node, alpha))).sum();
        out.data[static_cast<std::size_t>(node)] = v;
    }
    return out;
}

Vec conormal_flux(const TensorField& a, const BoundarySample& boundary, const MetricData& metric)
{
    return metric.g_inv[static_cast<std::size_t>(boundary.node)] * (a(boundary.node) * boundary.conormal);
}

double conormal_flux_norm(const TensorField& a, const BoundarySample& boundary, const MetricData& metric)
{
    const Vec v = conormal_flux(a, boundary, metric);
    return std::sqrt(v.dot(metric.g[static_cast<std::size_t>(boundary.node)] * v));
}

std::vector<double> tensor_det(const TensorField& a, const MetricData& metric)
{
    std::vector<double> out(static_cast<std::size_t>(a.size()));
    for (int node = 0; node < a.size(); ++node)
        out[static_cast<std::size_t>(node)] = det(Mat(metric.g_inv[static_cast<std::size_t>(node)] * a(node)));
    return out;
}

Mat cofactor_tensor(const Mat& s, const Mat& g)
{
    const Mat s_inv = s.inverse();
    const double d = det(s) / det(g);
    const Mat t = d * g * s_inv * g;
    return 0.5 * (t + t.transpose());
}

TensorField cofactor_tensor(const TensorField& s, const MetricData& metric)
{
    const int n = s.dim();
    std::vector<Mat> comps(static_cast<std::size_t>(s.size()));
    std::vector<double> d(static_cast<std::size_t>(s.size() * n * n * n), 0.0);
    for (int node = 0; node < s.size(); ++node) {
        const Mat& g = metric.g[static_cast<std::size_t>(node)];
        const Mat& gi = metric.g_inv[static_cast<std::size_t>(node)];
        const Mat s_inv = s(node).inverse();
        const double dt = det(Mat(gi * s(node)));
        comps[static_cast<std::size_t>(node)] = cofactor_tensor(s(node), g);
        for (int k = 0; k < n; ++k) {
            const Mat ds = s.derivative(node, k);
            Mat dg(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) dg(i, j) = metric.metric_derivative(node, k, i, j);
            const double ddt = dt * ((s_inv * ds).trace() - (gi * dg).trace());
            Mat dk = ddt * g * s_inv * g + dt * (dg * s_inv * g - g * s_inv * ds * s_inv * g + g * s_inv * dg);
            dk = 0.5 * (dk + dk.transpose());
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) d[at3(node, n, k, i, j)] = dk(i, j);
        }
    }
    return {std::move(comps), std::move(d), metric};
}

double scaling_factor(const SobolevReport& report)
{
    if (!(report.lhs() > 0.0) || !(report.rhs_integral > 0.0))
        throw std::domain_error("normalize_scaling: functionals must be positive");
    return std::pow(report.lhs() / (report.n * report.rhs_integral), report.n - 1);
}

std::pair<TensorField, double> normalize_scaling(const TensorField& a, const SobolevReport& report,
                                                 const MetricData& metric)
{
    const double lambda = scaling_factor(report);
    return {fields::scaled(a, lambda, metric), lambda};
}

}  // namespace msineq
