#include "msineq/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "msineq/error.hpp"

namespace msineq {

namespace {

int order_of(DerivativeMode mode) { return mode == DerivativeMode::CentralFD4 ? 4 : 2; }

constexpr double kRankTolerance = 1e-8;

// Reference node for frame alignment: one step back along the lowest axis
// that has room, so nodes form a sweep tree rooted at node 0.
int sweep_parent(const Grid& grid, int node)
{
    const auto idx = grid.multi_index(node);
    for (int a = 0; a < grid.dim(); ++a)
        if (idx[static_cast<std::size_t>(a)] > 0) return node - grid.stride(a);
    return -1;
}

}  // namespace

Chart::Chart(std::string name, std::vector<Axis> axes, int ambient_dim, JetMap immersion, DerivativeMode mode)
    : name_(std::move(name)),
      grid_(std::move(axes), order_of(mode), order_of(mode)),
      ambient_dim_(ambient_dim),
      immersion_(std::move(immersion)),
      mode_(mode)
{
    if (ambient_dim_ <= grid_.dim() || ambient_dim_ > kMaxAmbient)
        throw std::invalid_argument("Chart: ambient dimension must exceed the intrinsic dimension and be <= 8");
    if (!immersion_) throw std::invalid_argument("Chart: missing immersion");
}

bool Chart::has_boundary() const
{
    for (const Axis& ax : grid_.axes())
        if (ax.has_boundary_face(0) || ax.has_boundary_face(1)) return true;
    return false;
}

Vec Chart::node_coords(int node) const
{
    const auto idx = grid_.multi_index(node);
    Vec p(grid_.dim());
    for (int a = 0; a < grid_.dim(); ++a) p(a) = grid_.axis(a).coord(idx[static_cast<std::size_t>(a)]);
    return p;
}

std::vector<Jet> Chart::jets(std::span<const double> p) const
{
    std::vector<Jet> vars;
    vars.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) vars.push_back(Jet::variable(p[i], static_cast<int>(i)));
    auto out = immersion_(vars);
    if (static_cast<int>(out.size()) != ambient_dim_ - lifted_)
        throw std::logic_error("Chart: immersion returned the wrong number of coordinates");
    out.resize(static_cast<std::size_t>(ambient_dim_), Jet(0.0));
    return out;
}

AmbientVec Chart::position(std::span<const double> p) const
{
    std::vector<Jet> vars(p.begin(), p.end());
    const auto out = immersion_(vars);
    AmbientVec x = AmbientVec::Zero(ambient_dim_);
    for (std::size_t c = 0; c < out.size(); ++c) x(static_cast<Eigen::Index>(c)) = out[c].v;
    return x;
}

PointGeometry Chart::evaluate(std::span<const double> p) const
{
    const int n = intrinsic_dim();
    const int big_n = ambient_dim_;
    PointGeometry pg;
    pg.tangents.resize(big_n, n);
    pg.second.assign(static_cast<std::size_t>(n * n), AmbientVec::Zero(big_n));
    if (mode_ == DerivativeMode::Exact) {
        const auto out = jets(p);
        pg.position.resize(big_n);
        for (int c = 0; c < big_n; ++c) {
            const Jet& j = out[static_cast<std::size_t>(c)];
            pg.position(c) = j.v;
            for (int i = 0; i < n; ++i) {
                pg.tangents(c, i) = j.g(i);
                for (int k = 0; k < n; ++k) pg.second[static_cast<std::size_t>(i * n + k)](c) = j.h(i, k);
            }
        }
        return pg;
    }

    // Central differences of the immersion with the grid spacing as step.
    std::vector<double> q(p.begin(), p.end());
    auto at = [&](int a, double da, int b, double db) {
        q.assign(p.begin(), p.end());
        if (a >= 0) q[static_cast<std::size_t>(a)] += da;
        if (b >= 0) q[static_cast<std::size_t>(b)] += db;
        return position(q);
    };
    pg.position = position(p);
    const bool fourth = mode_ == DerivativeMode::CentralFD4;
    for (int a = 0; a < n; ++a) {
        const double h = grid_.axis(a).spacing();
        if (fourth) {
            pg.tangents.col(a) = (-at(a, 2 * h, -1, 0) + 8.0 * at(a, h, -1, 0) - 8.0 * at(a, -h, -1, 0)
                                  + at(a, -2 * h, -1, 0)) / (12.0 * h);
            pg.second[static_cast<std::size_t>(a * n + a)] =
                (-at(a, 2 * h, -1, 0) + 16.0 * at(a, h, -1, 0) - 30.0 * pg.position + 16.0 * at(a, -h, -1, 0)
                 - at(a, -2 * h, -1, 0)) / (12.0 * h * h);
        } else {
            pg.tangents.col(a) = (at(a, h, -1, 0) - at(a, -h, -1, 0)) / (2.0 * h);
            pg.second[static_cast<std::size_t>(a * n + a)] =
                (at(a, h, -1, 0) - 2.0 * pg.position + at(a, -h, -1, 0)) / (h * h);
        }
        for (int b = a + 1; b < n; ++b) {
            const double k = grid_.axis(b).spacing();
            const AmbientVec mixed =
                (at(a, h, b, k) - at(a, h, b, -k) - at(a, -h, b, k) + at(a, -h, b, -k)) / (4.0 * h * k);
            pg.second[static_cast<std::size_t>(a * n + b)] = mixed;
            pg.second[static_cast<std::size_t>(b * n + a)] = mixed;
        }
    }
    return pg;
}

Chart Chart::lifted() const
{
    Chart c = *this;
    c.ambient_dim_ = ambient_dim_ + 1;
    if (c.ambient_dim_ > kMaxAmbient) throw std::invalid_argument("lift_codimension: ambient dimension too large");
    c.lifted_ = lifted_ + 1;
    c.name_ = name_ + "+lift";
    return c;
}

AmbientVec MetricData::second_derivative(int node, int i, int j) const
{
    const std::size_t base = static_cast<std::size_t>(((node * n + i) * n + j) * ambient);
    return Eigen::Map<const Eigen::VectorXd>(second.data() + base, ambient);
}

MetricData induced_metric(const Chart& chart)
{
    const Grid& grid = chart.grid();
    const int n = chart.intrinsic_dim();
    const int big_n = chart.ambient_dim();
    const int count = grid.size();
    MetricData md;
    md.n = n;
    md.ambient = big_n;
    md.positions.resize(static_cast<std::size_t>(count));
    md.tangents.resize(static_cast<std::size_t>(count));
    md.second.assign(static_cast<std::size_t>(count * n * n * big_n), 0.0);

    auto store_second = [&](int node, int i, int j, const AmbientVec& v) {
        std::copy(v.data(), v.data() + big_n,
                  md.second.begin() + static_cast<std::ptrdiff_t>(((node * n + i) * n + j) * big_n));
    };

    if (chart.mode() == DerivativeMode::Exact) {
        for (int node = 0; node < count; ++node) {
            const Vec p = chart.node_coords(node);
            const PointGeometry pg = chart.evaluate(std::span<const double>(p.data(), static_cast<std::size_t>(n)));
            md.positions[static_cast<std::size_t>(node)] = pg.position;
            md.tangents[static_cast<std::size_t>(node)] = pg.tangents;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) store_second(node, i, j, pg.second[static_cast<std::size_t>(i * n + j)]);
        }
    } else {
        for (int node = 0; node < count; ++node) {
            const Vec p = chart.node_coords(node);
            md.positions[static_cast<std::size_t>(node)] =
                chart.position(std::span<const double>(p.data(), static_cast<std::size_t>(n)));
        }
        for (int node = 0; node < count; ++node) {
            AmbientFrame t(big_n, n);
            for (int a = 0; a < n; ++a) t.col(a) = grid.d1(md.positions, node, a);
            md.tangents[static_cast<std::size_t>(node)] = t;
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) {
                    const AmbientVec v = grid.d2(md.positions, node, i, j);
                    store_second(node, i, j, v);
                    store_second(node, j, i, v);
                }
        }
    }

    md.g.resize(static_cast<std::size_t>(count));
    md.g_inv.resize(static_cast<std::size_t>(count));
    md.sqrt_det_g.resize(static_cast<std::size_t>(count));
    for (int node = 0; node < count; ++node) {
        const AmbientFrame& t = md.tangents[static_cast<std::size_t>(node)];
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(t)};
        const double smin = svd.singularValues()(n - 1);
        if (!(smin > kRankTolerance)) {
            const Vec p = chart.node_coords(node);
            std::string where = chart.name() + " at (";
            for (int a = 0; a < n; ++a) where += (a ? ", " : "") + std::to_string(p(a));
            throw DegenerateImmersion(node, smin, where + ")");
        }
        Mat g = t.transpose() * t;
        g = 0.5 * (g + g.transpose()).eval();
        md.g[static_cast<std::size_t>(node)] = g;
        md.g_inv[static_cast<std::size_t>(node)] = g.inverse();
        md.sqrt_det_g[static_cast<std::size_t>(node)] = std::sqrt(g.determinant());
    }

    // Metric derivatives: from the immersion in exact mode, from the same grid
    // stencils used for tensor fields otherwise (so D g = 0 holds exactly).
    md.dg.assign(static_cast<std::size_t>(count * n * n * n), 0.0);
    for (int node = 0; node < count; ++node) {
        for (int k = 0; k < n; ++k) {
            Mat dk(n, n);
            if (chart.mode() == DerivativeMode::Exact) {
                const AmbientFrame& t = md.tangents[static_cast<std::size_t>(node)];
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        dk(i, j) = md.second_derivative(node, k, i).dot(t.col(j))
                                 + t.col(i).dot(md.second_derivative(node, k, j));
            } else {
                dk = grid.d1(md.g, node, k);
            }
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    md.dg[static_cast<std::size_t>(((node * n + k) * n + i) * n + j)] = dk(i, j);
        }
    }

    md.gamma.assign(static_cast<std::size_t>(count * n * n * n), 0.0);
    for (int node = 0; node < count; ++node) {
        const Mat& gi = md.g_inv[static_cast<std::size_t>(node)];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Vec lowered(n);
                for (int l = 0; l < n; ++l)
                    lowered(l) = 0.5 * (md.metric_derivative(node, i, j, l) + md.metric_derivative(node, j, i, l)
                                        - md.metric_derivative(node, l, i, j));
                const Vec raised = gi * lowered;
                for (int k = 0; k < n; ++k)
                    md.gamma[static_cast<std::size_t>(((node * n + k) * n + i) * n + j)] = raised(k);
            }
    }

    double mesh = 0.0;
    for (int node = 0; node < count; ++node)
        for (int a = 0; a < n; ++a)
            mesh = std::max(mesh, md.tangents[static_cast<std::size_t>(node)].col(a).norm() * grid.axis(a).spacing());
    md.mesh_size = mesh;
    return md;
}

NormalFrame normal_frame(const Chart& chart, const MetricData& metric)
{
    const Grid& grid = chart.grid();
    const int n = chart.intrinsic_dim();
    const int big_n = chart.ambient_dim();
    const int base = big_n - chart.lifted_dims();
    const int base_codim = base - n;
    NormalFrame frame;
    frame.basis.resize(static_cast<std::size_t>(grid.size()));

    std::vector<Eigen::MatrixXd> base_frames(static_cast<std::size_t>(grid.size()));
    for (int node = 0; node < grid.size(); ++node) {
        const Eigen::MatrixXd t = metric.tangents[static_cast<std::size_t>(node)].topRows(base);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(t, Eigen::ComputeFullU);
        if (svd.singularValues()(n - 1) <= kRankTolerance)
            throw DegenerateImmersion(node, svd.singularValues()(n - 1), chart.name() + " normal frame");
        const Eigen::MatrixXd normals = svd.matrixU().rightCols(base_codim);

        const int parent = sweep_parent(grid, node);
        const Eigen::MatrixXd reference = parent < 0
            ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(base, base).rightCols(base_codim))
            : base_frames[static_cast<std::size_t>(parent)];
        // Orthogonal Procrustes: rotate within the normal space to best match
        // the reference frame.
        const Eigen::MatrixXd overlap = normals.transpose() * reference;
        Eigen::JacobiSVD<Eigen::MatrixXd> psvd(overlap, Eigen::ComputeFullU | Eigen::ComputeFullV);
        base_frames[static_cast<std::size_t>(node)] = normals * (psvd.matrixU() * psvd.matrixV().transpose());
    }

    const int m = big_n - n;
    for (int node = 0; node < grid.size(); ++node) {
        AmbientFrame f = AmbientFrame::Zero(big_n, m);
        f.topLeftCorner(base, base_codim) = base_frames[static_cast<std::size_t>(node)];
        for (int extra = 0; extra < chart.lifted_dims(); ++extra) f(base + extra, base_codim + extra) = 1.0;
        frame.basis[static_cast<std::size_t>(node)] = f;
    }
    return frame;
}

NormalFrame normal_frame(const Chart& chart) { return normal_frame(chart, induced_metric(chart)); }

Mat SecondFundamentalFormField::component(int node, int alpha) const
{
    Mat c(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c(i, j) = (*this)(node, alpha, i, j);
    return c;
}

AmbientVec SecondFundamentalFormField::vector(int node, int i, int j, const NormalFrame& frame) const
{
    const AmbientFrame& b = frame.basis[static_cast<std::size_t>(node)];
    AmbientVec v = AmbientVec::Zero(b.rows());
    for (int alpha = 0; alpha < m; ++alpha) v += (*this)(node, alpha, i, j) * b.col(alpha);
    return v;
}

SecondFundamentalFormField second_fundamental_form(const Chart& chart, const MetricData& metric,
                                                   const NormalFrame& frame)
{
    const int n = chart.intrinsic_dim();
    const int m = frame.codimension();
    SecondFundamentalFormField ii;
    ii.n = n;
    ii.m = m;
    ii.data.assign(static_cast<std::size_t>(metric.size() * m * n * n), 0.0);
    for (int node = 0; node < metric.size(); ++node) {
        const AmbientFrame& nu = frame.basis[static_cast<std::size_t>(node)];
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                const AmbientVec f_ij = 0.5 * (metric.second_derivative(node, i, j) + metric.second_derivative(node, j, i));
                for (int alpha = 0; alpha < m; ++alpha) {
                    const double v = f_ij.dot(nu.col(alpha));
                    ii.data[static_cast<std::size_t>(((node * m + alpha) * n + i) * n + j)] = v;
                    ii.data[static_cast<std::size_t>(((node * m + alpha) * n + j) * n + i)] = v;
                }
            }
    }
    return ii;
}

std::vector<BoundarySample> boundary_samples(const Chart& chart, const MetricData& metric)
{
    const Grid& grid = chart.grid();
    const int n = chart.intrinsic_dim();
    std::vector<BoundarySample> out;
    for (int a = 0; a < n; ++a) {
        const Axis& ax = grid.axis(a);
        for (int side = 0; side < 2; ++side) {
            if (!ax.has_boundary_face(side)) continue;
            const int face_index = side == 0 ? 0 : ax.count - 1;
            const double outward = side == 0 ? -1.0 : 1.0;
            for (int node = 0; node < grid.size(); ++node) {
                const auto idx = grid.multi_index(node);
                if (idx[static_cast<std::size_t>(a)] != face_index) continue;
                double w = 1.0;
                for (int b = 0; b < n; ++b)
                    if (b != a) w *= grid.axis_weights(b)[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
                const Mat& gi = metric.g_inv[static_cast<std::size_t>(node)];
                const double gaa = gi(a, a);
                BoundarySample s;
                s.node = node;
                s.axis = a;
                s.side = side;
                s.point = metric.positions[static_cast<std::size_t>(node)];
                s.conormal = outward * gi.col(a) / std::sqrt(gaa);
                s.conormal_ambient = metric.tangents[static_cast<std::size_t>(node)] * s.conormal;
                const double sd = metric.sqrt_det_g[static_cast<std::size_t>(node)];
                s.weight = w * sd * std::sqrt(gaa);
                out.push_back(s);
            }
        }
    }
    return out;
}

double integrate(const Chart& chart, const MetricData& metric, std::span<const double> field)
{
    const auto& w = chart.grid().weights();
    if (field.size() != w.size()) throw std::invalid_argument("integrate: field does not match the chart grid");
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * field[i] * metric.sqrt_det_g[i];
    return acc;
}

Chart lift_codimension(const Chart& chart) { return chart.lifted(); }

Patch build_patch(const Chart& chart)
{
    Patch p;
    p.chart = chart;
    p.metric = induced_metric(chart);
    p.frame = normal_frame(chart, p.metric);
    p.second_form = second_fundamental_form(chart, p.metric, p.frame);
    p.boundary = boundary_samples(chart, p.metric);
    return p;
}

ScalarSamples differentiate_nodal(const Grid& grid, std::vector<double> values)
{
    const int n = grid.dim();
    ScalarSamples s;
    s.grad.resize(values.size());
    s.hess.resize(values.size());
    for (int node = 0; node < grid.size(); ++node) {
        Vec g(n);
        Mat h(n, n);
        for (int a = 0; a < n; ++a) {
            g(a) = grid.d1(values, node, a);
            for (int b = a; b < n; ++b) {
                h(a, b) = grid.d2(values, node, a, b);
                h(b, a) = h(a, b);
            }
        }
        s.grad[static_cast<std::size_t>(node)] = g;
        s.hess[static_cast<std::size_t>(node)] = h;
    }
    s.value = std::move(values);
    return s;
}

namespace {

ScalarSamples sample_with(const Chart& chart, const std::function<Jet(const Vec&, bool)>& eval)
{
    const Grid& grid = chart.grid();
    const int n = chart.intrinsic_dim();
    if (chart.mode() != DerivativeMode::Exact) {
        std::vector<double> values(static_cast<std::size_t>(grid.size()));
        for (int node = 0; node < grid.size(); ++node) values[static_cast<std::size_t>(node)] = eval(chart.node_coords(node), false).v;
        return differentiate_nodal(grid, std::move(values));
    }
    ScalarSamples s;
    s.value.resize(static_cast<std::size_t>(grid.size()));
    s.grad.resize(static_cast<std::size_t>(grid.size()));
    s.hess.resize(static_cast<std::size_t>(grid.size()));
    for (int node = 0; node < grid.size(); ++node) {
        const Jet j = eval(chart.node_coords(node), true);
        s.value[static_cast<std::size_t>(node)] = j.v;
        s.grad[static_cast<std::size_t>(node)] = j.g.head(n);
        s.hess[static_cast<std::size_t>(node)] = j.h.topLeftCorner(n, n);
    }
    return s;
}

}  // namespace

ScalarSamples sample_ambient_scalar(const Chart& chart, const JetScalar& f)
{
    return sample_with(chart, [&](const Vec& p, bool seeded) {
        const std::span<const double> ps(p.data(), static_cast<std::size_t>(p.size()));
        if (seeded) return f(chart.jets(ps));
        const AmbientVec x = chart.position(ps);
        std::vector<Jet> xs(x.data(), x.data() + x.size());
        return f(xs);
    });
}

ScalarSamples sample_chart_scalar(const Chart& chart, const JetScalar& f)
{
    return sample_with(chart, [&](const Vec& p, bool seeded) {
        if (seeded) return f(seed_variables(p));
        std::vector<Jet> xs(p.data(), p.data() + p.size());
        return f(xs);
    });
}

Mat covariant_hessian(const MetricData& metric, int node, const Vec& grad, const Mat& hess)
{
    const int n = metric.n;
    Mat h = hess;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) h(i, j) -= metric.christoffel(node, k, i, j) * grad(k);
    return 0.5 * (h + h.transpose());
}

Mat orthonormalize(const Mat& m, const Mat& g)
{
    const Eigen::LLT<Mat> llt(g);
    const Mat lower = llt.matrixL();
    Mat x = lower.triangularView<Eigen::Lower>().solve(m);
    x = lower.triangularView<Eigen::Lower>().solve(x.transpose().eval());
    return 0.5 * (x + x.transpose());
}

}  // namespace msineq
