#include "msineq/grid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msineq {

double Axis::spacing() const
{
    if (periodic) return (hi - lo) / count;
    double cells = count - 1.0;
    if (low == AxisEnd::Cap) cells += 0.5;
    if (high == AxisEnd::Cap) cells += 0.5;
    return (hi - lo) / cells;
}

double Axis::coord(int i) const
{
    const double offset = (!periodic && low == AxisEnd::Cap) ? 0.5 : 0.0;
    return lo + (i + offset) * spacing();
}

bool Axis::has_boundary_face(int side) const
{
    if (periodic) return false;
    return (side == 0 ? low : high) == AxisEnd::Boundary;
}

std::vector<double> fornberg_weights(double x0, std::span<const double> xs, int order)
{
    const int n = static_cast<int>(xs.size()) - 1;
    if (n < order) throw std::invalid_argument("fornberg_weights: too few points for derivative order");
    // c[j][k]: weight of point j for derivative k
    std::vector<std::vector<double>> c(xs.size(), std::vector<double>(static_cast<std::size_t>(order) + 1, 0.0));
    double c1 = 1.0;
    double c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = xs[static_cast<std::size_t>(i)] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(j)];
            c2 *= c3;
            auto& ci = c[static_cast<std::size_t>(i)];
            auto& cj = c[static_cast<std::size_t>(j)];
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    ci[static_cast<std::size_t>(k)] =
                        c1 * (k * c[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(k - 1)]
                              - c5 * c[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(k)]) / c2;
                ci[0] = -c1 * c5 * c[static_cast<std::size_t>(i - 1)][0] / c2;
            }
            for (int k = mn; k >= 1; --k)
                cj[static_cast<std::size_t>(k)] =
                    (c4 * cj[static_cast<std::size_t>(k)] - k * cj[static_cast<std::size_t>(k - 1)]) / c3;
            cj[0] = c4 * cj[0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j) w[j] = c[j][static_cast<std::size_t>(order)];
    return w;
}

namespace {

Stencil make_stencil(int i, int count, bool periodic, int deriv, int order, double h)
{
    // Centered stencil of width order+1 when it fits, otherwise a shifted
    // window (one point wider for the second derivative to keep the order).
    const int half = order / 2;
    int width = order + 1;
    int start = i - half;
    if (!periodic && (start < 0 || start + width > count)) {
        if (deriv == 2) width = order + 2;
        width = std::min(width, count);
        start = std::clamp(i - half, 0, count - width);
    }
    Stencil st;
    std::vector<double> xs;
    for (int k = 0; k < width; ++k) {
        st.offsets.push_back(start + k - i);
        xs.push_back(static_cast<double>(start + k - i));
    }
    st.weights = fornberg_weights(0.0, xs, deriv);
    const double scale = std::pow(h, deriv);
    for (double& w : st.weights) w /= scale;
    return st;
}

// Integral over [0, h/2] of F vanishing at 0, from nodes at h/2, 3h/2, ...
std::vector<double> cap_weights(double h, int points)
{
    Eigen::MatrixXd v(points, points);
    Eigen::VectorXd rhs(points);
    for (int j = 0; j < points; ++j) {
        const int power = j + 1;
        for (int k = 0; k < points; ++k) v(j, k) = std::pow((k + 0.5) * h, power);
        rhs(j) = std::pow(0.5 * h, power + 1) / (power + 1);
    }
    const Eigen::VectorXd w = v.colPivHouseholderQr().solve(rhs);
    return {w.data(), w.data() + w.size()};
}

std::vector<double> axis_quadrature(const Axis& ax, int order)
{
    const int n = ax.count;
    const double h = ax.spacing();
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    if (ax.periodic) {
        std::fill(w.begin(), w.end(), h);
        return w;
    }
    const int intervals = n - 1;
    if (order >= 4 && intervals >= 2) {
        // composite Simpson, finishing with Simpson's 3/8 rule if the interval
        // count is odd
        const int simpson_end = (intervals % 2 == 0) ? intervals : intervals - 3;
        for (int i = 0; i + 2 <= simpson_end; i += 2) {
            w[static_cast<std::size_t>(i)] += h / 3.0;
            w[static_cast<std::size_t>(i + 1)] += 4.0 * h / 3.0;
            w[static_cast<std::size_t>(i + 2)] += h / 3.0;
        }
        if (simpson_end != intervals) {
            const int s = simpson_end;
            w[static_cast<std::size_t>(s)] += 3.0 * h / 8.0;
            w[static_cast<std::size_t>(s + 1)] += 9.0 * h / 8.0;
            w[static_cast<std::size_t>(s + 2)] += 9.0 * h / 8.0;
            w[static_cast<std::size_t>(s + 3)] += 3.0 * h / 8.0;
        }
    } else {
        for (int i = 0; i < intervals; ++i) {
            w[static_cast<std::size_t>(i)] += 0.5 * h;
            w[static_cast<std::size_t>(i + 1)] += 0.5 * h;
        }
    }
    const int cap_points = std::min(n, order >= 4 ? 3 : 1);
    if (ax.low == AxisEnd::Cap) {
        const auto cw = cap_weights(h, cap_points);
        for (int k = 0; k < cap_points; ++k) w[static_cast<std::size_t>(k)] += cw[static_cast<std::size_t>(k)];
    }
    if (ax.high == AxisEnd::Cap) {
        const auto cw = cap_weights(h, cap_points);
        for (int k = 0; k < cap_points; ++k) w[static_cast<std::size_t>(n - 1 - k)] += cw[static_cast<std::size_t>(k)];
    }
    return w;
}

}  // namespace

Grid::Grid(std::vector<Axis> axes, int stencil_order, int quadrature_order)
    : axes_(std::move(axes)), stencil_order_(stencil_order), quadrature_order_(quadrature_order)
{
    if (axes_.empty() || axes_.size() > static_cast<std::size_t>(kMaxIntrinsic))
        throw std::invalid_argument("Grid: between 1 and 4 axes are supported");
    if (stencil_order_ != 2 && stencil_order_ != 4) throw std::invalid_argument("Grid: stencil order must be 2 or 4");
    size_ = 1;
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        const Axis& ax = axes_[a];
        if (ax.count < 3) throw std::invalid_argument("Grid: resolution must be at least 3 per axis");
        if (!(ax.hi > ax.lo)) throw std::invalid_argument("Grid: empty parameter interval");
        strides_[a] = size_;
        size_ *= ax.count;
    }

    axis_weights_.reserve(axes_.size());
    first_.resize(axes_.size());
    second_.resize(axes_.size());
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        const Axis& ax = axes_[a];
        axis_weights_.push_back(axis_quadrature(ax, quadrature_order_));
        for (int i = 0; i < ax.count; ++i) {
            first_[a].push_back(make_stencil(i, ax.count, ax.periodic, 1, stencil_order_, ax.spacing()));
            second_[a].push_back(make_stencil(i, ax.count, ax.periodic, 2, stencil_order_, ax.spacing()));
        }
    }

    weights_.assign(static_cast<std::size_t>(size_), 1.0);
    for (int node = 0; node < size_; ++node) {
        const auto idx = multi_index(node);
        double w = 1.0;
        for (std::size_t a = 0; a < axes_.size(); ++a) w *= axis_weights_[a][static_cast<std::size_t>(idx[a])];
        weights_[static_cast<std::size_t>(node)] = w;
    }
}

std::array<int, kMaxIntrinsic> Grid::multi_index(int node) const
{
    std::array<int, kMaxIntrinsic> idx{};
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        idx[a] = node % axes_[a].count;
        node /= axes_[a].count;
    }
    return idx;
}

int Grid::node(const std::array<int, kMaxIntrinsic>& idx) const
{
    int n = 0;
    for (std::size_t a = 0; a < axes_.size(); ++a) n += idx[a] * strides_[a];
    return n;
}

int Grid::shifted(int node, int a, int offset) const
{
    const Axis& ax = axes_[static_cast<std::size_t>(a)];
    const int i = (node / strides_[static_cast<std::size_t>(a)]) % ax.count;
    int j = i + offset;
    if (ax.periodic) {
        j = ((j % ax.count) + ax.count) % ax.count;
    } else if (j < 0 || j >= ax.count) {
        return -1;
    }
    return node + (j - i) * strides_[static_cast<std::size_t>(a)];
}

const Stencil& Grid::first_stencil(int a, int i) const
{
    return first_[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)];
}

const Stencil& Grid::second_stencil(int a, int i) const
{
    return second_[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)];
}

CellLocation Grid::locate(std::span<const double> p) const
{
    std::array<int, kMaxIntrinsic> lower{};
    std::array<int, kMaxIntrinsic> upper{};
    std::array<double, kMaxIntrinsic> t{};
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        const Axis& ax = axes_[a];
        const double h = ax.spacing();
        double u = (p[a] - ax.coord(0)) / h;
        if (ax.periodic) {
            u = std::fmod(u, static_cast<double>(ax.count));
            if (u < 0) u += ax.count;
            int c = static_cast<int>(std::floor(u));
            c = std::min(c, ax.count - 1);
            lower[a] = c;
            upper[a] = (c + 1) % ax.count;
            t[a] = u - c;
        } else {
            int c = static_cast<int>(std::floor(u));
            c = std::clamp(c, 0, ax.count - 2);
            lower[a] = c;
            upper[a] = c + 1;
            t[a] = std::clamp(u - c, 0.0, 1.0);
        }
    }
    CellLocation loc;
    const int d = dim();
    loc.count = 1 << d;
    for (int corner = 0; corner < loc.count; ++corner) {
        std::array<int, kMaxIntrinsic> idx{};
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
            const bool hi = (corner >> a) & 1;
            idx[static_cast<std::size_t>(a)] = hi ? upper[static_cast<std::size_t>(a)] : lower[static_cast<std::size_t>(a)];
            w *= hi ? t[static_cast<std::size_t>(a)] : 1.0 - t[static_cast<std::size_t>(a)];
        }
        loc.nodes[static_cast<std::size_t>(corner)] = node(idx);
        loc.weights[static_cast<std::size_t>(corner)] = w;
    }
    return loc;
}

bool Grid::on_boundary(int node) const
{
    const auto idx = multi_index(node);
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        const Axis& ax = axes_[a];
        if (idx[a] == 0 && ax.has_boundary_face(0)) return true;
        if (idx[a] == ax.count - 1 && ax.has_boundary_face(1)) return true;
    }
    return false;
}

}  // namespace msineq
