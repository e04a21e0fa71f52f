#ifndef MSINEQ_GEOMETRY_HPP
#define MSINEQ_GEOMETRY_HPP

// Parametric charts of compact submanifolds and their first/second-order data.

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "msineq/grid.hpp"
#include "msineq/jet.hpp"

namespace msineq {

inline constexpr int kMaxAmbient = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxIntrinsic, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxIntrinsic, kMaxIntrinsic>;
using AmbientVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAmbient, 1>;
/// Ambient-by-k block of column vectors (tangent or normal frames).
using AmbientFrame = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxAmbient>;

enum class DerivativeMode { Exact, CentralFD2, CentralFD4 };

/// Immersion data at one parameter point.
struct PointGeometry {
    AmbientVec position;
    AmbientFrame tangents;               ///< column i = dF/dx^i
    std::vector<AmbientVec> second;      ///< row-major n*n, d^2F/dx^i dx^j
};

/// A parametric patch F: box -> R^N of an n-submanifold.
class Chart {
public:
    Chart() = default;
    Chart(std::string name, std::vector<Axis> axes, int ambient_dim, JetMap immersion,
          DerivativeMode mode = DerivativeMode::Exact);

    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] int intrinsic_dim() const { return grid_.dim(); }
    [[nodiscard]] int ambient_dim() const { return ambient_dim_; }
    [[nodiscard]] int codimension() const { return ambient_dim_ - intrinsic_dim(); }
    [[nodiscard]] const Grid& grid() const { return grid_; }
    [[nodiscard]] DerivativeMode mode() const { return mode_; }
    /// Number of trailing zero coordinates appended by lift_codimension.
    [[nodiscard]] int lifted_dims() const { return lifted_; }
    [[nodiscard]] bool has_boundary() const;
    [[nodiscard]] int resolution() const { return grid_.axis(0).count; }

    [[nodiscard]] Vec node_coords(int node) const;
    [[nodiscard]] AmbientVec position(std::span<const double> p) const;
    /// Position, tangents and second derivatives at an arbitrary parameter
    /// point: jets in exact mode, central differences of the immersion with
    /// step = grid spacing otherwise.
    [[nodiscard]] PointGeometry evaluate(std::span<const double> p) const;
    /// Raw jets of the immersion at p (always exact).
    [[nodiscard]] std::vector<Jet> jets(std::span<const double> p) const;

    [[nodiscard]] Chart lifted() const;

private:
    std::string name_;
    Grid grid_;
    int ambient_dim_ = 0;
    JetMap immersion_;
    DerivativeMode mode_ = DerivativeMode::Exact;
    int lifted_ = 0;
};

/// First fundamental form and its derivatives at every node.
struct MetricData {
    int n = 0;
    int ambient = 0;
    std::vector<AmbientVec> positions;
    std::vector<AmbientFrame> tangents;
    std::vector<double> second;  ///< node * n*n*N, d^2F/dx^i dx^j
    std::vector<Mat> g;
    std::vector<Mat> g_inv;
    std::vector<double> sqrt_det_g;
    std::vector<double> dg;     ///< node * n^3, index (k, i, j) = d_k g_ij
    std::vector<double> gamma;  ///< node * n^3, index (k, i, j) = Gamma^k_ij
    double mesh_size = 0.0;     ///< max ambient length of a grid edge

    [[nodiscard]] double metric_derivative(int node, int k, int i, int j) const
    {
        return dg[static_cast<std::size_t>(((node * n + k) * n + i) * n + j)];
    }
    [[nodiscard]] double christoffel(int node, int k, int i, int j) const
    {
        return gamma[static_cast<std::size_t>(((node * n + k) * n + i) * n + j)];
    }
    [[nodiscard]] AmbientVec second_derivative(int node, int i, int j) const;
    [[nodiscard]] int size() const { return static_cast<int>(g.size()); }
};

/// Orthonormal basis of the normal space at every node (ambient x m).
struct NormalFrame {
    std::vector<AmbientFrame> basis;
    [[nodiscard]] int codimension() const { return basis.empty() ? 0 : static_cast<int>(basis.front().cols()); }
};

/// Components II^alpha_ij = <d^2F/dx^i dx^j, nu_alpha>.
struct SecondFundamentalFormField {
    int n = 0;
    int m = 0;
    std::vector<double> data;  ///< node * m*n*n

    [[nodiscard]] double operator()(int node, int alpha, int i, int j) const
    {
        return data[static_cast<std::size_t>(((node * m + alpha) * n + i) * n + j)];
    }
    [[nodiscard]] Mat component(int node, int alpha) const;
    /// II_ij as an ambient (normal) vector.
    [[nodiscard]] AmbientVec vector(int node, int i, int j, const NormalFrame& frame) const;
};

struct BoundarySample {
    int node = -1;
    int axis = 0;
    int side = 0;                ///< 0 = low face, 1 = high face
    AmbientVec point;
    Vec conormal;                ///< chart components, |nu|_g = 1
    AmbientVec conormal_ambient;
    double weight = 0.0;         ///< boundary measure weight
};

[[nodiscard]] MetricData induced_metric(const Chart& chart);
[[nodiscard]] NormalFrame normal_frame(const Chart& chart, const MetricData& metric);
[[nodiscard]] NormalFrame normal_frame(const Chart& chart);
[[nodiscard]] SecondFundamentalFormField second_fundamental_form(const Chart& chart, const MetricData& metric,
                                                                 const NormalFrame& frame);
[[nodiscard]] std::vector<BoundarySample> boundary_samples(const Chart& chart, const MetricData& metric);
[[nodiscard]] double integrate(const Chart& chart, const MetricData& metric, std::span<const double> field);
[[nodiscard]] Chart lift_codimension(const Chart& chart);

/// Everything derived from one chart, built once and shared read-only.
struct Patch {
    Chart chart;
    MetricData metric;
    NormalFrame frame;
    SecondFundamentalFormField second_form;
    std::vector<BoundarySample> boundary;
};

[[nodiscard]] Patch build_patch(const Chart& chart);

/// Values and chart-coordinate derivatives of a scalar field at every node.
struct ScalarSamples {
    std::vector<double> value;
    std::vector<Vec> grad;  ///< d_i f
    std::vector<Mat> hess;  ///< d_i d_j f (partials, not covariant)
};

/// Sample f(F(x)) for f given on ambient coordinates. Exact mode composes the
/// jets; FD modes difference the nodal values on the grid.
[[nodiscard]] ScalarSamples sample_ambient_scalar(const Chart& chart, const JetScalar& f);
/// Same for f given directly on chart coordinates.
[[nodiscard]] ScalarSamples sample_chart_scalar(const Chart& chart, const JetScalar& f);
/// Grid-FD derivatives of nodal values.
[[nodiscard]] ScalarSamples differentiate_nodal(const Grid& grid, std::vector<double> values);

/// Covariant Hessian D^2 f_ij = d_i d_j f - Gamma^k_ij d_k f at a node.
[[nodiscard]] Mat covariant_hessian(const MetricData& metric, int node, const Vec& grad, const Mat& hess);

/// Symmetric matrix L^{-1} M L^{-T} with g = L L^T: the (1,1)-tensor g^{-1}M
/// written in an orthonormal frame, so eigenvalues and determinant agree.
[[nodiscard]] Mat orthonormalize(const Mat& m, const Mat& g);

/// Multilinear interpolation of a nodal field at parameter point p.
template <typename T>
T interpolate(const Grid& grid, const std::vector<T>& field, std::span<const double> p)
{
    const CellLocation loc = grid.locate(p);
    T acc = loc.weights[0] * field[static_cast<std::size_t>(loc.nodes[0])];
    for (int c = 1; c < loc.count; ++c)
        acc += loc.weights[static_cast<std::size_t>(c)] * field[static_cast<std::size_t>(loc.nodes[static_cast<std::size_t>(c)])];
    return acc;
}

}  // namespace msineq

#endif  // MSINEQ_GEOMETRY_HPP
