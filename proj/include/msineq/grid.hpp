#ifndef MSINEQ_GRID_HPP
#define MSINEQ_GRID_HPP

// Tensor-product parameter grids: node layout, finite-difference stencils,
// quadrature weights and multilinear interpolation.

#include <array>
#include <span>
#include <vector>

#include "msineq/jet.hpp"

namespace msineq {

/// What sits at one end of a non-periodic axis.
///
/// Boundary: the end node lies on the chart boundary (a face of dSigma).
/// Cap: the immersion degenerates at the end (polar axis of a disk, the poles
/// of a sphere). Nodes are offset by half a cell so no node sits on the
/// degenerate point, and the quadrature adds the half-cell cap assuming the
/// volume density vanishes linearly there.
enum class AxisEnd { Boundary, Cap };

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    int count = 3;
    bool periodic = false;
    AxisEnd low = AxisEnd::Boundary;
    AxisEnd high = AxisEnd::Boundary;

    static Axis interval(double lo, double hi, int count) { return {lo, hi, count, false}; }
    static Axis periodic_axis(double lo, double hi, int count) { return {lo, hi, count, true}; }
    static Axis capped(double lo, double hi, int count, AxisEnd low, AxisEnd high)
    {
        return {lo, hi, count, false, low, high};
    }

    [[nodiscard]] double spacing() const;
    [[nodiscard]] double coord(int i) const;
    [[nodiscard]] bool has_boundary_face(int side) const;  // side: 0 = low, 1 = high
};

/// Finite-difference stencil, weights already scaled by the spacing.
struct Stencil {
    std::vector<int> offsets;
    std::vector<double> weights;
};

/// Multilinear interpolation data for a point inside the grid.
struct CellLocation {
    std::array<int, 16> nodes{};
    std::array<double, 16> weights{};
    int count = 0;
};

/// Fornberg's recursion: weights for the `order`-th derivative at x0 using
/// sample points xs.
std::vector<double> fornberg_weights(double x0, std::span<const double> xs, int order);

class Grid {
public:
    Grid() = default;
    /// stencil_order: accuracy of the FD stencils (2 or 4);
    /// quadrature_order: 2 = composite trapezoid, 4 = composite Simpson.
    Grid(std::vector<Axis> axes, int stencil_order, int quadrature_order);

    [[nodiscard]] int dim() const { return static_cast<int>(axes_.size()); }
    [[nodiscard]] int size() const { return size_; }
    [[nodiscard]] const Axis& axis(int a) const { return axes_[static_cast<std::size_t>(a)]; }
    [[nodiscard]] const std::vector<Axis>& axes() const { return axes_; }
    [[nodiscard]] int stencil_order() const { return stencil_order_; }
    [[nodiscard]] int quadrature_order() const { return quadrature_order_; }

    [[nodiscard]] std::array<int, kMaxIntrinsic> multi_index(int node) const;
    [[nodiscard]] int node(const std::array<int, kMaxIntrinsic>& idx) const;
    [[nodiscard]] int stride(int a) const { return strides_[static_cast<std::size_t>(a)]; }
    /// Node shifted by `offset` along axis a (wrapping on periodic axes), or -1.
    [[nodiscard]] int shifted(int node, int a, int offset) const;

    /// Parameter-space quadrature weight of each node (multiply by the
    /// volume density to integrate on the submanifold).
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
    /// 1D weights of one axis.
    [[nodiscard]] const std::vector<double>& axis_weights(int a) const { return axis_weights_[static_cast<std::size_t>(a)]; }

    [[nodiscard]] const Stencil& first_stencil(int a, int i) const;
    [[nodiscard]] const Stencil& second_stencil(int a, int i) const;

    /// First derivative along axis a of a nodal field at `node`.
    template <typename Field>
    typename Field::value_type d1(const Field& f, int node, int a) const
    {
        const int i = multi_index(node)[static_cast<std::size_t>(a)];
        const Stencil& st = first_stencil(a, i);
        typename Field::value_type acc = st.weights[0] * f[static_cast<std::size_t>(shifted(node, a, st.offsets[0]))];
        for (std::size_t k = 1; k < st.offsets.size(); ++k)
            acc += st.weights[k] * f[static_cast<std::size_t>(shifted(node, a, st.offsets[k]))];
        return acc;
    }

    /// Second derivative along axes (a, b); mixed derivatives are products of
    /// first-derivative stencils.
    template <typename Field>
    typename Field::value_type d2(const Field& f, int node, int a, int b) const
    {
        if (a == b) {
            const int i = multi_index(node)[static_cast<std::size_t>(a)];
            const Stencil& st = second_stencil(a, i);
            typename Field::value_type acc = st.weights[0] * f[static_cast<std::size_t>(shifted(node, a, st.offsets[0]))];
            for (std::size_t k = 1; k < st.offsets.size(); ++k)
                acc += st.weights[k] * f[static_cast<std::size_t>(shifted(node, a, st.offsets[k]))];
            return acc;
        }
        const int i = multi_index(node)[static_cast<std::size_t>(a)];
        const Stencil& st = first_stencil(a, i);
        typename Field::value_type acc = st.weights[0] * d1(f, shifted(node, a, st.offsets[0]), b);
        for (std::size_t k = 1; k < st.offsets.size(); ++k)
            acc += st.weights[k] * d1(f, shifted(node, a, st.offsets[k]), b);
        return acc;
    }

    /// Cell containing parameter point p with multilinear weights. Points
    /// outside the node hull (cap regions, slight overshoot) are clamped.
    [[nodiscard]] CellLocation locate(std::span<const double> p) const;

    /// True if the node lies on a boundary face of the parameter box.
    [[nodiscard]] bool on_boundary(int node) const;

private:
    std::vector<Axis> axes_;
    int stencil_order_ = 2;
    int quadrature_order_ = 2;
    int size_ = 0;
    std::array<int, kMaxIntrinsic> strides_{};
    std::vector<double> weights_;
    std::vector<std::vector<double>> axis_weights_;
    std::vector<std::vector<Stencil>> first_;
    std::vector<std::vector<Stencil>> second_;
};

}  // namespace msineq

#endif  // MSINEQ_GRID_HPP
