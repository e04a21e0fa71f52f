#ifndef MSINEQ_TENSORFIELD_HPP
#define MSINEQ_TENSORFIELD_HPP

// Symmetric positive-definite (0,2)-tensor fields on a chart and the derived
// quantities entering the Sobolev functional.

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "msineq/geometry.hpp"
#include "msineq/linalg.hpp"
#include "msineq/polynomial.hpp"
#include "msineq/report.hpp"

namespace msineq {

/// Nodal components A_ij (lower indices, chart coordinates) together with
/// their partial derivatives d_k A_ij.
class TensorField {
public:
    TensorField() = default;
    /// Throws SpdViolation unless g^{-1}A is uniformly positive at every node,
    /// std::invalid_argument for n < 2 or mismatched sizes.
    TensorField(std::vector<Mat> components, std::vector<double> derivatives, const MetricData& metric);

    [[nodiscard]] int dim() const { return n_; }
    [[nodiscard]] int size() const { return static_cast<int>(components_.size()); }
    [[nodiscard]] const Mat& operator()(int node) const { return components_[static_cast<std::size_t>(node)]; }
    [[nodiscard]] double derivative(int node, int k, int i, int j) const
    {
        return derivatives_[static_cast<std::size_t>(((node * n_ + k) * n_ + i) * n_ + j)];
    }
    [[nodiscard]] Mat derivative(int node, int k) const;
    [[nodiscard]] const std::vector<Mat>& components() const { return components_; }
    [[nodiscard]] const std::vector<double>& derivatives() const { return derivatives_; }
    /// Minimum over nodes of the smallest eigenvalue of g^{-1}A.
    [[nodiscard]] const SpdCertificate& ellipticity() const { return ellipticity_; }

private:
    int n_ = 0;
    std::vector<Mat> components_;
    std::vector<double> derivatives_;
    SpdCertificate ellipticity_;
};

/// Covector field omega_j per node.
struct CovectorField {
    std::vector<Vec> data;
    /// |omega|_g = sqrt(g^{ij} omega_i omega_j)
    [[nodiscard]] double norm(const MetricData& metric, int node) const;
};

/// Normal vector field as components in the normal frame.
struct NormalField {
    std::vector<AmbientVec> data;
    [[nodiscard]] double norm(int node) const { return data[static_cast<std::size_t>(node)].norm(); }
};

/// Ambient symmetric matrix field M(X), returned row-major (N*N entries).
using AmbientMatrixFn = std::function<std::vector<Jet>(std::span<const Jet>)>;
/// Chart-coordinate matrix field evaluated at an arbitrary parameter point.
using PointwiseMatrixFn = std::function<Mat(std::span<const double>)>;

namespace fields {

/// A = g.
TensorField metric(const Chart& chart, const MetricData& metric);
/// A = f g, f given on ambient coordinates.
TensorField conformal(const Chart& chart, const MetricData& metric, const JetScalar& f);
/// A = diag(p_1(x), ..., p_n(x)) in chart coordinates.
TensorField diagonal(const Chart& chart, const MetricData& metric, const std::vector<Polynomial>& entries);
/// A_ij = <dF/dx^i, M(F) dF/dx^j>: an ambient matrix field restricted to the tangent space.
TensorField ambient(const Chart& chart, const MetricData& metric, const AmbientMatrixFn& m);
/// Nodal values supplied directly; derivatives by grid differences.
TensorField tabulated(const Chart& chart, const MetricData& metric, std::vector<Mat> values);
/// Field known only pointwise. Exact mode differentiates with a fourth-order
/// central difference at a step far below the grid spacing, FD modes use the grid.
TensorField pointwise(const Chart& chart, const MetricData& metric, const PointwiseMatrixFn& a);
TensorField scaled(const TensorField& a, double lambda, const MetricData& metric);
TensorField sum(const TensorField& a, const TensorField& b, const MetricData& metric);

}  // namespace fields

/// div A_j = g^{ki}(d_k A_ij - Gamma^l_ki A_lj - Gamma^l_kj A_il).
[[nodiscard]] CovectorField divergence(const TensorField& a, const MetricData& metric);
/// <A, II>^alpha = g^{ik} g^{jl} A_ij II^alpha_kl.
[[nodiscard]] NormalField contract_with_second_form(const TensorField& a, const SecondFundamentalFormField& ii,
                                                    const MetricData& metric);
/// |A(nu)|_g with (A(nu))^j = g^{jl} A_lk nu^k.
[[nodiscard]] double conormal_flux_norm(const TensorField& a, const BoundarySample& boundary, const MetricData& metric);
/// The tangent vector A(nu) in chart components.
[[nodiscard]] Vec conormal_flux(const TensorField& a, const BoundarySample& boundary, const MetricData& metric);
/// det(g^{-1} A) per node.
[[nodiscard]] std::vector<double> tensor_det(const TensorField& a, const MetricData& metric);
/// T = det(g^{-1}S) g S^{-1} g, so that g^{kl} T_ik S_lj = det(S) g_ij.
[[nodiscard]] TensorField cofactor_tensor(const TensorField& s, const MetricData& metric);
/// Pointwise version of the same formula.
[[nodiscard]] Mat cofactor_tensor(const Mat& s, const Mat& g);

/// lambda = (LHS / (n * integral (det A)^(1/(n-1))))^(n-1).
[[nodiscard]] double scaling_factor(const SobolevReport& report);
/// Rescale A so that the left-hand side equals n * integral (det A)^(1/(n-1)).
[[nodiscard]] std::pair<TensorField, double> normalize_scaling(const TensorField& a, const SobolevReport& report,
                                                               const MetricData& metric);

}  // namespace msineq

#endif  // MSINEQ_TENSORFIELD_HPP
