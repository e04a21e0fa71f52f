#ifndef MSINEQ_LINALG_HPP
#define MSINEQ_LINALG_HPP

// Dense symmetric-matrix utilities shared by every other module.
//
// Everything here is a pure function templated on the Eigen expression type,
// so fixed-size, dynamic and bounded-size matrices all work and no state is
// shared between calls.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace msineq {

/// Default absolute tolerance on eigenvalues for SPD / PSD checks.
inline constexpr double kPsdTolerance = 1e-9;

/// A square matrix that is symmetric by construction.
///
/// The input is symmetrized as (M + M^T)/2, so entries(i,j) == entries(j,i)
/// holds exactly afterwards.
template <typename Scalar = double, int MaxDim = Eigen::Dynamic>
class SymMatrix {
public:
    using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, MaxDim, MaxDim>;

    SymMatrix() = default;

    template <typename Derived>
    explicit SymMatrix(const Eigen::MatrixBase<Derived>& m)
    {
        if (m.rows() != m.cols() || m.rows() < 1)
            throw std::invalid_argument("SymMatrix: expected a non-empty square matrix");
        entries_ = (m + m.transpose()) / Scalar(2);
    }

    static SymMatrix identity(Eigen::Index n) { return SymMatrix(Storage::Identity(n, n)); }

    [[nodiscard]] Eigen::Index dim() const { return entries_.rows(); }
    [[nodiscard]] const Storage& matrix() const { return entries_; }
    [[nodiscard]] Scalar operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

private:
    Storage entries_;
};

/// Result of an SPD test: valid iff min_eigenvalue >= tolerance.
struct SpdCertificate {
    double min_eigenvalue = 0.0;
    double tolerance = kPsdTolerance;

    [[nodiscard]] bool valid() const { return min_eigenvalue >= tolerance; }
};

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what)
{
    if (m.rows() != m.cols() || m.rows() < 1)
        throw std::invalid_argument(std::string(what) + ": expected a non-empty square matrix");
}

}  // namespace detail

/// Determinant. Closed form up to 3x3, full-pivoting LU above.
template <typename Derived>
typename Derived::Scalar det(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    detail::require_square(m, "det");
    switch (m.rows()) {
    case 1:
        return m(0, 0);
    case 2:
        return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
        return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
             - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
             + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default: {
        const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense = m;
        return dense.fullPivLu().determinant();
    }
    }
}

template <typename Scalar, int MaxDim>
Scalar det(const SymMatrix<Scalar, MaxDim>& m)
{
    return det(m.matrix());
}

/// Cofactor (adjugate) matrix C with C * M = det(M) * I.
///
/// Up to 3x3 the minors are expanded directly. For larger matrices an
/// invertible M uses det(M) * M^{-1} from a full-pivoting LU; a (near)
/// singular M falls back to the SVD form adj(M) = det(V) det(U) V adj(S) U^T,
/// which stays valid at rank n-1 and below.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime, 0,
              Derived::MaxRowsAtCompileTime, Derived::MaxColsAtCompileTime>
cofactor_matrix(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    using Result = Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime, 0,
                                 Derived::MaxRowsAtCompileTime, Derived::MaxColsAtCompileTime>;
    detail::require_square(m, "cofactor_matrix");
    const Eigen::Index n = m.rows();
    Result c(n, n);
    switch (n) {
    case 1:
        c(0, 0) = Scalar(1);
        return c;
    case 2:
        c(0, 0) = m(1, 1);
        c(0, 1) = -m(0, 1);
        c(1, 0) = -m(1, 0);
        c(1, 1) = m(0, 0);
        return c;
    case 3:
        c(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
        c(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
        c(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
        c(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
        c(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
        c(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
        c(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
        c(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
        c(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        return c;
    default:
        break;
    }

    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Dense dense = m;
    Eigen::FullPivLU<Dense> lu(dense);
    // rcond-style guard: the LU route loses accuracy long before exact singularity.
    const Scalar scale = dense.cwiseAbs().maxCoeff();
    if (lu.isInvertible() && scale > Scalar(0)
        && std::abs(lu.maxPivot()) > Scalar(0)
        && std::abs(lu.matrixLU().diagonal().cwiseAbs().minCoeff()) > Scalar(1e-8) * scale) {
        c = lu.determinant() * lu.inverse();
        return c;
    }
    Eigen::JacobiSVD<Dense> svd(dense, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    Dense adj_s = Dense::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Scalar prod(1);
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) prod *= s(j);
        adj_s(i, i) = prod;
    }
    const Scalar orient = svd.matrixU().determinant() * svd.matrixV().determinant();
    c = orient * svd.matrixV() * adj_s * svd.matrixU().transpose();
    return c;
}

template <typename Scalar, int MaxDim>
SymMatrix<Scalar, MaxDim> cofactor_matrix(const SymMatrix<Scalar, MaxDim>& m)
{
    return SymMatrix<Scalar, MaxDim>(cofactor_matrix(m.matrix()));
}

/// Smallest eigenvalue of a symmetric matrix (only the lower triangle is read
/// above 2x2). Closed form for n <= 2, self-adjoint QR iteration otherwise.
template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    using std::sqrt;
    detail::require_square(m, "min_eigenvalue");
    if (m.rows() == 1) return m(0, 0);
    if (m.rows() == 2) {
        const Scalar half_trace = (m(0, 0) + m(1, 1)) / Scalar(2);
        const Scalar half_diff = (m(0, 0) - m(1, 1)) / Scalar(2);
        const Scalar off = (m(0, 1) + m(1, 0)) / Scalar(2);
        return half_trace - sqrt(half_diff * half_diff + off * off);
    }
    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::SelfAdjointEigenSolver<Dense> es(Dense(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

template <typename Scalar, int MaxDim>
Scalar min_eigenvalue(const SymMatrix<Scalar, MaxDim>& m)
{
    return min_eigenvalue(m.matrix());
}

template <typename Derived>
SpdCertificate spd_certificate(const Eigen::MatrixBase<Derived>& m, double tol = kPsdTolerance)
{
    return {static_cast<double>(min_eigenvalue(m)), tol};
}

struct AmgmResult {
    bool holds = false;
    double gap = 0.0;  ///< (tr(AB)/n)^n - det(AB)
    bool equality_flag = false;
};

/// Matrix AM-GM: det(AB) <= (tr(AB)/n)^n for A > 0, B >= 0, with equality iff
/// AB = lambda I. Throws std::invalid_argument when A is not SPD or B is not
/// PSD at tolerance `tol`.
template <typename DerivedA, typename DerivedB>
AmgmResult matrix_amgm_check(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                             double tol = kPsdTolerance)
{
    detail::require_square(a, "matrix_amgm_check");
    detail::require_square(b, "matrix_amgm_check");
    if (a.rows() != b.rows()) throw std::invalid_argument("matrix_amgm_check: dimension mismatch");
    if (!spd_certificate(a, tol).valid())
        throw std::invalid_argument("matrix_amgm_check: A is not positive definite");
    if (min_eigenvalue(b) < -tol)
        throw std::invalid_argument("matrix_amgm_check: B is not positive semi-definite");

    using Dense = Eigen::MatrixXd;
    const Dense ab = a.template cast<double>() * b.template cast<double>();
    const auto n = static_cast<double>(ab.rows());
    const double mean = ab.trace() / n;
    AmgmResult r;
    r.gap = std::pow(mean, n) - det(ab);
    r.holds = r.gap >= -tol;
    const double dist = (ab - mean * Dense::Identity(ab.rows(), ab.cols())).cwiseAbs().maxCoeff();
    r.equality_flag = dist < tol;
    return r;
}

/// |B^d| = pi^(d/2) / Gamma(d/2 + 1).
inline double unit_ball_volume(int d)
{
    if (d < 1) throw std::invalid_argument("unit_ball_volume: dimension must be >= 1");
    return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

}  // namespace msineq

#endif  // MSINEQ_LINALG_HPP
