#ifndef MSINEQ_REPORT_HPP
#define MSINEQ_REPORT_HPP

namespace msineq {

/// Both sides of the Sobolev inequality for one scenario at one resolution.
struct SobolevReport {
    int n = 0;
    int m = 0;
    int resolution = 0;
    double mesh_size = 0.0;     ///< largest ambient grid edge over all pieces
    double lhs_interior = 0.0;  ///< integral of sqrt(|div A|^2 + |<A, II>|^2)
    double lhs_boundary = 0.0;  ///< boundary integral of |A(nu)|
    double rhs_integral = 0.0;  ///< integral of (det A)^(1/(n-1))
    double constant = 0.0;
    double ratio = 0.0;
    double eps_mesh = 0.0;      ///< Richardson estimate of the relative error in ratio

    [[nodiscard]] double lhs() const { return lhs_interior + lhs_boundary; }
};

}  // namespace msineq

#endif  // MSINEQ_REPORT_HPP
