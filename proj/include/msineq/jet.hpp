#ifndef MSINEQ_JET_HPP
#define MSINEQ_JET_HPP

// Second-order forward-mode jets over at most four chart variables.
//
// Immersions and scalar functions are written once against Jet; evaluating
// them on seeded jets yields value, gradient and Hessian with respect to the
// chart parameters, which is what the "exact" derivative mode means.

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace msineq {

inline constexpr int kMaxIntrinsic = 4;

struct Jet {
    using Grad = Eigen::Matrix<double, kMaxIntrinsic, 1>;
    using Hess = Eigen::Matrix<double, kMaxIntrinsic, kMaxIntrinsic>;

    double v = 0.0;
    Grad g = Grad::Zero();
    Hess h = Hess::Zero();

    Jet() = default;
    Jet(double value) : v(value) {}  // NOLINT: implicit constants are the point

    static Jet variable(double value, int index)
    {
        Jet j(value);
        j.g(index) = 1.0;
        return j;
    }

    Jet& operator+=(const Jet& o)
    {
        v += o.v;
        g += o.g;
        h += o.h;
        return *this;
    }
    Jet& operator-=(const Jet& o)
    {
        v -= o.v;
        g -= o.g;
        h -= o.h;
        return *this;
    }
    Jet& operator*=(const Jet& o)
    {
        h = v * o.h + o.v * h + g * o.g.transpose() + o.g * g.transpose();
        g = v * o.g + o.v * g;
        v *= o.v;
        return *this;
    }
};

// Chain rule for f(x) with f', f'' at x.
inline Jet apply(const Jet& x, double f, double df, double ddf)
{
    Jet r(f);
    r.g = df * x.g;
    r.h = df * x.h + ddf * x.g * x.g.transpose();
    return r;
}

inline Jet operator-(const Jet& a)
{
    Jet r;
    r.v = -a.v;
    r.g = -a.g;
    r.h = -a.h;
    return r;
}
inline Jet operator+(Jet a, const Jet& b) { return a += b; }
inline Jet operator-(Jet a, const Jet& b) { return a -= b; }
inline Jet operator*(Jet a, const Jet& b) { return a *= b; }
inline Jet operator/(const Jet& a, const Jet& b)
{
    const double inv = 1.0 / b.v;
    return a * apply(b, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet sin(const Jet& x) { return apply(x, std::sin(x.v), std::cos(x.v), -std::sin(x.v)); }
inline Jet cos(const Jet& x) { return apply(x, std::cos(x.v), -std::sin(x.v), -std::cos(x.v)); }
inline Jet exp(const Jet& x)
{
    const double e = std::exp(x.v);
    return apply(x, e, e, e);
}
inline Jet log(const Jet& x) { return apply(x, std::log(x.v), 1.0 / x.v, -1.0 / (x.v * x.v)); }
inline Jet sqrt(const Jet& x)
{
    const double s = std::sqrt(x.v);
    return apply(x, s, 0.5 / s, -0.25 / (s * x.v));
}
inline Jet pow(const Jet& x, double p)
{
    if (p == 0.0) return Jet(1.0);
    return apply(x, std::pow(x.v, p), p * std::pow(x.v, p - 1.0), p * (p - 1.0) * std::pow(x.v, p - 2.0));
}
/// Integer power by repeated multiplication (exact at x = 0).
inline Jet ipow(const Jet& x, int p)
{
    Jet r(1.0);
    for (int i = 0; i < p; ++i) r *= x;
    return r;
}

/// Maps chart parameters (n jets) to ambient coordinates (N jets).
using JetMap = std::function<std::vector<Jet>(std::span<const Jet>)>;
/// Scalar function of a point given as jets (ambient or chart coordinates).
using JetScalar = std::function<Jet(std::span<const Jet>)>;

/// Seed n chart variables at p.
template <typename Vector>
std::vector<Jet> seed_variables(const Vector& p)
{
    std::vector<Jet> vars;
    vars.reserve(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) vars.push_back(Jet::variable(p(i), static_cast<int>(i)));
    return vars;
}

}  // namespace msineq

#endif  // MSINEQ_JET_HPP
