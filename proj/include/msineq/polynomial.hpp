#ifndef MSINEQ_POLYNOMIAL_HPP
#define MSINEQ_POLYNOMIAL_HPP

#include <algorithm>
#include <span>
#include <vector>

#include "msineq/jet.hpp"

namespace msineq {

struct Monomial {
    double coefficient = 0.0;
    std::vector<int> powers;  ///< exponent per variable; missing trailing entries are 0
};

/// Sparse multivariate polynomial, evaluated on jets.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<Monomial> terms) : terms_(std::move(terms)) {}

    static Polynomial constant(double c) { return Polynomial(std::vector<Monomial>{Monomial{c, {}}}); }
    /// c * x_var
    static Polynomial linear(int var, double c = 1.0)
    {
        std::vector<int> p(static_cast<std::size_t>(var) + 1, 0);
        p.back() = 1;
        return Polynomial(std::vector<Monomial>{Monomial{c, p}});
    }

    Polynomial& add(double coefficient, std::vector<int> powers)
    {
        terms_.push_back({coefficient, std::move(powers)});
        return *this;
    }

    [[nodiscard]] const std::vector<Monomial>& terms() const { return terms_; }
    /// Largest variable index used plus one.
    [[nodiscard]] int arity() const
    {
        int a = 0;
        for (const auto& t : terms_) a = std::max(a, static_cast<int>(t.powers.size()));
        return a;
    }

    Jet operator()(std::span<const Jet> x) const
    {
        Jet acc(0.0);
        for (const Monomial& t : terms_) {
            Jet term(t.coefficient);
            for (std::size_t k = 0; k < t.powers.size(); ++k)
                if (t.powers[k] != 0) term *= ipow(x[k], t.powers[k]);
            acc += term;
        }
        return acc;
    }

    [[nodiscard]] JetScalar function() const
    {
        return [p = *this](std::span<const Jet> x) { return p(x); };
    }

private:
    std::vector<Monomial> terms_;
};

}  // namespace msineq

#endif  // MSINEQ_POLYNOMIAL_HPP
