#ifndef MSINEQ_ERROR_HPP
#define MSINEQ_ERROR_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace msineq {

/// Immersion differential lost rank at a grid node.
class DegenerateImmersion : public std::runtime_error {
public:
    DegenerateImmersion(int node, double smallest_singular_value, const std::string& where)
        : std::runtime_error("degenerate immersion at node " + std::to_string(node) + " (" + where
                             + "), smallest singular value " + std::to_string(smallest_singular_value)),
          node_(node)
    {
    }
    [[nodiscard]] int node() const { return node_; }

private:
    int node_;
};

/// A tensor field fails uniform positivity at a grid node.
class SpdViolation : public std::runtime_error {
public:
    SpdViolation(int node, double min_eigenvalue, const std::string& what)
        : std::runtime_error(what + ": not positive definite at node " + std::to_string(node)
                             + " (min eigenvalue " + std::to_string(min_eigenvalue) + ")"),
          node_(node)
    {
    }
    [[nodiscard]] int node() const { return node_; }

private:
    int node_;
};

/// Neumann data fail the solvability condition beyond tolerance.
class CompatibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear solve did not reach the requested tolerance.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::vector<double> residual_history)
        : std::runtime_error(what), history_(std::move(residual_history))
    {
    }
    [[nodiscard]] const std::vector<double>& residual_history() const { return history_; }

private:
    std::vector<double> history_;
};

/// Bad scenario or run configuration; `field` names the offending JSON path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& message)
        : std::runtime_error(field.empty() ? message : field + ": " + message), field_(field)
    {
    }
    [[nodiscard]] const std::string& field() const { return field_; }

private:
    std::string field_;
};

}  // namespace msineq

#endif  // MSINEQ_ERROR_HPP
