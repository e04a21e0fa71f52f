#include "msineq/charts.hpp"

#include <numbers>
#include <stdexcept>

namespace msineq::charts {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

Chart flat_box(int n, int ambient_dim, std::vector<double> lo, std::vector<double> hi, int resolution,
               DerivativeMode mode)
{
    if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n)
        throw std::invalid_argument("flat_box: bounds must have n entries");
    std::vector<Axis> axes;
    for (int a = 0; a < n; ++a)
        axes.push_back(Axis::interval(lo[static_cast<std::size_t>(a)], hi[static_cast<std::size_t>(a)], resolution));
    auto f = [n, ambient_dim](std::span<const Jet> p) {
        std::vector<Jet> x(static_cast<std::size_t>(ambient_dim), Jet(0.0));
        for (int a = 0; a < n; ++a) x[static_cast<std::size_t>(a)] = p[static_cast<std::size_t>(a)];
        return x;
    };
    return Chart("flat-box", std::move(axes), ambient_dim, f, mode);
}

Chart flat_disk(int ambient_dim, double radius, int resolution, double cx, double cy, DerivativeMode mode)
{
    std::vector<Axis> axes{Axis::capped(0.0, radius, resolution, AxisEnd::Cap, AxisEnd::Boundary),
                           Axis::periodic_axis(0.0, 2.0 * kPi, resolution)};
    auto f = [ambient_dim, cx, cy](std::span<const Jet> p) {
        std::vector<Jet> x(static_cast<std::size_t>(ambient_dim), Jet(0.0));
        x[0] = Jet(cx) + p[0] * cos(p[1]);
        x[1] = Jet(cy) + p[0] * sin(p[1]);
        return x;
    };
    return Chart("flat-disk", std::move(axes), ambient_dim, f, mode);
}

Chart round_sphere(int ambient_dim, double radius, int resolution, DerivativeMode mode)
{
    std::vector<Axis> axes{Axis::capped(0.0, kPi, resolution, AxisEnd::Cap, AxisEnd::Cap),
                           Axis::periodic_axis(0.0, 2.0 * kPi, resolution)};
    auto f = [ambient_dim, radius](std::span<const Jet> p) {
        std::vector<Jet> x(static_cast<std::size_t>(ambient_dim), Jet(0.0));
        const Jet st = sin(p[0]);
        x[0] = radius * st * cos(p[1]);
        x[1] = radius * st * sin(p[1]);
        x[2] = radius * cos(p[0]);
        return x;
    };
    return Chart("sphere", std::move(axes), ambient_dim, f, mode);
}

Chart cylinder(int ambient_dim, double radius, double height, int resolution, DerivativeMode mode)
{
    std::vector<Axis> axes{Axis::periodic_axis(0.0, 2.0 * kPi, resolution), Axis::interval(0.0, height, resolution)};
    auto f = [ambient_dim, radius](std::span<const Jet> p) {
        std::vector<Jet> x(static_cast<std::size_t>(ambient_dim), Jet(0.0));
        x[0] = radius * cos(p[0]);
        x[1] = radius * sin(p[0]);
        x[2] = p[1];
        return x;
    };
    return Chart("cylinder", std::move(axes), ambient_dim, f, mode);
}

Chart torus(int ambient_dim, double major, double minor, int resolution, DerivativeMode mode)
{
    std::vector<Axis> axes{Axis::periodic_axis(0.0, 2.0 * kPi, resolution),
                           Axis::periodic_axis(0.0, 2.0 * kPi, resolution)};
    auto f = [ambient_dim, major, minor](std::span<const Jet> p) {
        std::vector<Jet> x(static_cast<std::size_t>(ambient_dim), Jet(0.0));
        const Jet ring = Jet(major) + minor * cos(p[1]);
        x[0] = ring * cos(p[0]);
        x[1] = ring * sin(p[0]);
        x[2] = minor * sin(p[1]);
        return x;
    };
    return Chart("torus", std::move(axes), ambient_dim, f, mode);
}

Chart polynomial(int n, std::vector<double> lo, std::vector<double> hi, std::vector<Polynomial> coords,
                 int resolution, DerivativeMode mode)
{
    if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n)
        throw std::invalid_argument("polynomial chart: bounds must have n entries");
    for (const auto& c : coords)
        if (c.arity() > n) throw std::invalid_argument("polynomial chart: coordinate uses more than n variables");
    std::vector<Axis> axes;
    for (int a = 0; a < n; ++a)
        axes.push_back(Axis::interval(lo[static_cast<std::size_t>(a)], hi[static_cast<std::size_t>(a)], resolution));
    const int ambient = static_cast<int>(coords.size());
    auto f = [coords = std::move(coords)](std::span<const Jet> p) {
        std::vector<Jet> x;
        x.reserve(coords.size());
        for (const auto& c : coords) x.push_back(c(p));
        return x;
    };
    return Chart("polynomial", std::move(axes), ambient, f, mode);
}

Chart sphere_like(Polynomial radius, std::vector<Polynomial> extra, int resolution, DerivativeMode mode)
{
    std::vector<Axis> axes{Axis::capped(0.0, kPi, resolution, AxisEnd::Cap, AxisEnd::Cap),
                           Axis::periodic_axis(0.0, 2.0 * kPi, resolution)};
    const int ambient = 3 + static_cast<int>(extra.size());
    auto f = [radius = std::move(radius), extra = std::move(extra)](std::span<const Jet> p) {
        const Jet st = sin(p[0]);
        const std::vector<Jet> s{st * cos(p[1]), st * sin(p[1]), cos(p[0])};
        const Jet rho = radius(s);
        std::vector<Jet> x{rho * s[0], rho * s[1], rho * s[2]};
        for (const auto& e : extra) x.push_back(e(s));
        return x;
    };
    return Chart("sphere-like", std::move(axes), ambient, f, mode);
}

}  // namespace msineq::charts
