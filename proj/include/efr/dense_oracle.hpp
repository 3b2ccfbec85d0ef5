#pragma once

// Brute-force reference for the comb filter: the time-domain recursion
// evaluated literally on a uniform grid with array-indexed delays. It shares
// no code with PixelFilter and is only used for verification.

#include "efr/comb_filter.hpp"
#include "efr/event.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace efr {

/// y(t) at t = n * grid_dt for n in [0, round(t_end / grid_dt)). All events are
/// treated as belonging to one pixel and snapped to the nearest grid point.
inline std::vector<double> dense_oracle(std::span<const Event> events, const FilterConfig& config,
                                        double grid_dt, double t_end) {
    if (!(grid_dt > 0.0)) throw ConfigError("grid_dt must be > 0");
    auto steps_of = [&](double lag, const char* name) {
        const double k = lag / grid_dt;
        const double r = std::round(k);
        if (r < 1.0 || std::abs(k - r) > 1e-9 * r) {
            throw ConfigError(std::string("grid_dt does not divide ") + name);
        }
        return static_cast<std::ptrdiff_t>(r);
    };
    const auto n2 = steps_of(config.tau2, "tau2");
    const auto n1 = steps_of(config.tau1, "tau1");
    const auto n = static_cast<std::ptrdiff_t>(std::llround(t_end / grid_dt));
    if (n <= 0) return {};

    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    for (const auto& e : events) {
        const auto k = static_cast<std::ptrdiff_t>(std::llround(e.t / grid_dt));
        if (k < n) x[static_cast<std::size_t>(k)] += sign(e.polarity) * config.contrast;
    }
    for (std::ptrdiff_t k = 1; k < n; ++k) x[k] += x[k - 1];

    std::vector<double> y(static_cast<std::size_t>(n), 0.0);
    auto at = [](const std::vector<double>& v, std::ptrdiff_t k) { return k >= 0 ? v[k] : 0.0; };
    const double r1 = config.rho1;
    const double r2 = config.rho2;
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        y[k] = x[k] - at(x, k - n1) - r2 * at(x, k - n2) + r2 * at(x, k - n1 - n2) +
               r1 * at(y, k - n1) + at(y, k - n2) - r1 * at(y, k - n1 - n2);
    }
    return y;
}

}  // namespace efr
