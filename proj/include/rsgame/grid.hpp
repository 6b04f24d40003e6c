#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace rsgame {

/// Ascending time nodes t0 = s_0 < ... < s_K = T. Uniform with nominal step
/// except where coefficient breakpoints were inserted.
struct TimeGrid {
    std::vector<double> nodes;
    double step = 0.0;  // nominal spacing

    int segments() const { return static_cast<int>(nodes.size()) - 1; }
    double t0() const { return nodes.front(); }
    double horizon() const { return nodes.back(); }

    /// Index of the last node <= s (clamped to a valid segment index).
    int locate(double s) const {
        auto it = std::upper_bound(nodes.begin(), nodes.end(), s);
        int k = static_cast<int>(it - nodes.begin()) - 1;
        return std::clamp(k, 0, segments() - 1);
    }
};

inline TimeGrid make_time_grid(double t0, double T, double ds,
                               const std::vector<double>& breakpoints = {}) {
    if (!(T > t0)) throw std::invalid_argument("time grid requires T > t0");
    if (!(ds > 0.0)) throw std::invalid_argument("time grid requires ds > 0");

    TimeGrid g;
    g.step = ds;
    const int k_max = std::max(2, static_cast<int>(std::ceil((T - t0) / ds - 1e-12)));
    g.nodes.reserve(static_cast<size_t>(k_max) + breakpoints.size() + 1);
    for (int k = 0; k < k_max; ++k) g.nodes.push_back(t0 + k * ds);
    g.nodes.push_back(T);

    for (double b : breakpoints)
        if (b > t0 && b < T) g.nodes.push_back(b);

    std::sort(g.nodes.begin(), g.nodes.end());
    // Merge nodes closer than a relative tolerance so breakpoints that
    // coincide with uniform nodes do not create zero-length steps.
    const double tol = 1e-12 * std::max(1.0, std::abs(T));
    std::vector<double> merged;
    merged.reserve(g.nodes.size());
    for (double s : g.nodes) {
        if (merged.empty() || s - merged.back() > tol) merged.push_back(s);
    }
    merged.back() = T;
    g.nodes = std::move(merged);
    return g;
}

}  // namespace rsgame
