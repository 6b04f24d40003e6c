#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "rsgame/model.hpp"
#include "rsgame/rng.hpp"

namespace rsgame {

/// One sampled trajectory of the regime process on [t0, T]. The path is
/// right-continuous: states[k] holds on [jump_times[k-1], jump_times[k]).
struct ChainPath {
    double t0 = 0.0;
    double T = 0.0;
    std::vector<double> jump_times;  // strictly increasing, in (t0, T]
    std::vector<int> states;         // 0-based; size = jump_times.size() + 1

    int initial() const { return states.front(); }
    int jumps() const { return static_cast<int>(jump_times.size()); }

    /// Regime at time s; with left=true, the left limit at jump instants.
    int regime_at(double s, bool left = false) const {
        if (s < t0 - 1e-12 || s > T + 1e-12) throw std::out_of_range("time outside the path");
        auto it = left ? std::lower_bound(jump_times.begin(), jump_times.end(), s)
                       : std::upper_bound(jump_times.begin(), jump_times.end(), s);
        return states[static_cast<size_t>(it - jump_times.begin())];
    }

    /// Number of recorded i -> j transitions (0-based indices).
    int jump_count(int i, int j) const {
        int c = 0;
        for (size_t k = 1; k < states.size(); ++k)
            if (states[k - 1] == i && states[k] == j) ++c;
        return c;
    }

    /// Total time spent in regime i over [t0, T].
    double occupancy(int i) const {
        double total = 0.0, prev = t0;
        for (size_t k = 0; k < jump_times.size(); ++k) {
            if (states[k] == i) total += jump_times[k] - prev;
            prev = jump_times[k];
        }
        if (states.back() == i) total += T - prev;
        return total;
    }
};

/// Exact event-driven sampling: the holding time in state i is exponential
/// with rate |lambda_ii| and the next state is drawn from the jump chain.
inline ChainPath sample_path(const Generator& gen, int i0, double t, double T,
                             RngStream stream) {
    if (!(t < T)) throw std::invalid_argument("chain sampling requires t < T");
    if (i0 < 0 || i0 >= gen.states()) throw std::invalid_argument("invalid initial regime");

    ChainPath path;
    path.t0 = t;
    path.T = T;
    path.states.push_back(i0);

    RngSequence rng(stream);
    double s = t;
    int state = i0;
    while (true) {
        const double rate = -gen.lambda(state, state);
        s += rng.exponential(rate);
        if (s >= T) break;
        double u = rng.uniform() * rate;
        int next = -1;
        for (int j = 0; j < gen.states(); ++j) {
            if (j == state) continue;
            u -= gen.lambda(state, j);
            if (u <= 0.0) {
                next = j;
                break;
            }
        }
        if (next < 0) {  // guard against rounding at the far end of the simplex
            for (int j = gen.states() - 1; j >= 0; --j)
                if (j != state) {
                    next = j;
                    break;
                }
        }
        path.jump_times.push_back(s);
        path.states.push_back(next);
        state = next;
    }
    return path;
}

inline RngStream chain_stream(std::uint64_t seed, std::uint64_t path_index) {
    return RngStream(seed, rng_purpose::chain, path_index);
}

/// Transition probabilities over a step dt (matrix exponential of lambda*dt).
/// Used as the analytic cross-check for empirical one-step frequencies.
inline Mat transition_matrix(const Generator& gen, double dt) {
    if (dt < 0.0) throw std::invalid_argument("dt must be nonnegative");
    if (dt == 0.0) return Mat::Identity(gen.states(), gen.states());
    return (gen.lambda * dt).exp();
}

/// Occupation probabilities p(s) on grid nodes from the forward equation
/// dp/ds = lambda' p, started at the initial regime of the model.
inline std::vector<Vec> occupation_probabilities(const Generator& gen, int i0,
                                                 const std::vector<double>& nodes) {
    const int D = gen.states();
    const Mat At = gen.lambda.transpose();
    std::vector<Vec> p(nodes.size());
    Vec cur = Vec::Zero(D);
    cur(i0) = 1.0;
    p[0] = cur;
    for (size_t k = 1; k < nodes.size(); ++k) {
        const double h = nodes[k] - nodes[k - 1];
        const Vec k1 = At * cur;
        const Vec k2 = At * (cur + 0.5 * h * k1);
        const Vec k3 = At * (cur + 0.5 * h * k2);
        const Vec k4 = At * (cur + h * k3);
        cur += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        p[k] = cur;
    }
    return p;
}

}  // namespace rsgame
