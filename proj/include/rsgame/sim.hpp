#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rsgame/chain.hpp"
#include "rsgame/errors.hpp"
#include "rsgame/gains.hpp"
#include "rsgame/grid.hpp"
#include "rsgame/model.hpp"
#include "rsgame/rng.hpp"

namespace rsgame {

// ---------------------------------------------------------------------------
// Policies
//
// Every supported policy is an affine rule resolved per (time, regime):
//   u      = K(s,i) xhat + c(s,i)                       (control, G-adapted)
//   vhat   = Khat(s,i) xhat + chat(s,i)                 (disturbance, filtered)
//   vtilde = Ktilde(s,i) xtilde                         (disturbance, difference)
// The control interface cannot express dependence on xtilde, so adaptedness
// holds by construction. Disturbances outside this class have no closed-form
// conditional expectation and are rejected.
// ---------------------------------------------------------------------------

struct ControlPolicy {
    std::function<void(double s, int regime, Mat& K, Vec& c)> resolve;
};

struct DisturbancePolicy {
    bool supported = true;
    std::string reason;
    std::function<void(double s, int regime, Mat& Khat, Vec& chat, Mat& Ktilde)> resolve;
};

using TimeVecFn = std::function<Vec(double s, int regime)>;

inline ControlPolicy zero_control(const Dims& d) {
    const int m = d.m, n = d.n;
    return {[m, n](double, int, Mat& K, Vec& c) {
        K = Mat::Zero(m, n);
        c = Vec::Zero(m);
    }};
}

/// The minimizing player's saddle outcome u = Theta1 xhat + v1, optionally
/// with scaled gain or an extra deterministic offset (for perturbation
/// studies). scale = 1 and no offset reproduces the saddle control exactly.
inline ControlPolicy saddle_control(const SaddleGains& g, double scale_theta1 = 1.0,
                                    double const_offset = 0.0) {
    return {[&g, scale_theta1, const_offset](double s, int i, Mat& K, Vec& c) {
        K = scale_theta1 * g.theta1_eval(s, i);
        c = g.v1_eval(s, i);
        if (const_offset != 0.0) c.array() += const_offset;
    }};
}

inline ControlPolicy open_loop_control(const Dims& d, TimeVecFn fn) {
    const int m = d.m, n = d.n;
    return {[m, n, fn = std::move(fn)](double s, int i, Mat& K, Vec& c) {
        K = Mat::Zero(m, n);
        c = fn(s, i);
    }};
}

inline ControlPolicy linear_control(
    std::function<Mat(double, int)> K, TimeVecFn c) {
    return {[K = std::move(K), c = std::move(c)](double s, int i, Mat& Kout, Vec& cout_) {
        Kout = K(s, i);
        cout_ = c(s, i);
    }};
}

inline DisturbancePolicy zero_disturbance(const Dims& d) {
    const int nv = d.nv, n = d.n;
    DisturbancePolicy p;
    p.resolve = [nv, n](double, int, Mat& Kh, Vec& ch, Mat& Kt) {
        Kh = Mat::Zero(nv, n);
        ch = Vec::Zero(nv);
        Kt = Mat::Zero(nv, n);
    };
    return p;
}

/// The maximizing player's saddle outcome v = Theta2 xhat + TildeTheta2
/// xtilde + v2; its filtered part is Theta2 xhat + v2 because the difference
/// state has zero conditional mean.
inline DisturbancePolicy saddle_disturbance(const SaddleGains& g, double scale_theta2 = 1.0,
                                            double scale_tilde2 = 1.0,
                                            double const_offset = 0.0) {
    DisturbancePolicy p;
    p.resolve = [&g, scale_theta2, scale_tilde2, const_offset](double s, int i, Mat& Kh,
                                                               Vec& ch, Mat& Kt) {
        Kh = scale_theta2 * g.theta2_eval(s, i);
        ch = g.v2_eval(s, i);
        if (const_offset != 0.0) ch.array() += const_offset;
        Kt = scale_tilde2 * g.theta_tilde2_eval(s, i);
    };
    return p;
}

inline DisturbancePolicy linear_disturbance(std::function<Mat(double, int)> Khat,
                                            TimeVecFn chat,
                                            std::function<Mat(double, int)> Ktilde) {
    DisturbancePolicy p;
    p.resolve = [Khat = std::move(Khat), chat = std::move(chat),
                 Ktilde = std::move(Ktilde)](double s, int i, Mat& Kh, Vec& ch, Mat& Kt) {
        Kh = Khat(s, i);
        ch = chat(s, i);
        Kt = Ktilde(s, i);
    };
    return p;
}

/// Deterministic open-loop disturbance: its conditional expectation is
/// itself, so vhat = v and vtilde = 0.
inline DisturbancePolicy open_loop_disturbance(const Dims& d, TimeVecFn fn) {
    const int nv = d.nv, n = d.n;
    DisturbancePolicy p;
    p.resolve = [nv, n, fn = std::move(fn)](double s, int i, Mat& Kh, Vec& ch, Mat& Kt) {
        Kh = Mat::Zero(nv, n);
        ch = fn(s, i);
        Kt = Mat::Zero(nv, n);
    };
    return p;
}

/// Marker for disturbance classes whose filtered part is not computable in
/// closed form; simulation rejects these up front.
inline DisturbancePolicy unsupported_disturbance(std::string reason) {
    DisturbancePolicy p;
    p.supported = false;
    p.reason = std::move(reason);
    return p;
}

/// The saddle outcome pair ready for simulation.
inline std::pair<ControlPolicy, DisturbancePolicy> outcome_policies(const SaddleGains& g) {
    return {saddle_control(g), saddle_disturbance(g)};
}

// ---------------------------------------------------------------------------
// Run table: everything the path kernel needs, resolved once per run.
// ---------------------------------------------------------------------------

struct CoeffBundle {
    Mat A, B1, B2, C, D1, D2, Cb, D1b, D2b;
    Vec b, sigma, sigmabar;
    Mat Q, R1, R2, S1, S2;
    Vec q, rho1, rho2;
};

struct RunTable {
    TimeGrid grid;
    int D = 0, n = 0, m = 0, nv = 0;
    Vec xhat0, xtilde0;                   // deterministic initial split
    std::vector<double> piece_breaks;     // model coefficient breakpoints
    std::vector<int> piece_of_segment;    // solver segment -> piece id
    std::vector<CoeffBundle> bundles;     // [piece*D + i]
    std::vector<Mat> K1, K2h, K2t;        // resolved policy gains, [node*D + i]
    std::vector<Vec> c1, c2h;
    std::vector<Mat> G;                   // terminal weights per regime
    std::vector<Vec> gvec;

    const CoeffBundle& bundle(int piece, int i) const {
        return bundles[static_cast<size_t>(piece) * D + i];
    }
    int piece_at_segment(int k) const { return piece_of_segment[k]; }
};

inline RunTable make_run_table(const GameModel& model, const TimeGrid& grid,
                               const ControlPolicy& control,
                               const DisturbancePolicy& disturbance) {
    if (!disturbance.supported)
        throw UnsupportedDisturbance("disturbance policy has no computable filtered part: " +
                                     disturbance.reason);
    RunTable rt;
    rt.grid = grid;
    rt.D = model.dims.D;
    rt.n = model.dims.n;
    rt.m = model.dims.m;
    rt.nv = model.dims.nv;
    rt.xhat0 = model.initial_state;  // deterministic xi: xi_hat = xi, xi_tilde = 0
    rt.xtilde0 = Vec::Zero(rt.n);

    rt.piece_breaks = model.breakpoints();
    const int pieces = static_cast<int>(rt.piece_breaks.size()) + 1;
    rt.bundles.resize(static_cast<size_t>(pieces) * rt.D);
    for (int p = 0; p < pieces; ++p) {
        const double lo = p == 0 ? grid.t0() : rt.piece_breaks[p - 1];
        const double hi = p == pieces - 1 ? grid.horizon() : rt.piece_breaks[p];
        const double mid = 0.5 * (lo + hi);
        for (int i = 0; i < rt.D; ++i) {
            const auto& c = model.coeffs[i];
            const auto& w = model.weights[i];
            rt.bundles[static_cast<size_t>(p) * rt.D + i] = {
                c.A(mid),    c.B1(mid),   c.B2(mid),  c.C(mid),   c.D1(mid),  c.D2(mid),
                c.Cbar(mid), c.D1bar(mid), c.D2bar(mid), c.b(mid), c.sigma(mid),
                c.sigmabar(mid), w.Q(mid), w.R1(mid), w.R2(mid), w.S1(mid), w.S2(mid),
                w.q(mid),    w.rho1(mid), w.rho2(mid)};
        }
    }
    rt.piece_of_segment.resize(grid.segments());
    for (int k = 0; k < grid.segments(); ++k) {
        const double mid = 0.5 * (grid.nodes[k] + grid.nodes[k + 1]);
        const auto it = std::upper_bound(rt.piece_breaks.begin(), rt.piece_breaks.end(), mid);
        rt.piece_of_segment[k] = static_cast<int>(it - rt.piece_breaks.begin());
    }

    const int K = grid.segments();
    const size_t total = static_cast<size_t>(K + 1) * rt.D;
    rt.K1.resize(total);
    rt.c1.resize(total);
    rt.K2h.resize(total);
    rt.c2h.resize(total);
    rt.K2t.resize(total);
    for (int k = 0; k <= K; ++k) {
        const double s = grid.nodes[k];
        for (int i = 0; i < rt.D; ++i) {
            const size_t idx = static_cast<size_t>(k) * rt.D + i;
            control.resolve(s, i, rt.K1[idx], rt.c1[idx]);
            disturbance.resolve(s, i, rt.K2h[idx], rt.c2h[idx], rt.K2t[idx]);
        }
    }

    rt.G.resize(rt.D);
    rt.gvec.resize(rt.D);
    for (int i = 0; i < rt.D; ++i) {
        rt.G[i] = model.weights[i].G;
        rt.gvec[i] = model.weights[i].g;
    }
    return rt;
}

namespace sim_detail {

inline void mv_set(Vec& y, const Mat& M, const Vec& x) {
    const int r = static_cast<int>(M.rows()), c = static_cast<int>(M.cols());
    double* py = y.data();
    const double* pm = M.data();
    const double* px = x.data();
    for (int i = 0; i < r; ++i) py[i] = 0.0;
    for (int j = 0; j < c; ++j) {
        const double xj = px[j];
        const double* col = pm + static_cast<size_t>(j) * r;
        for (int i = 0; i < r; ++i) py[i] += col[i] * xj;
    }
}

inline void mv_acc(Vec& y, const Mat& M, const Vec& x) {
    const int r = static_cast<int>(M.rows()), c = static_cast<int>(M.cols());
    double* py = y.data();
    const double* pm = M.data();
    const double* px = x.data();
    for (int j = 0; j < c; ++j) {
        const double xj = px[j];
        const double* col = pm + static_cast<size_t>(j) * r;
        for (int i = 0; i < r; ++i) py[i] += col[i] * xj;
    }
}

inline void lerp_into(Mat& out, const Mat& a, const Mat& b, double w) {
    out.resize(a.rows(), a.cols());
    double* o = out.data();
    const double* pa = a.data();
    const double* pb = b.data();
    const auto sz = a.size();
    for (Eigen::Index t = 0; t < sz; ++t) o[t] = (1.0 - w) * pa[t] + w * pb[t];
}

inline void lerp_into(Vec& out, const Vec& a, const Vec& b, double w) {
    out.resize(a.size());
    double* o = out.data();
    const double* pa = a.data();
    const double* pb = b.data();
    const auto sz = a.size();
    for (Eigen::Index t = 0; t < sz; ++t) o[t] = (1.0 - w) * pa[t] + w * pb[t];
}

inline double bilinear(const Vec& a, const Mat& M, const Vec& b) {
    const int r = static_cast<int>(M.rows()), c = static_cast<int>(M.cols());
    const double* pa = a.data();
    const double* pm = M.data();
    const double* pb = b.data();
    double acc = 0.0;
    for (int j = 0; j < c; ++j) {
        const double bj = pb[j];
        const double* col = pm + static_cast<size_t>(j) * r;
        double t = 0.0;
        for (int i = 0; i < r; ++i) t += pa[i] * col[i];
        acc += t * bj;
    }
    return acc;
}

inline double dot(const Vec& a, const Vec& b) {
    const double* pa = a.data();
    const double* pb = b.data();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) acc += pa[i] * pb[i];
    return acc;
}

}  // namespace sim_detail

/// One record per time node, handed to the observer. References point into
/// kernel workspace; copy anything you keep.
struct SimNode {
    double s;
    double dt_prev;  // spacing to the previous node (0 at the first)
    int regime;      // 0-based, value of the chain on [s, next)
    int piece;       // coefficient piece containing s
    double dW, dWbar;  // increments applied over the step ENDING at this node
    const Vec& xhat;
    const Vec& xtilde;
    const Vec& x;
    const Vec& u;
    const Vec& v;
    const Vec& vhat;
    const Vec& vtilde;
};

/// Euler-Maruyama co-integration of the filtered and difference states over
/// one chain path, with jump times inserted between grid nodes. The observer
/// is called at every node including both endpoints.
template <class Obs>
void simulate_path(const RunTable& rt, const ChainPath& chain, RngStream noise, Obs&& obs) {
    const int n = rt.n, m = rt.m, nv = rt.nv, D = rt.D;
    const bool scalar = n == 1 && m == 1 && nv == 1;
    const auto& nodes = rt.grid.nodes;
    const int K = rt.grid.segments();

    Vec xhat = rt.xhat0, xtilde = rt.xtilde0;
    Vec x(n), u(m), vhat(nv), vtilde(nv), v(nv);
    Vec drift_h(n), diff_h(n), drift_t(n), diff_t(n), diff_b(n);
    Mat K1buf, K2hbuf, K2tbuf;
    Vec c1buf, c2hbuf;

    struct Cursor {
        size_t jump = 0;
        int regime;
    } cur{0, chain.initial()};

    std::uint64_t step_counter = 0;
    double prev_s = nodes.front();
    double dW = 0.0, dWb = 0.0;
    double cached_dt = -1.0, cached_sq = 0.0;
    bool first = true;

    int k = 0;  // current solver segment
    double s = nodes.front();
    while (true) {
        // regime holding on [s, next_event)
        while (cur.jump < chain.jump_times.size() &&
               chain.jump_times[cur.jump] <= s + 1e-14) {
            cur.regime = chain.states[cur.jump + 1];
            ++cur.jump;
        }
        const bool at_end = k >= K;
        const int seg = at_end ? K - 1 : k;
        const int piece = rt.piece_of_segment[seg];
        const int i = cur.regime;

        // policy gains at s: direct node row when s is a grid node
        const Mat *K1p, *K2hp, *K2tp;
        const Vec *c1p, *c2hp;
        const double s_node = nodes[std::min(k, K)];
        if (std::abs(s - s_node) < 1e-14 || at_end) {
            const size_t idx = static_cast<size_t>(std::min(k, K)) * D + i;
            K1p = &rt.K1[idx];
            c1p = &rt.c1[idx];
            K2hp = &rt.K2h[idx];
            c2hp = &rt.c2h[idx];
            K2tp = &rt.K2t[idx];
        } else {
            const double w = (s - nodes[k]) / (nodes[k + 1] - nodes[k]);
            const size_t a = static_cast<size_t>(k) * D + i;
            const size_t b = static_cast<size_t>(k + 1) * D + i;
            sim_detail::lerp_into(K1buf, rt.K1[a], rt.K1[b], w);
            sim_detail::lerp_into(c1buf, rt.c1[a], rt.c1[b], w);
            sim_detail::lerp_into(K2hbuf, rt.K2h[a], rt.K2h[b], w);
            sim_detail::lerp_into(c2hbuf, rt.c2h[a], rt.c2h[b], w);
            sim_detail::lerp_into(K2tbuf, rt.K2t[a], rt.K2t[b], w);
            K1p = &K1buf;
            c1p = &c1buf;
            K2hp = &K2hbuf;
            c2hp = &c2hbuf;
            K2tp = &K2tbuf;
        }

        if (scalar) {
            const double xh = xhat.data()[0], xt = xtilde.data()[0];
            const double uu = K1p->data()[0] * xh + c1p->data()[0];
            const double vh = K2hp->data()[0] * xh + c2hp->data()[0];
            const double vt = K2tp->data()[0] * xt;
            u.data()[0] = uu;
            vhat.data()[0] = vh;
            vtilde.data()[0] = vt;
            v.data()[0] = vh + vt;
            x.data()[0] = xh + xt;
        } else {
            u = *c1p;
            sim_detail::mv_acc(u, *K1p, xhat);
            vhat = *c2hp;
            sim_detail::mv_acc(vhat, *K2hp, xhat);
            sim_detail::mv_set(vtilde, *K2tp, xtilde);
            for (int j = 0; j < nv; ++j) v(j) = vhat(j) + vtilde(j);
            for (int j = 0; j < n; ++j) x(j) = xhat(j) + xtilde(j);
        }

        obs(SimNode{s, first ? 0.0 : s - prev_s, i, piece, dW, dWb, xhat, xtilde, x, u, v,
                    vhat, vtilde});
        first = false;
        if (at_end) break;

        // next event: either the next grid node or an interior jump time
        double next_s = nodes[k + 1];
        bool advance_node = true;
        if (cur.jump < chain.jump_times.size() &&
            chain.jump_times[cur.jump] < next_s - 1e-14) {
            next_s = chain.jump_times[cur.jump];
            advance_node = false;
        }
        const double dt = next_s - s;
        if (dt != cached_dt) {  // uniform away from jump-inserted nodes
            cached_dt = dt;
            cached_sq = std::sqrt(dt);
        }
        double z0, z1;
        noise.normal_pair(step_counter++, z0, z1);
        dW = cached_sq * z0;
        dWb = cached_sq * z1;

        const CoeffBundle& cb = rt.bundle(piece, i);

        if (scalar) {
            const double xh = xhat.data()[0], xt = xtilde.data()[0];
            const double uu = u.data()[0], vh = vhat.data()[0], vt = vtilde.data()[0];
            const double A = cb.A.data()[0], B1 = cb.B1.data()[0], B2 = cb.B2.data()[0];
            const double C = cb.C.data()[0], D1 = cb.D1.data()[0], D2 = cb.D2.data()[0];
            const double Cb = cb.Cb.data()[0], D1b = cb.D1b.data()[0],
                         D2b = cb.D2b.data()[0];
            const double dh = A * xh + B1 * uu + B2 * vh + cb.b.data()[0];
            const double gh = C * xh + D1 * uu + D2 * vh + cb.sigma.data()[0];
            const double dtl = A * xt + B2 * vt;
            const double gtl = C * xt + D2 * vt;
            const double gb =
                Cb * (xh + xt) + D1b * uu + D2b * (vh + vt) + cb.sigmabar.data()[0];
            const double new_xh = xh + dt * dh + dW * gh;
            const double new_xt = xt + dt * dtl + dW * gtl + dWb * gb;
            if (!std::isfinite(new_xh) || !std::isfinite(new_xt))
                throw NonFiniteValue(next_s, i + 1);
            xhat.data()[0] = new_xh;
            xtilde.data()[0] = new_xt;
        } else {
            drift_h = cb.b;
            sim_detail::mv_acc(drift_h, cb.A, xhat);
            sim_detail::mv_acc(drift_h, cb.B1, u);
            sim_detail::mv_acc(drift_h, cb.B2, vhat);
            diff_h = cb.sigma;
            sim_detail::mv_acc(diff_h, cb.C, xhat);
            sim_detail::mv_acc(diff_h, cb.D1, u);
            sim_detail::mv_acc(diff_h, cb.D2, vhat);

            sim_detail::mv_set(drift_t, cb.A, xtilde);
            sim_detail::mv_acc(drift_t, cb.B2, vtilde);
            sim_detail::mv_set(diff_t, cb.C, xtilde);
            sim_detail::mv_acc(diff_t, cb.D2, vtilde);

            diff_b = cb.sigmabar;
            sim_detail::mv_acc(diff_b, cb.Cb, x);
            sim_detail::mv_acc(diff_b, cb.D1b, u);
            sim_detail::mv_acc(diff_b, cb.D2b, v);

            for (int j = 0; j < n; ++j) {
                xhat(j) += dt * drift_h(j) + dW * diff_h(j);
                xtilde(j) += dt * drift_t(j) + dW * diff_t(j) + dWb * diff_b(j);
            }
            if (!xhat.allFinite() || !xtilde.allFinite())
                throw NonFiniteValue(next_s, i + 1);
        }

        prev_s = s;
        s = next_s;
        if (advance_node) ++k;
    }
}

/// A fully recorded trajectory. Rows of the state/control matrices follow
/// the per-path node sequence (grid nodes plus this path's jump times).
struct SimPath {
    std::vector<double> s;
    std::vector<int> regime;  // 0-based
    std::vector<double> dW, dWbar;
    Mat xhat, xtilde, x;  // one row per node
    Mat u, v, vhat, vtilde;
    ChainPath chain;
};

namespace sim_detail {

struct Recorder {
    std::vector<double> s;
    std::vector<int> regime;
    std::vector<double> dW, dWb;
    std::vector<Vec> xhat, xtilde, u, v, vhat, vtilde;

    void operator()(const SimNode& nd) {
        s.push_back(nd.s);
        regime.push_back(nd.regime);
        dW.push_back(nd.dW);
        dWb.push_back(nd.dWbar);
        xhat.push_back(nd.xhat);
        xtilde.push_back(nd.xtilde);
        u.push_back(nd.u);
        v.push_back(nd.v);
        vhat.push_back(nd.vhat);
        vtilde.push_back(nd.vtilde);
    }
};

}  // namespace sim_detail

inline RngStream brownian_stream(std::uint64_t seed, std::uint64_t path_index) {
    return RngStream(seed, rng_purpose::brownian, path_index);
}

/// Simulate one path with full recording.
inline SimPath simulate(const RunTable& rt, const ChainPath& chain, RngStream noise) {
    sim_detail::Recorder rec;
    simulate_path(rt, chain, noise, rec);

    SimPath p;
    p.chain = chain;
    p.s = std::move(rec.s);
    p.regime = std::move(rec.regime);
    p.dW = std::move(rec.dW);
    p.dWbar = std::move(rec.dWb);
    const int rows = static_cast<int>(p.s.size());
    auto pack = [rows](const std::vector<Vec>& v) {
        Mat m(rows, v.front().size());
        for (int r = 0; r < rows; ++r) m.row(r) = v[r].transpose();
        return m;
    };
    p.xhat = pack(rec.xhat);
    p.xtilde = pack(rec.xtilde);
    p.x = p.xhat + p.xtilde;
    p.u = pack(rec.u);
    p.v = pack(rec.v);
    p.vhat = pack(rec.vhat);
    p.vtilde = pack(rec.vtilde);
    return p;
}

/// Simulate one path for a (model, policies) choice over a given chain.
inline SimPath simulate(const GameModel& model, const TimeGrid& grid,
                        const ControlPolicy& control, const DisturbancePolicy& disturbance,
                        const ChainPath& chain, RngStream noise) {
    return simulate(make_run_table(model, grid, control, disturbance), chain, noise);
}

/// Simulate one path for a (model, policies) choice; chain and noise are
/// drawn from the seed's substreams for the given path index.
inline SimPath simulate(const GameModel& model, const TimeGrid& grid,
                        const ControlPolicy& control, const DisturbancePolicy& disturbance,
                        std::uint64_t seed, std::uint64_t path_index = 0) {
    const RunTable rt = make_run_table(model, grid, control, disturbance);
    const ChainPath chain = sample_path(model.generator, model.initial_regime,
                                        grid.t0(), grid.horizon(),
                                        chain_stream(seed, path_index));
    return simulate(rt, chain, brownian_stream(seed, path_index));
}

/// Chunked parallel map over path indices. Results must be written to
/// per-path slots so the reduction order stays deterministic.
template <class Fn>
void parallel_for_paths(std::size_t n_paths, int threads, Fn&& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || n_paths < 2) {
        for (std::size_t p = 0; p < n_paths; ++p) fn(p);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr err;
    std::mutex err_mx;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (std::size_t p = t; p < n_paths; p += threads) fn(p);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mx);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

/// Orthogonality diagnostics of the filtering split at checkpoint times:
/// the difference state should have zero mean, be uncorrelated with the
/// filtered state, and its disturbance part uncorrelated with constants.
struct FilterCheckpoint {
    double s = 0.0;
    Vec mean_xtilde, stderr_xtilde;
    double mean_cross = 0.0, stderr_cross = 0.0;  // <xhat, xtilde>
    double mean_hv = 0.0, stderr_hv = 0.0;        // <1, vtilde>

    bool pass(double nsigma = 3.0) const {
        for (int j = 0; j < mean_xtilde.size(); ++j)
            if (std::abs(mean_xtilde(j)) > nsigma * stderr_xtilde(j)) return false;
        return std::abs(mean_cross) <= nsigma * stderr_cross &&
               std::abs(mean_hv) <= nsigma * stderr_hv;
    }
};

/// Same diagnostics over already recorded paths.
inline std::vector<FilterCheckpoint> filter_consistency_stats(
    const std::vector<SimPath>& paths, const std::vector<double>& checkpoints);

inline std::vector<FilterCheckpoint> filter_consistency_stats(
    const GameModel& model, const TimeGrid& grid, const ControlPolicy& control,
    const DisturbancePolicy& disturbance, const std::vector<double>& checkpoints,
    std::size_t n_paths, std::uint64_t seed, int threads = 1) {
    const RunTable rt = make_run_table(model, grid, control, disturbance);
    const int n = model.dims.n;
    const size_t C = checkpoints.size();

    // per path, per checkpoint: xtilde (n), <xhat,xtilde>, <1,vtilde>
    std::vector<double> samples(n_paths * C * (n + 2));

    parallel_for_paths(n_paths, threads, [&](std::size_t p) {
        const ChainPath chain = sample_path(model.generator, model.initial_regime, grid.t0(),
                                            grid.horizon(), chain_stream(seed, p));
        size_t next_cp = 0;
        double* slot = samples.data() + p * C * (n + 2);
        simulate_path(rt, chain, brownian_stream(seed, p), [&](const SimNode& nd) {
            while (next_cp < C && nd.s >= checkpoints[next_cp] - 1e-12) {
                double* out = slot + next_cp * (n + 2);
                for (int j = 0; j < n; ++j) out[j] = nd.xtilde(j);
                out[n] = sim_detail::dot(nd.xhat, nd.xtilde);
                out[n + 1] = nd.vtilde.sum();
                ++next_cp;
            }
        });
    });

    std::vector<FilterCheckpoint> result(C);
    for (size_t c = 0; c < C; ++c) {
        FilterCheckpoint& fc = result[c];
        fc.s = checkpoints[c];
        fc.mean_xtilde = Vec::Zero(n);
        fc.stderr_xtilde = Vec::Zero(n);
        auto entry = [&](std::size_t p, int j) {
            return samples[p * C * (n + 2) + c * (n + 2) + j];
        };
        for (int j = 0; j < n + 2; ++j) {
            double mean = 0.0;
            for (std::size_t p = 0; p < n_paths; ++p) mean += entry(p, j);
            mean /= static_cast<double>(n_paths);
            double var = 0.0;
            for (std::size_t p = 0; p < n_paths; ++p) {
                const double d = entry(p, j) - mean;
                var += d * d;
            }
            var /= static_cast<double>(n_paths - 1);
            const double se = std::sqrt(var / static_cast<double>(n_paths));
            if (j < n) {
                fc.mean_xtilde(j) = mean;
                fc.stderr_xtilde(j) = se;
            } else if (j == n) {
                fc.mean_cross = mean;
                fc.stderr_cross = se;
            } else {
                fc.mean_hv = mean;
                fc.stderr_hv = se;
            }
        }
    }
    return result;
}

inline std::vector<FilterCheckpoint> filter_consistency_stats(
    const std::vector<SimPath>& paths, const std::vector<double>& checkpoints) {
    const std::size_t n_paths = paths.size();
    const int n = static_cast<int>(paths.front().x.cols());
    const size_t C = checkpoints.size();

    std::vector<double> samples(n_paths * C * (n + 2));
    for (std::size_t p = 0; p < n_paths; ++p) {
        const SimPath& path = paths[p];
        size_t node = 0;
        for (size_t c = 0; c < C; ++c) {
            while (node + 1 < path.s.size() && path.s[node] < checkpoints[c] - 1e-12) ++node;
            double* out = samples.data() + p * C * (n + 2) + c * (n + 2);
            double cross = 0.0;
            for (int j = 0; j < n; ++j) {
                out[j] = path.xtilde(node, j);
                cross += path.xhat(node, j) * path.xtilde(node, j);
            }
            out[n] = cross;
            out[n + 1] = path.vtilde.row(node).sum();
        }
    }

    std::vector<FilterCheckpoint> result(C);
    for (size_t c = 0; c < C; ++c) {
        FilterCheckpoint& fc = result[c];
        fc.s = checkpoints[c];
        fc.mean_xtilde = Vec::Zero(n);
        fc.stderr_xtilde = Vec::Zero(n);
        for (int j = 0; j < n + 2; ++j) {
            double mean = 0.0;
            for (std::size_t p = 0; p < n_paths; ++p)
                mean += samples[p * C * (n + 2) + c * (n + 2) + j];
            mean /= static_cast<double>(n_paths);
            double var = 0.0;
            for (std::size_t p = 0; p < n_paths; ++p) {
                const double d = samples[p * C * (n + 2) + c * (n + 2) + j] - mean;
                var += d * d;
            }
            var /= static_cast<double>(n_paths - 1);
            const double se = std::sqrt(var / static_cast<double>(n_paths));
            if (j < n) {
                fc.mean_xtilde(j) = mean;
                fc.stderr_xtilde(j) = se;
            } else if (j == n) {
                fc.mean_cross = mean;
                fc.stderr_cross = se;
            } else {
                fc.mean_hv = mean;
                fc.stderr_hv = se;
            }
        }
    }
    return result;
}

}  // namespace rsgame
