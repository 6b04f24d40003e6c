#pragma once

#include <Eigen/Dense>

#include <vector>

#include "rsgame/errors.hpp"
#include "rsgame/model.hpp"
#include "rsgame/riccati.hpp"

namespace rsgame {

/// The closed-loop saddle triple on the solver grid: stacked feedback on the
/// filtered state, feedback on the difference state, and the affine offset.
/// Between nodes, gains are linearly interpolated.
struct SaddleGains {
    TimeGrid grid;
    int D = 0, n = 0, m = 0, nv = 0;
    std::vector<Mat> theta_hat;     // [k*D+i], (m+nv) x n
    std::vector<Mat> theta_tilde2;  // [k*D+i], nv x n
    std::vector<Vec> vbar;          // [k*D+i], m+nv

    const Mat& theta_hat_at(int k, int i) const { return theta_hat[static_cast<size_t>(k) * D + i]; }
    const Mat& theta_tilde2_at(int k, int i) const { return theta_tilde2[static_cast<size_t>(k) * D + i]; }
    const Vec& vbar_at(int k, int i) const { return vbar[static_cast<size_t>(k) * D + i]; }

    template <class Table>
    auto lerp(const Table& tab, double s, int i) const {
        const int k = grid.locate(s);
        const double s0 = grid.nodes[k], s1 = grid.nodes[k + 1];
        const double w = std::clamp((s - s0) / (s1 - s0), 0.0, 1.0);
        return ((1.0 - w) * tab[static_cast<size_t>(k) * D + i] +
                w * tab[static_cast<size_t>(k + 1) * D + i]).eval();
    }

    Mat theta_hat_eval(double s, int i) const { return lerp(theta_hat, s, i); }
    Mat theta1_eval(double s, int i) const { return theta_hat_eval(s, i).topRows(m); }
    Mat theta2_eval(double s, int i) const { return theta_hat_eval(s, i).bottomRows(nv); }
    Mat theta_tilde2_eval(double s, int i) const { return lerp(theta_tilde2, s, i); }
    Vec vbar_eval(double s, int i) const { return lerp(vbar, s, i); }
    Vec v1_eval(double s, int i) const { return vbar_eval(s, i).head(m); }
    Vec v2_eval(double s, int i) const { return vbar_eval(s, i).tail(nv); }
};

/// Node-wise synthesis of the saddle triple from a certified solution: block
/// linear solves of the stationarity system, never explicit inverses.
inline SaddleGains synthesize(const RiccatiSolution& sol, const GameModel& model) {
    const int D = model.dims.D, n = model.dims.n, m = model.dims.m, nv = model.dims.nv;
    const int K = sol.grid.segments();

    SaddleGains g;
    g.grid = sol.grid;
    g.D = D;
    g.n = n;
    g.m = m;
    g.nv = nv;
    g.theta_hat.resize(static_cast<size_t>(K + 1) * D);
    g.theta_tilde2.resize(static_cast<size_t>(K + 1) * D);
    g.vbar.resize(static_cast<size_t>(K + 1) * D);

    for (int k = 0; k <= K; ++k) {
        const double s = sol.grid.nodes[k];
        for (int i = 0; i < D; ++i) {
            const BlockData bd = blocks(model, s, i, sol.Pi.at(k, i), sol.P.at(k, i),
                                        sol.eta.at(k, i).col(0));
            const auto lu = riccati_detail::checked_lu(bd.Rhat, "Rhat");
            const size_t idx = static_cast<size_t>(k) * D + i;
            g.theta_hat[idx] = -lu.solve(bd.Shat);
            g.vbar[idx] = -lu.solve(bd.offset);
            g.theta_tilde2[idx] =
                -riccati_detail::checked_lu(bd.Rbar2, "Rbar2").solve(bd.Sbar2);
        }
    }
    return g;
}

/// Control-side synthesis: the minimizing control in feedback form together
/// with the maximizer's best response to an arbitrary control.
/// u = Ku xhat + cu;  best response vhat = Fu u + Kx xhat + cv;
/// vtilde = Kt xtilde.
struct Player1Synthesis {
    TimeGrid grid;
    int D = 0;
    std::vector<Mat> Ku, Fu, Kx, Kt;
    std::vector<Vec> cu, cv;

    const Mat& ku(int k, int i) const { return Ku[static_cast<size_t>(k) * D + i]; }
    const Mat& fu(int k, int i) const { return Fu[static_cast<size_t>(k) * D + i]; }
    const Mat& kx(int k, int i) const { return Kx[static_cast<size_t>(k) * D + i]; }
    const Mat& kt(int k, int i) const { return Kt[static_cast<size_t>(k) * D + i]; }
    const Vec& offset_u(int k, int i) const { return cu[static_cast<size_t>(k) * D + i]; }
    const Vec& offset_v(int k, int i) const { return cv[static_cast<size_t>(k) * D + i]; }
};

/// Disturbance-side synthesis: the maximizing disturbance in feedback form
/// together with the minimizer's best response to an arbitrary vhat.
/// u = Fv vhat + Kx1 xhat + cu;  vhat = Kv xhat + cvh;  vtilde = Kt xtilde.
struct Player2Synthesis {
    TimeGrid grid;
    int D = 0;
    std::vector<Mat> Fv, Kx1, Kv, Kt;
    std::vector<Vec> cu, cvh;

    const Mat& fv(int k, int i) const { return Fv[static_cast<size_t>(k) * D + i]; }
    const Mat& kx1(int k, int i) const { return Kx1[static_cast<size_t>(k) * D + i]; }
    const Mat& kv(int k, int i) const { return Kv[static_cast<size_t>(k) * D + i]; }
    const Mat& kt(int k, int i) const { return Kt[static_cast<size_t>(k) * D + i]; }
    const Vec& offset_u(int k, int i) const { return cu[static_cast<size_t>(k) * D + i]; }
    const Vec& offset_v(int k, int i) const { return cvh[static_cast<size_t>(k) * D + i]; }
};

inline Player1Synthesis player1_pair(const RiccatiSolution& sol, const GameModel& model) {
    const int D = model.dims.D;
    const int K = sol.grid.segments();
    Player1Synthesis p;
    p.grid = sol.grid;
    p.D = D;
    const size_t total = static_cast<size_t>(K + 1) * D;
    p.Ku.resize(total); p.Fu.resize(total); p.Kx.resize(total); p.Kt.resize(total);
    p.cu.resize(total); p.cv.resize(total);

    for (int k = 0; k <= K; ++k) {
        const double s = sol.grid.nodes[k];
        for (int i = 0; i < D; ++i) {
            const BlockData bd = blocks(model, s, i, sol.Pi.at(k, i), sol.P.at(k, i),
                                        sol.eta.at(k, i).col(0));
            const int nv = bd.nv;
            const auto lu22 = riccati_detail::checked_lu(bd.R22(), "Rhat_22");
            const Mat R22inv_R12t = lu22.solve(Mat(bd.R12().transpose()));
            const Mat schur = bd.R11() - bd.R12() * R22inv_R12t;
            const auto lu_s = riccati_detail::checked_lu(schur, "control Schur complement");
            const size_t idx = static_cast<size_t>(k) * D + i;

            p.Ku[idx] = -lu_s.solve(Mat(bd.Shat1() - R22inv_R12t.transpose() * bd.Shat2()));
            p.cu[idx] = -lu_s.solve(bd.offset_u_reduced);
            p.Fu[idx] = -R22inv_R12t;  // -R22^{-1} R12'
            p.Kx[idx] = -lu22.solve(Mat(bd.Shat2()));
            p.cv[idx] = -lu22.solve(Vec(bd.offset.tail(nv)));
            p.Kt[idx] = -riccati_detail::checked_lu(bd.Rbar2, "Rbar2").solve(bd.Sbar2);
        }
    }
    return p;
}

inline Player2Synthesis player2_pair(const RiccatiSolution& sol, const GameModel& model) {
    const int D = model.dims.D;
    const int K = sol.grid.segments();
    Player2Synthesis p;
    p.grid = sol.grid;
    p.D = D;
    const size_t total = static_cast<size_t>(K + 1) * D;
    p.Fv.resize(total); p.Kx1.resize(total); p.Kv.resize(total); p.Kt.resize(total);
    p.cu.resize(total); p.cvh.resize(total);

    for (int k = 0; k <= K; ++k) {
        const double s = sol.grid.nodes[k];
        for (int i = 0; i < D; ++i) {
            const BlockData bd = blocks(model, s, i, sol.Pi.at(k, i), sol.P.at(k, i),
                                        sol.eta.at(k, i).col(0));
            const int m = bd.m;
            const auto lu11 = riccati_detail::checked_lu(bd.R11(), "Rhat_11");
            const Mat R11inv_R12 = lu11.solve(Mat(bd.R12()));
            const Mat schur = bd.R22() - bd.R12().transpose() * R11inv_R12;
            const auto lu_s = riccati_detail::checked_lu(schur, "disturbance Schur complement");
            const size_t idx = static_cast<size_t>(k) * D + i;

            p.Fv[idx] = -R11inv_R12;
            p.Kx1[idx] = -lu11.solve(Mat(bd.Shat1()));
            p.cu[idx] = -lu11.solve(Vec(bd.offset.head(m)));
            p.Kv[idx] = -lu_s.solve(Mat(bd.Shat2() - R11inv_R12.transpose() * bd.Shat1()));
            p.cvh[idx] = -lu_s.solve(bd.offset_v_reduced);
            p.Kt[idx] = -riccati_detail::checked_lu(bd.Rbar2, "Rbar2").solve(bd.Sbar2);
        }
    }
    return p;
}

/// Direct solve of the first-order stationarity system for (u, vhat) given
/// the filtered state. Ground truth for both player syntheses.
inline Vec stationarity_solve(const Mat& Rhat, const Mat& Shat, const Vec& offset,
                              const Vec& xhat) {
    return -riccati_detail::checked_lu(Rhat, "Rhat").solve(Vec(Shat * xhat + offset));
}

}  // namespace rsgame
