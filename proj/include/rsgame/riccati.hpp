#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "rsgame/errors.hpp"
#include "rsgame/grid.hpp"
#include "rsgame/model.hpp"

namespace rsgame {

/// Definiteness requirements certified along the backward sweep. `player1`
/// asks for a strictly concave disturbance block plus a strictly convex
/// control Schur complement (enables the control-side synthesis), `player2`
/// is the mirror image, and `saddle` asks for both diagonal blocks at once.
enum class ConditionSet { player1, player2, saddle };

/// Which elimination order defines the backward equation for the affine
/// term. All three are equivalent; solving more than one is a cross-check.
enum class OffsetForm { player1, player2, compact };

/// Integration form of the filtered-state Riccati equation: the standard
/// completion form or the rearrangement around the closed control loop.
enum class PForm { standard, closed_loop };

struct CertOptions {
    double delta_cond = 1e-8;  // eigenvalue margin required by >> 0 / << 0
};

/// Completion-of-squares blocks at one (s, regime, Pi, P, eta) point.
struct BlockData {
    int m = 0, nv = 0;
    Mat Sbar2;   // nv x n, disturbance-difference channel
    Mat Rbar2;   // nv x nv
    Mat Shat;    // (m+nv) x n, filtered channel
    Mat Rhat;    // (m+nv) x (m+nv)
    Vec offset;  // m+nv, affine forcing B'eta + D'P sigma + Dbar'Pi sigmabar + rho

    Vec offset_u_reduced;  // control forcing after eliminating the disturbance block
    Vec offset_v_reduced;  // disturbance forcing after eliminating the control block
    Mat theta1;            // control gain produced by the block elimination
    Mat S2_closedloop;     // disturbance cross term with the control loop closed

    Eigen::Block<const Mat> Shat1() const { return Shat.topRows(m); }
    Eigen::Block<const Mat> Shat2() const { return Shat.bottomRows(nv); }
    Eigen::Block<const Mat> R11() const { return Rhat.topLeftCorner(m, m); }
    Eigen::Block<const Mat> R12() const { return Rhat.topRightCorner(m, nv); }
    Eigen::Block<const Mat> R22() const { return Rhat.bottomRightCorner(nv, nv); }
};

/// Matrix-valued function of (node, regime). Each integration step also
/// stores the one-sided derivatives at its two endpoints, evaluated with
/// that step's own coefficient segment, so stage values between nodes come
/// from cubic Hermite interpolation at full order even across coefficient
/// breakpoints.
struct RegimeTrajectory {
    TimeGrid grid;
    int D = 0, rows = 0, cols = 0;
    std::vector<Mat> values;     // [k*D + i], K+1 nodes
    std::vector<Mat> deriv_lo;   // [k*D + i], K steps: d/ds at node k within step k
    std::vector<Mat> deriv_hi;   // [k*D + i], K steps: d/ds at node k+1 within step k

    const Mat& at(int k, int i) const { return values[static_cast<size_t>(k) * D + i]; }
    Mat& at(int k, int i) { return values[static_cast<size_t>(k) * D + i]; }

    Mat eval(double s, int i) const {
        const int k = grid.locate(s);
        const double s0 = grid.nodes[k], s1 = grid.nodes[k + 1];
        const double h = s1 - s0;
        const double th = (s - s0) / h;
        if (th <= 0.0) return at(k, i);
        if (th >= 1.0) return at(k + 1, i);
        const double t2 = th * th, t3 = t2 * th;
        const size_t idx = static_cast<size_t>(k) * D + i;
        return (2 * t3 - 3 * t2 + 1) * at(k, i) + (t3 - 2 * t2 + th) * h * deriv_lo[idx] +
               (-2 * t3 + 3 * t2) * at(k + 1, i) + (t3 - t2) * h * deriv_hi[idx];
    }
};

/// Eigenvalue margins at one (node, regime). Positive entries mean the
/// corresponding strict condition holds with that margin.
struct NodeMargins {
    double rbar2 = 0.0;   // -max eig of Rbar2
    double r11 = 0.0;     // min eig of Rhat_11
    double r22 = 0.0;     // -max eig of Rhat_22
    double schur1 = 0.0;  // min eig of Rhat_11 - R12 R22^{-1} R12'
    double schur2 = 0.0;  // -max eig of Rhat_22 - R12' R11^{-1} R12

    bool satisfies(ConditionSet c, double delta) const {
        switch (c) {
            case ConditionSet::player1: return r22 >= delta && schur1 >= delta;
            case ConditionSet::player2: return r11 >= delta && schur2 >= delta;
            case ConditionSet::saddle: return r11 >= delta && r22 >= delta;
        }
        return false;
    }

    double min_margin(ConditionSet c) const {
        switch (c) {
            case ConditionSet::player1: return std::min(r22, schur1);
            case ConditionSet::player2: return std::min(r11, schur2);
            case ConditionSet::saddle: return std::min(r11, r22);
        }
        return 0.0;
    }
};

struct RiccatiSolution {
    TimeGrid grid;
    RegimeTrajectory Pi, P, eta;
    std::vector<NodeMargins> margins;  // [k*D + i]
    ConditionSet conditions = ConditionSet::saddle;
    double delta_cond = 1e-8;

    const NodeMargins& margins_at(int k, int i) const {
        return margins[static_cast<size_t>(k) * Pi.D + i];
    }

    double min_margin(ConditionSet c) const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& nm : margins) m = std::min(m, nm.min_margin(c));
        return m;
    }
};

namespace riccati_detail {

struct CoeffsAt {
    const Mat &A, &B1, &B2, &C, &D1, &D2, &Cb, &D1b, &D2b;
    const Vec &b, &sigma, &sigmabar;
    const Mat &Q, &R1, &R2, &S1, &S2;
    const Vec &q, &rho1, &rho2;
};

inline CoeffsAt coeffs_at(const GameModel& model, double s, int i) {
    const auto& c = model.coeffs[i];
    const auto& w = model.weights[i];
    return {c.A(s),    c.B1(s),   c.B2(s),  c.C(s),  c.D1(s), c.D2(s), c.Cbar(s),
            c.D1bar(s), c.D2bar(s), c.b(s),  c.sigma(s), c.sigmabar(s),
            w.Q(s),    w.R1(s),   w.R2(s),  w.S1(s), w.S2(s),
            w.q(s),    w.rho1(s), w.rho2(s)};
}

inline Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Fills the raw blocks; the reduced quantities are added by blocks() when
// the inner factorizations exist.
inline BlockData raw_blocks(const CoeffsAt& cf, double gamma, const Mat& Pi, const Mat& P,
                            const Vec& eta) {
    const int n = static_cast<int>(cf.A.rows());
    const int m = static_cast<int>(cf.B1.cols());
    const int nv = static_cast<int>(cf.B2.cols());
    BlockData bd;
    bd.m = m;
    bd.nv = nv;

    bd.Sbar2 = cf.B2.transpose() * Pi + cf.D2.transpose() * Pi * cf.C +
               cf.D2b.transpose() * Pi * cf.Cb + cf.S2;
    bd.Rbar2 = cf.R2 + cf.D2.transpose() * Pi * cf.D2 + cf.D2b.transpose() * Pi * cf.D2b;
    for (int k = 0; k < nv; ++k) bd.Rbar2(k, k) -= gamma * gamma;

    Mat B(n, m + nv), Dm(n, m + nv), Db(n, m + nv);
    B << cf.B1, cf.B2;
    Dm << cf.D1, cf.D2;
    Db << cf.D1b, cf.D2b;

    Mat S(m + nv, n);
    S << cf.S1, cf.S2;
    bd.Shat = B.transpose() * P + Dm.transpose() * P * cf.C + Db.transpose() * Pi * cf.Cb + S;

    bd.Rhat = Dm.transpose() * P * Dm + Db.transpose() * Pi * Db;
    bd.Rhat.topLeftCorner(m, m) += cf.R1;
    bd.Rhat.bottomRightCorner(nv, nv) += cf.R2;
    for (int k = 0; k < nv; ++k) bd.Rhat(m + k, m + k) -= gamma * gamma;
    bd.Rhat = sym(bd.Rhat);

    bd.offset = B.transpose() * eta + Dm.transpose() * P * cf.sigma +
                Db.transpose() * Pi * cf.sigmabar;
    bd.offset.head(m) += cf.rho1;
    bd.offset.tail(nv) += cf.rho2;
    return bd;
}

inline Eigen::FullPivLU<Mat> checked_lu(const Mat& m, const char* what) {
    Eigen::FullPivLU<Mat> lu(m);
    if (!lu.isInvertible()) throw SingularRhat(std::string("singular block: ") + what);
    return lu;
}

}  // namespace riccati_detail

/// All completion blocks at (s, regime) for given Riccati values. The affine
/// forcing uses the supplied eta (pass zero when only gains are needed).
inline BlockData blocks(const GameModel& model, double s, int regime, const Mat& Pi,
                        const Mat& P, const Vec& eta) {
    const auto cf = riccati_detail::coeffs_at(model, s, regime);
    BlockData bd = riccati_detail::raw_blocks(cf, model.gamma, Pi, P, eta);
    const int m = bd.m, nv = bd.nv;

    const auto lu22 = riccati_detail::checked_lu(bd.R22(), "Rhat_22");
    const Mat R22inv_R12t = lu22.solve(bd.R12().transpose());  // nv x m
    const Mat schur1 = bd.R11() - bd.R12() * R22inv_R12t;
    const auto lu_s1 = riccati_detail::checked_lu(schur1, "control Schur complement");

    bd.offset_u_reduced = bd.offset.head(m) - R22inv_R12t.transpose() * bd.offset.tail(nv);
    bd.theta1 = -lu_s1.solve(Mat(bd.Shat1() - R22inv_R12t.transpose() * bd.Shat2()));
    bd.S2_closedloop = bd.Shat2() + bd.R12().transpose() * bd.theta1;

    const auto lu11 = riccati_detail::checked_lu(bd.R11(), "Rhat_11");
    bd.offset_v_reduced =
        bd.offset.tail(nv) - bd.R12().transpose() * lu11.solve(bd.offset.head(m));
    return bd;
}

inline BlockData blocks(const GameModel& model, double s, int regime, const Mat& Pi,
                        const Mat& P) {
    return blocks(model, s, regime, Pi, P, Vec::Zero(model.dims.n));
}

/// Residuals of the two block-elimination splittings of S' R^{-1} S against
/// the full solve (Frobenius norms). Both should vanish whenever the inner
/// blocks are invertible.
inline std::pair<double, double> schur_split_residuals(const Mat& Rhat, const Mat& Shat,
                                                       int m) {
    const int nv = static_cast<int>(Rhat.rows()) - m;
    const Mat R11 = Rhat.topLeftCorner(m, m);
    const Mat R12 = Rhat.topRightCorner(m, nv);
    const Mat R22 = Rhat.bottomRightCorner(nv, nv);
    const Mat S1 = Shat.topRows(m);
    const Mat S2 = Shat.bottomRows(nv);

    const Mat full = Shat.transpose() * riccati_detail::checked_lu(Rhat, "Rhat").solve(Shat);

    const auto lu22 = riccati_detail::checked_lu(R22, "Rhat_22");
    const Mat red1 = S1 - R12 * lu22.solve(S2);
    const Mat schur_a = R11 - R12 * lu22.solve(Mat(R12.transpose()));
    const Mat form_a = S2.transpose() * lu22.solve(S2) +
                       red1.transpose() * riccati_detail::checked_lu(schur_a, "Schur").solve(red1);

    const auto lu11 = riccati_detail::checked_lu(R11, "Rhat_11");
    const Mat red2 = S2 - R12.transpose() * lu11.solve(S1);
    const Mat schur_b = R22 - R12.transpose() * lu11.solve(R12);
    const Mat form_b = S1.transpose() * lu11.solve(S1) +
                       red2.transpose() * riccati_detail::checked_lu(schur_b, "Schur").solve(red2);

    return {(full - form_a).norm(), (full - form_b).norm()};
}

namespace riccati_detail {

inline NodeMargins node_margins(const GameModel& model, double s, int i, const Mat& Pi,
                                const Mat& P) {
    const auto cf = coeffs_at(model, s, i);
    const BlockData bd = raw_blocks(cf, model.gamma, Pi, P, Vec::Zero(model.dims.n));
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();

    NodeMargins nm;
    nm.rbar2 = -rsgame::detail::max_eigenvalue(bd.Rbar2);
    nm.r11 = rsgame::detail::min_eigenvalue(bd.R11());
    nm.r22 = -rsgame::detail::max_eigenvalue(bd.R22());

    Eigen::FullPivLU<Mat> lu22(Mat(bd.R22()));
    if (lu22.isInvertible()) {
        const Mat schur = bd.R11() - bd.R12() * lu22.solve(Mat(bd.R12().transpose()));
        nm.schur1 = rsgame::detail::min_eigenvalue(schur);
    } else {
        nm.schur1 = neg_inf;
    }
    Eigen::FullPivLU<Mat> lu11(Mat(bd.R11()));
    if (lu11.isInvertible()) {
        const Mat schur = bd.R22() - bd.R12().transpose() * lu11.solve(Mat(bd.R12()));
        nm.schur2 = -rsgame::detail::max_eigenvalue(schur);
    } else {
        nm.schur2 = neg_inf;
    }
    return nm;
}

// dPi/ds for all regimes at coefficient time s_c.
inline void pi_rhs(const GameModel& model, double s_c, const std::vector<Mat>& Pi,
                   std::vector<Mat>& out) {
    const int D = model.dims.D;
    for (int i = 0; i < D; ++i) {
        const auto cf = coeffs_at(model, s_c, i);
        const Mat& X = Pi[i];
        Mat Sbar2 = cf.B2.transpose() * X + cf.D2.transpose() * X * cf.C +
                    cf.D2b.transpose() * X * cf.Cb + cf.S2;
        Mat Rbar2 = cf.R2 + cf.D2.transpose() * X * cf.D2 + cf.D2b.transpose() * X * cf.D2b;
        for (int k = 0; k < Rbar2.rows(); ++k) Rbar2(k, k) -= model.gamma * model.gamma;

        Mat F = X * cf.A + cf.A.transpose() * X + cf.C.transpose() * X * cf.C +
                cf.Cb.transpose() * X * cf.Cb + cf.Q -
                Sbar2.transpose() * Rbar2.lu().solve(Sbar2);
        for (int j = 0; j < D; ++j) F += model.generator.lambda(i, j) * Pi[j];
        out[i] = -sym(F);
    }
}

// dP/ds for all regimes; Pi values are taken at the true stage time.
inline void p_rhs(const GameModel& model, double s_c, double s_stage,
                  const RegimeTrajectory& Pi, const std::vector<Mat>& P, PForm form,
                  std::vector<Mat>& out) {
    const int D = model.dims.D;
    for (int i = 0; i < D; ++i) {
        const auto cf = coeffs_at(model, s_c, i);
        const Mat Pi_s = Pi.eval(s_stage, i);
        const Mat& X = P[i];
        Mat F;
        if (form == PForm::standard) {
            // raw blocks without the affine parts
            const BlockData bd = raw_blocks(cf, model.gamma, Pi_s, X, Vec::Zero(model.dims.n));
            const Mat quad =
                bd.Shat.transpose() * checked_lu(bd.Rhat, "Rhat").solve(bd.Shat);
            F = X * cf.A + cf.A.transpose() * X + cf.C.transpose() * X * cf.C +
                cf.Cb.transpose() * Pi_s * cf.Cb + cf.Q - quad;
        } else {
            const BlockData bd = blocks(model, s_c, i, Pi_s, X);
            const Mat Acl = cf.A + cf.B1 * bd.theta1;
            const Mat Ccl = cf.C + cf.D1 * bd.theta1;
            const Mat Cbcl = cf.Cb + cf.D1b * bd.theta1;
            const Mat quad2 = bd.S2_closedloop.transpose() *
                              checked_lu(bd.R22(), "Rhat_22").solve(bd.S2_closedloop);
            F = X * Acl + Acl.transpose() * X + Ccl.transpose() * X * Ccl +
                Cbcl.transpose() * Pi_s * Cbcl + bd.theta1.transpose() * cf.R1 * bd.theta1 +
                bd.theta1.transpose() * cf.S1 + cf.S1.transpose() * bd.theta1 + cf.Q - quad2;
        }
        for (int j = 0; j < D; ++j) F += model.generator.lambda(i, j) * P[j];
        out[i] = -sym(F);
    }
}

// d eta/ds for all regimes.
inline void eta_rhs(const GameModel& model, double s_c, double s_stage,
                    const RegimeTrajectory& Pi, const RegimeTrajectory& P,
                    const std::vector<Mat>& eta, OffsetForm form, std::vector<Mat>& out) {
    const int D = model.dims.D;
    const int m = model.dims.m, nv = model.dims.nv;
    for (int i = 0; i < D; ++i) {
        const auto cf = coeffs_at(model, s_c, i);
        const Mat Pi_s = Pi.eval(s_stage, i);
        const Mat P_s = P.eval(s_stage, i);
        const Vec eta_i = eta[i].col(0);
        const BlockData bd = raw_blocks(cf, model.gamma, Pi_s, P_s, eta_i);

        Vec F;
        if (form == OffsetForm::player1) {
            const auto lu22 = checked_lu(bd.R22(), "Rhat_22");
            const Vec psi = bd.offset.tail(nv);
            const Vec phi = bd.offset.head(m) - bd.R12() * lu22.solve(psi);
            const Mat red = bd.Shat1() - bd.R12() * lu22.solve(Mat(bd.Shat2()));
            const Mat schur = bd.R11() - bd.R12() * lu22.solve(Mat(bd.R12().transpose()));
            F = cf.A.transpose() * eta_i + cf.C.transpose() * P_s * cf.sigma +
                cf.Cb.transpose() * Pi_s * cf.sigmabar + P_s * cf.b + cf.q -
                bd.Shat2().transpose() * lu22.solve(psi) -
                red.transpose() * checked_lu(schur, "Schur").solve(phi);
        } else if (form == OffsetForm::player2) {
            const auto lu11 = checked_lu(bd.R11(), "Rhat_11");
            const Vec psibar = bd.offset.head(m);
            const Vec phibar = bd.offset.tail(nv) - bd.R12().transpose() * lu11.solve(psibar);
            const Mat red = bd.Shat2() - bd.R12().transpose() * lu11.solve(Mat(bd.Shat1()));
            const Mat schur = bd.R22() - bd.R12().transpose() * lu11.solve(Mat(bd.R12()));
            F = cf.A.transpose() * eta_i + cf.C.transpose() * P_s * cf.sigma +
                cf.Cb.transpose() * Pi_s * cf.sigmabar + P_s * cf.b + cf.q -
                bd.Shat1().transpose() * lu11.solve(psibar) -
                red.transpose() * checked_lu(schur, "Schur").solve(phibar);
        } else {
            const auto lu = checked_lu(bd.Rhat, "Rhat");
            const Mat RinvS = lu.solve(bd.Shat);
            Mat B(model.dims.n, m + nv), Dm(model.dims.n, m + nv), Db(model.dims.n, m + nv);
            B << cf.B1, cf.B2;
            Dm << cf.D1, cf.D2;
            Db << cf.D1b, cf.D2b;
            Vec rho(m + nv);
            rho.head(m) = cf.rho1;
            rho.tail(nv) = cf.rho2;
            F = (cf.A - B * RinvS).transpose() * eta_i +
                (cf.C - Dm * RinvS).transpose() * P_s * cf.sigma +
                (cf.Cb - Db * RinvS).transpose() * Pi_s * cf.sigmabar -
                bd.Shat.transpose() * lu.solve(rho) + P_s * cf.b + cf.q;
        }
        for (int j = 0; j < D; ++j)
            F += model.generator.lambda(i, j) * eta[j].col(0);
        out[i] = -F;
    }
}

inline void check_finite(const std::vector<Mat>& state, double s) {
    for (size_t i = 0; i < state.size(); ++i)
        if (!state[i].allFinite()) throw NonFiniteValue(s, static_cast<int>(i) + 1);
}

}  // namespace riccati_detail

/// Backward sweep of the coupled Riccati system for the difference channel.
/// Fails with ConditionViolation when the disturbance block loses uniform
/// negativity at a node (gamma too small) and NonFiniteValue on blow-up.
inline RegimeTrajectory solve_pi(const GameModel& model, const TimeGrid& grid,
                                 const CertOptions& opt = {}) {
    using namespace riccati_detail;
    const int D = model.dims.D, n = model.dims.n;
    const int K = grid.segments();

    RegimeTrajectory traj;
    traj.grid = grid;
    traj.D = D;
    traj.rows = n;
    traj.cols = n;
    traj.values.assign(static_cast<size_t>(K + 1) * D, Mat());
    traj.deriv_lo.assign(static_cast<size_t>(K) * D, Mat());
    traj.deriv_hi.assign(static_cast<size_t>(K) * D, Mat());

    std::vector<Mat> Y(D), k1(D), k2(D), k3(D), k4(D), tmp(D);
    for (int i = 0; i < D; ++i) Y[i] = riccati_detail::sym(model.weights[i].G);

    auto certify = [&](int k) {
        for (int i = 0; i < D; ++i) {
            traj.at(k, i) = Y[i];
            const auto cf = coeffs_at(model, grid.nodes[k], i);
            Mat Rbar2 = cf.R2 + cf.D2.transpose() * Y[i] * cf.D2 +
                        cf.D2b.transpose() * Y[i] * cf.D2b;
            for (int j = 0; j < Rbar2.rows(); ++j) Rbar2(j, j) -= model.gamma * model.gamma;
            const double margin = -rsgame::detail::max_eigenvalue(Rbar2);
            if (margin < opt.delta_cond)
                throw ConditionViolation(grid.nodes[k], i + 1, margin, "Rbar2 << 0");
        }
    };

    certify(K);
    for (int k = K - 1; k >= 0; --k) {
        const double s1 = grid.nodes[k + 1], s0 = grid.nodes[k];
        const double h = s0 - s1;
        const double sc = 0.5 * (s0 + s1);  // coefficients are constant on the segment
        const size_t step = static_cast<size_t>(k) * D;

        pi_rhs(model, sc, Y, k1);
        for (int i = 0; i < D; ++i) traj.deriv_hi[step + i] = k1[i];
        for (int i = 0; i < D; ++i) tmp[i] = sym(Y[i] + 0.5 * h * k1[i]);
        pi_rhs(model, sc, tmp, k2);
        for (int i = 0; i < D; ++i) tmp[i] = sym(Y[i] + 0.5 * h * k2[i]);
        pi_rhs(model, sc, tmp, k3);
        for (int i = 0; i < D; ++i) tmp[i] = sym(Y[i] + h * k3[i]);
        pi_rhs(model, sc, tmp, k4);
        for (int i = 0; i < D; ++i)
            Y[i] = sym(Y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));

        check_finite(Y, s0);
        certify(k);
        pi_rhs(model, sc, Y, k1);
        for (int i = 0; i < D; ++i) traj.deriv_lo[step + i] = k1[i];
    }
    return traj;
}

/// Backward sweep for the filtered-channel Riccati matrix, certifying the
/// requested condition set at every node.
inline RegimeTrajectory solve_p(const GameModel& model, const TimeGrid& grid,
                                const RegimeTrajectory& Pi,
                                ConditionSet conditions = ConditionSet::saddle,
                                PForm form = PForm::standard, const CertOptions& opt = {}) {
    using namespace riccati_detail;
    const int D = model.dims.D, n = model.dims.n;
    const int K = grid.segments();

    RegimeTrajectory traj;
    traj.grid = grid;
    traj.D = D;
    traj.rows = n;
    traj.cols = n;
    traj.values.assign(static_cast<size_t>(K + 1) * D, Mat());
    traj.deriv_lo.assign(static_cast<size_t>(K) * D, Mat());
    traj.deriv_hi.assign(static_cast<size_t>(K) * D, Mat());

    std::vector<Mat> Y(D), k1(D), k2(D), k3(D), k4(D), tmp(D);
    for (int i = 0; i < D; ++i) Y[i] = sym(model.weights[i].G);

    const char* cond_name = conditions == ConditionSet::player1   ? "player-1 block conditions"
                            : conditions == ConditionSet::player2 ? "player-2 block conditions"
                                                                  : "saddle block conditions";

    auto certify = [&](int k) {
        for (int i = 0; i < D; ++i) {
            traj.at(k, i) = Y[i];
            const NodeMargins nm =
                node_margins(model, grid.nodes[k], i, Pi.at(k, i), Y[i]);
            if (!nm.satisfies(conditions, opt.delta_cond))
                throw ConditionViolation(grid.nodes[k], i + 1,
                                         nm.min_margin(conditions), cond_name);
        }
    };

    certify(K);
    for (int k = K - 1; k >= 0; --k) {
        const double s1 = grid.nodes[k + 1], s0 = grid.nodes[k];
        const double h = s0 - s1;
        const double sc = 0.5 * (s0 + s1);
        const size_t step = static_cast<size_t>(k) * D;

        p_rhs(model, sc, s1, Pi, Y, form, k1);
        for (int i = 0; i < D; ++i) traj.deriv_hi[step + i] = k1[i];
        for (int i = 0; i < D; ++i) tmp[i] = sym(Y[i] + 0.5 * h * k1[i]);
        p_rhs(model, sc, sc, Pi, tmp, form, k2);
        for (int i = 0; i < D; ++i) tmp[i] = sym(Y[i] + 0.5 * h * k2[i]);
        p_rhs(model, sc, sc, Pi, tmp, form, k3);
        for (int i = 0; i < D; ++i) tmp[i] = sym(Y[i] + h * k3[i]);
        p_rhs(model, sc, s0, Pi, tmp, form, k4);
        for (int i = 0; i < D; ++i)
            Y[i] = sym(Y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));

        check_finite(Y, s0);
        certify(k);
        p_rhs(model, sc, s0, Pi, Y, form, k1);
        for (int i = 0; i < D; ++i) traj.deriv_lo[step + i] = k1[i];
    }
    return traj;
}

/// Backward sweep of the linear equation for the affine correction, in any
/// of the three equivalent forms.
inline RegimeTrajectory solve_eta(const GameModel& model, const TimeGrid& grid,
                                  const RegimeTrajectory& Pi, const RegimeTrajectory& P,
                                  OffsetForm form = OffsetForm::compact) {
    using namespace riccati_detail;
    const int D = model.dims.D, n = model.dims.n;
    const int K = grid.segments();

    RegimeTrajectory traj;
    traj.grid = grid;
    traj.D = D;
    traj.rows = n;
    traj.cols = 1;
    traj.values.assign(static_cast<size_t>(K + 1) * D, Mat());
    traj.deriv_lo.assign(static_cast<size_t>(K) * D, Mat());
    traj.deriv_hi.assign(static_cast<size_t>(K) * D, Mat());

    std::vector<Mat> Y(D), k1(D), k2(D), k3(D), k4(D), tmp(D);
    for (int i = 0; i < D; ++i) Y[i] = model.weights[i].g;

    for (int i = 0; i < D; ++i) traj.at(K, i) = Y[i];
    for (int k = K - 1; k >= 0; --k) {
        const double s1 = grid.nodes[k + 1], s0 = grid.nodes[k];
        const double h = s0 - s1;
        const double sc = 0.5 * (s0 + s1);
        const size_t step = static_cast<size_t>(k) * D;

        eta_rhs(model, sc, s1, Pi, P, Y, form, k1);
        for (int i = 0; i < D; ++i) traj.deriv_hi[step + i] = k1[i];
        for (int i = 0; i < D; ++i) tmp[i] = Y[i] + 0.5 * h * k1[i];
        eta_rhs(model, sc, sc, Pi, P, tmp, form, k2);
        for (int i = 0; i < D; ++i) tmp[i] = Y[i] + 0.5 * h * k2[i];
        eta_rhs(model, sc, sc, Pi, P, tmp, form, k3);
        for (int i = 0; i < D; ++i) tmp[i] = Y[i] + h * k3[i];
        eta_rhs(model, sc, s0, Pi, P, tmp, form, k4);
        for (int i = 0; i < D; ++i)
            Y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

        check_finite(Y, s0);
        for (int i = 0; i < D; ++i) traj.at(k, i) = Y[i];
        eta_rhs(model, sc, s0, Pi, P, Y, form, k1);
        for (int i = 0; i < D; ++i) traj.deriv_lo[step + i] = k1[i];
    }
    return traj;
}

/// Full backward pass: difference-channel Riccati, filtered-channel Riccati,
/// affine correction, and per-node condition certificates.
inline RiccatiSolution solve_all(const GameModel& model, const TimeGrid& grid,
                                 ConditionSet conditions = ConditionSet::saddle,
                                 const CertOptions& opt = {}) {
    RiccatiSolution sol;
    sol.grid = grid;
    sol.conditions = conditions;
    sol.delta_cond = opt.delta_cond;
    sol.Pi = solve_pi(model, grid, opt);
    sol.P = solve_p(model, grid, sol.Pi, conditions, PForm::standard, opt);
    sol.eta = solve_eta(model, grid, sol.Pi, sol.P, OffsetForm::compact);

    const int D = model.dims.D;
    const int K = grid.segments();
    sol.margins.resize(static_cast<size_t>(K + 1) * D);
    for (int k = 0; k <= K; ++k)
        for (int i = 0; i < D; ++i)
            sol.margins[static_cast<size_t>(k) * D + i] = riccati_detail::node_margins(
                model, grid.nodes[k], i, sol.Pi.at(k, i), sol.P.at(k, i));
    return sol;
}

}  // namespace rsgame
