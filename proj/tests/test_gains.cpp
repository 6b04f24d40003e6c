#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rsgame/gains.hpp"
#include "rsgame/scenario.hpp"
#include "test_models.hpp"

using namespace rsgame;
using rsgame::testing::market_model;

namespace {

struct Solved {
    GameModel model;
    TimeGrid grid;
    RiccatiSolution sol;
    SaddleGains gains;
};

Solved solve_market(double ds = 1e-2) {
    Solved s{market_model(), {}, {}, {}};
    s.grid = make_time_grid(0.0, s.model.dims.T, ds);
    s.sol = solve_all(s.model, s.grid);
    s.gains = synthesize(s.sol, s.model);
    return s;
}

}  // namespace

TEST_CASE("stationarity residuals vanish at every node") {
    const Solved s = solve_market();
    const int K = s.grid.segments();
    for (int k = 0; k <= K; ++k) {
        for (int i = 0; i < 2; ++i) {
            const BlockData bd = blocks(s.model, s.grid.nodes[k], i, s.sol.Pi.at(k, i),
                                        s.sol.P.at(k, i), s.sol.eta.at(k, i).col(0));
            const Mat r_theta = bd.Rhat * s.gains.theta_hat_at(k, i) + bd.Shat;
            CHECK(r_theta.norm() <= 1e-9 * (1.0 + bd.Shat.norm()));

            const Mat r_tilde = bd.Rbar2 * s.gains.theta_tilde2_at(k, i) + bd.Sbar2;
            CHECK(r_tilde.norm() <= 1e-9 * (1.0 + bd.Sbar2.norm()));

            const Vec r_off = bd.Rhat * s.gains.vbar_at(k, i) + bd.offset;
            CHECK(r_off.norm() <= 1e-9 * (1.0 + bd.offset.norm()));
        }
    }
}

TEST_CASE("homogeneous scenario has zero gain offsets") {
    const Solved s = solve_market();
    for (const auto& v : s.gains.vbar) CHECK(v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("difference gain vanishes where its source term vanishes") {
    // remove every term feeding the difference channel's cross block
    testing::ScalarParams p;
    p.B2 = p.D2 = p.D2bar = 0.0;
    p.S2 = 0.0;
    const GameModel model = testing::duplicated_scalar_model(p, 1.5, 2.0);
    const TimeGrid grid = make_time_grid(0.0, 1.5, 1e-2);
    const RiccatiSolution sol = solve_all(model, grid);
    const SaddleGains gains = synthesize(sol, model);
    for (const auto& t : gains.theta_tilde2) CHECK(t.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("player syntheses and the direct solve agree node-wise") {
    for (const GameModel& model :
         {market_model(), testing::randomized_inhomogeneous_scalar(42),
          testing::planar_model()}) {
        const TimeGrid grid = make_time_grid(0.0, model.dims.T, 2e-2);
        const RiccatiSolution sol = solve_all(model, grid);
        const SaddleGains gains = synthesize(sol, model);
        const Player1Synthesis p1 = player1_pair(sol, model);
        const Player2Synthesis p2 = player2_pair(sol, model);

        const int K = grid.segments();
        const int m = model.dims.m, nv = model.dims.nv;
        for (int k = 0; k <= K; ++k) {
            for (int i = 0; i < model.dims.D; ++i) {
                // route 1: control first, then the best-response disturbance
                const Mat u_gain_1 = p1.ku(k, i);
                const Vec u_off_1 = p1.offset_u(k, i);
                const Mat v_gain_1 = p1.fu(k, i) * u_gain_1 + p1.kx(k, i);
                const Vec v_off_1 = p1.fu(k, i) * u_off_1 + p1.offset_v(k, i);

                // route 2: disturbance first, then the best-response control
                const Mat v_gain_2 = p2.kv(k, i);
                const Vec v_off_2 = p2.offset_v(k, i);
                const Mat u_gain_2 = p2.fv(k, i) * v_gain_2 + p2.kx1(k, i);
                const Vec u_off_2 = p2.fv(k, i) * v_off_2 + p2.offset_u(k, i);

                // route 3: stacked solve
                const Mat theta = gains.theta_hat_at(k, i);
                const Vec vbar = gains.vbar_at(k, i);

                const double scale_u = 1.0 + theta.topRows(m).norm();
                const double scale_v = 1.0 + theta.bottomRows(nv).norm();
                CHECK((u_gain_1 - u_gain_2).norm() <= 1e-9 * scale_u);
                CHECK((u_gain_1 - theta.topRows(m)).norm() <= 1e-9 * scale_u);
                CHECK((v_gain_1 - v_gain_2).norm() <= 1e-9 * scale_v);
                CHECK((v_gain_1 - theta.bottomRows(nv)).norm() <= 1e-9 * scale_v);

                const double oscale = 1.0 + vbar.norm();
                CHECK((u_off_1 - u_off_2).norm() <= 1e-9 * oscale);
                CHECK((u_off_1 - vbar.head(m)).norm() <= 1e-9 * oscale);
                CHECK((v_off_1 - v_off_2).norm() <= 1e-9 * oscale);
                CHECK((v_off_1 - vbar.tail(nv)).norm() <= 1e-9 * oscale);

                // the difference-channel gain is shared by construction
                CHECK((p1.kt(k, i) - gains.theta_tilde2_at(k, i)).norm() == 0.0);
                CHECK((p2.kt(k, i) - gains.theta_tilde2_at(k, i)).norm() == 0.0);
            }
        }
    }
}

TEST_CASE("stationarity solve basics") {
    SUBCASE("zero data maps to zero") {
        const Mat Rhat = (Mat(2, 2) << 0.3, 0.05, 0.05, -0.8).finished();
        const Mat Shat = (Mat(2, 1) << 0.2, -0.1).finished();
        const Vec z = stationarity_solve(Rhat, Shat, Vec::Zero(2), Vec::Zero(1));
        CHECK(z.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("scalar market node values reproduce the 2x2 solve") {
        const GameModel model = market_model();
        const Mat half = Mat::Constant(1, 1, 0.5);
        const BlockData bd = blocks(model, 0.0, 0, half, half, Vec::Zero(1));
        const Vec xhat = Vec::Constant(1, 1.3);
        const Vec z = stationarity_solve(bd.Rhat, bd.Shat, bd.offset, xhat);
        const Vec direct = -bd.Rhat.inverse() * (bd.Shat * xhat + bd.offset);
        CHECK((z - direct).cwiseAbs().maxCoeff() <= 1e-14);
    }

    SUBCASE("random well-conditioned systems have tiny residuals") {
        RngStream rng(17, 5, 0);
        std::uint64_t ctr = 0;
        auto u = [&] { return 2.0 * rng.uniform(ctr++) - 1.0; };
        for (int trial = 0; trial < 1000; ++trial) {
            Mat A(2, 2);
            A << u(), u(), u(), u();
            Mat Rhat(3, 3);
            Rhat.setZero();
            Rhat.topLeftCorner(2, 2) = A * A.transpose() + Mat::Identity(2, 2);
            Rhat(2, 2) = -(1.0 + u() * u());
            Rhat(0, 2) = Rhat(2, 0) = 0.3 * u();
            Rhat(1, 2) = Rhat(2, 1) = 0.3 * u();
            Mat Shat(3, 2);
            Shat << u(), u(), u(), u(), u(), u();
            Vec offset(3);
            offset << u(), u(), u();
            Vec xhat(2);
            xhat << u(), u();

            const Vec z = stationarity_solve(Rhat, Shat, offset, xhat);
            const Vec residual = Rhat * z + Shat * xhat + offset;
            CHECK(residual.cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("gain interpolation is continuous across nodes") {
    const Solved s = solve_market(5e-2);
    for (int i = 0; i < 2; ++i) {
        for (double sq : {0.31, 0.77, 1.93}) {
            const int k = s.grid.locate(sq);
            const double s0 = s.grid.nodes[k], s1 = s.grid.nodes[k + 1];
            const double w = (sq - s0) / (s1 - s0);
            const Mat expect =
                (1.0 - w) * s.gains.theta_hat_at(k, i) + w * s.gains.theta_hat_at(k + 1, i);
            CHECK((s.gains.theta_hat_eval(sq, i) - expect).cwiseAbs().maxCoeff() <= 1e-15);
            // endpoints match the node tables exactly
            CHECK((s.gains.theta_hat_eval(s0, i) - s.gains.theta_hat_at(k, i))
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("raising the attenuation level mainly relaxes the disturbance gains") {
    // the control gain barely moves with the attenuation level, while both
    // disturbance gain blocks shrink substantially
    auto mean_abs = [](const SaddleGains& g, int row, int block_nv) {
        double acc = 0.0;
        int cnt = 0;
        for (size_t k = 0; k < g.grid.nodes.size(); ++k) {
            if (g.grid.nodes[k] > 3.0) break;
            for (int i = 0; i < g.D; ++i) {
                acc += block_nv < 0 ? std::abs(g.theta_hat_at(static_cast<int>(k), i)(row, 0))
                                    : std::abs(g.theta_tilde2_at(static_cast<int>(k), i)(0, 0));
                ++cnt;
            }
        }
        return acc / cnt;
    };

    const GameModel base = market_model();
    const TimeGrid grid = make_time_grid(0.0, base.dims.T, 1e-2);
    const SaddleGains g1 = synthesize(solve_all(with_gamma(base, 1.0), grid),
                                      with_gamma(base, 1.0));
    const SaddleGains g2 = synthesize(solve_all(with_gamma(base, 2.0), grid),
                                      with_gamma(base, 2.0));

    const double t1_lo = mean_abs(g1, 0, -1), t1_hi = mean_abs(g2, 0, -1);
    const double t2_lo = mean_abs(g1, 1, -1), t2_hi = mean_abs(g2, 1, -1);
    const double tt_lo = mean_abs(g1, 0, 1), tt_hi = mean_abs(g2, 0, 1);
    CHECK(std::abs(t1_hi - t1_lo) / t1_lo < 0.05);
    CHECK(t2_hi < 0.5 * t2_lo);
    CHECK(tt_hi < 0.5 * tt_lo);
}

TEST_CASE("interpolated gains are consistent under grid refinement") {
    const Solved coarse = solve_market(0.05);
    const Solved fine = solve_market(0.025);
    for (int i = 0; i < 2; ++i) {
        for (double sq : {0.113, 0.871, 1.637, 2.502, 3.341}) {
            const double a = coarse.gains.theta_hat_eval(sq, i)(0, 0);
            const double b = fine.gains.theta_hat_eval(sq, i)(0, 0);
            CHECK(std::abs(a - b) <= 2e-4);  // second-order interpolation gap
        }
    }
}

TEST_CASE("bear regime trades weaker control for stronger disturbance gains") {
    const Solved s = solve_market(1e-2);
    // away from the terminal region the bear-market control gain is weaker
    // and both disturbance gains are stronger than their bull counterparts
    for (int k = 0; k <= s.grid.segments(); k += 10) {
        const double sq = s.grid.nodes[k];
        if (sq > 3.0) break;
        const double t1_bear = std::abs(s.gains.theta1_eval(sq, 0)(0, 0));
        const double t1_bull = std::abs(s.gains.theta1_eval(sq, 1)(0, 0));
        const double t2_bear = std::abs(s.gains.theta2_eval(sq, 0)(0, 0));
        const double t2_bull = std::abs(s.gains.theta2_eval(sq, 1)(0, 0));
        const double tt_bear = std::abs(s.gains.theta_tilde2_eval(sq, 0)(0, 0));
        const double tt_bull = std::abs(s.gains.theta_tilde2_eval(sq, 1)(0, 0));
        CHECK(t1_bear < t1_bull);
        CHECK(t2_bear > t2_bull);
        CHECK(tt_bear > tt_bull);
    }
}
