#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rsgame/riccati.hpp"
#include "rsgame/scenario.hpp"
#include "test_models.hpp"

using namespace rsgame;
using rsgame::testing::market_model;

namespace {

double max_node_diff(const RegimeTrajectory& a, const RegimeTrajectory& b) {
    double worst = 0.0;
    for (size_t k = 0; k < a.values.size(); ++k)
        worst = std::max(worst, (a.values[k] - b.values[k]).cwiseAbs().maxCoeff());
    return worst;
}

}  // namespace

TEST_CASE("completion blocks at tabulated points") {
    const GameModel model = market_model();
    const Mat zero = Mat::Zero(1, 1);
    const Vec eta0 = Vec::Zero(1);

    SUBCASE("zero Riccati values, bear regime") {
        const BlockData bd = blocks(model, 0.0, 0, zero, zero, eta0);
        CHECK(bd.Rbar2(0, 0) == doctest::Approx(-0.9).epsilon(1e-14));
        CHECK(bd.Rhat(0, 0) == doctest::Approx(0.2).epsilon(1e-14));
        CHECK(bd.Rhat(1, 1) == doctest::Approx(-0.9).epsilon(1e-14));
        CHECK(bd.Rhat(0, 1) == doctest::Approx(0.0));
        CHECK(bd.Sbar2(0, 0) == doctest::Approx(-0.1).epsilon(1e-14));  // S2 alone
    }

    SUBCASE("zero coefficients leave only the weights") {
        GameModel degenerate = market_model();
        for (auto& c : degenerate.coeffs) {
            const Mat z = Mat::Zero(1, 1);
            c.A = c.B1 = c.B2 = c.C = c.D1 = c.D2 = c.Cbar = c.D1bar = c.D2bar =
                Piecewise<Mat>(z);
        }
        const Mat eye = Mat::Identity(1, 1);
        const BlockData bd = blocks(degenerate, 1.0, 0, eye, eye, eta0);
        CHECK(bd.Rbar2(0, 0) == doctest::Approx(0.1 - 1.0).epsilon(1e-14));
        const StackedCoeffs sc = stacked_views(degenerate, 1.0, 0);
        CHECK((bd.Rhat - sc.Rgamma).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("mid-range Riccati values, bear regime") {
        const Mat half = Mat::Constant(1, 1, 0.5);
        const BlockData bd = blocks(model, 0.0, 0, half, half, eta0);
        // R1 + D1*P*D1 + D1bar*Pi*D1bar = 0.2 + 0.3*0.5*0.3 + 0.3*0.5*0.3
        CHECK(bd.Rhat(0, 0) == doctest::Approx(0.29).epsilon(1e-14));
    }
}

TEST_CASE("block elimination identities") {
    RngStream rng(3, 99, 0);
    std::uint64_t ctr = 0;
    auto u = [&] { return 2.0 * rng.uniform(ctr++) - 1.0; };

    SUBCASE("random blocks, both splittings") {
        for (int trial = 0; trial < 100; ++trial) {
            const int m = 2, nv = 2;
            Mat A(m, m), Bm(nv, nv), R12(m, nv), S(m + nv, 3);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c) A(r, c) = u();
            for (int r = 0; r < nv; ++r)
                for (int c = 0; c < nv; ++c) Bm(r, c) = u();
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < nv; ++c) R12(r, c) = u();
            for (int r = 0; r < m + nv; ++r)
                for (int c = 0; c < 3; ++c) S(r, c) = u();

            Mat Rhat(m + nv, m + nv);
            Rhat.topLeftCorner(m, m) = A * A.transpose() + Mat::Identity(m, m);
            Rhat.bottomRightCorner(nv, nv) = -(Bm * Bm.transpose() + Mat::Identity(nv, nv));
            Rhat.topRightCorner(m, nv) = 0.3 * R12;
            Rhat.bottomLeftCorner(nv, m) = 0.3 * R12.transpose();

            const auto [r1, r2] = schur_split_residuals(Rhat, S, m);
            CHECK(r1 <= 1e-10);
            CHECK(r2 <= 1e-10);
        }
    }

    SUBCASE("block-diagonal case degenerates to independent solves") {
        Mat Rhat = Mat::Zero(2, 2);
        Rhat(0, 0) = 0.29;
        Rhat(1, 1) = -0.9;
        Mat S(2, 1);
        S << 0.31, -0.145;
        const auto [r1, r2] = schur_split_residuals(Rhat, S, 1);
        CHECK(r1 <= 1e-14);
        CHECK(r2 <= 1e-14);

        const double direct = S(0, 0) * S(0, 0) / 0.29 + S(1, 0) * S(1, 0) / (-0.9);
        const Mat full = S.transpose() * Rhat.inverse() * S;
        CHECK(full(0, 0) == doctest::Approx(direct).epsilon(1e-14));
    }
}

TEST_CASE("difference-channel Riccati sweep on the market scenario") {
    const GameModel model = market_model();
    const TimeGrid grid = make_time_grid(0.0, model.dims.T, 1e-3);
    const RegimeTrajectory Pi = solve_pi(model, grid);

    const int K = grid.segments();
    for (int i = 0; i < 2; ++i) {
        CHECK(Pi.at(K, i)(0, 0) == 0.0);  // terminal weight is zero, exactly
        for (int k = 0; k <= K; k += 100) CHECK(Pi.at(k, i)(0, 0) >= 0.0);
        CHECK(Pi.at(0, i)(0, 0) > 0.0);
    }
}

TEST_CASE("zero disturbance channel and zero weights give the zero solution") {
    testing::ScalarParams p;
    p.B2 = p.D2 = p.D2bar = 0.0;
    p.Q = 0.0;
    p.S1 = p.S2 = 0.0;
    p.G = 0.0;
    const GameModel model = testing::duplicated_scalar_model(p, 2.0, 1.0);
    const TimeGrid grid = make_time_grid(0.0, 2.0, 1e-2);
    const RegimeTrajectory Pi = solve_pi(model, grid);
    for (const auto& m : Pi.values) CHECK(m.cwiseAbs().maxCoeff() == 0.0);

    const RegimeTrajectory P = solve_p(model, grid, Pi);
    for (const auto& m : P.values) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("filtered-channel sweep and the closed-loop rearrangement agree") {
    const GameModel model = market_model();
    const TimeGrid grid = make_time_grid(0.0, model.dims.T, 1e-2);
    const RegimeTrajectory Pi = solve_pi(model, grid);
    const RegimeTrajectory P_std = solve_p(model, grid, Pi, ConditionSet::saddle,
                                           PForm::standard);
    const RegimeTrajectory P_cl = solve_p(model, grid, Pi, ConditionSet::saddle,
                                          PForm::closed_loop);
    CHECK(max_node_diff(P_std, P_cl) <= 1e-10);

    const int K = grid.segments();
    for (int i = 0; i < 2; ++i) {
        CHECK(P_std.at(K, i)(0, 0) == 0.0);
        CHECK(P_std.at(0, i)(0, 0) > 0.0);
    }
}

TEST_CASE("affine term vanishes for homogeneous data in every form") {
    const GameModel model = market_model();
    const TimeGrid grid = make_time_grid(0.0, model.dims.T, 1e-2);
    const RegimeTrajectory Pi = solve_pi(model, grid);
    const RegimeTrajectory P = solve_p(model, grid, Pi);
    for (OffsetForm form : {OffsetForm::player1, OffsetForm::player2, OffsetForm::compact}) {
        const RegimeTrajectory eta = solve_eta(model, grid, Pi, P, form);
        for (const auto& m : eta.values) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("the three affine-term forms coincide on inhomogeneous data") {
    const GameModel model = testing::randomized_inhomogeneous_scalar(42);
    REQUIRE(validate(model).pass());
    const TimeGrid grid = make_time_grid(0.0, model.dims.T, 1e-2);
    const RegimeTrajectory Pi = solve_pi(model, grid);
    const RegimeTrajectory P = solve_p(model, grid, Pi);

    const RegimeTrajectory e1 = solve_eta(model, grid, Pi, P, OffsetForm::player1);
    const RegimeTrajectory e2 = solve_eta(model, grid, Pi, P, OffsetForm::player2);
    const RegimeTrajectory ec = solve_eta(model, grid, Pi, P, OffsetForm::compact);
    CHECK(max_node_diff(e1, e2) <= 1e-10);
    CHECK(max_node_diff(e1, ec) <= 1e-10);
    CHECK(ec.at(0, 0).cwiseAbs().maxCoeff() > 0.0);  // genuinely nonzero
}

TEST_CASE("full solve certifies the market scenario and rejects tiny gamma") {
    const GameModel model = market_model();
    const TimeGrid grid = make_time_grid(0.0, model.dims.T, 1e-2);

    const RiccatiSolution sol = solve_all(model, grid);
    CHECK(sol.min_margin(ConditionSet::saddle) > 0.0);
    CHECK(sol.min_margin(ConditionSet::player1) > 0.0);
    CHECK(sol.min_margin(ConditionSet::player2) > 0.0);
    for (const auto& nm : sol.margins) CHECK(nm.rbar2 > 0.0);

    CHECK_THROWS_AS((void)solve_all(with_gamma(model, 0.05), grid), ConditionViolation);
}

TEST_CASE("terminal conditions hold exactly") {
    const GameModel model = testing::randomized_inhomogeneous_scalar(7);
    const TimeGrid grid = make_time_grid(0.0, model.dims.T, 1e-2);
    const RiccatiSolution sol = solve_all(model, grid);
    const int K = grid.segments();
    for (int i = 0; i < 2; ++i) {
        CHECK(sol.Pi.at(K, i)(0, 0) == model.weights[i].G(0, 0));
        CHECK(sol.P.at(K, i)(0, 0) == model.weights[i].G(0, 0));
        CHECK(sol.eta.at(K, i)(0, 0) == model.weights[i].g(0));
    }
}

TEST_CASE("matrix-valued sweep preserves symmetry") {
    const GameModel model = testing::planar_model();
    const TimeGrid grid = make_time_grid(0.0, model.dims.T, 5e-3);
    const RiccatiSolution sol = solve_all(model, grid);
    for (const auto& m : sol.Pi.values)
        CHECK((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    for (const auto& m : sol.P.values)
        CHECK((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("coarse sweep matches a hundredfold finer reference") {
    // fine-step self-convergence with the disturbance channels active
    testing::ScalarParams p;  // bear-market coefficients, duplicated
    const GameModel model = testing::duplicated_scalar_model(p, 1.5, 1.0);
    const TimeGrid coarse = make_time_grid(0.0, 1.5, 1e-3);
    const TimeGrid fine = make_time_grid(0.0, 1.5, 1e-5);
    const RegimeTrajectory Pi_c = solve_pi(model, coarse);
    const RegimeTrajectory Pi_f = solve_pi(model, fine);

    double worst = 0.0;
    for (int k = 0; k <= coarse.segments(); k += 25) {
        const int kf = k * 100;
        REQUIRE(fine.nodes[kf] == doctest::Approx(coarse.nodes[k]).epsilon(1e-12));
        for (int i = 0; i < 2; ++i) {
            const double ref = Pi_f.at(kf, i)(0, 0);
            worst = std::max(worst, std::abs(Pi_c.at(k, i)(0, 0) - ref) /
                                        std::max(1e-12, std::abs(ref)));
        }
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("grid refinement converges at fourth order") {
    const GameModel model = market_model();
    auto solve_at = [&](double ds) {
        const TimeGrid grid = make_time_grid(0.0, model.dims.T, ds);
        const RegimeTrajectory Pi = solve_pi(model, grid);
        return solve_p(model, grid, Pi);
    };
    const RegimeTrajectory a = solve_at(0.025);
    const RegimeTrajectory b = solve_at(0.0125);
    const RegimeTrajectory c = solve_at(0.00625);

    // compare at the shared initial node, the most error-accumulated point
    double e1 = 0.0, e2 = 0.0;
    for (int i = 0; i < 2; ++i) {
        e1 = std::max(e1, (a.at(0, i) - b.at(0, i)).cwiseAbs().maxCoeff());
        e2 = std::max(e2, (b.at(0, i) - c.at(0, i)).cwiseAbs().maxCoeff());
    }
    const double ratio = e1 / e2;
    CHECK(ratio >= 8.0);
    CHECK(ratio <= 32.0);
}

TEST_CASE("piecewise coefficients stitch across their breakpoints") {
    // A jumps at s = 1; integrating through the breakpoint must equal the
    // two-stage integration that restarts from the later segment's solution
    testing::ScalarParams prm;
    GameModel model = testing::duplicated_scalar_model(prm, 2.0, 1.0);
    const Mat lo = Mat::Constant(1, 1, 0.1), hi = Mat::Constant(1, 1, 0.3);
    for (auto& c : model.coeffs) c.A = Piecewise<Mat>({1.0}, {lo, hi});

    const double ds = 0.01;
    const TimeGrid grid = make_time_grid(0.0, 2.0, ds, model.breakpoints());
    const RegimeTrajectory Pi = solve_pi(model, grid);
    const RegimeTrajectory P = solve_p(model, grid, Pi);

    // stage 1: constant-A model on [1, 2]
    GameModel late = model;
    for (auto& c : late.coeffs) c.A = Piecewise<Mat>(hi);
    const TimeGrid grid_late = make_time_grid(1.0, 2.0, ds);
    const RegimeTrajectory Pi_late = solve_pi(late, grid_late);
    const RegimeTrajectory P_late = solve_p(late, grid_late, Pi_late);

    // stage 2: constant-A model on [0, 1] restarted from the stitch point;
    // the difference channel restarts from its own stitch value
    GameModel early = model;
    early.dims.T = 1.0;
    for (auto& c : early.coeffs) c.A = Piecewise<Mat>(lo);
    const TimeGrid grid_early = make_time_grid(0.0, 1.0, ds);
    for (int i = 0; i < 2; ++i) early.weights[i].G = Pi_late.at(0, i);
    const RegimeTrajectory Pi_ref = solve_pi(early, grid_early);
    for (int i = 0; i < 2; ++i) early.weights[i].G = P_late.at(0, i);
    const RegimeTrajectory P_ref = solve_p(early, grid_early, Pi_ref);

    const int k_break = grid.locate(1.0 - 1e-9) + 1;
    REQUIRE(grid.nodes[k_break] == doctest::Approx(1.0));
    for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(P.at(k_break, i)(0, 0) - P_late.at(0, i)(0, 0)) <= 1e-10);
        for (int k = 0; k <= grid_early.segments(); k += 20)
            CHECK(std::abs(P.at(k, i)(0, 0) - P_ref.at(k, i)(0, 0)) <= 1e-9);
    }
}

TEST_CASE("non-finite blow-up is caught rather than propagated") {
    // gamma barely above the terminal feasibility edge: the sweep starts but
    // quadratic growth escapes well before the far end of a long horizon
    testing::ScalarParams p;
    p.B2 = -1.0;
    p.D2 = 0.0;
    p.D2bar = 0.0;
    p.Q = 4.0;
    p.S1 = p.S2 = 0.0;
    p.G = 0.0;
    p.R2 = 0.1;
    const GameModel model = testing::duplicated_scalar_model(p, 50.0, 0.45);
    const TimeGrid grid = make_time_grid(0.0, 50.0, 1e-3);
    CHECK_THROWS_AS((void)solve_pi(model, grid), SolverError);
}
