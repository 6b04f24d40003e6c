#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "rsgame/chain.hpp"
#include "rsgame/scenario.hpp"

using namespace rsgame;

namespace {

Generator market_generator() {
    Generator g;
    g.lambda = Mat(2, 2);
    g.lambda << -1.0, 1.0, 2.0, -2.0;
    return g;
}

}  // namespace

TEST_CASE("holding times are exponential with the diagonal rate") {
    const Generator gen = market_generator();
    const int samples = 100000;
    for (int i0 = 0; i0 < 2; ++i0) {
        const double rate = -gen.lambda(i0, i0);
        double sum = 0.0;
        int count = 0;
        for (int p = 0; p < samples; ++p) {
            const ChainPath path = sample_path(gen, i0, 0.0, 40.0, chain_stream(11, p));
            if (path.jumps() == 0) continue;  // vanishing probability at this horizon
            sum += path.jump_times.front();
            ++count;
        }
        const double mean = sum / count;
        CHECK(mean == doctest::Approx(1.0 / rate).epsilon(0.02));
    }
}

TEST_CASE("one-step frequencies match the transition matrix") {
    const Generator gen = market_generator();
    const double dt = 0.1;
    const Mat Pdt = transition_matrix(gen, dt);
    const int samples = 100000;

    for (int i0 = 0; i0 < 2; ++i0) {
        std::vector<int> counts(2, 0);
        for (int p = 0; p < samples; ++p) {
            const ChainPath path = sample_path(gen, i0, 0.0, dt, chain_stream(23 + i0, p));
            ++counts[path.regime_at(dt)];
        }
        for (int j = 0; j < 2; ++j) {
            const double prob = Pdt(i0, j);
            const double freq = static_cast<double>(counts[j]) / samples;
            const double sigma = std::sqrt(prob * (1.0 - prob) / samples);
            CHECK(std::abs(freq - prob) <= 3.0 * sigma);
        }
    }
}

TEST_CASE("transition matrix basics") {
    const Generator gen = market_generator();
    CHECK((transition_matrix(gen, 0.0) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);

    // eigenvalues of the generator are 0 and -3, which gives the closed form
    const Mat P = transition_matrix(gen, 0.1);
    const double expect = (2.0 + std::exp(-0.3)) / 3.0;
    CHECK(P(0, 0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(P(0, 1) == doctest::Approx((1.0 - std::exp(-0.3)) / 3.0).epsilon(1e-12));

    // rows sum to one for assorted generators
    for (double a : {0.3, 1.7, 4.0}) {
        Generator g;
        g.lambda = Mat(3, 3);
        g.lambda << -a, 0.4 * a, 0.6 * a, a, -2 * a, a, 0.2 * a, 0.3 * a, -0.5 * a;
        const Mat Pd = transition_matrix(g, 0.37);
        for (int i = 0; i < 3; ++i) CHECK(Pd.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("regime lookup follows right continuity") {
    ChainPath path;
    path.t0 = 0.0;
    path.T = 2.0;
    path.states = {0};
    CHECK(path.regime_at(0.0) == 0);
    CHECK(path.regime_at(1.3) == 0);

    path.jump_times = {0.75};
    path.states = {0, 1};
    CHECK(path.regime_at(0.75) == 1);
    CHECK(path.regime_at(0.75, /*left=*/true) == 0);
    CHECK(path.regime_at(0.74) == 0);
    CHECK(path.regime_at(2.0) == 1);
    CHECK_THROWS_AS(path.regime_at(2.5), std::out_of_range);
    CHECK(path.jump_count(0, 1) == 1);
    CHECK(path.jump_count(1, 0) == 0);
    CHECK(path.occupancy(0) == doctest::Approx(0.75));
    CHECK(path.occupancy(1) == doctest::Approx(1.25));
}

TEST_CASE("long-run occupancy approaches the stationary distribution") {
    // pi solves pi * Lambda = 0: pi = (2/3, 1/3)
    const Generator gen = market_generator();
    double occ0 = 0.0, total = 0.0;
    for (int p = 0; p < 200; ++p) {
        const ChainPath path = sample_path(gen, p % 2, 0.0, 50.0, chain_stream(5, p));
        occ0 += path.occupancy(0);
        total += 50.0;
    }
    CHECK(occ0 / total == doctest::Approx(2.0 / 3.0).epsilon(0.03));
}

TEST_CASE("compensated jump counts average to zero") {
    const Generator gen = market_generator();
    const int n_paths = 10000;
    const double T = 3.5;
    for (int from = 0; from < 2; ++from) {
        for (int to = 0; to < 2; ++to) {
            if (from == to) continue;
            std::vector<double> residuals(n_paths);
            for (int p = 0; p < n_paths; ++p) {
                const ChainPath path = sample_path(gen, 0, 0.0, T, chain_stream(31, p));
                residuals[p] = path.jump_count(from, to) -
                               gen.lambda(from, to) * path.occupancy(from);
            }
            double mean = 0.0;
            for (double r : residuals) mean += r;
            mean /= n_paths;
            double var = 0.0;
            for (double r : residuals) var += (r - mean) * (r - mean);
            var /= (n_paths - 1);
            const double se = std::sqrt(var / n_paths);
            CHECK(std::abs(mean) <= 3.0 * se);
        }
    }
}

TEST_CASE("occupation probabilities track the matrix exponential") {
    const Generator gen = market_generator();
    std::vector<double> nodes;
    for (int k = 0; k <= 100; ++k) nodes.push_back(0.035 * k);
    const auto p = occupation_probabilities(gen, 0, nodes);
    for (size_t k = 0; k < nodes.size(); k += 10) {
        const Mat Pk = transition_matrix(gen, nodes[k]);
        CHECK(p[k](0) == doctest::Approx(Pk(0, 0)).epsilon(1e-5));
        CHECK(p[k](1) == doctest::Approx(Pk(0, 1)).epsilon(1e-5));
        CHECK(p[k].sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sampling is reproducible per (seed, path index)") {
    const Generator gen = market_generator();
    const ChainPath a = sample_path(gen, 0, 0.0, 10.0, chain_stream(99, 7));
    const ChainPath b = sample_path(gen, 0, 0.0, 10.0, chain_stream(99, 7));
    const ChainPath c = sample_path(gen, 0, 0.0, 10.0, chain_stream(99, 8));
    REQUIRE(a.jump_times.size() == b.jump_times.size());
    for (size_t k = 0; k < a.jump_times.size(); ++k)
        CHECK(a.jump_times[k] == b.jump_times[k]);
    CHECK(a.jump_times != c.jump_times);
}
