#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rsgame/chain.hpp"
#include "rsgame/gains.hpp"
#include "rsgame/model.hpp"
#include "rsgame/riccati.hpp"
#include "rsgame/sim.hpp"

namespace rsgame {

// ---------------------------------------------------------------------------
// Monte-Carlo cost estimation
// ---------------------------------------------------------------------------

struct CostEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n_paths = 0;
    std::optional<double> gamma_used;  // absent: the plain cost functional
};

/// Per-path functionals: the plain cost, its soft-constrained variant, and
/// the disturbance energy. The soft cost satisfies
///   J_gamma = J - gamma^2 * energy
/// path-wise by construction (same node values, same quadrature).
struct PathCost {
    double J = 0.0;
    double J_gamma = 0.0;
    double energy = 0.0;  // integral of |v|^2
};

namespace eval_detail {

/// Trapezoid accumulator over simulation nodes for the running cost, plus
/// the terminal term. gamma2 scales the |v|^2 soft penalty.
struct CostAccumulator {
    const RunTable& rt;
    double gamma2;

    double J = 0.0, Jg = 0.0, energy = 0.0;
    double prev_s = 0.0, prev_lJ = 0.0, prev_v2 = 0.0;
    bool first = true;
    Vec last_x;
    int last_regime = 0;

    CostAccumulator(const RunTable& rt_, double gamma2_) : rt(rt_), gamma2(gamma2_) {}

    void operator()(const SimNode& nd) {
        const CoeffBundle& w = rt.bundle(nd.piece, nd.regime);
        using sim_detail::bilinear;
        using sim_detail::dot;
        double lJ = bilinear(nd.x, w.Q, nd.x) + bilinear(nd.u, w.R1, nd.u) +
                    bilinear(nd.v, w.R2, nd.v) + 2.0 * bilinear(nd.u, w.S1, nd.x) +
                    2.0 * bilinear(nd.v, w.S2, nd.x) + 2.0 * dot(w.q, nd.x) +
                    2.0 * dot(w.rho1, nd.u) + 2.0 * dot(w.rho2, nd.v);
        const double v2 = dot(nd.v, nd.v);
        if (!first) {
            const double h2 = 0.5 * (nd.s - prev_s);
            J += h2 * (prev_lJ + lJ);
            energy += h2 * (prev_v2 + v2);
            Jg += h2 * ((prev_lJ - gamma2 * prev_v2) + (lJ - gamma2 * v2));
        }
        first = false;
        prev_s = nd.s;
        prev_lJ = lJ;
        prev_v2 = v2;
        last_x = nd.x;
        last_regime = nd.regime;
    }

    PathCost finish() {
        const double terminal = sim_detail::bilinear(last_x, rt.G[last_regime], last_x) +
                                2.0 * sim_detail::dot(rt.gvec[last_regime], last_x);
        return {J + terminal, Jg + terminal, energy};
    }
};

inline std::pair<double, double> mean_stderr(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

}  // namespace eval_detail

/// Per-path cost samples under the given policies; deterministic in
/// (seed, grid, policies) regardless of thread count.
inline std::vector<PathCost> cost_mc_samples(const GameModel& model, const TimeGrid& grid,
                                             const ControlPolicy& control,
                                             const DisturbancePolicy& disturbance,
                                             double gamma, std::size_t n_paths,
                                             std::uint64_t seed, int threads = 1) {
    const RunTable rt = make_run_table(model, grid, control, disturbance);
    std::vector<PathCost> out(n_paths);
    parallel_for_paths(n_paths, threads, [&](std::size_t p) {
        const ChainPath chain = sample_path(model.generator, model.initial_regime, grid.t0(),
                                            grid.horizon(), chain_stream(seed, p));
        eval_detail::CostAccumulator acc(rt, gamma * gamma);
        simulate_path(rt, chain, brownian_stream(seed, p), acc);
        out[p] = acc.finish();
    });
    return out;
}

/// Monte-Carlo estimate of the cost functional. With gamma present the
/// soft-constrained functional is estimated; absent, the plain one.
inline CostEstimate cost_mc(const GameModel& model, const TimeGrid& grid,
                            const ControlPolicy& control,
                            const DisturbancePolicy& disturbance,
                            std::optional<double> gamma, std::size_t n_paths,
                            std::uint64_t seed, int threads = 1) {
    const double g = gamma.value_or(0.0);
    const auto samples = cost_mc_samples(model, grid, control, disturbance, g, n_paths,
                                         seed, threads);
    std::vector<double> vals(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p)
        vals[p] = gamma.has_value() ? samples[p].J_gamma : samples[p].J;
    const auto [mean, se] = eval_detail::mean_stderr(vals);
    return {mean, se, n_paths, gamma};
}

// ---------------------------------------------------------------------------
// Closed-form value
// ---------------------------------------------------------------------------

/// Game value at the initial datum: quadratic terms at t plus the
/// regime-path expectation of the forcing integral, carried out with
/// occupation probabilities from the forward equation (no Monte Carlo).
inline double value_formula(const RiccatiSolution& sol, const GameModel& model) {
    const Vec& xi = model.initial_state;
    const int i0 = model.initial_regime;
    const int D = model.dims.D;

    double value = sim_detail::bilinear(xi, sol.P.at(0, i0), xi) +
                   2.0 * sim_detail::dot(Vec(sol.eta.at(0, i0).col(0)), xi);
    // deterministic xi: the difference part of the initial state is zero

    const auto& nodes = sol.grid.nodes;
    const auto occ = occupation_probabilities(model.generator, i0, nodes);

    std::vector<double> integrand(nodes.size(), 0.0);
    for (size_t k = 0; k < nodes.size(); ++k) {
        double total = 0.0;
        for (int i = 0; i < D; ++i) {
            const auto cf = riccati_detail::coeffs_at(model, nodes[k], i);
            const Mat& P = sol.P.at(static_cast<int>(k), i);
            const Mat& Pi = sol.Pi.at(static_cast<int>(k), i);
            const Vec eta = sol.eta.at(static_cast<int>(k), i).col(0);
            const BlockData bd =
                riccati_detail::raw_blocks(cf, model.gamma, Pi, P, eta);
            const Vec solved = riccati_detail::checked_lu(bd.Rhat, "Rhat").solve(bd.offset);
            double g = sim_detail::bilinear(cf.sigma, P, cf.sigma) +
                       sim_detail::bilinear(cf.sigmabar, Pi, cf.sigmabar) +
                       2.0 * sim_detail::dot(eta, cf.b) - sim_detail::dot(solved, bd.offset);
            total += occ[k](i) * g;
        }
        integrand[k] = total;
    }
    for (size_t k = 1; k < nodes.size(); ++k)
        value += 0.5 * (nodes[k] - nodes[k - 1]) * (integrand[k - 1] + integrand[k]);
    return value;
}

// ---------------------------------------------------------------------------
// Saddle-point verification
// ---------------------------------------------------------------------------

struct PerturbationSpec {
    std::string name;
    double scale_theta1 = 1.0;
    double scale_theta2 = 1.0;
    double scale_tilde2 = 1.0;
    double offset_u = 0.0;  // constant added to every control entry
    double offset_v = 0.0;  // constant added to every filtered-disturbance entry
    bool control_side = true;  // true: cost must not decrease; false: not increase
    bool exploratory = false;  // recorded but not asserted
};

/// The gain-block scalings exercised by the standard verification run.
inline std::vector<PerturbationSpec> standard_perturbations(
    const std::vector<double>& epsilons = {0.1, 0.25}) {
    std::vector<PerturbationSpec> specs;
    for (double e : epsilons) {
        for (double sgn : {1.0, -1.0}) {
            const double f = 1.0 + sgn * e;
            std::ostringstream tag;
            tag << "x" << f;
            PerturbationSpec c;
            c.name = "control gain " + tag.str();
            c.scale_theta1 = f;
            c.control_side = true;
            specs.push_back(c);

            PerturbationSpec d1;
            d1.name = "filtered disturbance gain " + tag.str();
            d1.scale_theta2 = f;
            d1.control_side = false;
            specs.push_back(d1);

            PerturbationSpec d2;
            d2.name = "difference disturbance gain " + tag.str();
            d2.scale_tilde2 = f;
            d2.control_side = false;
            specs.push_back(d2);
        }
    }
    return specs;
}

struct SaddleVerdict {
    std::string name;
    double base = 0.0;       // soft cost under the saddle pair
    double perturbed = 0.0;  // soft cost under the perturbed pair
    double delta = 0.0;      // perturbed - base (paired, common random numbers)
    double stderr_ = 0.0;    // standard error of the paired difference
    bool control_side = true;
    bool exploratory = false;
    bool pass = true;
};

/// Common-random-number check of the two-sided saddle inequality: control
/// perturbations must not lower the soft cost, disturbance perturbations
/// must not raise it, each within 3 standard errors of the paired estimate.
inline std::vector<SaddleVerdict> saddle_check(const GameModel& model, const TimeGrid& grid,
                                               const SaddleGains& gains,
                                               const std::vector<PerturbationSpec>& specs,
                                               std::size_t n_paths, std::uint64_t seed,
                                               int threads = 1, double nsigma = 3.0) {
    auto run = [&](const PerturbationSpec& sp) {
        const ControlPolicy c = saddle_control(gains, sp.scale_theta1, sp.offset_u);
        const DisturbancePolicy d =
            saddle_disturbance(gains, sp.scale_theta2, sp.scale_tilde2, sp.offset_v);
        return cost_mc_samples(model, grid, c, d, model.gamma, n_paths, seed, threads);
    };

    PerturbationSpec base_spec;
    base_spec.name = "saddle";
    const auto base = run(base_spec);

    std::vector<SaddleVerdict> verdicts;
    verdicts.reserve(specs.size());
    for (const auto& sp : specs) {
        const auto pert = run(sp);
        std::vector<double> deltas(n_paths), base_vals(n_paths), pert_vals(n_paths);
        for (std::size_t p = 0; p < n_paths; ++p) {
            deltas[p] = pert[p].J_gamma - base[p].J_gamma;
            base_vals[p] = base[p].J_gamma;
            pert_vals[p] = pert[p].J_gamma;
        }
        const auto [dmean, dse] = eval_detail::mean_stderr(deltas);
        SaddleVerdict v;
        v.name = sp.name;
        v.base = eval_detail::mean_stderr(base_vals).first;
        v.perturbed = eval_detail::mean_stderr(pert_vals).first;
        v.delta = dmean;
        v.stderr_ = dse;
        v.control_side = sp.control_side;
        v.exploratory = sp.exploratory;
        v.pass = sp.exploratory ||
                 (sp.control_side ? dmean >= -nsigma * dse : dmean <= nsigma * dse);
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

// ---------------------------------------------------------------------------
// Disturbance attenuation checks
// ---------------------------------------------------------------------------

struct HinfCandidate {
    std::string name;
    DisturbancePolicy policy;
};

struct HinfResult {
    std::string name;
    double output = 0.0;  // mean plain cost of the homogeneous closed loop
    double energy = 0.0;  // mean disturbance energy
    double ratio = 0.0;
    bool valid = true;  // false when the candidate carries no energy
};

struct HinfReport {
    std::vector<HinfResult> results;
    double max_ratio = 0.0;
    std::string argmax;
    double gamma = 0.0;
    double margin = 0.0;  // gamma^2 - max_ratio
    bool pass = false;    // max_ratio < gamma^2 over the candidate family
};

/// Candidate disturbances for the norm-ratio search: the worst-case feedback
/// at several intensities, random linear feedbacks, and deterministic
/// open-loop signals. Feedback candidates carry a sinusoid offset so their
/// energy is positive even from a zero initial state.
inline std::vector<HinfCandidate> default_hinf_candidates(const GameModel& model,
                                                          const SaddleGains& gains,
                                                          std::uint64_t seed = 7) {
    const Dims d = model.dims;
    const double T = d.T;
    std::vector<HinfCandidate> cands;

    auto sized_sin = [&](int nv, double amp, double freq, double phase) -> TimeVecFn {
        return [nv, amp, freq, phase, T](double s, int) {
            return Vec::Constant(nv,
                                 amp * std::sin(6.283185307179586 * freq * s / T + phase));
        };
    };

    for (double k : {0.5, 1.0, 1.5}) {
        DisturbancePolicy p;
        p.resolve = [&gains, k, off = sized_sin(d.nv, 0.5, 1.0, 0.3)](double s, int i, Mat& Kh,
                                                                      Vec& ch, Mat& Kt) {
            Kh = k * gains.theta2_eval(s, i);
            ch = gains.v2_eval(s, i) + off(s, i);
            Kt = k * gains.theta_tilde2_eval(s, i);
        };
        std::ostringstream name;
        name << "worst-case feedback x" << k << " + sinusoid";
        cands.push_back({name.str(), std::move(p)});
    }

    RngStream rng(seed, rng_purpose::scenario, 0);
    for (int r = 0; r < 3; ++r) {
        Mat Kh(d.nv, d.n), Kt(d.nv, d.n);
        for (int a = 0; a < d.nv; ++a)
            for (int b = 0; b < d.n; ++b) {
                Kh(a, b) = 1.0 - 2.0 * rng.uniform(static_cast<std::uint64_t>(4 * r));
                Kt(a, b) = 1.0 - 2.0 * rng.uniform(static_cast<std::uint64_t>(4 * r + 1));
            }
        DisturbancePolicy p = linear_disturbance(
            [Kh](double, int) { return Kh; }, sized_sin(d.nv, 0.4, 2.0, 0.7 * r),
            [Kt](double, int) { return Kt; });
        cands.push_back({"random feedback " + std::to_string(r + 1), std::move(p)});
    }

    cands.push_back({"sinusoid f=1", open_loop_disturbance(d, sized_sin(d.nv, 1.0, 1.0, 0.0))});
    cands.push_back({"sinusoid f=3", open_loop_disturbance(d, sized_sin(d.nv, 1.0, 3.0, 0.0))});
    cands.push_back({"constant", open_loop_disturbance(d, [nv = d.nv](double, int) {
                         return Vec::Constant(nv, 1.0);
                     })});
    cands.push_back({"bang-bang", open_loop_disturbance(d, [nv = d.nv, T](double s, int) {
                         const double w = std::sin(6.283185307179586 * 2.5 * s / T);
                         return Vec::Constant(nv, w >= 0.0 ? 1.0 : -1.0);
                     })});
    return cands;
}

/// Lower-bound estimate of the induced-norm ratio: the supremum over the
/// finite candidate family of plain cost over disturbance energy, on the
/// homogenized model with zero initial state, under the pure-feedback
/// control. Finite families only bound the true supremum from below.
inline HinfReport hinf_ratio(const GameModel& model, const TimeGrid& grid,
                             const SaddleGains& gains,
                             const std::vector<HinfCandidate>& candidates,
                             std::size_t n_paths, std::uint64_t seed, int threads = 1) {
    const GameModel hmodel = homogenized(model);
    const ControlPolicy control{[&gains](double s, int i, Mat& K, Vec& c) {
        K = gains.theta1_eval(s, i);
        c = Vec::Zero(K.rows());
    }};

    HinfReport report;
    report.gamma = model.gamma;
    for (const auto& cand : candidates) {
        const auto samples =
            cost_mc_samples(hmodel, grid, control, cand.policy, 0.0, n_paths, seed, threads);
        double j0 = 0.0, energy = 0.0;
        for (const auto& s : samples) {
            j0 += s.J;
            energy += s.energy;
        }
        j0 /= static_cast<double>(n_paths);
        energy /= static_cast<double>(n_paths);

        HinfResult r;
        r.name = cand.name;
        r.output = j0;
        r.energy = energy;
        r.valid = energy > 1e-12;
        r.ratio = r.valid ? j0 / energy : 0.0;
        report.results.push_back(std::move(r));
    }

    report.max_ratio = 0.0;
    for (const auto& r : report.results)
        if (r.valid && r.ratio > report.max_ratio) {
            report.max_ratio = r.ratio;
            report.argmax = r.name;
        }
    report.margin = model.gamma * model.gamma - report.max_ratio;
    report.pass = report.max_ratio < model.gamma * model.gamma;
    return report;
}

// ---------------------------------------------------------------------------
// Attenuation threshold
// ---------------------------------------------------------------------------

/// Whether the full backward pass succeeds with all saddle margins at least
/// delta. This is the computable solvability predicate; its threshold is an
/// upper proxy for the optimal attenuation level.
inline bool solvable(const GameModel& model, const TimeGrid& grid, double gamma,
                     const CertOptions& opt = {}) {
    try {
        (void)solve_all(with_gamma(model, gamma), grid, ConditionSet::saddle, opt);
        return true;
    } catch (const SolverError&) {
        return false;
    }
}

struct GammaSweepPoint {
    double gamma = 0.0;
    bool solvable = false;
    double min_margin = 0.0;  // over nodes and regimes; meaningful when solvable
};

inline std::vector<GammaSweepPoint> gamma_sweep(const GameModel& model, const TimeGrid& grid,
                                                const std::vector<double>& gammas,
                                                const CertOptions& opt = {}) {
    std::vector<GammaSweepPoint> out;
    out.reserve(gammas.size());
    for (double g : gammas) {
        GammaSweepPoint pt;
        pt.gamma = g;
        try {
            const auto sol = solve_all(with_gamma(model, g), grid, ConditionSet::saddle, opt);
            pt.solvable = true;
            pt.min_margin = std::min(sol.min_margin(ConditionSet::saddle),
                                     [&] {
                                         double m = std::numeric_limits<double>::infinity();
                                         for (const auto& nm : sol.margins)
                                             m = std::min(m, nm.rbar2);
                                         return m;
                                     }());
        } catch (const SolverError&) {
            pt.solvable = false;
            pt.min_margin = 0.0;
        }
        out.push_back(pt);
    }
    return out;
}

struct GammaBracket {
    double lo = 0.0;  // largest known unsolvable level
    double hi = 0.0;  // smallest known solvable level
    int evaluations = 0;
};

/// Bisection on the solvability predicate. The returned interval brackets
/// the solvability threshold, which upper-bounds the optimal attenuation
/// level; the two need not coincide in general.
inline GammaBracket gamma_star(const GameModel& model, const TimeGrid& grid, double lo,
                               double hi, double tol, const CertOptions& opt = {}) {
    if (!(lo > 0.0) || !(hi > lo) || !(tol > 0.0))
        throw std::invalid_argument("gamma_star requires 0 < lo < hi and tol > 0");

    GammaBracket br;
    auto check = [&](double g) {
        ++br.evaluations;
        return solvable(model, grid, g, opt);
    };

    int widen = 0;
    while (check(lo) && widen++ < 16) {
        hi = lo;
        lo *= 0.5;
    }
    if (widen > 16) throw NoBracket(lo, hi);
    widen = 0;
    while (!check(hi)) {
        hi *= 2.0;
        if (++widen > 16) throw NoBracket(lo, hi);
    }

    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (check(mid))
            hi = mid;
        else
            lo = mid;
    }
    br.lo = lo;
    br.hi = hi;
    return br;
}

// ---------------------------------------------------------------------------
// Aggregate report
// ---------------------------------------------------------------------------

struct EvalReport {
    double value = 0.0;  // closed-form game value at the initial datum
    CostEstimate mc_under_saddle;
    std::vector<SaddleVerdict> saddle_checks;
    std::optional<HinfReport> hinf;
    std::optional<GammaBracket> gamma_bracket;

    bool value_within(double nsigma = 3.0) const {
        return std::abs(mc_under_saddle.mean - value) <= nsigma * mc_under_saddle.stderr_;
    }

    /// Machine-readable key = value serialization.
    std::string to_keyvalue() const {
        auto f = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            return std::string(buf);
        };
        std::ostringstream os;
        os << "value = " << f(value) << "\n";
        os << "mc_mean = " << f(mc_under_saddle.mean) << "\n";
        os << "mc_stderr = " << f(mc_under_saddle.stderr_) << "\n";
        os << "mc_paths = " << mc_under_saddle.n_paths << "\n";
        os << "value_within_3se = " << (value_within() ? "true" : "false") << "\n";
        for (size_t k = 0; k < saddle_checks.size(); ++k) {
            const auto& v = saddle_checks[k];
            os << "saddle." << k << ".name = \"" << v.name << "\"\n";
            os << "saddle." << k << ".delta = " << f(v.delta) << "\n";
            os << "saddle." << k << ".stderr = " << f(v.stderr_) << "\n";
            os << "saddle." << k << ".pass = " << (v.pass ? "true" : "false") << "\n";
        }
        if (hinf) {
            os << "hinf.max_ratio = " << f(hinf->max_ratio) << "\n";
            os << "hinf.gamma_squared = " << f(hinf->gamma * hinf->gamma) << "\n";
            os << "hinf.margin = " << f(hinf->margin) << "\n";
            os << "hinf.argmax = \"" << hinf->argmax << "\"\n";
            os << "hinf.pass = " << (hinf->pass ? "true" : "false") << "\n";
        }
        if (gamma_bracket) {
            os << "gamma_star.lo = " << f(gamma_bracket->lo) << "\n";
            os << "gamma_star.hi = " << f(gamma_bracket->hi) << "\n";
        }
        return os.str();
    }

    /// Human-readable table.
    std::string to_table() const {
        auto f = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%11.6g", v);
            return std::string(buf);
        };
        std::ostringstream os;
        os << "closed-form value      " << f(value) << "\n";
        os << "monte-carlo estimate   " << f(mc_under_saddle.mean) << " +- "
           << f(mc_under_saddle.stderr_) << "  (" << mc_under_saddle.n_paths << " paths, "
           << (value_within() ? "agrees within 3 se" : "DISAGREES beyond 3 se") << ")\n";
        if (!saddle_checks.empty()) {
            os << "saddle perturbations:\n";
            for (const auto& v : saddle_checks)
                os << "  " << (v.pass ? "[pass] " : (v.exploratory ? "[info] " : "[FAIL] "))
                   << v.name << "  delta=" << f(v.delta) << " +- " << f(v.stderr_) << "\n";
        }
        if (hinf) {
            os << "disturbance attenuation: max ratio " << f(hinf->max_ratio) << " vs "
               << f(hinf->gamma * hinf->gamma) << " (margin " << f(hinf->margin) << ", "
               << (hinf->pass ? "pass" : "FAIL") << "; worst: " << hinf->argmax << ")\n";
        }
        if (gamma_bracket)
            os << "solvability threshold in [" << f(gamma_bracket->lo) << ", "
               << f(gamma_bracket->hi) << "]\n";
        return os.str();
    }
};

}  // namespace rsgame
