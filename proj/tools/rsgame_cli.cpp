// Command-line front end: load a scenario, solve the coupled Riccati
// systems, synthesize the saddle gains, simulate the closed loop, and run
// the evaluation battery. Exit codes: 0 success, 1 usage or I/O failure,
// 2 mathematical infeasibility (condition violation, no bracket).

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rsgame/csv.hpp"
#include "rsgame/eval.hpp"
#include "rsgame/scenario.hpp"
#include "rsgame/svg.hpp"

namespace fs = std::filesystem;
using namespace rsgame;

namespace {

struct RunConfig {
    std::string scenario;
    double ds = 1e-3;
    std::size_t n_paths = 20000;
    std::uint64_t seed = 1;
    std::optional<double> gamma;
    std::string out_dir;
    bool plot = false;
    int threads = 0;
    double lo = 0.01, hi = 3.0, tol = 1e-3;

    int effective_threads() const {
        if (threads > 0) return threads;
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 2 : static_cast<int>(hw);
    }
};

std::string default_out_dir() {
    if (const char* env = std::getenv("RSGAME_OUT")) return env;
    return "out";
}

GameModel load_model(const RunConfig& cfg) {
    GameModel model = cfg.scenario.empty() ? bull_bear_market_model()
                                           : load_scenario(cfg.scenario);
    if (cfg.gamma) model = with_gamma(model, *cfg.gamma);
    return model;
}

double scalar_or_norm(const Mat& m) { return m.size() == 1 ? m(0, 0) : m.norm(); }

void plot_riccati(const RiccatiSolution& sol, const std::string& path) {
    LinePlot plot("Riccati solutions", "s");
    const auto& nodes = sol.grid.nodes;
    for (int i = 0; i < sol.Pi.D; ++i) {
        std::vector<double> pi_v, p_v;
        for (size_t k = 0; k < nodes.size(); ++k) {
            pi_v.push_back(scalar_or_norm(sol.Pi.at(static_cast<int>(k), i)));
            p_v.push_back(scalar_or_norm(sol.P.at(static_cast<int>(k), i)));
        }
        plot.add_series("Pi regime " + std::to_string(i + 1), nodes, pi_v);
        plot.add_series("P regime " + std::to_string(i + 1), nodes, p_v);
    }
    plot.write(path);
}

void plot_gains(const SaddleGains& gains, const std::string& path, const std::string& title) {
    LinePlot plot(title, "s");
    const auto& nodes = gains.grid.nodes;
    for (int i = 0; i < gains.D; ++i) {
        std::vector<double> t1, t2, tt;
        for (size_t k = 0; k < nodes.size(); ++k) {
            const Mat& th = gains.theta_hat_at(static_cast<int>(k), i);
            t1.push_back(scalar_or_norm(th.topRows(gains.m)));
            t2.push_back(scalar_or_norm(th.bottomRows(gains.nv)));
            tt.push_back(scalar_or_norm(gains.theta_tilde2_at(static_cast<int>(k), i)));
        }
        const std::string r = " regime " + std::to_string(i + 1);
        plot.add_series("control gain" + r, nodes, t1);
        plot.add_series("disturbance gain" + r, nodes, t2);
        plot.add_series("difference gain" + r, nodes, tt);
    }
    plot.write(path);
}

void plot_states(const SimPath& p, const std::string& path) {
    LinePlot plot("closed-loop state path", "s");
    auto col = [&](const Mat& m) {
        std::vector<double> v(p.s.size());
        for (size_t k = 0; k < p.s.size(); ++k)
            v[k] = m.cols() == 1 ? m(k, 0) : m.row(k).norm();
        return v;
    };
    plot.add_series("x", p.s, col(p.x));
    plot.add_series("filtered x", p.s, col(p.xhat));
    plot.add_series("difference x", p.s, col(p.xtilde));
    plot.write(path);
}

void plot_policies(const SimPath& p, const std::string& path) {
    LinePlot plot("control and worst-case disturbance", "s");
    auto col = [&](const Mat& m) {
        std::vector<double> v(p.s.size());
        for (size_t k = 0; k < p.s.size(); ++k)
            v[k] = m.cols() == 1 ? m(k, 0) : m.row(k).norm();
        return v;
    };
    plot.add_series("u", p.s, col(p.u));
    plot.add_series("v", p.s, col(p.v));
    plot.add_series("filtered v", p.s, col(p.vhat));
    plot.add_series("difference v", p.s, col(p.vtilde));
    plot.write(path);
}

struct Solved {
    GameModel model;
    TimeGrid grid;
    RiccatiSolution sol;
    SaddleGains gains;
};

Solved solve_pipeline(const RunConfig& cfg) {
    Solved s{load_model(cfg), {}, {}, {}};
    s.grid = make_time_grid(s.model.initial_time, s.model.dims.T, cfg.ds,
                            s.model.breakpoints());
    s.sol = solve_all(s.model, s.grid);
    s.gains = synthesize(s.sol, s.model);
    return s;
}

void write_report(const fs::path& dir, const EvalReport& report) {
    std::ofstream(dir / "report.txt") << report.to_keyvalue();
    std::cout << report.to_table();
}

int cmd_solve(const RunConfig& cfg) {
    const Solved s = solve_pipeline(cfg);
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_riccati_csv((dir / "riccati.csv").string(), s.sol);
    write_gains_csv((dir / "gains.csv").string(), s.gains);
    write_certificates_csv((dir / "certificates.csv").string(), s.sol);
    if (cfg.plot) {
        plot_riccati(s.sol, (dir / "riccati.svg").string());
        plot_gains(s.gains, (dir / "gains.svg").string(), "closed-loop saddle gains");
    }
    std::printf("solved %d nodes x %d regimes (gamma %.6g, min saddle margin %.3g)\n",
                s.grid.segments() + 1, s.model.dims.D, s.model.gamma,
                s.sol.min_margin(ConditionSet::saddle));
    std::printf("artifacts in %s\n", dir.string().c_str());
    return 0;
}

int cmd_simulate(const RunConfig& cfg) {
    const Solved s = solve_pipeline(cfg);
    const auto [uc, vd] = outcome_policies(s.gains);
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    const std::size_t count = std::min<std::size_t>(cfg.n_paths, 16);
    for (std::size_t p = 0; p < count; ++p) {
        const SimPath path = simulate(s.model, s.grid, uc, vd, cfg.seed, p);
        const std::string name = count == 1 ? "path.csv" : "path_" + std::to_string(p) + ".csv";
        write_path_csv((dir / name).string(), path);
        if (p == 0) {
            write_chain_csv((dir / "chain.csv").string(), path.chain);
            if (cfg.plot) {
                plot_states(path, (dir / "states.svg").string());
                plot_policies(path, (dir / "policies.svg").string());
            }
        }
    }
    std::printf("simulated %zu path(s) under the saddle policies into %s\n", count,
                dir.string().c_str());
    return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
    const Solved s = solve_pipeline(cfg);
    const auto [uc, vd] = outcome_policies(s.gains);
    EvalReport report;
    report.value = value_formula(s.sol, s.model);
    report.mc_under_saddle = cost_mc(s.model, s.grid, uc, vd, s.model.gamma, cfg.n_paths,
                                     cfg.seed, cfg.effective_threads());
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_report(dir, report);
    return 0;
}

int cmd_saddle_check(const RunConfig& cfg) {
    const Solved s = solve_pipeline(cfg);
    EvalReport report;
    report.value = value_formula(s.sol, s.model);
    const auto [uc, vd] = outcome_policies(s.gains);
    report.mc_under_saddle = cost_mc(s.model, s.grid, uc, vd, s.model.gamma, cfg.n_paths,
                                     cfg.seed, cfg.effective_threads());
    report.saddle_checks = saddle_check(s.model, s.grid, s.gains, standard_perturbations(),
                                        cfg.n_paths, cfg.seed, cfg.effective_threads());
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_report(dir, report);
    bool all = true;
    for (const auto& v : report.saddle_checks) all = all && v.pass;
    return all ? 0 : 2;
}

int cmd_hinf_check(const RunConfig& cfg) {
    const Solved s = solve_pipeline(cfg);
    EvalReport report;
    report.value = value_formula(s.sol, s.model);
    const auto [uc, vd] = outcome_policies(s.gains);
    report.mc_under_saddle = cost_mc(s.model, s.grid, uc, vd, s.model.gamma,
                                     std::min<std::size_t>(cfg.n_paths, 10000), cfg.seed,
                                     cfg.effective_threads());
    report.hinf = hinf_ratio(s.model, s.grid, s.gains,
                             default_hinf_candidates(s.model, s.gains), cfg.n_paths,
                             cfg.seed, cfg.effective_threads());
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_report(dir, report);
    return report.hinf->pass ? 0 : 2;
}

int cmd_gamma_star(const RunConfig& cfg) {
    const GameModel model = load_model(cfg);
    const TimeGrid grid =
        make_time_grid(model.initial_time, model.dims.T, cfg.ds, model.breakpoints());

    std::vector<double> gammas;
    for (int k = 0; k < 20; ++k)
        gammas.push_back(cfg.lo + (cfg.hi - cfg.lo) * (k + 0.5) / 20.0);
    const auto sweep = gamma_sweep(model, grid, gammas);

    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_sweep_csv((dir / "gamma_sweep.csv").string(), sweep);

    const GammaBracket br = gamma_star(model, grid, cfg.lo, cfg.hi, cfg.tol);
    std::printf("solvability threshold bracket: [%.10g, %.10g] (width %.3g, %d solves)\n",
                br.lo, br.hi, br.hi - br.lo, br.evaluations);
    std::printf("sweep written to %s\n", (dir / "gamma_sweep.csv").string().c_str());
    return 0;
}

int cmd_example(const RunConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    // keep a copy of the scenario next to the artifacts
    std::ofstream(dir / "bull_bear_market.toml") << bull_bear_market_toml();

    struct PerGamma {
        Solved s;
        SimPath path;
        EvalReport report;
    };
    std::vector<PerGamma> runs;

    for (double gamma : {1.0, 2.0}) {
        RunConfig sub = cfg;
        sub.gamma = gamma;
        sub.scenario.clear();
        PerGamma pg{solve_pipeline(sub), {}, {}};
        const fs::path gdir = dir / ("gamma" + std::to_string(static_cast<int>(gamma)));
        fs::create_directories(gdir);

        write_riccati_csv((gdir / "riccati.csv").string(), pg.s.sol);
        write_gains_csv((gdir / "gains.csv").string(), pg.s.gains);
        write_certificates_csv((gdir / "certificates.csv").string(), pg.s.sol);

        const auto [uc, vd] = outcome_policies(pg.s.gains);
        pg.path = simulate(pg.s.model, pg.s.grid, uc, vd, cfg.seed, 0);
        write_path_csv((gdir / "path.csv").string(), pg.path);

        pg.report.value = value_formula(pg.s.sol, pg.s.model);
        pg.report.mc_under_saddle = cost_mc(pg.s.model, pg.s.grid, uc, vd, gamma,
                                            cfg.n_paths, cfg.seed, cfg.effective_threads());
        pg.report.hinf = hinf_ratio(pg.s.model, pg.s.grid, pg.s.gains,
                                    default_hinf_candidates(pg.s.model, pg.s.gains),
                                    std::min<std::size_t>(cfg.n_paths, 10000), cfg.seed,
                                    cfg.effective_threads());

        // the example exists to be looked at, so it always plots
        plot_riccati(pg.s.sol, (gdir / "riccati.svg").string());
        plot_gains(pg.s.gains, (gdir / "gains.svg").string(),
                   "saddle gains (gamma " + std::to_string(static_cast<int>(gamma)) + ")");
        plot_states(pg.path, (gdir / "states.svg").string());
        plot_policies(pg.path, (gdir / "policies.svg").string());
        runs.push_back(std::move(pg));
    }

    // attenuation-level comparison plots
    {
        LinePlot cmp("disturbance gains vs attenuation level", "s");
        for (size_t r = 0; r < runs.size(); ++r) {
            const auto& g = runs[r].s.gains;
            const std::string tag = r == 0 ? " (gamma 1)" : " (gamma 2)";
            for (int i = 0; i < g.D; ++i) {
                std::vector<double> t2;
                for (size_t k = 0; k < g.grid.nodes.size(); ++k)
                    t2.push_back(scalar_or_norm(
                        g.theta_hat_at(static_cast<int>(k), i).bottomRows(g.nv)));
                cmp.add_series("regime " + std::to_string(i + 1) + tag, g.grid.nodes, t2);
            }
        }
        cmp.write((dir / "compare_disturbance_gains.svg").string());

        LinePlot cmps("state paths vs attenuation level (common noise)", "s");
        for (size_t r = 0; r < runs.size(); ++r) {
            const std::string tag = r == 0 ? " (gamma 1)" : " (gamma 2)";
            const auto& p = runs[r].path;
            std::vector<double> xs(p.s.size());
            for (size_t k = 0; k < p.s.size(); ++k) xs[k] = p.x(k, 0);
            cmps.add_series("x" + tag, p.s, xs);
        }
        cmps.write((dir / "compare_states.svg").string());

        LinePlot cmpp("policies vs attenuation level (common noise)", "s");
        for (size_t r = 0; r < runs.size(); ++r) {
            const std::string tag = r == 0 ? " (gamma 1)" : " (gamma 2)";
            const auto& p = runs[r].path;
            std::vector<double> us(p.s.size()), vs(p.s.size());
            for (size_t k = 0; k < p.s.size(); ++k) {
                us[k] = p.u(k, 0);
                vs[k] = p.v(k, 0);
            }
            cmpp.add_series("u" + tag, p.s, us);
            cmpp.add_series("v" + tag, p.s, vs);
        }
        cmpp.write((dir / "compare_policies.svg").string());
    }

    // solvability sweep over the example
    {
        const GameModel model = bull_bear_market_model();
        const TimeGrid grid = make_time_grid(0.0, model.dims.T, cfg.ds);
        std::vector<double> gammas;
        for (int k = 0; k < 20; ++k) gammas.push_back(0.1 + k * 0.1);
        write_sweep_csv((dir / "gamma_sweep.csv").string(), gamma_sweep(model, grid, gammas));
    }

    for (size_t r = 0; r < runs.size(); ++r) {
        const double gamma = r == 0 ? 1.0 : 2.0;
        std::printf("--- attenuation level gamma = %.0f ---\n", gamma);
        std::ofstream(dir /
                      ("report_gamma" + std::to_string(static_cast<int>(gamma)) + ".txt"))
            << runs[r].report.to_keyvalue();
        std::cout << runs[r].report.to_table();
    }
    std::printf("artifacts in %s\n", dir.string().c_str());

    for (const auto& pg : runs)
        if (!pg.report.hinf->pass) return 2;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-horizon disturbance-attenuating control of regime-switching "
                 "linear systems: Riccati solver, saddle synthesis, simulator, and "
                 "evaluation battery"};
    app.require_subcommand(1);

    RunConfig cfg;
    cfg.out_dir = default_out_dir();

    auto add_common = [&](CLI::App* sub, bool needs_scenario) {
        if (needs_scenario)
            sub->add_option("scenario", cfg.scenario, "scenario file (TOML)")
                ->check(CLI::ExistingFile)
                ->required();
        sub->add_option("--ds", cfg.ds, "grid step")->check(CLI::PositiveNumber);
        sub->add_option("--paths", cfg.n_paths, "Monte-Carlo paths")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", cfg.seed, "random seed");
        sub->add_option("--gamma", cfg.gamma, "override the attenuation level");
        sub->add_option("--out", cfg.out_dir,
                        "output directory (default $RSGAME_OUT or ./out)");
        sub->add_option("--threads", cfg.threads, "cap worker threads");
        sub->add_flag("--plot", cfg.plot, "emit SVG plots");
    };

    auto* solve = app.add_subcommand("solve", "solve the Riccati systems and synthesize gains");
    add_common(solve, true);
    auto* simulate = app.add_subcommand("simulate", "simulate closed-loop saddle paths");
    add_common(simulate, true);
    auto* evaluate = app.add_subcommand("evaluate", "closed-form value vs Monte-Carlo cost");
    add_common(evaluate, true);
    auto* saddle = app.add_subcommand("saddle-check", "verify the saddle inequalities");
    add_common(saddle, true);
    auto* hinf = app.add_subcommand("hinf-check", "estimate the disturbance attenuation ratio");
    add_common(hinf, true);
    auto* gstar = app.add_subcommand("gamma-star", "bracket the solvability threshold");
    add_common(gstar, true);
    gstar->add_option("--lo", cfg.lo, "initial unsolvable guess")->check(CLI::PositiveNumber);
    gstar->add_option("--hi", cfg.hi, "initial solvable guess")->check(CLI::PositiveNumber);
    gstar->add_option("--tol", cfg.tol, "bracket width")->check(CLI::PositiveNumber);
    auto* example = app.add_subcommand("example", "run the bundled market example end to end");
    add_common(example, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(cfg);
        if (simulate->parsed()) return cmd_simulate(cfg);
        if (evaluate->parsed()) return cmd_evaluate(cfg);
        if (saddle->parsed()) return cmd_saddle_check(cfg);
        if (hinf->parsed()) return cmd_hinf_check(cfg);
        if (gstar->parsed()) return cmd_gamma_star(cfg);
        if (example->parsed()) return cmd_example(cfg);
    } catch (const ConditionViolation& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return 2;
    } catch (const NoBracket& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return 2;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 2;
    } catch (const ScenarioError& e) {
        std::fprintf(stderr, "scenario error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
