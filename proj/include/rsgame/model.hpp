#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rsgame/piecewise.hpp"

namespace rsgame {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Problem dimensions and horizon.
struct Dims {
    int n = 1;    // state
    int m = 1;    // control
    int nv = 1;   // disturbance
    int D = 2;    // regimes
    double T = 1.0;

    void check() const {
        if (n < 1 || m < 1 || nv < 1 || D < 1)
            throw std::invalid_argument("all dimensions must be >= 1");
        if (!(T > 0.0)) throw std::invalid_argument("horizon T must be > 0");
    }
};

/// Markov chain generator: off-diagonal intensities strictly positive,
/// rows sum to zero, diagonal strictly negative.
struct Generator {
    Mat lambda;  // D x D

    int states() const { return static_cast<int>(lambda.rows()); }

    void check() const {
        const int D = states();
        if (lambda.cols() != D) throw std::invalid_argument("generator must be square");
        for (int i = 0; i < D; ++i) {
            if (!(lambda(i, i) < 0.0))
                throw std::invalid_argument("generator diagonal must be strictly negative");
            double row = 0.0;
            for (int j = 0; j < D; ++j) {
                row += lambda(i, j);
                if (i != j && !(lambda(i, j) > 0.0))
                    throw std::invalid_argument("generator off-diagonals must be strictly positive");
            }
            if (std::abs(row) > 1e-12)
                throw std::invalid_argument("generator rows must sum to zero");
        }
    }
};

/// Dynamics coefficients of one regime, each constant or piecewise-constant
/// on [0, T].
struct RegimeCoeffs {
    Piecewise<Mat> A, B1, B2;          // drift
    Piecewise<Mat> C, D1, D2;          // diffusion w.r.t. the common noise
    Piecewise<Mat> Cbar, D1bar, D2bar; // diffusion w.r.t. the private noise
    Piecewise<Vec> b, sigma, sigmabar; // inhomogeneous terms
};

/// Cost weights of one regime. G and g are the terminal weights.
struct RegimeWeights {
    Piecewise<Mat> Q, R1, R2, S1, S2;
    Piecewise<Vec> q, rho1, rho2;
    Mat G;
    Vec g;
};

struct Violation {
    std::string matrix;
    int regime = 0;      // 1-based
    double time = 0.0;
    double eigenvalue = 0.0;
};

struct AssumptionResult {
    std::string name;
    bool pass = true;
    std::string note;
    std::vector<Violation> violations;
};

struct ValidationReport {
    std::vector<AssumptionResult> assumptions;

    bool pass() const {
        for (const auto& a : assumptions)
            if (!a.pass) return false;
        return true;
    }

    std::string summary() const {
        std::ostringstream os;
        for (const auto& a : assumptions) {
            os << (a.pass ? "[pass] " : "[FAIL] ") << a.name;
            if (!a.note.empty()) os << " - " << a.note;
            os << "\n";
            for (const auto& v : a.violations)
                os << "         " << v.matrix << " regime " << v.regime << " at s=" << v.time
                   << " (eigenvalue " << v.eigenvalue << ")\n";
        }
        return os.str();
    }
};

struct ValidationOptions {
    double delta_r = 1e-8;    // strict positivity threshold for the control/disturbance weight
    double tol_psd = 1e-10;   // slack on semidefiniteness eigenvalue checks
    double tol_sym = 1e-10;   // max allowed asymmetry
};

/// Stacked coefficient views at one (s, regime) point.
struct StackedCoeffs {
    Mat B, D, Dbar;   // n x (m+nv)
    Mat R, Rgamma;    // (m+nv) x (m+nv)
    Mat S;            // (m+nv) x n
    Vec rho;          // m+nv
};

/// The full problem datum. Immutable after construction; share freely.
struct GameModel {
    Dims dims;
    Generator generator;
    std::vector<RegimeCoeffs> coeffs;    // length D
    std::vector<RegimeWeights> weights;  // length D
    double gamma = 1.0;
    Vec initial_state;                   // deterministic xi
    int initial_regime = 0;              // 0-based internally
    double initial_time = 0.0;

    void check_shape() const {
        dims.check();
        generator.check();
        if (generator.states() != dims.D)
            throw std::invalid_argument("generator size must match the number of regimes");
        if (static_cast<int>(coeffs.size()) != dims.D ||
            static_cast<int>(weights.size()) != dims.D)
            throw std::invalid_argument("coefficient lists must have one entry per regime");
        if (initial_state.size() != dims.n)
            throw std::invalid_argument("initial state dimension mismatch");
        if (initial_regime < 0 || initial_regime >= dims.D)
            throw std::invalid_argument("initial regime out of range");
        if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
        if (initial_time < 0.0 || initial_time >= dims.T)
            throw std::invalid_argument("initial time must lie in [0, T)");
    }

    /// All coefficient breakpoints, for insertion into integration grids.
    std::vector<double> breakpoints() const {
        std::set<double> bp;
        auto add = [&](const auto& pw) {
            for (double s : pw.breakpoints()) bp.insert(s);
        };
        for (const auto& c : coeffs) {
            add(c.A); add(c.B1); add(c.B2);
            add(c.C); add(c.D1); add(c.D2);
            add(c.Cbar); add(c.D1bar); add(c.D2bar);
            add(c.b); add(c.sigma); add(c.sigmabar);
        }
        for (const auto& w : weights) {
            add(w.Q); add(w.R1); add(w.R2); add(w.S1); add(w.S2);
            add(w.q); add(w.rho1); add(w.rho2);
        }
        return std::vector<double>(bp.begin(), bp.end());
    }
};

namespace detail {

inline Mat zeros(int r, int c) { return Mat::Zero(r, c); }

inline double min_eigenvalue(const Mat& sym) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sym + sym.transpose()),
                                          Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Mat& sym) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sym + sym.transpose()),
                                          Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

inline double asymmetry(const Mat& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Fill absent inhomogeneous terms with zero vectors of the right size.
inline void fill_defaults(GameModel& model) {
    const int n = model.dims.n, m = model.dims.m, nv = model.dims.nv;
    for (auto& c : model.coeffs) {
        if (c.b.pieces().front().size() == 0) c.b = Piecewise<Vec>(Vec::Zero(n));
        if (c.sigma.pieces().front().size() == 0) c.sigma = Piecewise<Vec>(Vec::Zero(n));
        if (c.sigmabar.pieces().front().size() == 0) c.sigmabar = Piecewise<Vec>(Vec::Zero(n));
    }
    for (auto& w : model.weights) {
        if (w.q.pieces().front().size() == 0) w.q = Piecewise<Vec>(Vec::Zero(n));
        if (w.rho1.pieces().front().size() == 0) w.rho1 = Piecewise<Vec>(Vec::Zero(m));
        if (w.rho2.pieces().front().size() == 0) w.rho2 = Piecewise<Vec>(Vec::Zero(nv));
        if (w.g.size() == 0) w.g = Vec::Zero(n);
    }
}

/// Checks the standing assumptions on the loaded data. Side-effect-free and
/// idempotent; failures are reported, never thrown.
inline ValidationReport validate(const GameModel& model,
                                 const ValidationOptions& opt = {}) {
    const int n = model.dims.n, m = model.dims.m, nv = model.dims.nv;
    ValidationReport report;

    // Integrability of piecewise-constant data on a finite horizon holds by
    // construction; recorded for completeness.
    report.assumptions.push_back(
        {"integrability of dynamics coefficients", true, "satisfied by construction", {}});
    report.assumptions.push_back(
        {"integrability of cost weights", true, "satisfied by construction", {}});

    AssumptionResult gen{"generator structure", true, "", {}};
    for (int i = 0; i < model.dims.D; ++i) {
        const double row = model.generator.lambda.row(i).sum();
        if (std::abs(row) > 1e-12) {
            gen.pass = false;
            gen.violations.push_back({"lambda row " + std::to_string(i + 1), i + 1, 0.0, row});
        }
    }
    report.assumptions.push_back(std::move(gen));

    AssumptionResult sym{"symmetry of Q, R1, R2, G", true, "", {}};
    AssumptionResult g_psd{"terminal weight G >= 0", true, "", {}};
    AssumptionResult r_pos{"running weight diag(R1, R2) >> 0", true, "", {}};
    AssumptionResult qs{"Q - S' R^{-1} S >= 0", true, "", {}};

    auto record = [](AssumptionResult& a, const std::string& mat, int regime, double time,
                     double ev) {
        a.pass = false;
        a.violations.push_back({mat, regime + 1, time, ev});
    };

    for (int i = 0; i < model.dims.D; ++i) {
        const auto& w = model.weights[i];

        // Each check runs on every constant piece of the weight functions.
        std::set<double> piece_starts{model.initial_time};
        for (double s : w.Q.breakpoints()) piece_starts.insert(s);
        for (double s : w.R1.breakpoints()) piece_starts.insert(s);
        for (double s : w.R2.breakpoints()) piece_starts.insert(s);
        for (double s : w.S1.breakpoints()) piece_starts.insert(s);
        for (double s : w.S2.breakpoints()) piece_starts.insert(s);

        if (detail::asymmetry(w.G) > opt.tol_sym) record(sym, "G", i, model.dims.T, 0.0);
        const double g_min = detail::min_eigenvalue(w.G);
        if (g_min < -opt.tol_psd) record(g_psd, "G", i, model.dims.T, g_min);

        for (double s : piece_starts) {
            const Mat& Q = w.Q(s);
            const Mat& R1 = w.R1(s);
            const Mat& R2 = w.R2(s);
            if (detail::asymmetry(Q) > opt.tol_sym) record(sym, "Q", i, s, 0.0);
            if (detail::asymmetry(R1) > opt.tol_sym) record(sym, "R1", i, s, 0.0);
            if (detail::asymmetry(R2) > opt.tol_sym) record(sym, "R2", i, s, 0.0);

            Mat R = detail::zeros(m + nv, m + nv);
            R.topLeftCorner(m, m) = R1;
            R.bottomRightCorner(nv, nv) = R2;
            const double r_min = detail::min_eigenvalue(R);
            if (r_min < opt.delta_r) {
                record(r_pos, "diag(R1,R2)", i, s, r_min);
                continue;  // the Q - S'R^{-1}S check needs R invertible
            }

            Mat S(m + nv, n);
            S.topRows(m) = w.S1(s);
            S.bottomRows(nv) = w.S2(s);
            const Mat residual = Q - S.transpose() * R.ldlt().solve(S);
            const double qs_min = detail::min_eigenvalue(residual);
            if (qs_min < -opt.tol_psd) record(qs, "Q - S'R^{-1}S", i, s, qs_min);
        }
    }

    report.assumptions.push_back(std::move(sym));
    report.assumptions.push_back(std::move(g_psd));
    report.assumptions.push_back(std::move(r_pos));
    report.assumptions.push_back(std::move(qs));
    return report;
}

/// Stacked coefficient matrices at (s, regime). The soft-constrained weight
/// equals diag(R1, R2) with gamma^2 subtracted down the disturbance diagonal,
/// entrywise exactly.
inline StackedCoeffs stacked_views(const GameModel& model, double s, int regime) {
    if (s < 0.0 || s > model.dims.T) throw std::out_of_range("time outside [0, T]");
    if (regime < 0 || regime >= model.dims.D) throw std::out_of_range("invalid regime");

    const int n = model.dims.n, m = model.dims.m, nv = model.dims.nv;
    const auto& c = model.coeffs[regime];
    const auto& w = model.weights[regime];

    StackedCoeffs out;
    out.B = detail::zeros(n, m + nv);
    out.B.leftCols(m) = c.B1(s);
    out.B.rightCols(nv) = c.B2(s);
    out.D = detail::zeros(n, m + nv);
    out.D.leftCols(m) = c.D1(s);
    out.D.rightCols(nv) = c.D2(s);
    out.Dbar = detail::zeros(n, m + nv);
    out.Dbar.leftCols(m) = c.D1bar(s);
    out.Dbar.rightCols(nv) = c.D2bar(s);

    out.R = detail::zeros(m + nv, m + nv);
    out.R.topLeftCorner(m, m) = w.R1(s);
    out.R.bottomRightCorner(nv, nv) = w.R2(s);
    out.Rgamma = out.R;
    const double g2 = model.gamma * model.gamma;
    for (int k = 0; k < nv; ++k) out.Rgamma(m + k, m + k) -= g2;

    out.S = detail::zeros(m + nv, n);
    out.S.topRows(m) = w.S1(s);
    out.S.bottomRows(nv) = w.S2(s);
    out.rho = Vec::Zero(m + nv);
    out.rho.head(m) = w.rho1(s);
    out.rho.tail(nv) = w.rho2(s);
    return out;
}

/// Copy with a different attenuation level.
inline GameModel with_gamma(GameModel model, double gamma) {
    model.gamma = gamma;
    return model;
}

/// Copy with all inhomogeneous terms and the initial state zeroed; this is
/// the variant whose cost defines the disturbance-to-output norm.
inline GameModel homogenized(GameModel model) {
    const int n = model.dims.n, m = model.dims.m, nv = model.dims.nv;
    for (auto& c : model.coeffs) {
        c.b = Piecewise<Vec>(Vec::Zero(n));
        c.sigma = Piecewise<Vec>(Vec::Zero(n));
        c.sigmabar = Piecewise<Vec>(Vec::Zero(n));
    }
    for (auto& w : model.weights) {
        w.q = Piecewise<Vec>(Vec::Zero(n));
        w.rho1 = Piecewise<Vec>(Vec::Zero(m));
        w.rho2 = Piecewise<Vec>(Vec::Zero(nv));
        w.g = Vec::Zero(n);
    }
    model.initial_state = Vec::Zero(n);
    return model;
}

}  // namespace rsgame
