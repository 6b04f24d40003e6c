#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "rsgame/eval.hpp"
#include "rsgame/gains.hpp"
#include "rsgame/riccati.hpp"
#include "rsgame/sim.hpp"

namespace rsgame {

namespace csv_detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void matrix_headers(std::ofstream& out, const std::string& name, int rows, int cols) {
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            out << ',' << name;
            if (rows * cols > 1) out << '_' << r + 1 << '_' << c + 1;
        }
}

inline void matrix_row(std::ofstream& out, const Mat& m) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) out << ',' << fmt(m(r, c));
}

}  // namespace csv_detail

/// One row per (node, regime): Riccati matrices, offset vector, and margins.
inline void write_riccati_csv(const std::string& path, const RiccatiSolution& sol) {
    std::ofstream out(path);
    const int n = sol.Pi.rows;
    out << "s,regime";
    csv_detail::matrix_headers(out, "Pi", n, n);
    csv_detail::matrix_headers(out, "P", n, n);
    csv_detail::matrix_headers(out, "eta", n, 1);
    out << ",margin_rbar2,margin_r11,margin_r22,margin_schur1,margin_schur2\n";
    for (size_t k = 0; k < sol.grid.nodes.size(); ++k) {
        for (int i = 0; i < sol.Pi.D; ++i) {
            const auto& nm = sol.margins_at(static_cast<int>(k), i);
            out << csv_detail::fmt(sol.grid.nodes[k]) << ',' << i + 1;
            csv_detail::matrix_row(out, sol.Pi.at(static_cast<int>(k), i));
            csv_detail::matrix_row(out, sol.P.at(static_cast<int>(k), i));
            csv_detail::matrix_row(out, sol.eta.at(static_cast<int>(k), i));
            out << ',' << csv_detail::fmt(nm.rbar2) << ',' << csv_detail::fmt(nm.r11) << ','
                << csv_detail::fmt(nm.r22) << ',' << csv_detail::fmt(nm.schur1) << ','
                << csv_detail::fmt(nm.schur2) << '\n';
        }
    }
}

inline void write_gains_csv(const std::string& path, const SaddleGains& g) {
    std::ofstream out(path);
    out << "s,regime";
    csv_detail::matrix_headers(out, "Theta1", g.m, g.n);
    csv_detail::matrix_headers(out, "Theta2", g.nv, g.n);
    csv_detail::matrix_headers(out, "TildeTheta2", g.nv, g.n);
    csv_detail::matrix_headers(out, "v1", g.m, 1);
    csv_detail::matrix_headers(out, "v2", g.nv, 1);
    out << '\n';
    for (size_t k = 0; k < g.grid.nodes.size(); ++k) {
        for (int i = 0; i < g.D; ++i) {
            out << csv_detail::fmt(g.grid.nodes[k]) << ',' << i + 1;
            const Mat& th = g.theta_hat_at(static_cast<int>(k), i);
            csv_detail::matrix_row(out, th.topRows(g.m));
            csv_detail::matrix_row(out, th.bottomRows(g.nv));
            csv_detail::matrix_row(out, g.theta_tilde2_at(static_cast<int>(k), i));
            const Vec& vb = g.vbar_at(static_cast<int>(k), i);
            csv_detail::matrix_row(out, Mat(vb.head(g.m)));
            csv_detail::matrix_row(out, Mat(vb.tail(g.nv)));
            out << '\n';
        }
    }
}

inline void write_certificates_csv(const std::string& path, const RiccatiSolution& sol) {
    std::ofstream out(path);
    out << "s,regime,margin_rbar2,margin_r11,margin_r22,margin_schur1,margin_schur2\n";
    for (size_t k = 0; k < sol.grid.nodes.size(); ++k)
        for (int i = 0; i < sol.Pi.D; ++i) {
            const auto& nm = sol.margins_at(static_cast<int>(k), i);
            out << csv_detail::fmt(sol.grid.nodes[k]) << ',' << i + 1 << ','
                << csv_detail::fmt(nm.rbar2) << ',' << csv_detail::fmt(nm.r11) << ','
                << csv_detail::fmt(nm.r22) << ',' << csv_detail::fmt(nm.schur1) << ','
                << csv_detail::fmt(nm.schur2) << '\n';
        }
}

inline void write_path_csv(const std::string& path, const SimPath& p) {
    std::ofstream out(path);
    const int n = static_cast<int>(p.x.cols());
    const int m = static_cast<int>(p.u.cols());
    const int nv = static_cast<int>(p.v.cols());
    out << "s,regime";
    csv_detail::matrix_headers(out, "x", 1, n);
    csv_detail::matrix_headers(out, "xhat", 1, n);
    csv_detail::matrix_headers(out, "xtilde", 1, n);
    csv_detail::matrix_headers(out, "u", 1, m);
    csv_detail::matrix_headers(out, "v", 1, nv);
    csv_detail::matrix_headers(out, "vhat", 1, nv);
    csv_detail::matrix_headers(out, "vtilde", 1, nv);
    out << '\n';
    for (size_t k = 0; k < p.s.size(); ++k) {
        out << csv_detail::fmt(p.s[k]) << ',' << p.regime[k] + 1;
        csv_detail::matrix_row(out, p.x.row(k));
        csv_detail::matrix_row(out, p.xhat.row(k));
        csv_detail::matrix_row(out, p.xtilde.row(k));
        csv_detail::matrix_row(out, p.u.row(k));
        csv_detail::matrix_row(out, p.v.row(k));
        csv_detail::matrix_row(out, p.vhat.row(k));
        csv_detail::matrix_row(out, p.vtilde.row(k));
        out << '\n';
    }
}

inline void write_chain_csv(const std::string& path, const ChainPath& p) {
    std::ofstream out(path);
    out << "s,regime\n";
    out << csv_detail::fmt(p.t0) << ',' << p.states.front() + 1 << '\n';
    for (size_t k = 0; k < p.jump_times.size(); ++k)
        out << csv_detail::fmt(p.jump_times[k]) << ',' << p.states[k + 1] + 1 << '\n';
}

inline void write_sweep_csv(const std::string& path,
                            const std::vector<GammaSweepPoint>& sweep) {
    std::ofstream out(path);
    out << "gamma,solvable,min_margin\n";
    for (const auto& pt : sweep)
        out << csv_detail::fmt(pt.gamma) << ',' << (pt.solvable ? 1 : 0) << ','
            << csv_detail::fmt(pt.min_margin) << '\n';
}

}  // namespace rsgame
