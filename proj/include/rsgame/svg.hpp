#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace rsgame {

/// Self-contained SVG line chart, enough for trajectory and gain plots
/// without an external plotting dependency.
class LinePlot {
  public:
    LinePlot(std::string title, std::string xlabel = "s", std::string ylabel = "")
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

    void add_series(std::string name, std::vector<double> x, std::vector<double> y) {
        series_.push_back({std::move(name), std::move(x), std::move(y)});
    }

    void write(const std::string& path) const {
        constexpr double W = 760, H = 460;
        constexpr double L = 70, R = 180, T = 44, B = 52;  // margins
        const double pw = W - L - R, ph = H - T - B;

        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& s : series_)
            for (size_t k = 0; k < s.x.size(); ++k) {
                xmin = std::min(xmin, s.x[k]);
                xmax = std::max(xmax, s.x[k]);
                ymin = std::min(ymin, s.y[k]);
                ymax = std::max(ymax, s.y[k]);
            }
        if (!(xmax > xmin)) xmax = xmin + 1.0;
        if (!(ymax > ymin)) {
            ymax = ymin + 1.0;
            ymin -= 1.0;
        }
        const double pad = 0.05 * (ymax - ymin);
        ymin -= pad;
        ymax += pad;

        auto px = [&](double x) { return L + pw * (x - xmin) / (xmax - xmin); };
        auto py = [&](double y) { return T + ph * (1.0 - (y - ymin) / (ymax - ymin)); };
        auto num = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4g", v);
            return std::string(buf);
        };

        static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                        "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

        std::ofstream out(path);
        out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
            << "' viewBox='0 0 " << W << ' ' << H << "'>\n";
        out << "<rect width='100%' height='100%' fill='white'/>\n";
        out << "<text x='" << L + pw / 2 << "' y='22' text-anchor='middle' "
            << "font-family='sans-serif' font-size='15'>" << title_ << "</text>\n";

        // axes and ticks
        out << "<rect x='" << L << "' y='" << T << "' width='" << pw << "' height='" << ph
            << "' fill='none' stroke='#333'/>\n";
        for (int t = 0; t <= 5; ++t) {
            const double fx = xmin + (xmax - xmin) * t / 5.0;
            const double fy = ymin + (ymax - ymin) * t / 5.0;
            out << "<line x1='" << px(fx) << "' y1='" << T + ph << "' x2='" << px(fx)
                << "' y2='" << T + ph + 4 << "' stroke='#333'/>\n";
            out << "<text x='" << px(fx) << "' y='" << T + ph + 18
                << "' text-anchor='middle' font-family='sans-serif' font-size='11'>" << num(fx)
                << "</text>\n";
            out << "<line x1='" << L - 4 << "' y1='" << py(fy) << "' x2='" << L << "' y2='"
                << py(fy) << "' stroke='#333'/>\n";
            out << "<text x='" << L - 8 << "' y='" << py(fy) + 4
                << "' text-anchor='end' font-family='sans-serif' font-size='11'>" << num(fy)
                << "</text>\n";
            if (t > 0) {
                out << "<line x1='" << L << "' y1='" << py(fy) << "' x2='" << L + pw
                    << "' y2='" << py(fy) << "' stroke='#eee'/>\n";
            }
        }
        out << "<text x='" << L + pw / 2 << "' y='" << H - 14
            << "' text-anchor='middle' font-family='sans-serif' font-size='12'>" << xlabel_
            << "</text>\n";
        if (!ylabel_.empty())
            out << "<text x='16' y='" << T + ph / 2
                << "' text-anchor='middle' font-family='sans-serif' font-size='12' "
                << "transform='rotate(-90 16 " << T + ph / 2 << ")'>" << ylabel_ << "</text>\n";

        for (size_t si = 0; si < series_.size(); ++si) {
            const auto& s = series_[si];
            const char* color = palette[si % 8];
            out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.4' points='";
            for (size_t k = 0; k < s.x.size(); ++k) {
                if (k) out << ' ';
                out << px(s.x[k]) << ',' << py(s.y[k]);
            }
            out << "'/>\n";
            const double ly = T + 16 + 18 * static_cast<double>(si);
            out << "<line x1='" << L + pw + 10 << "' y1='" << ly << "' x2='" << L + pw + 30
                << "' y2='" << ly << "' stroke='" << color << "' stroke-width='2'/>\n";
            out << "<text x='" << L + pw + 36 << "' y='" << ly + 4
                << "' font-family='sans-serif' font-size='11'>" << s.name << "</text>\n";
        }
        out << "</svg>\n";
    }

  private:
    struct Series {
        std::string name;
        std::vector<double> x, y;
    };
    std::string title_, xlabel_, ylabel_;
    std::vector<Series> series_;
};

}  // namespace rsgame
