#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tpmwork/sweep.hpp"

namespace tpmwork::cli {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string esc(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

std::string label(double x) {
    if (x == 0.0) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

std::ofstream open(const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
    return stem.parent_path() / (stem.filename().string() + ext);
}

/// Round tick positions covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
    if (!(hi > lo)) return {lo};
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (const double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> t;
    for (double v = std::ceil(lo / step - 1e-9) * step; v <= hi + step * 1e-9; v += step) {
        t.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
    }
    return t;
}

struct Axis {
    double lo = 0.0, hi = 1.0;
    bool log = false;
    double px0 = 0.0, px1 = 1.0;

    double value(double v) const { return log ? std::log10(v) : v; }
    double map(double v) const { return px0 + (value(v) - lo) / (hi - lo) * (px1 - px0); }
};

void fit_axis(Axis& a, std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(), [&](double v) { return !std::isfinite(v); }),
                 values.end());
    if (values.empty()) {
        a.lo = 0.0;
        a.hi = 1.0;
        return;
    }
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = a.value(*mn), hi = a.value(*mx);
    if (hi - lo < 1e-300) {
        const double pad = std::max(std::abs(lo) * 0.1, 0.5);
        lo -= pad;
        hi += pad;
    } else {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    a.lo = lo;
    a.hi = hi;
}

bool usable(const LinePlot& p, double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return false;
    if (p.logx && x <= 0.0) return false;
    if (p.logy && y <= 0.0) return false;
    return true;
}

}  // namespace

std::string diverging_color(double t) {
    t = std::clamp(std::isfinite(t) ? t : 0.0, -1.0, 1.0);
    constexpr double neg[3] = {33, 76, 163};
    constexpr double mid[3] = {199, 233, 192};
    constexpr double pos[3] = {179, 24, 43};
    const double* end = t < 0 ? neg : pos;
    const double s = std::abs(t);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(mid[0] + s * (end[0] - mid[0]))),
                  static_cast<int>(std::lround(mid[1] + s * (end[1] - mid[1]))),
                  static_cast<int>(std::lround(mid[2] + s * (end[2] - mid[2]))));
    return buf;
}

void write_line_plot(const std::filesystem::path& stem, const LinePlot& plot) {
    constexpr double W = 720, H = 460, L = 80, R = 190, T = 40, B = 60;
    Axis ax{.log = plot.logx, .px0 = L, .px1 = W - R};
    Axis ay{.log = plot.logy, .px0 = H - B, .px1 = T};

    auto csv = open(with_ext(stem, ".csv"));
    csv << "series,x,y,yerr\n";
    std::vector<double> xs, ys;
    for (const auto& s : plot.series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!usable(plot, s.x[i], s.y[i])) continue;
            const double e = s.yerr.empty() ? 0.0 : s.yerr[i];
            csv << s.label << ',' << sweep::format_double(s.x[i]) << ',' << sweep::format_double(s.y[i]) << ','
                << (s.yerr.empty() ? std::string() : sweep::format_double(e)) << '\n';
            xs.push_back(s.x[i]);
            ys.push_back(s.y[i]);
            if (e > 0.0) {
                if (!plot.logy || s.y[i] - e > 0.0) ys.push_back(s.y[i] - e);
                ys.push_back(s.y[i] + e);
            }
        }
    }
    if (plot.hline && (!plot.logy || *plot.hline > 0.0)) ys.push_back(*plot.hline);
    fit_axis(ax, xs);
    fit_axis(ay, ys);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << num((L + W - R) / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << esc(plot.title) << "</text>\n";
    svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - R - L << "\" height=\"" << H - B - T
        << "\" fill=\"none\" stroke=\"black\"/>\n";

    auto ticks = [&](const Axis& a, bool horizontal) {
        for (const double t : nice_ticks(a.lo, a.hi)) {
            const double v = a.log ? std::pow(10.0, t) : t;
            const double p = a.px0 + (t - a.lo) / (a.hi - a.lo) * (a.px1 - a.px0);
            if (horizontal) {
                svg << "<line x1=\"" << num(p) << "\" y1=\"" << H - B << "\" x2=\"" << num(p) << "\" y2=\""
                    << H - B + 5 << "\" stroke=\"black\"/>\n";
                svg << "<text x=\"" << num(p) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << label(v)
                    << "</text>\n";
            } else {
                svg << "<line x1=\"" << L - 5 << "\" y1=\"" << num(p) << "\" x2=\"" << L << "\" y2=\"" << num(p)
                    << "\" stroke=\"black\"/>\n";
                svg << "<text x=\"" << L - 8 << "\" y=\"" << num(p + 4) << "\" text-anchor=\"end\">" << label(v)
                    << "</text>\n";
            }
        }
    };
    ticks(ax, true);
    ticks(ay, false);
    svg << "<text x=\"" << num((L + W - R) / 2) << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
        << esc(plot.xlabel) << "</text>\n";
    svg << "<text x=\"20\" y=\"" << num((T + H - B) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
        << num((T + H - B) / 2) << ")\">" << esc(plot.ylabel) << "</text>\n";
    if (plot.hline && (!plot.logy || *plot.hline > 0.0)) {
        const double p = ay.map(*plot.hline);
        svg << "<line x1=\"" << L << "\" y1=\"" << num(p) << "\" x2=\"" << W - R << "\" y2=\"" << num(p)
            << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    }

    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& s = plot.series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        std::ostringstream path;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!usable(plot, s.x[i], s.y[i])) continue;
            const double px = ax.map(s.x[i]), py = ay.map(s.y[i]);
            path << (path.tellp() == 0 ? "M" : " L") << num(px) << ' ' << num(py);
            if (!s.yerr.empty() && s.yerr[i] > 0.0) {
                const double lo = s.y[i] - s.yerr[i];
                const double plo = (plot.logy && lo <= 0.0) ? H - B : ay.map(lo);
                const double phi = ay.map(s.y[i] + s.yerr[i]);
                svg << "<line x1=\"" << num(px) << "\" y1=\"" << num(plo) << "\" x2=\"" << num(px) << "\" y2=\""
                    << num(phi) << "\" stroke=\"" << color << "\"/>\n";
            }
            if (s.markers) {
                svg << "<circle cx=\"" << num(px) << "\" cy=\"" << num(py) << "\" r=\"3\" fill=\"" << color
                    << "\"/>\n";
            }
        }
        if (s.lines && path.tellp() > 0) {
            svg << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.5\"/>\n";
        }
        const double ly = T + 12 + 20 * static_cast<double>(k);
        svg << "<line x1=\"" << W - R + 15 << "\" y1=\"" << num(ly) << "\" x2=\"" << W - R + 40 << "\" y2=\""
            << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << W - R + 46 << "\" y=\"" << num(ly + 4) << "\">" << esc(s.label) << "</text>\n";
    }
    svg << "</svg>\n";
    open(with_ext(stem, ".svg")) << svg.str();
}

void write_heatmap(const std::filesystem::path& stem, const Heatmap& map) {
    constexpr double P = 240, G = 50, L = 70, T = 50, B = 60, CB = 110;
    const double np = static_cast<double>(map.panels.size());
    const double W = L + np * P + (np - 1) * G + CB;
    const double H = T + P + B;

    double zmax = 0.0;
    auto csv = open(with_ext(stem, ".csv"));
    csv << "panel,x,y,z\n";
    for (const auto& p : map.panels) {
        for (std::size_t r = 0; r < p.y.size(); ++r) {
            for (std::size_t c = 0; c < p.x.size(); ++c) {
                const double z = p.z[r][c];
                if (!std::isfinite(z)) continue;
                zmax = std::max(zmax, std::abs(z));
                csv << p.title << ',' << sweep::format_double(p.x[c]) << ',' << sweep::format_double(p.y[r]) << ','
                    << sweep::format_double(z) << '\n';
            }
        }
    }
    if (zmax == 0.0) zmax = 1.0;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << num((W - CB) / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
        << esc(map.title) << "</text>\n";

    // Cell edges halfway between neighbouring grid points.
    auto edges = [](const std::vector<double>& v) {
        std::vector<double> e(v.size() + 1);
        if (v.size() == 1) return std::vector<double>{v[0] - 0.5, v[0] + 0.5};
        for (std::size_t i = 1; i < v.size(); ++i) e[i] = 0.5 * (v[i - 1] + v[i]);
        e.front() = v.front() - (e[1] - v.front());
        e.back() = v.back() + (v.back() - e[v.size() - 1]);
        return e;
    };

    for (std::size_t k = 0; k < map.panels.size(); ++k) {
        const auto& p = map.panels[k];
        if (p.x.empty() || p.y.empty()) continue;
        const double x0 = L + static_cast<double>(k) * (P + G);
        const auto ex = edges(p.x), ey = edges(p.y);
        auto mx = [&](double v) { return x0 + (v - ex.front()) / (ex.back() - ex.front()) * P; };
        auto my = [&](double v) { return T + P - (v - ey.front()) / (ey.back() - ey.front()) * P; };
        for (std::size_t r = 0; r < p.y.size(); ++r) {
            for (std::size_t c = 0; c < p.x.size(); ++c) {
                const double z = p.z[r][c];
                if (!std::isfinite(z)) continue;
                const double a = mx(ex[c]), b = mx(ex[c + 1]);
                const double top = my(ey[r + 1]), bottom = my(ey[r]);
                svg << "<rect x=\"" << num(a) << "\" y=\"" << num(top) << "\" width=\"" << num(b - a + 0.3)
                    << "\" height=\"" << num(bottom - top + 0.3) << "\" fill=\"" << diverging_color(z / zmax)
                    << "\"/>\n";
            }
        }
        svg << "<rect x=\"" << num(x0) << "\" y=\"" << T << "\" width=\"" << P << "\" height=\"" << P
            << "\" fill=\"none\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << num(x0 + P / 2) << "\" y=\"" << T - 8 << "\" text-anchor=\"middle\">"
            << esc(p.title) << "</text>\n";
        for (const double t : nice_ticks(ex.front(), ex.back(), 4)) {
            svg << "<text x=\"" << num(mx(t)) << "\" y=\"" << T + P + 16 << "\" text-anchor=\"middle\">"
                << label(t) << "</text>\n";
        }
        for (const double t : nice_ticks(ey.front(), ey.back(), 4)) {
            svg << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(my(t) + 4) << "\" text-anchor=\"end\">"
                << label(t) << "</text>\n";
        }
        svg << "<text x=\"" << num(x0 + P / 2) << "\" y=\"" << T + P + 40 << "\" text-anchor=\"middle\">"
            << esc(map.xlabel) << "</text>\n";
    }
    svg << "<text x=\"18\" y=\"" << num(T + P / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << num(T + P / 2) << ")\">" << esc(map.ylabel) << "</text>\n";

    const double cx = W - CB + 25;
    constexpr int steps = 64;
    for (int i = 0; i < steps; ++i) {
        const double t = 1.0 - 2.0 * (i + 0.5) / steps;
        svg << "<rect x=\"" << num(cx) << "\" y=\"" << num(T + P * i / steps) << "\" width=\"18\" height=\""
            << num(P / steps + 0.3) << "\" fill=\"" << diverging_color(t) << "\"/>\n";
    }
    svg << "<rect x=\"" << num(cx) << "\" y=\"" << T << "\" width=\"18\" height=\"" << P
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (const double t : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
        svg << "<text x=\"" << num(cx + 24) << "\" y=\"" << num(T + P * (1.0 - t) / 2 + 4) << "\">"
            << label(t * zmax) << "</text>\n";
    }
    svg << "<text x=\"" << num(cx + 9) << "\" y=\"" << T - 8 << "\" text-anchor=\"middle\">" << esc(map.zlabel)
        << "</text>\n";
    svg << "</svg>\n";
    open(with_ext(stem, ".svg")) << svg.str();
}

}  // namespace tpmwork::cli
