#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tpmwork::cli {

struct Series {
    std::string label;
    std::vector<double> x{};
    std::vector<double> y{};
    std::vector<double> yerr{};  ///< empty or one per point
    bool markers = true;
    bool lines = true;
};

struct LinePlot {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    std::vector<Series> series{};
    bool logx = false;
    bool logy = false;
    std::optional<double> hline{};  ///< dashed reference line, e.g. y = 0
};

struct HeatmapPanel {
    std::string title;
    std::vector<double> x{};  ///< column coordinates
    std::vector<double> y{};  ///< row coordinates
    std::vector<std::vector<double>> z{};  ///< z[row][col]; NaN cells are left blank
};

struct Heatmap {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    std::string zlabel;
    std::vector<HeatmapPanel> panels{};  ///< side by side, shared symmetric color range
};

/// Diverging map: blue below zero, light green at zero, red above. t in [-1, 1].
std::string diverging_color(double t);

/// Writes `<stem>.svg` and `<stem>.csv` (series,x,y,yerr) holding the plotted points.
/// Points with a nonpositive coordinate on a log axis are dropped from both files.
void write_line_plot(const std::filesystem::path& stem, const LinePlot& plot);

/// Writes `<stem>.svg` and `<stem>.csv` (panel,x,y,z).
void write_heatmap(const std::filesystem::path& stem, const Heatmap& map);

}  // namespace tpmwork::cli
