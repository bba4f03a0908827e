#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "nkdcd/inference.hpp"

namespace nkdcd {

/// Static SVG heat map of one n x n block-norm matrix on a linear gray scale
/// (white = 0, black = max). `scale_max` fixes the top of the scale so every
/// lag of a stack renders comparably; an all-zero matrix renders as a uniform
/// background.
inline std::string heatmap_svg(const Matrix& norms, const std::string& title, double scale_max) {
    const Index n = norms.rows();
    const int cell = 24, margin = 36, legend = 24;
    const int width = margin + static_cast<int>(n) * cell + 8;
    const int height = margin + static_cast<int>(n) * cell + legend;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"monospace\" font-size=\"10\">\n";
    svg << "  <text x=\"" << margin << "\" y=\"12\">" << title << "</text>\n";
    for (Index i = 0; i < n; ++i) {
        svg << "  <text x=\"4\" y=\"" << margin + static_cast<int>(i) * cell + cell / 2 + 4
            << "\">" << (i + 1) << "</text>\n";
        svg << "  <text x=\"" << margin + static_cast<int>(i) * cell + cell / 2 - 4
            << "\" y=\"" << margin - 6 << "\">" << (i + 1) << "</text>\n";
    }
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < norms.cols(); ++j) {
            const double v = scale_max > 0.0 ? norms(i, j) / scale_max : 0.0;
            const int gray = static_cast<int>(255.0 * (1.0 - std::min(1.0, std::max(0.0, v))));
            svg << "  <rect x=\"" << margin + static_cast<int>(j) * cell << "\" y=\""
                << margin + static_cast<int>(i) * cell << "\" width=\"" << cell << "\" height=\""
                << cell << "\" fill=\"rgb(" << gray << ',' << gray << ',' << gray
                << ")\" stroke=\"rgb(200,200,200)\"/>\n";
        }
    }
    svg << "  <text x=\"" << margin << "\" y=\"" << margin + static_cast<int>(n) * cell + 16
        << "\">scale max = " << scale_max << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

/// One SVG per lag under `dir`, named lag1.svg .. lagL.svg, sharing one
/// gray scale across lags.
inline void write_heatmaps(const std::string& dir, const GcScores& scores) {
    double scale_max = 0.0;
    for (const Matrix& m : scores.per_lag) scale_max = std::max(scale_max, m.max_abs());
    for (std::size_t l = 0; l < scores.per_lag.size(); ++l) {
        const std::string path = dir + "/lag" + std::to_string(l + 1) + ".svg";
        std::ofstream out(path);
        if (!out) throw IoError("cannot open '" + path + "' for writing");
        out << heatmap_svg(scores.per_lag[l], "lag " + std::to_string(l + 1), scale_max);
        if (!out) throw IoError("write failed for '" + path + "'");
    }
}

} // namespace nkdcd
