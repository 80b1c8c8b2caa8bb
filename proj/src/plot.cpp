#include "nirprompt/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "nirprompt/errors.hpp"

namespace nirprompt {

namespace {

std::ofstream open_svg(const std::string& path, int width, int height) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io", "cannot write plot " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"monospace\" font-size=\"12\">\n";
    return out;
}

}  // namespace

void svg_heatmap(const Matrix& values, const std::vector<std::string>& row_labels,
                 const std::vector<std::string>& col_labels, const std::string& title,
                 const std::string& path) {
    const int cell = 56, left = 90, top = 50;
    const int rows = static_cast<int>(values.rows());
    const int cols = static_cast<int>(values.cols());
    const int width = left + cols * cell + 20;
    const int height = top + rows * cell + 20;
    double vmax = std::max(values.maxCoeff(), 1e-12);

    std::ofstream out = open_svg(path, width, height);
    out << "<text x=\"" << left << "\" y=\"20\">" << title << "</text>\n";
    for (int c = 0; c < cols; ++c)
        out << "<text x=\"" << left + c * cell + 6 << "\" y=\"" << top - 8 << "\">"
            << col_labels[static_cast<size_t>(c)] << "</text>\n";
    for (int r = 0; r < rows; ++r) {
        out << "<text x=\"10\" y=\"" << top + r * cell + cell / 2 + 4 << "\">"
            << row_labels[static_cast<size_t>(r)] << "</text>\n";
        for (int c = 0; c < cols; ++c) {
            double v = values(r, c);
            int shade = static_cast<int>(255.0 * (1.0 - 0.85 * v / vmax));
            char color[8];
            std::snprintf(color, sizeof(color), "#%02x%02xff", shade, shade);
            char label[16];
            std::snprintf(label, sizeof(label), "%.2f", v);
            out << "<rect x=\"" << left + c * cell << "\" y=\"" << top + r * cell
                << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"" << color
                << "\" stroke=\"#444\"/>\n";
            out << "<text x=\"" << left + c * cell + 8 << "\" y=\""
                << top + r * cell + cell / 2 + 4 << "\">" << label << "</text>\n";
        }
    }
    out << "</svg>\n";
}

void svg_training_curve(const std::vector<double>& losses, const std::string& title,
                        const std::string& path) {
    require(!losses.empty(), "config", "no loss values to plot");
    const int width = 640, height = 360, left = 50, top = 30, bottom = 30, right = 10;
    const double lo = *std::min_element(losses.begin(), losses.end());
    const double hi = std::max(*std::max_element(losses.begin(), losses.end()), lo + 1e-12);
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    std::ofstream out = open_svg(path, width, height);
    out << "<text x=\"" << left << "\" y=\"18\">" << title << "</text>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"#888\"/>\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", hi);
    out << "<text x=\"4\" y=\"" << top + 10 << "\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.3f", lo);
    out << "<text x=\"4\" y=\"" << top + plot_h << "\">" << buf << "</text>\n";
    out << "<polyline fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < losses.size(); ++i) {
        double x = left + plot_w * (losses.size() == 1
                                        ? 0.5
                                        : static_cast<double>(i) /
                                              static_cast<double>(losses.size() - 1));
        double y = top + plot_h * (1.0 - (losses[i] - lo) / (hi - lo));
        out << x << "," << y << " ";
    }
    out << "\"/>\n</svg>\n";
}

}  // namespace nirprompt
