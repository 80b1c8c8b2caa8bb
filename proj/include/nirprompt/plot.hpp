#pragma once

#include <string>
#include <vector>

#include "nirprompt/graph.hpp"

namespace nirprompt {

// Static SVG emitters for the analysis outputs. Values are rendered into
// the cells (two decimals), matching the matrix files they are drawn from.
void svg_heatmap(const Matrix& values, const std::vector<std::string>& row_labels,
                 const std::vector<std::string>& col_labels, const std::string& title,
                 const std::string& path);

void svg_training_curve(const std::vector<double>& losses, const std::string& title,
                        const std::string& path);

}  // namespace nirprompt
