#pragma once

#include <string>
#include <vector>

namespace cgvamp {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

// Self-contained line chart. Output depends only on the inputs (fixed canvas,
// tick selection, and number formatting), so identical data gives identical
// bytes. Non-finite points are dropped.
void render_line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<PlotSeries>& series,
                       const std::string& path);

} // namespace cgvamp
