#include "cgvamp/core/svg_plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "cgvamp/core/errors.hpp"

namespace cgvamp {

namespace {

constexpr double kWidth = 860.0, kHeight = 520.0;
constexpr double kLeft = 72.0, kRight = 24.0, kTop = 44.0, kBottom = 56.0;

const char* kPalette[] = {"#1f6fb2", "#d1495b", "#2e8b57", "#c77d1e",
                          "#6a4c93", "#13829c", "#84494f", "#4f6d2f"};

std::string fixed2(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

std::string shortest(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double nice_step(double span, int target_ticks) {
  const double raw = span / std::max(1, target_ticks);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  double nice = 10.0;
  if (frac <= 1.0) nice = 1.0;
  else if (frac <= 2.0) nice = 2.0;
  else if (frac <= 5.0) nice = 5.0;
  return nice * mag;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

} // namespace

void render_line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<PlotSeries>& series,
                       const std::string& path) {
  require(!series.empty(), ErrorCode::invalid_arg, "plot: no series");

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  bool any = false;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), ErrorCode::shape, "plot: series length mismatch");
    for (size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      xmin = std::min(xmin, s.x[k]);
      xmax = std::max(xmax, s.x[k]);
      ymin = std::min(ymin, s.y[k]);
      ymax = std::max(ymax, s.y[k]);
      any = true;
    }
  }
  require(any, ErrorCode::invalid_arg, "plot: no finite data points");
  if (xmax == xmin) { xmax += 1.0; xmin -= 1.0; }
  if (ymax == ymin) { ymax += 1.0; ymin -= 1.0; }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * ph; };

  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "plot: cannot open '" + path + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\""
      << " text-anchor=\"middle\">" << escape(title) << "</text>\n";

  // Grid and ticks.
  const double xstep = nice_step(xmax - xmin, 8), ystep = nice_step(ymax - ymin, 6);
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax + 1e-9 * xstep; x += xstep) {
    const double gx = px(x);
    out << "<line x1=\"" << fixed2(gx) << "\" y1=\"" << fixed2(kTop) << "\" x2=\"" << fixed2(gx)
        << "\" y2=\"" << fixed2(kTop + ph) << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << fixed2(gx) << "\" y=\"" << fixed2(kTop + ph + 18)
        << "\" text-anchor=\"middle\">" << shortest(x) << "</text>\n";
  }
  for (double y = std::ceil(ymin / ystep) * ystep; y <= ymax + 1e-9 * ystep; y += ystep) {
    const double gy = py(y);
    out << "<line x1=\"" << fixed2(kLeft) << "\" y1=\"" << fixed2(gy) << "\" x2=\""
        << fixed2(kLeft + pw) << "\" y2=\"" << fixed2(gy)
        << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << fixed2(kLeft - 8) << "\" y=\"" << fixed2(gy + 4)
        << "\" text-anchor=\"end\">" << shortest(y) << "</text>\n";
  }
  out << "</g>\n";

  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\""
      << ph << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 14
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << kTop + ph / 2
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 18 " << kTop + ph / 2 << ")\">" << escape(y_label)
      << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::string points;
    for (size_t k = 0; k < series[si].x.size(); ++k) {
      if (!std::isfinite(series[si].x[k]) || !std::isfinite(series[si].y[k])) continue;
      points += fixed2(px(series[si].x[k])) + "," + fixed2(py(series[si].y[k])) + " ";
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\""
        << points << "\"/>\n";
  }

  // Legend.
  out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const double ly = kTop + 14 + 18.0 * static_cast<double>(si);
    out << "<line x1=\"" << fixed2(kLeft + pw - 170) << "\" y1=\"" << fixed2(ly - 4)
        << "\" x2=\"" << fixed2(kLeft + pw - 146) << "\" y2=\"" << fixed2(ly - 4)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fixed2(kLeft + pw - 140) << "\" y=\"" << fixed2(ly) << "\">"
        << escape(series[si].label) << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  require(out.good(), ErrorCode::io, "plot: write failed for '" + path + "'");
}

} // namespace cgvamp
