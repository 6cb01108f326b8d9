#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "profcast/bma.hpp"
#include "profcast/errors.hpp"
#include "profcast/project.hpp"

namespace profcast::svg {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Frame {
  double width = 640, height = 420;
  double left = 60, right = 20, top = 36, bottom = 44;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

  double px(double x) const {
    return left + (x - x_min) / (x_max - x_min) * (width - left - right);
  }
  double py(double y) const {
    return height - bottom - (y - y_min) / (y_max - y_min) * (height - top - bottom);
  }
};

inline void open_svg(std::ostringstream& s, const Frame& f, const std::string& title,
                     const std::string& metadata_json) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
    << f.height << "\" viewBox=\"0 0 " << f.width << " " << f.height << "\">\n";
  s << "<metadata>" << metadata_json << "</metadata>\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << f.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << title << "</text>\n";
}

inline void axes(std::ostringstream& s, const Frame& f, const std::vector<double>& x_ticks,
                 const std::vector<double>& y_ticks, bool x_as_int) {
  s << "<line x1=\"" << f.left << "\" y1=\"" << f.height - f.bottom << "\" x2=\""
    << f.width - f.right << "\" y2=\"" << f.height - f.bottom << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\""
    << f.height - f.bottom << "\" stroke=\"black\"/>\n";
  for (double t : x_ticks) {
    const double x = f.px(t);
    s << "<line x1=\"" << num(x) << "\" y1=\"" << f.height - f.bottom << "\" x2=\"" << num(x)
      << "\" y2=\"" << f.height - f.bottom + 4 << "\" stroke=\"black\"/>\n";
    std::ostringstream label;
    if (x_as_int) label << static_cast<long long>(std::llround(t));
    else label << t;
    s << "<text x=\"" << num(x) << "\" y=\"" << f.height - f.bottom + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << label.str()
      << "</text>\n";
  }
  for (double t : y_ticks) {
    const double y = f.py(t);
    s << "<line x1=\"" << f.left - 4 << "\" y1=\"" << num(y) << "\" x2=\"" << f.left << "\" y2=\""
      << num(y) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << f.left - 8 << "\" y=\"" << num(y + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << t
      << "</text>\n";
  }
}

inline std::string polyline(const Frame& f, const std::vector<double>& xs,
                            const std::vector<double>& ys) {
  std::ostringstream pts;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) pts << ' ';
    pts << num(f.px(xs[i])) << ',' << num(f.py(ys[i]));
  }
  return pts.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write SVG: " + path);
  out << content;
}

}  // namespace detail

// History (solid), fitted trajectory, and forecast (dashed) with a shaded
// 95% band over the forecast horizon.
inline void write_trajectory_plot(const std::string& path, const project::ProjectionResult& r,
                                  const std::string& title) {
  detail::Frame f;
  std::vector<double> years;
  for (int y : r.history_years) years.push_back(y);
  for (const auto& fp : r.forecast) years.push_back(fp.year);
  f.x_min = years.front() - 1;
  f.x_max = years.back() + 1;
  f.y_min = 0;
  f.y_max = 100;

  std::ostringstream s;
  detail::open_svg(s, f, title,
                   "{\"kind\":\"trajectory\",\"bands\":\"pooled-quantiles\",\"country\":\"" +
                       r.country + "\"}");
  detail::axes(s, f, years, {0, 20, 40, 60, 80, 100}, true);

  if (!r.forecast.empty()) {
    // band polygon: last fitted point, then forecast hi forward / lo back
    std::ostringstream pts;
    const double x0 = f.px(r.history_years.back());
    const double y0 = f.py(r.fitted.back());
    pts << detail::num(x0) << ',' << detail::num(y0);
    for (const auto& fp : r.forecast)
      pts << ' ' << detail::num(f.px(fp.year)) << ',' << detail::num(f.py(fp.hi95));
    for (auto it = r.forecast.rbegin(); it != r.forecast.rend(); ++it)
      pts << ' ' << detail::num(f.px(it->year)) << ',' << detail::num(f.py(it->lo95));
    pts << ' ' << detail::num(x0) << ',' << detail::num(y0);
    s << "<polygon points=\"" << pts.str() << "\" fill=\"#9ecae1\" fill-opacity=\"0.45\" stroke=\"none\"/>\n";
  }

  std::vector<double> hx(r.history_years.begin(), r.history_years.end());
  s << "<polyline points=\"" << detail::polyline(f, hx, r.history)
    << "\" fill=\"none\" stroke=\"#555555\" stroke-width=\"1.6\"/>\n";
  s << "<polyline points=\"" << detail::polyline(f, hx, r.fitted)
    << "\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.6\"/>\n";

  if (!r.forecast.empty()) {
    std::vector<double> fx{static_cast<double>(r.history_years.back())};
    std::vector<double> fy{r.fitted.back()};
    for (const auto& fp : r.forecast) {
      fx.push_back(fp.year);
      fy.push_back(fp.mean);
    }
    s << "<polyline points=\"" << detail::polyline(f, fx, fy)
      << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.6\" stroke-dasharray=\"6,4\"/>\n";
  }

  s << "<text x=\"" << f.left << "\" y=\"" << f.height - 8
    << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555555\">"
    << "observed: gray, fitted: green, forecast: blue dashed, band: 95%</text>\n";
  s << "</svg>\n";
  detail::write_file(path, s.str());
}

// Predictive density with the expected rate (solid), the unconditional rate
// (dashed) and 95% quantile markers.
inline void write_density_plot(const std::string& path, const bma::DensityCurve& curve,
                               const std::string& title) {
  detail::Frame f;
  f.x_min = curve.grid.front();
  f.x_max = curve.grid.back();
  f.y_min = 0;
  f.y_max = *std::max_element(curve.density.begin(), curve.density.end()) * 1.1;
  if (f.y_max <= 0) f.y_max = 1;

  std::ostringstream s;
  detail::open_svg(s, f, title, "{\"kind\":\"predictive-density\",\"quantiles\":[0.025,0.975]}");
  const double span = f.x_max - f.x_min;
  std::vector<double> xt;
  for (int i = 0; i <= 4; ++i) xt.push_back(f.x_min + span * i / 4.0);
  // round ticks to two decimals for readability
  for (double& t : xt) t = std::round(t * 100.0) / 100.0;
  detail::axes(s, f, xt, {}, false);

  s << "<polyline points=\"" << detail::polyline(f, curve.grid, curve.density)
    << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";

  auto vline = [&](double x, const char* color, bool dashed) {
    s << "<line x1=\"" << detail::num(f.px(x)) << "\" y1=\"" << f.top << "\" x2=\""
      << detail::num(f.px(x)) << "\" y2=\"" << f.height - f.bottom << "\" stroke=\"" << color
      << "\"";
    if (dashed) s << " stroke-dasharray=\"5,4\"";
    s << "/>\n";
  };
  vline(curve.expected, "#d62728", false);
  vline(curve.observed, "#555555", true);
  vline(curve.q025, "#999999", true);
  vline(curve.q975, "#999999", true);

  s << "<text x=\"" << f.left << "\" y=\"" << f.height - 8
    << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555555\">"
    << "expected: red, unconditional: gray dashed, 95% quantiles: light dashed</text>\n";
  s << "</svg>\n";
  detail::write_file(path, s.str());
}

}  // namespace profcast::svg
