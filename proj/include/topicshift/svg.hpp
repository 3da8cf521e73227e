#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace topicshift {

// Minimal SVG line chart: series with optional shaded bands, linear or log-x.
class SvgChart {
 public:
  struct Series {
    std::string label;
    std::string color;
    std::vector<double> x, y, y_lo, y_hi;  // bands optional (empty = none)
  };

  SvgChart(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void set_log_x(bool on) { log_x_ = on; }
  void set_y_range(double lo, double hi) {
    y_min_ = lo;
    y_max_ = hi;
    fixed_y_ = true;
  }
  void add_series(Series s) { series_.push_back(std::move(s)); }

  std::string render() const {
    const double w = 760, h = 480, ml = 70, mr = 20, mt = 40, mb = 55;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series_) {
      for (double x : s.x) {
        xmin = std::min(xmin, tx(x));
        xmax = std::max(xmax, tx(x));
      }
      for (double y : s.y) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
      for (double y : s.y_lo) ymin = std::min(ymin, y);
      for (double y : s.y_hi) ymax = std::max(ymax, y);
    }
    if (series_.empty() || xmin > xmax) {
      xmin = 0;
      xmax = 1;
      ymin = 0;
      ymax = 1;
    }
    if (fixed_y_) {
      ymin = y_min_;
      ymax = y_max_;
    } else {
      const double pad = std::max(1e-9, (ymax - ymin) * 0.08);
      ymin -= pad;
      ymax += pad;
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;

    auto px = [&](double x) { return ml + (tx(x) - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

    std::ostringstream o;
    o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    o << "<rect width='100%' height='100%' fill='white'/>\n";
    o << "<text x='" << w / 2 << "' y='22' text-anchor='middle' font-size='16'>" << title_
      << "</text>\n";
    // axes
    o << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
      << "' stroke='black'/>\n";
    o << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double y = ymin + (ymax - ymin) * i / 5.0;
      o << "<line x1='" << ml - 4 << "' y1='" << py(y) << "' x2='" << ml << "' y2='" << py(y)
        << "' stroke='black'/>\n";
      o << "<text x='" << ml - 8 << "' y='" << py(y) + 4
        << "' text-anchor='end' font-size='11'>" << format(y) << "</text>\n";
    }
    std::vector<double> xticks;
    for (const auto& s : series_)
      for (double x : s.x) xticks.push_back(x);
    std::sort(xticks.begin(), xticks.end());
    xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
    if (xticks.size() > 12) {
      std::vector<double> thin;
      for (std::size_t i = 0; i < xticks.size(); i += (xticks.size() + 11) / 12)
        thin.push_back(xticks[i]);
      if (thin.back() != xticks.back()) thin.push_back(xticks.back());
      xticks = thin;
    }
    for (double x : xticks) {
      o << "<line x1='" << px(x) << "' y1='" << h - mb << "' x2='" << px(x) << "' y2='"
        << h - mb + 4 << "' stroke='black'/>\n";
      o << "<text x='" << px(x) << "' y='" << h - mb + 18
        << "' text-anchor='middle' font-size='11'>" << format(x) << "</text>\n";
    }
    o << "<text x='" << (ml + w - mr) / 2 << "' y='" << h - 12
      << "' text-anchor='middle' font-size='13'>" << x_label_ << "</text>\n";
    o << "<text x='16' y='" << (mt + h - mb) / 2
      << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 "
      << (mt + h - mb) / 2 << ")'>" << y_label_ << "</text>\n";

    for (const auto& s : series_) {
      if (!s.y_lo.empty() && s.y_lo.size() == s.x.size() && s.y_hi.size() == s.x.size()) {
        o << "<polygon fill='" << s.color << "' fill-opacity='0.15' stroke='none' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i)
          o << px(s.x[i]) << ',' << py(clampv(s.y_hi[i], ymin, ymax)) << ' ';
        for (std::size_t i = s.x.size(); i-- > 0;)
          o << px(s.x[i]) << ',' << py(clampv(s.y_lo[i], ymin, ymax)) << ' ';
        o << "'/>\n";
      }
      o << "<polyline fill='none' stroke='" << s.color << "' stroke-width='2' points='";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      o << "'/>\n";
    }
    double ly = mt + 6;
    for (const auto& s : series_) {
      o << "<line x1='" << w - mr - 150 << "' y1='" << ly << "' x2='" << w - mr - 126 << "' y2='"
        << ly << "' stroke='" << s.color << "' stroke-width='3'/>\n";
      o << "<text x='" << w - mr - 120 << "' y='" << ly + 4 << "' font-size='12'>" << s.label
        << "</text>\n";
      ly += 18;
    }
    o << "</svg>\n";
    return o.str();
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("SvgChart: cannot open " + path);
    out << render();
  }

 private:
  double tx(double x) const { return log_x_ ? std::log2(std::max(x, 1e-300)) : x; }
  static double clampv(double v, double lo, double hi) { return std::max(lo, std::min(hi, v)); }
  static std::string format(double v) {
    std::ostringstream o;
    if (std::abs(v - std::round(v)) < 1e-9 && std::abs(v) < 1e7)
      o << static_cast<long long>(std::llround(v));
    else {
      o.precision(3);
      o << v;
    }
    return o.str();
  }

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  bool log_x_ = false;
  bool fixed_y_ = false;
  double y_min_ = 0.0, y_max_ = 1.0;
};

}  // namespace topicshift
