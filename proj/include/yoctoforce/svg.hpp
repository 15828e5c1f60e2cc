#pragma once

// Minimal self-contained SVG plotting: line/point series with optional
// error bars on linear or log axes, plus ellipses and cross markers for
// phase-space views. Output is a pure function of the inputs (no
// timestamps), so plots rerun with the same seed are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace yf::io {

struct SvgSeries {
  std::vector<double> x, y;
  std::vector<double> yerr;  // optional, one-sigma; empty for none
  std::string color = "#1f77b4";
  std::string label;
  bool line = true;
  bool points = false;
  bool dashed = false;
};

struct SvgEllipseShape {
  double cx = 0, cy = 0, rx = 0, ry = 0, angle_rad = 0;
  std::string color = "#d62728";
  std::string label;
};

struct SvgCross {
  double x = 0, y = 0;
  std::string color = "#000000";
};

struct SvgPlot {
  int width = 760, height = 500;
  std::string title, xlabel, ylabel;
  bool logx = false, logy = false;
  bool equal_axes = false;  // same data-to-pixel scale on both axes
  std::vector<SvgSeries> series;
  std::vector<SvgEllipseShape> ellipses;
  std::vector<SvgCross> crosses;

  std::string render() const;
};

namespace detail_svg {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string px(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '&') o += "&amp;";
    else if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else o += c;
  }
  return o;
}

// Round a span/5 to a "nice" tick step (1, 2, or 5 times a power of ten).
inline double nice_step(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  if (frac <= 1.5) return mag;
  if (frac <= 3.5) return 2.0 * mag;
  if (frac <= 7.5) return 5.0 * mag;
  return 10.0 * mag;
}

} // namespace detail_svg

inline std::string SvgPlot::render() const {
  using namespace detail_svg;
  const double ml = 72, mr = 20, mt = 40, mb = 56;
  const double pw = width - ml - mr, ph = height - mt - mb;

  // Transformed data ranges.
  auto tx = [&](double v) { return logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return logy ? std::log10(v) : v; };
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool any = false;
  auto grow = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    if (!any) {
      xmin = xmax = x;
      ymin = ymax = y;
      any = true;
    } else {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((logx && s.x[i] <= 0) || (logy && s.y[i] <= 0)) continue;
      grow(tx(s.x[i]), ty(s.y[i]));
      if (i < s.yerr.size() && std::isfinite(s.yerr[i])) {
        const double lo = s.y[i] - s.yerr[i], hi = s.y[i] + s.yerr[i];
        if (!logy || lo > 0) grow(tx(s.x[i]), ty(logy ? std::max(lo, s.y[i] * 1e-3) : lo));
        grow(tx(s.x[i]), ty(hi));
      }
    }
  for (const auto& e : ellipses) {
    const double r = std::max(std::abs(e.rx), std::abs(e.ry));
    grow(tx(e.cx - r), ty(e.cy - r));
    grow(tx(e.cx + r), ty(e.cy + r));
  }
  for (const auto& c : crosses) grow(tx(c.x), ty(c.y));
  if (!any) {
    xmin = ymin = -1;
    xmax = ymax = 1;
  }
  if (xmax - xmin <= 0) {
    xmin -= 1;
    xmax += 1;
  }
  if (ymax - ymin <= 0) {
    ymin -= 1;
    ymax += 1;
  }
  {
    const double padx = 0.05 * (xmax - xmin), pady = 0.05 * (ymax - ymin);
    xmin -= padx;
    xmax += padx;
    ymin -= pady;
    ymax += pady;
  }
  if (equal_axes) {
    const double sx = pw / (xmax - xmin), sy = ph / (ymax - ymin);
    if (sx < sy) {  // y range too tight: widen it
      const double c = 0.5 * (ymin + ymax), half = 0.5 * ph / sx;
      ymin = c - half;
      ymax = c + half;
    } else {
      const double c = 0.5 * (xmin + xmax), half = 0.5 * pw / sy;
      xmin = c - half;
      xmax = c + half;
    }
  }

  auto X = [&](double v) { return ml + (tx(v) - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double v) { return mt + (ymax - ty(v)) / (ymax - ymin) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
       std::to_string(width) + "\" height=\"" + std::to_string(height) +
       "\" viewBox=\"0 0 " + std::to_string(width) + " " +
       std::to_string(height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + px(width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"15\">" + escape(title) + "</text>\n";

  // Ticks and grid.
  auto emit_ticks = [&](bool xaxis) {
    const bool lg = xaxis ? logx : logy;
    const double lo = xaxis ? xmin : ymin, hi = xaxis ? xmax : ymax;
    std::vector<double> ticks;  // transformed positions
    if (lg) {
      const int a = static_cast<int>(std::ceil(lo - 1e-9));
      const int b = static_cast<int>(std::floor(hi + 1e-9));
      int step = 1 + std::max(0, (b - a) / 8);
      for (int k = a; k <= b; k += step) ticks.push_back(k);
    } else {
      const double st = nice_step(hi - lo);
      for (double v = std::ceil(lo / st) * st; v <= hi + 1e-9 * st; v += st)
        ticks.push_back(v);
    }
    for (double t : ticks) {
      if (xaxis) {
        const double x = ml + (t - lo) / (hi - lo) * pw;
        s += "<line x1=\"" + px(x) + "\" y1=\"" + px(mt) + "\" x2=\"" + px(x) +
             "\" y2=\"" + px(mt + ph) + "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
        const std::string lbl = lg ? "1e" + num(t) : num(std::abs(t) < 1e-12 ? 0.0 : t);
        s += "<text x=\"" + px(x) + "\" y=\"" + px(mt + ph + 18) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
             lbl + "</text>\n";
      } else {
        const double y = mt + (hi - t) / (hi - lo) * ph;
        s += "<line x1=\"" + px(ml) + "\" y1=\"" + px(y) + "\" x2=\"" +
             px(ml + pw) + "\" y2=\"" + px(y) +
             "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
        const std::string lbl = lg ? "1e" + num(t) : num(std::abs(t) < 1e-12 ? 0.0 : t);
        s += "<text x=\"" + px(ml - 6) + "\" y=\"" + px(y + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
             lbl + "</text>\n";
      }
    }
  };
  emit_ticks(true);
  emit_ticks(false);

  s += "<rect x=\"" + px(ml) + "\" y=\"" + px(mt) + "\" width=\"" + px(pw) +
       "\" height=\"" + px(ph) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
  s += "<text x=\"" + px(ml + pw / 2.0) + "\" y=\"" + px(height - 12.0) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
       escape(xlabel) + "</text>\n";
  s += "<text x=\"18\" y=\"" + px(mt + ph / 2.0) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
       "transform=\"rotate(-90 18 " + px(mt + ph / 2.0) + ")\">" +
       escape(ylabel) + "</text>\n";

  s += "<clipPath id=\"plotarea\"><rect x=\"" + px(ml) + "\" y=\"" + px(mt) +
       "\" width=\"" + px(pw) + "\" height=\"" + px(ph) + "\"/></clipPath>\n";
  s += "<g clip-path=\"url(#plotarea)\">\n";

  for (const auto& se : series) {
    // Error bars first so lines/markers draw over them.
    for (std::size_t i = 0; i < se.x.size() && i < se.yerr.size(); ++i) {
      if (!(se.yerr[i] > 0)) continue;
      double lo = se.y[i] - se.yerr[i], hi = se.y[i] + se.yerr[i];
      if (logy && lo <= 0) lo = se.y[i] * 1e-3;
      if ((logx && se.x[i] <= 0) || (logy && se.y[i] <= 0)) continue;
      const double x = X(se.x[i]);
      s += "<line x1=\"" + px(x) + "\" y1=\"" + px(Y(lo)) + "\" x2=\"" + px(x) +
           "\" y2=\"" + px(Y(hi)) + "\" stroke=\"" + se.color +
           "\" stroke-width=\"1\"/>\n";
      s += "<line x1=\"" + px(x - 3) + "\" y1=\"" + px(Y(lo)) + "\" x2=\"" +
           px(x + 3) + "\" y2=\"" + px(Y(lo)) + "\" stroke=\"" + se.color +
           "\" stroke-width=\"1\"/>\n";
      s += "<line x1=\"" + px(x - 3) + "\" y1=\"" + px(Y(hi)) + "\" x2=\"" +
           px(x + 3) + "\" y2=\"" + px(Y(hi)) + "\" stroke=\"" + se.color +
           "\" stroke-width=\"1\"/>\n";
    }
    if (se.line && se.x.size() >= 2) {
      std::string pts;
      for (std::size_t i = 0; i < se.x.size(); ++i) {
        if ((logx && se.x[i] <= 0) || (logy && se.y[i] <= 0)) continue;
        if (!std::isfinite(se.x[i]) || !std::isfinite(se.y[i])) continue;
        pts += px(X(se.x[i])) + "," + px(Y(se.y[i])) + " ";
      }
      s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
           se.color + "\" stroke-width=\"1.6\"" +
           (se.dashed ? " stroke-dasharray=\"6 4\"" : "") + "/>\n";
    }
    if (se.points) {
      for (std::size_t i = 0; i < se.x.size(); ++i) {
        if ((logx && se.x[i] <= 0) || (logy && se.y[i] <= 0)) continue;
        if (!std::isfinite(se.x[i]) || !std::isfinite(se.y[i])) continue;
        s += "<circle cx=\"" + px(X(se.x[i])) + "\" cy=\"" + px(Y(se.y[i])) +
             "\" r=\"3\" fill=\"" + se.color + "\"/>\n";
      }
    }
  }

  for (const auto& e : ellipses) {
    // With equal_axes the data-to-pixel scale is isotropic, so a rotated
    // data-space ellipse stays an ellipse in pixel space.
    const double sx = pw / (xmax - xmin);
    s += "<ellipse cx=\"0\" cy=\"0\" rx=\"" + px(e.rx * sx) + "\" ry=\"" +
         px(e.ry * sx) + "\" fill=\"none\" stroke=\"" + e.color +
         "\" stroke-width=\"1.6\" transform=\"translate(" + px(X(e.cx)) + " " +
         px(Y(e.cy)) + ") rotate(" + px(-e.angle_rad * 180.0 / 3.14159265358979) +
         ")\"/>\n";
  }
  for (const auto& c : crosses) {
    const double x = X(c.x), y = Y(c.y);
    s += "<line x1=\"" + px(x - 6) + "\" y1=\"" + px(y) + "\" x2=\"" +
         px(x + 6) + "\" y2=\"" + px(y) + "\" stroke=\"" + c.color +
         "\" stroke-width=\"1.6\"/>\n";
    s += "<line x1=\"" + px(x) + "\" y1=\"" + px(y - 6) + "\" x2=\"" + px(x) +
         "\" y2=\"" + px(y + 6) + "\" stroke=\"" + c.color +
         "\" stroke-width=\"1.6\"/>\n";
  }
  s += "</g>\n";

  // Legend for labeled series and ellipses.
  double ly = mt + 14;
  for (const auto& se : series) {
    if (se.label.empty()) continue;
    const double lx = ml + pw - 170;
    s += "<line x1=\"" + px(lx) + "\" y1=\"" + px(ly - 4) + "\" x2=\"" +
         px(lx + 22) + "\" y2=\"" + px(ly - 4) + "\" stroke=\"" + se.color +
         "\" stroke-width=\"2\"" + (se.dashed ? " stroke-dasharray=\"6 4\"" : "") +
         "/>\n";
    s += "<text x=\"" + px(lx + 28) + "\" y=\"" + px(ly) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(se.label) +
         "</text>\n";
    ly += 16;
  }
  for (const auto& e : ellipses) {
    if (e.label.empty()) continue;
    const double lx = ml + pw - 170;
    s += "<line x1=\"" + px(lx) + "\" y1=\"" + px(ly - 4) + "\" x2=\"" +
         px(lx + 22) + "\" y2=\"" + px(ly - 4) + "\" stroke=\"" + e.color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + px(lx + 28) + "\" y=\"" + px(ly) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(e.label) +
         "</text>\n";
    ly += 16;
  }

  s += "</svg>\n";
  return s;
}

} // namespace yf::io
