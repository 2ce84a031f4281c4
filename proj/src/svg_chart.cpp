#include "mispred/svg_chart.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <set>

#include "mispred/errors.hpp"

namespace mispred {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 200.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

std::string num(double v) {
  std::string s = fmt::format("{:.2f}", v);
  return s == "-0.00" ? "0.00" : s;
}

std::string tick_label(double v) {
  if (std::abs(v) >= 1e4 && std::abs(v - std::round(v)) < 1e-9) return fmt::format("{:.0e}", v);
  return fmt::format("{:g}", v);
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nice = f <= 1.0 ? 1.0 : f <= 2.0 ? 2.0 : f <= 5.0 ? 5.0 : 10.0;
  return nice * mag;
}

}  // namespace

std::string render_svg(const LineChart& chart) {
  auto tx = [&](double x) { return chart.log_x ? std::log10(x) : x; };

  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  std::set<double> x_ticks;
  for (const auto& s : chart.series) {
    if (s.y.size() != s.x.size()) throw InvalidArgument("render_svg: series x/y length mismatch");
    const bool band = !s.lo.empty();
    if (band && (s.lo.size() != s.x.size() || s.hi.size() != s.x.size())) {
      throw InvalidArgument("render_svg: band length mismatch");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (chart.log_x && !(s.x[i] > 0.0)) throw InvalidArgument("render_svg: log axis needs positive x");
      x_lo = std::min(x_lo, tx(s.x[i]));
      x_hi = std::max(x_hi, tx(s.x[i]));
      x_ticks.insert(s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
      if (band) {
        y_lo = std::min(y_lo, s.lo[i]);
        y_hi = std::max(y_hi, s.hi[i]);
      }
    }
  }
  if (chart.reference) {
    y_lo = std::min(y_lo, *chart.reference);
    y_hi = std::max(y_hi, *chart.reference);
  }
  if (!std::isfinite(x_lo)) {
    x_lo = 0.0;
    x_hi = 1.0;
  }
  if (!std::isfinite(y_lo)) {
    y_lo = 0.0;
    y_hi = 1.0;
  }
  const double x_pad = x_hi > x_lo ? 0.05 * (x_hi - x_lo) : 0.5;
  x_lo -= x_pad;
  x_hi += x_pad;
  const double y_pad = y_hi > y_lo ? 0.08 * (y_hi - y_lo) : 0.05;
  y_lo -= y_pad;
  y_hi += y_pad;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (tx(x) - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::string out;
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight);
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", kWidth, kHeight);
  out += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     num(kLeft + pw / 2), escape(chart.title));

  // Grid and ticks.
  const double ys = nice_step(y_hi - y_lo, 6);
  for (double v = std::ceil(y_lo / ys) * ys; v <= y_hi + 1e-12; v += ys) {
    const double yy = py(v);
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#e0e0e0\"/>\n", num(kLeft), num(yy),
                       num(kLeft + pw), num(yy));
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(kLeft - 6), num(yy + 4),
                       tick_label(std::abs(v) < ys * 1e-9 ? 0.0 : v));
  }
  for (double v : x_ticks) {
    const double xx = px(v);
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#e0e0e0\"/>\n", num(xx), num(kTop),
                       num(xx), num(kTop + ph));
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(xx), num(kTop + ph + 18),
                       tick_label(v));
  }
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#000000\"/>\n",
                     num(kLeft), num(kTop), num(pw), num(ph));
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(kLeft + pw / 2),
                     num(kHeight - 18), escape(chart.x_label + (chart.log_x ? " (log scale)" : "")));
  out += fmt::format("<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">{1}</text>\n",
                     num(kTop + ph / 2), escape(chart.y_label));

  // Series: band first so lines stay on top.
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (!s.lo.empty() && !s.x.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) pts += fmt::format("{},{} ", num(px(s.x[i])), num(py(s.hi[i])));
      for (std::size_t i = s.x.size(); i-- > 0;) pts += fmt::format("{},{} ", num(px(s.x[i])), num(py(s.lo[i])));
      pts.pop_back();
      out += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n", pts, color);
    }
    if (s.x.size() > 1) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) pts += fmt::format("{},{} ", num(px(s.x[i])), num(py(s.y[i])));
      pts.pop_back();
      out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", pts, color);
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>\n", num(px(s.x[i])), num(py(s.y[i])), color);
    }
  }
  if (chart.reference) {
    const double yy = py(*chart.reference);
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n",
                       num(kLeft), num(yy), num(kLeft + pw), num(yy));
  }

  // Legend.
  double ly = kTop + 10;
  const double lx = kLeft + pw + 16;
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n", num(lx),
                       num(ly), num(lx + 22), num(ly), color);
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(lx + 28), num(ly + 4),
                       escape(chart.series[k].label));
    ly += 20;
  }
  if (chart.reference) {
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n",
                       num(lx), num(ly), num(lx + 22), num(ly));
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(lx + 28), num(ly + 4), escape(chart.reference_label));
  }
  out += "</svg>\n";
  return out;
}

}  // namespace mispred
