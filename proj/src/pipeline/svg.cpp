#include "bexrl/pipeline/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "bexrl/metrics/report.hpp"

namespace bexrl::pipeline {

namespace {

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  const double r = std::round(v * 100.0) / 100.0;
  return metrics::format_number(r == 0.0 ? 0.0 : r);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series) {
  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.xs.size() && i < s.ys.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      if (first) {
        x_min = x_max = s.xs[i];
        y_min = y_max = s.ys[i];
        first = false;
      }
      x_min = std::min(x_min, s.xs[i]);
      x_max = std::max(x_max, s.xs[i]);
      y_min = std::min(y_min, s.ys[i]);
      y_max = std::max(y_max, s.ys[i]);
    }
  }
  if (x_max == x_min) { x_min -= 0.5; x_max += 0.5; }
  if (y_max == y_min) { y_min -= 0.5; y_max += 0.5; }
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
     << kW << ' ' << kH << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">" << escape(title)
     << "</text>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 4.0;
    const double yv = y_min + (y_max - y_min) * i / 4.0;
    os << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << kTop + ph + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
       << fmt(yv) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\" font-size=\"13\">"
     << escape(x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
     << kTop + ph / 2 << ")\">" << escape(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPalette.size()];
    std::string points;
    for (std::size_t i = 0; i < series[s].xs.size() && i < series[s].ys.size(); ++i) {
      if (!std::isfinite(series[s].ys[i])) continue;
      if (!points.empty()) points += ' ';
      points += fmt(px(series[s].xs[i])) + "," + fmt(py(series[s].ys[i]));
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << points << "\"/>\n";
    for (std::size_t i = 0; i < series[s].xs.size() && i < series[s].ys.size(); ++i) {
      if (!std::isfinite(series[s].ys[i])) continue;
      os << "<circle cx=\"" << fmt(px(series[s].xs[i])) << "\" cy=\"" << fmt(py(series[s].ys[i]))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 10 + 20.0 * static_cast<double>(s);
    os << "<line x1=\"" << kLeft + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 35 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kLeft + pw + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << escape(series[s].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string label_strips(const seg::EpisodeLabels& labels, const std::string& title) {
  constexpr int kCell = 4, kRow = 10, kGap = 2, kLeft = 60, kTop = 30;
  std::size_t longest = 1;
  for (const auto& ep : labels) longest = std::max(longest, ep.size());
  const std::size_t width = kLeft + longest * kCell + 20;
  const std::size_t height = kTop + labels.size() * (kRow + kGap) + 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<text x=\"" << kLeft << "\" y=\"18\" font-size=\"14\">" << escape(title) << "</text>\n";
  os << "<g>\n";
  for (std::size_t e = 0; e < labels.size(); ++e) {
    const std::size_t y = kTop + e * (kRow + kGap);
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + kRow - 1 << "\" text-anchor=\"end\" font-size=\"9\">ep "
       << e << "</text>\n";
    for (std::size_t t = 0; t < labels[e].size(); ++t) {
      const int l = labels[e][t];
      const char* color = l < 0 ? "#000000" : kPalette[static_cast<std::size_t>(l) % kPalette.size()];
      os << "<rect x=\"" << kLeft + t * kCell << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\"" << kRow
         << "\" fill=\"" << color << "\"/>\n";
    }
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace bexrl::pipeline
