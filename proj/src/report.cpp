#include "ocpdl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace ocpdl {

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
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

double chart_value(const TraceRecord& rec) {
  return rec.rel_err.has_value() ? *rec.rel_err : rec.surrogate;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::string trace_csv(const std::vector<RunCurve>& curves) {
  std::string out = "method,trial,iter,wall_seconds,abs_error,rel_error\n";
  for (const RunCurve& curve : curves) {
    double elapsed = 0.0;
    for (const TraceRecord& rec : curve.trace) {
      elapsed += rec.wall_seconds;
      out += curve.method;
      out += ',';
      out += std::to_string(curve.trial);
      out += ',';
      out += std::to_string(rec.t);
      out += ',';
      out += fmt(elapsed);
      out += ',';
      if (rec.abs_err) out += fmt(*rec.abs_err);
      out += ',';
      if (rec.rel_err) out += fmt(*rec.rel_err);
      out += '\n';
    }
  }
  return out;
}

void write_trace_csv(const std::vector<RunCurve>& curves, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write trace table " + path.string());
  out << trace_csv(curves);
  if (!out) throw IoError("short write to trace table " + path.string());
}

std::string error_chart_svg(const std::vector<RunCurve>& curves) {
  constexpr double kWidth = 800, kHeight = 500;
  constexpr double kLeft = 70, kRight = 780, kTop = 30, kBottom = 440;

  // Data ranges.
  double x_min = 1, x_max = 1, y_max = 0;
  bool any = false;
  for (const RunCurve& curve : curves) {
    for (const TraceRecord& rec : curve.trace) {
      const double x = static_cast<double>(rec.t);
      const double y = chart_value(rec);
      if (!any) {
        x_min = x_max = x;
        any = true;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_max = std::max(y_max, y);
    }
  }
  if (x_max <= x_min) x_max = x_min + 1;
  if (y_max <= 0) y_max = 1;

  const auto sx = [&](double x) {
    return kLeft + (x - x_min) / (x_max - x_min) * (kRight - kLeft);
  };
  const auto sy = [&](double y) { return kBottom - y / y_max * (kBottom - kTop); };
  const auto pt = [&](double x, double y) {
    return fmt(sx(x), "%.2f") + "," + fmt(sy(std::clamp(y, 0.0, y_max)), "%.2f");
  };

  // Stable method order: first appearance.
  std::vector<std::string> methods;
  for (const RunCurve& curve : curves) {
    if (std::find(methods.begin(), methods.end(), curve.method) == methods.end()) {
      methods.push_back(curve.method);
    }
  }
  const auto color_of = [&methods](const std::string& method) {
    const auto it = std::find(methods.begin(), methods.end(), method);
    const std::size_t idx = static_cast<std::size_t>(it - methods.begin());
    return kPalette[idx % (sizeof(kPalette) / sizeof(kPalette[0]))];
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";

  // Mean and deviation bands first so curves draw on top of them.
  for (const std::string& method : methods) {
    // Collect per-iteration-index samples across this method's trials.
    std::size_t longest = 0;
    std::vector<const RunCurve*> mine;
    for (const RunCurve& curve : curves) {
      if (curve.method != method) continue;
      mine.push_back(&curve);
      longest = std::max(longest, curve.trace.size());
    }
    std::vector<double> xs, mean, sdev;
    for (std::size_t i = 0; i < longest; ++i) {
      double sum = 0, sum_sq = 0, count = 0, x = 0;
      for (const RunCurve* curve : mine) {
        if (i >= curve->trace.size()) continue;
        const double y = chart_value(curve->trace[i]);
        sum += y;
        sum_sq += y * y;
        count += 1;
        x = static_cast<double>(curve->trace[i].t);
      }
      if (count == 0) continue;
      const double m = sum / count;
      xs.push_back(x);
      mean.push_back(m);
      sdev.push_back(std::sqrt(std::max(0.0, sum_sq / count - m * m)));
    }
    if (xs.empty()) continue;

    std::string band = "<polygon fill=\"" + std::string(color_of(method)) +
                       "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) band += pt(xs[i], mean[i] + sdev[i]) + " ";
    for (std::size_t i = xs.size(); i-- > 0;) band += pt(xs[i], mean[i] - sdev[i]) + " ";
    band += "\"/>\n";
    svg << band;

    std::string path = "<path fill=\"none\" stroke=\"" + std::string(color_of(method)) +
                       "\" stroke-width=\"2.5\" d=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      path += (i == 0 ? "M" : " L") + pt(xs[i], mean[i]);
    }
    path += "\"/>\n";
    svg << path;
  }

  // One faint polyline per trial; their combined point count equals the
  // number of data rows in the matching CSV.
  for (const RunCurve& curve : curves) {
    svg << "<polyline fill=\"none\" stroke=\"" << color_of(curve.method)
        << "\" stroke-opacity=\"0.35\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < curve.trace.size(); ++i) {
      if (i > 0) svg << " ";
      svg << pt(static_cast<double>(curve.trace[i].t), chart_value(curve.trace[i]));
    }
    svg << "\"/>\n";
  }

  // Axes with five ticks each.
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight
      << "\" y2=\"" << kBottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x_min + (x_max - x_min) * i / 4.0;
    const double fy = y_max * i / 4.0;
    svg << "<text x=\"" << fmt(sx(fx), "%.2f") << "\" y=\"" << kBottom + 20
        << "\" text-anchor=\"middle\">" << fmt(fx, "%.4g") << "</text>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt(sy(fy) + 4, "%.2f")
        << "\" text-anchor=\"end\">" << fmt(fy, "%.3g") << "</text>\n";
  }
  svg << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kBottom + 45
      << "\" text-anchor=\"middle\">iteration</text>\n";
  svg << "<text x=\"18\" y=\"" << (kTop + kBottom) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (kTop + kBottom) / 2 << ")\">reconstruction error</text>\n";

  // Legend.
  double ly = kTop + 10;
  for (const std::string& method : methods) {
    svg << "<line x1=\"" << kRight - 150 << "\" y1=\"" << ly << "\" x2=\"" << kRight - 120
        << "\" y2=\"" << ly << "\" stroke=\"" << color_of(method)
        << "\" stroke-width=\"2.5\"/>\n";
    svg << "<text x=\"" << kRight - 112 << "\" y=\"" << ly + 4 << "\">"
        << xml_escape(method) << "</text>\n";
    ly += 20;
  }

  svg << "</svg>\n";
  return svg.str();
}

void write_error_chart(const std::vector<RunCurve>& curves,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write chart " + path.string());
  out << error_chart_svg(curves);
  if (!out) throw IoError("short write to chart " + path.string());
}

}  // namespace ocpdl
