#include "contesta/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

namespace contesta::plots {

namespace {

struct Frame {
  double left, top, width, height;
};

struct Scale {
  double lo, hi, out_lo, out_hi;

  double operator()(double v) const {
    if (hi <= lo) return (out_lo + out_hi) / 2;
    return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
  }
};

// Widens a degenerate or tight range so that points do not sit on the frame.
std::pair<double, double> padded(double lo, double hi, double frac = 0.05) {
  if (!(hi > lo)) {
    const double d = std::abs(lo) > 0 ? std::abs(lo) * 0.1 : 1.0;
    return {lo - d, hi + d};
  }
  const double pad = (hi - lo) * frac;
  return {lo - pad, hi + pad};
}

std::string num(double v) { return fmt::format("{:.2f}", v); }

std::string tick_label(double v) {
  const double a = std::abs(v);
  if (a != 0 && (a >= 1e4 || a < 1e-2)) return fmt::format("{:.2e}", v);
  if (a >= 100) return fmt::format("{:.0f}", v);
  if (a >= 10) return fmt::format("{:.1f}", v);
  return fmt::format("{:.3g}", v);
}

std::string escape(std::string_view s) {
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

std::string header(double w, double h) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      num(w), num(h));
}

std::string text(double x, double y, std::string_view s, std::string_view anchor = "middle",
                 std::string_view extra = "") {
  return fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"{}\"{}>{}</text>\n", num(x), num(y), anchor,
                     extra, escape(s));
}

std::string line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1,
                 std::string_view extra = "") {
  return fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n",
                     num(x1), num(y1), num(x2), num(y2), stroke, num(width), extra);
}

// Frame with four ticks per axis and axis titles.
std::string axes(const Frame& f, const Scale& x, const Scale& y, std::string_view xlabel,
                 std::string_view ylabel) {
  std::string s = fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
                              num(f.left), num(f.top), num(f.width), num(f.height));
  for (int i = 0; i <= 4; ++i) {
    const double xv = x.lo + (x.hi - x.lo) * i / 4.0;
    const double px = x(xv);
    s += line(px, f.top + f.height, px, f.top + f.height + 4, "#333");
    s += text(px, f.top + f.height + 16, tick_label(xv));
    const double yv = y.lo + (y.hi - y.lo) * i / 4.0;
    const double py = y(yv);
    s += line(f.left - 4, py, f.left, py, "#333");
    s += text(f.left - 6, py + 4, tick_label(yv), "end");
  }
  s += text(f.left + f.width / 2, f.top + f.height + 34, xlabel);
  s += fmt::format("<text x=\"{0}\" y=\"{1}\" text-anchor=\"middle\" transform=\"rotate(-90 {0} {1})\">{2}</text>\n",
                   num(f.left - 44), num(f.top + f.height / 2), escape(ylabel));
  return s;
}

}  // namespace

std::string risk_color(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops = {{
      {255, 255, 229}, {254, 227, 145}, {254, 153, 41}, {204, 76, 2}, {102, 37, 6},
  }};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double pos = t * (stops.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), stops.size() - 2);
  const double u = pos - static_cast<double>(i);
  std::array<int, 3> c{};
  for (int k = 0; k < 3; ++k) c[k] = static_cast<int>(std::lround(stops[i][k] + u * (stops[i + 1][k] - stops[i][k])));
  return fmt::format("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]);
}

std::string importance_svg(const ImportanceReport& report) {
  std::vector<FeatureImportance> rows;
  for (auto f : report.ranking())
    for (const auto& fi : report.features)
      if (fi.feature == f) rows.push_back(fi);

  const double bar_h = 18, gap = 6;
  const Frame fr{90, 30, 360, rows.size() * (bar_h + gap) + gap};
  double lo = 0, hi = 0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.importance);
    hi = std::max(hi, r.importance);
  }
  if (hi <= lo) hi = lo + 1e-3;
  const auto [plo, phi] = padded(lo, hi, 0.02);
  const Scale x{lo < 0 ? plo : 0.0, phi, fr.left, fr.left + fr.width};

  std::string s = header(fr.left + fr.width + 30, fr.top + fr.height + 50);
  s += text(fr.left + fr.width / 2, 18, fmt::format("Permutation importance (loss {}, B = {})", report.loss, report.permutations));
  double y = fr.top + gap;
  for (const auto& r : rows) {
    const double x0 = x(0.0), x1 = x(r.importance);
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#4c72b0\"/>\n", num(std::min(x0, x1)),
                     num(y), num(std::abs(x1 - x0)), num(bar_h));
    s += text(fr.left - 6, y + bar_h / 2 + 4, feature_name(r.feature), "end");
    y += bar_h + gap;
  }
  s += line(x(0.0), fr.top, x(0.0), fr.top + fr.height, "#333");
  for (int i = 0; i <= 4; ++i) {
    const double v = x.lo + (x.hi - x.lo) * i / 4.0;
    s += line(x(v), fr.top + fr.height, x(v), fr.top + fr.height + 4, "#333");
    s += text(x(v), fr.top + fr.height + 16, tick_label(v));
  }
  s += text(fr.left + fr.width / 2, fr.top + fr.height + 34, "mean increase in 1 - AUC");
  s += "</svg>\n";
  return s;
}

std::string pdp_svg(const PdpCurve& curve) {
  const Frame fr{70, 30, 400, 240};
  double xlo = curve.grid.empty() ? 0 : curve.grid.front(), xhi = curve.grid.empty() ? 1 : curve.grid.back();
  for (double v : curve.rug) {
    xlo = std::min(xlo, v);
    xhi = std::max(xhi, v);
  }
  double ylo = 1, yhi = 0;
  for (double v : curve.pd) {
    ylo = std::min(ylo, v);
    yhi = std::max(yhi, v);
  }
  if (curve.pd.empty()) ylo = 0, yhi = 1;
  const auto [px0, px1] = padded(xlo, xhi, 0.0);
  const auto [py0, py1] = padded(ylo, yhi);
  const Scale x{px0, px1, fr.left, fr.left + fr.width};
  const Scale y{py0, py1, fr.top + fr.height, fr.top};

  std::string s = header(fr.left + fr.width + 20, fr.top + fr.height + 50);
  s += text(fr.left + fr.width / 2, 18, fmt::format("Partial dependence: {}", feature_name(curve.feature)));
  s += axes(fr, x, y, feature_name(curve.feature), "predicted LosNec risk");
  std::string pts;
  for (std::size_t i = 0; i < curve.grid.size() && i < curve.pd.size(); ++i)
    pts += fmt::format("{}{},{}", i ? " " : "", num(x(curve.grid[i])), num(y(curve.pd[i])));
  s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n", pts);
  for (double v : curve.rug) s += line(x(v), fr.top + fr.height - 8, x(v), fr.top + fr.height, "#333", 1, " stroke-opacity=\"0.6\"");
  s += "</svg>\n";
  return s;
}

std::string pdp_surface_svg(const PdpSurface& surface) {
  const Frame fr{70, 30, 380, 300};
  const auto& sg = surface.static_grid;
  const auto& dg = surface.dynamic_grid;
  std::string s = header(fr.left + fr.width + 90, fr.top + fr.height + 50);
  s += text(fr.left + fr.width / 2, 18,
            fmt::format("Partial dependence: {} x {}", feature_name(surface.static_feature),
                        feature_name(surface.dynamic_feature)));
  if (sg.empty() || dg.empty()) return s + "</svg>\n";

  double lo = 1, hi = 0;
  for (const auto& row : surface.pd)
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) hi = lo + 1e-9;
  const double cw = fr.width / static_cast<double>(sg.size());
  const double ch = fr.height / static_cast<double>(dg.size());
  for (std::size_t i = 0; i < sg.size(); ++i)
    for (std::size_t j = 0; j < dg.size(); ++j)
      s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", num(fr.left + i * cw),
                       num(fr.top + fr.height - (j + 1) * ch), num(cw + 0.5), num(ch + 0.5),
                       risk_color((surface.pd[i][j] - lo) / (hi - lo)));
  const Scale xt{sg.front(), sg.back(), fr.left + cw / 2, fr.left + fr.width - cw / 2};
  const Scale yt{dg.front(), dg.back(), fr.top + fr.height - ch / 2, fr.top + ch / 2};
  s += axes(fr, xt, yt, feature_name(surface.static_feature), feature_name(surface.dynamic_feature));

  // Color bar: the sidebar corresponds to the predicted morbidity risk.
  const double bx = fr.left + fr.width + 20, bw = 16;
  constexpr int steps = 50;
  for (int k = 0; k < steps; ++k) {
    const double t = (k + 0.5) / steps;
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", num(bx),
                     num(fr.top + fr.height * (1 - (k + 1.0) / steps)), num(bw), num(fr.height / steps + 0.5),
                     risk_color(t));
  }
  s += text(bx + bw + 4, fr.top + 8, tick_label(hi), "start");
  s += text(bx + bw + 4, fr.top + fr.height, tick_label(lo), "start");
  s += fmt::format("<text x=\"{0}\" y=\"{1}\" text-anchor=\"middle\" transform=\"rotate(90 {0} {1})\">risk</text>\n",
                   num(bx + bw + 40), num(fr.top + fr.height / 2));
  s += "</svg>\n";
  return s;
}

std::string contest_svg(const ContestReport& report) {
  const double pw = 300, ph = 240, left = 70, top = 50, gap = 80;
  const std::size_t n = std::max<std::size_t>(report.panels.size(), 1);
  std::string s = header(left + n * (pw + gap), top + ph + 80);
  s += text((left + n * (pw + gap)) / 2, 18,
            fmt::format("{}: model predicts {}, verdict {}", report.query_id, label_name(report.prediction),
                        verdict_name(report.verdict)));

  for (std::size_t p = 0; p < report.panels.size(); ++p) {
    const auto& panel = report.panels[p];
    const Frame fr{left + p * (pw + gap), top, pw, ph};
    double dmax = 0, vlo = panel.query_value, vhi = panel.query_value;
    for (const auto& pt : panel.points) {
      dmax = std::max(dmax, pt.distance);
      vlo = std::min(vlo, pt.value);
      vhi = std::max(vhi, pt.value);
    }
    if (panel.boundary.boundary) {
      vlo = std::min(vlo, *panel.boundary.boundary);
      vhi = std::max(vhi, *panel.boundary.boundary);
    }
    const auto [dx0, dx1] = padded(0.0, dmax > 0 ? dmax : 1.0);
    const auto [vy0, vy1] = padded(vlo, vhi, 0.1);
    const Scale x{dx0, dx1, fr.left, fr.left + fr.width};
    const Scale y{vy0, vy1, fr.top + fr.height, fr.top};
    s += axes(fr, x, y, "latent-space distance", feature_name(panel.feature));
    s += text(fr.left + fr.width / 2, fr.top - 8,
              fmt::format("{} ({})", feature_name(panel.feature),
                          panel.conclusive() ? "conclusive" : "inconclusive"));
    if (panel.boundary.boundary) {
      const double by = y(*panel.boundary.boundary);
      s += line(fr.left, by, fr.left + fr.width, by, kBoundaryColor, 1.5, " stroke-dasharray=\"5 3\"");
    }
    for (const auto& pt : panel.points) {
      const char* color = pt.label == Label::LosNec ? kLosNecColor : kHealthyColor;
      s += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"{}\"><title>{}</title></circle>\n",
                       num(x(pt.distance)), num(y(pt.value)), color, escape(pt.record_id));
    }
    s += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"6\" fill=\"{}\" stroke=\"black\"><title>{}</title></circle>\n",
                     num(x(0.0)), num(y(panel.query_value)), kQueryColor, escape(report.query_id));
  }

  // Legend.
  const double ly = top + ph + 56;
  const std::array<std::pair<const char*, const char*>, 4> items = {{
      {kQueryColor, "case in question"}, {kLosNecColor, "LosNec"}, {kHealthyColor, "Healthy"}, {kBoundaryColor, "boundary"},
  }};
  double lx = left;
  for (const auto& [color, label] : items) {
    if (std::string_view(label) == "boundary")
      s += line(lx, ly - 4, lx + 14, ly - 4, color, 1.5, " stroke-dasharray=\"5 3\"");
    else
      s += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"{}\"/>\n", num(lx + 7), num(ly - 4), color);
    s += text(lx + 20, ly, label, "start");
    lx += 130;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace contesta::plots
