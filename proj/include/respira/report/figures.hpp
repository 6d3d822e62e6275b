#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "respira/eval/metrics.hpp"
#include "respira/report/svg.hpp"
#include "respira/train/manifest.hpp"

namespace respira::report {

// ---------------------------------------------------------------------------
// Heatmap cell grid with per-row run merging (adjacent same-color cells emit
// one rect), drawn with row 0 at the top.
// ---------------------------------------------------------------------------
inline void draw_heatmap_cells(SvgBuilder& svg, const std::vector<float>& values, int rows,
                               int cols, double x0, double y0, double w, double h,
                               const std::function<Rgb(double)>& colormap, double lo, double hi,
                               double opacity = 1.0, bool flip_rows = true) {
  const double cw = w / cols, ch = h / rows;
  const double span = hi > lo ? hi - lo : 1.0;
  for (int r = 0; r < rows; ++r) {
    int draw_r = flip_rows ? rows - 1 - r : r;  // row 0 at the bottom by default
    int run_start = 0;
    std::string run_color =
        colormap((values[static_cast<size_t>(r) * cols] - lo) / span).hex();
    for (int c = 1; c <= cols; ++c) {
      std::string color =
          c < cols ? colormap((values[static_cast<size_t>(r) * cols + static_cast<size_t>(c)] - lo) / span).hex()
                   : std::string();
      if (c == cols || color != run_color) {
        svg.rect(x0 + run_start * cw, y0 + draw_r * ch, (c - run_start) * cw + 0.05, ch + 0.05,
                 run_color, opacity);
        run_start = c;
        run_color = color;
      }
    }
  }
}

struct HeatmapOptions {
  std::string title;
  bool gray = false;
  bool diverging = false;  // symmetric range around zero
  double panel_w = 420, panel_h = 260;
};

inline std::string heatmap_figure(const std::vector<float>& values, int rows, int cols,
                                  const HeatmapOptions& opt) {
  SvgBuilder svg(opt.panel_w, opt.panel_h + 28);
  svg.text(8, 18, opt.title, 13, "#222222", "start", true);
  float lo = values[0], hi = values[0];
  for (float v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::function<Rgb(double)> cmap;
  double clo = lo, chi = hi;
  if (opt.diverging) {
    double m = std::max(std::abs(lo), std::abs(hi));
    clo = -m;
    chi = m;
    cmap = [](double t) { return diverging_colormap(2.0 * t - 1.0); };
  } else if (opt.gray) {
    cmap = gray_colormap;
  } else {
    cmap = sequential_colormap;
  }
  draw_heatmap_cells(svg, values, rows, cols, 8, 26, opt.panel_w - 16, opt.panel_h - 8, cmap, clo,
                     chi);
  return svg.finish();
}

// Mel base in gray with a colored attribution overlay at fixed alpha.
inline std::string overlay_figure(const std::vector<float>& mel, const std::vector<float>& attr,
                                  int rows, int cols, const std::string& title,
                                  bool diverging_attr, double alpha = 0.45) {
  SvgBuilder svg(460, 300);
  svg.text(8, 18, title, 13, "#222222", "start", true);
  float mlo = mel[0], mhi = mel[0];
  for (float v : mel) {
    mlo = std::min(mlo, v);
    mhi = std::max(mhi, v);
  }
  draw_heatmap_cells(svg, mel, rows, cols, 8, 26, 444, 266, gray_colormap, mlo, mhi);
  float alo = attr[0], ahi = attr[0];
  for (float v : attr) {
    alo = std::min(alo, v);
    ahi = std::max(ahi, v);
  }
  if (diverging_attr) {
    double m = std::max(std::abs(alo), std::abs(ahi));
    draw_heatmap_cells(
        svg, attr, rows, cols, 8, 26, 444, 266,
        [](double t) { return diverging_colormap(2.0 * t - 1.0); }, -m, m, alpha);
  } else {
    draw_heatmap_cells(svg, attr, rows, cols, 8, 26, 444, 266, sequential_colormap, alo, ahi,
                       alpha);
  }
  return svg.finish();
}

// ---------------------------------------------------------------------------
// Axis helpers + line charts
// ---------------------------------------------------------------------------
struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y;
};

inline std::string line_chart(const std::vector<Series>& series, const std::string& title,
                              const std::string& x_label, const std::string& y_label,
                              double width = 520, double height = 320) {
  SvgBuilder svg(width, height);
  const double ml = 56, mr = 16, mt = 34, mb = 42;
  const double pw = width - ml - mr, ph = height - mt - mb;
  svg.text(width / 2, 20, title, 13, "#222222", "middle", true);

  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  if (xhi <= xlo) xhi = xlo + 1;
  if (yhi <= ylo) yhi = ylo + 1;
  double ypad = 0.05 * (yhi - ylo);
  ylo -= ypad;
  yhi += ypad;

  auto px = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * pw; };
  auto py = [&](double y) { return mt + ph - (y - ylo) / (yhi - ylo) * ph; };

  svg.line(ml, mt, ml, mt + ph, "#444444");
  svg.line(ml, mt + ph, ml + pw, mt + ph, "#444444");
  for (int i = 0; i <= 5; ++i) {
    double y = ylo + (yhi - ylo) * i / 5.0;
    svg.line(ml - 3, py(y), ml + pw, py(y), "#dddddd", 0.7);
    svg.text(ml - 6, py(y) + 4, fmt(y, 3), 10, "#555555", "end");
    double x = xlo + (xhi - xlo) * i / 5.0;
    svg.line(px(x), mt + ph, px(x), mt + ph + 3, "#444444", 0.7);
    svg.text(px(x), mt + ph + 16, fmt(x, x == std::floor(x) ? 0 : 1), 10, "#555555", "middle");
  }
  svg.text(ml + pw / 2, height - 8, x_label, 11, "#333333", "middle");
  svg.text(14, mt + ph / 2, y_label, 11, "#333333", "middle");

  double legend_y = mt + 6;
  for (const auto& s : series) {
    std::vector<std::pair<double, double>> pts;
    for (size_t i = 0; i < s.x.size(); ++i) pts.push_back({px(s.x[i]), py(s.y[i])});
    svg.polyline(pts, s.color);
    svg.line(ml + pw - 110, legend_y, ml + pw - 92, legend_y, s.color, 2.0);
    svg.text(ml + pw - 86, legend_y + 4, s.label, 10, "#333333");
    legend_y += 16;
  }
  return svg.finish();
}

// One-vs-rest ROC curves per class plus the chance diagonal.
inline std::string roc_figure(const eval::MulticlassRoc& roc, const std::string& title) {
  static const char* colors[5] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};
  SvgBuilder svg(460, 400);
  const double ml = 52, mt = 34, pw = 380, ph = 300;
  svg.text(230, 20, title, 13, "#222222", "middle", true);
  svg.line(ml, mt, ml, mt + ph, "#444444");
  svg.line(ml, mt + ph, ml + pw, mt + ph, "#444444");
  for (int i = 0; i <= 4; ++i) {
    double f = i / 4.0;
    svg.text(ml - 6, mt + ph - f * ph + 4, fmt(f, 2), 10, "#555555", "end");
    svg.text(ml + f * pw, mt + ph + 14, fmt(f, 2), 10, "#555555", "middle");
  }
  svg.text(ml + pw / 2, 392, "false positive rate", 11, "#333333", "middle");
  svg.text(12, mt + ph / 2, "tpr", 11, "#333333", "middle");
  svg.line(ml, mt + ph, ml + pw, mt, "#bbbbbb", 1.0, "4,4");

  double legend_y = mt + ph + 34;
  for (int c = 0; c < eval::kNumClasses; ++c) {
    const auto& r = roc.per_class[static_cast<size_t>(c)];
    if (!r.defined) continue;
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : r.points)
      pts.push_back({ml + p.fpr * pw, mt + ph - p.tpr * ph});
    svg.polyline(pts, colors[c]);
    double lx = ml + (c % 3) * 130;
    double ly = legend_y + (c / 3) * 14;
    svg.line(lx, ly, lx + 14, ly, colors[c], 2.0);
    svg.text(lx + 18, ly + 4,
             train::class_names()[static_cast<size_t>(c)] + " (" + fmt(r.auc, 4) + ")", 10,
             "#333333");
  }
  return svg.finish();
}

inline std::string confusion_figure(const eval::ConfusionMatrix& cm, const std::string& title) {
  SvgBuilder svg(430, 370);
  const double ml = 92, mt = 64, cell = 56;
  svg.text(215, 20, title, 13, "#222222", "middle", true);
  int64_t peak = 1;
  for (const auto& row : cm.counts)
    for (int64_t v : row) peak = std::max(peak, v);
  for (int r = 0; r < eval::kNumClasses; ++r) {
    svg.text(ml - 6, mt + r * cell + cell / 2 + 4,
             train::class_names()[static_cast<size_t>(r)], 10, "#333333", "end");
    svg.text(ml + r * cell + cell / 2, mt - 8, train::class_names()[static_cast<size_t>(r)], 10,
             "#333333", "middle");
    for (int c = 0; c < eval::kNumClasses; ++c) {
      double t = static_cast<double>(cm.counts[static_cast<size_t>(r)][static_cast<size_t>(c)]) /
                 static_cast<double>(peak);
      Rgb color = sequential_colormap(t);
      svg.rect(ml + c * cell, mt + r * cell, cell - 1, cell - 1, color.hex());
      svg.text(ml + c * cell + cell / 2, mt + r * cell + cell / 2 + 4,
               std::to_string(cm.counts[static_cast<size_t>(r)][static_cast<size_t>(c)]), 11,
               t > 0.55 ? "#111111" : "#ffffff", "middle");
    }
  }
  svg.text(ml + 2.5 * cell, mt - 34, "predicted", 11, "#333333", "middle");
  svg.text(16, mt + 2.5 * cell, "true", 11, "#333333", "middle");
  return svg.finish();
}

struct BarItem {
  std::string label;
  double value = 0.0;
};

inline std::string bar_figure(const std::vector<BarItem>& items, const std::string& title,
                              double width = 460) {
  const double row_h = 16;
  const double ml = 150, mt = 36;
  double height = mt + items.size() * row_h + 16;
  SvgBuilder svg(width, height);
  svg.text(width / 2, 20, title, 13, "#222222", "middle", true);
  double peak = 1e-12;
  for (const auto& it : items) peak = std::max(peak, std::abs(it.value));
  for (size_t i = 0; i < items.size(); ++i) {
    double y = mt + static_cast<double>(i) * row_h;
    svg.text(ml - 6, y + 11, items[i].label, 9, "#333333", "end");
    double w = std::abs(items[i].value) / peak * (width - ml - 70);
    svg.rect(ml, y + 2, w, row_h - 5, items[i].value >= 0 ? "#1f77b4" : "#d62728");
    svg.text(ml + w + 4, y + 11, fmt(items[i].value, 4), 9, "#555555");
  }
  return svg.finish();
}

}  // namespace respira::report
