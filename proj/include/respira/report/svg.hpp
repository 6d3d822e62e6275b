#pragma once
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace respira::report {

// Deterministic number formatting: fixed decimals, no locale.
inline std::string fmt(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

struct Rgb {
  int r = 0, g = 0, b = 0;
  std::string hex() const {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
  }
};

// Perceptually-uniform sequential map (viridis-like anchor table, linearly
// interpolated).
inline Rgb sequential_colormap(double t) {
  static const int anchors[9][3] = {{68, 1, 84},    {72, 40, 120},  {62, 74, 137},
                                    {49, 104, 142}, {38, 130, 142}, {31, 158, 137},
                                    {53, 183, 121}, {109, 205, 89}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0);
  double pos = t * 8.0;
  int i = std::min(static_cast<int>(pos), 7);
  double f = pos - i;
  Rgb c;
  c.r = static_cast<int>(std::lround(anchors[i][0] + f * (anchors[i + 1][0] - anchors[i][0])));
  c.g = static_cast<int>(std::lround(anchors[i][1] + f * (anchors[i + 1][1] - anchors[i][1])));
  c.b = static_cast<int>(std::lround(anchors[i][2] + f * (anchors[i + 1][2] - anchors[i][2])));
  return c;
}

inline Rgb gray_colormap(double t) {
  int g = static_cast<int>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
  return {g, g, g};
}

// Diverging map for signed attributions: blue .. white .. red.
inline Rgb diverging_colormap(double t) {
  t = std::clamp(t, -1.0, 1.0);
  if (t < 0) {
    double f = 1.0 + t;  // 0 at -1, 1 at 0
    return {static_cast<int>(std::lround(33 + f * (255 - 33))),
            static_cast<int>(std::lround(102 + f * (255 - 102))), 255};
  }
  double f = 1.0 - t;
  return {255, static_cast<int>(std::lround(38 + f * (255 - 38))),
          static_cast<int>(std::lround(36 + f * (255 - 36)))};
}

class SvgBuilder {
public:
  SvgBuilder(double width, double height) : w_(width), h_(height) {
    body_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w_, 0) + "\" height=\"" +
             fmt(h_, 0) + "\" viewBox=\"0 0 " + fmt(w_, 0) + " " + fmt(h_, 0) + "\">\n";
    body_ += "<rect x=\"0\" y=\"0\" width=\"" + fmt(w_, 0) + "\" height=\"" + fmt(h_, 0) +
             "\" fill=\"#ffffff\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill,
            double opacity = 1.0) {
    body_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) +
             "\" height=\"" + fmt(h) + "\" fill=\"" + fill + "\"";
    if (opacity < 1.0) body_ += " fill-opacity=\"" + fmt(opacity) + "\"";
    body_ += "/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0, const std::string& dash = "") {
    body_ += "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" +
             fmt(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(width, 1) + "\"";
    if (!dash.empty()) body_ += " stroke-dasharray=\"" + dash + "\"";
    body_ += "/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double width = 1.5) {
    if (pts.empty()) return;
    body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
             fmt(width, 1) + "\" points=\"";
    for (const auto& [x, y] : pts) body_ += fmt(x) + "," + fmt(y) + " ";
    body_ += "\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 12,
            const std::string& fill = "#222222", const std::string& anchor = "start",
            bool bold = false) {
    body_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-family=\"sans-serif\" font-size=\"" +
             std::to_string(size) + "\" fill=\"" + fill + "\" text-anchor=\"" + anchor + "\"";
    if (bold) body_ += " font-weight=\"bold\"";
    body_ += ">" + escape_xml(s) + "</text>\n";
  }

  void raw(const std::string& s) { body_ += s; }

  std::string finish() const { return body_ + "</svg>\n"; }

  double width() const { return w_; }
  double height() const { return h_; }

private:
  double w_, h_;
  std::string body_;
};

}  // namespace respira::report
