#pragma once

// Minimal SVG emitter for phase portraits: 800x600 canvas, trajectories as
// polylines, singularities as glyphs by kind, limit cycles in a heavier stroke.

#include <ostream>
#include <string>
#include <vector>

#include "kukles/cycles.hpp"
#include "kukles/io.hpp"
#include "kukles/scan.hpp"

namespace kukles::svg {

inline constexpr int kWidth = 800;
inline constexpr int kHeight = 600;

struct Canvas {
  Window w;
  double px(double x) const { return (x - w.xmin) / (w.xmax - w.xmin) * kWidth; }
  double py(double y) const { return (w.ymax - y) / (w.ymax - w.ymin) * kHeight; }
};

inline void polyline(std::ostream& os, const Canvas& cv, const std::vector<State>& pts, const char* stroke,
                     double width) {
  if (pts.size() < 2) return;
  os << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) os << ' ';
    os << io::num(cv.px(pts[i].x)) << ',' << io::num(cv.py(pts[i].y));
  }
  os << "\"/>\n";
}

inline const char* stroke_for(const std::string& label) {
  if (label == "u+" || label == "u-") return "#c0392b";
  if (label == "s+" || label == "s-") return "#2471a3";
  return "#888888";
}

inline void glyph(std::ostream& os, const Canvas& cv, const Singularity& s) {
  const double x = cv.px(s.location.x), y = cv.py(s.location.y);
  const std::string cx = io::num(x), cy = io::num(y);
  switch (s.kind) {
    case SingularityKind::Saddle:
      os << "<path stroke=\"black\" stroke-width=\"2\" d=\"M" << io::num(x - 6) << ',' << io::num(y - 6) << " L"
         << io::num(x + 6) << ',' << io::num(y + 6) << " M" << io::num(x - 6) << ',' << io::num(y + 6) << " L"
         << io::num(x + 6) << ',' << io::num(y - 6) << "\"/>\n";
      break;
    case SingularityKind::Center:
      os << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"5\" fill=\"white\" stroke=\"black\"/>\n";
      break;
    case SingularityKind::AntiSaddleFocus:
    case SingularityKind::AntiSaddleNode: {
      const char* fill = s.trace < 0.0 ? "black" : (s.trace > 0.0 ? "white" : "gray");
      os << "<rect x=\"" << io::num(x - 5) << "\" y=\"" << io::num(y - 5) << "\" width=\"10\" height=\"10\" fill=\""
         << fill << "\" stroke=\"black\"/>\n";
      break;
    }
    default:
      os << "<polygon points=\"" << cx << ',' << io::num(y - 6) << ' ' << io::num(x - 6) << ',' << io::num(y + 5)
         << ' ' << io::num(x + 6) << ',' << io::num(y + 5) << "\" fill=\"orange\" stroke=\"black\"/>\n";
  }
}

inline void write(std::ostream& os, const Portrait& p, const std::vector<LimitCycle>& cycles = {}) {
  const Canvas cv{p.window};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axes, when they are inside the window.
  if (p.window.ymin < 0.0 && p.window.ymax > 0.0)
    os << "<line x1=\"0\" x2=\"" << kWidth << "\" y1=\"" << io::num(cv.py(0)) << "\" y2=\"" << io::num(cv.py(0))
       << "\" stroke=\"#dddddd\"/>\n";
  if (p.window.xmin < 0.0 && p.window.xmax > 0.0)
    os << "<line y1=\"0\" y2=\"" << kHeight << "\" x1=\"" << io::num(cv.px(0)) << "\" x2=\"" << io::num(cv.px(0))
       << "\" stroke=\"#dddddd\"/>\n";
  for (const auto& t : p.trajectories) {
    std::vector<State> pts;
    pts.reserve(t.trajectory.samples.size());
    for (const auto& s : t.trajectory.samples) pts.push_back(s.s);
    const bool sep = t.label.rfind("seed", 0) != 0;
    polyline(os, cv, pts, stroke_for(t.label), sep ? 1.5 : 0.7);
  }
  for (const auto& c : cycles) {
    const char* color = c.stability == Stability::Stable ? "#1e8449" : (c.stability == Stability::Unstable ? "#8e44ad" : "#d68910");
    polyline(os, cv, c.polyline, color, 3.0);
  }
  for (const auto& s : p.singularities) glyph(os, cv, s);
  os << "</svg>\n";
}

}  // namespace kukles::svg
