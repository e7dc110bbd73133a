#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace rccf {

/// Axis-aligned box, corner form, input-image pixel coordinates.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
};

/// Ground-truth annotation, center + size form.
struct GroundTruthBox {
  double cx = 0, cy = 0;  // center, pixels
  double w = 0, h = 0;    // size, pixels

  Box to_box() const { return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2}; }

  static GroundTruthBox from_box(const Box& b) {
    return {b.center_x(), b.center_y(), b.width(), b.height()};
  }
};

inline double iou(const Box& a, const Box& b) {
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

/// Fraction of pairs whose IoU strictly exceeds `threshold`.
inline double precision_at_iou(const std::vector<std::pair<Box, Box>>& pairs, double threshold) {
  if (pairs.empty()) throw std::invalid_argument("precision_at_iou: empty prediction list");
  int hits = 0;
  for (const auto& [pred, truth] : pairs)
    if (iou(pred, truth) > threshold) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

}  // namespace rccf
