#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>

#include "rccf/geometry.hpp"
#include "rccf/tensor.hpp"

namespace rccf {

struct Prediction {
  Box box;            // input-image pixels, clamped to bounds
  double score = 0;   // heatmap value at the peak
  int peak_x = 0, peak_y = 0;  // output-map coordinates
};

/// Assembles the predicted box from the heatmap peak and the size/offset maps
/// gathered at that peak, then rescales map-unit corners into image pixels.
/// Ties in the heatmap resolve to the first cell in row-major order.
inline Prediction decode_box(const Tensor& heat, const Tensor& w_map, const Tensor& h_map,
                             const Tensor& dx_map, const Tensor& dy_map, int stride, int img_w,
                             int img_h, bool size_in_pixels = false) {
  if (heat.rank() != 2) throw std::invalid_argument("decode_box: heatmap must be rank 2");
  for (const Tensor* m : {&w_map, &h_map, &dx_map, &dy_map})
    if (m->shape() != heat.shape())
      throw std::invalid_argument("decode_box: map " + shape_str(m->shape()) +
                                  " does not match heatmap " + shape_str(heat.shape()));
  const int mh = heat.dim(0), mw = heat.dim(1);

  Prediction p;
  double best = heat.at(0, 0);
  for (int y = 0; y < mh; ++y)
    for (int x = 0; x < mw; ++x)
      if (heat.at(y, x) > best) {
        best = heat.at(y, x);
        p.peak_y = y;
        p.peak_x = x;
      }
  p.score = best;

  double w = w_map.at(p.peak_y, p.peak_x);
  double h = h_map.at(p.peak_y, p.peak_x);
  if (size_in_pixels) {
    w /= stride;
    h /= stride;
  }
  const double cx = p.peak_x + dx_map.at(p.peak_y, p.peak_x);
  const double cy = p.peak_y + dy_map.at(p.peak_y, p.peak_x);

  double x1 = (cx - w / 2) * stride, x2 = (cx + w / 2) * stride;
  double y1 = (cy - h / 2) * stride, y2 = (cy + h / 2) * stride;
  if (x2 < x1) std::swap(x1, x2);
  if (y2 < y1) std::swap(y1, y2);
  p.box.x1 = std::clamp(x1, 0.0, static_cast<double>(img_w));
  p.box.x2 = std::clamp(x2, 0.0, static_cast<double>(img_w));
  p.box.y1 = std::clamp(y1, 0.0, static_cast<double>(img_h));
  p.box.y2 = std::clamp(y2, 0.0, static_cast<double>(img_h));
  return p;
}

}  // namespace rccf
