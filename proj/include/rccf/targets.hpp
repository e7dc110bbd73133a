#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "rccf/geometry.hpp"
#include "rccf/ops.hpp"
#include "rccf/tensor.hpp"

namespace rccf {

/// Largest displacement r of a box corner (or of the whole box) that still
/// keeps IoU with the original w x h box at or above `min_overlap`. Minimum
/// over the three displacement cases, each solved as a quadratic root:
///   1. one corner moves inward           (w-r)(h-r) = o.wh
///   2. one corner moves outward          (w+r)(h+r) = wh/o
///   3. the whole box shifts diagonally   (w-r)(h-r) = 2o.wh/(1+o)
inline double gaussian_radius(double w, double h, double min_overlap) {
  if (w <= 0.0 || h <= 0.0)
    throw std::invalid_argument("gaussian_radius: box size must be positive");
  if (min_overlap <= 0.0 || min_overlap >= 1.0)
    throw std::invalid_argument("gaussian_radius: min_overlap must be in (0,1)");
  const double o = min_overlap;
  const double s = w + h;

  const double d1 = s * s - 4.0 * (1.0 - o) * w * h;
  const double r1 = (s - std::sqrt(d1)) / 2.0;

  const double d2 = s * s - 4.0 * (1.0 - 1.0 / o) * w * h;
  const double r2 = (-s + std::sqrt(d2)) / 2.0;

  const double d3 = s * s - 4.0 * w * h * (1.0 - o) / (1.0 + o);
  const double r3 = (s - std::sqrt(d3)) / 2.0;

  return std::min({r1, r2, r3});
}

inline double gaussian_sigma(double w, double h, double min_overlap = 0.7, double sigma_min = 0.5) {
  return std::max(gaussian_radius(w, h, min_overlap) / 3.0, sigma_min);
}

/// Ground-truth tensors for one sample: the splatted center heatmap, the
/// center cell, and the size/offset regression targets at that cell.
struct TargetBundle {
  Tensor heatmap;               // (H/d) x (W/d), peak exactly 1 at the center cell
  int cell_x = 0, cell_y = 0;   // output-map coordinates
  double size_w = 0, size_h = 0;
  double off_x = 0, off_y = 0;  // in [0,1)
  double sigma = 0;
  bool size_in_pixels = false;

  int flat_center(int map_w) const { return cell_y * map_w + cell_x; }
};

inline TargetBundle make_targets(const GroundTruthBox& box, int stride, int map_h, int map_w,
                                 double min_overlap = 0.7, double sigma_min = 0.5,
                                 bool size_in_pixels = false) {
  if (box.w <= 0.0 || box.h <= 0.0)
    throw std::invalid_argument("make_targets: box size must be positive");
  if (box.cx < 0.0 || box.cy < 0.0 || box.cx >= stride * map_w || box.cy >= stride * map_h)
    throw std::invalid_argument("make_targets: center (" + std::to_string(box.cx) + "," +
                                std::to_string(box.cy) + ") outside the image");

  TargetBundle t;
  t.cell_x = static_cast<int>(std::floor(box.cx / stride));
  t.cell_y = static_cast<int>(std::floor(box.cy / stride));
  if (t.cell_x >= map_w || t.cell_y >= map_h)
    throw std::logic_error("make_targets: center cell escaped the map");
  t.off_x = box.cx / stride - t.cell_x;
  t.off_y = box.cy / stride - t.cell_y;
  t.size_in_pixels = size_in_pixels;
  t.size_w = size_in_pixels ? box.w : box.w / stride;
  t.size_h = size_in_pixels ? box.h : box.h / stride;
  t.sigma = gaussian_sigma(box.w / stride, box.h / stride, min_overlap, sigma_min);

  t.heatmap = Tensor({map_h, map_w});
  const double inv = 1.0 / (2.0 * t.sigma * t.sigma);
  for (int y = 0; y < map_h; ++y)
    for (int x = 0; x < map_w; ++x) {
      const double dx = x - t.cell_x, dy = y - t.cell_y;
      t.heatmap.at(y, x) = std::exp(-(dx * dx + dy * dy) * inv);
    }
  t.heatmap.at(t.cell_y, t.cell_x) = 1.0;
  return t;
}

/// Penalty-reduced pixel-wise focal loss over the center heatmap, normalized
/// by the number of target centers (at least 1).
inline Tensor focal_loss(const Tensor& pred, const Tensor& target, double alpha = 2.0,
                         double beta = 4.0, double clamp_eps = 1e-4) {
  if (pred.shape() != target.shape())
    throw std::invalid_argument("focal_loss: shape mismatch: " + shape_str(pred.shape()) + " vs " +
                                shape_str(target.shape()));
  int npos = 0;
  Tensor pos_mask(target.shape());
  Tensor neg_weight(target.shape());
  for (int i = 0; i < target.size(); ++i) {
    if (target.v(i) == 1.0) {
      pos_mask.v(i) = 1.0;
      ++npos;
    } else {
      neg_weight.v(i) = std::pow(1.0 - target.v(i), beta);
    }
  }

  Tensor p = clamp_op(pred, clamp_eps, 1.0 - clamp_eps);
  Tensor one_minus_p = add_scalar(scale(p, -1.0), 1.0);
  Tensor pos_term = mul(pos_mask, mul(pow_const(one_minus_p, alpha), log_op(p)));
  Tensor neg_term = mul(neg_weight, mul(pow_const(p, alpha), log_op(one_minus_p)));
  return scale(sum(add(pos_term, neg_term)), -1.0 / std::max(npos, 1));
}

/// L1 size and offset losses, evaluated only at the center cell.
inline std::pair<Tensor, Tensor> regression_losses(const Tensor& w_map, const Tensor& h_map,
                                                   const Tensor& dx_map, const Tensor& dy_map,
                                                   const TargetBundle& t) {
  const auto& shape = t.heatmap.shape();
  for (const Tensor* m : {&w_map, &h_map, &dx_map, &dy_map})
    if (m->shape() != shape)
      throw std::invalid_argument("regression_losses: map " + shape_str(m->shape()) +
                                  " does not match heatmap " + shape_str(shape));
  const int c = t.flat_center(shape[1]);
  Tensor l_size = add(abs_op(add_scalar(pick(w_map, c), -t.size_w)),
                      abs_op(add_scalar(pick(h_map, c), -t.size_h)));
  Tensor l_off = add(abs_op(add_scalar(pick(dx_map, c), -t.off_x)),
                     abs_op(add_scalar(pick(dy_map, c), -t.off_y)));
  return {l_size, l_off};
}

inline Tensor total_loss(const Tensor& l_center, const Tensor& l_size, const Tensor& l_off,
                         double lambda_size = 0.1, double lambda_off = 1.0) {
  return add(l_center, add(scale(l_size, lambda_size), scale(l_off, lambda_off)));
}

}  // namespace rccf
