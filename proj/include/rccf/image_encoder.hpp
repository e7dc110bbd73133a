#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rccf/ops.hpp"
#include "rccf/random.hpp"
#include "rccf/tensor.hpp"

namespace rccf {

/// Three feature maps drawn from different depths, all at the common output
/// resolution (H/stride x W/stride) with `channels` channels.
/// levels[0] is the regression feature: the stage whose native resolution
/// matches the output stride, so it keeps the sharpest spatial structure
/// while still seeing whole objects. levels[1] is the deepest (widest
/// receptive field), levels[2] the shallowest.
struct FeaturePyramid {
  std::array<Tensor, 3> levels;
  int stride = 4;
  int channels = 0;
};

/// Plain convolutional backbone: a stem at full resolution, then three
/// downsampling stages with taps at strides 2, 4 and 8. The early stages get
/// refining convs (cheap receptive-field growth); the last stage is a single
/// stride-2 conv so the deepest receptive field stays inside the image and
/// padding-free interior cells exist at every level.
struct ImageEncoderParams {
  static constexpr int kStageConvs[3] = {3, 3, 1};
  static constexpr int kNumStageConvs = 7;

  Tensor stem_w, stem_b;
  std::array<Tensor, kNumStageConvs> stage_w;
  std::array<Tensor, kNumStageConvs> stage_b;
  std::array<Tensor, 3> proj_w;  // proj order: [stride-4 tap, stride-8 tap, stride-2 tap]
  std::array<Tensor, 3> proj_b;
  int width = 12;       // stage-1 width (full 32x32 grid, the costly one)
  int deep_width = 16;  // stages 2 and 3
  int channels = 16;
  int stride = 4;

  void init(Rng& rng, int width_, int deep_width_, int channels_, int stride_) {
    width = width_;
    deep_width = deep_width_;
    channels = channels_;
    stride = stride_;
    auto conv = [&rng](int out_c, int in_c, int k) {
      Tensor t({out_c, in_c, k, k}, true);
      const double std = std::sqrt(2.0 / (in_c * k * k));
      for (int i = 0; i < t.size(); ++i) t.v(i) = rng.normal(0.0, std);
      return t;
    };
    stem_w = conv(width, 3, 3);
    stem_b = Tensor({width}, true);
    const int stage_in[kNumStageConvs] = {width, width, width, width, deep_width, deep_width,
                                          deep_width};
    const int stage_out[kNumStageConvs] = {width, width, width, deep_width, deep_width,
                                           deep_width, deep_width};
    for (int i = 0; i < kNumStageConvs; ++i) {
      stage_w[i] = conv(stage_out[i], stage_in[i], 3);
      stage_b[i] = Tensor({stage_out[i]}, true);
    }
    const int tap_width[3] = {deep_width, deep_width, width};  // s4, s8, s2 taps
    for (int i = 0; i < 3; ++i) {
      proj_w[i] = conv(channels, tap_width[i], 1);
      proj_b[i] = Tensor({channels}, true);
    }
  }

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out = {{prefix + ".stem_w", stem_w},
                                                       {prefix + ".stem_b", stem_b}};
    for (int i = 0; i < kNumStageConvs; ++i) {
      out.emplace_back(prefix + ".stage" + std::to_string(i) + "_w", stage_w[i]);
      out.emplace_back(prefix + ".stage" + std::to_string(i) + "_b", stage_b[i]);
    }
    for (int i = 0; i < 3; ++i) {
      out.emplace_back(prefix + ".proj" + std::to_string(i) + "_w", proj_w[i]);
      out.emplace_back(prefix + ".proj" + std::to_string(i) + "_b", proj_b[i]);
    }
    return out;
  }
};

inline FeaturePyramid encode_image(const Tensor& image, const ImageEncoderParams& p) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw std::invalid_argument("encode_image: expected 3xHxW image, got " + shape_str(image.shape()));
  const int h = image.dim(1), w = image.dim(2);
  if (h % 8 != 0 || w % 8 != 0 || h % p.stride != 0 || w % p.stride != 0)
    throw std::invalid_argument("encode_image: spatial dims " + std::to_string(h) + "x" +
                                std::to_string(w) + " must be divisible by 8 and by the output stride " +
                                std::to_string(p.stride));

  auto block = [](const Tensor& x, const Tensor& kw, const Tensor& kb, int stride) {
    return relu(add_channel_bias(conv2d(x, kw, stride, 1), kb));
  };
  auto stage = [&](const Tensor& x, int base, int convs) {
    Tensor y = block(x, p.stage_w[base], p.stage_b[base], 2);
    for (int i = 1; i < convs; ++i) y = block(y, p.stage_w[base + i], p.stage_b[base + i], 1);
    return y;
  };

  Tensor x0 = block(image, p.stem_w, p.stem_b, 1);
  Tensor t2 = stage(x0, 0, ImageEncoderParams::kStageConvs[0]);  // stride 2
  Tensor t4 = stage(t2, 3, ImageEncoderParams::kStageConvs[1]);  // stride 4
  Tensor t8 = stage(t4, 6, ImageEncoderParams::kStageConvs[2]);  // stride 8

  const int oh = h / p.stride, ow = w / p.stride;
  auto unify = [&](const Tensor& tap, int i) {
    return add_channel_bias(conv2d(bilinear_resize(tap, oh, ow), p.proj_w[i]), p.proj_b[i]);
  };

  FeaturePyramid pyr;
  pyr.stride = p.stride;
  pyr.channels = p.channels;
  pyr.levels = {unify(t4, 0), unify(t8, 1), unify(t2, 2)};
  return pyr;
}

}  // namespace rccf
