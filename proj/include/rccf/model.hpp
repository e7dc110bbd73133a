#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rccf/config.hpp"
#include "rccf/correlation.hpp"
#include "rccf/image_encoder.hpp"
#include "rccf/ops.hpp"
#include "rccf/random.hpp"
#include "rccf/tensor.hpp"
#include "rccf/text_encoder.hpp"
#include "rccf/vocab.hpp"

namespace rccf {

/// One regression branch: 3x3 conv + relu, then a 1x1 conv to two channels.
struct HeadParams {
  Tensor c1_w, c1_b;
  Tensor c2_w, c2_b;

  void init(Rng& rng, int in_channels, int width) {
    auto conv = [&rng](int out_c, int in_c, int k) {
      Tensor t({out_c, in_c, k, k}, true);
      const double std = std::sqrt(2.0 / (in_c * k * k));
      for (int i = 0; i < t.size(); ++i) t.v(i) = rng.normal(0.0, std);
      return t;
    };
    c1_w = conv(width, in_channels, 3);
    c1_b = Tensor({width}, true);
    c2_w = conv(2, width, 1);
    c2_b = Tensor({2}, true);
  }

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const {
    return {{prefix + ".c1_w", c1_w},
            {prefix + ".c1_b", c1_b},
            {prefix + ".c2_w", c2_w},
            {prefix + ".c2_b", c2_b}};
  }

  /// Returns the two output planes (channel 0, channel 1).
  std::pair<Tensor, Tensor> forward(const Tensor& input) const {
    Tensor mid = relu(add_channel_bias(conv2d(input, c1_w, 1, 1), c1_b));
    Tensor out = add_channel_bias(conv2d(mid, c2_w), c2_b);
    return {select_channel(out, 0), select_channel(out, 1)};
  }
};

struct ModelOutputs {
  Tensor heatmap;                       // fused center heatmap, values in (0,1)
  std::array<Tensor, 3> correlations;   // pre-activation per-level maps
  Tensor w_map, h_map, dx_map, dy_map;  // regression planes
};

/// The full pipeline: expression encoder, image encoder, language-guided
/// correlation, and the two regression heads. Configuration switches select
/// the fusion strategy, kernel shape/sharing, single- vs multi-level
/// correlation, and the regression input.
class RccfModel {
 public:
  TextEncoderParams text;
  ImageEncoderParams image;
  KernelGenParams kernel_gen;
  FusionParams fusion;
  HeadParams size_head;
  HeadParams offset_head;
  TrainConfig cfg;
  int vocab_size = 0;

  void init(const TrainConfig& config, int vocab_size_, Rng& rng) {
    cfg = config;
    vocab_size = vocab_size_;
    text.init(rng, vocab_size, cfg.embed_dim, cfg.proj_dim, cfg.hidden_dim, cfg.feature_dim);
    text.bag_of_words = cfg.text_encoder == "bow";
    image.init(rng, cfg.backbone_width, cfg.backbone_width_deep, cfg.channels, cfg.stride);
    kernel_gen.init(rng, cfg.feature_dim, cfg.channels,
                    cfg.kernel_size == 3 ? KernelShape::k3x3 : KernelShape::k1x1,
                    cfg.kernel_mode == "single" ? KernelMode::kSingle : KernelMode::kPerLevel);
    fusion.init(rng);
    const int head_in = cfg.regression == "language" ? (cfg.levels == "single" ? 1 : 3)
                                                     : cfg.channels;
    size_head.init(rng, head_in, cfg.backbone_width);
    offset_head.init(rng, head_in, cfg.backbone_width);
  }

  FusionStrategy fusion_strategy() const {
    if (cfg.fusion == "max") return FusionStrategy::kMax;
    if (cfg.fusion == "concat") return FusionStrategy::kConcat;
    return FusionStrategy::kAverage;
  }

  Tensor encode_text(const TokenSequence& tokens) const { return encode_expression(tokens, text); }

  FeaturePyramid encode_img(const Tensor& img) const { return encode_image(img, image); }

  /// Correlation + fusion stage. In single-level mode only the deepest level
  /// is matched (with one kernel) and the other two map slots alias it.
  std::pair<Tensor, std::array<Tensor, 3>> correlate_fuse(const Tensor& expression_feature,
                                                          const FeaturePyramid& pyr) const {
    KernelSet kernels = generate_kernels(expression_feature, kernel_gen);
    std::array<Tensor, 3> maps;
    if (cfg.levels == "single") {
      Tensor only = correlate(kernels.kernels[0], pyr.levels[0]);
      maps = {only, only, only};
      return {sigmoid(only), maps};
    }
    for (int i = 0; i < 3; ++i) maps[i] = correlate(kernels.kernels[i], pyr.levels[i]);
    return {fuse_maps(maps, fusion_strategy(), &fusion), maps};
  }

  /// Size/offset regression stage. Visual mode reads the deepest pyramid
  /// level; language mode reads the stacked pre-activation correlation maps.
  std::array<Tensor, 4> regress(const FeaturePyramid& pyr,
                                const std::array<Tensor, 3>& correlations) const {
    Tensor input;
    if (cfg.regression == "language") {
      const int h = correlations[0].dim(0), w = correlations[0].dim(1);
      if (cfg.levels == "single") {
        input = reshape(correlations[0], {1, h, w});
      } else {
        input = concat0({reshape(correlations[0], {1, h, w}), reshape(correlations[1], {1, h, w}),
                         reshape(correlations[2], {1, h, w})});
      }
    } else {
      input = pyr.levels[0];
    }
    auto [w_map, h_map] = size_head.forward(input);
    auto [dx_map, dy_map] = offset_head.forward(input);
    return {w_map, h_map, dx_map, dy_map};
  }

  ModelOutputs forward(const Tensor& img, const TokenSequence& tokens) const {
    Tensor lq = encode_text(tokens);
    FeaturePyramid pyr = encode_img(img);
    auto [heat, maps] = correlate_fuse(lq, pyr);
    auto reg = regress(pyr, maps);
    return {heat, maps, reg[0], reg[1], reg[2], reg[3]};
  }

  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto extend = [&out](std::vector<std::pair<std::string, Tensor>> v) {
      for (auto& p : v) out.push_back(std::move(p));
    };
    extend(text.named("text"));
    extend(image.named("image"));
    extend(kernel_gen.named("kernel"));
    extend(fusion.named("fusion"));
    extend(size_head.named("size_head"));
    extend(offset_head.named("offset_head"));
    return out;
  }
};

}  // namespace rccf
