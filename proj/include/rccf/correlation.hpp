#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rccf/image_encoder.hpp"
#include "rccf/ops.hpp"
#include "rccf/random.hpp"
#include "rccf/tensor.hpp"

namespace rccf {

enum class FusionStrategy { kAverage, kMax, kConcat };
enum class KernelShape { k1x1, k3x3 };
enum class KernelMode { kPerLevel, kSingle };

inline const char* to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kAverage: return "average";
    case FusionStrategy::kMax: return "max";
    case FusionStrategy::kConcat: return "concat";
  }
  return "?";
}

/// Language-derived correlation kernels, one per pyramid level. In single
/// mode all three entries are the same tensor.
struct KernelSet {
  std::array<Tensor, 3> kernels;  // each C x kh x kw
  KernelShape shape = KernelShape::k1x1;
  KernelMode mode = KernelMode::kPerLevel;
};

/// The three linear maps that project the expression feature into kernel
/// space. In 3x3 mode each map's output is 9x wider and reshaped.
struct KernelGenParams {
  std::array<Tensor, 3> map_w;
  std::array<Tensor, 3> map_b;
  KernelShape shape = KernelShape::k1x1;
  KernelMode mode = KernelMode::kPerLevel;
  int channels = 8;

  void init(Rng& rng, int feature_dim, int channels_, KernelShape shape_, KernelMode mode_) {
    channels = channels_;
    shape = shape_;
    mode = mode_;
    const int taps = shape == KernelShape::k3x3 ? 9 : 1;
    const int dout = channels * taps;
    for (int i = 0; i < 3; ++i) {
      map_w[i] = Tensor({dout, feature_dim}, true);
      const double std = std::sqrt(2.0 / feature_dim);
      for (int j = 0; j < map_w[i].size(); ++j) map_w[i].v(j) = rng.normal(0.0, std);
      map_b[i] = Tensor({dout}, true);
    }
  }

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (int i = 0; i < 3; ++i) {
      out.emplace_back(prefix + ".m" + std::to_string(i) + "_w", map_w[i]);
      out.emplace_back(prefix + ".m" + std::to_string(i) + "_b", map_b[i]);
    }
    return out;
  }
};

/// Learned 1x1 combination used by the concat fusion strategy.
struct FusionParams {
  Tensor concat_w;  // 1 x 3 x 1 x 1
  Tensor concat_b;  // 1

  void init(Rng& rng) {
    concat_w = Tensor({1, 3, 1, 1}, true);
    for (int i = 0; i < 3; ++i) concat_w.v(i) = rng.normal(0.0, 1.0 / std::sqrt(3.0));
    concat_b = Tensor({1}, true);
  }

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const {
    return {{prefix + ".concat_w", concat_w}, {prefix + ".concat_b", concat_b}};
  }
};

inline KernelSet generate_kernels(const Tensor& expression_feature, const KernelGenParams& p) {
  if (expression_feature.rank() != 1 || expression_feature.dim(0) != p.map_w[0].dim(1))
    throw std::invalid_argument("generate_kernels: feature " + shape_str(expression_feature.shape()) +
                                " does not match map input dim " + std::to_string(p.map_w[0].dim(1)));
  const int k = p.shape == KernelShape::k3x3 ? 3 : 1;
  KernelSet set;
  set.shape = p.shape;
  set.mode = p.mode;
  auto make = [&](int i) {
    return reshape(linear(p.map_w[i], expression_feature, p.map_b[i]), {p.channels, k, k});
  };
  if (p.mode == KernelMode::kSingle) {
    Tensor shared = make(0);
    set.kernels = {shared, shared, shared};
  } else {
    set.kernels = {make(0), make(1), make(2)};
  }
  return set;
}

/// Slides one language kernel over one pyramid level. 3x3 kernels use zero
/// padding 1 so every strategy fuses maps of equal shape.
inline Tensor correlate(const Tensor& kernel, const Tensor& level) {
  if (kernel.rank() != 3 || level.rank() != 3 || kernel.dim(0) != level.dim(0))
    throw std::invalid_argument("correlate: kernel " + shape_str(kernel.shape()) +
                                " does not match level " + shape_str(level.shape()));
  const int k = kernel.dim(1);
  const int padding = k == 3 ? 1 : 0;
  Tensor as_filter = reshape(kernel, {1, kernel.dim(0), kernel.dim(1), kernel.dim(2)});
  return select_channel(conv2d(level, as_filter, 1, padding), 0);
}

inline Tensor fuse_maps(const std::array<Tensor, 3>& maps, FusionStrategy strategy,
                        const FusionParams* fusion = nullptr) {
  for (int i = 1; i < 3; ++i)
    if (maps[i].shape() != maps[0].shape())
      throw std::invalid_argument("fuse_maps: level maps differ in shape: " +
                                  shape_str(maps[0].shape()) + " vs " + shape_str(maps[i].shape()));
  switch (strategy) {
    case FusionStrategy::kAverage:
      return sigmoid(scale(add(add(maps[0], maps[1]), maps[2]), 1.0 / 3.0));
    case FusionStrategy::kMax:
      return sigmoid(emax(emax(maps[0], maps[1]), maps[2]));
    case FusionStrategy::kConcat: {
      if (fusion == nullptr || !fusion->concat_w.defined())
        throw std::invalid_argument("fuse_maps: concat strategy requires fusion weights");
      const int h = maps[0].dim(0), w = maps[0].dim(1);
      Tensor stacked = concat0({reshape(maps[0], {1, h, w}), reshape(maps[1], {1, h, w}),
                                reshape(maps[2], {1, h, w})});
      Tensor mixed = select_channel(conv2d(stacked, fusion->concat_w), 0);
      return sigmoid(add_scalar_tensor(mixed, fusion->concat_b));
    }
  }
  throw std::logic_error("fuse_maps: unknown strategy");
}

}  // namespace rccf
