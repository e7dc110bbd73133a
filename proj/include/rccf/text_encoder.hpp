#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rccf/ops.hpp"
#include "rccf/random.hpp"
#include "rccf/tensor.hpp"
#include "rccf/vocab.hpp"

namespace rccf {

/// Expression encoder: embedding lookup, a linear projection, then a
/// bidirectional Elman recurrence. The two directions' last hidden states are
/// concatenated and projected to the feature dimension. A bag-of-words mode
/// (mean of projected embeddings) is kept as a diagnostic baseline.
struct TextEncoderParams {
  Tensor embedding;              // V x E
  Tensor proj_w, proj_b;         // P x E, P
  Tensor fwd_wx, fwd_wh, fwd_b;  // H x P, H x H, H
  Tensor bwd_wx, bwd_wh, bwd_b;
  Tensor out_w, out_b;           // Dl x 2H, Dl
  bool bag_of_words = false;
  int feature_dim = 0;

  void init(Rng& rng, int vocab_size, int embed_dim, int proj_dim, int hidden_dim, int dl) {
    feature_dim = dl;
    auto dense = [&rng](std::vector<int> shape, int fan_in) {
      Tensor t(std::move(shape), true);
      const double std = std::sqrt(2.0 / fan_in);
      for (int i = 0; i < t.size(); ++i) t.v(i) = rng.normal(0.0, std);
      return t;
    };
    embedding = dense({vocab_size, embed_dim}, embed_dim);
    proj_w = dense({proj_dim, embed_dim}, embed_dim);
    proj_b = Tensor({proj_dim}, true);
    fwd_wx = dense({hidden_dim, proj_dim}, proj_dim);
    fwd_wh = dense({hidden_dim, hidden_dim}, 2 * hidden_dim);
    fwd_b = Tensor({hidden_dim}, true);
    bwd_wx = dense({hidden_dim, proj_dim}, proj_dim);
    bwd_wh = dense({hidden_dim, hidden_dim}, 2 * hidden_dim);
    bwd_b = Tensor({hidden_dim}, true);
    out_w = dense({dl, 2 * hidden_dim}, 2 * hidden_dim);
    out_b = Tensor({dl}, true);
  }

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const {
    return {{prefix + ".embedding", embedding}, {prefix + ".proj_w", proj_w},
            {prefix + ".proj_b", proj_b},       {prefix + ".fwd_wx", fwd_wx},
            {prefix + ".fwd_wh", fwd_wh},       {prefix + ".fwd_b", fwd_b},
            {prefix + ".bwd_wx", bwd_wx},       {prefix + ".bwd_wh", bwd_wh},
            {prefix + ".bwd_b", bwd_b},         {prefix + ".out_w", out_w},
            {prefix + ".out_b", out_b}};
  }
};

inline Tensor encode_expression(const TokenSequence& tokens, const TextEncoderParams& p) {
  if (tokens.ids.empty()) throw std::invalid_argument("encode_expression: empty token sequence");
  const int n = tokens.length();
  Tensor embedded = embed_rows(p.embedding, tokens.ids);  // n x E

  std::vector<Tensor> projected(n);
  for (int i = 0; i < n; ++i) projected[i] = linear(p.proj_w, select_row(embedded, i), p.proj_b);

  if (p.bag_of_words) {
    if (p.proj_w.dim(0) != p.feature_dim)
      throw std::invalid_argument("encode_expression: bag-of-words mode needs proj_dim == feature_dim");
    Tensor acc = projected[0];
    for (int i = 1; i < n; ++i) acc = add(acc, projected[i]);
    return scale(acc, 1.0 / n);
  }

  auto run_direction = [&](const Tensor& wx, const Tensor& wh, const Tensor& b, bool forward) {
    Tensor h;
    for (int step = 0; step < n; ++step) {
      const int i = forward ? step : n - 1 - step;
      Tensor pre = linear(wx, projected[i], b);
      if (step > 0) pre = add(pre, matvec(wh, h));
      h = tanh_op(pre);
    }
    return h;
  };

  Tensor hf = run_direction(p.fwd_wx, p.fwd_wh, p.fwd_b, true);
  Tensor hb = run_direction(p.bwd_wx, p.bwd_wh, p.bwd_b, false);
  return linear(p.out_w, concat0({hf, hb}), p.out_b);
}

}  // namespace rccf
