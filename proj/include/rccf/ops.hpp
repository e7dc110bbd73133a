#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "rccf/tensor.hpp"

namespace rccf {
namespace detail {

inline void maybe_record(const char* tag, std::initializer_list<const Tensor*> inputs,
                         const Tensor& out, std::function<void()> replay,
                         std::function<void()> backprop) {
  Tape* tape = current_tape();
  if (!tape) return;
  TapeNode node;
  node.tag = tag;
  for (const Tensor* t : inputs) node.inputs.push_back(t->id());
  node.output = out.id();
  node.out_data = out.storage();
  node.replay = std::move(replay);
  node.backprop = std::move(backprop);
  tape->record(std::move(node));
}

inline bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch: " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape("add", a, b);
  Tensor out(a.shape(), detail::any_requires_grad({&a, &b}));
  auto ad = a.storage(), bd = b.storage(), od = out.storage();
  auto fwd = [ad, bd, od] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = ad->values[i] + bd->values[i];
  };
  fwd();
  detail::maybe_record("add", {&a, &b}, out, fwd, [ad, bd, od] {
    const int n = static_cast<int>(od->values.size());
    if (ad->requires_grad) {
      auto& g = detail::ensure_grad(*ad);
      for (int i = 0; i < n; ++i) g[i] += od->grad[i];
    }
    if (bd->requires_grad) {
      auto& g = detail::ensure_grad(*bd);
      for (int i = 0; i < n; ++i) g[i] += od->grad[i];
    }
  });
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape("sub", a, b);
  Tensor out(a.shape(), detail::any_requires_grad({&a, &b}));
  auto ad = a.storage(), bd = b.storage(), od = out.storage();
  auto fwd = [ad, bd, od] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = ad->values[i] - bd->values[i];
  };
  fwd();
  detail::maybe_record("sub", {&a, &b}, out, fwd, [ad, bd, od] {
    const int n = static_cast<int>(od->values.size());
    if (ad->requires_grad) {
      auto& g = detail::ensure_grad(*ad);
      for (int i = 0; i < n; ++i) g[i] += od->grad[i];
    }
    if (bd->requires_grad) {
      auto& g = detail::ensure_grad(*bd);
      for (int i = 0; i < n; ++i) g[i] -= od->grad[i];
    }
  });
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape("mul", a, b);
  Tensor out(a.shape(), detail::any_requires_grad({&a, &b}));
  auto ad = a.storage(), bd = b.storage(), od = out.storage();
  auto fwd = [ad, bd, od] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = ad->values[i] * bd->values[i];
  };
  fwd();
  detail::maybe_record("mul", {&a, &b}, out, fwd, [ad, bd, od] {
    const int n = static_cast<int>(od->values.size());
    if (ad->requires_grad) {
      auto& g = detail::ensure_grad(*ad);
      for (int i = 0; i < n; ++i) g[i] += od->grad[i] * bd->values[i];
    }
    if (bd->requires_grad) {
      auto& g = detail::ensure_grad(*bd);
      for (int i = 0; i < n; ++i) g[i] += od->grad[i] * ad->values[i];
    }
  });
  return out;
}

/// Elementwise maximum. Ties route the gradient to the first argument.
inline Tensor emax(const Tensor& a, const Tensor& b) {
  detail::check_same_shape("emax", a, b);
  Tensor out(a.shape(), detail::any_requires_grad({&a, &b}));
  auto ad = a.storage(), bd = b.storage(), od = out.storage();
  auto fwd = [ad, bd, od] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = std::max(ad->values[i], bd->values[i]);
  };
  fwd();
  detail::maybe_record("emax", {&a, &b}, out, fwd, [ad, bd, od] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) {
      const bool take_a = ad->values[i] >= bd->values[i];
      if (take_a && ad->requires_grad) detail::ensure_grad(*ad)[i] += od->grad[i];
      if (!take_a && bd->requires_grad) detail::ensure_grad(*bd)[i] += od->grad[i];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// scalar-parameter elementwise
// ---------------------------------------------------------------------------

inline Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape(), a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od, c] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = ad->values[i] * c;
  };
  fwd();
  detail::maybe_record("scale", {&a}, out, fwd, [ad, od, c] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) g[i] += od->grad[i] * c;
  });
  return out;
}

inline Tensor add_scalar(const Tensor& a, double c) {
  Tensor out(a.shape(), a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od, c] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = ad->values[i] + c;
  };
  fwd();
  detail::maybe_record("add_scalar", {&a}, out, fwd, [ad, od] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) g[i] += od->grad[i];
  });
  return out;
}

/// Broadcast-add of a one-element learned tensor.
inline Tensor add_scalar_tensor(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) throw std::invalid_argument("add_scalar_tensor: bias must be a one-element tensor");
  Tensor out(a.shape(), detail::any_requires_grad({&a, &s}));
  auto ad = a.storage(), sd = s.storage(), od = out.storage();
  auto fwd = [ad, sd, od] {
    const int n = static_cast<int>(od->values.size());
    const double c = sd->values[0];
    for (int i = 0; i < n; ++i) od->values[i] = ad->values[i] + c;
  };
  fwd();
  detail::maybe_record("add_scalar_tensor", {&a, &s}, out, fwd, [ad, sd, od] {
    const int n = static_cast<int>(od->values.size());
    if (ad->requires_grad) {
      auto& g = detail::ensure_grad(*ad);
      for (int i = 0; i < n; ++i) g[i] += od->grad[i];
    }
    if (sd->requires_grad) {
      auto& g = detail::ensure_grad(*sd);
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += od->grad[i];
      g[0] += acc;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// elementwise unary
// ---------------------------------------------------------------------------

inline Tensor relu(const Tensor& a) {
  Tensor out(a.shape(), a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = ad->values[i] > 0.0 ? ad->values[i] : 0.0;
  };
  fwd();
  detail::maybe_record("relu", {&a}, out, fwd, [ad, od] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i)
      if (ad->values[i] > 0.0) g[i] += od->grad[i];
  });
  return out;
}

inline Tensor sigmoid(const Tensor& a) {
  Tensor out(a.shape(), a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) {
      const double x = ad->values[i];
      od->values[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                               : std::exp(x) / (1.0 + std::exp(x));
    }
  };
  fwd();
  detail::maybe_record("sigmoid", {&a}, out, fwd, [ad, od] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) {
      const double y = od->values[i];
      g[i] += od->grad[i] * y * (1.0 - y);
    }
  });
  return out;
}

inline Tensor tanh_op(const Tensor& a) {
  Tensor out(a.shape(), a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = std::tanh(ad->values[i]);
  };
  fwd();
  detail::maybe_record("tanh", {&a}, out, fwd, [ad, od] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) {
      const double y = od->values[i];
      g[i] += od->grad[i] * (1.0 - y * y);
    }
  });
  return out;
}

/// Natural log. Inputs must be strictly positive.
inline Tensor log_op(const Tensor& a) {
  for (int i = 0; i < a.size(); ++i)
    if (a.v(i) <= 0.0)
      throw std::domain_error("log: non-positive input " + std::to_string(a.v(i)) +
                              " at flat index " + std::to_string(i));
  Tensor out(a.shape(), a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = std::log(ad->values[i]);
  };
  fwd();
  detail::maybe_record("log", {&a}, out, fwd, [ad, od] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) g[i] += od->grad[i] / ad->values[i];
  });
  return out;
}

/// x^p with constant exponent. For non-integer p inputs must be >= 0.
inline Tensor pow_const(const Tensor& a, double p) {
  Tensor out(a.shape(), a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od, p] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = std::pow(ad->values[i], p);
  };
  fwd();
  detail::maybe_record("pow_const", {&a}, out, fwd, [ad, od, p] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) g[i] += od->grad[i] * p * std::pow(ad->values[i], p - 1.0);
  });
  return out;
}

/// Clamp to [lo, hi]; gradient passes only through the strict interior.
inline Tensor clamp_op(const Tensor& a, double lo, double hi) {
  if (lo >= hi) throw std::invalid_argument("clamp: lo must be below hi");
  Tensor out(a.shape(), a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od, lo, hi] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = std::min(hi, std::max(lo, ad->values[i]));
  };
  fwd();
  detail::maybe_record("clamp", {&a}, out, fwd, [ad, od, lo, hi] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i)
      if (ad->values[i] > lo && ad->values[i] < hi) g[i] += od->grad[i];
  });
  return out;
}

inline Tensor abs_op(const Tensor& a) {
  Tensor out(a.shape(), a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od] {
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) od->values[i] = std::fabs(ad->values[i]);
  };
  fwd();
  detail::maybe_record("abs", {&a}, out, fwd, [ad, od] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const int n = static_cast<int>(od->values.size());
    for (int i = 0; i < n; ++i) {
      const double x = ad->values[i];
      if (x > 0.0) g[i] += od->grad[i];
      else if (x < 0.0) g[i] -= od->grad[i];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// reductions and indexing
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
  Tensor out({1}, a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od] {
    double acc = 0.0;
    for (double v : ad->values) acc += v;
    od->values[0] = acc;
  };
  fwd();
  detail::maybe_record("sum", {&a}, out, fwd, [ad, od] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const double go = od->grad[0];
    for (double& gi : g) gi += go;
  });
  return out;
}

/// Gather one element by flat index, as a scalar tensor.
inline Tensor pick(const Tensor& a, int flat_index) {
  if (flat_index < 0 || flat_index >= a.size())
    throw std::out_of_range("pick: index " + std::to_string(flat_index) + " out of range for " +
                            shape_str(a.shape()));
  Tensor out({1}, a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od, flat_index] { od->values[0] = ad->values[flat_index]; };
  fwd();
  detail::maybe_record("pick", {&a}, out, fwd, [ad, od, flat_index] {
    if (!ad->requires_grad) return;
    detail::ensure_grad(*ad)[flat_index] += od->grad[0];
  });
  return out;
}

/// Channel c of a CxHxW tensor as an HxW tensor.
inline Tensor select_channel(const Tensor& a, int c) {
  if (a.rank() != 3) throw std::invalid_argument("select_channel: expected rank-3, got " + shape_str(a.shape()));
  if (c < 0 || c >= a.dim(0)) throw std::out_of_range("select_channel: channel " + std::to_string(c));
  const int hw = a.dim(1) * a.dim(2);
  Tensor out({a.dim(1), a.dim(2)}, a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od, c, hw] {
    for (int i = 0; i < hw; ++i) od->values[i] = ad->values[c * hw + i];
  };
  fwd();
  detail::maybe_record("select_channel", {&a}, out, fwd, [ad, od, c, hw] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    for (int i = 0; i < hw; ++i) g[c * hw + i] += od->grad[i];
  });
  return out;
}

/// Row r of an NxE tensor as a length-E tensor.
inline Tensor select_row(const Tensor& a, int r) {
  if (a.rank() != 2) throw std::invalid_argument("select_row: expected rank-2, got " + shape_str(a.shape()));
  if (r < 0 || r >= a.dim(0)) throw std::out_of_range("select_row: row " + std::to_string(r));
  const int e = a.dim(1);
  Tensor out({e}, a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od, r, e] {
    for (int i = 0; i < e; ++i) od->values[i] = ad->values[r * e + i];
  };
  fwd();
  detail::maybe_record("select_row", {&a}, out, fwd, [ad, od, r, e] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    for (int i = 0; i < e; ++i) g[r * e + i] += od->grad[i];
  });
  return out;
}

inline Tensor reshape(const Tensor& a, std::vector<int> new_shape) {
  if (detail::shape_numel(new_shape) != a.size())
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                shape_str(new_shape));
  Tensor out(std::move(new_shape), a.requires_grad());
  auto ad = a.storage(), od = out.storage();
  auto fwd = [ad, od] { od->values = ad->values; };
  fwd();
  detail::maybe_record("reshape", {&a}, out, fwd, [ad, od] {
    if (!ad->requires_grad) return;
    auto& g = detail::ensure_grad(*ad);
    const int n = static_cast<int>(g.size());
    for (int i = 0; i < n; ++i) g[i] += od->grad[i];
  });
  return out;
}

/// Concatenate along dimension 0. All inputs must share trailing dimensions.
inline Tensor concat0(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat0: no inputs");
  std::vector<int> shape = parts[0].shape();
  int dim0 = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.rank() != static_cast<int>(shape.size()))
      throw std::invalid_argument("concat0: rank mismatch");
    for (std::size_t i = 1; i < shape.size(); ++i)
      if (p.shape()[i] != shape[i])
        throw std::invalid_argument("concat0: trailing shape mismatch: " + shape_str(shape) +
                                    " vs " + shape_str(p.shape()));
    dim0 += p.dim(0);
    rg = rg || p.requires_grad();
  }
  shape[0] = dim0;
  Tensor out(shape, rg);
  std::vector<std::shared_ptr<detail::TensorData>> srcs;
  for (const Tensor& p : parts) srcs.push_back(p.storage());
  auto od = out.storage();
  auto fwd = [srcs, od] {
    int off = 0;
    for (const auto& s : srcs) {
      std::copy(s->values.begin(), s->values.end(), od->values.begin() + off);
      off += static_cast<int>(s->values.size());
    }
  };
  fwd();
  Tape* tape = current_tape();
  if (tape) {
    TapeNode node;
    node.tag = "concat0";
    for (const Tensor& p : parts) node.inputs.push_back(p.id());
    node.output = out.id();
    node.out_data = od;
    node.replay = fwd;
    node.backprop = [srcs, od] {
      int off = 0;
      for (const auto& s : srcs) {
        const int n = static_cast<int>(s->values.size());
        if (s->requires_grad) {
          auto& g = detail::ensure_grad(*s);
          for (int i = 0; i < n; ++i) g[i] += od->grad[off + i];
        }
        off += n;
      }
    };
    tape->record(std::move(node));
  }
  return out;
}

// ---------------------------------------------------------------------------
// linear maps
// ---------------------------------------------------------------------------

/// weight (DoutxDin) times vector (Din) plus bias (Dout).
inline Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias) {
  if (weight.rank() != 2 || x.rank() != 1 || bias.rank() != 1 ||
      weight.dim(1) != x.dim(0) || weight.dim(0) != bias.dim(0))
    throw std::invalid_argument("linear: shape mismatch: weight " + shape_str(weight.shape()) +
                                ", input " + shape_str(x.shape()) + ", bias " +
                                shape_str(bias.shape()));
  const int dout = weight.dim(0), din = weight.dim(1);
  Tensor out({dout}, detail::any_requires_grad({&weight, &x, &bias}));
  auto wd = weight.storage(), xd = x.storage(), bd = bias.storage(), od = out.storage();
  auto fwd = [wd, xd, bd, od, dout, din] {
    for (int o = 0; o < dout; ++o) {
      double acc = bd->values[o];
      const double* wrow = wd->values.data() + o * din;
      for (int i = 0; i < din; ++i) acc += wrow[i] * xd->values[i];
      od->values[o] = acc;
    }
  };
  fwd();
  detail::maybe_record("linear", {&weight, &x, &bias}, out, fwd, [wd, xd, bd, od, dout, din] {
    for (int o = 0; o < dout; ++o) {
      const double go = od->grad[o];
      if (go == 0.0) continue;
      const double* wrow = wd->values.data() + o * din;
      if (wd->requires_grad) {
        double* gw = detail::ensure_grad(*wd).data() + o * din;
        for (int i = 0; i < din; ++i) gw[i] += go * xd->values[i];
      }
      if (xd->requires_grad) {
        auto& gx = detail::ensure_grad(*xd);
        for (int i = 0; i < din; ++i) gx[i] += go * wrow[i];
      }
      if (bd->requires_grad) detail::ensure_grad(*bd)[o] += go;
    }
  });
  return out;
}

/// weight (DoutxDin) times vector (Din), no bias.
inline Tensor matvec(const Tensor& weight, const Tensor& x) {
  if (weight.rank() != 2 || x.rank() != 1 || weight.dim(1) != x.dim(0))
    throw std::invalid_argument("matvec: shape mismatch: weight " + shape_str(weight.shape()) +
                                ", input " + shape_str(x.shape()));
  const int dout = weight.dim(0), din = weight.dim(1);
  Tensor out({dout}, detail::any_requires_grad({&weight, &x}));
  auto wd = weight.storage(), xd = x.storage(), od = out.storage();
  auto fwd = [wd, xd, od, dout, din] {
    for (int o = 0; o < dout; ++o) {
      double acc = 0.0;
      const double* wrow = wd->values.data() + o * din;
      for (int i = 0; i < din; ++i) acc += wrow[i] * xd->values[i];
      od->values[o] = acc;
    }
  };
  fwd();
  detail::maybe_record("matvec", {&weight, &x}, out, fwd, [wd, xd, od, dout, din] {
    for (int o = 0; o < dout; ++o) {
      const double go = od->grad[o];
      if (go == 0.0) continue;
      const double* wrow = wd->values.data() + o * din;
      if (wd->requires_grad) {
        double* gw = detail::ensure_grad(*wd).data() + o * din;
        for (int i = 0; i < din; ++i) gw[i] += go * xd->values[i];
      }
      if (xd->requires_grad) {
        auto& gx = detail::ensure_grad(*xd);
        for (int i = 0; i < din; ++i) gx[i] += go * wrow[i];
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// conv / resize / embedding
// ---------------------------------------------------------------------------

/// 2-D convolution: input CxHxW, kernels OxCxKhxKw -> OxH'xW' where
/// H' = floor((H + 2*padding - Kh)/stride) + 1 and likewise W'.
inline Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride = 1, int padding = 0) {
  if (input.rank() != 3 || kernels.rank() != 4)
    throw std::invalid_argument("conv2d: expected CxHxW input and OxCxKhxKw kernels, got " +
                                shape_str(input.shape()) + " and " + shape_str(kernels.shape()));
  if (input.dim(0) != kernels.dim(1))
    throw std::invalid_argument("conv2d: channel mismatch: input " + shape_str(input.shape()) +
                                " vs kernels " + shape_str(kernels.shape()));
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  const int ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int co = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kh > h + 2 * padding || kw > w + 2 * padding)
    throw std::invalid_argument("conv2d: kernel " + shape_str(kernels.shape()) +
                                " larger than padded input " + shape_str(input.shape()));
  const int ho = (h + 2 * padding - kh) / stride + 1;
  const int wo = (w + 2 * padding - kw) / stride + 1;

  Tensor out({co, ho, wo}, detail::any_requires_grad({&input, &kernels}));
  auto id = input.storage(), kd = kernels.storage(), od = out.storage();

  // output columns whose whole kernel window is in-bounds skip the edge checks
  const int ox_lo = std::min(wo, (padding + stride - 1) / stride);
  const int ox_hi = std::min(wo, (w + padding - kw) / stride + 1);  // exclusive on the safe side
  const int oy_lo = std::min(ho, (padding + stride - 1) / stride);
  const int oy_hi = std::min(ho, (h + padding - kh) / stride + 1);

  auto fwd = [id, kd, od, ci, h, w, co, kh, kw, ho, wo, stride, padding, ox_lo, ox_hi, oy_lo,
              oy_hi] {
    const double* in = id->values.data();
    const double* kv = kd->values.data();
    double* ov = od->values.data();
    for (int o = 0; o < co; ++o) {
      for (int oy = 0; oy < ho; ++oy) {
        const int iy0 = oy * stride - padding;
        double* orow = ov + (o * ho + oy) * wo;
        const bool y_safe = oy >= oy_lo && oy < oy_hi;
        if (y_safe) {
          for (int ox = 0; ox < wo; ++ox) orow[ox] = 0.0;
          for (int c = 0; c < ci; ++c) {
            const double* iplane = in + c * h * w;
            const double* kbase = kv + (o * ci + c) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const double* irow = iplane + (iy0 + ky) * w;
              const double* krow = kbase + ky * kw;
              // interior: no bounds checks
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                const double* ip = irow + ox * stride - padding;
                double acc = 0.0;
                for (int kx = 0; kx < kw; ++kx) acc += ip[kx] * krow[kx];
                orow[ox] += acc;
              }
              // left/right edges
              for (int ox = 0; ox < ox_lo; ++ox) {
                const int ix0 = ox * stride - padding;
                double acc = 0.0;
                for (int kx = 0; kx < kw; ++kx) {
                  const int ix = ix0 + kx;
                  if (ix >= 0 && ix < w) acc += irow[ix] * krow[kx];
                }
                orow[ox] += acc;
              }
              for (int ox = std::max(ox_lo, ox_hi); ox < wo; ++ox) {
                const int ix0 = ox * stride - padding;
                double acc = 0.0;
                for (int kx = 0; kx < kw; ++kx) {
                  const int ix = ix0 + kx;
                  if (ix >= 0 && ix < w) acc += irow[ix] * krow[kx];
                }
                orow[ox] += acc;
              }
            }
          }
        } else {
          for (int ox = 0; ox < wo; ++ox) {
            const int ix0 = ox * stride - padding;
            double acc = 0.0;
            for (int c = 0; c < ci; ++c) {
              for (int ky = 0; ky < kh; ++ky) {
                const int iy = iy0 + ky;
                if (iy < 0 || iy >= h) continue;
                const double* irow = in + (c * h + iy) * w;
                const double* krow = kv + ((o * ci + c) * kh + ky) * kw;
                for (int kx = 0; kx < kw; ++kx) {
                  const int ix = ix0 + kx;
                  if (ix < 0 || ix >= w) continue;
                  acc += irow[ix] * krow[kx];
                }
              }
            }
            orow[ox] = acc;
          }
        }
      }
    }
  };
  fwd();
  detail::maybe_record("conv2d", {&input, &kernels}, out, fwd,
                       [id, kd, od, ci, h, w, co, kh, kw, ho, wo, stride, padding, ox_lo, ox_hi,
                        oy_lo, oy_hi] {
    const double* in = id->values.data();
    const double* kv = kd->values.data();
    const double* og = od->grad.data();
    double* gi = nullptr;
    double* gk = nullptr;
    if (id->requires_grad) gi = detail::ensure_grad(*id).data();
    if (kd->requires_grad) gk = detail::ensure_grad(*kd).data();
    if (!gi && !gk) return;
    for (int o = 0; o < co; ++o) {
      for (int oy = 0; oy < ho; ++oy) {
        const int iy0 = oy * stride - padding;
        const double* grow = og + (o * ho + oy) * wo;
        const bool y_safe = oy >= oy_lo && oy < oy_hi;
        if (y_safe) {
          for (int c = 0; c < ci; ++c) {
            const int iplane = c * h * w;
            const int kplane = (o * ci + c) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const int irow = iplane + (iy0 + ky) * w;
              const int krow = kplane + ky * kw;
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                const double g = grow[ox];
                if (g == 0.0) continue;
                const int ip = irow + ox * stride - padding;
                if (gi)
                  for (int kx = 0; kx < kw; ++kx) gi[ip + kx] += g * kv[krow + kx];
                if (gk)
                  for (int kx = 0; kx < kw; ++kx) gk[krow + kx] += g * in[ip + kx];
              }
              for (int ox = 0; ox < ox_lo; ++ox) {
                const double g = grow[ox];
                if (g == 0.0) continue;
                const int ix0 = ox * stride - padding;
                for (int kx = 0; kx < kw; ++kx) {
                  const int ix = ix0 + kx;
                  if (ix < 0 || ix >= w) continue;
                  if (gi) gi[irow + ix] += g * kv[krow + kx];
                  if (gk) gk[krow + kx] += g * in[irow + ix];
                }
              }
              for (int ox = std::max(ox_lo, ox_hi); ox < wo; ++ox) {
                const double g = grow[ox];
                if (g == 0.0) continue;
                const int ix0 = ox * stride - padding;
                for (int kx = 0; kx < kw; ++kx) {
                  const int ix = ix0 + kx;
                  if (ix < 0 || ix >= w) continue;
                  if (gi) gi[irow + ix] += g * kv[krow + kx];
                  if (gk) gk[krow + kx] += g * in[irow + ix];
                }
              }
            }
          }
        } else {
          for (int ox = 0; ox < wo; ++ox) {
            const double g = grow[ox];
            if (g == 0.0) continue;
            const int ix0 = ox * stride - padding;
            for (int c = 0; c < ci; ++c) {
              for (int ky = 0; ky < kh; ++ky) {
                const int iy = iy0 + ky;
                if (iy < 0 || iy >= h) continue;
                const int ibase = (c * h + iy) * w;
                const int kbase = ((o * ci + c) * kh + ky) * kw;
                for (int kx = 0; kx < kw; ++kx) {
                  const int ix = ix0 + kx;
                  if (ix < 0 || ix >= w) continue;
                  if (gi) gi[ibase + ix] += g * kv[kbase + kx];
                  if (gk) gk[kbase + kx] += g * in[ibase + ix];
                }
              }
            }
          }
        }
      }
    }
  });
  return out;
}

/// Per-output-channel bias for a CxHxW tensor.
inline Tensor add_channel_bias(const Tensor& a, const Tensor& bias) {
  if (a.rank() != 3 || bias.rank() != 1 || bias.dim(0) != a.dim(0))
    throw std::invalid_argument("add_channel_bias: shape mismatch: " + shape_str(a.shape()) +
                                " vs bias " + shape_str(bias.shape()));
  const int c = a.dim(0), hw = a.dim(1) * a.dim(2);
  Tensor out(a.shape(), detail::any_requires_grad({&a, &bias}));
  auto ad = a.storage(), bd = bias.storage(), od = out.storage();
  auto fwd = [ad, bd, od, c, hw] {
    for (int ch = 0; ch < c; ++ch) {
      const double b = bd->values[ch];
      for (int i = 0; i < hw; ++i) od->values[ch * hw + i] = ad->values[ch * hw + i] + b;
    }
  };
  fwd();
  detail::maybe_record("add_channel_bias", {&a, &bias}, out, fwd, [ad, bd, od, c, hw] {
    if (ad->requires_grad) {
      auto& g = detail::ensure_grad(*ad);
      const int n = c * hw;
      for (int i = 0; i < n; ++i) g[i] += od->grad[i];
    }
    if (bd->requires_grad) {
      auto& g = detail::ensure_grad(*bd);
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int i = 0; i < hw; ++i) acc += od->grad[ch * hw + i];
        g[ch] += acc;
      }
    }
  });
  return out;
}

/// Bilinear resize of a CxHxW tensor (align-corners-false sampling).
inline Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
  if (input.rank() != 3)
    throw std::invalid_argument("bilinear_resize: expected CxHxW, got " + shape_str(input.shape()));
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: output dims must be >= 1");
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;

  // Precompute the 4-tap sampling lattice; it depends only on the shapes.
  struct Tap { int i0, i1; double f; };
  std::vector<Tap> ys(out_h), xs(out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    double src = (oy + 0.5) * sy - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = std::min(static_cast<int>(src), h - 1);
    ys[oy] = {i0, std::min(i0 + 1, h - 1), src - i0};
  }
  for (int ox = 0; ox < out_w; ++ox) {
    double src = (ox + 0.5) * sx - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = std::min(static_cast<int>(src), w - 1);
    xs[ox] = {i0, std::min(i0 + 1, w - 1), src - i0};
  }

  Tensor out({c, out_h, out_w}, input.requires_grad());
  auto id = input.storage(), od = out.storage();
  auto fwd = [id, od, ys, xs, c, h, w, out_h, out_w] {
    const double* in = id->values.data();
    double* ov = od->values.data();
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = in + ch * h * w;
      for (int oy = 0; oy < out_h; ++oy) {
        const Tap& ty = ys[oy];
        for (int ox = 0; ox < out_w; ++ox) {
          const Tap& tx = xs[ox];
          const double v00 = plane[ty.i0 * w + tx.i0];
          const double v01 = plane[ty.i0 * w + tx.i1];
          const double v10 = plane[ty.i1 * w + tx.i0];
          const double v11 = plane[ty.i1 * w + tx.i1];
          ov[(ch * out_h + oy) * out_w + ox] = (1.0 - ty.f) * ((1.0 - tx.f) * v00 + tx.f * v01) +
                                               ty.f * ((1.0 - tx.f) * v10 + tx.f * v11);
        }
      }
    }
  };
  fwd();
  detail::maybe_record("bilinear_resize", {&input}, out, fwd, [id, od, ys, xs, c, h, w, out_h, out_w] {
    if (!id->requires_grad) return;
    double* gi = detail::ensure_grad(*id).data();
    const double* og = od->grad.data();
    for (int ch = 0; ch < c; ++ch) {
      double* plane = gi + ch * h * w;
      for (int oy = 0; oy < out_h; ++oy) {
        const Tap& ty = ys[oy];
        for (int ox = 0; ox < out_w; ++ox) {
          const Tap& tx = xs[ox];
          const double g = og[(ch * out_h + oy) * out_w + ox];
          if (g == 0.0) continue;
          plane[ty.i0 * w + tx.i0] += g * (1.0 - ty.f) * (1.0 - tx.f);
          plane[ty.i0 * w + tx.i1] += g * (1.0 - ty.f) * tx.f;
          plane[ty.i1 * w + tx.i0] += g * ty.f * (1.0 - tx.f);
          plane[ty.i1 * w + tx.i1] += g * ty.f * tx.f;
        }
      }
    }
  });
  return out;
}

/// Gather rows of an embedding table (VxE) by token id -> NxE.
inline Tensor embed_rows(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw std::invalid_argument("embed_rows: table must be VxE");
  if (ids.empty()) throw std::invalid_argument("embed_rows: empty id list");
  const int v = table.dim(0), e = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= v)
      throw std::out_of_range("embed_rows: id " + std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(v));
  const int n = static_cast<int>(ids.size());
  Tensor out({n, e}, table.requires_grad());
  auto td = table.storage(), od = out.storage();
  auto fwd = [td, od, ids, e] {
    for (std::size_t r = 0; r < ids.size(); ++r)
      std::copy(td->values.begin() + ids[r] * e, td->values.begin() + (ids[r] + 1) * e,
                od->values.begin() + r * e);
  };
  fwd();
  detail::maybe_record("embed_rows", {&table}, out, fwd, [td, od, ids, e] {
    if (!td->requires_grad) return;
    auto& g = detail::ensure_grad(*td);
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (int i = 0; i < e; ++i) g[ids[r] * e + i] += od->grad[r * e + i];
  });
  return out;
}

}  // namespace rccf
