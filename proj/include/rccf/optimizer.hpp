#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rccf/tensor.hpp"

namespace rccf {

/// Bias-corrected Adam over a fixed parameter list. A step with any
/// non-finite gradient is refused wholesale so a single bad batch cannot
/// poison the moments.
class Adam {
 public:
  Adam() = default;

  explicit Adam(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Tensor& p : params_) {
      m_.emplace_back(p.shape());
      v_.emplace_back(p.shape());
    }
  }

  /// Applies one update from the gradients currently stored on the
  /// parameters. Returns false (parameters and moments untouched) if any
  /// gradient is non-finite.
  bool step(double lr) {
    for (Tensor& p : params_)
      for (int i = 0; i < p.size(); ++i)
        if (!std::isfinite(p.grad_at(i))) return false;

    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = params_[k];
      for (int i = 0; i < p.size(); ++i) {
        const double g = p.grad_at(i);
        m_[k].v(i) = beta1_ * m_[k].v(i) + (1.0 - beta1_) * g;
        v_[k].v(i) = beta2_ * v_[k].v(i) + (1.0 - beta2_) * g * g;
        const double mhat = m_[k].v(i) / bc1;
        const double vhat = v_[k].v(i) / bc2;
        p.v(i) -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
    return true;
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  std::int64_t steps_taken() const { return t_; }
  void set_steps_taken(std::int64_t t) { t_ = t; }

  const std::vector<Tensor>& params() const { return params_; }
  Tensor& moment1(std::size_t i) { return m_[i]; }
  Tensor& moment2(std::size_t i) { return v_[i]; }

 private:
  std::vector<Tensor> params_;
  std::vector<Tensor> m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
};

}  // namespace rccf
