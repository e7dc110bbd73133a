#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rccf {

namespace detail {

struct TensorData {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t id = 0;
};

inline std::uint64_t next_tensor_id() {
  static std::uint64_t counter = 0;
  return ++counter;
}

inline int shape_numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

}  // namespace detail

inline std::string shape_str(const std::vector<int>& shape) {
  if (shape.empty()) return "scalar";
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

/// Dense row-major tensor of doubles with an optional gradient buffer.
/// Copies are shallow handles onto shared storage; the autodiff tape keeps
/// handles to everything it produced, so intermediate values stay alive for
/// replay and backprop.
class Tensor {
 public:
  Tensor() : d_(nullptr) {}

  explicit Tensor(std::vector<int> shape, bool requires_grad = false)
      : d_(std::make_shared<detail::TensorData>()) {
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("tensor: dimension sizes must be positive, got " + shape_str(shape));
    }
    d_->shape = std::move(shape);
    d_->values.assign(detail::shape_numel(d_->shape), 0.0);
    d_->requires_grad = requires_grad;
    d_->id = detail::next_tensor_id();
  }

  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    for (double& v : t.d_->values) v = value;
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    if (static_cast<int>(values.size()) != t.size())
      throw std::invalid_argument("tensor: value count " + std::to_string(values.size()) +
                                  " does not match shape " + shape_str(t.shape()));
    t.d_->values = std::move(values);
    return t;
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return full({1}, value, requires_grad);
  }

  bool defined() const { return d_ != nullptr; }
  const std::vector<int>& shape() const { return d_->shape; }
  int rank() const { return static_cast<int>(d_->shape.size()); }
  int dim(int i) const { return d_->shape[i]; }
  int size() const { return static_cast<int>(d_->values.size()); }
  std::uint64_t id() const { return d_->id; }

  double* data() { return d_->values.data(); }
  const double* data() const { return d_->values.data(); }
  std::vector<double>& values() { return d_->values; }
  const std::vector<double>& values() const { return d_->values; }

  double& v(int i) { return d_->values[i]; }
  double v(int i) const { return d_->values[i]; }

  // rank-2 (y, x) and rank-3 (c, y, x) accessors
  double& at(int y, int x) { return d_->values[y * d_->shape[1] + x]; }
  double at(int y, int x) const { return d_->values[y * d_->shape[1] + x]; }
  double& at(int c, int y, int x) {
    return d_->values[(c * d_->shape[1] + y) * d_->shape[2] + x];
  }
  double at(int c, int y, int x) const {
    return d_->values[(c * d_->shape[1] + y) * d_->shape[2] + x];
  }

  /// Value of a one-element tensor.
  double value() const {
    if (size() != 1) throw std::logic_error("tensor: value() on non-scalar of shape " + shape_str(shape()));
    return d_->values[0];
  }

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool r) { d_->requires_grad = r; }

  bool has_grad() const { return !d_->grad.empty(); }
  std::vector<double>& grad() {
    if (d_->grad.empty()) d_->grad.assign(d_->values.size(), 0.0);
    return d_->grad;
  }
  double grad_at(int i) const { return d_->grad.empty() ? 0.0 : d_->grad[i]; }
  void zero_grad() {
    for (double& g : d_->grad) g = 0.0;
  }

  std::shared_ptr<detail::TensorData> storage() const { return d_; }

 private:
  std::shared_ptr<detail::TensorData> d_;
};

/// One recorded operation: inputs/output identities plus closures that
/// recompute the forward value and scatter the output gradient.
struct TapeNode {
  const char* tag;
  std::vector<std::uint64_t> inputs;
  std::uint64_t output;
  std::shared_ptr<detail::TensorData> out_data;
  std::function<void()> replay;
  std::function<void()> backprop;
};

/// Reverse-mode tape. Nodes are appended in execution order, which makes the
/// record topologically sorted by construction.
class Tape {
 public:
  void record(TapeNode node) { nodes_.push_back(std::move(node)); }

  const std::vector<TapeNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  /// Recompute every recorded output from the current input values, in order.
  void replay_forward() {
    for (TapeNode& n : nodes_) n.replay();
  }

  /// Populate gradients of everything the scalar `loss` depends on.
  /// Gradients of tensors produced on the tape are reset on each call;
  /// gradients of leaf tensors (parameters) accumulate across calls.
  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
      throw std::invalid_argument("backward: loss must be a scalar tensor");
    bool produced = false;
    for (const TapeNode& n : nodes_)
      if (n.output == loss.id()) { produced = true; break; }
    if (!produced)
      throw std::invalid_argument("backward: loss was not produced by this computation record");

    for (TapeNode& n : nodes_)
      for (double& g : n.out_data->grad) g = 0.0;

    auto& lg = loss.storage()->grad;
    if (lg.empty()) lg.assign(1, 0.0);
    lg[0] = 1.0;

    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->out_data->grad.empty()) continue;  // not on any path to the loss
      it->backprop();
    }
  }

 private:
  std::vector<TapeNode> nodes_;
};

namespace detail {

inline Tape*& current_tape_slot() {
  thread_local Tape* t = nullptr;
  return t;
}

inline std::vector<double>& ensure_grad(TensorData& td) {
  if (td.grad.empty()) td.grad.assign(td.values.size(), 0.0);
  return td.grad;
}

}  // namespace detail

inline Tape* current_tape() { return detail::current_tape_slot(); }

/// RAII guard installing a tape as the recording target for this thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : prev_(detail::current_tape_slot()) {
    detail::current_tape_slot() = &tape;
  }
  ~TapeScope() { detail::current_tape_slot() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

}  // namespace rccf
