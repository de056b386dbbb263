#pragma once

// Dense row-major tensors of doubles with reverse-mode differentiation.
//
// Every operation on a tensor that requires grad records a tape node holding
// the inputs and a backward rule. Nodes carry a monotonically increasing
// sequence number, so replaying the reachable nodes in decreasing sequence
// order is exactly the reverse of forward execution order.
//
// Conventions:
//  * std over an axis uses population (1/N) normalization.
//  * Binary ops broadcast by aligning trailing dimensions; an extent of 1
//    stretches to match.
//  * Reductions run in a fixed sequential order, so identical inputs give
//    bitwise identical results.
//  * Gradients on leaves accumulate across backward() calls. Call
//    zero_grad() explicitly between steps.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "btlab/error.hpp"

namespace btlab {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

/// Backward rule: given the node output and the upstream gradient (same size
/// as the output), return one gradient per input. An empty vector means
/// "no contribution" for that input.
using BackwardFn = std::function<std::vector<std::vector<double>>(
    const TensorImpl& out, std::span<const double> upstream)>;

struct TapeNode {
  std::string_view op;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // leaves only; sized on first accumulation
  std::shared_ptr<TapeNode> node;
};

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor eye(std::size_t n);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values,
                       bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t dim() const { return impl_->shape.size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t rows() const { return size(0); }
  std::size_t cols() const { return size(1); }

  std::span<const double> data() const { return impl_->data; }
  /// Mutable view of a leaf's values (parameter updates, finite differences).
  /// Throws for tensors produced by a recorded operation.
  std::span<double> mutable_data();

  double item() const;
  double at(std::size_t i) const { return impl_->data.at(i); }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return impl_->node == nullptr; }
  void set_requires_grad(bool flag);

  /// Accumulated gradient; all zeros if nothing has been accumulated yet.
  std::vector<double> grad() const;
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad();

  /// Same values, cut from the tape.
  Tensor detach() const;
  /// Deep copy of values (no grad, no history).
  Tensor clone() const;

  /// Reverse-mode pass from this scalar. Leaves that require grad receive
  /// d(this)/d(leaf) added to their gradient.
  void backward() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  static Tensor from_impl(std::shared_ptr<TensorImpl> impl);

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// While alive on the current thread, operations do not record tape nodes.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Builds a result tensor and, when grad mode is on and any input requires
/// grad, records a tape node for it. Exposed for ops defined outside
/// tensor.cpp (linear algebra kernels).
Tensor make_result(std::string_view op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, BackwardFn backward);

// Elementwise binary ops with trailing-dimension broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Elementwise unary ops.
Tensor neg(const Tensor& a);
Tensor pow(const Tensor& a, double exponent);
Tensor sqrt(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
/// max(a, floor) elementwise; gradient flows only where a > floor.
Tensor maximum(const Tensor& a, double floor);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& a, std::size_t axis, bool keepdim = false);
/// Population standard deviation over `axis`. The gradient is defined as 0
/// along slices whose std is exactly 0.
Tensor stddev(const Tensor& a, std::size_t axis, bool keepdim = false);

// Shape ops and linear algebra.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator+(const Tensor& a, double c);
Tensor operator-(const Tensor& a, double c);
Tensor operator*(const Tensor& a, double c);
Tensor operator*(double c, const Tensor& a);
Tensor operator/(const Tensor& a, double c);

}  // namespace btlab
