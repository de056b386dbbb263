#include "btlab/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Dense>

namespace btlab {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool t_grad_enabled = true;

void check_finite(std::string_view op, std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw DomainError(std::string(op) + ": produced a non-finite value");
    }
  }
}

// Broadcast bookkeeping: for every output element the flat offsets into
// the two operands, computed once and shared by forward and backward.
struct Broadcast {
  Shape out_shape;
  std::vector<std::size_t> a_index;
  std::vector<std::size_t> b_index;
  bool same_shape = false;
};

Broadcast broadcast(std::string_view op, const Shape& a, const Shape& b) {
  Broadcast result;
  if (a == b) {
    result.out_shape = a;
    result.same_shape = true;
    return result;
  }
  const std::size_t nd = std::max(a.size(), b.size());
  Shape ap(nd, 1), bp(nd, 1), out(nd, 1);
  std::copy(a.begin(), a.end(), ap.begin() + static_cast<std::ptrdiff_t>(nd - a.size()));
  std::copy(b.begin(), b.end(), bp.begin() + static_cast<std::ptrdiff_t>(nd - b.size()));
  for (std::size_t d = 0; d < nd; ++d) {
    if (ap[d] != bp[d] && ap[d] != 1 && bp[d] != 1) {
      throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                       " vs " + shape_str(b));
    }
    out[d] = std::max(ap[d], bp[d]);
  }
  // Strides with zero on broadcast dimensions.
  std::vector<std::size_t> as(nd, 0), bs(nd, 0);
  std::size_t sa = 1, sb = 1;
  for (std::size_t d = nd; d-- > 0;) {
    as[d] = ap[d] == 1 ? 0 : sa;
    bs[d] = bp[d] == 1 ? 0 : sb;
    sa *= ap[d];
    sb *= bp[d];
  }
  const std::size_t n = shape_numel(out);
  result.a_index.resize(n);
  result.b_index.resize(n);
  std::vector<std::size_t> idx(nd, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k < n; ++k) {
    result.a_index[k] = ia;
    result.b_index[k] = ib;
    for (std::size_t d = nd; d-- > 0;) {
      ++idx[d];
      ia += as[d];
      ib += bs[d];
      if (idx[d] < out[d]) break;
      ia -= as[d] * idx[d];
      ib -= bs[d] * idx[d];
      idx[d] = 0;
    }
  }
  result.out_shape = std::move(out);
  return result;
}

template <typename Fwd, typename DA, typename DB>
Tensor binary_op(std::string_view op, const Tensor& a, const Tensor& b, Fwd fwd,
                 DA da, DB db) {
  auto bc = std::make_shared<Broadcast>(broadcast(op, a.shape(), b.shape()));
  const std::size_t n = shape_numel(bc->out_shape);
  std::vector<double> out(n);
  auto av = a.data();
  auto bv = b.data();
  if (bc->same_shape) {
    for (std::size_t k = 0; k < n; ++k) out[k] = fwd(av[k], bv[k]);
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      out[k] = fwd(av[bc->a_index[k]], bv[bc->b_index[k]]);
    }
  }
  const bool need_a = a.requires_grad();
  const bool need_b = b.requires_grad();
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result(
      op, bc->out_shape, std::move(out), {a, b},
      [bc, ai, bi, need_a, need_b, da, db](const TensorImpl& res,
                                           std::span<const double> g) {
        std::vector<std::vector<double>> grads(2);
        const auto& x = ai->data;
        const auto& y = bi->data;
        const std::size_t n = g.size();
        if (need_a) grads[0].assign(x.size(), 0.0);
        if (need_b) grads[1].assign(y.size(), 0.0);
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t i = bc->same_shape ? k : bc->a_index[k];
          const std::size_t j = bc->same_shape ? k : bc->b_index[k];
          if (need_a) grads[0][i] += g[k] * da(x[i], y[j], res.data[k]);
          if (need_b) grads[1][j] += g[k] * db(x[i], y[j], res.data[k]);
        }
        return grads;
      });
}

template <typename Fwd, typename Deriv>
Tensor unary_op(std::string_view op, const Tensor& a, Fwd fwd, Deriv deriv) {
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = fwd(av[k]);
  auto ai = a.impl();
  return make_result(op, a.shape(), std::move(out), {a},
                     [ai, deriv](const TensorImpl& res, std::span<const double> g) {
                       std::vector<std::vector<double>> grads(1);
                       grads[0].resize(g.size());
                       for (std::size_t k = 0; k < g.size(); ++k) {
                         grads[0][k] = g[k] == 0.0 ? 0.0
                                                   : g[k] * deriv(ai->data[k], res.data[k]);
                       }
                       return grads;
                     });
}

// Layout of an axis reduction: outer × extent × inner.
struct AxisLayout {
  std::size_t outer = 1, extent = 1, inner = 1;
  Shape out_shape;
};

AxisLayout axis_layout(std::string_view op, const Shape& shape, std::size_t axis,
                       bool keepdim) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape));
  }
  AxisLayout l;
  for (std::size_t d = 0; d < axis; ++d) l.outer *= shape[d];
  l.extent = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) l.inner *= shape[d];
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (d == axis) {
      if (keepdim) l.out_shape.push_back(1);
    } else {
      l.out_shape.push_back(shape[d]);
    }
  }
  if (l.out_shape.empty()) l.out_shape.push_back(1);
  return l;
}

void require_matrix(std::string_view op, const Tensor& t) {
  if (t.dim() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " +
                     shape_str(t.shape()));
  }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

// Eigen's single-threaded kernels use a fixed blocking for given shapes, so
// results are reproducible run to run.

// C[m×n] = A[m×k] · B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  Map(c, ix(m), ix(n)).noalias() = ConstMap(a, ix(m), ix(k)) * ConstMap(b, ix(k), ix(n));
}

// C[m×n] = A[m×k] · B[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  Map(c, ix(m), ix(n)).noalias() =
      ConstMap(a, ix(m), ix(k)) * ConstMap(b, ix(n), ix(k)).transpose();
}

// C[k×n] = A[m×k]ᵀ · B[m×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  Map(c, ix(k), ix(n)).noalias() =
      ConstMap(a, ix(m), ix(k)).transpose() * ConstMap(b, ix(m), ix(n));
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : Tensor(Shape{1}, {0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (shape.empty()) shape.push_back(1);
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::from_impl(std::shared_ptr<TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::ones(Shape shape, bool requires_grad) {
  return full(std::move(shape), 1.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, {value}, requires_grad);
}

Tensor Tensor::eye(std::size_t n) {
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(d));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> d;
  d.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    d.insert(d.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(d), requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return Tensor({values.size()}, std::vector<double>(values), requires_grad);
}

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(impl_->shape));
  }
  return impl_->shape[axis];
}

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw AutogradError("mutable_data() on a non-leaf tensor");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (dim() != 2 || r >= rows() || c >= cols()) {
    throw ShapeError("at(" + std::to_string(r) + "," + std::to_string(c) +
                     ") out of range for shape " + shape_str(shape()));
  }
  return impl_->data[r * cols() + c];
}

void Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw AutogradError("set_requires_grad on a non-leaf tensor");
  impl_->requires_grad = flag;
  if (!flag) impl_->grad.clear();
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data, false); }

Tensor Tensor::clone() const { return detach(); }

void Tensor::backward() const {
  if (numel() != 1) {
    throw AutogradError("backward() needs a scalar, got shape " + shape_str(shape()));
  }
  if (!impl_->requires_grad) {
    throw AutogradError("backward() on a tensor detached from the tape");
  }
  if (is_leaf()) {
    if (impl_->grad.empty()) impl_->grad.assign(1, 0.0);
    impl_->grad[0] += 1.0;
    return;
  }

  // Collect reachable nodes.
  std::vector<TensorImpl*> order;
  std::unordered_set<const TensorImpl*> seen;
  std::vector<TensorImpl*> stack{impl_.get()};
  seen.insert(impl_.get());
  while (!stack.empty()) {
    TensorImpl* t = stack.back();
    stack.pop_back();
    if (!t->node) continue;
    order.push_back(t);
    for (const auto& in : t->node->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const TensorImpl* x, const TensorImpl* y) {
    return x->node->seq > y->node->seq;
  });

  // Intermediate gradients live only for the duration of this pass.
  std::unordered_map<const TensorImpl*, std::vector<double>> pending;
  pending[impl_.get()] = std::vector<double>{1.0};
  for (TensorImpl* t : order) {
    auto it = pending.find(t);
    if (it == pending.end()) continue;
    std::vector<double> upstream = std::move(it->second);
    pending.erase(it);
    auto grads = t->node->backward(*t, upstream);
    const auto& inputs = t->node->inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      TensorImpl* in = inputs[i].get();
      if (!in->requires_grad || i >= grads.size() || grads[i].empty()) continue;
      if (grads[i].size() != in->data.size()) {
        throw AutogradError(std::string(t->node->op) + ": backward produced " +
                            std::to_string(grads[i].size()) + " values for input of shape " +
                            shape_str(in->shape));
      }
      std::vector<double>& dst = in->node ? pending[in] : in->grad;
      if (dst.empty()) {
        dst = std::move(grads[i]);
      } else {
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += grads[i][k];
      }
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_mode_enabled() { return t_grad_enabled; }

Tensor make_result(std::string_view op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  Tensor out(std::move(shape), std::move(data), false);
  if (!t_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto node = std::make_shared<TapeNode>();
  node->op = op;
  node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  node->inputs.reserve(inputs.size());
  for (const auto& in : inputs) node->inputs.push_back(in.impl());
  node->backward = std::move(backward);
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data()) {
    if (v == 0.0) throw DomainError("div: division by exact zero");
  }
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) {
  return unary_op("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor pow(const Tensor& a, double exponent) {
  if (exponent != std::floor(exponent)) {
    for (double v : a.data()) {
      if (v < 0.0) throw DomainError("pow: negative base with non-integer exponent");
    }
  }
  Tensor out = unary_op(
      "pow", a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
  check_finite("pow", out.data());
  return out;
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.data()) {
    if (v < 0.0) throw DomainError("sqrt: negative input");
  }
  return unary_op(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor exp(const Tensor& a) {
  Tensor out = unary_op(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
  check_finite("exp", out.data());
  return out;
}

Tensor log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive input");
  }
  return unary_op(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& a) { return maximum(a, 0.0); }

Tensor maximum(const Tensor& a, double floor) {
  return unary_op(
      "maximum", a, [floor](double x) { return x > floor ? x : floor; },
      [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op("add_scalar", a, [c](double x) { return x + c; },
                  [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return unary_op("mul_scalar", a, [c](double x) { return x * c; },
                  [c](double, double) { return c; });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  const std::size_t n = a.numel();
  return make_result("sum", Shape{1}, {acc}, {a},
                     [n](const TensorImpl&, std::span<const double> g) {
                       return std::vector<std::vector<double>>{std::vector<double>(n, g[0])};
                     });
}

Tensor mean(const Tensor& a) {
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum(const Tensor& a, std::size_t axis, bool keepdim) {
  const AxisLayout l = axis_layout("sum", a.shape(), axis, keepdim);
  std::vector<double> out(l.outer * l.inner, 0.0);
  auto av = a.data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t e = 0; e < l.extent; ++e) {
      const double* src = av.data() + (o * l.extent + e) * l.inner;
      double* dst = out.data() + o * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) dst[i] += src[i];
    }
  }
  return make_result("sum_axis", l.out_shape, std::move(out), {a},
                     [l](const TensorImpl&, std::span<const double> g) {
                       std::vector<double> ga(l.outer * l.extent * l.inner);
                       for (std::size_t o = 0; o < l.outer; ++o)
                         for (std::size_t e = 0; e < l.extent; ++e)
                           for (std::size_t i = 0; i < l.inner; ++i)
                             ga[(o * l.extent + e) * l.inner + i] = g[o * l.inner + i];
                       return std::vector<std::vector<double>>{std::move(ga)};
                     });
}

Tensor mean(const Tensor& a, std::size_t axis, bool keepdim) {
  const double n = static_cast<double>(a.size(axis));
  return mul_scalar(sum(a, axis, keepdim), 1.0 / n);
}

Tensor stddev(const Tensor& a, std::size_t axis, bool keepdim) {
  const AxisLayout l = axis_layout("std", a.shape(), axis, keepdim);
  auto av = a.data();
  const double n = static_cast<double>(l.extent);
  std::vector<double> means(l.outer * l.inner, 0.0);
  std::vector<double> out(l.outer * l.inner, 0.0);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      double m = 0.0;
      for (std::size_t e = 0; e < l.extent; ++e) m += av[(o * l.extent + e) * l.inner + i];
      m /= n;
      double ss = 0.0;
      for (std::size_t e = 0; e < l.extent; ++e) {
        const double d = av[(o * l.extent + e) * l.inner + i] - m;
        ss += d * d;
      }
      means[o * l.inner + i] = m;
      out[o * l.inner + i] = std::sqrt(ss / n);
    }
  }
  auto ai = a.impl();
  return make_result(
      "std", l.out_shape, std::move(out), {a},
      [l, ai, n, means = std::move(means)](const TensorImpl& res,
                                           std::span<const double> g) {
        // d std / d x_e = (x_e - mean) / (n * std)
        std::vector<double> ga(ai->data.size(), 0.0);
        for (std::size_t o = 0; o < l.outer; ++o) {
          for (std::size_t i = 0; i < l.inner; ++i) {
            const std::size_t r = o * l.inner + i;
            const double s = res.data[r];
            if (s == 0.0 || g[r] == 0.0) continue;
            const double scale = g[r] / (n * s);
            for (std::size_t e = 0; e < l.extent; ++e) {
              const std::size_t k = (o * l.extent + e) * l.inner + i;
              ga[k] = scale * (ai->data[k] - means[r]);
            }
          }
        }
        return std::vector<std::vector<double>>{std::move(ga)};
      });
}

// ---------------------------------------------------------------------------
// Shape ops and matmul

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  auto av = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return make_result("transpose", Shape{c, r}, std::move(out), {a},
                     [r, c](const TensorImpl&, std::span<const double> g) {
                       std::vector<double> ga(r * c);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] = g[j * r + i];
                       return std::vector<std::vector<double>>{std::move(ga)};
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {a},
                     [](const TensorImpl&, std::span<const double> g) {
                       return std::vector<std::vector<double>>{
                           std::vector<double>(g.begin(), g.end())};
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + " · " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  const bool need_a = a.requires_grad();
  const bool need_b = b.requires_grad();
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result("matmul", Shape{m, n}, std::move(out), {a, b},
                     [ai, bi, m, k, n, need_a, need_b](const TensorImpl&,
                                                       std::span<const double> g) {
                       std::vector<std::vector<double>> grads(2);
                       if (need_a) {  // dA = dC · Bᵀ
                         grads[0].resize(m * k);
                         gemm_nt(g.data(), bi->data.data(), grads[0].data(), m, n, k);
                       }
                       if (need_b) {  // dB = Aᵀ · dC
                         grads[1].resize(k * n);
                         gemm_tn(ai->data.data(), g.data(), grads[1].data(), m, k, n);
                       }
                       return grads;
                     });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator-(const Tensor& a) { return neg(a); }
Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
Tensor operator-(const Tensor& a, double c) { return add_scalar(a, -c); }
Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }
Tensor operator/(const Tensor& a, double c) {
  if (c == 0.0) throw DomainError("div: division by exact zero");
  return mul_scalar(a, 1.0 / c);
}

}  // namespace btlab
