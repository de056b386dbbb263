#include "btlab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace btlab {

namespace {

double eval_scalar(const ScalarFunction& f, const std::vector<Tensor>& xs) {
  const Tensor y = f(xs);
  if (y.numel() != 1) {
    throw ShapeError("grad_check: function must return a scalar, got " + shape_str(y.shape()));
  }
  const double v = y.item();
  if (!std::isfinite(v)) throw DomainError("grad_check: non-finite forward value");
  return v;
}

}  // namespace

GradCheckReport grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                           double eps, double tol) {
  if (!(eps > 0.0)) throw DomainError("grad_check: eps must be > 0");

  std::vector<Tensor> xs;
  xs.reserve(inputs.size());
  for (const auto& in : inputs) {
    Tensor copy = in.clone();
    copy.set_requires_grad(true);
    xs.push_back(copy);
  }

  const Tensor y = f(xs);
  if (y.numel() != 1) {
    throw ShapeError("grad_check: function must return a scalar, got " + shape_str(y.shape()));
  }
  if (!std::isfinite(y.item())) throw DomainError("grad_check: non-finite forward value");
  if (y.requires_grad()) y.backward();

  GradCheckReport report;
  report.eps = eps;
  report.tol = tol;
  report.max_rel_error.assign(xs.size(), 0.0);

  NoGradGuard no_grad;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const std::vector<double> analytic = xs[t].grad();
    auto values = xs[t].mutable_data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double orig = values[k];
      values[k] = orig + eps;
      const double fp = eval_scalar(f, xs);
      values[k] = orig - eps;
      const double fm = eval_scalar(f, xs);
      values[k] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[k]), std::abs(fd), 1e-12});
      const double rel = std::abs(analytic[k] - fd) / denom;
      report.max_rel_error[t] = std::max(report.max_rel_error[t], rel);
    }
    report.max_error = std::max(report.max_error, report.max_rel_error[t]);
  }
  report.passed = report.max_error < tol;
  return report;
}

}  // namespace btlab
