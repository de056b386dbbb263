#pragma once

#include <functional>
#include <string>
#include <vector>

#include "btlab/tensor.hpp"

namespace btlab {

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckReport {
  std::vector<double> max_rel_error;  // one entry per input
  double max_error = 0.0;
  double eps = 0.0;
  double tol = 0.0;
  bool passed = false;
};

/// Compares reverse-mode gradients of `f` against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate. The relative
/// error of each coordinate is |a - fd| / max(|a|, |fd|, 1e-12).
/// The inputs are copied; the caller's tensors are left untouched.
GradCheckReport grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                           double eps = 1e-5, double tol = 1e-4);

struct GradCheckCase {
  std::string name;
  GradCheckReport report;
};

/// Every differentiable tensor op and every loss (all variants) on seeded
/// inputs of up to 8 × 8, `seeds` shapes each.
std::vector<GradCheckCase> gradcheck_suite(double eps = 1e-5, double tol = 1e-4,
                                           std::size_t seeds = 4);

}  // namespace btlab
