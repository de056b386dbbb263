#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "btlab/tensor.hpp"

namespace btlab {

inline constexpr double kDefaultJitter = 1e-6;

/// Lower-triangular Cholesky factor L of S + jitter·I, where S is the
/// symmetric part (A + Aᵀ)/2 of the row-major n×n input.
/// Throws FactorizationError carrying the first non-positive pivot.
std::vector<double> cholesky(std::span<const double> a, std::size_t n, double jitter);

struct InverseLogdet {
  Tensor inverse;  // (S + jitter·I)⁻¹, detached
  Tensor logdet;   // scalar log|S + jitter·I|, differentiable w.r.t. the input
};

/// Inverse and log-determinant through one Cholesky factorization.
/// The gradient of logdet w.r.t. A is the (symmetric) inverse.
InverseLogdet inverse_and_logdet(const Tensor& a, double jitter = kDefaultJitter);

/// Differentiable log|S + jitter·I| (shorthand for inverse_and_logdet().logdet).
Tensor logdet(const Tensor& a, double jitter = kDefaultJitter);

/// Batch covariance (1/N, mean-centered) of an N×D matrix, differentiable.
Tensor covariance(const Tensor& z);

}  // namespace btlab
