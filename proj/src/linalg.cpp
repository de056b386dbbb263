#include "btlab/linalg.hpp"

#include <cmath>
#include <string>

namespace btlab {

std::vector<double> cholesky(std::span<const double> a, std::size_t n, double jitter) {
  if (a.size() != n * n) {
    throw ShapeError("cholesky: expected " + std::to_string(n * n) + " values, got " +
                     std::to_string(a.size()));
  }
  if (jitter < 0.0) throw DomainError("cholesky: jitter must be >= 0");
  std::vector<double> l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j] + jitter;
    for (std::size_t k = 0; k < j; ++k) d -= l[j * n + k] * l[j * n + k];
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw FactorizationError(j, "cholesky: matrix not positive definite at pivot " +
                                      std::to_string(j) + " (value " + std::to_string(d) +
                                      ")");
    }
    const double ljj = std::sqrt(d);
    l[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = 0.5 * (a[i * n + j] + a[j * n + i]);
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = s / ljj;
    }
  }
  return l;
}

InverseLogdet inverse_and_logdet(const Tensor& a, double jitter) {
  if (a.dim() != 2 || a.rows() != a.cols()) {
    throw ShapeError("inverse_and_logdet: expected a square matrix, got " +
                     shape_str(a.shape()));
  }
  const std::size_t n = a.rows();
  const std::vector<double> l = cholesky(a.data(), n, jitter);

  double ld = 0.0;
  for (std::size_t i = 0; i < n; ++i) ld += std::log(l[i * n + i]);
  ld *= 2.0;

  // L⁻¹ by forward substitution, then A⁻¹ = L⁻ᵀ L⁻¹.
  std::vector<double> linv(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    linv[j * n + j] = 1.0 / l[j * n + j];
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = j; k < i; ++k) s -= l[i * n + k] * linv[k * n + j];
      linv[i * n + j] = s / l[i * n + i];
    }
  }
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = i; k < n; ++k) s += linv[k * n + i] * linv[k * n + j];
      inv[i * n + j] = s;
      inv[j * n + i] = s;
    }
  }

  Tensor inverse({n, n}, inv);
  Tensor logdet_t = make_result(
      "logdet", Shape{1}, {ld}, {a},
      [inv = std::move(inv)](const TensorImpl&, std::span<const double> g) {
        std::vector<double> ga(inv.size());
        for (std::size_t k = 0; k < inv.size(); ++k) ga[k] = g[0] * inv[k];
        return std::vector<std::vector<double>>{std::move(ga)};
      });
  return {std::move(inverse), std::move(logdet_t)};
}

Tensor logdet(const Tensor& a, double jitter) { return inverse_and_logdet(a, jitter).logdet; }

Tensor covariance(const Tensor& z) {
  if (z.dim() != 2) throw ShapeError("covariance: expected N×D, got " + shape_str(z.shape()));
  const Tensor centered = z - mean(z, 0, true);
  return matmul(transpose(centered), centered) / static_cast<double>(z.rows());
}

}  // namespace btlab
