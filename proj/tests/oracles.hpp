#pragma once

// Definition-level reference implementations used only by tests. These are
// written from the textbook formulas with plain loops and share no code with
// the library's tensor path.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, std::vector<double>(cols));
  for (auto& r : m)
    for (auto& v : r) v = dist(gen);
  return m;
}

inline std::vector<double> flatten(const Matrix& m) {
  std::vector<double> out;
  for (const auto& r : m) out.insert(out.end(), r.begin(), r.end());
  return out;
}

inline Matrix unflatten(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  Matrix m(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m[i][j] = v[i * cols + j];
  return m;
}

/// Determinant by Laplace (cofactor) expansion along the first row.
inline double det_cofactor(const Matrix& a) {
  const std::size_t n = a.size();
  if (n == 1) return a[0][0];
  if (n == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
  double det = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    Matrix minor;
    for (std::size_t i = 1; i < n; ++i) {
      std::vector<double> row;
      for (std::size_t j = 0; j < n; ++j)
        if (j != c) row.push_back(a[i][j]);
      minor.push_back(row);
    }
    det += ((c % 2) ? -1.0 : 1.0) * a[0][c] * det_cofactor(minor);
  }
  return det;
}

inline Matrix spd_matrix(std::size_t n, std::uint64_t seed) {
  const Matrix b = random_matrix(n, n, seed);
  Matrix a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) a[i][j] += b[i][k] * b[j][k];
      if (i == j) a[i][j] += 0.5;
    }
  return a;
}

/// Pearson cross-correlation by direct summation over centered columns:
/// C_ij = Σ_b a_bi b_bj / (sqrt(Σ_b a_bi²) sqrt(Σ_b b_bj²)).
inline Matrix cross_correlation_sum(const Matrix& za, const Matrix& zb) {
  const std::size_t n = za.size(), d = za[0].size();
  auto center = [&](const Matrix& z) {
    Matrix c = z;
    for (std::size_t j = 0; j < d; ++j) {
      double m = 0.0;
      for (std::size_t b = 0; b < n; ++b) m += z[b][j];
      m /= static_cast<double>(n);
      for (std::size_t b = 0; b < n; ++b) c[b][j] -= m;
    }
    return c;
  };
  const Matrix a = center(za), b = center(zb);
  Matrix c(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double num = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        num += a[k][i] * b[k][j];
        na += a[k][i] * a[k][i];
        nb += b[k][j] * b[k][j];
      }
      c[i][j] = num / (std::sqrt(na) * std::sqrt(nb));
    }
  return c;
}

struct Terms {
  double invariance = 0.0;
  double redundancy = 0.0;
};

inline Terms barlow_terms(const Matrix& c) {
  Terms t;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i == j)
        t.invariance += (1.0 - c[i][i]) * (1.0 - c[i][i]);
      else
        t.redundancy += c[i][j] * c[i][j];
    }
  return t;
}

inline double barlow_loss(const Matrix& c, double lambda) {
  const Terms t = barlow_terms(c);
  return t.invariance + lambda * t.redundancy;
}

inline double cross_entropy_temp(const Matrix& c, double tau, double lambda) {
  double on = 0.0, off = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i == j)
        on += std::exp(c[i][i] / tau);
      else
        off += std::exp(std::max(c[i][j], 0.0) / tau);
    }
  return -std::log(on) + lambda * std::log(off);
}

inline double cosine(const std::vector<double>& x, const std::vector<double>& y) {
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  return xy / (std::sqrt(xx) * std::sqrt(yy));
}

inline double info_nce(const Matrix& za, const Matrix& zb, double tau) {
  const std::size_t n = za.size();
  double loss = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    loss -= cosine(za[b], zb[b]) / tau;
    double s = 0.0;
    for (std::size_t b2 = 0; b2 < n; ++b2)
      if (b2 != b) s += std::exp(cosine(za[b], zb[b2]) / tau);
    loss += std::log(s);
  }
  return loss;
}

inline double cosine_alignment(const Matrix& za, const Matrix& zb) {
  double loss = 0.0;
  for (std::size_t b = 0; b < za.size(); ++b) loss -= cosine(za[b], zb[b]);
  return loss;
}

/// 1/N covariance by explicit loops.
inline Matrix covariance(const Matrix& z) {
  const std::size_t n = z.size(), d = z[0].size();
  std::vector<double> m(d, 0.0);
  for (const auto& row : z)
    for (std::size_t j = 0; j < d; ++j) m[j] += row[j] / static_cast<double>(n);
  Matrix c(d, std::vector<double>(d, 0.0));
  for (const auto& row : z)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        c[i][j] += (row[i] - m[i]) * (row[j] - m[j]) / static_cast<double>(n);
  return c;
}

inline double imax(const Matrix& za, const Matrix& zb, double jitter) {
  Matrix diff = za, summ = za;
  for (std::size_t b = 0; b < za.size(); ++b)
    for (std::size_t j = 0; j < za[0].size(); ++j) {
      diff[b][j] = za[b][j] - zb[b][j];
      summ[b][j] = za[b][j] + zb[b][j];
    }
  Matrix cd = covariance(diff), cs = covariance(summ);
  for (std::size_t i = 0; i < cd.size(); ++i) {
    cd[i][i] += jitter;
    cs[i][i] += jitter;
  }
  return std::log(det_cofactor(cd)) - std::log(det_cofactor(cs));
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(Matrix a, int sweeps = 100) {
  const std::size_t n = a.size();
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - sn * akq;
          a[k][q] = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - sn * aqk;
          a[q][k] = sn * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  return ev;
}

/// x Wᵀ + b with W stored out × in.
inline Matrix linear(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
  Matrix y(x.size(), std::vector<double>(w.size(), 0.0));
  for (std::size_t n = 0; n < x.size(); ++n)
    for (std::size_t o = 0; o < w.size(); ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x[n].size(); ++i) acc += x[n][i] * w[o][i];
      y[n][o] = acc + (b.empty() ? 0.0 : b[o]);
    }
  return y;
}

/// Batch-statistics normalization: (x - mean) / max(std, eps), population std.
inline Matrix batch_norm_train(const Matrix& x, double eps) {
  const std::size_t n = x.size(), d = x[0].size();
  Matrix y = x;
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t b = 0; b < n; ++b) m += x[b][j];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t b = 0; b < n; ++b) v += (x[b][j] - m) * (x[b][j] - m);
    const double s = std::max(std::sqrt(v / static_cast<double>(n)), eps);
    for (std::size_t b = 0; b < n; ++b) y[b][j] = (x[b][j] - m) / s;
  }
  return y;
}

inline Matrix relu(Matrix x) {
  for (auto& r : x)
    for (auto& v : r) v = v > 0.0 ? v : 0.0;
  return x;
}

}  // namespace oracle
