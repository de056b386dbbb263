#include "btlab/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>

#include "btlab/linalg.hpp"

namespace btlab {

namespace {

constexpr std::array<std::pair<LossVariant, std::string_view>, 9> kVariantNames{{
    {LossVariant::barlow_twins, "barlow_twins"},
    {LossVariant::only_invariance, "only_invariance"},
    {LossVariant::only_redundancy, "only_redundancy"},
    {LossVariant::feature_dim_norm, "feature_dim_norm"},
    {LossVariant::cross_covariance, "cross_covariance"},
    {LossVariant::cross_entropy_temp, "cross_entropy_temp"},
    {LossVariant::info_nce, "info_nce"},
    {LossVariant::cosine, "cosine"},
    {LossVariant::imax, "imax"},
}};

void require_pair(std::string_view who, const Tensor& za, const Tensor& zb) {
  if (za.dim() != 2 || za.shape() != zb.shape()) {
    throw ShapeError(std::string(who) + ": embeddings must be matching N×D matrices, got " +
                     shape_str(za.shape()) + " and " + shape_str(zb.shape()));
  }
}

Tensor off_diagonal_mask(std::size_t d) {
  std::vector<double> m(d * d, 1.0);
  for (std::size_t i = 0; i < d; ++i) m[i * d + i] = 0.0;
  return Tensor({d, d}, std::move(m));
}

// log Σ_{mask=1} exp(x), shifted by the (constant) masked maximum.
Tensor masked_logsumexp(const Tensor& x, const Tensor& mask) {
  double m = -std::numeric_limits<double>::infinity();
  auto xv = x.data();
  auto mv = mask.data();
  for (std::size_t k = 0; k < xv.size(); ++k) {
    if (mv[k] != 0.0) m = std::max(m, xv[k]);
  }
  return log(sum(exp(x - m) * mask)) + m;
}

// Row-wise log Σ_{mask=1} exp(x_row), for an N×N matrix. Returns N×1.
Tensor masked_row_logsumexp(const Tensor& x, const Tensor& mask) {
  const std::size_t n = x.rows(), c = x.cols();
  std::vector<double> shift(n, -std::numeric_limits<double>::infinity());
  auto xv = x.data();
  auto mv = mask.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (mv[i * c + j] != 0.0) shift[i] = std::max(shift[i], xv[i * c + j]);
  const Tensor s({n, 1}, shift);
  return log(sum(exp(x - s) * mask, 1, true)) + s;
}

}  // namespace

std::string_view to_string(LossVariant v) {
  for (const auto& [variant, name] : kVariantNames) {
    if (variant == v) return name;
  }
  return "unknown";
}

LossVariant loss_variant_from_string(std::string_view name) {
  for (const auto& [variant, n] : kVariantNames) {
    if (n == name) return variant;
  }
  throw ConfigError("unknown loss variant '" + std::string(name) + "'");
}

const std::vector<LossVariant>& all_loss_variants() {
  static const std::vector<LossVariant> all = [] {
    std::vector<LossVariant> v;
    for (const auto& [variant, name] : kVariantNames) v.push_back(variant);
    return v;
  }();
  return all;
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("loss lambda must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("loss temperature must be > 0");
  if (!(epsilon >= 0.0)) throw ConfigError("loss epsilon must be >= 0");
  if (!(jitter >= 0.0)) throw ConfigError("loss jitter must be >= 0");
}

Standardized standardize_batch(const Tensor& z, double epsilon) {
  if (z.dim() != 2) {
    throw ShapeError("standardize_batch: expected N×D, got " + shape_str(z.shape()));
  }
  const std::size_t n = z.rows(), d = z.cols();
  if (n < 2) throw ShapeError("standardize_batch: need at least 2 samples, got 1");
  if (epsilon < 0.0) throw DomainError("standardize_batch: epsilon must be >= 0");

  auto zv = z.data();
  const double nn = static_cast<double>(n);
  std::vector<double> mean(d, 0.0), divisor(d, 0.0);
  Standardized result;
  result.collapsed.assign(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t b = 0; b < n; ++b) m += zv[b * d + j];
    m /= nn;
    // One refinement pass: exact for constant columns.
    double corr = 0.0;
    for (std::size_t b = 0; b < n; ++b) corr += zv[b * d + j] - m;
    m += corr / nn;
    double ss = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const double dev = zv[b * d + j] - m;
      ss += dev * dev;
    }
    const double s = std::sqrt(ss / nn);
    mean[j] = m;
    if (s > epsilon) {
      divisor[j] = s;
    } else {
      if (epsilon == 0.0) {
        throw DomainError("standardize_batch: feature " + std::to_string(j) +
                          " has zero variance and epsilon is 0");
      }
      divisor[j] = epsilon;
      result.collapsed[j] = true;
      ++result.collapsed_count;
    }
  }

  std::vector<double> out(n * d);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t j = 0; j < d; ++j)
      out[b * d + j] = (zv[b * d + j] - mean[j]) / divisor[j];

  auto collapsed = result.collapsed;
  result.values = make_result(
      "standardize", Shape{n, d}, std::move(out), {z},
      [n, d, divisor = std::move(divisor), collapsed = std::move(collapsed)](
          const TensorImpl& res, std::span<const double> g) {
        // Non-collapsed column: dx = (g - mean(g) - x̂ mean(g x̂)) / s.
        // Collapsed column (fixed divisor eps): dx = (g - mean(g)) / eps.
        const double nn = static_cast<double>(n);
        std::vector<double> gx(n * d);
        for (std::size_t j = 0; j < d; ++j) {
          double gm = 0.0, gxm = 0.0;
          for (std::size_t b = 0; b < n; ++b) {
            gm += g[b * d + j];
            gxm += g[b * d + j] * res.data[b * d + j];
          }
          gm /= nn;
          gxm /= nn;
          const double inv = 1.0 / divisor[j];
          for (std::size_t b = 0; b < n; ++b) {
            const double xh = collapsed[j] ? 0.0 : res.data[b * d + j];
            gx[b * d + j] = inv * (g[b * d + j] - gm - xh * gxm);
          }
        }
        return std::vector<std::vector<double>>{std::move(gx)};
      });
  return result;
}

CrossCorrelation cross_correlation(const Tensor& za, const Tensor& zb, double epsilon) {
  require_pair("cross_correlation", za, zb);
  const Standardized a = standardize_batch(za, epsilon);
  const Standardized b = standardize_batch(zb, epsilon);
  CrossCorrelation c;
  c.batch_size = za.rows();
  c.epsilon = epsilon;
  c.collapsed_a = a.collapsed_count;
  c.collapsed_b = b.collapsed_count;
  c.values = matmul(transpose(a.values), b.values) / static_cast<double>(za.rows());
  return c;
}

LossBreakdown barlow_twins_loss(const Tensor& c, double lambda) {
  if (c.dim() != 2 || c.rows() != c.cols()) {
    throw ShapeError("barlow_twins_loss: C must be square, got " + shape_str(c.shape()));
  }
  const std::size_t d = c.rows();
  const Tensor eye = Tensor::eye(d);
  const Tensor sq = pow(c - eye, 2.0);
  LossBreakdown out;
  out.invariance = sum(sq * eye);
  out.redundancy = sum(sq * off_diagonal_mask(d));
  out.redundancy_weight = lambda;
  out.total = out.invariance + out.redundancy * lambda;
  return out;
}

LossBreakdown cross_entropy_temp_loss(const Tensor& c, double tau, double lambda) {
  if (c.dim() != 2 || c.rows() != c.cols()) {
    throw ShapeError("cross_entropy_temp_loss: C must be square, got " + shape_str(c.shape()));
  }
  if (!(tau > 0.0)) throw DomainError("cross_entropy_temp_loss: tau must be > 0");
  const std::size_t d = c.rows();
  if (d < 2) throw ShapeError("cross_entropy_temp_loss: needs D >= 2 for off-diagonal terms");
  const Tensor eye = Tensor::eye(d);
  LossBreakdown out;
  out.invariance = -masked_logsumexp(c / tau, eye);
  out.redundancy = masked_logsumexp(maximum(c, 0.0) / tau, off_diagonal_mask(d));
  out.redundancy_weight = lambda;
  out.total = out.invariance + out.redundancy * lambda;
  return out;
}

Tensor normalize_rows(const Tensor& z, std::string_view who) {
  const Tensor norms = sqrt(sum(z * z, 1, true));
  for (std::size_t b = 0; b < norms.numel(); ++b) {
    if (norms.at(b) == 0.0) {
      throw DomainError(std::string(who) + ": sample " + std::to_string(b) + " has zero norm");
    }
  }
  return z / norms;
}

LossBreakdown info_nce_breakdown(const Tensor& za, const Tensor& zb, double tau) {
  require_pair("info_nce_loss", za, zb);
  if (za.rows() < 2) throw ShapeError("info_nce_loss: needs at least 2 samples");
  if (!(tau > 0.0)) throw DomainError("info_nce_loss: tau must be > 0");
  const std::size_t n = za.rows();
  const Tensor ua = normalize_rows(za, "info_nce_loss");
  const Tensor ub = normalize_rows(zb, "info_nce_loss");
  const Tensor sim = matmul(ua, transpose(ub)) / tau;  // N×N
  const Tensor eye = Tensor::eye(n);
  LossBreakdown out;
  out.invariance = -sum(sim * eye);
  out.redundancy = sum(masked_row_logsumexp(sim, off_diagonal_mask(n)));
  out.redundancy_weight = 1.0;
  out.total = out.invariance + out.redundancy;
  return out;
}

Tensor info_nce_loss(const Tensor& za, const Tensor& zb, double tau) {
  return info_nce_breakdown(za, zb, tau).total;
}

Tensor cosine_alignment_loss(const Tensor& za, const Tensor& zb) {
  require_pair("cosine_alignment_loss", za, zb);
  const Tensor ua = normalize_rows(za, "cosine_alignment_loss");
  const Tensor ub = normalize_rows(zb, "cosine_alignment_loss");
  return -sum(ua * ub);
}

LossBreakdown imax_breakdown(const Tensor& za, const Tensor& zb, double jitter) {
  require_pair("imax_loss", za, zb);
  auto guarded_logdet = [jitter](const Tensor& cov, const char* which) {
    try {
      return logdet(cov, jitter);
    } catch (const FactorizationError& e) {
      throw FactorizationError(e.pivot(), std::string("imax_loss: covariance of the ") + which +
                                              " failed: " + e.what());
    }
  };
  LossBreakdown out;
  out.invariance = guarded_logdet(covariance(za - zb), "difference");
  out.redundancy = guarded_logdet(covariance(za + zb), "sum");
  out.redundancy_weight = -1.0;
  out.total = out.invariance - out.redundancy;
  return out;
}

Tensor imax_loss(const Tensor& za, const Tensor& zb, double jitter) {
  return imax_breakdown(za, zb, jitter).total;
}

LossBreakdown compute_loss(const Tensor& za, const Tensor& zb, const LossConfig& config) {
  config.validate();
  require_pair("compute_loss", za, zb);
  const double eps = config.epsilon;
  switch (config.variant) {
    case LossVariant::barlow_twins:
      return barlow_twins_loss(cross_correlation(za, zb, eps), config.lambda);
    case LossVariant::only_invariance: {
      LossBreakdown full = barlow_twins_loss(cross_correlation(za, zb, eps), config.lambda);
      full.redundancy = Tensor::scalar(0.0);
      full.total = full.invariance;
      return full;
    }
    case LossVariant::only_redundancy: {
      LossBreakdown full = barlow_twins_loss(cross_correlation(za, zb, eps), config.lambda);
      full.invariance = Tensor::scalar(0.0);
      full.total = full.redundancy * config.lambda;
      return full;
    }
    case LossVariant::feature_dim_norm: {
      // Batch standardization, then unit rows (no mean subtraction), then
      // the 1/N covariance of the result.
      const Tensor ua = normalize_rows(standardize_batch(za, eps).values, "feature_dim_norm");
      const Tensor ub = normalize_rows(standardize_batch(zb, eps).values, "feature_dim_norm");
      const Tensor c = matmul(transpose(ua), ub) / static_cast<double>(za.rows());
      return barlow_twins_loss(c, config.lambda);
    }
    case LossVariant::cross_covariance: {
      const Tensor ca = za - mean(za, 0, true);
      const Tensor cb = zb - mean(zb, 0, true);
      const Tensor c = matmul(transpose(ca), cb) / static_cast<double>(za.rows());
      return barlow_twins_loss(c, config.lambda);
    }
    case LossVariant::cross_entropy_temp:
      return cross_entropy_temp_loss(cross_correlation(za, zb, eps).values, config.temperature,
                                     config.lambda);
    case LossVariant::info_nce:
      return info_nce_breakdown(za, zb, config.temperature);
    case LossVariant::cosine: {
      LossBreakdown out;
      out.invariance = cosine_alignment_loss(za, zb);
      out.redundancy = Tensor::scalar(0.0);
      out.redundancy_weight = 0.0;
      out.total = out.invariance;
      return out;
    }
    case LossVariant::imax:
      return imax_breakdown(za, zb, config.jitter);
  }
  throw ConfigError("compute_loss: unknown loss variant");
}

}  // namespace btlab
