#pragma once

// Redundancy-reduction objective, its ablation variants, and the
// comparison losses (infoNCE, cosine alignment, IMAX).
//
// All functions are differentiable through the tensor tape. Embeddings are
// N×D (batch × feature).

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "btlab/tensor.hpp"

namespace btlab {

inline constexpr double kDefaultLambda = 5e-3;
inline constexpr double kDefaultStandardizeEpsilon = 1e-5;

enum class LossVariant {
  barlow_twins,
  only_invariance,
  only_redundancy,
  feature_dim_norm,
  cross_covariance,
  cross_entropy_temp,
  info_nce,
  cosine,
  imax,
};

std::string_view to_string(LossVariant v);
LossVariant loss_variant_from_string(std::string_view name);
const std::vector<LossVariant>& all_loss_variants();

struct LossConfig {
  LossVariant variant = LossVariant::barlow_twins;
  double lambda = kDefaultLambda;
  double temperature = 0.1;
  double epsilon = kDefaultStandardizeEpsilon;
  double jitter = 1e-6;  // IMAX logdet jitter

  void validate() const;
};

/// total = invariance + redundancy_weight · redundancy.
/// For the redundancy-reduction family redundancy_weight is lambda; the
/// comparison losses fill the two slots with their own pair of terms.
struct LossBreakdown {
  Tensor total;
  Tensor invariance;
  Tensor redundancy;
  double redundancy_weight = 0.0;
};

struct Standardized {
  Tensor values;
  std::vector<bool> collapsed;  // per feature: raw std <= epsilon
  std::size_t collapsed_count = 0;
};

/// Per-feature (column) standardization with population std. Columns whose
/// raw std is at most `epsilon` are centered and divided by epsilon and
/// flagged as collapsed. Requires N >= 2.
Standardized standardize_batch(const Tensor& z, double epsilon = kDefaultStandardizeEpsilon);

struct CrossCorrelation {
  Tensor values;  // D×D
  std::size_t batch_size = 0;
  double epsilon = 0.0;
  std::size_t collapsed_a = 0;
  std::size_t collapsed_b = 0;
};

/// C = Ẑᴬᵀ Ẑᴮ / N with Ẑ the standardized embeddings: the Pearson
/// correlation between every feature of ZA and every feature of ZB.
CrossCorrelation cross_correlation(const Tensor& za, const Tensor& zb,
                                   double epsilon = kDefaultStandardizeEpsilon);

LossBreakdown barlow_twins_loss(const Tensor& c, double lambda = kDefaultLambda);
inline LossBreakdown barlow_twins_loss(const CrossCorrelation& c,
                                       double lambda = kDefaultLambda) {
  return barlow_twins_loss(c.values, lambda);
}

/// -log Σ_i exp(C_ii/τ) + λ log Σ_{i≠j} exp(max(C_ij, 0)/τ).
LossBreakdown cross_entropy_temp_loss(const Tensor& c, double tau, double lambda);

Tensor info_nce_loss(const Tensor& za, const Tensor& zb, double tau);
/// infoNCE split into (similarity term, contrastive term).
LossBreakdown info_nce_breakdown(const Tensor& za, const Tensor& zb, double tau);

/// -Σ_b cos(z^A_b, z^B_b).
Tensor cosine_alignment_loss(const Tensor& za, const Tensor& zb);

/// log|Cov(ZA - ZB) + jI| - log|Cov(ZA + ZB) + jI| with 1/N covariances.
Tensor imax_loss(const Tensor& za, const Tensor& zb, double jitter = 1e-6);
LossBreakdown imax_breakdown(const Tensor& za, const Tensor& zb, double jitter = 1e-6);

/// Dispatch on config.variant. Every variant returns both slots; unused
/// terms are zero.
LossBreakdown compute_loss(const Tensor& za, const Tensor& zb, const LossConfig& config);

/// Rows scaled to unit L2 norm. Throws DomainError on a zero-norm row.
Tensor normalize_rows(const Tensor& z, std::string_view who);

}  // namespace btlab
