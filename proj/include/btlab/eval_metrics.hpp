#pragma once

// Linear probe, embedding diagnostics and the conditional entropy estimate.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "btlab/data_aug.hpp"
#include "btlab/models.hpp"
#include "btlab/tensor.hpp"

namespace btlab {

struct ProbeConfig {
  std::size_t epochs = 100;
  double lr = 0.3;
  double weight_decay = 1e-6;
  double momentum = 0.9;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  /// 0 means max label + 1 over both splits.
  std::size_t num_classes = 0;
  void validate() const;
};

struct ProbeResult {
  double top1 = 0.0;
  std::vector<double> per_class_accuracy;  // 0 for classes absent from the test split
  std::vector<std::size_t> per_class_count;
  std::size_t epochs = 0;
  double final_loss = 0.0;
};

/// Multinomial logistic regression on features standardized with the
/// training split's mean and std (constant features map to 0). Trained by
/// minibatch SGD with momentum and a cosine learning-rate decay; weight decay
/// applies to the weights, not the bias. Inputs are read as plain values.
ProbeResult linear_probe(const Tensor& train_x, const std::vector<int>& train_y,
                         const Tensor& test_x, const std::vector<int>& test_y,
                         const ProbeConfig& config = {});

struct EmbeddingDiagnostics {
  std::vector<double> feature_std;  // population std per feature
  double min_std = 0.0;
  double mean_abs_offdiag = 0.0;
  double mean_diag = 0.0;
  /// ½·log det((R + jI)/(1 + j)), R the correlation matrix. At most 0.
  double entropy_proxy = 0.0;
  /// exp of the Shannon entropy of the normalized correlation eigenvalues.
  double effective_rank = 0.0;
  std::size_t collapsed = 0;
};

inline constexpr double kDiagnosticJitter = 1e-6;
inline constexpr double kCollapseStd = 1e-5;

/// Statistics of one embedding matrix Z (N × D, N ≥ 2). Off-diagonal and
/// diagonal means are taken over Z's own correlation matrix.
EmbeddingDiagnostics embedding_diagnostics(const Tensor& z, double jitter = kDiagnosticJitter);

/// Twin version: the off-diagonal and diagonal means come from the
/// cross-correlation of ZA and ZB; std, entropy proxy and effective rank
/// from ZA; min_std and collapsed count cover both branches.
EmbeddingDiagnostics embedding_diagnostics(const Tensor& za, const Tensor& zb,
                                           double jitter = kDiagnosticJitter);

/// Pearson correlation matrix of Z's columns; collapsed columns (std ≤
/// kCollapseStd) give zero rows and columns.
std::vector<double> correlation_matrix(const Tensor& z, std::size_t* collapsed = nullptr);

/// Effective rank of a symmetric PSD matrix given row-major.
double effective_rank(const std::vector<double>& sym, std::size_t d);

struct ConditionalDiagnostics {
  std::vector<double> per_sample_logdet;
  double mean_logdet = 0.0;
  std::size_t views = 0;
};

/// For every image, embeds K augmented views (even k from view A's
/// probability table, odd k from view B's) in eval mode, forms the D × D
/// population covariance across views and records logdet(cov + jitter·I).
ConditionalDiagnostics conditional_entropy_diagnostic(SiameseModel& model,
                                                      const std::vector<Image>& images,
                                                      const AugmentationPolicy& policy,
                                                      std::size_t k, std::uint64_t seed,
                                                      double jitter = kDiagnosticJitter);

}  // namespace btlab
