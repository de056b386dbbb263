#pragma once

// MLP encoder, projector and optional predictor, applied as twin networks
// with shared parameters.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "btlab/tensor.hpp"

namespace btlab {

enum class Mode { train, eval };

enum class Asymmetry { none, stop_grad, predictor, both };

std::string_view to_string(Asymmetry a);
Asymmetry asymmetry_from_string(std::string_view name);

/// Role of a parameter for optimizer grouping: biases and batch-norm
/// affine parameters form the group excluded from LARS and weight decay.
enum class ParamKind { weight, bias, norm };

struct NamedParameter {
  std::string name;
  Tensor* tensor;  // view into the owning model
  ParamKind kind;
};

struct NamedBuffer {
  std::string name;
  std::vector<double>* values;
};

class Linear {
 public:
  Linear(std::size_t in, std::size_t out, bool use_bias);

  /// y = x Wᵀ + b
  Tensor forward(const Tensor& x) const;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  bool use_bias() const { return use_bias_; }

  Tensor weight;  // out × in
  Tensor bias;    // out (unused when use_bias is false)

 private:
  std::size_t in_, out_;
  bool use_bias_;
};

/// Batch normalization with population statistics. In train mode the
/// output is standardize_batch(x) · gamma + beta; features whose batch std is
/// at most eps are flagged (see last_collapsed()). Running statistics are
/// exponential averages: running = momentum · running + (1 - momentum) · batch.
class BatchNorm {
 public:
  explicit BatchNorm(std::size_t features, double momentum = 0.9, double eps = 1e-5);

  Tensor forward(const Tensor& x, Mode mode, bool update_stats = true);

  std::size_t features() const { return features_; }
  std::size_t last_collapsed() const { return last_collapsed_; }

  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;

 private:
  std::size_t features_;
  double momentum_;
  double eps_;
  std::size_t last_collapsed_ = 0;
};

/// Linear layers; every layer but the last is followed by optional
/// batch norm and a ReLU.
class Mlp {
 public:
  Mlp(std::size_t in, const std::vector<std::size_t>& widths, bool batch_norm, bool use_bias);

  Tensor forward(const Tensor& x, Mode mode, bool update_stats = true);

  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }
  std::vector<Linear>& layers() { return layers_; }
  std::vector<BatchNorm>& norms() { return norms_; }
  const std::vector<Linear>& layers() const { return layers_; }
  std::size_t collapsed_features() const;

  void collect(const std::string& prefix, std::vector<NamedParameter>& params,
               std::vector<NamedBuffer>& buffers);

 private:
  std::vector<Linear> layers_;
  std::vector<BatchNorm> norms_;
  bool batch_norm_;
};

struct ModelConfig {
  std::size_t input_dim = 64;
  std::vector<std::size_t> encoder_widths{128, 128};
  std::size_t representation_dim = 64;
  bool encoder_bn = false;
  std::vector<std::size_t> projector_widths{256, 256, 256};
  bool projector_bn = true;
  /// Empty means {256, D} with D the projector output width.
  std::vector<std::size_t> predictor_widths;
  Asymmetry asymmetry = Asymmetry::none;
  bool use_bias = true;
  double bn_momentum = 0.9;

  std::size_t embedding_dim() const { return projector_widths.back(); }
  std::vector<std::size_t> resolved_predictor_widths() const;
  bool has_predictor() const {
    return asymmetry == Asymmetry::predictor || asymmetry == Asymmetry::both;
  }
  bool stop_gradient() const {
    return asymmetry == Asymmetry::stop_grad || asymmetry == Asymmetry::both;
  }
  void validate() const;
};

struct TwinOutput {
  Tensor za;
  Tensor zb;
};

class SiameseModel {
 public:
  /// He-normal weights (std sqrt(2 / fan_in)), zero biases, gamma 1, beta 0.
  /// Fully determined by (config, seed).
  static SiameseModel init(const ModelConfig& config, std::uint64_t seed);

  /// Representations (encoder output), N × representation_dim.
  Tensor encode(const Tensor& batch, Mode mode, bool update_stats = true);
  /// Embeddings (projector output), N × D.
  Tensor project(const Tensor& representations, Mode mode, bool update_stats = true);
  Tensor predict(const Tensor& embeddings, Mode mode, bool update_stats = true);
  /// encode → project, with no predictor.
  Tensor embed(const Tensor& batch, Mode mode, bool update_stats = true);

  /// Both views through the shared network. With stop_grad, ZB is computed
  /// off the tape; with predictor, ZA also passes through the predictor.
  TwinOutput twins_forward(const Tensor& ya, const Tensor& yb, Mode mode,
                           bool update_stats = true);

  const ModelConfig& config() const { return config_; }
  Mlp& encoder() { return encoder_; }
  Mlp& projector() { return projector_; }
  std::optional<Mlp>& predictor() { return predictor_; }

  /// Parameter views in a fixed order; valid while the model is alive and
  /// not moved.
  std::vector<NamedParameter> parameters();
  std::vector<NamedBuffer> buffers();
  std::size_t projector_collapsed_features() const { return projector_.collapsed_features(); }

 private:
  explicit SiameseModel(const ModelConfig& config);

  ModelConfig config_;
  Mlp encoder_;
  Mlp projector_;
  std::optional<Mlp> predictor_;
};

}  // namespace btlab
