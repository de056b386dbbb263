#include "btlab/models.hpp"

#include <cmath>

#include "btlab/losses.hpp"
#include "btlab/rng.hpp"

namespace btlab {

namespace {

void he_init(Linear& layer, Rng rng) {
  const double sd = std::sqrt(2.0 / static_cast<double>(layer.in_features()));
  for (double& w : layer.weight.mutable_data()) w = rng.normal(0.0, sd);
}

}  // namespace

std::string_view to_string(Asymmetry a) {
  switch (a) {
    case Asymmetry::none: return "none";
    case Asymmetry::stop_grad: return "stop_grad";
    case Asymmetry::predictor: return "predictor";
    case Asymmetry::both: return "both";
  }
  return "unknown";
}

Asymmetry asymmetry_from_string(std::string_view name) {
  for (auto a : {Asymmetry::none, Asymmetry::stop_grad, Asymmetry::predictor, Asymmetry::both}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown asymmetry '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

Linear::Linear(std::size_t in, std::size_t out, bool use_bias)
    : weight(Tensor::zeros({out, in}, true)),
      bias(Tensor::zeros({out}, use_bias)),
      in_(in),
      out_(out),
      use_bias_(use_bias) {}

Tensor Linear::forward(const Tensor& x) const {
  if (x.dim() != 2 || x.cols() != in_) {
    throw ShapeError("linear: expected N×" + std::to_string(in_) + " input, got " +
                     shape_str(x.shape()));
  }
  Tensor y = matmul(x, transpose(weight));
  return use_bias_ ? y + bias : y;
}

BatchNorm::BatchNorm(std::size_t features, double momentum, double eps)
    : gamma(Tensor::ones({features}, true)),
      beta(Tensor::zeros({features}, true)),
      running_mean(features, 0.0),
      running_var(features, 1.0),
      features_(features),
      momentum_(momentum),
      eps_(eps) {}

Tensor BatchNorm::forward(const Tensor& x, Mode mode, bool update_stats) {
  if (x.dim() != 2 || x.cols() != features_) {
    throw ShapeError("batch_norm: expected N×" + std::to_string(features_) + " input, got " +
                     shape_str(x.shape()));
  }
  if (mode == Mode::train) {
    if (x.rows() < 2) {
      throw ShapeError("batch_norm: batch statistics need at least 2 samples in train mode");
    }
    Standardized s = standardize_batch(x, eps_);
    last_collapsed_ = s.collapsed_count;
    if (update_stats) {
      const std::size_t n = x.rows();
      auto xv = x.data();
      for (std::size_t j = 0; j < features_; ++j) {
        double m = 0.0;
        for (std::size_t b = 0; b < n; ++b) m += xv[b * features_ + j];
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
          const double d = xv[b * features_ + j] - m;
          v += d * d;
        }
        v /= static_cast<double>(n);
        running_mean[j] = momentum_ * running_mean[j] + (1.0 - momentum_) * m;
        running_var[j] = momentum_ * running_var[j] + (1.0 - momentum_) * v;
      }
    }
    return s.values * gamma + beta;
  }
  std::vector<double> shift(features_), scale(features_);
  for (std::size_t j = 0; j < features_; ++j) {
    shift[j] = running_mean[j];
    scale[j] = 1.0 / std::max(std::sqrt(running_var[j]), eps_);
  }
  const Tensor normalized = (x - Tensor({features_}, shift)) * Tensor({features_}, scale);
  return normalized * gamma + beta;
}

Mlp::Mlp(std::size_t in, const std::vector<std::size_t>& widths, bool batch_norm, bool use_bias)
    : batch_norm_(batch_norm) {
  if (widths.empty()) throw ConfigError("mlp: needs at least one layer");
  std::size_t prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    layers_.emplace_back(prev, widths[i], use_bias);
    if (batch_norm && i + 1 < widths.size()) norms_.emplace_back(widths[i]);
    prev = widths[i];
  }
}

Tensor Mlp::forward(const Tensor& x, Mode mode, bool update_stats) {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) {
      if (batch_norm_) h = norms_[i].forward(h, mode, update_stats);
      h = relu(h);
    }
  }
  return h;
}

std::size_t Mlp::collapsed_features() const {
  std::size_t n = 0;
  for (const auto& bn : norms_) n += bn.last_collapsed();
  return n;
}

void Mlp::collect(const std::string& prefix, std::vector<NamedParameter>& params,
                  std::vector<NamedBuffer>& buffers) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string p = prefix + ".layer" + std::to_string(i);
    params.push_back({p + ".weight", &layers_[i].weight, ParamKind::weight});
    if (layers_[i].use_bias()) params.push_back({p + ".bias", &layers_[i].bias, ParamKind::bias});
    if (i < norms_.size()) {
      const std::string b = prefix + ".bn" + std::to_string(i);
      params.push_back({b + ".gamma", &norms_[i].gamma, ParamKind::norm});
      params.push_back({b + ".beta", &norms_[i].beta, ParamKind::norm});
      buffers.push_back({b + ".running_mean", &norms_[i].running_mean});
      buffers.push_back({b + ".running_var", &norms_[i].running_var});
    }
  }
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> ModelConfig::resolved_predictor_widths() const {
  if (!predictor_widths.empty()) return predictor_widths;
  return {256, embedding_dim()};
}

void ModelConfig::validate() const {
  auto positive = [](const std::vector<std::size_t>& w, const char* what) {
    for (std::size_t v : w) {
      if (v == 0) throw ConfigError(std::string("model: ") + what + " widths must be positive");
    }
  };
  if (input_dim == 0 || representation_dim == 0) {
    throw ConfigError("model: input and representation dimensions must be positive");
  }
  positive(encoder_widths, "encoder");
  if (projector_widths.empty()) throw ConfigError("model: projector needs at least one layer");
  positive(projector_widths, "projector");
  positive(predictor_widths, "predictor");
  if (has_predictor() && resolved_predictor_widths().back() != embedding_dim()) {
    throw ConfigError("model: predictor output width must equal the embedding dimension " +
                      std::to_string(embedding_dim()));
  }
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) {
    throw ConfigError("model: bn_momentum must be in [0, 1)");
  }
}

SiameseModel::SiameseModel(const ModelConfig& config)
    : config_(config),
      encoder_(config.input_dim,
               [&] {
                 auto w = config.encoder_widths;
                 w.push_back(config.representation_dim);
                 return w;
               }(),
               config.encoder_bn, config.use_bias),
      projector_(config.representation_dim, config.projector_widths, config.projector_bn,
                 config.use_bias) {
  if (config.has_predictor()) {
    predictor_.emplace(config.embedding_dim(), config.resolved_predictor_widths(), true,
                       config.use_bias);
  }
}

SiameseModel SiameseModel::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  SiameseModel model(config);
  auto init_stack = [seed](Mlp& mlp, std::uint64_t module_id, double momentum) {
    for (std::size_t i = 0; i < mlp.layers().size(); ++i) {
      he_init(mlp.layers()[i], Rng::stream(seed, {0x1a17ULL, module_id, i}));
    }
    for (auto& bn : mlp.norms()) bn = BatchNorm(bn.features(), momentum);
  };
  init_stack(model.encoder_, 0, config.bn_momentum);
  init_stack(model.projector_, 1, config.bn_momentum);
  if (model.predictor_) init_stack(*model.predictor_, 2, config.bn_momentum);
  return model;
}

Tensor SiameseModel::encode(const Tensor& batch, Mode mode, bool update_stats) {
  if (batch.dim() != 2 || batch.cols() != config_.input_dim) {
    throw ShapeError("encoder: expected N×" + std::to_string(config_.input_dim) +
                     " batch, got " + shape_str(batch.shape()));
  }
  return encoder_.forward(batch, mode, update_stats);
}

Tensor SiameseModel::project(const Tensor& representations, Mode mode, bool update_stats) {
  return projector_.forward(representations, mode, update_stats);
}

Tensor SiameseModel::predict(const Tensor& embeddings, Mode mode, bool update_stats) {
  if (!predictor_) throw ConfigError("model has no predictor head");
  return predictor_->forward(embeddings, mode, update_stats);
}

Tensor SiameseModel::embed(const Tensor& batch, Mode mode, bool update_stats) {
  return project(encode(batch, mode, update_stats), mode, update_stats);
}

TwinOutput SiameseModel::twins_forward(const Tensor& ya, const Tensor& yb, Mode mode,
                                       bool update_stats) {
  if (ya.shape() != yb.shape()) {
    throw ShapeError("twins_forward: views differ in shape " + shape_str(ya.shape()) + " vs " +
                     shape_str(yb.shape()));
  }
  TwinOutput out;
  out.za = embed(ya, mode, update_stats);
  if (config_.has_predictor()) out.za = predict(out.za, mode, update_stats);
  if (config_.stop_gradient()) {
    NoGradGuard no_grad;
    out.zb = embed(yb, mode, update_stats);
  } else {
    out.zb = embed(yb, mode, update_stats);
  }
  return out;
}

std::vector<NamedParameter> SiameseModel::parameters() {
  std::vector<NamedParameter> params;
  std::vector<NamedBuffer> unused;
  encoder_.collect("encoder", params, unused);
  projector_.collect("projector", params, unused);
  if (predictor_) predictor_->collect("predictor", params, unused);
  return params;
}

std::vector<NamedBuffer> SiameseModel::buffers() {
  std::vector<NamedParameter> unused;
  std::vector<NamedBuffer> buffers;
  encoder_.collect("encoder", unused, buffers);
  projector_.collect("projector", unused, buffers);
  if (predictor_) predictor_->collect("predictor", unused, buffers);
  return buffers;
}

}  // namespace btlab
