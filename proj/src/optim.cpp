#include "btlab/optim.hpp"

#include <cmath>
#include <numbers>

namespace btlab {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> gradient_of(const NamedParameter& p) {
  if (!p.tensor->has_grad()) {
    throw AutogradError("optimizer: parameter '" + p.name + "' has no gradient");
  }
  return p.tensor->grad();
}

void ensure_buffers(ParamGroup& g) {
  if (g.momentum.size() == g.params.size()) return;
  g.momentum.clear();
  for (const auto& p : g.params) g.momentum.emplace_back(p.tensor->numel(), 0.0);
}

// v ← m·v + τ·(g + wd·w); w ← w − lr·v, with τ = 1 unless LARS-adapted
void momentum_update(NamedParameter& p, std::vector<double>& v, double lr, double momentum,
                     double wd, bool lars, double eta) {
  std::vector<double> d = gradient_of(p);
  auto w = p.tensor->mutable_data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += wd * w[i];
  double trust = 1.0;
  if (lars) {
    const double wn = norm2(w), dn = norm2(d);
    if (wn > 0.0 && dn > 0.0) trust = eta * wn / dn;
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    v[i] = momentum * v[i] + trust * d[i];
    w[i] -= lr * v[i];
  }
}

void step_all(std::vector<ParamGroup>& groups, double lr, double momentum, bool lars,
              double eta) {
  // Validate every gradient before touching any parameter.
  for (auto& g : groups)
    for (auto& p : g.params) (void)gradient_of(p);
  for (auto& g : groups) {
    ensure_buffers(g);
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      momentum_update(g.params[i], g.momentum[i], lr * g.lr_scale, momentum, g.weight_decay,
                      lars && g.lars_adapted, eta);
    }
  }
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer: weight_decay must be >= 0");
  if (!(eta > 0.0)) throw ConfigError("optimizer: eta must be > 0");
}

std::vector<ParamGroup> make_param_groups(std::vector<NamedParameter> params,
                                          double weight_decay, double bias_lr_scale) {
  ParamGroup weights;
  weights.name = "weights";
  weights.weight_decay = weight_decay;
  weights.lars_adapted = true;
  ParamGroup excluded;
  excluded.name = "biases_and_norms";
  excluded.lr_scale = bias_lr_scale;
  for (auto& p : params) (p.kind == ParamKind::weight ? weights : excluded).params.push_back(p);
  std::vector<ParamGroup> groups;
  groups.push_back(std::move(weights));
  groups.push_back(std::move(excluded));
  for (auto& g : groups) ensure_buffers(g);
  return groups;
}

void sgd_momentum_step(std::vector<ParamGroup>& groups, double lr, double momentum) {
  step_all(groups, lr, momentum, false, 0.0);
}

void lars_step(std::vector<ParamGroup>& groups, double lr, double momentum, double eta) {
  step_all(groups, lr, momentum, true, eta);
}

void optimizer_step(std::vector<ParamGroup>& groups, double lr, const OptimizerConfig& config) {
  step_all(groups, lr, config.momentum, config.use_lars, config.eta);
}

std::vector<NamedBuffer> momentum_buffers(std::vector<ParamGroup>& groups) {
  std::vector<NamedBuffer> out;
  for (auto& g : groups) {
    ensure_buffers(g);
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      out.push_back({"momentum." + g.params[i].name, &g.momentum[i]});
    }
  }
  return out;
}

void ScheduleConfig::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("schedule: base_lr must be > 0");
  if (!(bias_lr >= 0.0)) throw ConfigError("schedule: bias_lr must be >= 0");
  if (batch_size == 0) throw ConfigError("schedule: batch_size must be > 0");
  if (total_epochs == 0) throw ConfigError("schedule: total_epochs must be > 0");
  if (!(warmup_epochs >= 0.0 && warmup_epochs < static_cast<double>(total_epochs))) {
    throw ConfigError("schedule: warmup_epochs must be in [0, total_epochs)");
  }
  if (!(final_lr_ratio > 0.0 && final_lr_ratio <= 1.0)) {
    throw ConfigError("schedule: final_lr_ratio must be in (0, 1]");
  }
}

ScaledLr scaled_lr(const ScheduleConfig& config) {
  if (config.batch_size == 0) throw ConfigError("schedule: batch_size must be > 0");
  const double k = static_cast<double>(config.batch_size) / 256.0;
  return {config.base_lr * k, config.bias_lr * k};
}

double lr_at(const ScheduleConfig& config, std::uint64_t step, std::uint64_t steps_per_epoch) {
  config.validate();
  if (steps_per_epoch == 0) throw ConfigError("schedule: steps_per_epoch must be > 0");
  const std::uint64_t total = config.total_epochs * steps_per_epoch;
  if (step > total) {
    throw DomainError("lr_at: step " + std::to_string(step) + " beyond last step " +
                      std::to_string(total));
  }
  const double peak = scaled_lr(config).weights;
  const double warm = config.warmup_epochs * static_cast<double>(steps_per_epoch);
  const double s = static_cast<double>(step);
  if (s < warm) return peak * s / warm;
  const double t = (s - warm) / (static_cast<double>(total) - warm);
  const double r = config.final_lr_ratio;
  return peak * (r + (1.0 - r) * (1.0 + std::cos(std::numbers::pi * t)) / 2.0);
}

}  // namespace btlab
