#pragma once

// Momentum SGD and LARS over parameter groups, plus the warmup + cosine
// learning-rate schedule.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "btlab/models.hpp"

namespace btlab {

struct ParamGroup {
  std::string name;
  std::vector<NamedParameter> params;
  double weight_decay = 0.0;
  bool lars_adapted = false;
  /// Multiplies the step lr for this group (bias_lr / base_lr for the
  /// excluded group).
  double lr_scale = 1.0;
  /// One buffer per parameter, zero until the first step.
  std::vector<std::vector<double>> momentum;
};

struct OptimizerConfig {
  double momentum = 0.9;
  double weight_decay = 1.5e-6;
  double eta = 0.001;
  bool use_lars = true;
  void validate() const;
};

/// Weights go to a LARS-adapted group with weight decay; biases and batch
/// norm parameters to an excluded group with no decay and lr_scale.
std::vector<ParamGroup> make_param_groups(std::vector<NamedParameter> params,
                                          double weight_decay, double bias_lr_scale);

/// v ← momentum·v + g + wd·w, then w ← w − lr·lr_scale·v, for every group.
/// Throws AutogradError naming any parameter without a gradient.
void sgd_momentum_step(std::vector<ParamGroup>& groups, double lr, double momentum);

/// For LARS-adapted groups the per-tensor trust ratio
/// τ = eta·‖w‖ / ‖g + wd·w‖ (1 if either norm is 0) scales the update before
/// it enters the momentum buffer:
///   v ← momentum·v + τ·(g + wd·w),   w ← w − lr·lr_scale·v.
/// Excluded groups take the plain momentum step with their own decay (0).
void lars_step(std::vector<ParamGroup>& groups, double lr, double momentum, double eta);

/// Dispatches on config.use_lars.
void optimizer_step(std::vector<ParamGroup>& groups, double lr, const OptimizerConfig& config);

/// Momentum buffers flattened in group order, for checkpoints.
std::vector<NamedBuffer> momentum_buffers(std::vector<ParamGroup>& groups);

struct ScheduleConfig {
  double base_lr = 0.2;
  double bias_lr = 0.0048;
  std::size_t batch_size = 256;
  double warmup_epochs = 10;
  std::size_t total_epochs = 1000;
  double final_lr_ratio = 1e-3;
  void validate() const;
};

struct ScaledLr {
  double weights;
  double biases;
};

/// Each base lr × batch_size / 256.
ScaledLr scaled_lr(const ScheduleConfig& config);

/// Weight-group learning rate at `step`: linear ramp from 0 over the warmup,
/// then cosine from the scaled lr down to scaled lr × final_lr_ratio at the
/// last step (total_epochs · steps_per_epoch).
double lr_at(const ScheduleConfig& config, std::uint64_t step, std::uint64_t steps_per_epoch);

}  // namespace btlab
