#pragma once

// Run configuration, the training loop, checkpoints, ablation sweeps,
// evaluation and report rendering.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "btlab/data_aug.hpp"
#include "btlab/eval_metrics.hpp"
#include "btlab/losses.hpp"
#include "btlab/models.hpp"
#include "btlab/optim.hpp"

namespace btlab {

struct DatasetSpec {
  /// BTDS file; when empty the dataset is generated from `generate`.
  std::string path;
  GenerateOptions generate;
  double train_fraction = 0.8;
};

struct RunConfig {
  DatasetSpec dataset;
  ModelConfig model;
  LossConfig loss;
  /// Plain momentum SGD by default; LARS is opt-in.
  OptimizerConfig optimizer = [] {
    OptimizerConfig o;
    o.use_lars = false;
    return o;
  }();
  AugmentationPolicy augmentation;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  /// Tuned for momentum SGD on the toy data. 0.2 is the LARS rate.
  double base_lr = 0.002;
  double bias_lr = 0.0048;
  /// Warmup length as a fraction of `epochs`.
  double warmup_fraction = 1.0 / 30.0;
  double final_lr_ratio = 1e-3;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";

  /// 0 logs one row per epoch; otherwise also every `log_every_steps` steps.
  std::size_t log_every_steps = 0;
  /// Probe and conditional diagnostic every this many epochs, plus the last.
  std::size_t probe_every_epochs = 10;
  /// Images (each seen as a fixed view pair) behind the logged diagnostics.
  std::size_t diagnostic_samples = 512;
  std::size_t conditional_images = 32;
  std::size_t conditional_views = 8;
  ProbeConfig probe;
  /// Checkpoint every this many epochs (0: only the final one).
  std::size_t checkpoint_every_epochs = 0;
  /// Off by default so that metrics files are byte-reproducible.
  bool record_wall_clock = false;

  ScheduleConfig schedule() const;
  void validate() const;
};

std::string config_to_json(const RunConfig& config);
/// Rejects unknown keys at every level; missing keys keep their defaults.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);

/// The dataset a config describes (loaded or generated).
Dataset load_run_dataset(const RunConfig& config);

struct MetricsRecord {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double total = 0.0;
  double invariance = 0.0;
  double redundancy = 0.0;
  double lr = 0.0;
  double mean_abs_offdiag = 0.0;
  double mean_diag = 0.0;
  double min_std = 0.0;
  double entropy_proxy = 0.0;
  std::optional<double> conditional;
  std::optional<double> probe_top1;
  double wall_clock = 0.0;
};

const std::vector<std::string>& metrics_columns();
std::string metrics_header();
std::string metrics_row(const MetricsRecord& r);
/// Parses a metrics CSV; throws FormatError naming missing columns.
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Checkpoints

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

struct Checkpoint {
  std::string config_json;
  std::vector<NamedTensor> tensors;  // model parameters
  std::vector<NamedTensor> buffers;  // optimizer momentum and BN running stats
  std::uint32_t epoch = 0;           // completed epochs
  std::uint64_t step = 0;            // completed optimizer steps
  std::vector<std::pair<std::string, std::uint64_t>> rng_states;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Snapshot of a model (and optionally its optimizer state).
Checkpoint make_checkpoint(const RunConfig& config, SiameseModel& model,
                           std::vector<ParamGroup>* groups, std::uint32_t epoch,
                           std::uint64_t step);
/// Copies every tensor and buffer of `ck` into the model (and optimizer).
/// Validates all names and shapes before writing anything.
void restore_checkpoint(const Checkpoint& ck, SiameseModel& model,
                        std::vector<ParamGroup>* groups);

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
  /// Continue from this checkpoint file instead of a fresh initialization.
  std::string resume_from;
  /// Stop after this many completed epochs (0: run to config.epochs).
  std::size_t stop_after_epochs = 0;
  bool write_files = true;
};

struct TrainResult {
  std::vector<MetricsRecord> metrics;
  std::optional<ProbeResult> final_probe;
  EmbeddingDiagnostics final_diagnostics;
  Checkpoint checkpoint;
  std::string metrics_path;
  std::string checkpoint_path;
};

/// Raised when the loss becomes NaN or infinite; a forensic dump has been
/// written (when files are enabled) before throwing.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, std::string dump_path)
      : Error(what), dump_path_(std::move(dump_path)) {}
  const std::string& dump_path() const { return dump_path_; }

 private:
  std::string dump_path_;
};

TrainResult train(const RunConfig& config, const TrainOptions& options = {});

/// Encoder outputs for every image, eval mode, no tape.
Tensor representations(SiameseModel& model, const Dataset& ds);

/// Probe on frozen representations with the config's split and probe setup.
ProbeResult probe_model(SiameseModel& model, const Dataset& ds, const RunConfig& config);

struct EvaluateResult {
  ProbeResult probe;
  EmbeddingDiagnostics diagnostics;
};

EvaluateResult evaluate(const Checkpoint& ck, const Dataset& ds);
EvaluateResult evaluate(const std::string& checkpoint_path, const std::string& dataset_path);

// ---------------------------------------------------------------------------
// Sweeps

const std::vector<std::string>& sweep_names();
/// Default values for a sweep, as strings.
std::vector<std::string> default_sweep_values(const std::string& sweep);
/// Copy of `base` with the sweep variable set to `value`.
RunConfig apply_sweep_value(const RunConfig& base, const std::string& sweep,
                            const std::string& value);

struct SweepPoint {
  std::string value;
  bool ok = false;
  std::string error;
  double probe_top1 = 0.0;
  MetricsRecord final_metrics;
};

struct SweepReport {
  std::string sweep;
  std::vector<SweepPoint> points;
  std::string csv_path;
};

/// Trains and probes each point in its own subdirectory of
/// base.output_dir, then writes sweep_<name>.csv there. A failed point is
/// recorded and the sweep continues.
SweepReport ablate(const RunConfig& base, const std::string& sweep,
                   std::vector<std::string> values = {});

std::string sweep_csv_header();

// ---------------------------------------------------------------------------
// Reports

struct ReportOutput {
  std::vector<std::string> files;
};

/// Renders every metrics.csv (loss curves) and sweep_*.csv (probe accuracy
/// against the swept value; λ on a log axis) found in `in_dir` or its
/// immediate subdirectories into SVG charts plus tidy CSVs in `out_dir`.
/// Throws Error("no data ...") when nothing usable is found.
ReportOutput report(const std::string& in_dir, const std::string& out_dir);

}  // namespace btlab
