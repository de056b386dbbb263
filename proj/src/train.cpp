#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "btlab/experiments.hpp"
#include "btlab/rng.hpp"
#include "json.hpp"

namespace btlab {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kShuffleTag = 0x5f1e;
constexpr std::uint64_t kDiagnosticTag = 0xd1a6;
constexpr std::uint64_t kConditionalTag = 0xc0d1;

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::stream(seed, {kShuffleTag, epoch});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

struct ViewBatch {
  Tensor a;
  Tensor b;
};

ViewBatch make_views(const Dataset& ds, const std::vector<std::size_t>& indices,
                     const AugmentationPolicy& policy, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<Image> a, b;
  a.reserve(indices.size());
  b.reserve(indices.size());
  for (std::size_t idx : indices) {
    auto [va, vb] = two_views(ds.images[idx], policy, augment_key(seed, epoch, idx));
    a.push_back(std::move(va));
    b.push_back(std::move(vb));
  }
  return {images_to_tensor(a), images_to_tensor(b)};
}

// Column mean/std summary of one branch for the forensic dump.
nlohmann::ordered_json branch_stats(const Tensor& z) {
  const std::size_t n = z.rows(), d = z.cols();
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  std::size_t non_finite = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double v = z.at(i, j);
      if (!std::isfinite(v)) ++non_finite;
      mean[j] += v;
    }
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (z.at(i, j) - mean[j]) * (z.at(i, j) - mean[j]);
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(n));
  auto finite_or_null = [](const std::vector<double>& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (double x : v) arr.push_back(std::isfinite(x) ? nlohmann::ordered_json(x) : nullptr);
    return arr;
  };
  return {{"rows", n},
          {"cols", d},
          {"non_finite", non_finite},
          {"feature_mean", finite_or_null(mean)},
          {"feature_std", finite_or_null(sd)}};
}

std::string write_nan_dump(const RunConfig& config, bool write_files, std::size_t epoch,
                           std::uint64_t step, const std::vector<std::size_t>& batch,
                           const LossBreakdown& loss, const TwinOutput& z) {
  if (!write_files) return {};
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(std::to_string(v));
  };
  nlohmann::ordered_json dump = {
      {"epoch", epoch},
      {"step", step},
      {"loss_variant", std::string(to_string(config.loss.variant))},
      {"total", num(loss.total.item())},
      {"invariance", num(loss.invariance.item())},
      {"redundancy", num(loss.redundancy.item())},
      {"batch_indices", batch},
      {"za", branch_stats(z.za)},
      {"zb", branch_stats(z.zb)},
  };
  const std::string path = (fs::path(config.output_dir) / "nan_dump.json").string();
  std::ofstream f(path, std::ios::trunc);
  f << dump.dump(2) << "\n";
  return path;
}

// Fixed evaluation views of the first training images, shared by every row.
struct DiagnosticSet {
  Tensor a;
  Tensor b;
};

DiagnosticSet make_diagnostic_set(const Dataset& train, const RunConfig& config) {
  const std::size_t n = std::min(config.diagnostic_samples, train.size());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::uint64_t seed = Rng::stream(config.seed, {kDiagnosticTag}).next_u64();
  auto views = make_views(train, idx, config.augmentation, seed, 0);
  return {views.a, views.b};
}

// Batch statistics, no running-stat update, off the tape.
EmbeddingDiagnostics diagnose(SiameseModel& model, const DiagnosticSet& set) {
  NoGradGuard guard;
  Tensor za = model.embed(set.a, Mode::train, false);
  Tensor zb = model.embed(set.b, Mode::train, false);
  return embedding_diagnostics(za, zb);
}

std::string first_non_finite(const std::vector<ParamGroup>& groups) {
  for (const auto& g : groups)
    for (const auto& p : g.params)
      for (double v : p.tensor->data())
        if (!std::isfinite(v)) return p.name;
  return {};
}

void zero_grads(std::vector<ParamGroup>& groups) {
  for (auto& g : groups)
    for (auto& p : g.params) p.tensor->zero_grad();
}

}  // namespace

Tensor representations(SiameseModel& model, const Dataset& ds) {
  NoGradGuard guard;
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return model.encode(dataset_tensor(ds, idx), Mode::eval, false);
}

ProbeResult probe_model(SiameseModel& model, const Dataset& ds, const RunConfig& config) {
  auto [train, test] = split_dataset(ds, config.dataset.train_fraction);
  ProbeConfig pc = config.probe;
  if (pc.num_classes == 0) pc.num_classes = ds.num_classes;
  return linear_probe(representations(model, train), train.labels, representations(model, test),
                      test.labels, pc);
}

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const Dataset ds = load_run_dataset(config);
  auto [train_set, test_set] = split_dataset(ds, config.dataset.train_fraction);
  (void)test_set;

  const std::size_t steps_per_epoch = train_set.size() / config.batch_size;
  if (steps_per_epoch == 0) {
    throw ConfigError("train: batch_size " + std::to_string(config.batch_size) +
                      " exceeds the " + std::to_string(train_set.size()) + " training images");
  }
  const ScheduleConfig schedule = config.schedule();
  const double bias_scale = config.base_lr > 0.0 ? config.bias_lr / config.base_lr : 0.0;

  SiameseModel model = SiameseModel::init(config.model, config.seed);
  std::vector<ParamGroup> groups =
      make_param_groups(model.parameters(), config.optimizer.weight_decay, bias_scale);

  std::size_t start_epoch = 0;
  std::uint64_t step = 0;
  if (!options.resume_from.empty()) {
    const Checkpoint ck = load_checkpoint(options.resume_from);
    if (ck.epoch > config.epochs) {
      throw ConfigError("train: checkpoint is at epoch " + std::to_string(ck.epoch) +
                        " but the run has only " + std::to_string(config.epochs));
    }
    restore_checkpoint(ck, model, &groups);
    start_epoch = ck.epoch;
    step = ck.step;
  }
  const std::size_t end_epoch =
      options.stop_after_epochs ? std::min(options.stop_after_epochs, config.epochs)
                                : config.epochs;

  TrainResult result;
  std::ofstream metrics_file;
  if (options.write_files) {
    fs::create_directories(config.output_dir);
    save_config(config, (fs::path(config.output_dir) / "config.json").string());
    result.metrics_path = (fs::path(config.output_dir) / "metrics.csv").string();
    metrics_file.open(result.metrics_path, std::ios::trunc);
    if (!metrics_file) throw Error("train: cannot write '" + result.metrics_path + "'");
    metrics_file << metrics_header() << "\n";
  }

  const DiagnosticSet diag_set = make_diagnostic_set(train_set, config);
  std::vector<Image> conditional_images(
      train_set.images.begin(),
      train_set.images.begin() +
          static_cast<std::ptrdiff_t>(std::min(config.conditional_images, train_set.size())));
  const std::uint64_t conditional_seed = Rng::stream(config.seed, {kConditionalTag}).next_u64();

  const auto t0 = std::chrono::steady_clock::now();
  double sum_total = 0.0, sum_inv = 0.0, sum_red = 0.0, last_lr = 0.0;
  std::size_t accumulated = 0;

  auto emit = [&](std::size_t epoch_done, bool scheduled) {
    MetricsRecord r;
    r.epoch = epoch_done;
    r.step = step;
    const double n = static_cast<double>(std::max<std::size_t>(accumulated, 1));
    r.invariance = sum_inv / n;
    r.redundancy = sum_red / n;
    r.total = sum_total / n;
    r.lr = last_lr;
    const EmbeddingDiagnostics d = diagnose(model, diag_set);
    r.mean_abs_offdiag = d.mean_abs_offdiag;
    r.mean_diag = d.mean_diag;
    r.min_std = d.min_std;
    r.entropy_proxy = d.entropy_proxy;
    if (scheduled) {
      r.conditional = conditional_entropy_diagnostic(model, conditional_images,
                                                     config.augmentation, config.conditional_views,
                                                     conditional_seed)
                          .mean_logdet;
      ProbeResult probe = probe_model(model, ds, config);
      r.probe_top1 = probe.top1;
      if (epoch_done == config.epochs || epoch_done == end_epoch) result.final_probe = probe;
    }
    if (config.record_wall_clock) {
      r.wall_clock =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.final_diagnostics = d;
    result.metrics.push_back(r);
    if (metrics_file.is_open()) metrics_file << metrics_row(r) << "\n" << std::flush;
    sum_total = sum_inv = sum_red = 0.0;
    accumulated = 0;
  };

  for (std::size_t epoch = start_epoch; epoch < end_epoch; ++epoch) {
    const auto order = shuffled(train_set.size(), config.seed, epoch);
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<std::size_t> batch(
          order.begin() + static_cast<std::ptrdiff_t>(s * config.batch_size),
          order.begin() + static_cast<std::ptrdiff_t>((s + 1) * config.batch_size));
      ViewBatch views = make_views(train_set, batch, config.augmentation, config.seed, epoch);
      TwinOutput z = model.twins_forward(views.a, views.b, Mode::train);
      LossBreakdown loss = compute_loss(z.za, z.zb, config.loss);
      const double total = loss.total.item();
      if (!std::isfinite(total)) {
        const std::string dump =
            write_nan_dump(config, options.write_files, epoch + 1, step, batch, loss, z);
        throw TrainingAborted("train: non-finite loss " + std::to_string(total) + " at epoch " +
                                  std::to_string(epoch + 1) + ", step " + std::to_string(step) +
                                  (dump.empty() ? std::string() : "; dump written to " + dump),
                              dump);
      }
      zero_grads(groups);
      loss.total.backward();
      // lr_at needs a positive base rate; a zero base rate is a null-update run.
      last_lr = config.base_lr > 0.0 ? lr_at(schedule, step, steps_per_epoch) : 0.0;
      optimizer_step(groups, last_lr, config.optimizer);
      // Standardization can hide overflowing weights from the loss, so the
      // parameters are checked too.
      if (const std::string bad = first_non_finite(groups); !bad.empty()) {
        const std::string dump =
            write_nan_dump(config, options.write_files, epoch + 1, step, batch, loss, z);
        throw TrainingAborted("train: parameter '" + bad + "' became non-finite at epoch " +
                                  std::to_string(epoch + 1) + ", step " + std::to_string(step) +
                                  (dump.empty() ? std::string() : "; dump written to " + dump),
                              dump);
      }
      ++step;

      sum_total += total;
      sum_inv += loss.invariance.item();
      sum_red += loss.redundancy_weight * loss.redundancy.item();
      ++accumulated;

      const bool epoch_end = s + 1 == steps_per_epoch;
      if (!epoch_end && config.log_every_steps && step % config.log_every_steps == 0) {
        emit(epoch + 1, false);
      }
    }
    const std::size_t done = epoch + 1;
    emit(done, done % config.probe_every_epochs == 0 || done == config.epochs ||
                   done == end_epoch);
    if (options.write_files && config.checkpoint_every_epochs &&
        done % config.checkpoint_every_epochs == 0) {
      save_checkpoint(
          make_checkpoint(config, model, &groups, static_cast<std::uint32_t>(done), step),
          (fs::path(config.output_dir) / ("epoch_" + std::to_string(done) + ".btck")).string());
    }
  }

  result.checkpoint =
      make_checkpoint(config, model, &groups, static_cast<std::uint32_t>(end_epoch), step);
  if (options.write_files) {
    result.checkpoint_path = (fs::path(config.output_dir) / "final.btck").string();
    save_checkpoint(result.checkpoint, result.checkpoint_path);
  }
  return result;
}

EvaluateResult evaluate(const Checkpoint& ck, const Dataset& ds) {
  const RunConfig config = config_from_json(ck.config_json);
  ds.validate();
  const std::size_t want = config.model.input_dim;
  if (ds.input_dim() != want) {
    throw ShapeError("evaluate: dataset images are " + std::to_string(ds.height()) + "x" +
                     std::to_string(ds.width()) + "x" + std::to_string(ds.channels()) + " = " +
                     std::to_string(ds.input_dim()) + " values, but the checkpoint's model takes " +
                     std::to_string(want));
  }
  SiameseModel model = SiameseModel::init(config.model, config.seed);
  restore_checkpoint(ck, model, nullptr);

  EvaluateResult out;
  out.probe = probe_model(model, ds, config);
  auto [train, test] = split_dataset(ds, config.dataset.train_fraction);
  (void)train;
  NoGradGuard guard;
  std::vector<std::size_t> idx(test.size());
  std::iota(idx.begin(), idx.end(), 0);
  out.diagnostics = embedding_diagnostics(model.embed(dataset_tensor(test, idx), Mode::eval, false));
  return out;
}

EvaluateResult evaluate(const std::string& checkpoint_path, const std::string& dataset_path) {
  return evaluate(load_checkpoint(checkpoint_path), load_dataset(dataset_path));
}

}  // namespace btlab
