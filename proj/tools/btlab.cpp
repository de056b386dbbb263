// Command-line front end: train, evaluate, ablate, gradcheck, report, gen-data.

#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "btlab/experiments.hpp"
#include "btlab/gradcheck.hpp"

using namespace btlab;

namespace {

std::vector<std::string> split_values(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_probe(const ProbeResult& p) {
  std::printf("probe_top1 %.6f\n", p.top1);
  for (std::size_t k = 0; k < p.per_class_accuracy.size(); ++k) {
    std::printf("  class %zu: accuracy %.4f (n=%zu)\n", k, p.per_class_accuracy[k],
                p.per_class_count[k]);
  }
}

void print_diagnostics(const EmbeddingDiagnostics& d) {
  std::printf("mean_abs_offdiag %.6g\nmean_diag %.6g\nmin_std %.6g\nentropy_proxy %.6g\n"
              "effective_rank %.6g\ncollapsed %zu\n",
              d.mean_abs_offdiag, d.mean_diag, d.min_std, d.entropy_proxy, d.effective_rank,
              d.collapsed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barlow Twins lab: twin-network training, ablations and diagnostics"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON config");
  std::string config_path, out_dir, resume;
  std::uint64_t seed = 0;
  train_cmd->add_option("--config", config_path, "Run config (JSON)")->required();
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Override the config seed");
  train_cmd->add_option("--out", out_dir, "Override the output directory");
  train_cmd->add_option("--resume", resume, "Continue from a BTCK checkpoint");

  auto* eval_cmd = app.add_subcommand("evaluate", "Probe and diagnose a checkpoint");
  std::string ckpt_path, dataset_path;
  eval_cmd->add_option("--checkpoint", ckpt_path)->required();
  eval_cmd->add_option("--dataset", dataset_path, "BTDS dataset")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "Run one ablation sweep");
  std::string sweep, values_csv;
  ablate_cmd->add_option("--config", config_path)->required();
  ablate_cmd->add_option("--sweep", sweep)->required()->check(CLI::IsMember(sweep_names()));
  ablate_cmd->add_option("--values", values_csv, "Comma-separated sweep values");
  ablate_cmd->add_option("--out", out_dir, "Override the output directory");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of ops and losses");
  double tol = 1e-4;
  grad_cmd->add_option("--tol", tol, "Maximum relative error");

  auto* report_cmd = app.add_subcommand("report", "Render SVG charts and tidy CSVs");
  std::string in_dir;
  report_cmd->add_option("--in", in_dir)->required();
  report_cmd->add_option("--out", out_dir)->required();

  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a toy BTDS dataset");
  GenerateOptions gen;
  std::string gen_out;
  gen_cmd->add_option("--recipe", gen.recipe)->check(CLI::IsMember(dataset_recipes()));
  gen_cmd->add_option("--n", gen.n);
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--classes", gen.classes);
  gen_cmd->add_option("--size", gen.height, "Image height and width")
      ->each([&](const std::string& v) { gen.width = std::stoul(v); });
  gen_cmd->add_option("--channels", gen.channels);
  gen_cmd->add_option("--out", gen_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      RunConfig config = load_config(config_path);
      if (*seed_opt) config.seed = seed;
      if (!out_dir.empty()) config.output_dir = out_dir;
      TrainOptions options;
      options.resume_from = resume;
      const TrainResult r = train(config, options);
      const MetricsRecord& last = r.metrics.back();
      std::printf("epochs %zu steps %llu loss %.6g\n", last.epoch,
                  static_cast<unsigned long long>(last.step), last.total);
      if (r.final_probe) print_probe(*r.final_probe);
      std::printf("metrics %s\ncheckpoint %s\n", r.metrics_path.c_str(),
                  r.checkpoint_path.c_str());
    } else if (eval_cmd->parsed()) {
      const EvaluateResult r = evaluate(ckpt_path, dataset_path);
      print_probe(r.probe);
      print_diagnostics(r.diagnostics);
    } else if (ablate_cmd->parsed()) {
      RunConfig config = load_config(config_path);
      if (!out_dir.empty()) config.output_dir = out_dir;
      const SweepReport r = ablate(config, sweep, split_values(values_csv));
      for (const auto& p : r.points) {
        if (p.ok) {
          std::printf("%s=%s probe_top1 %.6f\n", sweep.c_str(), p.value.c_str(), p.probe_top1);
        } else {
          std::printf("%s=%s FAILED: %s\n", sweep.c_str(), p.value.c_str(), p.error.c_str());
        }
      }
      std::printf("sweep csv %s\n", r.csv_path.c_str());
    } else if (grad_cmd->parsed()) {
      bool ok = true;
      for (const auto& c : gradcheck_suite(1e-5, tol)) {
        std::printf("%-40s %s max rel err %.3g\n", c.name.c_str(),
                    c.report.passed ? "ok  " : "FAIL", c.report.max_error);
        ok = ok && c.report.passed;
      }
      return ok ? 0 : 1;
    } else if (report_cmd->parsed()) {
      for (const auto& f : report(in_dir, out_dir).files) std::printf("%s\n", f.c_str());
    } else if (gen_cmd->parsed()) {
      const Dataset ds = generate_toy_dataset(gen);
      save_dataset(ds, gen_out);
      std::printf("%zu images %zux%zux%zu, %zu classes -> %s\n", ds.size(), ds.height(),
                  ds.width(), ds.channels(), ds.num_classes, gen_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
