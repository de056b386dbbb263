#include <filesystem>
#include <fstream>

#include "btlab/experiments.hpp"

namespace btlab {

namespace fs = std::filesystem;

namespace {

// Transforms in the order the augmentations sweep strips them.
const std::vector<Transform> kRemovalOrder = {Transform::solarize, Transform::blur,
                                              Transform::grayscale, Transform::color_jitter,
                                              Transform::flip};

double parse_number(const std::string& sweep, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("sweep " + sweep + ": '" + value + "' is not a number");
}

std::size_t parse_count(const std::string& sweep, const std::string& value) {
  const double v = parse_number(sweep, value);
  if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw ConfigError("sweep " + sweep + ": '" + value + "' is not a positive integer");
  }
  return static_cast<std::size_t>(v);
}

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& sweep_names() {
  static const std::vector<std::string> names = {"lambda",       "batch_size", "projector_dim",
                                                 "augmentations", "asymmetry", "loss_variant"};
  return names;
}

std::vector<std::string> default_sweep_values(const std::string& sweep) {
  if (sweep == "lambda") return {"5e-4", "5e-3", "5e-2"};
  if (sweep == "batch_size") return {"32", "64", "128", "256"};
  if (sweep == "projector_dim") return {"16", "64", "256", "1024"};
  if (sweep == "augmentations") {
    std::vector<std::string> v = {"all"};
    for (Transform t : kRemovalOrder) v.push_back("-" + std::string(to_string(t)));
    return v;
  }
  if (sweep == "asymmetry") return {"none", "stop_grad", "predictor", "both"};
  if (sweep == "loss_variant") return {"full", "only_invariance", "only_redundancy"};
  throw ConfigError("unknown sweep '" + sweep + "'");
}

RunConfig apply_sweep_value(const RunConfig& base, const std::string& sweep,
                            const std::string& value) {
  RunConfig c = base;
  if (sweep == "lambda") {
    c.loss.lambda = parse_number(sweep, value);
  } else if (sweep == "batch_size") {
    c.batch_size = parse_count(sweep, value);
  } else if (sweep == "projector_dim") {
    const std::size_t d = parse_count(sweep, value);
    for (auto& w : c.model.projector_widths) w = d;
    if (!c.model.predictor_widths.empty()) c.model.predictor_widths.back() = d;
  } else if (sweep == "augmentations") {
    // "all", or "-t": strip t and every transform before it in removal order.
    if (value != "all") {
      bool found = false;
      for (Transform t : kRemovalOrder) {
        c.augmentation.set_enabled(t, false);
        if (value == "-" + std::string(to_string(t))) {
          found = true;
          break;
        }
      }
      if (!found) throw ConfigError("sweep augmentations: unknown value '" + value + "'");
    }
  } else if (sweep == "asymmetry") {
    c.model.asymmetry = asymmetry_from_string(value);
  } else if (sweep == "loss_variant") {
    c.loss.variant =
        value == "full" ? LossVariant::barlow_twins : loss_variant_from_string(value);
  } else {
    throw ConfigError("unknown sweep '" + sweep + "'");
  }
  return c;
}

std::string sweep_csv_header() {
  return "sweep,value,ok,probe_top1,epoch,step,total,invariance,redundancy,mean_abs_offdiag,"
         "mean_diag,min_std,entropy_proxy,error";
}

SweepReport ablate(const RunConfig& base, const std::string& sweep,
                   std::vector<std::string> values) {
  auto defaults = default_sweep_values(sweep);  // also rejects unknown names
  if (values.empty()) values = std::move(defaults);

  SweepReport report;
  report.sweep = sweep;
  fs::create_directories(base.output_dir);
  for (const auto& value : values) {
    SweepPoint point;
    point.value = value;
    try {
      RunConfig c = apply_sweep_value(base, sweep, value);
      c.output_dir = (fs::path(base.output_dir) / (sweep + "_" + value)).string();
      TrainResult r = train(c);
      if (!r.final_probe) throw Error("no final probe was recorded");
      point.probe_top1 = r.final_probe->top1;
      point.final_metrics = r.metrics.back();
      point.ok = true;
    } catch (const std::exception& e) {
      point.ok = false;
      point.error = e.what();
    }
    report.points.push_back(point);
  }

  report.csv_path = (fs::path(base.output_dir) / ("sweep_" + sweep + ".csv")).string();
  std::ofstream f(report.csv_path, std::ios::trunc);
  if (!f) throw Error("ablate: cannot write '" + report.csv_path + "'");
  f << sweep_csv_header() << "\n";
  for (const auto& p : report.points) {
    const auto& m = p.final_metrics;
    f << sweep << ',' << csv_safe(p.value) << ',' << (p.ok ? 1 : 0) << ','
      << (p.ok ? fmt(p.probe_top1) : "") << ',' << m.epoch << ',' << m.step << ','
      << fmt(m.total) << ',' << fmt(m.invariance) << ',' << fmt(m.redundancy) << ','
      << fmt(m.mean_abs_offdiag) << ',' << fmt(m.mean_diag) << ',' << fmt(m.min_std) << ','
      << fmt(m.entropy_proxy) << ',' << csv_safe(p.error) << "\n";
  }
  return report;
}

}  // namespace btlab
