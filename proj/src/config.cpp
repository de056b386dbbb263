#include <fstream>
#include <set>
#include <sstream>

#include "btlab/experiments.hpp"
#include "json.hpp"

namespace btlab {

using json = nlohmann::ordered_json;

namespace {

// Reads keys of one JSON object, rejecting any key not consumed.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("config: '" + where_ + "' must be an object");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError("config: unknown key '" + key + "' in '" + where_ + "'");
      }
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + where_ + "." + key + "': " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json per_view(const PerView& p) { return json{{"a", p.a}, {"b", p.b}}; }

void read_per_view(Reader& r, const char* key, PerView& out) {
  if (const json* c = r.child(key)) {
    Reader v(*c, r.path(key));
    v.get("a", out.a);
    v.get("b", out.b);
  }
}

json to_json(const RunConfig& c) {
  json enabled = json::array();
  for (unsigned t = 0; t < kTransformCount; ++t)
    if (c.augmentation.is_enabled(static_cast<Transform>(t)))
      enabled.push_back(std::string(to_string(static_cast<Transform>(t))));
  const auto& a = c.augmentation;
  const auto& g = c.dataset.generate;
  return json{
      {"dataset",
       {{"path", c.dataset.path},
        {"recipe", g.recipe},
        {"n", g.n},
        {"seed", g.seed},
        {"height", g.height},
        {"width", g.width},
        {"channels", g.channels},
        {"classes", g.classes},
        {"noise", g.noise},
        {"margin", g.margin},
        {"train_fraction", c.dataset.train_fraction}}},
      {"model",
       {{"input_dim", c.model.input_dim},
        {"encoder_widths", c.model.encoder_widths},
        {"representation_dim", c.model.representation_dim},
        {"encoder_bn", c.model.encoder_bn},
        {"projector_widths", c.model.projector_widths},
        {"projector_bn", c.model.projector_bn},
        {"predictor_widths", c.model.predictor_widths},
        {"asymmetry", std::string(to_string(c.model.asymmetry))},
        {"use_bias", c.model.use_bias},
        {"bn_momentum", c.model.bn_momentum}}},
      {"loss",
       {{"variant", std::string(to_string(c.loss.variant))},
        {"lambda", c.loss.lambda},
        {"temperature", c.loss.temperature},
        {"epsilon", c.loss.epsilon},
        {"jitter", c.loss.jitter}}},
      {"optimizer",
       {{"use_lars", c.optimizer.use_lars},
        {"momentum", c.optimizer.momentum},
        {"weight_decay", c.optimizer.weight_decay},
        {"eta", c.optimizer.eta},
        {"base_lr", c.base_lr},
        {"bias_lr", c.bias_lr},
        {"warmup_fraction", c.warmup_fraction},
        {"final_lr_ratio", c.final_lr_ratio}}},
      {"augmentation",
       {{"crop_scale", {a.crop_scale_min, a.crop_scale_max}},
        {"crop_ratio", {a.crop_ratio_min, a.crop_ratio_max}},
        {"flip", per_view(a.flip)},
        {"color_jitter", per_view(a.color_jitter)},
        {"brightness", a.brightness},
        {"contrast", a.contrast},
        {"saturation", a.saturation},
        {"hue", a.hue},
        {"grayscale", per_view(a.grayscale)},
        {"blur", per_view(a.blur)},
        {"blur_sigma", {a.blur_sigma_min, a.blur_sigma_max}},
        {"solarize", per_view(a.solarize)},
        {"solarize_threshold", a.solarize_threshold},
        {"enabled", enabled}}},
      {"training",
       {{"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"output_dir", c.output_dir},
        {"log_every_steps", c.log_every_steps},
        {"checkpoint_every_epochs", c.checkpoint_every_epochs},
        {"record_wall_clock", c.record_wall_clock}}},
      {"diagnostics",
       {{"probe_every_epochs", c.probe_every_epochs},
        {"diagnostic_samples", c.diagnostic_samples},
        {"conditional_images", c.conditional_images},
        {"conditional_views", c.conditional_views}}},
      {"probe",
       {{"epochs", c.probe.epochs},
        {"lr", c.probe.lr},
        {"weight_decay", c.probe.weight_decay},
        {"momentum", c.probe.momentum},
        {"batch_size", c.probe.batch_size},
        {"seed", c.probe.seed}}},
  };
}

void read_pair(Reader& r, const char* key, double& lo, double& hi) {
  std::vector<double> v{lo, hi};
  r.get(key, v);
  if (v.size() != 2) throw ConfigError("config: '" + r.path(key) + "' must be [min, max]");
  lo = v[0];
  hi = v[1];
}

RunConfig from_json(const json& root) {
  RunConfig c;
  Reader top(root, "config");
  if (const json* j = top.child("dataset")) {
    Reader r(*j, "dataset");
    auto& g = c.dataset.generate;
    r.get("path", c.dataset.path);
    r.get("recipe", g.recipe);
    r.get("n", g.n);
    r.get("seed", g.seed);
    r.get("height", g.height);
    r.get("width", g.width);
    r.get("channels", g.channels);
    r.get("classes", g.classes);
    r.get("noise", g.noise);
    r.get("margin", g.margin);
    r.get("train_fraction", c.dataset.train_fraction);
  }
  if (const json* j = top.child("model")) {
    Reader r(*j, "model");
    r.get("input_dim", c.model.input_dim);
    r.get("encoder_widths", c.model.encoder_widths);
    r.get("representation_dim", c.model.representation_dim);
    r.get("encoder_bn", c.model.encoder_bn);
    r.get("projector_widths", c.model.projector_widths);
    r.get("projector_bn", c.model.projector_bn);
    r.get("predictor_widths", c.model.predictor_widths);
    std::string asym(to_string(c.model.asymmetry));
    r.get("asymmetry", asym);
    c.model.asymmetry = asymmetry_from_string(asym);
    r.get("use_bias", c.model.use_bias);
    r.get("bn_momentum", c.model.bn_momentum);
  }
  if (const json* j = top.child("loss")) {
    Reader r(*j, "loss");
    std::string variant(to_string(c.loss.variant));
    r.get("variant", variant);
    c.loss.variant = loss_variant_from_string(variant);
    r.get("lambda", c.loss.lambda);
    r.get("temperature", c.loss.temperature);
    r.get("epsilon", c.loss.epsilon);
    r.get("jitter", c.loss.jitter);
  }
  if (const json* j = top.child("optimizer")) {
    Reader r(*j, "optimizer");
    r.get("use_lars", c.optimizer.use_lars);
    r.get("momentum", c.optimizer.momentum);
    r.get("weight_decay", c.optimizer.weight_decay);
    r.get("eta", c.optimizer.eta);
    r.get("base_lr", c.base_lr);
    r.get("bias_lr", c.bias_lr);
    r.get("warmup_fraction", c.warmup_fraction);
    r.get("final_lr_ratio", c.final_lr_ratio);
  }
  if (const json* j = top.child("augmentation")) {
    Reader r(*j, "augmentation");
    auto& a = c.augmentation;
    read_pair(r, "crop_scale", a.crop_scale_min, a.crop_scale_max);
    read_pair(r, "crop_ratio", a.crop_ratio_min, a.crop_ratio_max);
    read_per_view(r, "flip", a.flip);
    read_per_view(r, "color_jitter", a.color_jitter);
    r.get("brightness", a.brightness);
    r.get("contrast", a.contrast);
    r.get("saturation", a.saturation);
    r.get("hue", a.hue);
    read_per_view(r, "grayscale", a.grayscale);
    read_per_view(r, "blur", a.blur);
    read_pair(r, "blur_sigma", a.blur_sigma_min, a.blur_sigma_max);
    read_per_view(r, "solarize", a.solarize);
    r.get("solarize_threshold", a.solarize_threshold);
    if (r.child("enabled")) {
      std::vector<std::string> names;
      r.get("enabled", names);
      a.enabled = 0;
      for (const auto& n : names) a.set_enabled(transform_from_string(n), true);
    }
  }
  if (const json* j = top.child("training")) {
    Reader r(*j, "training");
    r.get("epochs", c.epochs);
    r.get("batch_size", c.batch_size);
    r.get("seed", c.seed);
    r.get("output_dir", c.output_dir);
    r.get("log_every_steps", c.log_every_steps);
    r.get("checkpoint_every_epochs", c.checkpoint_every_epochs);
    r.get("record_wall_clock", c.record_wall_clock);
  }
  if (const json* j = top.child("diagnostics")) {
    Reader r(*j, "diagnostics");
    r.get("probe_every_epochs", c.probe_every_epochs);
    r.get("diagnostic_samples", c.diagnostic_samples);
    r.get("conditional_images", c.conditional_images);
    r.get("conditional_views", c.conditional_views);
  }
  if (const json* j = top.child("probe")) {
    Reader r(*j, "probe");
    r.get("epochs", c.probe.epochs);
    r.get("lr", c.probe.lr);
    r.get("weight_decay", c.probe.weight_decay);
    r.get("momentum", c.probe.momentum);
    r.get("batch_size", c.probe.batch_size);
    r.get("seed", c.probe.seed);
  }
  return c;
}

}  // namespace

ScheduleConfig RunConfig::schedule() const {
  ScheduleConfig s;
  s.base_lr = base_lr;
  s.bias_lr = bias_lr;
  s.batch_size = batch_size;
  s.total_epochs = epochs;
  s.warmup_epochs = warmup_fraction * static_cast<double>(epochs);
  s.final_lr_ratio = final_lr_ratio;
  return s;
}

void RunConfig::validate() const {
  if (batch_size < 2) throw ConfigError("config: batch_size must be >= 2");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (!(base_lr >= 0.0)) throw ConfigError("config: base_lr must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ConfigError("config: warmup_fraction must be in [0, 1)");
  }
  if (!(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0)) {
    throw ConfigError("config: train_fraction must be in (0, 1)");
  }
  if (probe_every_epochs == 0) throw ConfigError("config: probe_every_epochs must be >= 1");
  if (diagnostic_samples < 2) throw ConfigError("config: diagnostic_samples must be >= 2");
  if (conditional_views < 2) throw ConfigError("config: conditional_views must be >= 2");
  if (output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
  model.validate();
  loss.validate();
  optimizer.validate();
  augmentation.validate();
  probe.validate();
  // A zero base lr is allowed (null-update runs); the schedule needs a
  // positive one, so validate it with a stand-in.
  ScheduleConfig s = schedule();
  if (s.base_lr == 0.0) s.base_lr = 1.0;
  s.validate();
}

std::string config_to_json(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return from_json(j);
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const RunConfig& config, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("config: cannot write '" + path + "'");
  f << config_to_json(config);
}

Dataset load_run_dataset(const RunConfig& config) {
  Dataset ds = config.dataset.path.empty() ? generate_toy_dataset(config.dataset.generate)
                                           : load_dataset(config.dataset.path);
  ds.validate();
  if (ds.input_dim() != config.model.input_dim) {
    throw ShapeError("dataset images have " + std::to_string(ds.input_dim()) +
                     " values but model.input_dim is " + std::to_string(config.model.input_dim));
  }
  return ds;
}

}  // namespace btlab
