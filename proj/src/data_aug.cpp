#include "btlab/data_aug.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "btlab/rng.hpp"

namespace btlab {

namespace {

constexpr double kPi = std::numbers::pi;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

double quantize(double v) { return std::round(clamp01(v) * 255.0) / 255.0; }

void clamp_image(Image& img) {
  for (double& v : img.pixels) v = clamp01(v);
}

double mean_intensity(const Image& img) {
  double s = 0.0;
  for (double v : img.pixels) s += v;
  return s / static_cast<double>(img.pixels.size());
}

// Rotation about the gray axis (1,1,1)/√3 by `angle` radians.
void rotate_hue(Image& img, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), k = 1.0 / std::sqrt(3.0);
  const double t = 1.0 - c;
  double r[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = t * k * k + (i == j ? c : 0.0);
  // cross-product part s·[k]×
  r[0][1] -= s * k; r[0][2] += s * k;
  r[1][0] += s * k; r[1][2] -= s * k;
  r[2][0] -= s * k; r[2][1] += s * k;
  for (std::size_t p = 0; p < img.height * img.width; ++p) {
    double* px = &img.pixels[p * 3];
    const double in[3] = {px[0], px[1], px[2]};
    for (int i = 0; i < 3; ++i) px[i] = r[i][0] * in[0] + r[i][1] * in[1] + r[i][2] * in[2];
  }
}

void check_crop_feasible(const AugmentationPolicy& p, std::size_t h, std::size_t w) {
  // Smallest window the sampler can produce, before clamping to the image.
  const double area = p.crop_scale_min * static_cast<double>(h * w);
  const double min_w = std::sqrt(area * p.crop_ratio_min);
  const double min_h = std::sqrt(area / p.crop_ratio_max);
  if (min_w < 1.0 || min_h < 1.0) {
    throw DomainError("augment: crop window can shrink below one pixel (" +
                      std::to_string(min_w) + " x " + std::to_string(min_h) + ") on a " +
                      std::to_string(h) + "x" + std::to_string(w) + " image");
  }
}

}  // namespace

Image::Image(std::size_t h, std::size_t w, std::size_t c, double fill)
    : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

std::string_view to_string(Transform t) {
  switch (t) {
    case Transform::crop: return "crop";
    case Transform::flip: return "flip";
    case Transform::color_jitter: return "color_jitter";
    case Transform::grayscale: return "grayscale";
    case Transform::blur: return "blur";
    case Transform::solarize: return "solarize";
  }
  return "unknown";
}

Transform transform_from_string(std::string_view name) {
  for (unsigned i = 0; i < kTransformCount; ++i) {
    if (to_string(static_cast<Transform>(i)) == name) return static_cast<Transform>(i);
  }
  throw ConfigError("unknown transform '" + std::string(name) + "'");
}

void AugmentationPolicy::set_enabled(Transform t, bool on) {
  const unsigned bit = 1u << static_cast<unsigned>(t);
  enabled = on ? (enabled | bit) : (enabled & ~bit);
}

void AugmentationPolicy::validate() const {
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError(std::string("augmentation: ") + what + " probability must be in [0, 1]");
    }
  };
  for (auto [pv, name] : {std::pair{flip, "flip"}, {color_jitter, "color_jitter"},
                          {grayscale, "grayscale"}, {blur, "blur"}, {solarize, "solarize"}}) {
    prob(pv.a, name);
    prob(pv.b, name);
  }
  if (!(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0)) {
    throw ConfigError("augmentation: crop scale range must satisfy 0 < min <= max <= 1");
  }
  if (!(crop_ratio_min > 0.0 && crop_ratio_min <= crop_ratio_max)) {
    throw ConfigError("augmentation: crop ratio range must satisfy 0 < min <= max");
  }
  if (!(brightness >= 0.0 && brightness < 1.0 && contrast >= 0.0 && contrast < 1.0 &&
        saturation >= 0.0 && saturation < 1.0 && hue >= 0.0 && hue <= 0.5)) {
    throw ConfigError("augmentation: jitter strengths out of range");
  }
  if (!(blur_sigma_min > 0.0 && blur_sigma_min <= blur_sigma_max)) {
    throw ConfigError("augmentation: blur sigma range must satisfy 0 < min <= max");
  }
  if (!(solarize_threshold >= 0.0 && solarize_threshold <= 1.0)) {
    throw ConfigError("augmentation: solarize threshold must be in [0, 1]");
  }
  if (enabled >> kTransformCount) throw ConfigError("augmentation: unknown bits in enabled mask");
}

AugmentationPolicy AugmentationPolicy::identity() {
  AugmentationPolicy p;
  p.crop_scale_min = p.crop_scale_max = 1.0;
  p.flip = p.color_jitter = p.grayscale = p.blur = p.solarize = PerView{0.0, 0.0};
  return p;
}

// ---------------------------------------------------------------------------
// Transforms

Image resized_crop(const Image& image, double x0, double y0, double w, double h) {
  Image out(image.height, image.width, image.channels);
  const double sy = h / static_cast<double>(image.height);
  const double sx = w / static_cast<double>(image.width);
  const double max_y = static_cast<double>(image.height - 1);
  const double max_x = static_cast<double>(image.width - 1);
  for (std::size_t i = 0; i < image.height; ++i) {
    // Half-pixel centers: output center i + 0.5 maps into the window.
    const double fy = std::clamp(y0 + (static_cast<double>(i) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y_lo = static_cast<std::size_t>(std::floor(fy));
    const std::size_t y_hi = std::min(y_lo + 1, image.height - 1);
    const double wy = fy - static_cast<double>(y_lo);
    for (std::size_t j = 0; j < image.width; ++j) {
      const double fx = std::clamp(x0 + (static_cast<double>(j) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x_lo = static_cast<std::size_t>(std::floor(fx));
      const std::size_t x_hi = std::min(x_lo + 1, image.width - 1);
      const double wx = fx - static_cast<double>(x_lo);
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double top = image.at(y_lo, x_lo, c) * (1.0 - wx) + image.at(y_lo, x_hi, c) * wx;
        const double bot = image.at(y_hi, x_lo, c) * (1.0 - wx) + image.at(y_hi, x_hi, c) * wx;
        out.at(i, j, c) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

Image horizontal_flip(const Image& image) {
  Image out = image;
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < image.channels; ++c)
        out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
  return out;
}

Image gaussian_blur(const Image& image, double sigma_px) {
  if (!(sigma_px > 0.0)) throw DomainError("gaussian_blur: sigma must be > 0");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(2.0 * sigma_px));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
    const double v = std::exp(-0.5 * static_cast<double>(t * t) / (sigma_px * sigma_px));
    k[static_cast<std::size_t>(t + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;

  const auto h = static_cast<std::ptrdiff_t>(image.height);
  const auto w = static_cast<std::ptrdiff_t>(image.width);
  auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t hi) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, hi - 1));
  };
  Image tmp(image.height, image.width, image.channels);
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < image.channels; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t t = -radius; t <= radius; ++t)
          acc += k[static_cast<std::size_t>(t + radius)] *
                 image.at(static_cast<std::size_t>(y), clampi(x + t, w), c);
        tmp.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = acc;
      }
  Image out(image.height, image.width, image.channels);
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < image.channels; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t t = -radius; t <= radius; ++t)
          acc += k[static_cast<std::size_t>(t + radius)] *
                 tmp.at(clampi(y + t, h), static_cast<std::size_t>(x), c);
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = acc;
      }
  return out;
}

Image solarize(const Image& image, double threshold) {
  Image out = image;
  for (double& v : out.pixels)
    if (v >= threshold) v = 1.0 - v;
  return out;
}

Image to_grayscale(const Image& image) {
  if (image.channels != 3) return image;
  Image out = image;
  for (std::size_t p = 0; p < image.height * image.width; ++p) {
    const double* px = &image.pixels[p * 3];
    const double g = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    for (int c = 0; c < 3; ++c) out.pixels[p * 3 + c] = g;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

std::uint64_t augment_key(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample) {
  return Rng::stream(seed, {0xa06ULL, epoch, sample}).next_u64();
}

Image augment(const Image& image, const AugmentationPolicy& policy, View view,
              std::uint64_t key, AugmentTrace* trace) {
  policy.validate();
  if (image.pixels.empty() || image.pixels.size() != image.height * image.width * image.channels) {
    throw ShapeError("augment: malformed image");
  }
  AugmentTrace local;
  AugmentTrace& tr = trace ? *trace : local;
  tr = AugmentTrace{};
  const auto v = static_cast<std::uint64_t>(view);
  auto stream = [&](Transform t) { return Rng::stream(key, {v, static_cast<std::uint64_t>(t)}); };
  auto gate = [&](Transform t, Rng& rng, double p) {
    // The gate draw is consumed even when the transform is disabled, so the
    // stream layout never depends on the mask.
    const bool fire = rng.bernoulli(p) && policy.is_enabled(t);
    tr.applied[static_cast<unsigned>(t)] = fire;
    return fire;
  };

  const double H = static_cast<double>(image.height), W = static_cast<double>(image.width);
  Image img = image;

  if (policy.is_enabled(Transform::crop)) {
    check_crop_feasible(policy, image.height, image.width);
    Rng rng = stream(Transform::crop);
    const double area = rng.uniform(policy.crop_scale_min, policy.crop_scale_max) * H * W;
    const double ratio = std::exp(
        rng.uniform(std::log(policy.crop_ratio_min), std::log(policy.crop_ratio_max)));
    double cw = std::sqrt(area * ratio), ch = std::sqrt(area / ratio);
    // A window that overflows keeps its area and clamps the long side.
    if (cw > W) { cw = W; ch = std::min(H, area / W); }
    if (ch > H) { ch = H; cw = std::min(W, area / H); }
    const double x0 = rng.uniform() * (W - cw);
    const double y0 = rng.uniform() * (H - ch);
    tr.applied[0] = true;
    tr.crop_x = x0; tr.crop_y = y0; tr.crop_w = cw; tr.crop_h = ch;
    if (!(x0 == 0.0 && y0 == 0.0 && cw == W && ch == H)) img = resized_crop(img, x0, y0, cw, ch);
  } else {
    tr.crop_w = W;
    tr.crop_h = H;
  }

  {
    Rng rng = stream(Transform::flip);
    if (gate(Transform::flip, rng, policy.flip.at(view))) img = horizontal_flip(img);
  }
  {
    Rng rng = stream(Transform::color_jitter);
    if (gate(Transform::color_jitter, rng, policy.color_jitter.at(view))) {
      const double b = rng.uniform(1.0 - policy.brightness, 1.0 + policy.brightness);
      const double c = rng.uniform(1.0 - policy.contrast, 1.0 + policy.contrast);
      const double s = rng.uniform(1.0 - policy.saturation, 1.0 + policy.saturation);
      const double hshift = rng.uniform(-policy.hue, policy.hue);
      for (double& p : img.pixels) p *= b;
      clamp_image(img);
      const double m = mean_intensity(to_grayscale(img));
      for (double& p : img.pixels) p = (p - m) * c + m;
      clamp_image(img);
      if (img.channels == 3) {
        const Image g = to_grayscale(img);
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
          img.pixels[i] = g.pixels[i] + (img.pixels[i] - g.pixels[i]) * s;
        clamp_image(img);
        rotate_hue(img, 2.0 * kPi * hshift);
        clamp_image(img);
      }
    }
  }
  {
    Rng rng = stream(Transform::grayscale);
    if (gate(Transform::grayscale, rng, policy.grayscale.at(view))) img = to_grayscale(img);
  }
  {
    Rng rng = stream(Transform::blur);
    if (gate(Transform::blur, rng, policy.blur.at(view))) {
      const double sigma = rng.uniform(policy.blur_sigma_min, policy.blur_sigma_max);
      tr.blur_sigma_px = sigma * W / kBlurReferenceWidth;
      img = gaussian_blur(img, tr.blur_sigma_px);
    }
  }
  {
    Rng rng = stream(Transform::solarize);
    if (gate(Transform::solarize, rng, policy.solarize.at(view))) {
      img = solarize(img, policy.solarize_threshold);
    }
  }
  clamp_image(img);
  return img;
}

std::pair<Image, Image> two_views(const Image& image, const AugmentationPolicy& policy,
                                  std::uint64_t key) {
  return {augment(image, policy, View::A, key), augment(image, policy, View::B, key)};
}

// ---------------------------------------------------------------------------
// Datasets

void Dataset::validate() const {
  if (images.empty()) throw ShapeError("dataset: no images");
  if (labels.size() != images.size()) {
    throw ShapeError("dataset: " + std::to_string(images.size()) + " images but " +
                     std::to_string(labels.size()) + " labels");
  }
  const Image& f = images.front();
  if (f.height == 0 || f.width == 0 || (f.channels != 1 && f.channels != 3)) {
    throw ShapeError("dataset: images must be non-empty with 1 or 3 channels");
  }
  for (const auto& im : images) {
    if (im.height != f.height || im.width != f.width || im.channels != f.channels ||
        im.pixels.size() != f.pixels.size()) {
      throw ShapeError("dataset: images differ in shape");
    }
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw DomainError("dataset: label " + std::to_string(l) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
  }
}

const std::vector<std::string>& dataset_recipes() {
  static const std::vector<std::string> names{"shapes", "two-moons-images", "blobs"};
  return names;
}

namespace {

// Shape membership in the shape's own frame (unit radius).
bool inside_shape(int kind, double u, double v) {
  switch (kind) {
    case 0: return std::abs(u) <= 0.75 && std::abs(v) <= 0.75;  // square
    case 1: return u * u + v * v <= 1.0;                          // disk
    case 2: {                                                     // triangle
      for (int e = 0; e < 3; ++e) {
        const double a = 2.0 * kPi * e / 3.0 + kPi / 2.0;
        if (u * std::cos(a) + v * std::sin(a) < -0.5) return false;
      }
      return true;
    }
    case 3: return (std::abs(u) <= 0.28 && std::abs(v) <= 1.0) ||  // plus
                   (std::abs(v) <= 0.28 && std::abs(u) <= 1.0);
    case 4: {                                                      // ring
      const double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.36;
    }
    default:                                                       // L
      return (u >= -0.8 && u <= -0.3 && std::abs(v) <= 0.9) ||
             (v >= 0.4 && v <= 0.9 && u >= -0.8 && u <= 0.8);
  }
}

constexpr double kMaxRotation = 0.25;  // radians

Image render_shape(const GenerateOptions& o, int kind, Rng& rng) {
  const double W = static_cast<double>(o.width), H = static_cast<double>(o.height);
  const double side = std::min(W, H);
  const double cx = rng.uniform(0.35, 0.65) * W, cy = rng.uniform(0.35, 0.65) * H;
  const double radius = rng.uniform(0.25, 0.4) * side;
  // No augmentation undoes rotation, so it stays a small nuisance.
  const double theta = rng.uniform(-kMaxRotation, kMaxRotation);
  const double bg = rng.uniform(0.0, 0.25);
  std::vector<double> fg(o.channels);
  for (double& f : fg) f = rng.uniform(0.6, 1.0);
  const double ct = std::cos(theta), st = std::sin(theta);
  constexpr int kSuper = 4;
  Image img(o.height, o.width, o.channels);
  for (std::size_t y = 0; y < o.height; ++y)
    for (std::size_t x = 0; x < o.width; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy)
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = static_cast<double>(x) + (sx + 0.5) / kSuper - cx;
          const double py = static_cast<double>(y) + (sy + 0.5) / kSuper - cy;
          const double u = (ct * px + st * py) / radius, v = (-st * px + ct * py) / radius;
          hits += inside_shape(kind, u, v);
        }
      const double cover = static_cast<double>(hits) / (kSuper * kSuper);
      for (std::size_t c = 0; c < o.channels; ++c)
        img.at(y, x, c) = bg + (fg[c] - bg) * cover + o.noise * rng.normal();
    }
  return img;
}

Image render_moon(const GenerateOptions& o, int label, Rng& rng) {
  const double t = rng.uniform(0.0, kPi);
  double mx = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
  double my = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
  mx += 0.1 * rng.normal();
  my += 0.1 * rng.normal();
  // Moon plane [-1.2, 2.2] × [-0.7, 1.2] onto the pixel grid.
  const double px = (mx + 1.2) / 3.4 * static_cast<double>(o.width) - 0.5;
  const double py = (1.2 - my) / 1.9 * static_cast<double>(o.height) - 0.5;
  const double sigma = 0.1 * static_cast<double>(std::min(o.width, o.height));
  Image img(o.height, o.width, o.channels);
  for (std::size_t y = 0; y < o.height; ++y)
    for (std::size_t x = 0; x < o.width; ++x) {
      const double dx = static_cast<double>(x) - px, dy = static_cast<double>(y) - py;
      const double bump = 0.9 * std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
      for (std::size_t c = 0; c < o.channels; ++c)
        img.at(y, x, c) = 0.05 + bump + o.noise * rng.normal();
    }
  return img;
}

void quantize_image(Image& img) {
  for (double& v : img.pixels) v = quantize(v);
}

double l2_distance(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

std::vector<Image> blob_prototypes(const GenerateOptions& o) {
  std::vector<Image> protos;
  const double W = static_cast<double>(o.width), H = static_cast<double>(o.height);
  const double sigma = 0.12 * std::min(W, H);
  for (std::size_t k = 0; k < o.classes; ++k) {
    const double a = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(o.classes);
    const double cx = 0.5 * W - 0.5 + 0.3 * W * std::cos(a);
    const double cy = 0.5 * H - 0.5 + 0.3 * H * std::sin(a);
    Image img(o.height, o.width, o.channels);
    for (std::size_t y = 0; y < o.height; ++y)
      for (std::size_t x = 0; x < o.width; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        const double bump = 0.9 * std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
        for (std::size_t c = 0; c < o.channels; ++c) img.at(y, x, c) = 0.05 + bump;
      }
    quantize_image(img);
    protos.push_back(std::move(img));
  }
  return protos;
}

Dataset generate_toy_dataset(const GenerateOptions& o) {
  if (o.n == 0) throw ConfigError("generate: n must be > 0");
  if (o.height == 0 || o.width == 0 || o.height > 65535 || o.width > 65535) {
    throw ConfigError("generate: image size must be in [1, 65535]");
  }
  if (o.channels != 1 && o.channels != 3) throw ConfigError("generate: channels must be 1 or 3");
  if (!(o.noise >= 0.0)) throw ConfigError("generate: noise must be >= 0");

  std::uint64_t tag = 0;
  std::size_t classes = o.classes;
  if (o.recipe == "shapes") {
    tag = 1;
    if (classes < 2 || classes > 6) throw ConfigError("generate: shapes supports 2..6 classes");
  } else if (o.recipe == "two-moons-images") {
    tag = 2;
    classes = 2;
  } else if (o.recipe == "blobs") {
    tag = 3;
    if (classes < 2 || classes > 255) throw ConfigError("generate: blobs supports 2..255 classes");
  } else {
    throw ConfigError("generate: unknown recipe '" + o.recipe + "' (expected shapes, " +
                      "two-moons-images or blobs)");
  }

  std::vector<Image> protos;
  if (tag == 3) {
    GenerateOptions p = o;
    p.classes = classes;
    protos = blob_prototypes(p);
    for (std::size_t i = 0; i < classes; ++i)
      for (std::size_t j = i + 1; j < classes; ++j)
        if (l2_distance(protos[i], protos[j]) < o.margin) {
          throw ConfigError("generate: blob prototypes " + std::to_string(i) + " and " +
                            std::to_string(j) + " closer than margin " +
                            std::to_string(o.margin));
        }
  }

  Dataset ds;
  ds.num_classes = classes;
  ds.descriptor = o.recipe + ":n=" + std::to_string(o.n) + ":seed=" + std::to_string(o.seed);
  ds.images.reserve(o.n);
  for (std::size_t i = 0; i < o.n; ++i) {
    const int label = static_cast<int>(i % classes);
    Rng rng = Rng::stream(o.seed, {0xda7aULL, tag, i});
    Image img;
    if (tag == 1) {
      img = render_shape(o, label, rng);
    } else if (tag == 2) {
      img = render_moon(o, label, rng);
    } else {
      img = protos[static_cast<std::size_t>(label)];
      if (o.noise > 0.0)
        for (double& v : img.pixels) v += o.noise * rng.normal();
    }
    quantize_image(img);
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

Tensor images_to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw ShapeError("images_to_tensor: no images");
  const std::size_t d = images.front().numel();
  std::vector<double> data;
  data.reserve(images.size() * d);
  for (const auto& im : images) {
    if (im.numel() != d) throw ShapeError("images_to_tensor: images differ in size");
    data.insert(data.end(), im.pixels.begin(), im.pixels.end());
  }
  return Tensor({images.size(), d}, std::move(data));
}

Tensor dataset_tensor(const Dataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<Image> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(ds.images.at(i));
  return images_to_tensor(picked);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split: train fraction must be in (0, 1)");
  }
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * ds.size()));
  if (cut == 0 || cut >= ds.size()) throw ConfigError("split: both parts must be non-empty");
  Dataset train, test;
  for (Dataset* d : {&train, &test}) {
    d->num_classes = ds.num_classes;
    d->descriptor = ds.descriptor;
  }
  train.descriptor += ":train";
  test.descriptor += ":test";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Dataset& d = i < cut ? train : test;
    d.images.push_back(ds.images[i]);
    d.labels.push_back(ds.labels[i]);
  }
  return {train, test};
}

// ---------------------------------------------------------------------------
// BTDS

namespace {

constexpr char kMagic[4] = {'B', 'T', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 2 + 2 + 1 + 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in[pos + i]) << (8 * i));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  ds.validate();
  if (ds.height() > 65535 || ds.width() > 65535) throw FormatError("BTDS: image too large");
  if (ds.size() > 0xffffffffULL) throw FormatError("BTDS: too many images");
  for (int l : ds.labels)
    if (l > 255) throw FormatError("BTDS: label " + std::to_string(l) + " does not fit a byte");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.size()));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(ds.height()));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(ds.width()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(ds.channels()));
  put<std::uint8_t>(out, 0);
  for (int l : ds.labels) out.push_back(static_cast<std::uint8_t>(l));
  for (const auto& im : ds.images)
    for (double v : im.pixels) out.push_back(static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0)));
  return out;
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes, std::size_t expected_classes,
                       const std::string& descriptor) {
  if (bytes.size() < kHeaderBytes) {
    throw FormatError("BTDS: truncated header (" + std::to_string(bytes.size()) + " bytes)");
  }
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) throw FormatError("BTDS: bad magic");
  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kVersion) {
    throw FormatError("BTDS: unsupported version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(bytes, pos);
  const auto h = get<std::uint16_t>(bytes, pos);
  const auto w = get<std::uint16_t>(bytes, pos);
  const auto c = get<std::uint8_t>(bytes, pos);
  (void)get<std::uint8_t>(bytes, pos);
  if (count == 0 || h == 0 || w == 0 || (c != 1 && c != 3)) {
    throw FormatError("BTDS: invalid header (count " + std::to_string(count) + ", " +
                      std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c) + ")");
  }
  const std::size_t per_image = static_cast<std::size_t>(h) * w * c;
  const std::size_t expected = kHeaderBytes + count + count * per_image;
  if (bytes.size() < expected) {
    throw FormatError("BTDS: truncated payload: header promises " + std::to_string(expected) +
                      " bytes, file has " + std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw FormatError("BTDS: " + std::to_string(bytes.size() - expected) +
                      " unexpected trailing bytes");
  }
  Dataset ds;
  ds.descriptor = descriptor;
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const int l = bytes[pos + i];
    max_label = std::max(max_label, l);
    if (expected_classes && static_cast<std::size_t>(l) >= expected_classes) {
      throw FormatError("BTDS: label " + std::to_string(l) + " at index " + std::to_string(i) +
                        " outside [0, " + std::to_string(expected_classes) + ")");
    }
    ds.labels.push_back(l);
  }
  pos += count;
  ds.num_classes = expected_classes ? expected_classes : static_cast<std::size_t>(max_label) + 1;
  ds.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Image im(h, w, c);
    for (std::size_t k = 0; k < per_image; ++k) im.pixels[k] = bytes[pos + k] / 255.0;
    pos += per_image;
    ds.images.push_back(std::move(im));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  const auto bytes = encode_dataset(ds);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("BTDS: cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("BTDS: write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& path, std::size_t expected_classes) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("BTDS: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_dataset(bytes, expected_classes, path);
}

}  // namespace btlab
