#pragma once

// Toy image datasets, the BTDS file format, and the two-view augmentation
// pipeline.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "btlab/tensor.hpp"

namespace btlab {

/// Row-major H × W × C, values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0);

  double& at(std::size_t y, std::size_t x, std::size_t ch) {
    return pixels[(y * width + x) * channels + ch];
  }
  double at(std::size_t y, std::size_t x, std::size_t ch) const {
    return pixels[(y * width + x) * channels + ch];
  }
  std::size_t numel() const { return pixels.size(); }
};

enum class View { A = 0, B = 1 };

enum class Transform : unsigned {
  crop = 0,
  flip,
  color_jitter,
  grayscale,
  blur,
  solarize,
};
inline constexpr std::size_t kTransformCount = 6;

std::string_view to_string(Transform t);
Transform transform_from_string(std::string_view name);

struct PerView {
  double a = 0.0;
  double b = 0.0;
  double at(View v) const { return v == View::A ? a : b; }
};

struct AugmentationPolicy {
  double crop_scale_min = 0.08;
  double crop_scale_max = 1.0;
  double crop_ratio_min = 3.0 / 4.0;
  double crop_ratio_max = 4.0 / 3.0;
  PerView flip{0.5, 0.5};
  PerView color_jitter{0.8, 0.8};
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.2;
  double hue = 0.1;
  PerView grayscale{0.2, 0.2};
  PerView blur{1.0, 0.1};
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  PerView solarize{0.0, 0.2};
  double solarize_threshold = 0.5;
  /// Bit i set means Transform(i) is enabled.
  unsigned enabled = (1u << kTransformCount) - 1;

  bool is_enabled(Transform t) const { return (enabled >> static_cast<unsigned>(t)) & 1u; }
  void set_enabled(Transform t, bool on);
  void validate() const;

  /// Full-image crop, every optional transform at probability 0.
  static AugmentationPolicy identity();
};

/// Which optional transforms fired for one view, plus the crop window.
struct AugmentTrace {
  bool applied[kTransformCount] = {};
  double crop_x = 0, crop_y = 0, crop_w = 0, crop_h = 0;
  double blur_sigma_px = 0;
};

/// Base key of the augmentation streams for one (seed, epoch, sample).
std::uint64_t augment_key(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample);

/// Random resized crop → flip → color jitter → grayscale → blur → solarize.
/// Each transform draws from its own stream derived from (key, view,
/// transform), so toggling one never shifts the draws of another. Output
/// pixels are clamped to [0, 1].
Image augment(const Image& image, const AugmentationPolicy& policy, View view,
              std::uint64_t key, AugmentTrace* trace = nullptr);

std::pair<Image, Image> two_views(const Image& image, const AugmentationPolicy& policy,
                                  std::uint64_t key);

// Individual transforms, exposed for tests.
Image resized_crop(const Image& image, double x0, double y0, double w, double h);
Image horizontal_flip(const Image& image);
Image gaussian_blur(const Image& image, double sigma_px);
Image solarize(const Image& image, double threshold);
Image to_grayscale(const Image& image);

/// The sigma range is in pixels of a 224-pixel-wide image, the resolution it
/// was specified for, and is scaled by width/224.
inline constexpr double kBlurReferenceWidth = 224.0;

// ---------------------------------------------------------------------------

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::string descriptor;

  std::size_t size() const { return images.size(); }
  std::size_t height() const { return images.empty() ? 0 : images.front().height; }
  std::size_t width() const { return images.empty() ? 0 : images.front().width; }
  std::size_t channels() const { return images.empty() ? 0 : images.front().channels; }
  std::size_t input_dim() const { return height() * width() * channels(); }
  void validate() const;
};

struct GenerateOptions {
  std::string recipe = "shapes";  // shapes | two-moons-images | blobs
  std::size_t n = 2048;
  std::uint64_t seed = 0;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels = 1;
  std::size_t classes = 4;  // two-moons-images always has 2
  double noise = 0.05;
  /// blobs: minimum L2 distance between class prototype images.
  double margin = 1.0;
};

const std::vector<std::string>& dataset_recipes();

/// Deterministic in (options). Labels cycle 0, 1, ..., K-1 so every prefix
/// of length K·m is balanced. Pixels are quantized to multiples of 1/255.
Dataset generate_toy_dataset(const GenerateOptions& options);

/// Per-recipe class prototypes used by blobs (exposed for the margin check).
std::vector<Image> blob_prototypes(const GenerateOptions& options);

/// Rows are flattened images.
Tensor images_to_tensor(const std::vector<Image>& images);
Tensor dataset_tensor(const Dataset& ds, const std::vector<std::size_t>& indices);

/// First round(fraction·n) samples train, the rest test.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction);

/// BTDS little-endian: "BTDS", u32 version 1, u32 count, u16 h, u16 w, u8 c,
/// u8 reserved, count label bytes, count·h·w·c pixel bytes (value·255).
void save_dataset(const Dataset& ds, const std::string& path);
/// expected_classes = 0 infers max label + 1; otherwise labels must be below it.
Dataset load_dataset(const std::string& path, std::size_t expected_classes = 0);

std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes, std::size_t expected_classes = 0,
                       const std::string& descriptor = "memory");

}  // namespace btlab
