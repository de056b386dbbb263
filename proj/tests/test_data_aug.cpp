#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "btlab/data_aug.hpp"

using namespace btlab;

namespace {

Image ramp_image(std::size_t h, std::size_t w, std::size_t c) {
  Image im(h, w, c);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        im.at(y, x, ch) = (0.3 * y + 0.5 * x + 0.7 * ch) / (0.3 * h + 0.5 * w + 2.0);
  return im;
}

Image sample_image(std::size_t channels) {
  GenerateOptions o;
  o.n = 1;
  o.seed = 5;
  o.channels = channels;
  return generate_toy_dataset(o).images[0];
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("btlab_" + name)).string();
}

}  // namespace

TEST(Augment, IdentityPolicyIsIdentity) {
  for (std::size_t c : {1u, 3u}) {
    const Image im = sample_image(c);
    for (std::uint64_t key = 0; key < 20; ++key) {
      const Image out = augment(im, AugmentationPolicy::identity(), View::A, key);
      ASSERT_EQ(out.pixels.size(), im.pixels.size());
      for (std::size_t i = 0; i < im.pixels.size(); ++i)
        EXPECT_NEAR(out.pixels[i], im.pixels[i], 1e-12);
    }
  }
}

TEST(Augment, SolarizeDefinition) {
  Image im(1, 3, 1);
  im.pixels = {0.8, 0.3, 0.5};
  const Image out = solarize(im, 0.5);
  EXPECT_NEAR(out.pixels[0], 0.2, 1e-15);
  EXPECT_EQ(out.pixels[1], 0.3);
  EXPECT_EQ(out.pixels[2], 0.5);
}

TEST(Augment, SameKeyIsBitwiseIdentical) {
  const Image im = sample_image(3);
  AugmentationPolicy p;
  for (std::uint64_t key : {1ull, 99ull, 123456789ull}) {
    auto [a1, b1] = two_views(im, p, key);
    auto [a2, b2] = two_views(im, p, key);
    EXPECT_EQ(a1.pixels, a2.pixels);
    EXPECT_EQ(b1.pixels, b2.pixels);
    EXPECT_NE(a1.pixels, b1.pixels);
  }
  EXPECT_EQ(augment_key(7, 2, 3), augment_key(7, 2, 3));
  EXPECT_NE(augment_key(7, 2, 3), augment_key(7, 3, 2));
  EXPECT_NE(augment_key(7, 2, 3), augment_key(8, 2, 3));
}

TEST(Augment, PixelsStayInUnitInterval) {
  AugmentationPolicy p;
  p.solarize = {0.5, 0.5};
  for (std::size_t c : {1u, 3u}) {
    const Image im = sample_image(c);
    for (std::uint64_t key = 0; key < 300; ++key) {
      const Image out = augment(im, p, key % 2 ? View::A : View::B, key);
      for (double v : out.pixels) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
    }
  }
}

TEST(Augment, DisablingOneTransformLeavesOtherDrawsAlone) {
  const Image im = sample_image(3);
  AugmentationPolicy full;
  for (unsigned t = 0; t < kTransformCount; ++t) {
    AugmentationPolicy ablated = full;
    ablated.set_enabled(static_cast<Transform>(t), false);
    for (std::uint64_t key = 0; key < 50; ++key) {
      AugmentTrace a, b;
      augment(im, full, View::B, key, &a);
      augment(im, ablated, View::B, key, &b);
      for (unsigned u = 0; u < kTransformCount; ++u) {
        if (u == t) continue;
        EXPECT_EQ(a.applied[u], b.applied[u]);
      }
      if (t != 0) {
        EXPECT_EQ(a.crop_w, b.crop_w);
        EXPECT_EQ(a.crop_x, b.crop_x);
      }
      if (t != static_cast<unsigned>(Transform::blur)) {
        EXPECT_EQ(a.blur_sigma_px, b.blur_sigma_px);
      }
      EXPECT_FALSE(b.applied[t]);
    }
  }
}

TEST(Augment, DeterministicPolicyViewsDifferOnlyByAsymmetricTransforms) {
  const Image im = sample_image(1);
  AugmentationPolicy p = AugmentationPolicy::identity();
  p.blur = {1.0, 0.0};
  p.solarize = {0.0, 1.0};
  AugmentTrace ta;
  const Image a = augment(im, p, View::A, 42, &ta);
  const Image b = augment(im, p, View::B, 42);
  EXPECT_EQ(a.pixels, gaussian_blur(im, ta.blur_sigma_px).pixels);
  EXPECT_EQ(b.pixels, solarize(im, 0.5).pixels);
  EXPECT_GE(ta.blur_sigma_px, 0.1 * 8 / kBlurReferenceWidth);
  EXPECT_LE(ta.blur_sigma_px, 2.0 * 8 / kBlurReferenceWidth);
}

TEST(Augment, ApplicationFrequenciesMatchPolicy) {
  const Image im = sample_image(3);
  const AugmentationPolicy p;
  const int draws = 10000;
  for (View v : {View::A, View::B}) {
    int counts[kTransformCount] = {};
    for (int k = 0; k < draws; ++k) {
      AugmentTrace t;
      augment(im, p, v, augment_key(2024, 0, static_cast<std::uint64_t>(k)), &t);
      for (unsigned u = 0; u < kTransformCount; ++u) counts[u] += t.applied[u];
    }
    const double expected[kTransformCount] = {1.0,
                                              p.flip.at(v),
                                              p.color_jitter.at(v),
                                              p.grayscale.at(v),
                                              p.blur.at(v),
                                              p.solarize.at(v)};
    for (unsigned u = 0; u < kTransformCount; ++u) {
      EXPECT_NEAR(counts[u] / static_cast<double>(draws), expected[u], 0.02)
          << to_string(static_cast<Transform>(u)) << " view " << static_cast<int>(v);
    }
  }
}

TEST(Augment, DegenerateCropWindowThrows) {
  Image tiny(2, 2, 1, 0.5);
  EXPECT_THROW(augment(tiny, AugmentationPolicy{}, View::A, 1), DomainError);
  AugmentationPolicy p;
  p.crop_scale_min = 0.5;
  EXPECT_NO_THROW(augment(tiny, p, View::A, 1));
}

TEST(Augment, InvalidPolicyRejected) {
  AugmentationPolicy p;
  p.blur.b = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = AugmentationPolicy{};
  p.crop_scale_min = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_EQ(transform_from_string("blur"), Transform::blur);
  EXPECT_THROW(transform_from_string("warp"), ConfigError);
}

TEST(Transforms, BilinearCropReproducesLinearRamp) {
  const Image im = ramp_image(8, 8, 1);
  const double x0 = 1.25, y0 = 0.5, w = 5.0, h = 6.0;
  const Image out = resized_crop(im, x0, y0, w, h);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      const double fy = std::clamp(y0 + (i + 0.5) * h / 8 - 0.5, 0.0, 7.0);
      const double fx = std::clamp(x0 + (j + 0.5) * w / 8 - 0.5, 0.0, 7.0);
      EXPECT_NEAR(out.at(i, j, 0), (0.3 * fy + 0.5 * fx) / (0.3 * 8 + 0.5 * 8 + 2.0), 1e-12);
    }
}

TEST(Transforms, FlipTwiceIsIdentityAndBlurKeepsConstants) {
  const Image im = ramp_image(5, 7, 3);
  EXPECT_EQ(horizontal_flip(horizontal_flip(im)).pixels, im.pixels);
  EXPECT_EQ(horizontal_flip(im).at(2, 0, 1), im.at(2, 6, 1));
  const Image flat(6, 6, 1, 0.37);
  for (double v : gaussian_blur(flat, 1.3).pixels) EXPECT_NEAR(v, 0.37, 1e-15);
  const Image g = to_grayscale(im);
  EXPECT_NEAR(g.at(1, 1, 0), 0.299 * im.at(1, 1, 0) + 0.587 * im.at(1, 1, 1) + 0.114 * im.at(1, 1, 2),
              1e-15);
}

TEST(Generate, ShapesLabelsAreStratified) {
  GenerateOptions o;
  o.n = 4;
  const Dataset ds = generate_toy_dataset(o);
  EXPECT_EQ(std::set<int>(ds.labels.begin(), ds.labels.end()), (std::set<int>{0, 1, 2, 3}));
  EXPECT_EQ(ds.num_classes, 4u);
  EXPECT_EQ(ds.input_dim(), 64u);
}

TEST(Generate, SameSeedIsBitwiseIdentical) {
  for (const auto& recipe : dataset_recipes()) {
    GenerateOptions o;
    o.recipe = recipe;
    o.n = 40;
    o.seed = 3;
    const Dataset a = generate_toy_dataset(o), b = generate_toy_dataset(o);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.images[i].pixels, b.images[i].pixels);
    o.seed = 4;
    const Dataset c = generate_toy_dataset(o);
    EXPECT_NE(a.images[0].pixels, c.images[0].pixels) << recipe;
    for (const auto& im : a.images)
      for (double v : im.pixels) ASSERT_EQ(std::round(v * 255.0) / 255.0, v);
  }
}

TEST(Generate, BlobsWithoutNoiseSeparateClassMeans) {
  GenerateOptions o;
  o.recipe = "blobs";
  o.n = 64;
  o.noise = 0.0;
  o.margin = 1.0;
  const Dataset ds = generate_toy_dataset(o);
  std::vector<std::vector<double>> means(ds.num_classes, std::vector<double>(64, 0.0));
  std::vector<int> counts(ds.num_classes, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto l = static_cast<std::size_t>(ds.labels[i]);
    ++counts[l];
    for (std::size_t k = 0; k < 64; ++k) means[l][k] += ds.images[i].pixels[k];
  }
  for (std::size_t l = 0; l < ds.num_classes; ++l)
    for (double& v : means[l]) v /= counts[l];
  for (std::size_t a = 0; a < ds.num_classes; ++a)
    for (std::size_t b = a + 1; b < ds.num_classes; ++b) {
      double d = 0.0;
      for (std::size_t k = 0; k < 64; ++k) d += (means[a][k] - means[b][k]) * (means[a][k] - means[b][k]);
      EXPECT_GE(std::sqrt(d), o.margin);
    }
  o.margin = 100.0;
  EXPECT_THROW(generate_toy_dataset(o), ConfigError);
}

TEST(Generate, RejectsUnknownRecipe) {
  GenerateOptions o;
  o.recipe = "imagenet";
  EXPECT_THROW(generate_toy_dataset(o), ConfigError);
  o.recipe = "shapes";
  o.n = 0;
  EXPECT_THROW(generate_toy_dataset(o), ConfigError);
}

TEST(Btds, RoundTripIsBitwise) {
  for (std::size_t c : {1u, 3u}) {
    GenerateOptions o;
    o.n = 37;
    o.channels = c;
    o.height = 5;
    o.width = 9;
    const Dataset ds = generate_toy_dataset(o);
    const std::string path = temp_path("roundtrip.btds");
    save_dataset(ds, path);
    const Dataset back = load_dataset(path);
    std::remove(path.c_str());
    ASSERT_EQ(back.size(), ds.size());
    EXPECT_EQ(back.labels, ds.labels);
    EXPECT_EQ(back.num_classes, ds.num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(back.images[i].pixels, ds.images[i].pixels);
    EXPECT_EQ(encode_dataset(back), encode_dataset(ds));
  }
}

TEST(Btds, HeaderLayout) {
  GenerateOptions o;
  o.n = 3;
  const auto bytes = encode_dataset(generate_toy_dataset(o));
  ASSERT_EQ(bytes.size(), 18u + 3u + 3u * 64u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BTDS");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 3);
  EXPECT_EQ(bytes[12], 8);
  EXPECT_EQ(bytes[14], 8);
  EXPECT_EQ(bytes[16], 1);
  EXPECT_EQ(bytes[18], 0);
  EXPECT_EQ(bytes[19], 1);
}

TEST(Btds, StructuredErrors) {
  GenerateOptions o;
  o.n = 8;
  const auto good = encode_dataset(generate_toy_dataset(o));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_dataset(bad_magic), FormatError);

  auto truncated = good;
  truncated.pop_back();
  try {
    decode_dataset(truncated);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }

  auto count_mismatch = good;
  count_mismatch[8] = 9;
  EXPECT_THROW(decode_dataset(count_mismatch), FormatError);

  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_dataset(trailing), FormatError);

  auto version = good;
  version[4] = 2;
  EXPECT_THROW(decode_dataset(version), FormatError);

  EXPECT_THROW(decode_dataset(good, 3), FormatError);  // label 3 with 3 classes
  EXPECT_NO_THROW(decode_dataset(good, 4));
  EXPECT_THROW(decode_dataset(std::vector<std::uint8_t>(5, 0)), FormatError);
  EXPECT_THROW(load_dataset(temp_path("does_not_exist.btds")), FormatError);
}

TEST(Datasets, TensorAndSplit) {
  GenerateOptions o;
  o.n = 10;
  const Dataset ds = generate_toy_dataset(o);
  const Tensor t = dataset_tensor(ds, {3, 1});
  EXPECT_EQ(t.shape(), (Shape{2, 64}));
  EXPECT_EQ(t.at(1, 5), ds.images[1].pixels[5]);
  auto [train, test] = split_dataset(ds, 0.8);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
  EXPECT_EQ(test.labels[0], ds.labels[8]);
}
