#include <gtest/gtest.h>

#include <cmath>

#include "btlab/optim.hpp"
#include "oracles.hpp"

using namespace btlab;

namespace {

// Holds leaf tensors with hand-set gradients and exposes them as groups.
struct Fixture {
  Tensor w, b;
  std::vector<ParamGroup> groups;

  Fixture(std::vector<double> wv, std::vector<double> bv, double wd, double bias_scale) {
    w = Tensor({wv.size()}, wv, true);
    b = Tensor({bv.size()}, bv, true);
    groups = make_param_groups({{"w", &w, ParamKind::weight}, {"b", &b, ParamKind::bias}}, wd,
                               bias_scale);
  }

  void set_grads(const std::vector<double>& gw, const std::vector<double>& gb) {
    w.zero_grad();
    b.zero_grad();
    sum(w * Tensor({gw.size()}, gw)).backward();
    sum(b * Tensor({gb.size()}, gb)).backward();
  }
};

}  // namespace

TEST(Schedule, ScaledLr) {
  ScheduleConfig c;
  c.batch_size = 2048;
  EXPECT_DOUBLE_EQ(scaled_lr(c).weights, 1.6);
  c.batch_size = 256;
  EXPECT_EQ(scaled_lr(c).weights, 0.2);
  c.batch_size = 512;
  EXPECT_DOUBLE_EQ(scaled_lr(c).biases, 0.0096);
}

TEST(Schedule, WarmupAndCosine) {
  ScheduleConfig c;
  c.batch_size = 256;
  c.warmup_epochs = 10;
  c.total_epochs = 100;
  const std::uint64_t spe = 7;
  EXPECT_EQ(lr_at(c, 0, spe), 0.0);
  EXPECT_EQ(lr_at(c, 70, spe), 0.2);
  EXPECT_NEAR(lr_at(c, 700, spe), 0.2 / 1000.0, 1e-12);
  EXPECT_NEAR(lr_at(c, 35, spe), 0.1, 1e-15);
  EXPECT_THROW(lr_at(c, 701, spe), DomainError);
}

TEST(Schedule, ContinuousAtJunctionAndMonotoneAfter) {
  ScheduleConfig c;
  c.warmup_epochs = 2;
  c.total_epochs = 20;
  const std::uint64_t spe = 1000;
  EXPECT_NEAR(lr_at(c, 1999, spe), 0.2, 1e-3);
  EXPECT_NEAR(lr_at(c, 2000, spe), 0.2, 1e-12);
  EXPECT_NEAR(lr_at(c, 2001, spe), 0.2, 1e-12 + 1e-6);
  double prev = lr_at(c, 2000, spe);
  for (std::uint64_t s = 2001; s <= 20000; ++s) {
    const double cur = lr_at(c, s, spe);
    ASSERT_LE(cur, prev) << s;
    prev = cur;
  }
}

TEST(Schedule, RejectsInvalidConfig) {
  ScheduleConfig c;
  c.warmup_epochs = 1000;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ScheduleConfig{};
  c.final_lr_ratio = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ScheduleConfig{};
  c.batch_size = 0;
  EXPECT_THROW(scaled_lr(c), ConfigError);
}

TEST(Groups, WeightsAdaptedBiasesAndNormsExcluded) {
  ModelConfig mc;
  mc.asymmetry = Asymmetry::predictor;
  auto model = SiameseModel::init(mc, 1);
  auto params = model.parameters();
  auto groups = make_param_groups(params, 1.5e-6, 0.024);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_TRUE(groups[0].lars_adapted);
  EXPECT_EQ(groups[0].weight_decay, 1.5e-6);
  EXPECT_FALSE(groups[1].lars_adapted);
  EXPECT_EQ(groups[1].weight_decay, 0.0);
  EXPECT_EQ(groups[1].lr_scale, 0.024);
  EXPECT_EQ(groups[0].params.size() + groups[1].params.size(), params.size());
  for (auto& p : groups[0].params) EXPECT_EQ(p.kind, ParamKind::weight);
  for (auto& p : groups[1].params) EXPECT_NE(p.kind, ParamKind::weight);
}

TEST(Sgd, NoMomentumNoDecayIsGradientDescent) {
  Fixture f({1.0, -2.0}, {0.5}, 0.0, 1.0);
  f.set_grads({0.25, 1.0}, {-1.0});
  sgd_momentum_step(f.groups, 0.1, 0.0);
  EXPECT_EQ(f.w.at(0), 1.0 - 0.1 * 0.25);
  EXPECT_EQ(f.w.at(1), -2.0 - 0.1 * 1.0);
  EXPECT_EQ(f.b.at(0), 0.5 + 0.1);
}

TEST(Sgd, TwoMomentumStepsMatchUnrolledRecurrence) {
  Fixture f({3.0}, {0.0}, 0.0, 1.0);
  const double lr = 0.05, g = 0.7;
  for (int k = 0; k < 2; ++k) {
    f.set_grads({g}, {0.0});
    sgd_momentum_step(f.groups, lr, 0.9);
  }
  // v1 = g, v2 = 0.9 g + g; displacement lr (v1 + v2) = lr g (1 + 1.9).
  EXPECT_NEAR(3.0 - f.w.at(0), lr * g * (1.0 + 1.9), 1e-15);
}

TEST(Sgd, WeightDecayAloneShrinksMultiplicatively) {
  Fixture f({2.0, -4.0}, {1.0}, 0.01, 1.0);
  f.set_grads({0.0, 0.0}, {0.0});
  sgd_momentum_step(f.groups, 0.5, 0.0);
  EXPECT_DOUBLE_EQ(f.w.at(0), 2.0 * (1.0 - 0.5 * 0.01));
  EXPECT_DOUBLE_EQ(f.w.at(1), -4.0 * (1.0 - 0.5 * 0.01));
  EXPECT_EQ(f.b.at(0), 1.0);
}

TEST(Sgd, MissingGradientNamesParameter) {
  Fixture f({1.0}, {1.0}, 0.0, 1.0);
  f.set_grads({1.0}, {1.0});
  f.b.zero_grad();
  try {
    sgd_momentum_step(f.groups, 0.1, 0.9);
    FAIL() << "expected AutogradError";
  } catch (const AutogradError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  EXPECT_EQ(f.w.at(0), 1.0);  // nothing was updated
  EXPECT_THROW(lars_step(f.groups, 0.1, 0.9, 0.001), AutogradError);
}

TEST(Lars, ZeroWeightNormFallsBackToUnitTrust) {
  Fixture f({0.0, 0.0}, {0.0}, 0.0, 1.0);
  f.set_grads({1.0, 2.0}, {0.0});
  lars_step(f.groups, 0.1, 0.0, 0.001);
  EXPECT_EQ(f.w.at(0), -0.1);
  EXPECT_EQ(f.w.at(1), -0.2);
}

TEST(Lars, UnitTrustReducesToSgd) {
  // ‖w‖ = 5 and ‖g + wd w‖ = 5 with eta 1 give τ = 1.
  Fixture a({3.0, 4.0}, {1.0}, 0.0, 0.5), b({3.0, 4.0}, {1.0}, 0.0, 0.5);
  for (int k = 0; k < 1; ++k) {
    a.set_grads({4.0, 3.0}, {0.3});
    b.set_grads({4.0, 3.0}, {0.3});
    lars_step(a.groups, 0.1, 0.9, 1.0);
    sgd_momentum_step(b.groups, 0.1, 0.9);
  }
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.w.at(i), b.w.at(i));
  EXPECT_EQ(a.b.at(0), b.b.at(0));
}

TEST(Lars, MatchesHandComputedTrustRatio) {
  const auto wm = oracle::random_matrix(1, 12, 31);
  const auto gm = oracle::random_matrix(1, 12, 32);
  const double wd = 1e-3, lr = 0.3, eta = 0.02, mom = 0.9;
  Fixture f(wm[0], {0.2}, wd, 0.1);
  std::vector<double> w = wm[0], v(12, 0.0);
  double bv = 0.0, bw = 0.2;
  for (int step = 0; step < 3; ++step) {
    f.set_grads(gm[0], {0.5});
    lars_step(f.groups, lr, mom, eta);
    double wn = 0.0, dn = 0.0;
    std::vector<double> d(12);
    for (std::size_t i = 0; i < 12; ++i) {
      d[i] = gm[0][i] + wd * w[i];
      wn += w[i] * w[i];
      dn += d[i] * d[i];
    }
    const double tau = eta * std::sqrt(wn) / std::sqrt(dn);
    for (std::size_t i = 0; i < 12; ++i) {
      v[i] = mom * v[i] + tau * d[i];
      w[i] -= lr * v[i];
    }
    bv = mom * bv + 0.5;
    bw -= lr * 0.1 * bv;
  }
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(f.w.at(i), w[i], 1e-10);
  EXPECT_NEAR(f.b.at(0), bw, 1e-12);
}

TEST(Lars, ExcludedGroupIsFixedPointUnderZeroGradient) {
  Fixture f({1.0, 2.0}, {0.7, -0.3}, 0.1, 1.0);
  for (int k = 0; k < 5; ++k) {
    f.set_grads({0.0, 0.0}, {0.0, 0.0});
    lars_step(f.groups, 1.0, 0.9, 0.001);
  }
  EXPECT_EQ(f.b.at(0), 0.7);
  EXPECT_EQ(f.b.at(1), -0.3);
  EXPECT_LT(f.w.at(0), 1.0);
}

TEST(Lars, StepsAreDeterministic) {
  auto run = [] {
    Fixture f({1.0, -0.5, 0.25}, {0.1}, 1.5e-6, 0.024);
    for (int k = 0; k < 4; ++k) {
      f.set_grads({0.3, 0.1 * k, -0.2}, {0.05});
      lars_step(f.groups, 0.2, 0.9, 0.001);
    }
    return std::vector<double>{f.w.at(0), f.w.at(1), f.w.at(2), f.b.at(0)};
  };
  EXPECT_EQ(run(), run());
}

TEST(Buffers, MomentumBuffersAreNamedAndLive) {
  Fixture f({1.0}, {1.0}, 0.0, 1.0);
  f.set_grads({1.0}, {2.0});
  sgd_momentum_step(f.groups, 0.1, 0.9);
  auto bufs = momentum_buffers(f.groups);
  ASSERT_EQ(bufs.size(), 2u);
  EXPECT_EQ(bufs[0].name, "momentum.w");
  EXPECT_EQ((*bufs[1].values)[0], 2.0);
}
