#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "btlab/gradcheck.hpp"
#include "btlab/linalg.hpp"
#include "btlab/tensor.hpp"
#include "oracles.hpp"

using namespace btlab;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(gen);
  return Tensor(std::move(shape), std::move(v));
}

Tensor sign_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = (gen() & 1) ? 1.0 : -1.0;
  return Tensor(std::move(shape), std::move(v));
}

Tensor from_matrix(const oracle::Matrix& m) {
  return Tensor({m.size(), m[0].size()}, oracle::flatten(m));
}

// sum(op(x) ⊙ w) with fixed random weights, so every output coordinate
// contributes a distinct gradient.
ScalarFunction weighted(std::function<Tensor(const std::vector<Tensor>&)> op, Shape out,
                        std::uint64_t seed) {
  const Tensor w = random_tensor(out, seed);
  return [op, w](const std::vector<Tensor>& xs) { return sum(op(xs) * w); };
}

}  // namespace

TEST(TensorOps, ReluOfDefinitionCase) {
  const Tensor r = relu(Tensor::vector({-1.0, 0.0, 2.0}));
  EXPECT_EQ(std::vector<double>(r.data().begin(), r.data().end()),
            (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(TensorOps, MeanOfConstantIsConstant) {
  const Tensor c = Tensor::full({5, 3}, 2.5);
  const Tensor m = mean(c, 0);
  ASSERT_EQ(m.shape(), (Shape{3}));
  for (double v : m.data()) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(TensorOps, PopulationStd) {
  const Tensor s = stddev(Tensor::vector({1.0, 2.0, 3.0, 4.0}), 0);
  EXPECT_NEAR(s.item(), 1.1180339887, 1e-10);
}

TEST(TensorOps, BroadcastTrailingDimensions) {
  const Tensor a = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  const Tensor row = Tensor::vector({10, 20, 30});
  const Tensor col({2, 1}, {100, 200});
  const Tensor s = a + row;
  EXPECT_EQ(s.at(1, 2), 36.0);
  const Tensor t = a * col;
  EXPECT_EQ(t.at(0, 1), 200.0);
  EXPECT_EQ(t.at(1, 0), 800.0);
}

TEST(TensorOps, ShapeMismatchNamesBothShapes) {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 4});
  try {
    (void)add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2,4]"), std::string::npos) << msg;
  }
}

TEST(TensorOps, DomainErrors) {
  EXPECT_THROW((void)log(Tensor::vector({1.0, -1.0})), DomainError);
  EXPECT_THROW((void)sqrt(Tensor::vector({-0.5})), DomainError);
  EXPECT_THROW((void)div(Tensor::vector({1.0}), Tensor::vector({0.0})), DomainError);
  EXPECT_NO_THROW((void)sqrt(Tensor::vector({0.0})));
}

TEST(TensorOps, AxisReductions) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  const Tensor s0 = sum(a, 0);
  const Tensor s1 = sum(a, 1, true);
  EXPECT_EQ(s0.shape(), (Shape{2}));
  EXPECT_EQ(s0.at(0), 9.0);
  EXPECT_EQ(s1.shape(), (Shape{3, 1}));
  EXPECT_EQ(s1.at(2), 11.0);
  EXPECT_THROW((void)sum(a, 2), ShapeError);
}

TEST(Matmul, KnownProduct) {
  const Tensor c = matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{5, 6}, {7, 8}}));
  EXPECT_EQ(c.at(0, 0), 19.0);
  EXPECT_EQ(c.at(0, 1), 22.0);
  EXPECT_EQ(c.at(1, 0), 43.0);
  EXPECT_EQ(c.at(1, 1), 50.0);
}

TEST(Matmul, IdentityAndZero) {
  const Tensor a = random_tensor({3, 4}, 7);
  const Tensor ia = matmul(Tensor::eye(3), a);
  const Tensor za = matmul(Tensor::zeros({2, 3}), a);
  for (std::size_t k = 0; k < a.numel(); ++k) EXPECT_EQ(ia.at(k), a.at(k));
  for (double v : za.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, InnerDimensionMismatch) {
  EXPECT_THROW((void)matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST(Matmul, AssociativityOnRandomTriples) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor a = random_tensor({3, 5}, 100 + s);
    const Tensor b = random_tensor({5, 4}, 200 + s);
    const Tensor c = random_tensor({4, 6}, 300 + s);
    const Tensor l = matmul(matmul(a, b), c);
    const Tensor r = matmul(a, matmul(b, c));
    for (std::size_t k = 0; k < l.numel(); ++k) EXPECT_NEAR(l.at(k), r.at(k), 1e-9);
  }
}

TEST(Backward, SumGivesOnes) {
  Tensor x = random_tensor({3, 4}, 1);
  x.set_requires_grad(true);
  sum(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SumOfSquares) {
  Tensor x = Tensor::vector({1.0, 2.0, 3.0}, true);
  sum(pow(x, 2.0)).backward();
  EXPECT_EQ(x.grad(), (std::vector<double>{2.0, 4.0, 6.0}));
}

TEST(Backward, AccumulatesUntilZeroed) {
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  const Tensor y = sum(x * x);
  y.backward();
  y.backward();
  EXPECT_EQ(x.grad(), (std::vector<double>{4.0, 8.0}));
  x.zero_grad();
  y.backward();
  EXPECT_EQ(x.grad(), (std::vector<double>{2.0, 4.0}));
}

TEST(Backward, SharedSubexpression) {
  Tensor x = Tensor::vector({3.0}, true);
  const Tensor y = x * x;
  sum(y * y + y).backward();  // d/dx (x⁴ + x²) = 4x³ + 2x
  EXPECT_DOUBLE_EQ(x.grad()[0], 4 * 27.0 + 6.0);
}

TEST(Backward, Errors) {
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  EXPECT_THROW((x * 2.0).backward(), AutogradError);
  EXPECT_THROW(sum(x.detach()).backward(), AutogradError);
  NoGradGuard guard;
  EXPECT_THROW(sum(x).backward(), AutogradError);
}

TEST(Backward, Determinism) {
  auto run = [] {
    Tensor a = random_tensor({6, 5}, 42);
    Tensor b = random_tensor({5, 4}, 43);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    const Tensor y = sum(exp(matmul(a, b) * 0.3) / (stddev(a, 0, true) + 1.0).at(0));
    y.backward();
    return std::make_tuple(y.item(), a.grad(), b.grad());
  };
  EXPECT_EQ(run(), run());
}

// Every differentiable op against central differences at eps 1e-5.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const std::uint64_t seed = static_cast<std::uint64_t>(GetParam());
  std::mt19937_64 gen(seed);
  const std::size_t r = 1 + gen() % 8, c = 1 + gen() % 8, k = 1 + gen() % 8;
  const Tensor x = random_tensor({r, c}, seed * 7 + 1);
  const Tensor y = random_tensor({r, c}, seed * 7 + 2);
  const Tensor pos = random_tensor({r, c}, seed * 7 + 3, 0.5, 2.0);
  const Tensor row = random_tensor({c}, seed * 7 + 4);
  // |values| in [0.5, 2]: keeps polynomial gradients away from zero, where
  // the O(eps²) truncation term dominates a relative error.
  const Tensor away = pos * sign_tensor({r, c}, seed * 7 + 6);
  const Tensor rhs = random_tensor({c, k}, seed * 7 + 5);

  struct Case {
    const char* name;
    ScalarFunction f;
    std::vector<Tensor> inputs;
  };
  const std::vector<Case> cases = {
      {"add", weighted([](auto& v) { return v[0] + v[1]; }, {r, c}, seed), {x, y}},
      {"add_broadcast", weighted([](auto& v) { return v[0] + v[1]; }, {r, c}, seed), {x, row}},
      {"sub", weighted([](auto& v) { return v[0] - v[1]; }, {r, c}, seed), {x, y}},
      {"mul", weighted([](auto& v) { return v[0] * v[1]; }, {r, c}, seed), {x, y}},
      {"mul_broadcast", weighted([](auto& v) { return v[0] * v[1]; }, {r, c}, seed), {x, row}},
      {"div", weighted([](auto& v) { return v[0] / v[1]; }, {r, c}, seed), {x, pos}},
      {"pow3", weighted([](auto& v) { return pow(v[0], 3.0); }, {r, c}, seed), {away}},
      {"pow_frac", weighted([](auto& v) { return pow(v[0], 1.5); }, {r, c}, seed), {pos}},
      {"sqrt", weighted([](auto& v) { return sqrt(v[0]); }, {r, c}, seed), {pos}},
      {"exp", weighted([](auto& v) { return exp(v[0]); }, {r, c}, seed), {x}},
      {"log", weighted([](auto& v) { return log(v[0]); }, {r, c}, seed), {pos}},
      {"relu", weighted([](auto& v) { return relu(v[0]); }, {r, c}, seed), {x}},
      {"maximum", weighted([](auto& v) { return maximum(v[0], 0.25); }, {r, c}, seed), {x}},
      {"sum_axis0", weighted([](auto& v) { return sum(v[0], 0); }, {c}, seed), {x}},
      {"mean_axis1", weighted([](auto& v) { return mean(v[0], 1); }, {r}, seed), {x}},
      {"transpose", weighted([](auto& v) { return transpose(v[0]); }, {c, r}, seed), {x}},
      {"matmul", weighted([](auto& v) { return matmul(v[0], v[1]); }, {r, k}, seed), {x, rhs}},
  };
  for (const auto& tc : cases) {
    const GradCheckReport rep = grad_check(tc.f, tc.inputs, 1e-5, 1e-6);
    EXPECT_TRUE(rep.passed) << tc.name << " max rel err " << rep.max_error;
  }
  if (r >= 2) {
    const auto f = weighted([](auto& v) { return stddev(v[0], 0); }, {c}, seed);
    const GradCheckReport rep = grad_check(f, {x}, 1e-5, 1e-6);
    EXPECT_TRUE(rep.passed) << "std max rel err " << rep.max_error;
  }
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, OpGradient, ::testing::Range(1, 25));

TEST(GradCheck, LinearFunctionIsExact) {
  const ScalarFunction f = [](const std::vector<Tensor>& v) { return sum(v[0]); };
  // Dyadic inputs and eps: every difference is exact in floating point.
  const Tensor dyadic({2, 3}, {0.5, -1.25, 2.0, 0.75, -3.5, 1.0});
  const auto exact = grad_check(f, {dyadic}, 0x1.0p-16);
  EXPECT_TRUE(exact.passed);
  EXPECT_EQ(exact.max_error, 0.0);

  const auto rep = grad_check(f, {random_tensor({4, 3}, 5)});
  EXPECT_TRUE(rep.passed);
  EXPECT_LT(rep.max_error, 1e-9);
  EXPECT_EQ(rep.eps, 1e-5);
}

TEST(GradCheck, DetectsWrongGradient) {
  // log() applied to values then reported through a detached path: the
  // analytic gradient is zero while the function is not constant.
  const auto rep = grad_check(
      [](const std::vector<Tensor>& v) {
        return sum(v[0]) * 0.0 + Tensor::scalar(sum(v[0] * v[0]).item());
      },
      {random_tensor({3}, 9)});
  EXPECT_FALSE(rep.passed);
}

TEST(GradCheck, RejectsNonFiniteAndBadEps) {
  EXPECT_THROW((void)grad_check([](auto& v) { return sum(v[0]); }, {Tensor::vector({1.0})}, 0.0),
               DomainError);
  EXPECT_THROW(
      (void)grad_check(
          [](const std::vector<Tensor>& v) {
            return Tensor::scalar(std::numeric_limits<double>::infinity()) + sum(v[0]);
          },
          {Tensor::vector({1.0})}),
      DomainError);
}

TEST(Linalg, IdentityLogdetIsZero) {
  const auto r = inverse_and_logdet(Tensor::eye(5), 0.0);
  EXPECT_EQ(r.logdet.item(), 0.0);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(r.inverse.at(i, j), i == j ? 1.0 : 0.0);
}

TEST(Linalg, DiagonalDeterminant) {
  const auto r = inverse_and_logdet(Tensor::matrix({{2, 0}, {0, 3}}), 0.0);
  EXPECT_NEAR(r.logdet.item(), 1.7917594692, 1e-10);
  EXPECT_NEAR(r.inverse.at(1, 1), 1.0 / 3.0, 1e-15);
}

TEST(Linalg, ScaledIdentity) {
  for (double c : {0.5, 2.0, 7.0}) {
    const std::size_t d = 6;
    const Tensor a = Tensor::eye(d) * c;
    EXPECT_NEAR(logdet(a, 0.0).item(), d * std::log(c), 1e-10);
  }
}

TEST(Linalg, LogdetMatchesCofactorOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const oracle::Matrix a = oracle::spd_matrix(4, 1000 + seed);
    const double expected = std::log(oracle::det_cofactor(a));
    EXPECT_NEAR(logdet(from_matrix(a), 0.0).item(), expected, 1e-10);
  }
}

TEST(Linalg, InverseTimesMatrixIsIdentity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor a = from_matrix(oracle::spd_matrix(6, 2000 + seed));
    const auto r = inverse_and_logdet(a, 0.0);
    const Tensor p = matmul(r.inverse, a);
    double frob = 0.0;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        const double e = p.at(i, j) - (i == j ? 1.0 : 0.0);
        frob += e * e;
      }
    EXPECT_LT(std::sqrt(frob), 1e-8);
  }
}

TEST(Linalg, FactorizationFailureCarriesPivot) {
  const Tensor a = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, -1}});
  try {
    (void)inverse_and_logdet(a, 0.0);
    FAIL() << "expected FactorizationError";
  } catch (const FactorizationError& e) {
    EXPECT_EQ(e.pivot(), 2u);
  }
  // Singular becomes factorizable with jitter.
  EXPECT_NO_THROW((void)logdet(Tensor::zeros({3, 3}), 1e-6));
  EXPECT_NEAR(logdet(Tensor::zeros({3, 3}), 1e-6).item(), 3 * std::log(1e-6), 1e-9);
}

TEST(Linalg, LogdetGradientIsInverse) {
  const Tensor a = from_matrix(oracle::spd_matrix(4, 77));
  const auto rep = grad_check([](const std::vector<Tensor>& v) { return logdet(v[0], 1e-6); },
                              {a}, 1e-5, 1e-6);
  EXPECT_TRUE(rep.passed) << rep.max_error;

  Tensor x = a.clone();
  x.set_requires_grad(true);
  const auto r = inverse_and_logdet(x, 1e-6);
  r.logdet.backward();
  const auto g = x.grad();
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(g[k], r.inverse.at(k), 1e-15);
}

TEST(Linalg, CovarianceGradient) {
  const Tensor z = random_tensor({8, 3}, 11);
  const auto rep = grad_check(
      [](const std::vector<Tensor>& v) { return logdet(covariance(v[0]), 1e-6); }, {z}, 1e-5,
      1e-6);
  EXPECT_TRUE(rep.passed) << rep.max_error;
}
