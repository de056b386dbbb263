#include "btlab/gradcheck.hpp"
#include "btlab/linalg.hpp"
#include "btlab/losses.hpp"
#include "btlab/rng.hpp"

namespace btlab {

namespace {

Tensor uniform_tensor(Shape shape, Rng& rng, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Random projection to a scalar, so every output coordinate is exercised.
ScalarFunction weighted(ScalarFunction op, const Shape& out_shape, Rng& rng) {
  Tensor w = uniform_tensor(out_shape, rng, -1.0, 1.0);
  return [op = std::move(op), w](const std::vector<Tensor>& v) { return sum(op(v) * w); };
}

}  // namespace

std::vector<GradCheckCase> gradcheck_suite(double eps, double tol, std::size_t seeds) {
  std::vector<GradCheckCase> out;
  auto run = [&](std::string name, const ScalarFunction& f, const std::vector<Tensor>& in) {
    out.push_back({std::move(name), grad_check(f, in, eps, tol)});
  };

  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng = Rng::stream(0x6c4ec, {s});
    const std::size_t r = 2 + rng.below(7), c = 1 + rng.below(8), k = 1 + rng.below(8);
    const std::string tag = "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
    const Tensor x = uniform_tensor({r, c}, rng, -1.0, 1.0);
    const Tensor y = uniform_tensor({r, c}, rng, -1.0, 1.0);
    const Tensor pos = uniform_tensor({r, c}, rng, 0.5, 2.0);
    const Tensor row = uniform_tensor({c}, rng, -1.0, 1.0);
    const Tensor rhs = uniform_tensor({c, k}, rng, -1.0, 1.0);
    const Shape rc{r, c};

    run("add" + tag, weighted([](auto& v) { return v[0] + v[1]; }, rc, rng), {x, y});
    run("add_broadcast" + tag, weighted([](auto& v) { return v[0] + v[1]; }, rc, rng), {x, row});
    run("sub" + tag, weighted([](auto& v) { return v[0] - v[1]; }, rc, rng), {x, y});
    run("mul" + tag, weighted([](auto& v) { return v[0] * v[1]; }, rc, rng), {x, y});
    run("div" + tag, weighted([](auto& v) { return v[0] / v[1]; }, rc, rng), {x, pos});
    run("neg" + tag, weighted([](auto& v) { return -v[0]; }, rc, rng), {x});
    run("pow" + tag, weighted([](auto& v) { return pow(v[0], 2.5); }, rc, rng), {pos});
    run("sqrt" + tag, weighted([](auto& v) { return sqrt(v[0]); }, rc, rng), {pos});
    run("exp" + tag, weighted([](auto& v) { return exp(v[0]); }, rc, rng), {x});
    run("log" + tag, weighted([](auto& v) { return log(v[0]); }, rc, rng), {pos});
    run("relu" + tag, weighted([](auto& v) { return relu(v[0]); }, rc, rng), {x});
    run("maximum" + tag, weighted([](auto& v) { return maximum(v[0], 0.1); }, rc, rng), {x});
    run("add_scalar" + tag, weighted([](auto& v) { return add_scalar(v[0], 0.3); }, rc, rng), {x});
    run("mul_scalar" + tag, weighted([](auto& v) { return mul_scalar(v[0], -1.7); }, rc, rng), {x});
    run("sum" + tag, [](auto& v) { return sum(v[0] * v[0]); }, {x});
    run("mean" + tag, [](auto& v) { return mean(v[0] * v[0]); }, {x});
    run("sum_axis0" + tag, weighted([](auto& v) { return sum(v[0], 0); }, {c}, rng), {x});
    run("mean_axis1" + tag, weighted([](auto& v) { return mean(v[0], 1); }, {r}, rng), {x});
    run("stddev_axis0" + tag, weighted([](auto& v) { return stddev(v[0], 0); }, {c}, rng), {x});
    run("transpose" + tag, weighted([](auto& v) { return transpose(v[0]); }, {c, r}, rng), {x});
    run("reshape" + tag,
        weighted([r, c](auto& v) { return reshape(v[0], {c * r}); }, {c * r}, rng), {x});
    run("matmul" + tag, weighted([](auto& v) { return matmul(v[0], v[1]); }, {r, k}, rng),
        {x, rhs});
    run("covariance" + tag, weighted([](auto& v) { return covariance(v[0]); }, {c, c}, rng), {x});
    run("logdet" + tag,
        [](auto& v) { return logdet(add(matmul(transpose(v[0]), v[0]), Tensor::eye(v[0].cols())), 0.0); },
        {x});

    // Losses on N × D embeddings. IMAX takes the logdet of a D × D batch
    // covariance, which is singular unless N > D, so its shapes keep D < N;
    // the remaining losses also run at the full 8 × 8.
    const std::size_t d = 2 + rng.below(6);
    const std::string ltag = "[8x" + std::to_string(d) + "]";
    const Tensor za = uniform_tensor({8, d}, rng, -1.0, 1.0);
    const Tensor zb = uniform_tensor({8, d}, rng, -1.0, 1.0);
    const Tensor za8 = uniform_tensor({8, 8}, rng, -1.0, 1.0);
    const Tensor zb8 = uniform_tensor({8, 8}, rng, -1.0, 1.0);
    for (LossVariant variant : all_loss_variants()) {
      LossConfig cfg;
      cfg.variant = variant;
      cfg.lambda = 0.5;  // large enough that both terms shape the gradient
      auto f = [cfg](auto& v) { return compute_loss(v[0], v[1], cfg).total; };
      const std::string name = "loss." + std::string(to_string(variant));
      run(name + ltag, f, {za, zb});
      if (variant != LossVariant::imax) run(name + "[8x8]", f, {za8, zb8});
    }
  }
  return out;
}

}  // namespace btlab
