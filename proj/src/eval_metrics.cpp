#include "btlab/eval_metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "btlab/linalg.hpp"
#include "btlab/losses.hpp"
#include "btlab/rng.hpp"

namespace btlab {

void ProbeConfig::validate() const {
  if (epochs == 0) throw ConfigError("probe: epochs must be > 0");
  if (!(lr > 0.0)) throw ConfigError("probe: lr must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("probe: weight_decay must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("probe: momentum must be in [0, 1)");
  if (batch_size == 0) throw ConfigError("probe: batch_size must be > 0");
}

namespace {

void check_features(const Tensor& x, const std::vector<int>& y, const char* split) {
  if (x.dim() != 2) throw ShapeError(std::string("probe: ") + split + " features must be 2-D");
  if (x.rows() != y.size()) {
    throw ShapeError(std::string("probe: ") + split + " has " + std::to_string(x.rows()) +
                     " rows but " + std::to_string(y.size()) + " labels");
  }
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw DomainError(std::string("probe: non-finite ") + split + " feature");
  }
}

// Row-wise softmax of logits in place.
void softmax_rows(std::vector<double>& logits, std::size_t rows, std::size_t k) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* l = &logits[r * k];
    const double m = *std::max_element(l, l + k);
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += (l[c] = std::exp(l[c] - m));
    for (std::size_t c = 0; c < k; ++c) l[c] /= s;
  }
}

}  // namespace

ProbeResult linear_probe(const Tensor& train_x, const std::vector<int>& train_y,
                         const Tensor& test_x, const std::vector<int>& test_y,
                         const ProbeConfig& config) {
  config.validate();
  check_features(train_x, train_y, "train");
  check_features(test_x, test_y, "test");
  if (train_x.cols() != test_x.cols()) {
    throw ShapeError("probe: train features have " + std::to_string(train_x.cols()) +
                     " dims, test features " + std::to_string(test_x.cols()));
  }
  if (std::set<int>(train_y.begin(), train_y.end()).size() < 2) {
    throw DomainError("probe: training labels contain a single class");
  }
  int max_label = 0;
  for (const auto* ys : {&train_y, &test_y})
    for (int l : *ys) {
      if (l < 0) throw DomainError("probe: negative label");
      max_label = std::max(max_label, l);
    }
  const std::size_t k = config.num_classes ? config.num_classes : max_label + 1;
  if (static_cast<std::size_t>(max_label) >= k) {
    throw DomainError("probe: label " + std::to_string(max_label) + " outside [0, " +
                      std::to_string(k) + ")");
  }

  const std::size_t n = train_x.rows(), d = train_x.cols();
  std::vector<double> mu(d, 0.0), inv(d, 0.0);
  {
    auto x = train_x.data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mu[j] += x[i * d + j];
    for (double& m : mu) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = x[i * d + j] - mu[j];
        var[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j) {
      const double s = std::sqrt(var[j] / static_cast<double>(n));
      inv[j] = s > 1e-12 ? 1.0 / s : 0.0;
    }
  }
  auto standardize = [&](const Tensor& t) {
    std::vector<double> out(t.data().begin(), t.data().end());
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] = (out[i * d + j] - mu[j]) * inv[j];
    return out;
  };
  const std::vector<double> xtr = standardize(train_x), xte = standardize(test_x);

  std::vector<double> w(k * d, 0.0), b(k, 0.0), vw(k * d, 0.0), vb(k, 0.0);
  auto logits_of = [&](const std::vector<double>& x, const std::size_t* rows, std::size_t count) {
    std::vector<double> out(count * k);
    for (std::size_t r = 0; r < count; ++r) {
      const double* xr = &x[rows[r] * d];
      for (std::size_t c = 0; c < k; ++c) {
        double acc = b[c];
        const double* wc = &w[c * d];
        for (std::size_t j = 0; j < d; ++j) acc += wc[j] * xr[j];
        out[r * k + c] = acc;
      }
    }
    return out;
  };

  const std::size_t bs = std::min(config.batch_size, n);
  const std::size_t steps_per_epoch = (n + bs - 1) / bs;
  const double total = static_cast<double>(config.epochs * steps_per_epoch);
  std::vector<std::size_t> order(n);
  std::vector<double> gw(k * d), gb(k);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng = Rng::stream(config.seed, {0x9b0eULL, epoch});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += bs, ++step) {
      const std::size_t count = std::min(bs, n - start);
      std::vector<double> p = logits_of(xtr, &order[start], count);
      softmax_rows(p, count, k);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(count);
      for (std::size_t r = 0; r < count; ++r) {
        const std::size_t row = order[start + r];
        const double* xr = &xtr[row * d];
        for (std::size_t c = 0; c < k; ++c) {
          const double g = (p[r * k + c] - (train_y[row] == static_cast<int>(c) ? 1.0 : 0.0)) * scale;
          gb[c] += g;
          double* gwc = &gw[c * d];
          for (std::size_t j = 0; j < d; ++j) gwc[j] += g * xr[j];
        }
      }
      const double lr =
          config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total));
      for (std::size_t i = 0; i < w.size(); ++i) {
        vw[i] = config.momentum * vw[i] + gw[i] + config.weight_decay * w[i];
        w[i] -= lr * vw[i];
      }
      for (std::size_t c = 0; c < k; ++c) {
        vb[c] = config.momentum * vb[c] + gb[c];
        b[c] -= lr * vb[c];
      }
    }
  }

  ProbeResult result;
  result.epochs = config.epochs;
  {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    std::vector<double> p = logits_of(xtr, all.data(), n);
    softmax_rows(p, n, k);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      loss -= std::log(std::max(p[i * k + static_cast<std::size_t>(train_y[i])], 1e-300));
    result.final_loss = loss / static_cast<double>(n);
  }
  const std::size_t nt = test_x.rows();
  std::vector<std::size_t> all(nt);
  for (std::size_t i = 0; i < nt; ++i) all[i] = i;
  const std::vector<double> logits = logits_of(xte, all.data(), nt);
  result.per_class_accuracy.assign(k, 0.0);
  result.per_class_count.assign(k, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < nt; ++i) {
    const double* l = &logits[i * k];
    // Ties resolve to the lowest class index.
    const auto pred = static_cast<int>(std::max_element(l, l + k) - l);
    const auto y = static_cast<std::size_t>(test_y[i]);
    ++result.per_class_count[y];
    if (pred == test_y[i]) {
      ++correct;
      result.per_class_accuracy[y] += 1.0;
    }
  }
  for (std::size_t c = 0; c < k; ++c)
    if (result.per_class_count[c]) result.per_class_accuracy[c] /= result.per_class_count[c];
  result.top1 = static_cast<double>(correct) / static_cast<double>(nt);
  return result;
}

// ---------------------------------------------------------------------------

std::vector<double> correlation_matrix(const Tensor& z, std::size_t* collapsed) {
  if (z.dim() != 2 || z.rows() < 2) {
    throw ShapeError("correlation_matrix: need an N×D matrix with N >= 2, got " +
                     shape_str(z.shape()));
  }
  const std::size_t n = z.rows(), d = z.cols();
  auto x = z.data();
  std::vector<double> zs(n * d, 0.0);
  std::size_t dead = 0;
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[i * d + j];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (x[i * d + j] - m) * (x[i * d + j] - m);
    const double s = std::sqrt(v / static_cast<double>(n));
    if (s <= kCollapseStd) {
      ++dead;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) zs[i * d + j] = (x[i * d + j] - m) / s;
  }
  if (collapsed) *collapsed = dead;
  std::vector<double> r(d * d, 0.0);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += zs[i * d + a] * zs[i * d + b];
      r[a * d + b] = r[b * d + a] = acc / static_cast<double>(n);
    }
  return r;
}

double effective_rank(const std::vector<double>& sym, std::size_t d) {
  Eigen::MatrixXd m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = sym[i * d + j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw DomainError("effective_rank: eigensolver failed");
  std::vector<double> ev(d);
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    ev[i] = std::max(0.0, solver.eigenvalues()(static_cast<Eigen::Index>(i)));
    total += ev[i];
  }
  if (total <= 0.0) return 1.0;
  double h = 0.0;
  for (double l : ev) {
    const double p = l / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::clamp(std::exp(h), 1.0, static_cast<double>(d));
}

namespace {

std::vector<double> column_std(const Tensor& z) {
  const std::size_t n = z.rows(), d = z.cols();
  auto x = z.data();
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[i * d + j];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (x[i * d + j] - m) * (x[i * d + j] - m);
    out[j] = std::sqrt(v / static_cast<double>(n));
  }
  return out;
}

void offdiag_stats(const std::vector<double>& c, std::size_t d, EmbeddingDiagnostics& out) {
  double off = 0.0, diag = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) diag += c[i * d + j];
      else off += std::abs(c[i * d + j]);
    }
  out.mean_diag = diag / static_cast<double>(d);
  out.mean_abs_offdiag = d > 1 ? off / static_cast<double>(d * (d - 1)) : 0.0;
}

void spectral_stats(const std::vector<double>& r, std::size_t d, double jitter,
                    EmbeddingDiagnostics& out) {
  const Tensor rt({d, d}, r);
  out.entropy_proxy =
      0.5 * (logdet(rt, jitter).item() - static_cast<double>(d) * std::log1p(jitter));
  out.effective_rank = effective_rank(r, d);
}

}  // namespace

EmbeddingDiagnostics embedding_diagnostics(const Tensor& z, double jitter) {
  NoGradGuard no_grad;
  const Tensor zd = z.detach();
  EmbeddingDiagnostics out;
  const auto r = correlation_matrix(zd, &out.collapsed);
  const std::size_t d = zd.cols();
  out.feature_std = column_std(zd);
  out.min_std = *std::min_element(out.feature_std.begin(), out.feature_std.end());
  offdiag_stats(r, d, out);
  spectral_stats(r, d, jitter, out);
  return out;
}

EmbeddingDiagnostics embedding_diagnostics(const Tensor& za, const Tensor& zb, double jitter) {
  NoGradGuard no_grad;
  if (za.shape() != zb.shape()) {
    throw ShapeError("embedding_diagnostics: " + shape_str(za.shape()) + " vs " +
                     shape_str(zb.shape()));
  }
  const Tensor a = za.detach(), b = zb.detach();
  EmbeddingDiagnostics out;
  std::size_t dead_a = 0, dead_b = 0;
  const auto r = correlation_matrix(a, &dead_a);
  (void)correlation_matrix(b, &dead_b);
  const std::size_t d = a.cols();
  out.collapsed = dead_a + dead_b;
  out.feature_std = column_std(a);
  const auto sb = column_std(b);
  out.min_std = std::min(*std::min_element(out.feature_std.begin(), out.feature_std.end()),
                         *std::min_element(sb.begin(), sb.end()));
  const CrossCorrelation c = cross_correlation(a, b);
  offdiag_stats(std::vector<double>(c.values.data().begin(), c.values.data().end()), d, out);
  spectral_stats(r, d, jitter, out);
  return out;
}

ConditionalDiagnostics conditional_entropy_diagnostic(SiameseModel& model,
                                                      const std::vector<Image>& images,
                                                      const AugmentationPolicy& policy,
                                                      std::size_t k, std::uint64_t seed,
                                                      double jitter) {
  if (k < 2) throw DomainError("conditional_entropy_diagnostic: need K >= 2 views");
  if (images.empty()) throw ShapeError("conditional_entropy_diagnostic: no images");
  NoGradGuard no_grad;
  std::vector<Image> views;
  views.reserve(images.size() * k);
  for (std::size_t m = 0; m < images.size(); ++m)
    for (std::size_t v = 0; v < k; ++v) {
      views.push_back(augment(images[m], policy, v % 2 ? View::B : View::A,
                              augment_key(seed, v, m)));
    }
  // Eval mode makes every row a function of its own input only.
  const Tensor z = model.embed(images_to_tensor(views), Mode::eval, false);
  const std::size_t d = z.cols();
  ConditionalDiagnostics out;
  out.views = k;
  double total = 0.0;
  for (std::size_t m = 0; m < images.size(); ++m) {
    const auto first = z.data().begin() + static_cast<std::ptrdiff_t>(m * k * d);
    const Tensor block({k, d}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(k * d)));
    const double ld = logdet(covariance(block), jitter).item();
    out.per_sample_logdet.push_back(ld);
    total += ld;
  }
  out.mean_logdet = total / static_cast<double>(images.size());
  return out;
}

}  // namespace btlab
