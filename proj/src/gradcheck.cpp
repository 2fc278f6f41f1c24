#include "smcnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "smcnet/layers.hpp"
#include "smcnet/model.hpp"

namespace smcnet {

double relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  double diff = 0, scale = floor;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return scale == 0 ? 0.0 : diff / scale;
}

std::vector<double> numeric_gradient(const std::function<double()>& loss, std::span<double> values, double step) {
  std::vector<double> g(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + step;
    const double up = loss();
    values[i] = orig - step;
    const double down = loss();
    values[i] = orig;
    g[i] = (up - down) / (2 * step);
  }
  return g;
}

namespace {

using C = std::complex<double>;

struct Suite {
  std::mt19937_64 rng;
  GradCheckOptions opts;
  std::vector<GradCheckResult> results;

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }

  CTensor<double> random_c(Shape s) {
    CTensor<double> t(std::move(s));
    for (auto& z : t.data) z = {normal(), normal()};
    return t;
  }
  RTensor<double> random_r(Shape s) {
    RTensor<double> t(std::move(s));
    for (auto& v : t.data) v = normal();
    return t;
  }

  void record(const std::string& layer, const std::string& tensor, std::span<const double> analytic,
              std::span<const double> numeric) {
    const double err = relative_error(analytic, numeric, opts.scale_floor);
    results.push_back({layer, tensor, err, err < opts.tolerance});
  }

  void check(const std::string& layer, const std::string& tensor, const std::function<double()>& loss,
             std::span<double> values, std::span<const double> analytic) {
    const auto numeric = numeric_gradient(loss, values, opts.step);
    record(layer, tensor, analytic, numeric);
  }
};

// Real scalar probe L = sum Re(conj(c) y) so that dL/dy = c under the (Re, Im) convention.
double project(const CTensor<double>& y, const CTensor<double>& c) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i].real() * c[i].real() + y[i].imag() * c[i].imag();
  return s;
}
double project(const RTensor<double>& y, const RTensor<double>& c) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * c[i];
  return s;
}

void check_conv(Suite& s) {
  ComplexConv2d<double> conv(2, 3, 3);
  conv.weight = s.random_c(conv.weight.shape);
  conv.bias = s.random_c(conv.bias.shape);
  auto x = s.random_c({2, 2, 6, 6});
  const auto probe = s.random_c(conv.output_shape(x.shape));
  conv.forward(x);
  auto gx = conv.backward(probe);
  if (s.opts.corrupt_conv_backward)
    for (auto& g : conv.weight.grad) g *= 1.01;
  const auto gw = conv.weight.grad;
  const auto gb = conv.bias.grad;
  auto loss = [&] { return project(conv.infer(x), probe); };
  s.check("complex_conv2d", "weight", loss, as_reals(conv.weight.data), as_reals(gw));
  s.check("complex_conv2d", "bias", loss, as_reals(conv.bias.data), as_reals(gb));
  s.check("complex_conv2d", "input", loss, as_reals(x.data), as_reals(gx.data));
}

void check_pool(Suite& s) {
  ComplexMaxPool2d<double> pool(2);
  auto x = s.random_c({2, 2, 6, 7});
  const auto probe = s.random_c(pool.output_shape(x.shape));
  pool.forward(x);
  const auto gx = pool.backward(probe);
  s.check("complex_maxpool2d", "input", [&] { return project(pool.infer(x), probe); }, as_reals(x.data),
          as_reals(gx.data));
}

void check_crelu(Suite& s) {
  CReLU<double> act;
  auto x = s.random_c({3, 2, 4, 4});
  const auto probe = s.random_c(x.shape);
  act.forward(x);
  const auto gx = act.backward(probe);
  s.check("crelu", "input", [&] { return project(act.infer(x), probe); }, as_reals(x.data), as_reals(gx.data));
}

void check_batchnorm(Suite& s, Shape shape, const std::string& tag) {
  ComplexBatchNorm<double> bn(shape[1]);
  bn.gamma = s.random_c(bn.gamma.shape);
  bn.beta = s.random_c(bn.beta.shape);
  auto x = s.random_c(shape);
  const auto probe = s.random_c(x.shape);
  bn.forward(x);
  const auto gx = bn.backward(probe);
  const auto gg = bn.gamma.grad;
  const auto gb = bn.beta.grad;
  auto loss = [&] { return project(bn.forward(x), probe); };
  s.check("complex_batchnorm" + tag, "gamma", loss, as_reals(bn.gamma.data), as_reals(gg));
  s.check("complex_batchnorm" + tag, "beta", loss, as_reals(bn.beta.data), as_reals(gb));
  s.check("complex_batchnorm" + tag, "input", loss, as_reals(x.data), as_reals(gx.data));
}

void check_batchnorm_eval(Suite& s) {
  ComplexBatchNorm<double> bn(3);
  bn.gamma = s.random_c(bn.gamma.shape);
  bn.beta = s.random_c(bn.beta.shape);
  for (auto& v : bn.running_mean.data) v = {s.normal(), s.normal()};
  for (auto& v : bn.running_var.data) v = {0.5 + std::abs(s.normal()), 0.5 + std::abs(s.normal())};
  bn.set_training(false);
  auto x = s.random_c({4, 3});
  const auto probe = s.random_c(x.shape);
  bn.forward(x);
  const auto gx = bn.backward(probe);
  const auto gg = bn.gamma.grad;
  auto loss = [&] { return project(bn.infer(x), probe); };
  s.check("complex_batchnorm_eval", "gamma", loss, as_reals(bn.gamma.data), as_reals(gg));
  s.check("complex_batchnorm_eval", "input", loss, as_reals(x.data), as_reals(gx.data));
}

void check_flatten(Suite& s) {
  FlattenAmpPhase<double> flat;
  auto x = s.random_c({3, 2, 5});
  const auto probe = s.random_r({3, 20});
  flat.forward(x);
  const auto gx = flat.backward(probe);
  s.check("flatten_amp_phase", "input", [&] { return project(flat.infer(x), probe); }, as_reals(x.data),
          as_reals(gx.data));
}

void check_dense(Suite& s) {
  DenseReal<double> dense(7, 4);
  dense.weight = s.random_r(dense.weight.shape);
  dense.bias = s.random_r(dense.bias.shape);
  auto x = s.random_r({3, 7});
  const auto probe = s.random_r({3, 4});
  dense.forward(x);
  const auto gx = dense.backward(probe);
  const auto gw = dense.weight.grad;
  const auto gb = dense.bias.grad;
  auto loss = [&] { return project(dense.infer(x), probe); };
  s.check("dense_real", "weight", loss, as_reals(dense.weight.data), as_reals(gw));
  s.check("dense_real", "bias", loss, as_reals(dense.bias.data), as_reals(gb));
  s.check("dense_real", "input", loss, as_reals(x.data), as_reals(gx.data));
}

void check_cross_entropy(Suite& s) {
  auto logits = s.random_r({4, 5});
  std::vector<int> targets(4);
  for (auto& t : targets) t = std::uniform_int_distribution<int>(0, 4)(s.rng);
  const auto analytic = softmax_cross_entropy(logits, targets).grad;
  s.check("softmax_cross_entropy", "logits", [&] { return softmax_cross_entropy(logits, targets).loss; },
          as_reals(logits.data), as_reals(analytic.data));
}

void check_micro_net(Suite& s) {
  ModelConfig cfg;
  cfg.input_h = 8;
  cfg.input_w = 8;
  cfg.kernel = 3;
  cfg.conv1_filters = 2;
  cfg.conv2_filters = 2;
  cfg.seed = s.rng();
  cfg.precision = Precision::F64;
  SMCNet<double> net(cfg);
  // Non-trivial affine and bias values so every parameter carries signal.
  for (auto& p : net.parameters())
    for (auto& v : p.value) v += 0.1 * s.normal();
  auto x = s.random_c({4, 1, 8, 8});
  std::vector<int> targets(4);
  for (auto& t : targets) t = std::uniform_int_distribution<int>(0, 4)(s.rng);

  net.set_training(true);
  net.zero_grad();
  const auto out = softmax_cross_entropy(net.forward(x), targets);
  const auto gx = net.backward(out.grad, true);
  if (s.opts.corrupt_conv_backward)
    for (auto& g : net.conv1.weight.grad) g *= 1.01;
  auto loss = [&] { return softmax_cross_entropy(net.forward(x), targets).loss; };
  for (auto& p : net.parameters()) {
    const std::vector<double> analytic(p.grad.begin(), p.grad.end());
    s.check("micro_net", p.name, loss, p.value, analytic);
  }
  s.check("micro_net", "input", loss, as_reals(x.data), as_reals(gx.data));
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& opts) {
  Suite s{std::mt19937_64(seed), opts, {}};
  check_conv(s);
  check_pool(s);
  check_crelu(s);
  check_batchnorm(s, {5, 3}, "");
  check_batchnorm(s, {3, 2, 3, 3}, "_2d");
  check_batchnorm_eval(s);
  check_flatten(s);
  check_dense(s);
  check_cross_entropy(s);
  check_micro_net(s);
  return s.results;
}

}  // namespace smcnet
