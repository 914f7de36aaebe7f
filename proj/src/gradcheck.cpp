#include "cgcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cgcn/centrality.hpp"
#include "cgcn/error.hpp"
#include "cgcn/graph.hpp"
#include "cgcn/net.hpp"
#include "cgcn/training.hpp"

namespace cgcn {

namespace {

double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

struct FdTarget {
  double* coord;
  double analytic;
};

double max_fd_err(std::vector<FdTarget>& targets, const std::function<double()>& eval,
                  bool inject_wrong_sign) {
  if (inject_wrong_sign && !targets.empty()) {
    targets.front().analytic += 10.0;
  }
  double worst = 0.0;
  for (const auto& t : targets) {
    const double orig = *t.coord;
    *t.coord = orig + kGradCheckStep;
    const double fp = eval();
    *t.coord = orig - kGradCheckStep;
    const double fm = eval();
    *t.coord = orig;
    const double numeric = (fp - fm) / (2.0 * kGradCheckStep);
    worst = std::max(worst, rel_err(t.analytic, numeric));
  }
  return worst;
}

Tensor4 random_tensor(int b, int c, int t, int n, Rng& rng) {
  Tensor4 x(b, c, t, n);
  for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
  return x;
}

double dot(const Tensor4& a, const Tensor4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

Mat random_propagation(int n, Rng& rng) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i)
    edges.emplace_back(static_cast<int>(rng.uniform_int(0, i - 1)), i);
  const SkeletonGraph g = build_graph(edges, n, 3);
  return normalized_propagation(
             adjacency_from_edge_weights(g, std::vector<double>(edges.size(), 1.0)))
      .matrix;
}

void collect_param_targets(Param& p, std::vector<FdTarget>& targets, Rng* sample_rng,
                           int max_per_tensor) {
  if (sample_rng == nullptr || static_cast<int>(p.count()) <= max_per_tensor) {
    for (std::size_t i = 0; i < p.count(); ++i)
      targets.push_back({&p.value[i], p.grad[i]});
    return;
  }
  for (int k = 0; k < max_per_tensor; ++k) {
    const auto i = static_cast<std::size_t>(
        sample_rng->uniform_int(0, static_cast<std::int64_t>(p.count()) - 1));
    targets.push_back({&p.value[i], p.grad[i]});
  }
}

double check_spatial_conv(Rng rng, bool inject) {
  const int b = static_cast<int>(rng.uniform_int(1, 3));
  const int c_in = static_cast<int>(rng.uniform_int(2, 4));
  const int c_out = static_cast<int>(rng.uniform_int(2, 5));
  const int t = static_cast<int>(rng.uniform_int(2, 5));
  const int n = static_cast<int>(rng.uniform_int(3, 6));
  const Mat c_hat = random_propagation(n, rng);
  Tensor4 x = random_tensor(b, c_in, t, n, rng);
  SpatialConv layer;
  layer.init(c_in, c_out, rng, "gc");
  Tensor4 r = random_tensor(b, c_out, t, n, rng);

  layer.theta.zero_grad();
  layer.forward(x, c_hat, true);
  const Tensor4 dx = layer.backward(r, c_hat);

  std::vector<FdTarget> targets;
  for (std::size_t i = 0; i < x.data.size(); ++i) targets.push_back({&x.data[i], dx.data[i]});
  collect_param_targets(layer.theta, targets, nullptr, 0);
  return max_fd_err(targets, [&] { return dot(layer.forward(x, c_hat, false), r); }, inject);
}

double check_temporal_conv(Rng rng, bool inject) {
  double worst = 0.0;
  for (int stride : {1, 2}) {
    const int b = static_cast<int>(rng.uniform_int(1, 3));
    const int c = static_cast<int>(rng.uniform_int(2, 4));
    const int t = static_cast<int>(rng.uniform_int(5, 9));
    const int n = static_cast<int>(rng.uniform_int(2, 5));
    const int kernel = rng.uniform_int(0, 1) ? 3 : 5;
    Tensor4 x = random_tensor(b, c, t, n, rng);
    TemporalConv layer;
    layer.init(c, kernel, stride, rng, "gc");
    for (auto& v : layer.bias.value) v = rng.uniform(-0.5, 0.5);
    Tensor4 out = layer.forward(x, true);
    Tensor4 r = random_tensor(out.b, out.c, out.t, out.n, rng);
    layer.taps.zero_grad();
    layer.bias.zero_grad();
    const Tensor4 dx = layer.backward(r);

    std::vector<FdTarget> targets;
    for (std::size_t i = 0; i < x.data.size(); ++i) targets.push_back({&x.data[i], dx.data[i]});
    collect_param_targets(layer.taps, targets, nullptr, 0);
    collect_param_targets(layer.bias, targets, nullptr, 0);
    worst = std::max(worst,
                     max_fd_err(targets, [&] { return dot(layer.forward(x, false), r); }, inject));
  }
  return worst;
}

double check_batch_norm(Rng rng, bool inject) {
  const int b = static_cast<int>(rng.uniform_int(2, 4));
  const int c = static_cast<int>(rng.uniform_int(2, 4));
  const int t = static_cast<int>(rng.uniform_int(2, 4));
  const int n = static_cast<int>(rng.uniform_int(2, 4));
  Tensor4 x = random_tensor(b, c, t, n, rng);
  BatchNorm layer;
  layer.init(c, "gc");
  for (auto& v : layer.gamma.value) v = rng.uniform(0.5, 1.5);
  for (auto& v : layer.beta.value) v = rng.uniform(-0.5, 0.5);
  Tensor4 r = random_tensor(b, c, t, n, rng);

  layer.gamma.zero_grad();
  layer.beta.zero_grad();
  layer.forward(x, Phase::train, true);
  const Tensor4 dx = layer.backward(r);

  std::vector<FdTarget> targets;
  for (std::size_t i = 0; i < x.data.size(); ++i) targets.push_back({&x.data[i], dx.data[i]});
  collect_param_targets(layer.gamma, targets, nullptr, 0);
  collect_param_targets(layer.beta, targets, nullptr, 0);
  return max_fd_err(
      targets, [&] { return dot(layer.forward(x, Phase::train, false), r); }, inject);
}

double check_relu(Rng rng, bool inject) {
  const int b = static_cast<int>(rng.uniform_int(1, 3));
  const int c = static_cast<int>(rng.uniform_int(2, 4));
  const int t = static_cast<int>(rng.uniform_int(2, 5));
  const int n = static_cast<int>(rng.uniform_int(2, 5));
  Tensor4 x = random_tensor(b, c, t, n, rng);
  // Keep values away from the kink, where finite differences are undefined.
  for (auto& v : x.data)
    if (std::abs(v) < 1e-3) v = 0.1;
  Relu layer;
  Tensor4 r = random_tensor(b, c, t, n, rng);
  layer.forward(x, true);
  const Tensor4 dx = layer.backward(r);

  std::vector<FdTarget> targets;
  for (std::size_t i = 0; i < x.data.size(); ++i) targets.push_back({&x.data[i], dx.data[i]});
  return max_fd_err(targets, [&] { return dot(layer.forward(x, false), r); }, inject);
}

double check_dropout_eval(Rng rng, bool inject) {
  const int b = static_cast<int>(rng.uniform_int(1, 3));
  const int c = static_cast<int>(rng.uniform_int(2, 4));
  const int t = static_cast<int>(rng.uniform_int(2, 5));
  const int n = static_cast<int>(rng.uniform_int(2, 5));
  Tensor4 x = random_tensor(b, c, t, n, rng);
  Dropout layer;
  layer.rate = 0.5;
  Tensor4 r = random_tensor(b, c, t, n, rng);
  layer.forward(x, Phase::eval, nullptr, true);
  const Tensor4 dx = layer.backward(r);

  std::vector<FdTarget> targets;
  for (std::size_t i = 0; i < x.data.size(); ++i) targets.push_back({&x.data[i], dx.data[i]});
  return max_fd_err(
      targets, [&] { return dot(layer.forward(x, Phase::eval, nullptr, false), r); }, inject);
}

double check_global_avg_pool(Rng rng, bool inject) {
  const int b = static_cast<int>(rng.uniform_int(1, 3));
  const int c = static_cast<int>(rng.uniform_int(2, 4));
  const int t = static_cast<int>(rng.uniform_int(2, 5));
  const int n = static_cast<int>(rng.uniform_int(2, 5));
  Tensor4 x = random_tensor(b, c, t, n, rng);
  GlobalAvgPool layer;
  Mat r(b, c);
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = rng.uniform(-1.0, 1.0);
  layer.forward(x, true);
  const Tensor4 dx = layer.backward(r);

  std::vector<FdTarget> targets;
  for (std::size_t i = 0; i < x.data.size(); ++i) targets.push_back({&x.data[i], dx.data[i]});
  return max_fd_err(
      targets, [&] { return (layer.forward(x, false).array() * r.array()).sum(); }, inject);
}

double check_softmax_xent(Rng rng, bool inject) {
  const int classes = static_cast<int>(rng.uniform_int(2, 8));
  Vec logits(classes);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = rng.uniform(-2.0, 2.0);
  const int label = static_cast<int>(rng.uniform_int(0, classes - 1));
  const Vec grad = cross_entropy_grad_logits(softmax(logits), label);

  std::vector<FdTarget> targets;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    targets.push_back({&logits(i), grad(i)});
  return max_fd_err(
      targets, [&] { return cross_entropy(softmax(logits), label); }, inject);
}

double check_block(Rng rng, bool inject) {
  const int n = static_cast<int>(rng.uniform_int(3, 6));
  const Mat c_hat = random_propagation(n, rng);
  BlockConfig cfg;
  cfg.in_channels = static_cast<int>(rng.uniform_int(2, 4));
  cfg.out_channels = static_cast<int>(rng.uniform_int(2, 4));
  cfg.temporal_kernel = 3;
  cfg.temporal_stride = static_cast<int>(rng.uniform_int(1, 2));
  cfg.dropout_rate = 0.0;  // keep the forward deterministic under differencing
  Block block;
  block.init(cfg, rng, "gc");

  Tensor4 x = random_tensor(2, cfg.in_channels, 8, n, rng);
  Tensor4 out = block.forward(x, c_hat, Phase::train, nullptr, true);
  Tensor4 r = random_tensor(out.b, out.c, out.t, out.n, rng);

  std::vector<Param*> params;
  block.collect(params);
  for (Param* p : params) p->zero_grad();
  out = block.forward(x, c_hat, Phase::train, nullptr, true);
  const Tensor4 dx = block.backward(r, c_hat);

  std::vector<FdTarget> targets;
  for (std::size_t i = 0; i < x.data.size(); ++i) targets.push_back({&x.data[i], dx.data[i]});
  for (Param* p : params) collect_param_targets(*p, targets, nullptr, 0);
  return max_fd_err(
      targets, [&] { return dot(block.forward(x, c_hat, Phase::train, nullptr, false), r); },
      inject);
}

double check_model(Rng rng, bool inject) {
  const int joints = 7, in_channels = 4, classes = 3, frames = 20;
  const Mat c_hat = random_propagation(joints, rng);
  const ModelConfig cfg = make_model_config("desk", joints, in_channels, classes, 5, 0.0);
  frames_after_blocks(cfg, frames);

  CgcnModel model;
  Rng init_rng = rng.fork(1);
  model.init(cfg, c_hat, "gc", init_rng);

  Tensor4 x = random_tensor(2, in_channels, frames, joints, rng);
  Mat r(2, classes);
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = rng.uniform(-1.0, 1.0);

  model.zero_grad();
  model.forward_logits(x, Phase::train, nullptr, true);
  const Tensor4 dx = model.backward_from_logits(r);

  Rng sample_rng = rng.fork(2);
  std::vector<FdTarget> targets;
  for (int k = 0; k < 40; ++k) {
    const auto i = static_cast<std::size_t>(
        sample_rng.uniform_int(0, static_cast<std::int64_t>(x.data.size()) - 1));
    targets.push_back({&x.data[i], dx.data[i]});
  }
  for (Param* p : model.parameters()) collect_param_targets(*p, targets, &sample_rng, 25);
  return max_fd_err(
      targets,
      [&] {
        return (model.forward_logits(x, Phase::train, nullptr, false).array() * r.array()).sum();
      },
      inject);
}

}  // namespace

std::vector<std::string> gradcheck_layer_names() {
  return {"spatial_conv", "temporal_conv", "batch_norm",  "relu", "dropout_eval",
          "global_avg_pool", "softmax_xent", "block", "model"};
}

std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed,
                                           const std::vector<std::string>& layers,
                                           bool inject_wrong_sign) {
  using CheckFn = double (*)(Rng, bool);
  const std::vector<std::pair<std::string, CheckFn>> checks = {
      {"spatial_conv", check_spatial_conv},
      {"temporal_conv", check_temporal_conv},
      {"batch_norm", check_batch_norm},
      {"relu", check_relu},
      {"dropout_eval", check_dropout_eval},
      {"global_avg_pool", check_global_avg_pool},
      {"softmax_xent", check_softmax_xent},
      {"block", check_block},
      {"model", check_model},
  };

  std::vector<GradCheckResult> results;
  for (std::size_t ci = 0; ci < checks.size(); ++ci) {
    const auto& [name, fn] = checks[ci];
    if (!layers.empty() &&
        std::find(layers.begin(), layers.end(), name) == layers.end())
      continue;
    // Five random shapes-by-seed repetitions per layer.
    double worst = 0.0;
    for (std::uint64_t rep = 0; rep < 5; ++rep) {
      const Rng base(seed, 0);
      worst = std::max(worst, fn(base.fork(1000 * (ci + 1) + rep), inject_wrong_sign));
    }
    results.push_back({name, worst, worst < kGradCheckTol});
  }
  if (!layers.empty())
    require(!results.empty(), Errc::InvalidConfig, "no matching gradcheck layers");
  return results;
}

}  // namespace cgcn
