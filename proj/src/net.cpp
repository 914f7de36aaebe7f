#include "cgcn/net.hpp"

#include <cmath>

#include "cgcn/error.hpp"

namespace cgcn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;

double glorot_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_uniform(Param& p, Rng& rng, double bound) {
  for (auto& v : p.value) v = rng.uniform(-bound, bound);
}

}  // namespace

void Param::resize(std::vector<int> s, const std::string& nm) {
  name = nm;
  shape = std::move(s);
  std::size_t total = 1;
  for (int d : shape) total *= static_cast<std::size_t>(d);
  value.assign(total, 0.0);
  grad.assign(total, 0.0);
}

// --- batch norm ---------------------------------------------------------------

void BatchNorm::init(int channels, const std::string& name) {
  gamma.resize({channels}, name + ".gamma");
  beta.resize({channels}, name + ".beta");
  std::fill(gamma.value.begin(), gamma.value.end(), 1.0);
  running_mean.assign(static_cast<std::size_t>(channels), 0.0);
  running_var.assign(static_cast<std::size_t>(channels), 1.0);
}

Tensor4 BatchNorm::forward(const Tensor4& x, Phase phase, bool cache) {
  const int channels = static_cast<int>(gamma.value.size());
  require(x.c == channels, Errc::DimensionMismatch, gamma.name + ": channel count mismatch");
  if (phase == Phase::train)
    require(x.b >= 2, Errc::BatchTooSmall, "batch norm needs batch size >= 2 in train mode");

  const std::size_t slice = static_cast<std::size_t>(x.t) * static_cast<std::size_t>(x.n);
  const double m = static_cast<double>(x.b) * static_cast<double>(slice);

  std::vector<double> mean(static_cast<std::size_t>(channels), 0.0);
  std::vector<double> var(static_cast<std::size_t>(channels), 0.0);
  if (phase == Phase::train) {
    for (int c = 0; c < channels; ++c) {
      double s = 0.0;
      for (int b = 0; b < x.b; ++b) {
        const double* p = x.data.data() + x.index(b, c, 0, 0);
        for (std::size_t i = 0; i < slice; ++i) s += p[i];
      }
      mean[static_cast<std::size_t>(c)] = s / m;
    }
    for (int c = 0; c < channels; ++c) {
      const double mu = mean[static_cast<std::size_t>(c)];
      double s = 0.0;
      for (int b = 0; b < x.b; ++b) {
        const double* p = x.data.data() + x.index(b, c, 0, 0);
        for (std::size_t i = 0; i < slice; ++i) {
          const double d = p[i] - mu;
          s += d * d;
        }
      }
      var[static_cast<std::size_t>(c)] = s / m;
    }
    for (int c = 0; c < channels; ++c) {
      running_mean[static_cast<std::size_t>(c)] =
          momentum * running_mean[static_cast<std::size_t>(c)] +
          (1.0 - momentum) * mean[static_cast<std::size_t>(c)];
      running_var[static_cast<std::size_t>(c)] =
          momentum * running_var[static_cast<std::size_t>(c)] +
          (1.0 - momentum) * var[static_cast<std::size_t>(c)];
    }
  } else {
    mean = running_mean;
    var = running_var;
  }

  Tensor4 out(x.b, x.c, x.t, x.n);
  Tensor4 xhat;
  if (cache) xhat = Tensor4(x.b, x.c, x.t, x.n);
  for (int c = 0; c < channels; ++c) {
    const double mu = mean[static_cast<std::size_t>(c)];
    const double inv_std = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
    const double g = gamma.value[static_cast<std::size_t>(c)];
    const double sh = beta.value[static_cast<std::size_t>(c)];
    for (int b = 0; b < x.b; ++b) {
      const double* p = x.data.data() + x.index(b, c, 0, 0);
      double* q = out.data.data() + out.index(b, c, 0, 0);
      double* h = cache ? xhat.data.data() + xhat.index(b, c, 0, 0) : nullptr;
      for (std::size_t i = 0; i < slice; ++i) {
        const double xn = (p[i] - mu) * inv_std;
        if (h) h[i] = xn;
        q[i] = g * xn + sh;
      }
    }
  }
  if (cache) {
    cached_ = true;
    phase_ = phase;
    xhat_ = std::move(xhat);
    batch_mean_ = std::move(mean);
    batch_var_ = std::move(var);
  }
  return out;
}

Tensor4 BatchNorm::backward(const Tensor4& grad_out) {
  require(cached_, Errc::MissingCache, gamma.name + ": forward cache missing");
  require(grad_out.same_shape(xhat_), Errc::ShapeMismatch, gamma.name + ": gradient shape");
  const int channels = static_cast<int>(gamma.value.size());
  const std::size_t slice = static_cast<std::size_t>(grad_out.t) *
                            static_cast<std::size_t>(grad_out.n);
  const double m = static_cast<double>(grad_out.b) * static_cast<double>(slice);

  Tensor4 dx(grad_out.b, grad_out.c, grad_out.t, grad_out.n);
  for (int c = 0; c < channels; ++c) {
    const double inv_std = 1.0 / std::sqrt(batch_var_[static_cast<std::size_t>(c)] + eps);
    const double g = gamma.value[static_cast<std::size_t>(c)];
    double sum_g = 0.0, sum_gx = 0.0;
    for (int b = 0; b < grad_out.b; ++b) {
      const double* go = grad_out.data.data() + grad_out.index(b, c, 0, 0);
      const double* h = xhat_.data.data() + xhat_.index(b, c, 0, 0);
      for (std::size_t i = 0; i < slice; ++i) {
        sum_g += go[i];
        sum_gx += go[i] * h[i];
      }
    }
    gamma.grad[static_cast<std::size_t>(c)] += sum_gx;
    beta.grad[static_cast<std::size_t>(c)] += sum_g;

    for (int b = 0; b < grad_out.b; ++b) {
      const double* go = grad_out.data.data() + grad_out.index(b, c, 0, 0);
      const double* h = xhat_.data.data() + xhat_.index(b, c, 0, 0);
      double* d = dx.data.data() + dx.index(b, c, 0, 0);
      if (phase_ == Phase::train) {
        for (std::size_t i = 0; i < slice; ++i)
          d[i] = g * inv_std * (go[i] - sum_g / m - h[i] * sum_gx / m);
      } else {
        for (std::size_t i = 0; i < slice; ++i) d[i] = g * inv_std * go[i];
      }
    }
  }
  return dx;
}

// --- spatial conv -------------------------------------------------------------

void SpatialConv::init(int in_channels, int out_channels, Rng& rng, const std::string& name) {
  theta.resize({in_channels, out_channels}, name + ".theta");
  fill_uniform(theta, rng, glorot_bound(in_channels, out_channels));
}

Tensor4 SpatialConv::forward(const Tensor4& x, const Mat& c_hat, bool cache) {
  const int c_in = theta.shape[0];
  const int c_out = theta.shape[1];
  require(x.c == c_in, Errc::DimensionMismatch, theta.name + ": input channel mismatch");
  require(c_hat.rows() == c_hat.cols() && c_hat.rows() == x.n, Errc::DimensionMismatch,
          theta.name + ": propagation matrix must be joints x joints");

  const RowMat prop_t = c_hat.transpose();
  MapRowC th(theta.value.data(), c_in, c_out);
  const std::size_t tn = static_cast<std::size_t>(x.t) * static_cast<std::size_t>(x.n);

  Tensor4 out(x.b, c_out, x.t, x.n);
  RowMat y(c_out, static_cast<Eigen::Index>(tn));
  for (int b = 0; b < x.b; ++b) {
    MapRowC xb(x.data.data() + x.index(b, 0, 0, 0), c_in, static_cast<Eigen::Index>(tn));
    y.noalias() = th.transpose() * xb;
    MapRowC y_rows(y.data(), static_cast<Eigen::Index>(c_out) * x.t, x.n);
    MapRow z_rows(out.data.data() + out.index(b, 0, 0, 0),
                  static_cast<Eigen::Index>(c_out) * x.t, x.n);
    z_rows.noalias() = y_rows * prop_t;
  }
  require(all_finite(out), Errc::NonFiniteActivation, theta.name + ": non-finite activation");
  if (cache) {
    cached_ = true;
    x_ = x;
  }
  return out;
}

Tensor4 SpatialConv::backward(const Tensor4& grad_out, const Mat& c_hat) {
  require(cached_, Errc::MissingCache, theta.name + ": forward cache missing");
  const int c_in = theta.shape[0];
  const int c_out = theta.shape[1];
  require(grad_out.b == x_.b && grad_out.c == c_out && grad_out.t == x_.t && grad_out.n == x_.n,
          Errc::ShapeMismatch, theta.name + ": gradient shape");

  const RowMat prop = c_hat;
  MapRowC th(theta.value.data(), c_in, c_out);
  MapRow dth(theta.grad.data(), c_in, c_out);
  const std::size_t tn = static_cast<std::size_t>(x_.t) * static_cast<std::size_t>(x_.n);

  Tensor4 dx(x_.b, c_in, x_.t, x_.n);
  RowMat dy_rows(static_cast<Eigen::Index>(c_out) * x_.t, x_.n);
  for (int b = 0; b < x_.b; ++b) {
    MapRowC g_rows(grad_out.data.data() + grad_out.index(b, 0, 0, 0),
                   static_cast<Eigen::Index>(c_out) * x_.t, x_.n);
    dy_rows.noalias() = g_rows * prop;  // Z = Y C_hat^T  =>  dY = dZ C_hat
    MapRowC dyb(dy_rows.data(), c_out, static_cast<Eigen::Index>(tn));
    MapRowC xb(x_.data.data() + x_.index(b, 0, 0, 0), c_in, static_cast<Eigen::Index>(tn));
    dth.noalias() += xb * dyb.transpose();
    MapRow dxb(dx.data.data() + dx.index(b, 0, 0, 0), c_in, static_cast<Eigen::Index>(tn));
    dxb.noalias() = th * dyb;
  }
  return dx;
}

// --- temporal conv ------------------------------------------------------------

int TemporalConv::out_frames(int t, int kernel, int stride) {
  const int pad = (kernel - 1) / 2;
  return (t + 2 * pad - kernel) / stride + 1;
}

void TemporalConv::init(int channels, int kernel_size, int stride_, Rng& rng,
                        const std::string& name) {
  require(kernel_size >= 1 && kernel_size % 2 == 1, Errc::InvalidConfig,
          "temporal kernel must be odd (symmetric padding)");
  require(stride_ == 1 || stride_ == 2, Errc::InvalidConfig, "temporal stride must be 1 or 2");
  kernel = kernel_size;
  stride = stride_;
  taps.resize({channels, kernel_size}, name + ".taps");
  bias.resize({channels}, name + ".bias");
  fill_uniform(taps, rng, glorot_bound(kernel_size, kernel_size));
}

namespace {

// Shared sliding-window core; `taps_for` selects the kernel row per channel.
template <typename TapsFn>
void temporal_forward_core(const Tensor4& x, Tensor4& out, TapsFn taps_for, const double* bias,
                           int kernel, int stride) {
  const int pad = (kernel - 1) / 2;
  for (int b = 0; b < x.b; ++b) {
    for (int c = 0; c < x.c; ++c) {
      const double* taps = taps_for(c);
      for (int to = 0; to < out.t; ++to) {
        double* orow = out.data.data() + out.index(b, c, to, 0);
        const double b0 = bias ? bias[c] : 0.0;
        for (int n = 0; n < x.n; ++n) orow[n] = b0;
        const int base = to * stride - pad;
        for (int k = 0; k < kernel; ++k) {
          const int ti = base + k;
          if (ti < 0 || ti >= x.t) continue;
          const double w = taps[k];
          const double* xrow = x.data.data() + x.index(b, c, ti, 0);
          for (int n = 0; n < x.n; ++n) orow[n] += w * xrow[n];
        }
      }
    }
  }
}

}  // namespace

Tensor4 TemporalConv::forward(const Tensor4& x, bool cache) {
  const int channels = taps.shape[0];
  require(x.c == channels, Errc::DimensionMismatch, taps.name + ": channel mismatch");
  require(kernel <= x.t, Errc::KernelLargerThanSequence,
          taps.name + ": kernel " + std::to_string(kernel) + " exceeds " +
              std::to_string(x.t) + " frames");
  Tensor4 out(x.b, x.c, out_frames(x.t, kernel, stride), x.n);
  temporal_forward_core(
      x, out, [&](int c) { return taps.value.data() + static_cast<std::size_t>(c) * kernel; },
      bias.value.data(), kernel, stride);
  if (cache) {
    cached_ = true;
    x_ = x;
  }
  return out;
}

Tensor4 TemporalConv::backward(const Tensor4& grad_out) {
  require(cached_, Errc::MissingCache, taps.name + ": forward cache missing");
  const int pad = (kernel - 1) / 2;
  require(grad_out.b == x_.b && grad_out.c == x_.c && grad_out.n == x_.n &&
              grad_out.t == out_frames(x_.t, kernel, stride),
          Errc::ShapeMismatch, taps.name + ": gradient shape");

  Tensor4 dx(x_.b, x_.c, x_.t, x_.n);
  for (int b = 0; b < x_.b; ++b) {
    for (int c = 0; c < x_.c; ++c) {
      const double* taps_row = taps.value.data() + static_cast<std::size_t>(c) * kernel;
      double* dtaps_row = taps.grad.data() + static_cast<std::size_t>(c) * kernel;
      double dbias = 0.0;
      for (int to = 0; to < grad_out.t; ++to) {
        const double* grow = grad_out.data.data() + grad_out.index(b, c, to, 0);
        for (int n = 0; n < x_.n; ++n) dbias += grow[n];
        const int base = to * stride - pad;
        for (int k = 0; k < kernel; ++k) {
          const int ti = base + k;
          if (ti < 0 || ti >= x_.t) continue;
          const double* xrow = x_.data.data() + x_.index(b, c, ti, 0);
          double* dxrow = dx.data.data() + dx.index(b, c, ti, 0);
          const double w = taps_row[k];
          double dot = 0.0;
          for (int n = 0; n < x_.n; ++n) {
            dot += grow[n] * xrow[n];
            dxrow[n] += w * grow[n];
          }
          dtaps_row[k] += dot;
        }
      }
      bias.grad[static_cast<std::size_t>(c)] += dbias;
    }
  }
  return dx;
}

Tensor4 temporal_conv_shared(const Tensor4& x, const std::vector<double>& kernel, int stride) {
  require(!kernel.empty() && kernel.size() % 2 == 1, Errc::InvalidConfig,
          "temporal kernel must be odd (symmetric padding)");
  require(stride == 1 || stride == 2, Errc::InvalidConfig, "temporal stride must be 1 or 2");
  const int k = static_cast<int>(kernel.size());
  require(k <= x.t, Errc::KernelLargerThanSequence, "kernel exceeds sequence length");
  Tensor4 out(x.b, x.c, TemporalConv::out_frames(x.t, k, stride), x.n);
  temporal_forward_core(x, out, [&](int) { return kernel.data(); }, nullptr, k, stride);
  return out;
}

// --- relu / dropout / pool / linear -------------------------------------------

Tensor4 Relu::forward(const Tensor4& x, bool cache) {
  Tensor4 out(x.b, x.c, x.t, x.n);
  if (cache) {
    mask_.assign(x.data.size(), 0);
    b_ = x.b; c_ = x.c; t_ = x.t; n_ = x.n;
  }
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const bool pos = x.data[i] > 0.0;
    out.data[i] = pos ? x.data[i] : 0.0;
    if (cache && pos) mask_[i] = 1;
  }
  cached_ = cache;
  return out;
}

Tensor4 Relu::backward(const Tensor4& grad_out) {
  require(cached_, Errc::MissingCache, "relu: forward cache missing");
  require(grad_out.data.size() == mask_.size(), Errc::ShapeMismatch, "relu: gradient shape");
  Tensor4 dx(b_, c_, t_, n_);
  for (std::size_t i = 0; i < mask_.size(); ++i)
    dx.data[i] = mask_[i] ? grad_out.data[i] : 0.0;
  return dx;
}

Tensor4 Dropout::forward(const Tensor4& x, Phase phase, Rng* rng, bool cache) {
  if (phase == Phase::eval || rate == 0.0) {
    if (cache) {
      cached_ = true;
      identity_ = true;
    }
    return x;
  }
  require(rate > 0.0 && rate < 1.0, Errc::InvalidConfig, "dropout rate must be in [0,1)");
  require(rng != nullptr, Errc::InvalidConfig, "dropout in train mode needs an RNG");
  const double keep = 1.0 - rate;
  Tensor4 out(x.b, x.c, x.t, x.n);
  std::vector<double> scale(x.data.size());
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    scale[i] = (rng->uniform() < keep) ? 1.0 / keep : 0.0;
    out.data[i] = x.data[i] * scale[i];
  }
  if (cache) {
    cached_ = true;
    identity_ = false;
    scale_ = std::move(scale);
  }
  return out;
}

Tensor4 Dropout::backward(const Tensor4& grad_out) {
  require(cached_, Errc::MissingCache, "dropout: forward cache missing");
  if (identity_) return grad_out;
  require(grad_out.data.size() == scale_.size(), Errc::ShapeMismatch, "dropout: gradient shape");
  Tensor4 dx(grad_out.b, grad_out.c, grad_out.t, grad_out.n);
  for (std::size_t i = 0; i < scale_.size(); ++i) dx.data[i] = grad_out.data[i] * scale_[i];
  return dx;
}

Mat GlobalAvgPool::forward(const Tensor4& x, bool cache) {
  Mat out = Mat::Zero(x.b, x.c);
  const std::size_t slice = static_cast<std::size_t>(x.t) * static_cast<std::size_t>(x.n);
  for (int b = 0; b < x.b; ++b)
    for (int c = 0; c < x.c; ++c) {
      const double* p = x.data.data() + x.index(b, c, 0, 0);
      double s = 0.0;
      for (std::size_t i = 0; i < slice; ++i) s += p[i];
      out(b, c) = s / static_cast<double>(slice);
    }
  if (cache) {
    cached_ = true;
    b_ = x.b; c_ = x.c; t_ = x.t; n_ = x.n;
  }
  return out;
}

Tensor4 GlobalAvgPool::backward(const Mat& grad_out) {
  require(cached_, Errc::MissingCache, "pool: forward cache missing");
  require(grad_out.rows() == b_ && grad_out.cols() == c_, Errc::ShapeMismatch,
          "pool: gradient shape");
  Tensor4 dx(b_, c_, t_, n_);
  const double inv = 1.0 / (static_cast<double>(t_) * static_cast<double>(n_));
  for (int b = 0; b < b_; ++b)
    for (int c = 0; c < c_; ++c) {
      const double g = grad_out(b, c) * inv;
      double* p = dx.data.data() + dx.index(b, c, 0, 0);
      const std::size_t slice = static_cast<std::size_t>(t_) * static_cast<std::size_t>(n_);
      for (std::size_t i = 0; i < slice; ++i) p[i] = g;
    }
  return dx;
}

void Linear::init(int in_features, int out_features, Rng& rng, const std::string& name) {
  weight.resize({in_features, out_features}, name + ".weight");
  bias.resize({out_features}, name + ".bias");
  fill_uniform(weight, rng, glorot_bound(in_features, out_features));
}

Mat Linear::forward(const Mat& x, bool cache) {
  require(x.cols() == weight.shape[0], Errc::DimensionMismatch, weight.name + ": input width");
  MapRowC w(weight.value.data(), weight.shape[0], weight.shape[1]);
  Mat out = x * w;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      out(i, j) += bias.value[static_cast<std::size_t>(j)];
  if (cache) {
    cached_ = true;
    x_ = x;
  }
  return out;
}

Mat Linear::backward(const Mat& grad_out) {
  require(cached_, Errc::MissingCache, weight.name + ": forward cache missing");
  require(grad_out.rows() == x_.rows() && grad_out.cols() == weight.shape[1],
          Errc::ShapeMismatch, weight.name + ": gradient shape");
  MapRowC w(weight.value.data(), weight.shape[0], weight.shape[1]);
  MapRow dw(weight.grad.data(), weight.shape[0], weight.shape[1]);
  dw.noalias() += x_.transpose() * grad_out;
  for (Eigen::Index j = 0; j < grad_out.cols(); ++j)
    bias.grad[static_cast<std::size_t>(j)] += grad_out.col(j).sum();
  return grad_out * w.transpose();
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double e = std::exp(logits(i, j) - mx);
      out(i, j) = e;
      sum += e;
    }
    out.row(i) /= sum;
  }
  return out;
}

Vec softmax(const Vec& logits) {
  Mat row = logits.transpose();
  return softmax_rows(row).row(0).transpose();
}

// --- block and model ----------------------------------------------------------

void Block::init(const BlockConfig& config, Rng& rng, const std::string& name) {
  cfg = config;
  sconv.init(cfg.in_channels, cfg.out_channels, rng, name + ".sconv");
  bn1.init(cfg.out_channels, name + ".bn1");
  tconv.init(cfg.out_channels, cfg.temporal_kernel, cfg.temporal_stride, rng, name + ".tconv");
  bn2.init(cfg.out_channels, name + ".bn2");
  drop.rate = cfg.dropout_rate;
}

Tensor4 Block::forward(const Tensor4& x, const Mat& c_hat, Phase phase, Rng* dropout_rng,
                       bool cache) {
  Tensor4 h = sconv.forward(x, c_hat, cache);
  h = bn1.forward(h, phase, cache);
  h = relu1.forward(h, cache);
  h = tconv.forward(h, cache);
  h = bn2.forward(h, phase, cache);
  h = relu2.forward(h, cache);
  return drop.forward(h, phase, dropout_rng, cache);
}

Tensor4 Block::backward(const Tensor4& grad_out, const Mat& c_hat) {
  Tensor4 g = drop.backward(grad_out);
  g = relu2.backward(g);
  g = bn2.backward(g);
  g = tconv.backward(g);
  g = relu1.backward(g);
  g = bn1.backward(g);
  return sconv.backward(g, c_hat);
}

void Block::collect(std::vector<Param*>& out) {
  out.push_back(&sconv.theta);
  out.push_back(&bn1.gamma);
  out.push_back(&bn1.beta);
  out.push_back(&tconv.taps);
  out.push_back(&tconv.bias);
  out.push_back(&bn2.gamma);
  out.push_back(&bn2.beta);
}

ModelConfig make_model_config(const std::string& plan, int num_joints, int in_channels,
                              int num_classes, int temporal_kernel, double dropout_rate) {
  std::vector<int> channels;
  if (plan == "desk")
    channels = {16, 16, 16, 32, 32, 32, 64, 64, 64};
  else if (plan == "paper")
    channels = {64, 64, 64, 128, 128, 128, 256, 256, 256};
  else
    fail(Errc::InvalidConfig, "unknown channel plan '" + plan + "' (desk or paper)");

  ModelConfig cfg;
  cfg.num_joints = num_joints;
  cfg.in_channels = in_channels;
  cfg.num_classes = num_classes;
  int prev = in_channels;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    BlockConfig b;
    b.in_channels = prev;
    b.out_channels = channels[i];
    b.temporal_kernel = temporal_kernel;
    b.temporal_stride = (i == 3 || i == 6) ? 2 : 1;  // at the channel doublings
    b.dropout_rate = dropout_rate;
    cfg.blocks.push_back(b);
    prev = channels[i];
  }
  return cfg;
}

int frames_after_blocks(const ModelConfig& cfg, int t_in) {
  int t = t_in;
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const auto& b = cfg.blocks[i];
    require(b.temporal_kernel <= t, Errc::KernelLargerThanSequence,
            "block " + std::to_string(i + 1) + " sees " + std::to_string(t) +
                " frames < kernel " + std::to_string(b.temporal_kernel));
    t = TemporalConv::out_frames(t, b.temporal_kernel, b.temporal_stride);
  }
  return t;
}

void CgcnModel::init(const ModelConfig& config, const Mat& prop, std::string stream, Rng& rng) {
  require(prop.rows() == prop.cols() && prop.rows() == config.num_joints,
          Errc::DimensionMismatch, "propagation matrix must be joints x joints");
  require(all_finite(prop), Errc::NonFiniteActivation, "propagation matrix must be finite");
  cfg = config;
  propagation = prop;
  stream_id = std::move(stream);

  data_bn.init(cfg.in_channels, "data_bn");
  blocks.assign(cfg.blocks.size(), Block{});
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i)
    blocks[i].init(cfg.blocks[i], rng, "block" + std::to_string(i + 1));
  require(!cfg.blocks.empty(), Errc::InvalidConfig, "model needs at least one block");
  classifier.init(cfg.blocks.back().out_channels, cfg.num_classes, rng, "classifier");
}

Mat CgcnModel::forward_logits(const Tensor4& x, Phase phase, Rng* dropout_rng, bool cache) {
  require(x.c == cfg.in_channels, Errc::DimensionMismatch, "input channel mismatch");
  require(x.n == cfg.num_joints, Errc::DimensionMismatch, "input joint-axis mismatch");
  require(all_finite(x), Errc::NonFiniteActivation, "non-finite model input");
  Tensor4 h = data_bn.forward(x, phase, cache);
  for (auto& block : blocks) h = block.forward(h, propagation, phase, dropout_rng, cache);
  const Mat pooled = pool.forward(h, cache);
  return classifier.forward(pooled, cache);
}

Mat CgcnModel::forward_scores(const Tensor4& x, Phase phase, Rng* dropout_rng, bool cache) {
  return softmax_rows(forward_logits(x, phase, dropout_rng, cache));
}

Tensor4 CgcnModel::backward_from_logits(const Mat& grad_logits) {
  const Mat d_pooled = classifier.backward(grad_logits);
  Tensor4 g = pool.backward(d_pooled);
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it)
    g = it->backward(g, propagation);
  return data_bn.backward(g);
}

std::vector<Param*> CgcnModel::parameters() {
  std::vector<Param*> out;
  out.push_back(&data_bn.gamma);
  out.push_back(&data_bn.beta);
  for (auto& block : blocks) block.collect(out);
  out.push_back(&classifier.weight);
  out.push_back(&classifier.bias);
  return out;
}

void CgcnModel::zero_grad() {
  for (Param* p : parameters()) p->zero_grad();
}

int argmax_lowest(const Vec& scores) {
  int best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores(i) > scores(best)) best = static_cast<int>(i);
  return best;
}

int StreamScores::predicted_class() const { return argmax_lowest(fused); }

StreamScores four_stream_predict(const Tensor4& x, const std::vector<CgcnModel*>& models) {
  require(!models.empty(), Errc::EmptyDataset, "no streams registered");
  require(x.b == 1, Errc::DimensionMismatch, "four_stream_predict takes a single sample");
  const int classes = models.front()->cfg.num_classes;
  for (const CgcnModel* m : models)
    require(m->cfg.num_classes == classes, Errc::StreamClassMismatch,
            "streams disagree on class count");

  StreamScores scores;
  scores.fused = Vec::Zero(classes);
  for (CgcnModel* m : models) {
    const Mat probs = m->forward_scores(x, Phase::eval, nullptr, false);
    const Vec v = probs.row(0).transpose();
    scores.per_stream.emplace_back(m->stream_id, v);
    scores.fused += v;
  }
  return scores;
}

}  // namespace cgcn
