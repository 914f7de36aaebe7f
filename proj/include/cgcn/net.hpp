#pragma once

#include <string>
#include <vector>

#include "cgcn/linalg.hpp"
#include "cgcn/rng.hpp"
#include "cgcn/tensor.hpp"

namespace cgcn {

enum class Phase { train, eval };

/// Named parameter tensor with its gradient buffer.
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  void resize(std::vector<int> s, const std::string& nm);
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
  std::size_t count() const { return value.size(); }
};

/// Per-channel batch normalization over batch x frames x joints.
/// eps 1e-5; running statistics updated with momentum 0.9 in train mode.
struct BatchNorm {
  Param gamma, beta;
  std::vector<double> running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.9;

  void init(int channels, const std::string& name);
  Tensor4 forward(const Tensor4& x, Phase phase, bool cache = true);
  Tensor4 backward(const Tensor4& grad_out);

 private:
  // cache
  bool cached_ = false;
  Phase phase_ = Phase::train;
  Tensor4 xhat_;
  std::vector<double> batch_mean_, batch_var_;
};

/// Spatial graph convolution: per (batch, frame) slice X (joints x C_in),
/// Z = C_hat * X * Theta. The propagation matrix is a fixed constant and
/// receives no gradient.
struct SpatialConv {
  Param theta;  // [C_in x C_out]

  void init(int in_channels, int out_channels, Rng& rng, const std::string& name);
  Tensor4 forward(const Tensor4& x, const Mat& c_hat, bool cache = true);
  Tensor4 backward(const Tensor4& grad_out, const Mat& c_hat);

 private:
  bool cached_ = false;
  Tensor4 x_;
};

/// Depthwise temporal convolution: one 1-D kernel per channel applied along
/// the frame axis independently per joint, symmetric zero padding, odd kernel.
struct TemporalConv {
  Param taps;  // [C x K]
  Param bias;  // [C]
  int kernel = 9;
  int stride = 1;

  void init(int channels, int kernel_size, int stride_, Rng& rng, const std::string& name);
  static int out_frames(int t, int kernel, int stride);
  Tensor4 forward(const Tensor4& x, bool cache = true);
  Tensor4 backward(const Tensor4& grad_out);

 private:
  bool cached_ = false;
  Tensor4 x_;
};

/// Spec-level primitive: one shared 1-D kernel, no bias, applied along frames
/// for every (batch, channel, joint).
Tensor4 temporal_conv_shared(const Tensor4& x, const std::vector<double>& kernel, int stride);

struct Relu {
  Tensor4 forward(const Tensor4& x, bool cache = true);
  Tensor4 backward(const Tensor4& grad_out);

 private:
  bool cached_ = false;
  std::vector<unsigned char> mask_;
  int b_ = 0, c_ = 0, t_ = 0, n_ = 0;
};

/// Inverted dropout: train mode zeroes entries with probability rate and
/// scales survivors by 1/(1-rate); eval mode is the identity.
struct Dropout {
  double rate = 0.5;

  Tensor4 forward(const Tensor4& x, Phase phase, Rng* rng, bool cache = true);
  Tensor4 backward(const Tensor4& grad_out);

 private:
  bool cached_ = false;
  bool identity_ = true;
  std::vector<double> scale_;
};

/// Mean over frames and joints: [B,C,T,N] -> [B,C].
struct GlobalAvgPool {
  Mat forward(const Tensor4& x, bool cache = true);
  Tensor4 backward(const Mat& grad_out);

 private:
  bool cached_ = false;
  int b_ = 0, c_ = 0, t_ = 0, n_ = 0;
};

struct Linear {
  Param weight;  // [C_in x C_out]
  Param bias;    // [C_out]

  void init(int in_features, int out_features, Rng& rng, const std::string& name);
  Mat forward(const Mat& x, bool cache = true);
  Mat backward(const Mat& grad_out);

 private:
  bool cached_ = false;
  Mat x_;
};

/// Row-wise softmax with max subtraction.
Mat softmax_rows(const Mat& logits);
Vec softmax(const Vec& logits);

struct BlockConfig {
  int in_channels = 0;
  int out_channels = 0;
  int temporal_kernel = 9;
  int temporal_stride = 1;
  double dropout_rate = 0.5;
};

/// One convolution block: S-conv, BN, ReLU, T-conv, BN, ReLU, dropout.
struct Block {
  BlockConfig cfg;
  SpatialConv sconv;
  BatchNorm bn1;
  Relu relu1;
  TemporalConv tconv;
  BatchNorm bn2;
  Relu relu2;
  Dropout drop;

  void init(const BlockConfig& config, Rng& rng, const std::string& name);
  Tensor4 forward(const Tensor4& x, const Mat& c_hat, Phase phase, Rng* dropout_rng,
                  bool cache = true);
  Tensor4 backward(const Tensor4& grad_out, const Mat& c_hat);
  void collect(std::vector<Param*>& out);
};

struct ModelConfig {
  int num_joints = 0;
  int in_channels = 0;
  int num_classes = 0;
  std::vector<BlockConfig> blocks;
};

/// Channel plans: "desk" = 16,16,16,32,32,32,64,64,64; "paper" =
/// 64,64,64,128,128,128,256,256,256. Temporal stride 2 at blocks 4 and 7.
ModelConfig make_model_config(const std::string& plan, int num_joints, int in_channels,
                              int num_classes, int temporal_kernel, double dropout_rate);

/// Frame count after the block stack (validates kernel <= frames per block).
int frames_after_blocks(const ModelConfig& cfg, int t_in);

/// Nine-block network for one stream: data BN, blocks, global average
/// pooling, linear classifier. Softmax is applied by score helpers.
struct CgcnModel {
  ModelConfig cfg;
  Mat propagation;               // the stream's fixed C_hat_s
  std::string stream_id;         // "J", "B", "W", "A" or "sum"
  std::string propagation_hash;  // provenance of the centrality inputs

  BatchNorm data_bn;
  std::vector<Block> blocks;
  GlobalAvgPool pool;
  Linear classifier;

  void init(const ModelConfig& config, const Mat& prop, std::string stream, Rng& rng);
  Mat forward_logits(const Tensor4& x, Phase phase, Rng* dropout_rng, bool cache = true);
  Mat forward_scores(const Tensor4& x, Phase phase, Rng* dropout_rng, bool cache = false);
  Tensor4 backward_from_logits(const Mat& grad_logits);
  std::vector<Param*> parameters();
  void zero_grad();
};

/// Per-stream post-softmax score vectors and their elementwise sum.
struct StreamScores {
  std::vector<std::pair<std::string, Vec>> per_stream;
  Vec fused;

  /// Argmax of the fused scores; ties break toward the lowest class index.
  int predicted_class() const;
};

/// Runs every model in eval mode on a single-sample tensor and fuses the
/// softmax outputs by summation.
StreamScores four_stream_predict(const Tensor4& x, const std::vector<CgcnModel*>& models);

int argmax_lowest(const Vec& scores);

}  // namespace cgcn
