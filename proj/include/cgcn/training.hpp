#pragma once

#include <map>
#include <vector>

#include "cgcn/net.hpp"
#include "cgcn/rng.hpp"
#include "cgcn/tensor.hpp"

namespace cgcn {

/// -log p_label for softmax probabilities.
double cross_entropy(const Vec& probs, int label);

/// Gradient of the composed softmax + cross-entropy w.r.t. the logits:
/// p - onehot(label).
Vec cross_entropy_grad_logits(const Vec& probs, int label);

/// SGD with Nesterov momentum and L2 weight decay:
///   g <- grad + weight_decay * w;  v <- mu * v + g;  w <- w - lr * (g + mu * v).
struct SgdNesterov {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;

  void attach(const std::vector<Param*>& params);
  void step(const std::vector<Param*>& params);

  std::vector<std::vector<double>> velocity;
};

/// Feature tensors ready for batching, one per sample.
struct TensorDataset {
  std::vector<Tensor3> features;
  std::vector<int> labels;
  int num_classes = 0;

  int size() const { return static_cast<int>(features.size()); }
};

/// Seeded shuffle into batches. A trailing batch of one sample is folded into
/// the previous batch (batch norm requires >= 2 rows in train mode).
std::vector<std::vector<int>> make_batches(int count, int batch_size, Rng& rng);

Tensor4 gather_batch(const TensorDataset& data, const std::vector<int>& indices);

/// One optimization epoch over one stream. Returns the mean cross-entropy
/// over samples; train-mode softmax outputs are written to probs_out (dataset
/// order) when provided.
double train_stream_epoch(CgcnModel& model, SgdNesterov& opt, const TensorDataset& data,
                          const std::vector<std::vector<int>>& batches, Rng& dropout_rng,
                          std::vector<Vec>* probs_out = nullptr);

/// True when `label` ranks among the k best scores (descending score, ties
/// resolved toward lower class indices).
bool label_in_topk(const Vec& scores, int label, int k);

/// Eval-mode fused top-k accuracies over the dataset.
std::map<int, double> evaluate(const std::vector<CgcnModel*>& models, const TensorDataset& data,
                               const std::vector<int>& ks, int batch_size = 32);

/// Fused eval-mode score vectors, one per sample.
std::vector<Vec> fused_scores(const std::vector<CgcnModel*>& models, const TensorDataset& data,
                              int batch_size = 32);

struct EpochRow {
  int epoch = 0;
  double loss = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<EpochRow> epochs;
  std::map<int, double> final_metrics;  // top-k on the training manifest, eval mode
  bool reached_target = false;
};

}  // namespace cgcn
