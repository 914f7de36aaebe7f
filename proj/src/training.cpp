#include "cgcn/training.hpp"

#include <algorithm>
#include <cmath>

#include "cgcn/error.hpp"

namespace cgcn {

double cross_entropy(const Vec& probs, int label) {
  require(label >= 0 && label < probs.size(), Errc::InvalidLabel,
          "label " + std::to_string(label) + " outside class range");
  // Clamp so that an underflowed probability yields a large finite loss.
  return -std::log(std::max(probs(label), 1e-300));
}

Vec cross_entropy_grad_logits(const Vec& probs, int label) {
  require(label >= 0 && label < probs.size(), Errc::InvalidLabel,
          "label " + std::to_string(label) + " outside class range");
  Vec g = probs;
  g(label) -= 1.0;
  return g;
}

void SgdNesterov::attach(const std::vector<Param*>& params) {
  velocity.clear();
  for (const Param* p : params) velocity.emplace_back(p->count(), 0.0);
}

void SgdNesterov::step(const std::vector<Param*>& params) {
  require(params.size() == velocity.size(), Errc::ShapeMismatch,
          "optimizer not attached to this parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    auto& v = velocity[i];
    require(p.value.size() == v.size() && p.grad.size() == v.size(), Errc::ShapeMismatch,
            p.name + ": parameter/velocity shape changed");
    for (std::size_t j = 0; j < v.size(); ++j) {
      require(std::isfinite(p.grad[j]), Errc::NonFiniteGradient,
              p.name + ": non-finite gradient");
      const double g = p.grad[j] + weight_decay * p.value[j];
      v[j] = momentum * v[j] + g;
      p.value[j] -= lr * (g + momentum * v[j]);
    }
  }
}

std::vector<std::vector<int>> make_batches(int count, int batch_size, Rng& rng) {
  require(count >= 1, Errc::EmptyDataset, "no samples to batch");
  require(batch_size >= 2, Errc::BatchTooSmall, "batch size must be >= 2");
  std::vector<int> order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);

  std::vector<std::vector<int>> batches;
  for (int start = 0; start < count; start += batch_size) {
    const int end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  require(batches.front().size() >= 2, Errc::BatchTooSmall,
          "dataset of one sample cannot form a training batch");
  return batches;
}

Tensor4 gather_batch(const TensorDataset& data, const std::vector<int>& indices) {
  require(!indices.empty(), Errc::EmptyDataset, "empty batch");
  const Tensor3& first = data.features[static_cast<std::size_t>(indices[0])];
  Tensor4 batch(static_cast<int>(indices.size()), first.c, first.t, first.n);
  for (std::size_t i = 0; i < indices.size(); ++i)
    place_sample(batch, static_cast<int>(i), data.features[static_cast<std::size_t>(indices[i])]);
  return batch;
}

double train_stream_epoch(CgcnModel& model, SgdNesterov& opt, const TensorDataset& data,
                          const std::vector<std::vector<int>>& batches, Rng& dropout_rng,
                          std::vector<Vec>* probs_out) {
  require(data.size() > 0, Errc::EmptyDataset, "empty dataset");
  if (probs_out) probs_out->assign(static_cast<std::size_t>(data.size()), Vec());

  const std::vector<Param*> params = model.parameters();
  double loss_sum = 0.0;
  int seen = 0;
  for (const auto& batch : batches) {
    const Tensor4 x = gather_batch(data, batch);
    model.zero_grad();
    const Mat logits = model.forward_logits(x, Phase::train, &dropout_rng, true);
    const Mat probs = softmax_rows(logits);

    Mat grad = Mat::Zero(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const int label = data.labels[static_cast<std::size_t>(batch[i])];
      const Vec p = probs.row(static_cast<Eigen::Index>(i)).transpose();
      const double loss = cross_entropy(p, label);
      require(std::isfinite(loss), Errc::NonFiniteGradient, "non-finite training loss");
      loss_sum += loss;
      grad.row(static_cast<Eigen::Index>(i)) =
          cross_entropy_grad_logits(p, label).transpose() /
          static_cast<double>(batch.size());
      if (probs_out) (*probs_out)[static_cast<std::size_t>(batch[i])] = p;
    }
    model.backward_from_logits(grad);
    opt.step(params);
    seen += static_cast<int>(batch.size());
  }
  return loss_sum / static_cast<double>(seen);
}

bool label_in_topk(const Vec& scores, int label, int k) {
  // Rank of `label` = number of classes with a strictly higher score, plus
  // equal-scored classes with a lower index.
  int rank = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (i == label) continue;
    if (scores(i) > scores(label) || (scores(i) == scores(label) && i < label)) ++rank;
  }
  return rank < k;
}

std::vector<Vec> fused_scores(const std::vector<CgcnModel*>& models, const TensorDataset& data,
                              int batch_size) {
  require(!models.empty(), Errc::EmptyDataset, "no models to evaluate");
  require(data.size() > 0, Errc::EmptyDataset, "empty dataset");
  const int classes = models.front()->cfg.num_classes;
  for (const CgcnModel* m : models)
    require(m->cfg.num_classes == classes, Errc::StreamClassMismatch,
            "streams disagree on class count");

  std::vector<Vec> fused(static_cast<std::size_t>(data.size()), Vec::Zero(classes));
  for (int start = 0; start < data.size(); start += batch_size) {
    const int end = std::min(data.size(), start + batch_size);
    std::vector<int> idx;
    for (int i = start; i < end; ++i) idx.push_back(i);
    const Tensor4 x = gather_batch(data, idx);
    for (CgcnModel* m : models) {
      const Mat probs = m->forward_scores(x, Phase::eval, nullptr, false);
      for (std::size_t i = 0; i < idx.size(); ++i)
        fused[static_cast<std::size_t>(idx[i])] +=
            probs.row(static_cast<Eigen::Index>(i)).transpose();
    }
  }
  return fused;
}

std::map<int, double> evaluate(const std::vector<CgcnModel*>& models, const TensorDataset& data,
                               const std::vector<int>& ks, int batch_size) {
  const std::vector<Vec> fused = fused_scores(models, data, batch_size);
  std::map<int, double> metrics;
  for (int k : ks) {
    int hits = 0;
    for (int i = 0; i < data.size(); ++i)
      if (label_in_topk(fused[static_cast<std::size_t>(i)],
                        data.labels[static_cast<std::size_t>(i)], k))
        ++hits;
    metrics[k] = static_cast<double>(hits) / static_cast<double>(data.size());
  }
  return metrics;
}

}  // namespace cgcn
