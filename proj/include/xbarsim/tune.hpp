#ifndef XBARSIM_TUNE_HPP
#define XBARSIM_TUNE_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "xbarsim/dataset.hpp"
#include "xbarsim/network.hpp"
#include "xbarsim/rng.hpp"

namespace xbarsim {

struct AdaptConfig {
  std::int64_t num_samples = 0;  // 0 = one full pass over the training data
  int batch_size = 32;
  float momentum = 0.1f;
  bool cumulative = false;  // running average over batches instead of EMA

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("AdaptConfig: batch_size must be >= 1");
    if (num_samples != 0 && num_samples < batch_size)
      throw std::invalid_argument("AdaptConfig: num_samples must be >= batch_size");
  }
};

struct FinetuneConfig {
  int epochs = 5;
  double lr0 = 0.01;
  double decay_factor = 5.0;
  int decay_every = 2;  // epochs
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool freeze_running_stats = false;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("FinetuneConfig: epochs must be >= 1");
    if (!(lr0 > 0.0) && lr0 != 0.0) throw std::invalid_argument("FinetuneConfig: bad lr0");
    if (decay_factor < 1.0) throw std::invalid_argument("FinetuneConfig: decay_factor must be >= 1");
    if (decay_every < 1 || batch_size < 1) throw std::invalid_argument("FinetuneConfig: bad schedule");
  }

  double lr_at_epoch(int epoch) const {
    return lr0 / std::pow(decay_factor, static_cast<double>(epoch / decay_every));
  }
};

struct PretrainConfig {
  int epochs = 12;
  double lr = 0.05;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
};

namespace detail {

inline Tensor gather_batch(const Dataset& ds, const std::vector<std::int64_t>& order,
                           std::size_t first, std::size_t count, std::vector<int>& labels) {
  const std::int64_t C = ds.images.extent(1), H = ds.images.extent(2), W = ds.images.extent(3);
  const std::int64_t elems = C * H * W;
  Tensor batch({static_cast<std::int64_t>(count), C, H, W});
  labels.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::int64_t src = order[first + k];
    std::copy(ds.images.data() + src * elems, ds.images.data() + (src + 1) * elems,
              batch.data() + static_cast<std::int64_t>(k) * elems);
    labels[k] = ds.labels[static_cast<std::size_t>(src)];
  }
  return batch;
}

}  // namespace detail

/// Top-1 accuracy in eval mode. Deterministic: fixed batch partition, ties
/// resolved to the lowest class index.
inline double evaluate(Model& model, const Dataset& data, int batch_size = 256) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const std::int64_t classes = model.spec().num_classes;
  for (int l : data.labels)
    if (l < 0 || l >= classes)
      throw std::invalid_argument("evaluate: label " + std::to_string(l) + " outside " +
                                  std::to_string(classes) + " classes");
  std::vector<std::int64_t> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  std::int64_t correct = 0;
  std::vector<int> labels;
  for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(static_cast<std::size_t>(batch_size), order.size() - first);
    Tensor batch = detail::gather_batch(data, order, first, count, labels);
    Tensor logits = model.forward(batch, BNMode::Eval);
    SoftmaxResult sm = softmax_cross_entropy(logits, labels);
    for (std::size_t k = 0; k < count; ++k)
      if (sm.argmax[k] == labels[k]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Re-estimate BN running statistics from the deployed (noisy) activations.
/// Forward passes only; gamma, beta and all weights stay bit-identical.
inline void bn_adapt(Model& model, const Dataset& train, const AdaptConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("bn_adapt: empty dataset");
  if (model.num_bn() == 0) throw std::invalid_argument("bn_adapt: model has no BN layers");

  const std::int64_t budget = cfg.num_samples == 0 ? train.size() : cfg.num_samples;
  std::vector<float> saved_momentum(model.num_bn());
  for (std::size_t i = 0; i < model.num_bn(); ++i) {
    saved_momentum[i] = model.bn_state(i).momentum;
    model.bn_state(i).momentum = cfg.momentum;
  }

  std::vector<std::int64_t> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> labels;
  std::int64_t seen = 0;
  int batch_no = 0;
  while (seen < budget) {
    const std::size_t first = static_cast<std::size_t>(seen % train.size());
    const std::size_t count = std::min({static_cast<std::size_t>(cfg.batch_size),
                                        order.size() - first,
                                        static_cast<std::size_t>(budget - seen)});
    if (cfg.cumulative) {
      // cumulative moving average: running stats equal the mean of batch stats
      const float m = 1.0f / static_cast<float>(batch_no + 1);
      for (std::size_t i = 0; i < model.num_bn(); ++i) model.bn_state(i).momentum = m;
    }
    Tensor batch = detail::gather_batch(train, order, first, count, labels);
    model.forward(batch, BNMode::Adapt);
    seen += static_cast<std::int64_t>(count);
    ++batch_no;
  }
  for (std::size_t i = 0; i < model.num_bn(); ++i) model.bn_state(i).momentum = saved_momentum[i];
}

/// SGD on gamma/beta only, against the frozen deployed weights. The schedule
/// divides lr0 by decay_factor every decay_every epochs. Running statistics
/// keep updating during the fine-tuning forwards unless frozen, so statistics
/// adaptation is implicit here.
inline std::vector<EpochLog> bn_finetune(Model& model, const Dataset& train, const Dataset* test,
                                         const FinetuneConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("bn_finetune: empty dataset");
  if (model.num_bn() == 0) throw std::invalid_argument("bn_finetune: model has no BN layers");

  std::vector<EpochLog> logs;
  std::vector<std::int64_t> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at_epoch(epoch);
    rng::Sequence shuffle_rng(rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch) + 0x66746e65ull));
    rng::shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    std::int64_t loss_n = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - first);
      if (count < 2) continue;  // batch statistics need more than one sample
      Tensor batch = detail::gather_batch(train, order, first, count, labels);
      Model::Caches caches;
      Tensor logits = model.forward(batch, BNMode::Train, &caches, false, !cfg.freeze_running_stats);
      SoftmaxResult sm = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(sm.loss))
        throw std::runtime_error("bn_finetune: non-finite loss at epoch " + std::to_string(epoch));
      GradientSet g = model.backward(sm.dlogits, caches, false);
      if (lr != 0.0) model.sgd_step_bn(g, lr);
      loss_sum += sm.loss * static_cast<double>(count);
      loss_n += static_cast<std::int64_t>(count);
    }
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_loss = loss_sum / static_cast<double>(loss_n);
    log.test_accuracy = test ? evaluate(model, *test) : 0.0;
    logs.push_back(log);
  }
  return logs;
}

/// Full SGD over all parameters; produces the desk-scale baselines the
/// deployment experiments start from.
inline std::vector<EpochLog> pretrain(Model& model, const Dataset& train, const Dataset* test,
                                      const PretrainConfig& cfg) {
  if (train.size() == 0) throw std::invalid_argument("pretrain: empty dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.lr > 0.0))
    throw std::invalid_argument("pretrain: bad config");
  model.init_params(cfg.seed);

  std::vector<EpochLog> logs;
  std::vector<std::int64_t> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng::Sequence shuffle_rng(rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch) + 0x70726500ull));
    rng::shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    std::int64_t loss_n = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - first);
      if (count < 2) continue;
      Tensor batch = detail::gather_batch(train, order, first, count, labels);
      Model::Caches caches;
      Tensor logits = model.forward(batch, BNMode::Train, &caches, true);
      SoftmaxResult sm = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(sm.loss))
        throw std::runtime_error("pretrain: diverged (non-finite loss) at epoch " +
                                 std::to_string(epoch) + ", batch " + std::to_string(first) +
                                 ", lr " + std::to_string(cfg.lr));
      GradientSet g = model.backward(sm.dlogits, caches, true);
      model.sgd_step_all(g, cfg.lr);
      loss_sum += sm.loss * static_cast<double>(count);
      loss_n += static_cast<std::int64_t>(count);
    }
    EpochLog log;
    log.epoch = epoch;
    log.lr = cfg.lr;
    log.train_loss = loss_sum / static_cast<double>(loss_n);
    log.test_accuracy = test ? evaluate(model, *test) : 0.0;
    logs.push_back(log);
  }
  return logs;
}

}  // namespace xbarsim

#endif
