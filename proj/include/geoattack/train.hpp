#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "geoattack/corpus.hpp"
#include "geoattack/model.hpp"

namespace geoattack {

struct TrainConfig {
  EncoderKind encoder = EncoderKind::Convolutional;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 5.0;  // global L2 norm; 0 disables
  std::uint64_t seed = 1;
  std::size_t hidden = 128;
  std::size_t embedding_dim = 100;
  double init_scale = 0.1;  // uniform init for embeddings when no pretrained file is given
  int workers = 0;          // 0 = all available
  double dropout = 0.0;     // on the pooled encoder output, training only
  bool freeze_embeddings = false;
};

struct EncodedExample {
  std::vector<TokenId> ids;
  std::size_t label = 0;
};

std::vector<EncodedExample> encode_dataset(const Dataset& dataset, const Vocabulary& vocab);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fresh classifier. With `pretrained` the embedding table is copied from it,
/// otherwise rows are uniform in [-init_scale, init_scale]; the oov row is 0.
Classifier make_classifier(std::shared_ptr<const Vocabulary> vocab, const EmbeddingTable* pretrained,
                           std::vector<std::string> label_names, const TrainConfig& config);

/// Adam over all parameters. Embedding rows are updated lazily: only rows
/// with a gradient in the current step move.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& params, const TrainConfig& config);
  void step(ModelParams& params, const Gradient& grad);
  std::size_t steps() const { return step_; }

 private:
  TrainConfig config_;
  std::size_t step_ = 0;
  Matrix emb_m_, emb_v_;
  std::vector<Vec> enc_m_, enc_v_;
  Vec head_w_m_, head_w_v_, head_b_m_, head_b_v_;
};

/// Minibatch trainer that keeps optimizer state across calls so it can be
/// used for fine-tuning. Per-example gradients are computed in parallel and
/// summed in example order, so results do not depend on the worker count.
class Trainer {
 public:
  Trainer(Classifier& classifier, const TrainConfig& config);

  /// One pass over `data` in a seeded shuffled order. Returns the mean loss.
  double train_epoch(std::span<const EncodedExample> data);

  /// Serial reference for one minibatch gradient (mean over the batch).
  /// `masks` holds one dropout mask per batch entry, or is empty.
  static double batch_gradient_serial(const Classifier& classifier, std::span<const EncodedExample> data,
                                      std::span<const std::size_t> batch, Gradient& out,
                                      std::span<const Vec> masks = {});
  /// Parallel version; bitwise identical to the serial reference.
  double batch_gradient(std::span<const EncodedExample> data, std::span<const std::size_t> batch, Gradient& out,
                        std::span<const Vec> masks = {});

  std::size_t epochs_done() const { return epochs_done_; }

 private:
  Classifier* classifier_;
  TrainConfig config_;
  AdamOptimizer optimizer_;
  std::mt19937_64 rng_;
  std::vector<Gradient> scratch_;
  std::vector<double> losses_;
  std::vector<Vec> masks_;
  std::size_t epochs_done_ = 0;
};

double accuracy(const Classifier& classifier, std::span<const EncodedExample> data, int workers = 0);
double accuracy_serial(const Classifier& classifier, std::span<const EncodedExample> data);
std::vector<std::size_t> predict_all(const Classifier& classifier, std::span<const EncodedExample> data, int workers = 0);

struct TrainResult {
  Classifier classifier;
  std::vector<EpochMetrics> history;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Trains from scratch on `train`, reporting per-epoch accuracy (and test
/// accuracy when `test` is given). Throws TrainingDiverged on a NaN loss.
TrainResult train(const Dataset& train_set, const Dataset* test_set, std::shared_ptr<const Vocabulary> vocab,
                  const EmbeddingTable* pretrained, const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace geoattack
