#include "geoattack/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "geoattack/kernels.hpp"
#include "geoattack/parallel.hpp"

namespace geoattack {

std::vector<EncodedExample> encode_dataset(const Dataset& dataset, const Vocabulary& vocab) {
  std::vector<EncodedExample> out;
  out.reserve(dataset.size());
  for (const auto& ex : dataset.examples) out.push_back({encode(ex, vocab), ex.label});
  return out;
}

Classifier make_classifier(std::shared_ptr<const Vocabulary> vocab, const EmbeddingTable* pretrained,
                           std::vector<std::string> label_names, const TrainConfig& config) {
  if (!vocab) throw ModelError("make_classifier needs a vocabulary");
  if (label_names.size() < 2) throw ModelError("need at least 2 classes");
  std::mt19937_64 rng(config.seed);
  ModelParams params;
  if (pretrained) {
    if (pretrained->vocab_size() != vocab->size()) throw ModelError("pretrained embeddings do not match vocabulary");
    params.embedding = *pretrained;
    for (double& x : params.embedding.row(vocab->oov_id())) x = 0.0;
  } else {
    params.embedding = EmbeddingTable(vocab->size(), config.embedding_dim);
    std::uniform_real_distribution<double> dist(-config.init_scale, config.init_scale);
    for (std::size_t r = 1; r < vocab->size(); ++r)
      for (double& x : params.embedding.row(static_cast<TokenId>(r))) x = dist(rng);
  }
  const std::size_t dim = params.embedding.dim();
  params.encoder = make_encoder(config.encoder, dim, config.hidden, rng);
  params.head = make_affine_head(label_names.size(), output_dim(params.encoder), rng);
  return Classifier(std::move(params), std::move(vocab), std::move(label_names));
}

AdamOptimizer::AdamOptimizer(const ModelParams& params, const TrainConfig& config) : config_(config) {
  emb_m_ = Matrix(params.embedding.vocab_size(), params.embedding.dim());
  emb_v_ = emb_m_;
  for_each_tensor(params.encoder, [&](const std::string&, std::span<const double> t) {
    enc_m_.emplace_back(t.size(), 0.0);
    enc_v_.emplace_back(t.size(), 0.0);
  });
  head_w_m_.assign(params.head.weight.size(), 0.0);
  head_w_v_ = head_w_m_;
  head_b_m_.assign(params.head.bias.size(), 0.0);
  head_b_v_ = head_b_m_;
}

namespace {

struct AdamStep {
  double lr, b1, b2, eps, c1, c2;

  void apply(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v) const {
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

}  // namespace

void AdamOptimizer::step(ModelParams& params, const Gradient& grad) {
  ++step_;
  const double t = static_cast<double>(step_);
  const AdamStep adam{config_.learning_rate, config_.beta1, config_.beta2, config_.epsilon,
                      1.0 - std::pow(config_.beta1, t), 1.0 - std::pow(config_.beta2, t)};

  const auto& ids = grad.embedding.ids();
  for (std::size_t k = 0; k < ids.size(); ++k)
    adam.apply(params.embedding.row(ids[k]), grad.embedding.row_at(k), emb_m_.row(ids[k]), emb_v_.row(ids[k]));

  std::vector<std::span<const double>> enc_grads;
  for_each_tensor(grad.encoder, [&](const std::string&, std::span<const double> g) { enc_grads.push_back(g); });
  std::size_t k = 0;
  for_each_tensor(params.encoder, [&](const std::string&, std::span<double> p) {
    adam.apply(p, enc_grads[k], enc_m_[k], enc_v_[k]);
    ++k;
  });
  adam.apply(params.head.weight.data, grad.head.weight.data, head_w_m_, head_w_v_);
  adam.apply(params.head.bias, grad.head.bias, head_b_m_, head_b_v_);
}

Trainer::Trainer(Classifier& classifier, const TrainConfig& config)
    : classifier_(&classifier), config_(config), optimizer_(classifier.params(), config), rng_(config.seed ^ 0x9e3779b97f4a7c15ULL) {
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
}

double Trainer::batch_gradient_serial(const Classifier& classifier, std::span<const EncodedExample> data,
                                      std::span<const std::size_t> batch, Gradient& out,
                                      std::span<const Vec> masks) {
  out.zero();
  Gradient scratch = Gradient::zeros_like(classifier.params());
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    scratch.zero();
    loss += classifier.loss_and_gradient(data[batch[k]].ids, data[batch[k]].label, scratch,
                                         masks.empty() ? std::span<const double>{} : std::span<const double>(masks[k]));
    out.add(scratch);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.scale(inv);
  return loss * inv;
}

double Trainer::batch_gradient(std::span<const EncodedExample> data, std::span<const std::size_t> batch, Gradient& out,
                               std::span<const Vec> masks) {
  while (scratch_.size() < batch.size()) scratch_.push_back(Gradient::zeros_like(classifier_->params()));
  losses_.assign(batch.size(), 0.0);
  const Classifier& clf = *classifier_;
  for_each_index(batch.size(), config_.workers, [&](std::size_t k) {
    scratch_[k].zero();
    losses_[k] = clf.loss_and_gradient(data[batch[k]].ids, data[batch[k]].label, scratch_[k],
                                       masks.empty() ? std::span<const double>{} : std::span<const double>(masks[k]));
  });
  out.zero();
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    out.add(scratch_[k]);
    loss += losses_[k];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.scale(inv);
  return loss * inv;
}

double Trainer::train_epoch(std::span<const EncodedExample> data) {
  if (data.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  Gradient grad = Gradient::zeros_like(classifier_->params());
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    const std::span<const std::size_t> batch(order.data() + start, end - start);
    // Masks are drawn serially so the result does not depend on the worker count.
    masks_.clear();
    if (config_.dropout > 0.0) {
      std::bernoulli_distribution keep(1.0 - config_.dropout);
      const double scale = 1.0 / (1.0 - config_.dropout);
      masks_.assign(batch.size(), Vec(output_dim(classifier_->params().encoder)));
      for (Vec& m : masks_)
        for (double& x : m) x = keep(rng_) ? scale : 0.0;
    }
    const double loss = batch_gradient(data, batch, grad, masks_);
    if (config_.freeze_embeddings) grad.embedding.clear();
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "training diverged: loss=" << loss << " at epoch " << epochs_done_ + 1 << ", batch " << batches
          << " (lr=" << config_.learning_rate << ")";
      throw TrainingDiverged(msg.str());
    }
    if (config_.grad_clip > 0.0) {
      const double norm = std::sqrt(grad.squared_norm());
      if (norm > config_.grad_clip) grad.scale(config_.grad_clip / norm);
    }
    optimizer_.step(classifier_->params(), grad);
    total += loss;
    ++batches;
  }
  ++epochs_done_;
  return total / static_cast<double>(batches);
}

std::vector<std::size_t> predict_all(const Classifier& classifier, std::span<const EncodedExample> data, int workers) {
  std::vector<std::size_t> out(data.size());
  for_each_index(data.size(), workers, [&](std::size_t i) { out[i] = classifier.predict(data[i].ids); });
  return out;
}

double accuracy(const Classifier& classifier, std::span<const EncodedExample> data, int workers) {
  if (data.empty()) return 0.0;
  const auto pred = predict_all(classifier, data, workers);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hits += pred[i] == data[i].label;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double accuracy_serial(const Classifier& classifier, std::span<const EncodedExample> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : data) hits += classifier.predict(ex.ids) == ex.label;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train(const Dataset& train_set, const Dataset* test_set, std::shared_ptr<const Vocabulary> vocab,
                  const EmbeddingTable* pretrained, const TrainConfig& config, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw DataError("cannot train on an empty dataset");
  if (config.epochs == 0) throw std::invalid_argument("epochs must be positive");
  TrainResult result{make_classifier(vocab, pretrained, train_set.label_names, config), {}};
  const auto train_data = encode_dataset(train_set, *vocab);
  std::vector<EncodedExample> test_data;
  if (test_set) test_data = encode_dataset(*test_set, *vocab);

  Trainer trainer(result.classifier, config);
  for (std::size_t e = 1; e <= config.epochs; ++e) {
    EpochMetrics m;
    m.epoch = e;
    m.loss = trainer.train_epoch(train_data);
    m.train_accuracy = accuracy(result.classifier, train_data, config.workers);
    if (test_set) m.test_accuracy = accuracy(result.classifier, test_data, config.workers);
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

}  // namespace geoattack
