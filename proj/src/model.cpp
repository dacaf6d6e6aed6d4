#include <algorithm>
#include <cmath>
#include <limits>

#include "encoder_internal.hpp"
#include "geoattack/kernels.hpp"
#include "geoattack/model.hpp"

namespace geoattack {

AffineHead::AffineHead(Matrix w, Vec c) : weight(std::move(w)), bias(std::move(c)) {
  if (weight.rows != bias.size()) throw ModelError("head bias length must equal the number of classes");
}

Vec AffineHead::logits(std::span<const double> v) const {
  if (v.size() != weight.cols)
    throw ModelError("head expects a " + std::to_string(weight.cols) + "-vector, got " + std::to_string(v.size()));
  Vec out(bias);
  kernels::gemv_add(weight, v, out);
  return out;
}

Matrix AffineHead::jacobian(std::span<const double>) const { return weight; }

AffineHead make_affine_head(std::size_t classes, std::size_t input_dim, std::mt19937_64& rng) {
  Matrix w(classes, input_dim);
  const double a = std::sqrt(6.0 / static_cast<double>(classes + input_dim));
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& x : w.data) x = dist(rng);
  return AffineHead(std::move(w), Vec(classes, 0.0));
}

std::span<double> SparseRows::row(TokenId id) {
  auto [it, inserted] = index_.emplace(id, ids_.size());
  if (inserted) {
    ids_.push_back(id);
    values_.resize(values_.size() + dim_, 0.0);
  }
  return row_at(it->second);
}

void SparseRows::clear() {
  ids_.clear();
  values_.clear();
  index_.clear();
}

void SparseRows::add(const SparseRows& other, double scale) {
  for (std::size_t k = 0; k < other.ids_.size(); ++k) kernels::axpy(scale, other.row_at(k), row(other.ids_[k]));
}

void SparseRows::scale(double s) {
  for (double& x : values_) x *= s;
}

Gradient Gradient::zeros_like(const ModelParams& params) {
  Gradient g;
  g.embedding = SparseRows(params.embedding.dim());
  g.encoder = geoattack::zeros_like(params.encoder);
  g.head = AffineHead(Matrix(params.head.weight.rows, params.head.weight.cols), Vec(params.head.bias.size(), 0.0));
  return g;
}

void Gradient::zero() {
  embedding.clear();
  for_each_tensor(encoder, [](const std::string&, std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
  std::fill(head.weight.data.begin(), head.weight.data.end(), 0.0);
  std::fill(head.bias.begin(), head.bias.end(), 0.0);
}

void Gradient::add(const Gradient& other) {
  embedding.add(other.embedding);
  std::vector<std::span<const double>> src;
  for_each_tensor(other.encoder, [&](const std::string&, std::span<const double> t) { src.push_back(t); });
  std::size_t k = 0;
  for_each_tensor(encoder, [&](const std::string&, std::span<double> t) { kernels::axpy(1.0, src[k++], t); });
  kernels::axpy(1.0, other.head.weight.data, head.weight.data);
  kernels::axpy(1.0, other.head.bias, head.bias);
}

void Gradient::scale(double s) {
  embedding.scale(s);
  for_each_tensor(encoder, [&](const std::string&, std::span<double> t) {
    for (double& x : t) x *= s;
  });
  for (double& x : head.weight.data) x *= s;
  for (double& x : head.bias) x *= s;
}

double Gradient::squared_norm() const {
  double s = 0.0;
  for (std::size_t k = 0; k < embedding.ids().size(); ++k) s += kernels::dot(embedding.row_at(k), embedding.row_at(k));
  for_each_tensor(encoder, [&](const std::string&, std::span<const double> t) { s += kernels::dot(t, t); });
  s += kernels::dot(head.weight.data, head.weight.data);
  s += kernels::dot(head.bias, head.bias);
  return s;
}

Classifier::Classifier(ModelParams params, std::shared_ptr<const Vocabulary> vocab, std::vector<std::string> label_names)
    : params_(std::move(params)), vocab_(std::move(vocab)), label_names_(std::move(label_names)) {
  check_shapes();
}

void Classifier::check_shapes() const {
  if (!vocab_) throw ModelError("classifier needs a vocabulary");
  if (params_.embedding.vocab_size() != vocab_->size())
    throw ModelError("embedding rows (" + std::to_string(params_.embedding.vocab_size()) + ") != vocabulary size (" +
                     std::to_string(vocab_->size()) + ")");
  if (params_.embedding.dim() == 0) throw ModelError("embedding dim must be positive");
  if (input_dim(params_.encoder) != params_.embedding.dim()) throw ModelError("encoder input width != embedding dim");
  if (output_dim(params_.encoder) != params_.head.input_dim())
    throw ModelError("encoder output width (" + std::to_string(output_dim(params_.encoder)) +
                     ") != head input width (" + std::to_string(params_.head.input_dim()) + ")");
  if (params_.head.num_classes() < 2) throw ModelError("classifier needs at least 2 classes");
  if (!label_names_.empty() && label_names_.size() != params_.head.num_classes())
    throw ModelError("label names do not match the number of classes");
}

Vec Classifier::encode(std::span<const TokenId> ids) const {
  if (ids.empty()) throw ModelError("cannot encode an empty sequence");
  return encoder_forward(params_.encoder, lookup(params_.embedding, ids));
}

Vec Classifier::logits(std::span<const TokenId> ids) const { return params_.head.logits(encode(ids)); }

Vec Classifier::probabilities(std::span<const TokenId> ids) const { return kernels::softmax(logits(ids)); }

std::size_t Classifier::predict(std::span<const TokenId> ids) const { return kernels::argmax(logits(ids)); }

Vec Classifier::probabilities(const Example& example) const { return probabilities(geoattack::encode(example, *vocab_)); }

std::size_t Classifier::predict(const Example& example) const { return predict(geoattack::encode(example, *vocab_)); }

double Classifier::loss_and_gradient(std::span<const TokenId> ids, std::size_t label, Gradient& grad,
                                     std::span<const double> keep_scale) const {
  if (ids.empty()) throw ModelError("cannot encode an empty sequence");
  if (label >= num_classes()) throw ModelError("label out of range");
  const Matrix inputs = lookup(params_.embedding, ids);
  EncoderCache cache;
  Vec v = encoder_forward(params_.encoder, inputs, &cache);
  if (!keep_scale.empty()) {
    if (keep_scale.size() != v.size()) throw ModelError("dropout mask has the wrong size");
    for (std::size_t k = 0; k < v.size(); ++k) v[k] *= keep_scale[k];
  }
  const Vec z = params_.head.logits(v);
  Vec p = kernels::softmax(z);
  const double loss = -std::log(std::max(p[label], std::numeric_limits<double>::min()));

  Vec& dz = p;
  dz[label] -= 1.0;
  kernels::outer_add(grad.head.weight, dz, v);
  kernels::axpy(1.0, dz, grad.head.bias);
  Vec dv(v.size(), 0.0);
  kernels::gemv_t_add(params_.head.weight, dz, dv);
  if (!keep_scale.empty())
    for (std::size_t k = 0; k < dv.size(); ++k) dv[k] *= keep_scale[k];

  Matrix dinputs(inputs.rows, inputs.cols);
  encoder_backward(params_.encoder, inputs, cache, dv, grad.encoder, dinputs);
  for (std::size_t t = 0; t < ids.size(); ++t) kernels::axpy(1.0, dinputs.row(t), grad.embedding.row(ids[t]));
  return loss;
}

SubstitutionEncoder::SubstitutionEncoder(const Classifier& classifier, std::span<const TokenId> ids)
    : classifier_(&classifier), ids_(ids.begin(), ids.end()) {
  if (ids_.empty()) throw ModelError("cannot encode an empty sequence");
  inputs_ = lookup(classifier.params().embedding, ids_);
  const Encoder& encoder = classifier.params().encoder;
  if (const auto* conv = std::get_if<ConvEncoder>(&encoder)) {
    const std::size_t n = ids_.size();
    const std::size_t d = conv->input_dim;
    const std::size_t pad = *std::max_element(conv->widths.begin(), conv->widths.end());
    Matrix padded(std::max(n, pad), d);
    std::copy(inputs_.data.begin(), inputs_.data.end(), padded.data.begin());
    Vec pre;
    for (std::size_t g = 0; g < conv->widths.size(); ++g) {
      const std::size_t w = conv->widths[g];
      const Matrix& k = conv->kernels[g];
      const std::size_t positions = ConvEncoder::positions(n, w);
      Matrix a(positions, k.rows);
      for (std::size_t t = 0; t < positions; ++t) {
        pre.assign(k.rows, 0.0);
        kernels::gemv(k, std::span<const double>(padded.data.data() + t * d, w * d), pre);
        for (std::size_t f = 0; f < k.rows; ++f) a(t, f) = pre[f] + conv->biases[g][f];
      }
      Matrix pmax = a, smax = a;
      for (std::size_t t = 1; t < positions; ++t)
        for (std::size_t f = 0; f < k.rows; ++f) pmax(t, f) = std::max(pmax(t - 1, f), a(t, f));
      for (std::size_t t = positions - 1; t-- > 0;)
        for (std::size_t f = 0; f < k.rows; ++f) smax(t, f) = std::max(smax(t + 1, f), a(t, f));
      for (std::size_t f = 0; f < k.rows; ++f) base_.push_back(std::max(pmax(positions - 1, f), 0.0));
      pre_.push_back(std::move(a));
      prefix_max_.push_back(std::move(pmax));
      suffix_max_.push_back(std::move(smax));
    }
  } else if (const auto* rnn = std::get_if<RecurrentEncoder>(&encoder)) {
    const std::size_t hd = rnn->hidden;
    Vec h(hd, 0.0), c(hd, 0.0), gates, c_next, h_next;
    projected_.resize(ids_.size());
    for (std::size_t t = 0; t < ids_.size(); ++t) {
      lstm_project(*rnn, inputs_.row(t), projected_[t]);
      lstm_cell(*rnn, projected_[t], h, c, gates, c_next, h_next);
      std::swap(h, h_next);
      std::swap(c, c_next);
      hiddens_.push_back(h);
      cells_.push_back(c);
    }
    base_ = h;
  } else {
    base_ = encoder_forward(encoder, inputs_);
  }
}

Vec SubstitutionEncoder::substitute(std::size_t position, TokenId replacement) const {
  if (position >= ids_.size()) throw std::out_of_range("substitution position out of range");
  const auto& embedding = classifier_->params().embedding;
  if (replacement >= embedding.vocab_size()) throw std::out_of_range("replacement id out of range");
  const auto new_row = embedding.row(replacement);
  const Encoder& encoder = classifier_->params().encoder;

  if (const auto* conv = std::get_if<ConvEncoder>(&encoder)) {
    const std::size_t d = conv->input_dim;
    Vec delta(d);
    const auto old_row = inputs_.row(position);
    for (std::size_t k = 0; k < d; ++k) delta[k] = new_row[k] - old_row[k];
    Vec out;
    out.reserve(base_.size());
    Vec best, pre;
    for (std::size_t g = 0; g < conv->widths.size(); ++g) {
      const std::size_t w = conv->widths[g];
      const Matrix& k = conv->kernels[g];
      const Matrix& a = pre_[g];
      const std::size_t positions = a.rows;
      // Windows t with t <= position < t + w see the substituted row.
      const std::size_t lo = position + 1 >= w ? position + 1 - w : 0;
      const std::size_t hi = std::min(position, positions - 1);
      best.assign(k.rows, -std::numeric_limits<double>::infinity());
      if (lo > 0)
        for (std::size_t f = 0; f < k.rows; ++f) best[f] = prefix_max_[g](lo - 1, f);
      if (hi + 1 < positions)
        for (std::size_t f = 0; f < k.rows; ++f) best[f] = std::max(best[f], suffix_max_[g](hi + 1, f));
      for (std::size_t t = lo; t <= hi && lo <= hi; ++t) {
        pre.assign(a.row(t).begin(), a.row(t).end());
        kernels::gemv_cols_add(k, (position - t) * d, delta, pre);
        for (std::size_t f = 0; f < k.rows; ++f) best[f] = std::max(best[f], pre[f]);
      }
      for (std::size_t f = 0; f < k.rows; ++f) out.push_back(std::max(best[f], 0.0));
    }
    return out;
  }

  if (const auto* rnn = std::get_if<RecurrentEncoder>(&encoder)) {
    const std::size_t hd = rnn->hidden;
    Vec h = position > 0 ? hiddens_[position - 1] : Vec(hd, 0.0);
    Vec c = position > 0 ? cells_[position - 1] : Vec(hd, 0.0);
    Vec projected, gates, c_next, h_next;
    lstm_project(*rnn, new_row, projected);
    for (std::size_t t = position; t < ids_.size(); ++t) {
      lstm_cell(*rnn, t == position ? projected : projected_[t], h, c, gates, c_next, h_next);
      std::swap(h, h_next);
      std::swap(c, c_next);
    }
    return h;
  }

  // Bag of embeddings: shift the mean.
  Vec out = base_;
  const auto old_row = inputs_.row(position);
  const double inv_n = 1.0 / static_cast<double>(ids_.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += (new_row[k] - old_row[k]) * inv_n;
  return out;
}

Vec encode_with_substitution(const Classifier& classifier, std::span<const TokenId> ids, std::size_t position,
                             TokenId replacement) {
  if (position >= ids.size()) throw std::out_of_range("substitution position out of range");
  std::vector<TokenId> copy(ids.begin(), ids.end());
  copy[position] = replacement;
  return classifier.encode(copy);
}

}  // namespace geoattack
