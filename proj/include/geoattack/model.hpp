#pragma once

// Text classifiers: an encoder that maps a token sequence to a fixed-size
// text vector, followed by an affine head producing class logits.

#include <concepts>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <variant>
#include <vector>

#include "geoattack/corpus.hpp"
#include "geoattack/embedding.hpp"
#include "geoattack/tensor.hpp"

namespace geoattack {

enum class EncoderKind : std::uint32_t { Convolutional = 0, Recurrent = 1, Bag = 2 };

EncoderKind parse_encoder_kind(std::string_view name);  // "cnn" | "rnn" | "bag"
std::string_view encoder_kind_name(EncoderKind kind);

/// 1-d convolutions over the embedded sequence, ReLU, global max pool per
/// filter, concatenated over filter widths.
struct ConvEncoder {
  std::size_t input_dim = 0;
  std::vector<std::size_t> widths;
  std::vector<Matrix> kernels;  // [g]: filters x (widths[g] * input_dim)
  std::vector<Vec> biases;      // [g]: filters

  std::size_t output_dim() const;
  /// Number of conv positions for a sequence of length n (short sequences
  /// are zero-padded up to the filter width).
  static std::size_t positions(std::size_t n, std::size_t width) { return n >= width ? n - width + 1 : 1; }
};

/// Single-layer LSTM; the text vector is the final hidden state.
/// Gate layout in the stacked 4H rows: input, forget, cell, output.
struct RecurrentEncoder {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  Matrix w_input;   // 4H x D
  Matrix w_hidden;  // 4H x H
  Vec bias;         // 4H

  std::size_t output_dim() const { return hidden; }
};

/// Mean of the embeddings. Parameter-free; used for toy models and tests.
struct BagEncoder {
  std::size_t input_dim = 0;
  std::size_t output_dim() const { return input_dim; }
};

using Encoder = std::variant<ConvEncoder, RecurrentEncoder, BagEncoder>;

EncoderKind kind_of(const Encoder& encoder);
std::size_t output_dim(const Encoder& encoder);
std::size_t input_dim(const Encoder& encoder);

/// Filter widths {3,4,5} with `hidden` filters split as evenly as possible.
ConvEncoder make_conv_encoder(std::size_t input_dim, std::size_t hidden, std::mt19937_64& rng);
RecurrentEncoder make_recurrent_encoder(std::size_t input_dim, std::size_t hidden, std::mt19937_64& rng);
Encoder make_encoder(EncoderKind kind, std::size_t input_dim, std::size_t hidden, std::mt19937_64& rng);
Encoder zeros_like(const Encoder& encoder);

/// Visits every trainable tensor of the encoder in a fixed order.
template <class E, class F>
  requires std::same_as<std::remove_const_t<E>, Encoder>
void for_each_tensor(E& encoder, F&& f) {
  std::visit(
      [&](auto& enc) {
        using T = std::decay_t<decltype(enc)>;
        if constexpr (std::is_same_v<T, ConvEncoder>) {
          for (std::size_t g = 0; g < enc.widths.size(); ++g) {
            f("conv" + std::to_string(enc.widths[g]) + ".kernel", std::span(enc.kernels[g].data));
            f("conv" + std::to_string(enc.widths[g]) + ".bias", std::span(enc.biases[g]));
          }
        } else if constexpr (std::is_same_v<T, RecurrentEncoder>) {
          f(std::string("lstm.w_input"), std::span(enc.w_input.data));
          f(std::string("lstm.w_hidden"), std::span(enc.w_hidden.data));
          f(std::string("lstm.bias"), std::span(enc.bias));
        }
      },
      encoder);
}

/// Per-sequence activations kept for backprop.
struct EncoderCache {
  // conv: per group, argmax position and pooled pre-activation per filter
  std::vector<std::vector<std::size_t>> argmax;
  std::vector<Vec> pooled;
  // recurrent: per step, gate activations (4H) and cell/hidden states (H)
  std::vector<Vec> gates;
  std::vector<Vec> cells;
  std::vector<Vec> hiddens;
};

Vec encoder_forward(const Encoder& encoder, const Matrix& inputs, EncoderCache* cache = nullptr);

/// Accumulates parameter gradients into `grad` (same shape as `encoder`) and
/// input gradients into `dinputs` (N x D, accumulated).
void encoder_backward(const Encoder& encoder, const Matrix& inputs, const EncoderCache& cache,
                      std::span<const double> dv, Encoder& grad, Matrix& dinputs);

/// Fully connected layer W v + c.
struct AffineHead {
  Matrix weight;  // C x H
  Vec bias;       // C

  AffineHead() = default;
  AffineHead(Matrix w, Vec c);

  std::size_t num_classes() const { return weight.rows; }
  std::size_t input_dim() const { return weight.cols; }
  Vec logits(std::span<const double> v) const;
  /// d logits / d v, i.e. W.
  Matrix jacobian(std::span<const double> v) const;
};

AffineHead make_affine_head(std::size_t classes, std::size_t input_dim, std::mt19937_64& rng);

struct ModelParams {
  EmbeddingTable embedding;
  Encoder encoder;
  AffineHead head;
};

/// Embedding gradient restricted to the rows that were touched.
class SparseRows {
 public:
  explicit SparseRows(std::size_t dim = 0) : dim_(dim) {}
  std::span<double> row(TokenId id);  // inserts a zero row on first use
  void clear();
  void add(const SparseRows& other, double scale = 1.0);
  void scale(double s);
  std::size_t dim() const { return dim_; }
  const std::vector<TokenId>& ids() const { return ids_; }
  std::span<const double> row_at(std::size_t k) const { return {values_.data() + k * dim_, dim_}; }
  std::span<double> row_at(std::size_t k) { return {values_.data() + k * dim_, dim_}; }

 private:
  std::size_t dim_;
  std::vector<TokenId> ids_;
  std::vector<double> values_;
  std::unordered_map<TokenId, std::size_t> index_;
};

struct Gradient {
  SparseRows embedding;
  Encoder encoder;
  AffineHead head;

  static Gradient zeros_like(const ModelParams& params);
  void zero();
  void add(const Gradient& other);
  void scale(double s);
  double squared_norm() const;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Classifier {
 public:
  Classifier(ModelParams params, std::shared_ptr<const Vocabulary> vocab, std::vector<std::string> label_names);

  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const Vocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }
  const std::vector<std::string>& label_names() const { return label_names_; }

  EncoderKind kind() const { return kind_of(params_.encoder); }
  std::size_t num_classes() const { return params_.head.num_classes(); }
  std::size_t hidden_dim() const { return params_.head.input_dim(); }
  std::size_t embedding_dim() const { return params_.embedding.dim(); }
  const AffineHead& head() const { return params_.head; }

  /// Text vector. Throws ModelError on an empty sequence.
  Vec encode(std::span<const TokenId> ids) const;
  Vec logits(std::span<const TokenId> ids) const;
  Vec probabilities(std::span<const TokenId> ids) const;
  std::size_t predict(std::span<const TokenId> ids) const;

  Vec probabilities(const Example& example) const;
  std::size_t predict(const Example& example) const;

  /// Softmax cross-entropy loss; accumulates its gradient into `grad`.
  /// `keep_scale`, when non-empty, multiplies the encoder output elementwise
  /// (inverted dropout mask) before the head.
  double loss_and_gradient(std::span<const TokenId> ids, std::size_t label, Gradient& grad,
                           std::span<const double> keep_scale = {}) const;

 private:
  void check_shapes() const;

  ModelParams params_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<std::string> label_names_;
};

/// Text vectors of single-position substitutions of a fixed sequence,
/// computed incrementally from cached activations. Results equal
/// re-encoding the substituted sequence up to floating-point rounding.
class SubstitutionEncoder {
 public:
  SubstitutionEncoder(const Classifier& classifier, std::span<const TokenId> ids);

  const Vec& base() const { return base_; }
  std::size_t length() const { return ids_.size(); }
  Vec substitute(std::size_t position, TokenId replacement) const;

 private:
  const Classifier* classifier_;
  std::vector<TokenId> ids_;
  Matrix inputs_;
  Vec base_;
  // conv: per group pre-activations (T x F) with prefix/suffix maxima
  std::vector<Matrix> pre_;
  std::vector<Matrix> prefix_max_;
  std::vector<Matrix> suffix_max_;
  // recurrent: per step input projections and states
  std::vector<Vec> projected_;
  std::vector<Vec> hiddens_;
  std::vector<Vec> cells_;
};

/// Reference path: copy, substitute, re-encode.
Vec encode_with_substitution(const Classifier& classifier, std::span<const TokenId> ids, std::size_t position,
                             TokenId replacement);

}  // namespace geoattack
