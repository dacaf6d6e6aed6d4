#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "geoattack/kernels.hpp"
#include "encoder_internal.hpp"

namespace geoattack {
namespace {

void glorot_fill(std::span<double> values, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& x : values) x = dist(rng);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Zero-padded copy so every conv group has at least one full window.
Matrix pad_rows(const Matrix& inputs, std::size_t min_rows) {
  if (inputs.rows >= min_rows) return inputs;
  Matrix out(min_rows, inputs.cols);
  std::copy(inputs.data.begin(), inputs.data.end(), out.data.begin());
  return out;
}

std::size_t max_width(const ConvEncoder& enc) { return *std::max_element(enc.widths.begin(), enc.widths.end()); }

Vec conv_forward(const ConvEncoder& enc, const Matrix& inputs, EncoderCache* cache) {
  const std::size_t n = inputs.rows;
  const std::size_t d = enc.input_dim;
  const Matrix padded = pad_rows(inputs, max_width(enc));
  Vec out;
  out.reserve(enc.output_dim());
  if (cache) {
    cache->argmax.assign(enc.widths.size(), {});
    cache->pooled.assign(enc.widths.size(), {});
  }
  Vec pre;
  for (std::size_t g = 0; g < enc.widths.size(); ++g) {
    const std::size_t w = enc.widths[g];
    const Matrix& k = enc.kernels[g];
    const std::size_t filters = k.rows;
    const std::size_t positions = ConvEncoder::positions(n, w);
    Vec best(filters, -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> where(filters, 0);
    pre.assign(filters, 0.0);
    for (std::size_t t = 0; t < positions; ++t) {
      const std::span<const double> window(padded.data.data() + t * d, w * d);
      kernels::gemv(k, window, pre);
      for (std::size_t f = 0; f < filters; ++f) {
        const double a = pre[f] + enc.biases[g][f];
        if (a > best[f]) {
          best[f] = a;
          where[f] = t;
        }
      }
    }
    for (std::size_t f = 0; f < filters; ++f) out.push_back(std::max(best[f], 0.0));
    if (cache) {
      cache->argmax[g] = std::move(where);
      cache->pooled[g] = std::move(best);
    }
  }
  return out;
}

void conv_backward(const ConvEncoder& enc, const Matrix& inputs, const EncoderCache& cache, std::span<const double> dv,
                   ConvEncoder& grad, Matrix& dinputs) {
  const std::size_t n = inputs.rows;
  const std::size_t d = enc.input_dim;
  const Matrix padded = pad_rows(inputs, max_width(enc));
  std::size_t offset = 0;
  for (std::size_t g = 0; g < enc.widths.size(); ++g) {
    const std::size_t w = enc.widths[g];
    const Matrix& k = enc.kernels[g];
    for (std::size_t f = 0; f < k.rows; ++f) {
      const double upstream = dv[offset + f];
      if (upstream == 0.0 || cache.pooled[g][f] <= 0.0) continue;
      const std::size_t t = cache.argmax[g][f];
      const std::span<const double> window(padded.data.data() + t * d, w * d);
      kernels::axpy(upstream, window, grad.kernels[g].row(f));
      grad.biases[g][f] += upstream;
      const auto kr = k.row(f);
      for (std::size_t j = 0; j < w; ++j) {
        if (t + j >= n) break;  // padding rows carry no gradient
        kernels::axpy(upstream, kr.subspan(j * d, d), dinputs.row(t + j));
      }
    }
    offset += k.rows;
  }
}

}  // namespace

// Shared by the full forward pass and SubstitutionEncoder so both produce
// identical states from identical inputs.
void lstm_project(const RecurrentEncoder& enc, std::span<const double> x, Vec& projected) {
  projected.assign(4 * enc.hidden, 0.0);
  kernels::gemv(enc.w_input, x, projected);
  for (std::size_t r = 0; r < projected.size(); ++r) projected[r] += enc.bias[r];
}

void lstm_cell(const RecurrentEncoder& enc, std::span<const double> projected, std::span<const double> h_prev,
               std::span<const double> c_prev, Vec& gates, Vec& c, Vec& h) {
  const std::size_t hd = enc.hidden;
  gates.assign(projected.begin(), projected.end());
  kernels::gemv_add(enc.w_hidden, h_prev, gates);
  c.resize(hd);
  h.resize(hd);
  for (std::size_t j = 0; j < hd; ++j) {
    const double i = sigmoid(gates[j]);
    const double f = sigmoid(gates[hd + j]);
    const double gg = std::tanh(gates[2 * hd + j]);
    const double o = sigmoid(gates[3 * hd + j]);
    gates[j] = i;
    gates[hd + j] = f;
    gates[2 * hd + j] = gg;
    gates[3 * hd + j] = o;
    c[j] = f * c_prev[j] + i * gg;
    h[j] = o * std::tanh(c[j]);
  }
}

namespace {

Vec lstm_forward(const RecurrentEncoder& enc, const Matrix& inputs, EncoderCache* cache) {
  const std::size_t hd = enc.hidden;
  Vec h(hd, 0.0), c(hd, 0.0), projected, gates, c_next, h_next;
  if (cache) {
    cache->gates.assign(inputs.rows, {});
    cache->cells.assign(inputs.rows, {});
    cache->hiddens.assign(inputs.rows, {});
  }
  for (std::size_t t = 0; t < inputs.rows; ++t) {
    lstm_project(enc, inputs.row(t), projected);
    lstm_cell(enc, projected, h, c, gates, c_next, h_next);
    std::swap(h, h_next);
    std::swap(c, c_next);
    if (cache) {
      cache->gates[t] = gates;
      cache->cells[t] = c;
      cache->hiddens[t] = h;
    }
  }
  return h;
}

void lstm_backward(const RecurrentEncoder& enc, const Matrix& inputs, const EncoderCache& cache, std::span<const double> dv,
                   RecurrentEncoder& grad, Matrix& dinputs) {
  const std::size_t hd = enc.hidden;
  const std::size_t n = inputs.rows;
  Vec dh(dv.begin(), dv.end()), dc(hd, 0.0), da(4 * hd), dh_prev(hd);
  const Vec zeros(hd, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    const Vec& gates = cache.gates[t];
    const Vec& c = cache.cells[t];
    const Vec& c_prev = t > 0 ? cache.cells[t - 1] : zeros;
    const Vec& h_prev = t > 0 ? cache.hiddens[t - 1] : zeros;
    for (std::size_t j = 0; j < hd; ++j) {
      const double i = gates[j], f = gates[hd + j], g = gates[2 * hd + j], o = gates[3 * hd + j];
      const double tc = std::tanh(c[j]);
      const double dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
      da[j] = dct * g * i * (1.0 - i);
      da[hd + j] = dct * c_prev[j] * f * (1.0 - f);
      da[2 * hd + j] = dct * i * (1.0 - g * g);
      da[3 * hd + j] = dh[j] * tc * o * (1.0 - o);
      dc[j] = dct * f;
    }
    kernels::outer_add(grad.w_input, da, inputs.row(t));
    kernels::outer_add(grad.w_hidden, da, h_prev);
    kernels::axpy(1.0, da, grad.bias);
    kernels::gemv_t_add(enc.w_input, da, dinputs.row(t));
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    kernels::gemv_t_add(enc.w_hidden, da, dh_prev);
    std::swap(dh, dh_prev);
  }
}

}  // namespace

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "cnn" || name == "conv") return EncoderKind::Convolutional;
  if (name == "rnn" || name == "lstm") return EncoderKind::Recurrent;
  if (name == "bag") return EncoderKind::Bag;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "' (cnn|rnn|bag)");
}

std::string_view encoder_kind_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::Convolutional: return "cnn";
    case EncoderKind::Recurrent: return "rnn";
    case EncoderKind::Bag: return "bag";
  }
  return "?";
}

std::size_t ConvEncoder::output_dim() const {
  std::size_t total = 0;
  for (const auto& k : kernels) total += k.rows;
  return total;
}

EncoderKind kind_of(const Encoder& encoder) { return static_cast<EncoderKind>(encoder.index()); }

std::size_t output_dim(const Encoder& encoder) {
  return std::visit([](const auto& e) { return e.output_dim(); }, encoder);
}

std::size_t input_dim(const Encoder& encoder) {
  return std::visit([](const auto& e) { return e.input_dim; }, encoder);
}

ConvEncoder make_conv_encoder(std::size_t input_dim, std::size_t hidden, std::mt19937_64& rng) {
  ConvEncoder enc;
  enc.input_dim = input_dim;
  enc.widths = {3, 4, 5};
  if (hidden < enc.widths.size()) throw std::invalid_argument("conv encoder needs hidden >= 3");
  for (std::size_t g = 0; g < enc.widths.size(); ++g) {
    const std::size_t filters = hidden / 3 + (g < hidden % 3 ? 1 : 0);
    Matrix k(filters, enc.widths[g] * input_dim);
    glorot_fill(k.data, enc.widths[g] * input_dim, filters, rng);
    enc.kernels.push_back(std::move(k));
    enc.biases.emplace_back(filters, 0.0);
  }
  return enc;
}

RecurrentEncoder make_recurrent_encoder(std::size_t input_dim, std::size_t hidden, std::mt19937_64& rng) {
  RecurrentEncoder enc;
  enc.input_dim = input_dim;
  enc.hidden = hidden;
  enc.w_input = Matrix(4 * hidden, input_dim);
  enc.w_hidden = Matrix(4 * hidden, hidden);
  enc.bias.assign(4 * hidden, 0.0);
  const double a = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& x : enc.w_input.data) x = dist(rng);
  for (double& x : enc.w_hidden.data) x = dist(rng);
  for (std::size_t j = 0; j < hidden; ++j) enc.bias[hidden + j] = 1.0;  // forget gate
  return enc;
}

Encoder make_encoder(EncoderKind kind, std::size_t input_dim, std::size_t hidden, std::mt19937_64& rng) {
  switch (kind) {
    case EncoderKind::Convolutional: return make_conv_encoder(input_dim, hidden, rng);
    case EncoderKind::Recurrent: return make_recurrent_encoder(input_dim, hidden, rng);
    case EncoderKind::Bag: return BagEncoder{input_dim};
  }
  throw std::invalid_argument("bad encoder kind");
}

Encoder zeros_like(const Encoder& encoder) {
  Encoder out = encoder;
  for_each_tensor(out, [](const std::string&, std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
  return out;
}

Vec encoder_forward(const Encoder& encoder, const Matrix& inputs, EncoderCache* cache) {
  if (inputs.rows == 0) throw ModelError("cannot encode an empty sequence");
  return std::visit(
      [&](const auto& enc) -> Vec {
        using T = std::decay_t<decltype(enc)>;
        if (inputs.cols != enc.input_dim) throw ModelError("input width does not match encoder");
        if constexpr (std::is_same_v<T, ConvEncoder>) {
          return conv_forward(enc, inputs, cache);
        } else if constexpr (std::is_same_v<T, RecurrentEncoder>) {
          return lstm_forward(enc, inputs, cache);
        } else {
          Vec v(enc.input_dim, 0.0);
          for (std::size_t t = 0; t < inputs.rows; ++t) kernels::axpy(1.0, inputs.row(t), v);
          for (double& x : v) x /= static_cast<double>(inputs.rows);
          return v;
        }
      },
      encoder);
}

void encoder_backward(const Encoder& encoder, const Matrix& inputs, const EncoderCache& cache,
                      std::span<const double> dv, Encoder& grad, Matrix& dinputs) {
  std::visit(
      [&](const auto& enc) {
        using T = std::decay_t<decltype(enc)>;
        auto& g = std::get<T>(grad);
        if constexpr (std::is_same_v<T, ConvEncoder>) {
          conv_backward(enc, inputs, cache, dv, g, dinputs);
        } else if constexpr (std::is_same_v<T, RecurrentEncoder>) {
          lstm_backward(enc, inputs, cache, dv, g, dinputs);
        } else {
          const double s = 1.0 / static_cast<double>(inputs.rows);
          for (std::size_t t = 0; t < inputs.rows; ++t) kernels::axpy(s, dv, dinputs.row(t));
        }
      },
      encoder);
}

}  // namespace geoattack
