#include "geoattack/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geoattack::kernels {

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void gemv(const Matrix& a, std::span<const double> x, std::span<double> y) {
  std::fill(y.begin(), y.end(), 0.0);
  gemv_add(a, x, y);
}

void gemv_add(const Matrix& a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == a.cols && y.size() == a.rows);
  const double* p = a.data.data();
  for (std::size_t r = 0; r < a.rows; ++r, p += a.cols) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols; ++c) s += p[c] * x[c];
    y[r] += s;
  }
}

void gemv_cols_add(const Matrix& a, std::size_t col0, std::span<const double> x, std::span<double> y) {
  assert(col0 + x.size() <= a.cols && y.size() == a.rows);
  const std::size_t n = x.size();
  const double* p = a.data.data() + col0;
  for (std::size_t r = 0; r < a.rows; ++r, p += a.cols) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += p[c] * x[c];
    y[r] += s;
  }
}

void gemv_t_add(const Matrix& a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == a.rows && y.size() == a.cols);
  const double* p = a.data.data();
  for (std::size_t r = 0; r < a.rows; ++r, p += a.cols) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < a.cols; ++c) y[c] += p[c] * xr;
  }
}

void outer_add(Matrix& a, std::span<const double> x, std::span<const double> y, double scale) {
  assert(x.size() == a.rows && y.size() == a.cols);
  double* p = a.data.data();
  for (std::size_t r = 0; r < a.rows; ++r, p += a.cols) {
    const double xr = scale * x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < a.cols; ++c) p[c] += xr * y[c];
  }
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vec softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& p : out) p /= z;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace geoattack::kernels
