#pragma once

// Dense linear-algebra kernels used by the encoders, the head and the
// geometry code. All kernels are serial; parallelism lives one level up
// (over examples) in parallel.hpp.

#include <span>

#include "geoattack/tensor.hpp"

namespace geoattack::kernels {

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// y = A x
void gemv(const Matrix& a, std::span<const double> x, std::span<double> y);
// y += A x
void gemv_add(const Matrix& a, std::span<const double> x, std::span<double> y);
// y += A[:, col0 : col0 + x.size()] x
void gemv_cols_add(const Matrix& a, std::size_t col0, std::span<const double> x, std::span<double> y);
// y += A^T x
void gemv_t_add(const Matrix& a, std::span<const double> x, std::span<double> y);
// A += scale * x y^T
void outer_add(Matrix& a, std::span<const double> x, std::span<const double> y, double scale = 1.0);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// Numerically stable softmax (max subtraction).
Vec softmax(std::span<const double> logits);

/// Index of the largest entry; the lowest index wins ties.
std::size_t argmax(std::span<const double> values);

}  // namespace geoattack::kernels
