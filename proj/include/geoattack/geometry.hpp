#pragma once

// Decision-boundary geometry on the classification head: nearest boundary
// point (DeepFool), projections onto the boundary direction, and signed
// distances. Everything operates on logits; softmax is monotone so the
// boundary is the same.

#include <concepts>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>

#include "geoattack/kernels.hpp"
#include "geoattack/model.hpp"
#include "geoattack/tensor.hpp"

namespace geoattack {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when every competing class has the same weight row as the winner.
class NoBoundary : public GeometryError {
 public:
  NoBoundary() : GeometryError("no boundary: head is degenerate") {}
};

class BoundaryNotFound : public GeometryError {
 public:
  BoundaryNotFound() : GeometryError("boundary not found within max_iter") {}
};

/// Result of one boundary search from text vector v.
struct BoundaryStep {
  Vec boundary;         // b
  Vec direction;        // r = b - v
  Vec unit;             // r / |r|; all zeros when distance == 0
  double distance = 0;  // |r|
  std::size_t predicted_class = 0;
  std::size_t target_class = 0;  // competing class that defines the boundary
  std::size_t iterations = 1;

  bool at_boundary() const { return distance == 0.0; }
};

struct ProjectionResult {
  Vec projection;  // p, parallel to r
  double length;   // z = p . u, signed
};

/// Closed-form nearest boundary for an affine head: for each competing class
/// l the pairwise hyperplane logit_l = logit_top is at distance
/// |f_l - f_top| / |w_l - w_top|; the nearest one wins (lowest index on ties).
BoundaryStep deepfool_affine(const AffineHead& head, std::span<const double> v);

/// Brute-force distance to the nearest pairwise hyperplane, used as an
/// independent check of deepfool_affine.
double pairwise_hyperplane_distance(const AffineHead& head, std::span<const double> v);

template <class H>
concept DifferentiableHead = requires(const H& h, std::span<const double> v) {
  { h.logits(v) } -> std::convertible_to<Vec>;
  { h.jacobian(v) } -> std::convertible_to<Matrix>;  // C x H
  { h.num_classes() } -> std::convertible_to<std::size_t>;
};

/// Two-layer head: logits = W2 tanh(W1 v + b1) + b2.
struct MlpHead {
  Matrix w1;
  Vec b1;
  Matrix w2;
  Vec b2;

  std::size_t num_classes() const { return w2.rows; }
  std::size_t input_dim() const { return w1.cols; }
  Vec logits(std::span<const double> v) const;
  Matrix jacobian(std::span<const double> v) const;

  static MlpHead random(std::size_t input_dim, std::size_t hidden, std::size_t classes, std::mt19937_64& rng,
                        double scale = 1.0);
};

struct DeepFoolOptions {
  double overshoot = 0.02;  // step scale is 1 + overshoot
  std::size_t max_iter = 50;
};

/// Iterative DeepFool: repeated local linearization until the predicted class
/// changes, then a line search back to the first crossing along the
/// accumulated step. The overshoot is not part of the reported direction.
/// Throws BoundaryNotFound when max_iter is reached.
template <DifferentiableHead Head>
BoundaryStep deepfool_iterative(const Head& head, std::span<const double> v, const DeepFoolOptions& options = {}) {
  const std::size_t classes = head.num_classes();
  const std::size_t dim = v.size();
  const Vec start_logits = head.logits(v);
  const std::size_t original = kernels::argmax(start_logits);

  BoundaryStep step;
  step.predicted_class = original;
  step.target_class = original;
  Vec total(dim, 0.0);
  Vec x(v.begin(), v.end());
  Vec w_diff(dim);
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    const Vec z = it == 0 ? start_logits : head.logits(x);
    if (it > 0 && kernels::argmax(z) != original) {
      step.iterations = it;
      break;
    }
    const Matrix jac = head.jacobian(x);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_l = original;
    double best_f = 0.0, best_norm2 = 0.0;
    Vec best_w;
    for (std::size_t l = 0; l < classes; ++l) {
      if (l == original) continue;
      for (std::size_t k = 0; k < dim; ++k) w_diff[k] = jac(l, k) - jac(original, k);
      const double n2 = kernels::dot(w_diff, w_diff);
      if (n2 == 0.0) continue;
      const double f = z[l] - z[original];
      const double d = std::abs(f) / std::sqrt(n2);
      if (d < best) {
        best = d;
        best_l = l;
        best_f = f;
        best_norm2 = n2;
        best_w = w_diff;
      }
    }
    if (best_l == original) throw NoBoundary();
    if (it == 0) step.target_class = best_l;
    if (best_f == 0.0) {
      // Tied with a competitor: already on the boundary.
      step.iterations = it + 1;
      break;
    }
    kernels::axpy(std::abs(best_f) / best_norm2, best_w, total);
    for (std::size_t k = 0; k < dim; ++k) x[k] = v[k] + (1.0 + options.overshoot) * total[k];
    if (it + 1 == options.max_iter) {
      if (kernels::argmax(head.logits(x)) == original) throw BoundaryNotFound();
      step.iterations = it + 1;
    }
  }
  // Linearized steps overshoot on curved heads; pull back to the first crossing along the final direction.
  if (kernels::norm(total) > 0.0) {
    auto flipped = [&](double t) {
      for (std::size_t k = 0; k < dim; ++k) x[k] = v[k] + t * total[k];
      return kernels::argmax(head.logits(x)) != original;
    };
    const double reach = 1.0 + options.overshoot;
    constexpr int kScan = 256;
    double lo = 0.0, hi = reach;
    for (int i = 1; i <= kScan; ++i) {
      const double t = reach * i / kScan;
      if (flipped(t)) {
        hi = t;
        break;
      }
      lo = t;
    }
    if (lo < hi && flipped(hi)) {
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (flipped(mid) ? hi : lo) = mid;
      }
      for (double& t : total) t *= hi;
    }
  }
  step.direction = total;
  step.distance = kernels::norm(total);
  step.boundary.resize(dim);
  for (std::size_t k = 0; k < dim; ++k) step.boundary[k] = v[k] + total[k];
  step.unit.assign(dim, 0.0);
  if (step.distance > 0.0)
    for (std::size_t k = 0; k < dim; ++k) step.unit[k] = total[k] / step.distance;
  return step;
}

/// p = (d.r / |r|^2) r and z = d.r / |r|. Throws GeometryError when r = 0.
ProjectionResult project(std::span<const double> d, std::span<const double> r);

/// +distance while the head predicts `reference_class` at v, -distance
/// otherwise. Throws NoBoundary for a degenerate head.
double signed_distance(const AffineHead& head, std::span<const double> v, std::size_t reference_class);

}  // namespace geoattack
