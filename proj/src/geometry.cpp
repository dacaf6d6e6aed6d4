#include "geoattack/geometry.hpp"

#include <cmath>
#include <limits>

namespace geoattack {

BoundaryStep deepfool_affine(const AffineHead& head, std::span<const double> v) {
  const Vec z = head.logits(v);
  const std::size_t top = kernels::argmax(z);
  const std::size_t dim = v.size();

  BoundaryStep step;
  step.predicted_class = top;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_l = top;
  double best_f = 0.0, best_n2 = 0.0;
  Vec w(dim), best_w(dim);
  for (std::size_t l = 0; l < z.size(); ++l) {
    if (l == top) continue;
    const auto wl = head.weight.row(l);
    const auto wt = head.weight.row(top);
    for (std::size_t k = 0; k < dim; ++k) w[k] = wl[k] - wt[k];
    const double n2 = kernels::dot(w, w);
    if (n2 == 0.0) continue;
    const double f = z[l] - z[top];  // <= 0
    const double d = std::abs(f) / std::sqrt(n2);
    if (d < best) {
      best = d;
      best_l = l;
      best_f = f;
      best_n2 = n2;
      best_w = w;
    }
  }
  if (best_l == top) throw NoBoundary();

  step.target_class = best_l;
  step.direction.assign(dim, 0.0);
  // Move along w_l - w_top by |f| / |w|^2 so that logit_l(b) == logit_top(b).
  if (best_f != 0.0) kernels::axpy(-best_f / best_n2, best_w, step.direction);
  step.distance = kernels::norm(step.direction);
  step.boundary.resize(dim);
  step.unit.assign(dim, 0.0);
  for (std::size_t k = 0; k < dim; ++k) {
    step.boundary[k] = v[k] + step.direction[k];
    if (step.distance > 0.0) step.unit[k] = step.direction[k] / step.distance;
  }
  return step;
}

double pairwise_hyperplane_distance(const AffineHead& head, std::span<const double> v) {
  const std::size_t classes = head.weight.rows;
  const std::size_t dim = head.weight.cols;
  auto score = [&](std::size_t c) {
    double s = head.bias[c];
    for (std::size_t k = 0; k < dim; ++k) s += head.weight(c, k) * v[k];
    return s;
  };
  std::size_t top = 0;
  for (std::size_t c = 1; c < classes; ++c)
    if (score(c) > score(top)) top = c;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < classes; ++l) {
    if (l == top) continue;
    double num = head.bias[l] - head.bias[top];
    double n2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double w = head.weight(l, k) - head.weight(top, k);
      num += w * v[k];
      n2 += w * w;
    }
    if (n2 > 0.0) best = std::min(best, std::abs(num) / std::sqrt(n2));
  }
  return best;
}

Vec MlpHead::logits(std::span<const double> v) const {
  Vec hidden(b1);
  kernels::gemv_add(w1, v, hidden);
  for (double& x : hidden) x = std::tanh(x);
  Vec out(b2);
  kernels::gemv_add(w2, hidden, out);
  return out;
}

Matrix MlpHead::jacobian(std::span<const double> v) const {
  Vec hidden(b1);
  kernels::gemv_add(w1, v, hidden);
  Matrix jac(w2.rows, w1.cols);
  for (std::size_t j = 0; j < hidden.size(); ++j) {
    const double t = std::tanh(hidden[j]);
    const double dt = 1.0 - t * t;
    for (std::size_t c = 0; c < w2.rows; ++c) {
      const double s = w2(c, j) * dt;
      for (std::size_t k = 0; k < w1.cols; ++k) jac(c, k) += s * w1(j, k);
    }
  }
  return jac;
}

MlpHead MlpHead::random(std::size_t input_dim, std::size_t hidden, std::size_t classes, std::mt19937_64& rng,
                        double scale) {
  std::normal_distribution<double> n(0.0, scale);
  MlpHead h;
  h.w1 = Matrix(hidden, input_dim);
  h.w2 = Matrix(classes, hidden);
  h.b1.resize(hidden);
  h.b2.resize(classes);
  for (double& x : h.w1.data) x = n(rng);
  for (double& x : h.w2.data) x = n(rng);
  for (double& x : h.b1) x = n(rng);
  for (double& x : h.b2) x = n(rng);
  return h;
}

ProjectionResult project(std::span<const double> d, std::span<const double> r) {
  if (d.size() != r.size()) throw GeometryError("projection operands differ in length");
  const double n2 = kernels::dot(r, r);
  if (!(n2 > 0.0)) throw GeometryError("cannot project onto a zero vector");
  const double dr = kernels::dot(d, r);
  ProjectionResult out;
  out.projection.resize(r.size());
  const double s = dr / n2;
  for (std::size_t k = 0; k < r.size(); ++k) out.projection[k] = s * r[k];
  out.length = dr / std::sqrt(n2);
  return out;
}

double signed_distance(const AffineHead& head, std::span<const double> v, std::size_t reference_class) {
  const BoundaryStep step = deepfool_affine(head, v);
  return step.predicted_class == reference_class ? step.distance : -step.distance;
}

}  // namespace geoattack
