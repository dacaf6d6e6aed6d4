#pragma once

// Central-difference check of Classifier::loss_and_gradient on a random
// sample of parameters.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "geoattack/model.hpp"

namespace gradcheck {

using namespace geoattack;

struct Slot {
  double* value;
  double analytic;
};

inline std::vector<Slot> slots(Classifier& clf, Gradient& grad) {
  std::vector<Slot> out;
  auto& p = clf.params();
  const auto& ids = grad.embedding.ids();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    auto row = p.embedding.row(ids[k]);
    auto g = grad.embedding.row_at(k);
    for (std::size_t j = 0; j < row.size(); ++j) out.push_back({&row[j], g[j]});
  }
  std::vector<std::span<double>> ps, gs;
  for_each_tensor(p.encoder, [&](const std::string&, std::span<double> s) { ps.push_back(s); });
  for_each_tensor(grad.encoder, [&](const std::string&, std::span<double> s) { gs.push_back(s); });
  for (std::size_t t = 0; t < ps.size(); ++t)
    for (std::size_t j = 0; j < ps[t].size(); ++j) out.push_back({&ps[t][j], gs[t][j]});
  for (std::size_t j = 0; j < p.head.weight.data.size(); ++j)
    out.push_back({&p.head.weight.data[j], grad.head.weight.data[j]});
  for (std::size_t j = 0; j < p.head.bias.size(); ++j) out.push_back({&p.head.bias[j], grad.head.bias[j]});
  return out;
}

inline double loss_only(const Classifier& clf, const std::vector<TokenId>& ids, std::size_t label) {
  Gradient scratch = Gradient::zeros_like(clf.params());
  return clf.loss_and_gradient(ids, label, scratch);
}

struct Outcome {
  std::size_t agree = 0;
  std::size_t sampled = 0;
  double worst = 0.0;  // largest |numeric - analytic| / (1 + |analytic|)
};

// `clf` is perturbed in place and restored.
inline Outcome run(Classifier& clf, const std::vector<TokenId>& ids, std::size_t label, std::size_t samples,
                   std::mt19937_64& rng, double h = 1e-4, double tol = 1e-4) {
  Gradient grad = Gradient::zeros_like(clf.params());
  clf.loss_and_gradient(ids, label, grad);
  auto all = slots(clf, grad);
  std::shuffle(all.begin(), all.end(), rng);
  Outcome out;
  out.sampled = std::min(samples, all.size());
  for (std::size_t s = 0; s < out.sampled; ++s) {
    double* x = all[s].value;
    const double keep = *x;
    *x = keep + h;
    const double up = loss_only(clf, ids, label);
    *x = keep - h;
    const double down = loss_only(clf, ids, label);
    *x = keep;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(numeric - all[s].analytic) / (1 + std::abs(all[s].analytic));
    out.worst = std::max(out.worst, rel);
    if (rel <= tol) ++out.agree;
  }
  return out;
}

}  // namespace gradcheck
