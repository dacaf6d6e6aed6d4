#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "geoattack/kernels.hpp"
#include "geoattack/model.hpp"
#include "toy.hpp"

using namespace geoattack;

namespace {

std::pair<std::size_t, std::size_t> gradient_check(EncoderKind kind, std::uint64_t seed, std::size_t samples) {
  std::mt19937_64 rng(seed);
  const auto v = toy::vocab({"a", "b", "c", "d", "e", "f", "g"});
  Classifier clf = toy::random_classifier(kind, v, 5, 12, 3, rng);
  const auto o = gradcheck::run(clf, {1, 4, 2, 6, 3, 1, 5}, 2, samples, rng);
  return {o.agree, o.sampled};
}

}  // namespace

TEST_CASE("affine head logits") {
  AffineHead eye(toy::matrix(2, 2, {1, 0, 0, 1}), {0, 0});
  CHECK(eye.logits(Vec{1, 2}) == Vec{1, 2});
  AffineHead zero(Matrix(2, 3), {0.5, -1});
  CHECK(zero.logits(Vec{4, 5, 6}) == Vec{0.5, -1});
  CHECK_THROWS(eye.logits(Vec{1, 2, 3}));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix w(4, 7);
    for (double& x : w.data) x = n(rng);
    Vec c(4), v(7);
    for (double& x : c) x = n(rng);
    for (double& x : v) x = n(rng);
    const Vec got = AffineHead(w, c).logits(v);
    for (std::size_t i = 0; i < 4; ++i) {
      double s = c[i];
      for (std::size_t j = 0; j < 7; ++j) s += w.data[i * 7 + j] * v[j];
      CHECK(got[i] == doctest::Approx(s).epsilon(1e-9));
    }
  }
}

TEST_CASE("softmax is a stable distribution") {
  CHECK(kernels::softmax(Vec{0, 0}) == Vec{0.5, 0.5});
  const Vec big = kernels::softmax(Vec{1000, 0});
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(big[1]));
  const Vec a = kernels::softmax(Vec{0.3, -1.2, 2.0});
  const Vec b = kernels::softmax(Vec{100.3, 98.8, 102.0});
  for (int i = 0; i < 3; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
  CHECK(kernels::argmax(Vec{1, 3, 3}) == 1);
}

TEST_CASE("classifier predictions") {
  std::mt19937_64 rng(5);
  const auto v = toy::vocab({"a", "b", "c"});
  for (EncoderKind kind : {EncoderKind::Convolutional, EncoderKind::Recurrent, EncoderKind::Bag}) {
    Classifier clf = toy::random_classifier(kind, v, 4, 6, 3, rng);
    const std::vector<TokenId> ids{1, 2, 3, 1};
    const Vec p = clf.probabilities(ids);
    double sum = 0;
    for (double x : p) {
      CHECK(x > 0.0);
      CHECK(x < 1.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(clf.predict(ids) == kernels::argmax(clf.logits(ids)));
    CHECK_THROWS_AS(clf.encode(std::vector<TokenId>{}), ModelError);
  }
}

TEST_CASE("bag encoder identity and permutation behaviour") {
  const auto v = toy::vocab({"a", "b"});
  Classifier bag = toy::bag(v, toy::matrix(3, 2, {0, 0, 1, 2, -3, 4}), AffineHead(Matrix(2, 2), {0, 0}));
  CHECK(bag.encode(std::vector<TokenId>{1}) == Vec{1, 2});
  CHECK(bag.encode(std::vector<TokenId>{1, 2}) == bag.encode(std::vector<TokenId>{2, 1}));

  std::mt19937_64 rng(11);
  Classifier rnn = toy::random_classifier(EncoderKind::Recurrent, v, 3, 4, 2, rng);
  CHECK(rnn.encode(std::vector<TokenId>{1, 2}) != rnn.encode(std::vector<TokenId>{2, 1}));
}

TEST_CASE("conv encoder handles sequences shorter than the filter width") {
  std::mt19937_64 rng(2);
  const auto v = toy::vocab({"a", "b"});
  Classifier cnn = toy::random_classifier(EncoderKind::Convolutional, v, 4, 9, 2, rng);
  CHECK(cnn.encode(std::vector<TokenId>{1}).size() == 9);
  CHECK(ConvEncoder::positions(2, 5) == 1);
  CHECK(ConvEncoder::positions(7, 3) == 5);
}

TEST_CASE("shape mismatch is rejected at construction") {
  const auto v = toy::vocab({"a"});
  ModelParams p;
  p.embedding = EmbeddingTable(2, 3);
  p.encoder = BagEncoder{3};
  p.head = AffineHead(Matrix(2, 4), {0, 0});
  CHECK_THROWS_AS(Classifier(p, v, toy::labels(2)), ModelError);
  p.head = AffineHead(Matrix(1, 3), {0});
  CHECK_THROWS_AS(Classifier(p, v, toy::labels(1)), ModelError);
}

TEST_CASE("analytic gradients match central differences") {
  for (EncoderKind kind : {EncoderKind::Convolutional, EncoderKind::Recurrent, EncoderKind::Bag}) {
    CAPTURE(encoder_kind_name(kind));
    const auto [ok, n] = gradient_check(kind, 17, 60);
    CHECK(n >= 20);
    CHECK(ok == n);
  }
}

TEST_CASE("incremental substitution equals re-encoding") {
  std::mt19937_64 rng(23);
  const auto v = toy::vocab({"a", "b", "c", "d", "e"});
  for (EncoderKind kind : {EncoderKind::Convolutional, EncoderKind::Recurrent, EncoderKind::Bag}) {
    Classifier clf = toy::random_classifier(kind, v, 4, 9, 2, rng);
    for (std::vector<TokenId> ids : {std::vector<TokenId>{1, 2, 3, 4, 5, 1, 2}, std::vector<TokenId>{3},
                                     std::vector<TokenId>{2, 5}}) {
      const SubstitutionEncoder sub(clf, ids);
      CHECK(sub.base() == clf.encode(ids));
      for (std::size_t pos = 0; pos < ids.size(); ++pos)
        for (TokenId r = 0; r < v->size(); ++r) {
          const Vec fast = sub.substitute(pos, r);
          const Vec ref = encode_with_substitution(clf, ids, pos, r);
          for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(fast[k] - ref[k]) <= 1e-10);
        }
    }
  }
}
