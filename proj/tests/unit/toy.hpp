#pragma once

// Small hand-built models and corpora shared by the unit tests.

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "geoattack/model.hpp"

namespace toy {

using namespace geoattack;

inline std::shared_ptr<const Vocabulary> vocab(const std::vector<std::string>& words) {
  return std::make_shared<const Vocabulary>(Vocabulary::from_tokens(words));
}

inline std::vector<std::string> labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < n; ++c) out.push_back("c" + std::to_string(c));
  return out;
}

inline Matrix matrix(std::size_t r, std::size_t c, std::initializer_list<double> values) {
  Matrix m(r, c);
  std::size_t k = 0;
  for (double v : values) m.data[k++] = v;
  return m;
}

// Bag-of-embeddings classifier with the given embedding rows (row 0 = oov).
inline Classifier bag(std::shared_ptr<const Vocabulary> v, Matrix emb, AffineHead head) {
  ModelParams p;
  p.embedding.rows = std::move(emb);
  p.encoder = BagEncoder{p.embedding.dim()};
  p.head = std::move(head);
  const std::size_t classes = p.head.num_classes();
  return Classifier(std::move(p), std::move(v), labels(classes));
}

inline Classifier random_classifier(EncoderKind kind, std::shared_ptr<const Vocabulary> v, std::size_t dim,
                                    std::size_t hidden, std::size_t classes, std::mt19937_64& rng,
                                    double emb_scale = 0.5) {
  ModelParams p;
  p.embedding = EmbeddingTable(v->size(), dim);
  std::uniform_real_distribution<double> u(-emb_scale, emb_scale);
  for (std::size_t r = 1; r < v->size(); ++r)
    for (double& x : p.embedding.row(static_cast<TokenId>(r))) x = u(rng);
  p.encoder = make_encoder(kind, dim, hidden, rng);
  p.head = make_affine_head(classes, output_dim(p.encoder), rng);
  return Classifier(std::move(p), std::move(v), labels(classes));
}

inline Example example(const std::vector<std::string>& words, std::size_t label, std::string id = "x") {
  Example e;
  for (const auto& w : words) e.tokens.push_back(Token::from_surface(w));
  e.label = label;
  e.id = std::move(id);
  return e;
}

inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("geoattack_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write(const std::filesystem::path& p, const std::string& content) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << content;
}

}  // namespace toy
