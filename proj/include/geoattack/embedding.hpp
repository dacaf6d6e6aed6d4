#pragma once

#include <filesystem>
#include <span>

#include "geoattack/corpus.hpp"
#include "geoattack/tensor.hpp"

namespace geoattack {

/// V x D word-embedding matrix; row index = vocabulary id.
struct EmbeddingTable {
  Matrix rows;

  EmbeddingTable() = default;
  EmbeddingTable(std::size_t vocab_size, std::size_t dim) : rows(vocab_size, dim) {}

  std::size_t dim() const { return rows.cols; }
  std::size_t vocab_size() const { return rows.rows; }
  std::span<const double> row(TokenId id) const { return rows.row(id); }
  std::span<double> row(TokenId id) { return rows.row(id); }
};

struct EmbeddingCoverage {
  std::size_t found = 0;    // in-vocab tokens (oov excluded) with a vector in the file
  std::size_t missing = 0;  // in-vocab tokens (oov excluded) left at zero
  std::size_t vocab_size = 0;

  double ratio() const { return vocab_size ? static_cast<double>(found) / static_cast<double>(vocab_size) : 0.0; }
};

/// Reads a `token v1 ... vD` text file. Tokens missing from the file, and
/// the oov row, are zero.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim,
                               EmbeddingCoverage* coverage = nullptr);

/// Gathers rows into an N x D matrix. Throws std::out_of_range on a bad id.
Matrix lookup(const EmbeddingTable& table, std::span<const TokenId> ids);

}  // namespace geoattack
