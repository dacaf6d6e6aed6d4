#include "geoattack/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <vector>

namespace geoattack {

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim,
                               EmbeddingCoverage* coverage) {
  if (dim == 0) throw std::invalid_argument("embedding dim must be positive");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read embedding file " + path.string());

  EmbeddingTable table(vocab.size(), dim);
  std::vector<bool> seen(vocab.size(), false);
  std::vector<double> values;
  values.reserve(dim);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos || sp == 0)
      throw DataError("dim mismatch at line " + std::to_string(line_no));
    const std::string_view token(line.data(), sp);

    values.clear();
    const char* p = line.data() + sp;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double x = 0.0;
      auto [next, ec] = std::from_chars(p, end, x);
      if (ec != std::errc() || !std::isfinite(x))
        throw DataError("bad number at line " + std::to_string(line_no));
      values.push_back(x);
      p = next;
    }
    if (values.size() != dim)
      throw DataError("dim mismatch at line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                      " values, got " + std::to_string(values.size()));

    const TokenId id = vocab.id(token);
    if (id == vocab.oov_id() || seen[id]) continue;
    seen[id] = true;
    std::copy(values.begin(), values.end(), table.row(id).begin());
  }

  if (coverage) {
    coverage->vocab_size = vocab.size() - 1;
    coverage->found = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true));
    coverage->missing = coverage->vocab_size - coverage->found;
  }
  return table;
}

Matrix lookup(const EmbeddingTable& table, std::span<const TokenId> ids) {
  Matrix out(ids.size(), table.dim());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= table.vocab_size()) throw std::out_of_range("embedding id " + std::to_string(ids[k]) + " out of range");
    const auto src = table.row(ids[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

}  // namespace geoattack
