#pragma once

// Dataset ingestion: tokenization, labelled examples, vocabulary.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace geoattack {

using TokenId = std::uint32_t;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One word or punctuation mark. `surface` keeps the original casing and is
/// what gets rendered; `text` is the lowercased form used for lookup.
struct Token {
  std::string surface;
  std::string text;
  bool is_punctuation = false;

  static Token from_surface(std::string surface);
  friend bool operator==(const Token&, const Token&) = default;
};

/// Treebank-style word tokenizer: whitespace split, punctuation split off
/// (except inside numbers and hyphenated words), English clitics separated
/// ("don't" -> "do" "n't", "it's" -> "it" "'s").
std::vector<Token> tokenize(std::string_view text);

/// Space-joined surfaces.
std::string join_surfaces(std::span<const Token> tokens);

// Unicode helpers shared with the lexicon code.
std::string to_lower_utf8(std::string_view text);
bool is_punctuation_codepoint(char32_t cp);
bool is_punctuation_text(std::string_view text);

struct Example {
  std::vector<Token> tokens;
  std::size_t label = 0;
  std::string id;
};

enum class Split { Train, Test };

struct Dataset {
  std::vector<Example> examples;
  std::vector<std::string> label_names;  // dense id -> original label string
  Split split = Split::Train;

  std::size_t num_classes() const { return label_names.size(); }
  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

enum class DatasetFormat { Csv, Tsv, Dir };

DatasetFormat parse_dataset_format(std::string_view name);

struct LoadOptions {
  DatasetFormat format = DatasetFormat::Tsv;
  std::optional<std::size_t> max_len;  // truncate token sequences when set
  /// Label names to map onto (e.g. taken from the training split). When
  /// empty, the distinct labels found are sorted and numbered densely.
  std::vector<std::string> label_names;
  Split split = Split::Train;
};

/// Loads `label<TAB>text` / `label,text` files (one record per line) or a
/// `<root>/<label>/<id>.txt` directory tree.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options);

class Vocabulary {
 public:
  static constexpr TokenId kOovId = 0;
  static constexpr std::string_view kOovToken = "<oov>";

  Vocabulary();

  /// Frequency >= min_freq; ids by frequency descending then lexicographic.
  static Vocabulary build(const Dataset& dataset, std::size_t min_freq = 1);
  static Vocabulary from_tokens(std::span<const std::string> tokens_without_oov);

  TokenId id(std::string_view lowered) const;
  bool contains(std::string_view lowered) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return id_to_token_.size(); }
  TokenId oov_id() const { return kOovId; }

  /// FNV-1a over the ordered token list; identifies a vocabulary in checkpoints.
  std::uint64_t hash() const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  void add(std::string token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

std::vector<TokenId> encode(const Example& example, const Vocabulary& vocab);
std::vector<TokenId> encode(std::span<const Token> tokens, const Vocabulary& vocab);
std::vector<std::string> decode(std::span<const TokenId> ids, const Vocabulary& vocab);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace geoattack
