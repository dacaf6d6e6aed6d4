#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geoattack/corpus.hpp"

namespace geoattack {

/// lemma -> ordered synonym list. Lookup is case-insensitive; a lemma never
/// lists itself and lists carry no duplicates.
class SynonymLexicon {
 public:
  SynonymLexicon() = default;

  /// Reads `lemma<TAB>syn1,syn2,...` lines (UTF-8). Blank lines are skipped;
  /// a line without a tab is a DataError naming the line.
  static SynonymLexicon load(const std::filesystem::path& path);

  /// Adds (or extends) an entry, normalizing as `load` does.
  void add(std::string_view lemma, const std::vector<std::string>& synonyms);

  const std::vector<std::string>& lookup(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

/// Copies the capitalization pattern of `like` (all caps, leading capital, or
/// lowercase) onto `word`.
std::string match_case(std::string_view word, std::string_view like);

/// Synonyms of `token` that are in `vocab`, rendered with the token's casing.
/// Multiword entries are dropped. May be empty.
std::vector<Token> synonyms(const SynonymLexicon& lexicon, const Token& token, const Vocabulary& vocab);

}  // namespace geoattack
