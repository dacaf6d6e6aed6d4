#include "geoattack/lexicon.hpp"

#include <algorithm>
#include <fstream>

namespace geoattack {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_ascii_lower(char c) { return c >= 'a' && c <= 'z'; }

}  // namespace

SynonymLexicon SynonymLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read lexicon " + path.string());
  SynonymLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("malformed lexicon line " + std::to_string(line_no) + ": missing tab");
    const std::string lemma = trim(std::string_view(line).substr(0, tab));
    if (lemma.empty()) throw DataError("malformed lexicon line " + std::to_string(line_no) + ": empty lemma");
    std::vector<std::string> syns;
    std::string_view rest(line);
    rest.remove_prefix(tab + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      syns.push_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    lex.add(lemma, syns);
  }
  return lex;
}

void SynonymLexicon::add(std::string_view lemma, const std::vector<std::string>& synonyms) {
  const std::string key = to_lower_utf8(trim(lemma));
  auto& list = entries_[key];
  for (const auto& s : synonyms) {
    std::string syn = to_lower_utf8(trim(s));
    if (syn.empty() || syn == key) continue;
    if (std::find(list.begin(), list.end(), syn) != list.end()) continue;
    list.push_back(std::move(syn));
  }
}

const std::vector<std::string>& SynonymLexicon::lookup(std::string_view word) const {
  static const std::vector<std::string> kEmpty;
  const auto it = entries_.find(to_lower_utf8(word));
  return it == entries_.end() ? kEmpty : it->second;
}

std::string match_case(std::string_view word, std::string_view like) {
  std::string out(word);
  const bool has_lower = std::any_of(like.begin(), like.end(), is_ascii_lower);
  const bool has_upper = std::any_of(like.begin(), like.end(), is_ascii_upper);
  if (has_upper && !has_lower && like.size() > 1) {
    for (char& c : out)
      if (is_ascii_lower(c)) c = static_cast<char>(c - 32);
  } else if (!like.empty() && is_ascii_upper(like.front()) && !out.empty() && is_ascii_lower(out.front())) {
    out.front() = static_cast<char>(out.front() - 32);
  }
  return out;
}

std::vector<Token> synonyms(const SynonymLexicon& lexicon, const Token& token, const Vocabulary& vocab) {
  std::vector<Token> out;
  for (const auto& syn : lexicon.lookup(token.text)) {
    if (syn.find(' ') != std::string::npos || syn.find('_') != std::string::npos) continue;
    if (!vocab.contains(syn)) continue;
    out.push_back(Token::from_surface(match_case(syn, token.surface)));
  }
  return out;
}

}  // namespace geoattack
