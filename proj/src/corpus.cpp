#include "geoattack/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace geoattack {
namespace {

constexpr char32_t kReplacement = 0xFFFD;

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(kReplacement);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode_utf8(std::span<const char32_t> cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) append_utf8(out, cp);
  return out;
}

char32_t lower_cp(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0x80) return cp;
  if ((cp >= 0xC0 && cp <= 0xDE && cp != 0xD7)) return cp + 32;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
         cp == 0xA0 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0x202F || cp == 0x205F ||
         cp == 0x3000 || cp == 0xFEFF;
}

bool is_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

// Symbols that are split off like punctuation but are not in a Unicode P*
// category, so they never count as punctuation for candidate filtering.
bool is_split_symbol(char32_t cp) { return cp == '$' || cp == '<' || cp == '>'; }

bool is_break(char32_t cp) { return is_punctuation_codepoint(cp) || is_split_symbol(cp); }

bool is_word_char(char32_t cp) { return !is_space(cp) && !is_break(cp); }

struct Piece {
  std::vector<char32_t> cps;
};

// Splits one whitespace-free chunk into raw pieces (words keep internal
// apostrophes, hyphens, and digit separators).
std::vector<Piece> split_chunk(const std::vector<char32_t>& s) {
  std::vector<Piece> out;
  const std::size_t n = s.size();
  std::size_t i = 0;
  auto word_at = [&](std::size_t k) { return k < n && is_word_char(s[k]); };
  while (i < n) {
    const char32_t c = s[i];
    if (is_word_char(c) || (c == '\'' && word_at(i + 1) && (i == 0 || !word_at(i - 1)))) {
      // Word, possibly with a leading apostrophe ('80s, 'em).
      Piece p;
      p.cps.push_back(c);
      ++i;
      while (i < n) {
        const char32_t d = s[i];
        if (is_word_char(d)) {
          p.cps.push_back(d);
          ++i;
          continue;
        }
        const bool inner = word_at(i + 1);
        if (inner && (d == '\'' || d == 0x2019 || d == '-')) {
          p.cps.push_back(d);
          ++i;
          continue;
        }
        if (inner && (d == '.' || d == ',' || d == ':') && is_digit(p.cps.back()) && is_digit(s[i + 1])) {
          p.cps.push_back(d);
          ++i;
          continue;
        }
        break;
      }
      out.push_back(std::move(p));
      continue;
    }
    // Punctuation run: "..." and "--" stay whole, everything else splits.
    Piece p;
    p.cps.push_back(c);
    ++i;
    if (c == '.' || c == '-') {
      while (i < n && s[i] == c) p.cps.push_back(s[i++]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

bool ends_with_ci(const std::vector<char32_t>& w, std::u32string_view suffix) {
  if (w.size() < suffix.size()) return false;
  for (std::size_t k = 0; k < suffix.size(); ++k) {
    char32_t a = lower_cp(w[w.size() - suffix.size() + k]);
    if (a == 0x2019) a = '\'';
    if (a != suffix[k]) return false;
  }
  return true;
}

bool equals_ci(const std::vector<char32_t>& w, std::u32string_view text) {
  return w.size() == text.size() && ends_with_ci(w, text);
}

void emit(std::vector<Token>& out, std::span<const char32_t> cps) {
  if (!cps.empty()) out.push_back(Token::from_surface(encode_utf8(cps)));
}

// Clitic and contraction splitting on a word piece.
void emit_word(std::vector<Token>& out, const std::vector<char32_t>& w) {
  const std::span<const char32_t> all(w);
  struct Fixed {
    std::u32string_view word;
    std::size_t cut;
  };
  static constexpr Fixed kFixed[] = {{U"cannot", 3}, {U"gonna", 3}, {U"gotta", 3}, {U"wanna", 3}};
  for (const auto& f : kFixed) {
    if (equals_ci(w, f.word)) {
      emit(out, all.first(f.cut));
      emit(out, all.subspan(f.cut));
      return;
    }
  }
  // Trailing apostrophe (possessive plural): dogs' -> dogs '
  if (w.size() > 1 && (w.back() == '\'' || w.back() == 0x2019)) {
    emit_word(out, std::vector<char32_t>(w.begin(), w.end() - 1));
    emit(out, all.last(1));
    return;
  }
  static constexpr std::u32string_view kClitics[] = {U"n't", U"'ll", U"'re", U"'ve", U"'s", U"'m", U"'d"};
  for (auto clitic : kClitics) {
    if (w.size() > clitic.size() && ends_with_ci(w, clitic)) {
      const std::size_t cut = w.size() - clitic.size();
      // "'s" needs a real stem; "''s" or "-'s" are not clitics.
      if (!is_word_char(w[cut - 1])) continue;
      emit(out, all.first(cut));
      emit(out, all.subspan(cut));
      return;
    }
  }
  emit(out, all);
}

}  // namespace

bool is_punctuation_codepoint(char32_t cp) {
  if (cp < 0x80) {
    switch (cp) {
      case '!': case '"': case '#': case '%': case '&': case '\'': case '(': case ')':
      case '*': case ',': case '-': case '.': case '/': case ':': case ';': case '?':
      case '@': case '[': case '\\': case ']': case '_': case '{': case '}':
        return true;
      default:
        return false;
    }
  }
  // Non-ASCII Unicode P* code points in the commonly used blocks.
  struct Range {
    char32_t lo, hi;
  };
  static constexpr Range kRanges[] = {
      {0x00A1, 0x00A1}, {0x00A7, 0x00A7}, {0x00AB, 0x00AB}, {0x00B6, 0x00B7}, {0x00BB, 0x00BB},
      {0x00BF, 0x00BF}, {0x037E, 0x037E}, {0x0387, 0x0387}, {0x055A, 0x055F}, {0x0589, 0x058A},
      {0x05BE, 0x05BE}, {0x05C0, 0x05C0}, {0x05C3, 0x05C3}, {0x05C6, 0x05C6}, {0x05F3, 0x05F4},
      {0x060C, 0x060D}, {0x061B, 0x061B}, {0x061E, 0x061F}, {0x066A, 0x066D}, {0x06D4, 0x06D4},
      {0x0964, 0x0965}, {0x0970, 0x0970}, {0x0E4F, 0x0E4F}, {0x0E5A, 0x0E5B}, {0x2010, 0x2027},
      {0x2030, 0x2043}, {0x2045, 0x2051}, {0x2053, 0x205E}, {0x207D, 0x207E}, {0x208D, 0x208E},
      {0x2308, 0x230B}, {0x2329, 0x232A}, {0x2768, 0x2775}, {0x27C5, 0x27C6}, {0x27E6, 0x27EF},
      {0x2983, 0x2998}, {0x29D8, 0x29DB}, {0x29FC, 0x29FD}, {0x2E00, 0x2E4F}, {0x3001, 0x3003},
      {0x3008, 0x3011}, {0x3014, 0x301F}, {0x3030, 0x3030}, {0x303D, 0x303D}, {0x30A0, 0x30A0},
      {0x30FB, 0x30FB}, {0xFE10, 0xFE19}, {0xFE30, 0xFE52}, {0xFE54, 0xFE61}, {0xFE63, 0xFE63},
      {0xFE68, 0xFE68}, {0xFE6A, 0xFE6B}, {0xFF01, 0xFF03}, {0xFF05, 0xFF0A}, {0xFF0C, 0xFF0F},
      {0xFF1A, 0xFF1B}, {0xFF1F, 0xFF20}, {0xFF3B, 0xFF3D}, {0xFF3F, 0xFF3F}, {0xFF5B, 0xFF5B},
      {0xFF5D, 0xFF5D}, {0xFF5F, 0xFF65},
  };
  for (const auto& r : kRanges)
    if (cp >= r.lo && cp <= r.hi) return true;
  return false;
}

bool is_punctuation_text(std::string_view text) {
  const auto cps = decode_utf8(text);
  if (cps.empty()) return false;
  return std::all_of(cps.begin(), cps.end(), is_punctuation_codepoint);
}

std::string to_lower_utf8(std::string_view text) {
  auto cps = decode_utf8(text);
  for (char32_t& cp : cps) cp = lower_cp(cp);
  return encode_utf8(cps);
}

Token Token::from_surface(std::string surface) {
  if (surface.empty()) throw std::invalid_argument("token surface must be non-empty");
  Token t;
  t.text = to_lower_utf8(surface);
  t.is_punctuation = is_punctuation_text(surface);
  t.surface = std::move(surface);
  return t;
}

std::vector<Token> tokenize(std::string_view text) {
  const auto cps = decode_utf8(text);
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i])) ++i;
    std::vector<char32_t> chunk;
    while (i < cps.size() && !is_space(cps[i])) chunk.push_back(cps[i++]);
    if (chunk.empty()) continue;
    for (const auto& piece : split_chunk(chunk)) {
      const bool word = is_word_char(piece.cps[0]) || (piece.cps[0] == '\'' && piece.cps.size() > 1);
      if (word)
        emit_word(out, piece.cps);
      else
        emit(out, piece.cps);
    }
  }
  return out;
}

std::string join_surfaces(std::span<const Token> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i].surface;
  }
  return out;
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "csv") return DatasetFormat::Csv;
  if (name == "tsv") return DatasetFormat::Tsv;
  if (name == "dir") return DatasetFormat::Dir;
  throw std::invalid_argument("unknown dataset format '" + std::string(name) + "' (csv|tsv|dir)");
}

namespace {

// RFC 4180 fields of a single line. Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool field_was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty() && !field_was_quoted) {
      quoted = true;
      field_was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      field_was_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

struct RawRecord {
  std::string label;
  std::string text;
  std::string id;
  std::string where;  // for error messages
};

std::vector<RawRecord> read_delimited(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read dataset file " + path.string());
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    RawRecord rec;
    rec.id = std::to_string(line_no);
    rec.where = "line " + std::to_string(line_no);
    if (format == DatasetFormat::Tsv) {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw DataError("malformed record at line " + std::to_string(line_no) + ": missing tab");
      rec.label = trim(std::string_view(line).substr(0, tab));
      rec.text = line.substr(tab + 1);
    } else {
      auto fields = split_csv_line(line);
      if (!fields || fields->size() < 2)
        throw DataError("malformed record at line " + std::to_string(line_no) + ": expected label,text");
      rec.label = trim((*fields)[0]);
      for (std::size_t k = 1; k < fields->size(); ++k) {
        if (k > 1) rec.text.push_back(' ');
        rec.text += (*fields)[k];
      }
    }
    if (rec.label.empty()) throw DataError("malformed record at line " + std::to_string(line_no) + ": empty label");
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RawRecord> read_directory(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw DataError("dataset directory not found: " + root.string());
  std::vector<fs::path> label_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) label_dirs.push_back(entry.path());
  std::sort(label_dirs.begin(), label_dirs.end());
  std::vector<RawRecord> records;
  for (const auto& dir : label_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file, std::ios::binary);
      if (!in) throw DataError("cannot read " + file.string());
      std::stringstream buf;
      buf << in.rdbuf();
      RawRecord rec;
      rec.label = dir.filename().string();
      rec.text = buf.str();
      if (rec.text.rfind("\xEF\xBB\xBF", 0) == 0) rec.text.erase(0, 3);
      rec.id = rec.label + "/" + file.stem().string();
      rec.where = file.string();
      records.push_back(std::move(rec));
    }
  }
  return records;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  if (options.max_len && *options.max_len == 0) throw std::invalid_argument("max_len must be positive");
  std::vector<RawRecord> records = options.format == DatasetFormat::Dir ? read_directory(path)
                                                                       : read_delimited(path, options.format);
  if (records.empty()) throw DataError("empty dataset: " + path.string());

  Dataset ds;
  ds.split = options.split;
  if (options.label_names.empty()) {
    std::set<std::string> labels;
    for (const auto& r : records) labels.insert(r.label);
    ds.label_names.assign(labels.begin(), labels.end());
  } else {
    ds.label_names = options.label_names;
  }
  std::map<std::string, std::size_t, std::less<>> label_ids;
  for (std::size_t k = 0; k < ds.label_names.size(); ++k) label_ids.emplace(ds.label_names[k], k);

  ds.examples.reserve(records.size());
  for (auto& r : records) {
    const auto it = label_ids.find(r.label);
    if (it == label_ids.end()) throw DataError("unknown label '" + r.label + "' at " + r.where);
    Example ex;
    ex.label = it->second;
    ex.id = std::move(r.id);
    ex.tokens = tokenize(r.text);
    if (ex.tokens.empty()) throw DataError("malformed record at " + r.where + ": no tokens");
    if (options.max_len && ex.tokens.size() > *options.max_len) ex.tokens.resize(*options.max_len);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

Vocabulary::Vocabulary() { add(std::string(kOovToken)); }

void Vocabulary::add(std::string token) {
  const auto id = static_cast<TokenId>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const Dataset& dataset, std::size_t min_freq) {
  if (dataset.empty()) throw DataError("cannot build a vocabulary from an empty dataset");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& ex : dataset.examples)
    for (const auto& t : ex.tokens) ++counts[t.text];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts)
    if (n >= std::max<std::size_t>(min_freq, 1) && tok != kOovToken) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (auto& [tok, n] : kept) v.add(tok);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens_without_oov) {
  Vocabulary v;
  for (const auto& t : tokens_without_oov) {
    if (t.empty() || t == kOovToken) throw DataError("invalid vocabulary token '" + t + "'");
    if (v.contains(t)) throw DataError("duplicate vocabulary token '" + t + "'");
    v.add(t);
  }
  return v;
}

TokenId Vocabulary::id(std::string_view lowered) const {
  const auto it = token_to_id_.find(std::string(lowered));
  return it == token_to_id_.end() ? kOovId : it->second;
}

bool Vocabulary::contains(std::string_view lowered) const {
  return lowered != kOovToken && token_to_id_.count(std::string(lowered)) > 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= id_to_token_.size()) throw std::out_of_range("token id out of range");
  return id_to_token_[id];
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : id_to_token_) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : id_to_token_) out << t << '\n';
  if (!out) throw DataError("failed writing vocabulary " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary " + path.string());
  std::string line;
  std::vector<std::string> tokens;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 0) {
      if (line != kOovToken) throw DataError("vocabulary line 0 must be " + std::string(kOovToken));
    } else {
      tokens.push_back(line);
    }
    ++line_no;
  }
  if (line_no == 0) throw DataError("empty vocabulary file " + path.string());
  return from_tokens(tokens);
}

std::vector<TokenId> encode(std::span<const Token> tokens, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t.text));
  return ids;
}

std::vector<TokenId> encode(const Example& example, const Vocabulary& vocab) {
  return encode(example.tokens, vocab);
}

std::vector<std::string> decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(vocab.token(id));
  return out;
}

}  // namespace geoattack
