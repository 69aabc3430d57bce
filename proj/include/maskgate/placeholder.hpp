#pragma once

// Placeholder token grammar shared by the mapping store, sanitizer and
// restorer. A placeholder is "<" SLUG "_" N ">" where SLUG is [A-Z][A-Z0-9_]*
// and N is a positive decimal with no leading zeros. Slugs may themselves
// contain underscores and digits, so parsing splits on the *last* underscore
// whose suffix is a well-formed index.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace maskgate {

inline bool is_slug_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

inline bool is_valid_slug(std::string_view s) {
  if (s.empty() || s[0] < 'A' || s[0] > 'Z') return false;
  for (char c : s)
    if (!is_slug_char(c)) return false;
  return true;
}

struct PlaceholderParts {
  std::string slug;
  long index = 0;
};

inline std::string make_placeholder(std::string_view slug, long index) {
  std::string out;
  out.reserve(slug.size() + 8);
  out.push_back('<');
  out.append(slug);
  out.push_back('_');
  out.append(std::to_string(index));
  out.push_back('>');
  return out;
}

// Parses a full string of the form <SLUG_N>. Returns nullopt when the string
// is not exactly one well-formed placeholder.
inline std::optional<PlaceholderParts> parse_placeholder(std::string_view tok) {
  if (tok.size() < 5 || tok.front() != '<' || tok.back() != '>') return std::nullopt;
  std::string_view body = tok.substr(1, tok.size() - 2);
  std::size_t us = body.rfind('_');
  if (us == std::string_view::npos || us == 0 || us + 1 >= body.size()) return std::nullopt;
  std::string_view slug = body.substr(0, us);
  std::string_view num = body.substr(us + 1);
  if (!is_valid_slug(slug)) return std::nullopt;
  if (num[0] < '1' || num[0] > '9') return std::nullopt;  // no leading zeros
  long value = 0;
  for (char c : num) {
    if (c < '0' || c > '9') return std::nullopt;
    if (value > 100000000) return std::nullopt;  // indexes are small; cap defensively
    value = value * 10 + (c - '0');
  }
  return PlaceholderParts{std::string(slug), value};
}

struct PlaceholderMatch {
  std::size_t begin = 0;  // byte offset of '<'
  std::size_t end = 0;    // one past '>'
  PlaceholderParts parts;
};

// Finds the next grammar match at or after `from`. Scans manually rather than
// via std::regex: the grammar is tiny and this path sits on the hot loop of
// both restore and retrieval tokenization.
inline std::optional<PlaceholderMatch> find_placeholder(std::string_view text, std::size_t from = 0) {
  for (std::size_t i = from; i < text.size(); ++i) {
    if (text[i] != '<') continue;
    std::size_t j = i + 1;
    if (j >= text.size() || text[j] < 'A' || text[j] > 'Z') continue;
    while (j < text.size() && is_slug_char(text[j])) ++j;
    if (j >= text.size() || text[j] != '>') continue;
    auto parts = parse_placeholder(text.substr(i, j + 1 - i));
    if (!parts) continue;
    return PlaceholderMatch{i, j + 1, std::move(*parts)};
  }
  return std::nullopt;
}

inline bool contains_placeholder(std::string_view text) {
  return find_placeholder(text).has_value();
}

}  // namespace maskgate
