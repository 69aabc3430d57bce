#pragma once

// UTF-8 iteration and the shared tokenizer used by the metrics, the mock
// retrieval memory and corpus statistics.
//
// Tokenization rule (deterministic, locale-free):
//   * each CJK ideograph is its own token;
//   * maximal runs of word codepoints (ASCII alphanumerics plus common
//     Latin/Greek/Cyrillic letters, kana and Hangul syllables) form one
//     token, ASCII letters folded to lowercase;
//   * everything else (punctuation, whitespace, symbols) is dropped.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace maskgate {

// Decodes one UTF-8 sequence starting at byte i; writes the codepoint and
// returns the number of bytes consumed (1 for invalid bytes, which decode to
// U+FFFD so malformed input still tokenizes deterministically).
inline std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto cb = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F); };
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    cp = ((b0 & 0x1Fu) << 6) | cb(1);
    return cp >= 0x80 ? 2 : (cp = 0xFFFD, 2);
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    cp = ((b0 & 0x0Fu) << 12) | (cb(1) << 6) | cb(2);
    return cp >= 0x800 ? 3 : (cp = 0xFFFD, 3);
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    cp = ((b0 & 0x07u) << 18) | (cb(1) << 12) | (cb(2) << 6) | cb(3);
    return (cp >= 0x10000 && cp <= 0x10FFFF) ? 4 : (cp = 0xFFFD, 4);
  }
  cp = 0xFFFD;
  return 1;
}

inline bool is_cjk_ideograph(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) ||   // unified ideographs
         (cp >= 0x3400 && cp <= 0x4DBF) ||   // extension A
         (cp >= 0xF900 && cp <= 0xFAFF);     // compatibility ideographs
}

inline bool is_word_codepoint(char32_t cp) {
  if ((cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
  if (cp >= 0x00C0 && cp <= 0x024F && cp != 0x00D7 && cp != 0x00F7) return true;  // Latin-1/Ext letters
  if (cp >= 0x0370 && cp <= 0x03FF) return true;                                  // Greek
  if (cp >= 0x0400 && cp <= 0x04FF) return true;                                  // Cyrillic
  if (cp >= 0x3040 && cp <= 0x30FF && cp != 0x30FB) return true;                  // kana
  if (cp >= 0xAC00 && cp <= 0xD7A3) return true;                                  // Hangul syllables
  return false;
}

inline void append_folded(std::string& out, std::string_view src, std::size_t begin, std::size_t end) {
  for (std::size_t k = begin; k < end; ++k) {
    char c = src[k];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
}

struct Token {
  std::string text;
  std::size_t begin = 0;  // byte span in the source string
  std::size_t end = 0;
};

inline std::vector<Token> tokenize_spans(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  std::size_t run_begin = std::string_view::npos;
  auto flush_run = [&](std::size_t end_at) {
    if (run_begin == std::string_view::npos) return;
    Token t;
    t.begin = run_begin;
    t.end = end_at;
    append_folded(t.text, text, run_begin, end_at);
    out.push_back(std::move(t));
    run_begin = std::string_view::npos;
  };
  while (i < text.size()) {
    char32_t cp = 0;
    std::size_t n = decode_utf8(text, i, cp);
    if (is_cjk_ideograph(cp)) {
      flush_run(i);
      out.push_back(Token{std::string(text.substr(i, n)), i, i + n});
    } else if (is_word_codepoint(cp)) {
      if (run_begin == std::string_view::npos) run_begin = i;
    } else {
      flush_run(i);
    }
    i += n;
  }
  flush_run(text.size());
  return out;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_spans(text)) out.push_back(std::move(t.text));
  return out;
}

// True when every byte of the value stays inside the placeholder alphabet
// [A-Z0-9_<>]; such values can collide with placeholder tokens themselves and
// are flagged by the sanitizer instead of being guaranteed leak-free.
inline bool placeholder_alphabet_only(std::string_view value) {
  if (value.empty()) return false;
  for (char c : value) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '<' || c == '>';
    if (!ok) return false;
  }
  return true;
}

}  // namespace maskgate
