#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace agenticsum::utf8 {

/// Decoded view of a UTF-8 string: one code point per char index plus the
/// byte offset where each char starts (size() + 1 entries).
/// Invalid bytes decode to U+FFFD and occupy one char each.
struct Decoded {
  std::u32string chars;
  std::vector<std::size_t> byte_offsets;

  std::size_t size() const noexcept { return chars.size(); }
};

inline Decoded decode(std::string_view s) {
  Decoded out;
  out.chars.reserve(s.size());
  out.byte_offsets.reserve(s.size() + 1);
  std::size_t i = 0;
  while (i < s.size()) {
    out.byte_offsets.push_back(i);
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.chars.push_back(char32_t{0xFFFD});
      i += 1;
    } else {
      out.chars.push_back(cp);
      i += len;
    }
  }
  out.byte_offsets.push_back(s.size());
  return out;
}

inline void append(std::string& out, char32_t cp) {
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

inline std::size_t length(std::string_view s) { return decode(s).size(); }

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' ||
         c == 0xA0 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x3000;
}

// Fixed tables rather than <cwctype>, whose answers depend on the process locale.
inline bool is_upper(char32_t c) {
  return (c >= U'A' && c <= U'Z') || (c >= 0xC0 && c <= 0xDE && c != 0xD7) ||
         (c >= 0x391 && c <= 0x3A9) || (c >= 0x410 && c <= 0x42F);
}

inline bool is_word(char32_t c) {
  return (c >= U'0' && c <= U'9') || (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') ||
         c == U'_' || (c >= 0xC0 && c != 0xD7 && c != 0xF7 && !is_space(c) &&
                       !(c >= 0x2010 && c <= 0x206F) && !(c >= 0x3000 && c <= 0x303F));
}

inline char32_t fold(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  if (c >= 0x391 && c <= 0x3A9) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  return c;
}

inline std::string casefold(std::string_view s) {
  const auto d = decode(s);
  std::string out;
  out.reserve(s.size());
  for (char32_t c : d.chars) append(out, fold(c));
  return out;
}

}  // namespace agenticsum::utf8
