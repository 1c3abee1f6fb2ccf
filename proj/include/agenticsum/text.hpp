#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agenticsum/error.hpp"
#include "agenticsum/utf8.hpp"

namespace agenticsum::text {

/// One sentence of a parent text. Char offsets count Unicode code points;
/// byte offsets index the UTF-8 encoding. Both are half-open.
struct SentenceUnit {
  std::size_t index = 0;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;
  std::string text;

  bool operator==(const SentenceUnit&) const = default;
};

struct Document {
  std::string id;
  std::string text;
  std::vector<SentenceUnit> sentences;
};

struct TokenOffset {
  std::size_t char_start = 0;
  std::size_t char_end = 0;
};

/// Per-sentence token index sets, one entry per sentence (possibly empty).
struct SpanIndexMap {
  std::vector<std::vector<std::size_t>> sets;
};

/// Period-terminated words that never end a sentence. Compared case-insensitively.
inline constexpr std::array<std::string_view, 8> kAbbreviations = {
    "dr.", "mr.", "ms.", "mrs.", "vs.", "e.g.", "i.e.", "pt."};

namespace detail {

inline bool is_terminator(char32_t c) { return c == U'.' || c == U'?' || c == U'!'; }

inline bool is_closer(char32_t c) {
  return c == U'"' || c == U'\'' || c == U')' || c == U']' || c == U'}' || c == 0x2019 ||
         c == 0x201D;
}

inline bool is_abbreviation(const std::u32string& cs, std::size_t lo, std::size_t dot) {
  std::size_t b = dot;
  while (b > lo && !utf8::is_space(cs[b - 1])) --b;
  std::string word;
  for (std::size_t i = b; i <= dot; ++i) utf8::append(word, utf8::fold(cs[i]));
  // Leading punctuation such as "(" does not belong to the word.
  while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '[')) {
    word.erase(word.begin());
  }
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

// "<TAG> value" lines, as in structured clinical note headers.
inline bool is_header_line(const std::u32string& cs, std::size_t lo, std::size_t hi) {
  while (lo < hi && utf8::is_space(cs[lo])) ++lo;
  if (lo >= hi || cs[lo] != U'<') return false;
  std::size_t i = lo + 1;
  if (i >= hi || !((cs[i] >= U'A' && cs[i] <= U'Z') || (cs[i] >= U'a' && cs[i] <= U'z'))) {
    return false;
  }
  while (i < hi && (utf8::is_word(cs[i]) || cs[i] == U'-' || cs[i] == U' ')) ++i;
  return i < hi && cs[i] == U'>';
}

struct Range {
  std::size_t lo;
  std::size_t hi;
  bool header;
};

inline std::vector<Range> regions(const std::u32string& cs) {
  std::vector<Range> out;
  std::optional<std::size_t> open;
  std::size_t open_end = 0;
  auto close = [&] {
    if (open) out.push_back({*open, open_end, false});
    open.reset();
  };
  std::size_t ls = 0;
  while (ls <= cs.size()) {
    std::size_t le = ls;
    while (le < cs.size() && cs[le] != U'\n') ++le;
    bool blank = true;
    for (std::size_t i = ls; i < le; ++i) {
      if (!utf8::is_space(cs[i])) {
        blank = false;
        break;
      }
    }
    if (blank) {
      close();
    } else if (is_header_line(cs, ls, le)) {
      close();
      out.push_back({ls, le, true});
    } else {
      if (!open) open = ls;
      open_end = le;
    }
    if (le == cs.size()) break;
    ls = le + 1;
  }
  close();
  return out;
}

}  // namespace detail

/// Rule-based sentence splitter. Boundaries: '.', '?' or '!' (plus any
/// closing quotes or brackets) followed by whitespace and an uppercase letter,
/// or by the end of a block. Blank lines end a block; "<TAG> value" header
/// lines are sentences of their own. Words in kAbbreviations never split.
inline std::vector<SentenceUnit> split_sentences(std::string_view text) {
  const auto dec = utf8::decode(text);
  const auto& cs = dec.chars;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;

  auto emit = [&](std::size_t lo, std::size_t hi) {
    while (lo < hi && utf8::is_space(cs[lo])) ++lo;
    while (hi > lo && utf8::is_space(cs[hi - 1])) --hi;
    if (lo < hi) ranges.emplace_back(lo, hi);
  };

  for (const auto& region : detail::regions(cs)) {
    if (region.header) {
      emit(region.lo, region.hi);
      continue;
    }
    std::size_t start = region.lo;
    std::size_t i = region.lo;
    while (i < region.hi) {
      if (!detail::is_terminator(cs[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < region.hi && detail::is_terminator(cs[j])) ++j;
      const bool single_dot = (j == i + 1 && cs[i] == U'.');
      while (j < region.hi && detail::is_closer(cs[j])) ++j;
      if (single_dot && detail::is_abbreviation(cs, start, i)) {
        i = j;
        continue;
      }
      std::size_t k = j;
      while (k < region.hi && utf8::is_space(cs[k])) ++k;
      const bool at_end = k == region.hi;
      const bool boundary = at_end || (k > j && utf8::is_upper(cs[k]));
      if (boundary) {
        emit(start, j);
        start = k;
      }
      i = j;
    }
    emit(start, region.hi);
  }

  std::vector<SentenceUnit> out;
  out.reserve(ranges.size());
  for (const auto& [lo, hi] : ranges) {
    SentenceUnit s;
    s.index = out.size();
    s.char_start = lo;
    s.char_end = hi;
    s.byte_start = dec.byte_offsets[lo];
    s.byte_end = dec.byte_offsets[hi];
    s.text = std::string(text.substr(s.byte_start, s.byte_end - s.byte_start));
    out.push_back(std::move(s));
  }
  return out;
}

inline Document make_document(std::string id, std::string text) {
  Document d{std::move(id), std::move(text), {}};
  d.sentences = split_sentences(d.text);
  return d;
}

/// Text outside the sentences: separators()[0] precedes the first sentence,
/// separators()[j] sits between sentence j-1 and j, and the last entry trails.
inline std::vector<std::string> separators(std::string_view text,
                                           const std::vector<SentenceUnit>& sentences) {
  std::vector<std::string> out;
  out.reserve(sentences.size() + 1);
  std::size_t pos = 0;
  for (const auto& s : sentences) {
    out.emplace_back(text.substr(pos, s.byte_start - pos));
    pos = s.byte_end;
  }
  out.emplace_back(text.substr(std::min(pos, text.size())));
  return out;
}

struct LexToken {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  bool word = false;  // false for a single punctuation or symbol char
};

/// Lexical tokens: maximal runs of word chars, or single other non-space chars.
inline std::vector<LexToken> lex(std::string_view text) {
  const auto dec = utf8::decode(text);
  const auto& cs = dec.chars;
  std::vector<LexToken> out;
  std::size_t i = 0;
  while (i < cs.size()) {
    if (utf8::is_space(cs[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    const bool word = utf8::is_word(cs[i]);
    if (word) {
      while (j < cs.size() && utf8::is_word(cs[j])) ++j;
    }
    const auto b0 = dec.byte_offsets[i];
    out.push_back({std::string(text.substr(b0, dec.byte_offsets[j] - b0)), i, j, word});
    i = j;
  }
  return out;
}

/// A token belongs to the sentence containing its char_start. Tokens starting
/// in inter-sentence whitespace go to the sentence they overlap, else to the
/// preceding sentence, else to the first one. Zero-width tokens belong to none.
inline SpanIndexMap map_token_spans(const std::vector<TokenOffset>& tokens,
                                    const std::vector<SentenceUnit>& sentences,
                                    std::size_t text_length) {
  SpanIndexMap map;
  map.sets.resize(sentences.size());
  std::size_t prev_end = 0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto& tok = tokens[t];
    if (tok.char_end < tok.char_start || tok.char_end > text_length) {
      fail(ErrorKind::structural, "token " + std::to_string(t) + " extends past text length");
    }
    if (tok.char_start < prev_end) {
      fail(ErrorKind::structural, "token offsets must be sorted and non-overlapping");
    }
    prev_end = tok.char_end;
    if (tok.char_start == tok.char_end || sentences.empty()) continue;

    auto it = std::upper_bound(
        sentences.begin(), sentences.end(), tok.char_start,
        [](std::size_t pos, const SentenceUnit& s) { return pos < s.char_start; });
    std::size_t target = 0;
    if (it != sentences.begin() && tok.char_start < std::prev(it)->char_end) {
      target = static_cast<std::size_t>(std::prev(it) - sentences.begin());
    } else if (it != sentences.end() && it->char_start < tok.char_end) {
      target = static_cast<std::size_t>(it - sentences.begin());
    } else if (it != sentences.begin()) {
      target = static_cast<std::size_t>(std::prev(it) - sentences.begin());
    }
    map.sets[target].push_back(t);
  }
  return map;
}

}  // namespace agenticsum::text
