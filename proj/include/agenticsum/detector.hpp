#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "agenticsum/aura.hpp"
#include "agenticsum/backend.hpp"
#include "agenticsum/error.hpp"
#include "agenticsum/prompts.hpp"
#include "agenticsum/text.hpp"
#include "agenticsum/utf8.hpp"

namespace agenticsum::detector {

inline constexpr double kDefaultTau = 0.5;

/// Case-folded, whitespace-collapsed, terminal punctuation stripped. Two
/// spans from different iterations are the same span iff their keys match.
inline std::string span_key(std::string_view span) {
  const auto folded = utf8::casefold(span);
  std::string out;
  bool pending_space = false;
  for (char c : folded) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  while (!out.empty() && std::string_view(".!?;:,").find(out.back()) != std::string_view::npos) {
    out.pop_back();
    while (!out.empty() && out.back() == ' ') out.pop_back();
  }
  return out;
}

struct FlaggedSpan {
  std::size_t index = 0;
  std::string text;
  std::string key;

  bool operator==(const FlaggedSpan&) const = default;
};

struct HallucinationSet {
  std::size_t iteration = 0;
  double tau = kDefaultTau;
  std::vector<FlaggedSpan> flagged;  // ascending span index

  bool empty() const noexcept { return flagged.empty(); }

  std::set<std::string> keys() const {
    std::set<std::string> out;
    for (const auto& f : flagged) out.insert(f.key);
    return out;
  }

  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    for (const auto& f : flagged) out.push_back(f.text);
    return out;
  }

  bool contains(std::size_t index) const {
    return std::any_of(flagged.begin(), flagged.end(),
                       [&](const FlaggedSpan& f) { return f.index == index; });
  }

  bool operator==(const HallucinationSet&) const = default;
};

/// Spans of `curr` whose identity does not occur in `prev`.
inline std::vector<std::string> new_spans(const HallucinationSet& curr,
                                          const HallucinationSet& prev) {
  const auto old = prev.keys();
  std::vector<std::string> out;
  for (const auto& k : curr.keys()) {
    if (!old.count(k)) out.push_back(k);
  }
  return out;
}

inline std::string build_entailment_prompt(std::string_view document, std::string_view span) {
  return prompts::render(prompts::kEntailmentTemplate,
                         {{"document", document}, {"summary", span}})
      .text;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Strips list bullets and markdown emphasis around a line: "- **Key:** v".
inline std::string_view strip_decoration(std::string_view s) {
  s = trim(s);
  while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '#' ||
                        s.front() == '>' || s.front() == ' ')) {
    s.remove_prefix(1);
  }
  return s;
}

// If `line` starts with `key` (case-insensitive) followed by optional text in
// parentheses and a colon, returns what follows the colon.
inline std::optional<std::string_view> key_value(std::string_view line, std::string_view key) {
  line = strip_decoration(line);
  if (line.size() < key.size() || lower(line.substr(0, key.size())) != lower(key)) {
    return std::nullopt;
  }
  auto rest = line.substr(key.size());
  rest = trim(rest);
  if (!rest.empty() && rest.front() == '(') {
    const auto close = rest.find(')');
    if (close == std::string_view::npos) return std::nullopt;
    rest = trim(rest.substr(close + 1));
  }
  while (!rest.empty() && rest.front() == '*') rest.remove_prefix(1);
  if (rest.empty() || rest.front() != ':') return std::nullopt;
  rest.remove_prefix(1);
  while (!rest.empty() && rest.front() == '*') rest.remove_prefix(1);
  return trim(rest);
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.emplace_back(line);
    pos = nl + 1;
  }
  return out;
}

// Quoted items of a bracketed list. Accepts "x", 'x', “x” and ``x''.
inline std::vector<std::string> quoted_items(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::string_view open, close;
    if (s.compare(i, 2, "``") == 0) {
      open = "``";
      close = "''";
    } else if (s.compare(i, 3, "\xE2\x80\x9C") == 0) {
      open = "\xE2\x80\x9C";
      close = "\xE2\x80\x9D";
    } else if (s[i] == '"') {
      open = "\"";
      close = "\"";
    } else if (s[i] == '\'') {
      open = "'";
      close = "'";
    } else {
      ++i;
      continue;
    }
    const auto start = i + open.size();
    const auto end = s.find(close, start);
    if (end == std::string_view::npos) break;
    out.emplace_back(s.substr(start, end - start));
    i = end + close.size();
  }
  return out;
}

}  // namespace detail

/// Reads the verdict grammar produced by the entailment prompt:
///   Entailment Label: Entailed | Not Entailed
///   Explanation: ...
///   Problematic Spans: ["...", ...]
inline EntailmentVerdict parse_entailment_response(std::string_view response) {
  const auto lines = detail::split_lines(response);
  std::optional<EntailmentLabel> label;
  EntailmentVerdict v;
  enum class Field { none, explanation, spans } field = Field::none;
  std::string spans_text;

  for (const auto& line : lines) {
    if (auto val = detail::key_value(line, "Entailment Label")) {
      if (label) continue;
      std::string value;
      for (char c : *val) {
        if (c != '`' && c != '*' && c != '"' && c != '\'') value.push_back(c);
      }
      const auto lv = detail::lower(detail::trim(value));
      if (lv.rfind("not entailed", 0) == 0) {
        label = EntailmentLabel::not_entailed;
      } else if (lv.rfind("entailed", 0) == 0) {
        label = EntailmentLabel::entailed;
      } else {
        throw ParseError("unknown entailment label '" + std::string(*val) + "'",
                         std::string(response));
      }
      field = Field::none;
    } else if (auto ex = detail::key_value(line, "Explanation")) {
      v.explanation = std::string(*ex);
      field = Field::explanation;
    } else if (auto sp = detail::key_value(line, "Problematic Spans")) {
      spans_text = std::string(*sp);
      field = Field::spans;
    } else if (field == Field::explanation && !detail::trim(line).empty()) {
      v.explanation += "\n" + std::string(detail::trim(line));
    } else if (field == Field::spans) {
      spans_text += "\n" + line;
    }
  }
  if (!label) throw ParseError("response has no entailment label", std::string(response));
  v.label = *label;
  if (v.label == EntailmentLabel::not_entailed) v.problematic_spans = detail::quoted_items(spans_text);
  return v;
}

/// The hallucination set: spans that are not entailed or whose grounding
/// falls below tau.
inline HallucinationSet flag_spans(const std::vector<aura::SpanGrounding>& spans, double tau,
                                   std::size_t iteration = 0) {
  if (!(tau >= 0.0 && tau <= 1.0)) fail(ErrorKind::config, "tau must lie in [0, 1]");
  HallucinationSet set;
  set.iteration = iteration;
  set.tau = tau;
  for (const auto& s : spans) {
    if (s.h || s.a < tau) set.flagged.push_back({s.index, s.text, span_key(s.text)});
  }
  return set;
}

struct DetectorConfig {
  double tau = kDefaultTau;
  double eps_stab = aura::kDefaultEpsStab;
};

struct Detection {
  std::vector<aura::SpanGrounding> spans;
  HallucinationSet hset;
};

/// Splits the summary into sentence spans, scores each span's grounding from
/// the generation's step attention, and asks the backend whether the span is
/// entailed by the full source document.
inline Detection detect(const GenerationResult& summary, const text::Document& document,
                        const DetectorConfig& cfg, const Backend& backend,
                        std::size_t iteration = 0) {
  const auto sentences = text::split_sentences(summary.text);
  if (sentences.empty()) fail(ErrorKind::degenerate, "summary is empty");
  if (summary.step_attentions.size() != summary.tokens.size()) {
    fail(ErrorKind::structural, "one step attention per generated token required");
  }

  std::vector<text::TokenOffset> offsets;
  offsets.reserve(summary.tokens.size());
  for (const auto& t : summary.tokens) offsets.push_back({t.start, t.end});
  const auto map =
      text::map_token_spans(offsets, sentences, utf8::length(summary.text));
  const auto scores = aura::token_auras(summary, cfg.eps_stab);

  Detection out;
  for (std::size_t j = 0; j < sentences.size(); ++j) {
    aura::SpanGrounding g;
    g.index = j;
    g.text = sentences[j].text;
    g.token_steps = map.sets[j];
    g.a = aura::span_aura(scores, g.token_steps);
    g.verdict = backend.entail(document.text, g.text,
                               build_entailment_prompt(document.text, g.text));
    g.h = g.verdict.label == EntailmentLabel::not_entailed;
    out.spans.push_back(std::move(g));
  }
  out.hset = flag_spans(out.spans, cfg.tau, iteration);
  return out;
}

}  // namespace agenticsum::detector
