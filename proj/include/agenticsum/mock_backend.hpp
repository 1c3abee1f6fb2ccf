#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "agenticsum/backend.hpp"
#include "agenticsum/focus.hpp"
#include "agenticsum/text.hpp"
#include "agenticsum/utf8.hpp"

namespace agenticsum {

namespace mock_detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix(h ^ splitmix(v)); }

// Top 53 bits as a double in [0, 1).
inline double unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

inline void softmax_row(double* row, std::size_t n) {
  if (n == 0) return;
  const double hi = *std::max_element(row, row + n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    row[i] = std::exp(row[i] - hi);
    sum += row[i];
  }
  for (std::size_t i = 0; i < n; ++i) row[i] /= sum;
}

inline const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",     "an",    "the",   "and",   "or",    "but",   "nor",   "of",    "in",
      "on",    "at",    "to",    "for",   "from",  "by",    "with",  "without", "as",
      "into",  "onto",  "over",  "under", "about", "than",  "then",  "that",  "this",
      "these", "those", "it",    "its",   "is",    "are",   "was",   "were",  "be",
      "been",  "being", "am",    "has",   "have",  "had",   "do",    "does",  "did",
      "he",    "she",   "him",   "her",   "his",   "hers",  "they",  "them",  "their",
      "we",    "us",    "our",   "you",   "your",  "i",     "me",    "my",    "who",
      "whom",  "which", "what",  "when",  "where", "while", "there", "here",  "so",
      "such",  "also",  "very",  "s",     "t",     "not",   "no",    "any",   "all",
      "both",  "each",  "some",  "if",    "because", "until", "after", "before", "during",
      "either", "neither", "up",  "down",  "out",   "off",   "again", "further",
      "once",  "only",  "own",   "same",  "too",   "can",   "will",  "just",  "should",
      "would", "could", "may",   "might", "must",  "shall"};
  return words;
}

}  // namespace mock_detail

struct MockOptions {
  std::uint64_t seed = 0;
  std::size_t heads = 4;
  std::size_t context_limit = 4096;  // prompt tokens
  // Sentences appended to every generate() output, for fabrication fixtures.
  std::vector<std::string> injected;
  // revise() appends a fresh unsupported sentence instead of deleting.
  bool adversarial = false;
};

/// Deterministic stand-in model. Every operation is a pure function of its
/// inputs and MockOptions:
///  - sentence_attention: seeded hash scores, row-softmaxed per head;
///  - generate: extractive copy of the highest-salience source sentences;
///  - step attention: each output token attends to source tokens with the
///    same case-folded text, otherwise to scaffolding and its own prefix;
///  - entail: Not Entailed iff a content word of the span is absent from
///    the document;
///  - revise: deletes flagged spans that are not entailed.
class MockBackend final : public Backend {
 public:
  MockBackend() = default;
  explicit MockBackend(MockOptions options) : opt_(std::move(options)) {}

  const MockOptions& options() const noexcept { return opt_; }

  GenerationResult generate(const GenerationRequest& request,
                            const DecodingParams& params) const override {
    if (request.prompt.empty()) fail(ErrorKind::precondition, "prompt must be non-empty");
    check_capacity(request.prompt);
    const auto source = source_text(request);
    const auto sentences = text::split_sentences(source);

    std::vector<focus::SalienceScore> scores;
    for (const auto& s : sentences) {
      scores.push_back({s.index, focus::salience_score_received(sentence_attention(s.text))});
    }
    auto order = focus::rank(scores);
    if (params.max_sentences > 0 && order.size() > params.max_sentences) {
      order.resize(params.max_sentences);
    }
    std::sort(order.begin(), order.end());

    std::string out;
    for (std::size_t j : order) append_sentence(out, sentences[j].text);
    for (const auto& s : opt_.injected) append_sentence(out, s);

    const auto toks = text::lex(out);
    if (toks.size() > params.max_new_tokens) {
      const auto dec = utf8::decode(out);
      out.resize(dec.byte_offsets[toks[params.max_new_tokens - 1].char_end]);
    }
    return score(request, out);
  }

  GenerationResult score(const GenerationRequest& request,
                         std::string_view output) const override {
    check_capacity(request.prompt);
    const auto prompt_tokens = text::lex(request.prompt);
    const auto out_tokens = text::lex(output);
    const std::size_t p = prompt_tokens.size();

    std::vector<std::string> folded;
    folded.reserve(p + out_tokens.size());
    std::vector<char> is_input(p + out_tokens.size(), 0);
    std::vector<std::size_t> input_positions;
    for (std::size_t i = 0; i < p; ++i) {
      folded.push_back(utf8::casefold(prompt_tokens[i].text));
      if (prompt_tokens[i].char_start >= request.source_begin &&
          prompt_tokens[i].char_end <= request.source_end) {
        is_input[i] = 1;
        input_positions.push_back(i);
      }
    }

    GenerationResult res;
    res.text = std::string(output);
    const std::uint64_t base = mock_detail::mix(opt_.seed, mock_detail::fnv1a("step"));
    for (std::size_t t = 0; t < out_tokens.size(); ++t) {
      const auto& tok = out_tokens[t];
      res.tokens.push_back({tok.text, tok.char_start, tok.char_end});
      const auto word = utf8::casefold(tok.text);

      StepAttention sa;
      sa.step = t + 1;
      sa.heads = opt_.heads;
      sa.length = p + t;
      sa.input_positions = input_positions;
      sa.weights.assign(sa.heads * sa.length, 0.0);

      bool matched = false;
      for (std::size_t i : input_positions) {
        if (folded[i] == word) {
          matched = true;
          break;
        }
      }
      const std::uint64_t step_key =
          mock_detail::mix(mock_detail::mix(base, t), mock_detail::fnv1a(word));
      for (std::size_t h = 0; h < sa.heads; ++h) {
        double* row = sa.weights.data() + h * sa.length;
        const std::uint64_t head_key = mock_detail::mix(step_key, h);
        for (std::size_t i = 0; i < sa.length; ++i) {
          double s = mock_detail::unit(mock_detail::mix(head_key, i));
          const bool target = matched ? (is_input[i] && folded[i] == word) : !is_input[i];
          if (target) s += kFocusBonus;
          row[i] = s;
        }
        mock_detail::softmax_row(row, sa.length);
      }
      res.step_attentions.push_back(std::move(sa));
      folded.push_back(word);
    }
    return res;
  }

  AttentionTensor sentence_attention(std::string_view sentence) const override {
    const auto toks = text::lex(sentence);
    if (toks.empty()) fail(ErrorKind::precondition, "sentence must be non-empty");
    AttentionTensor a(opt_.heads, toks.size());
    const std::uint64_t key =
        mock_detail::mix(mock_detail::mix(opt_.seed, mock_detail::fnv1a("sentence")),
                         mock_detail::fnv1a(sentence));
    for (std::size_t h = 0; h < a.heads; ++h) {
      for (std::size_t i = 0; i < a.tokens; ++i) {
        const std::uint64_t row_key = mock_detail::mix(mock_detail::mix(key, h), i);
        double* row = &a.at(h, i, 0);
        for (std::size_t k = 0; k < a.tokens; ++k) {
          row[k] = mock_detail::unit(mock_detail::mix(row_key, k));
        }
        mock_detail::softmax_row(row, a.tokens);
      }
    }
    return a;
  }

  EntailmentVerdict entail(std::string_view document, std::string_view span,
                           std::string_view /*prompt*/) const override {
    if (document.empty() || span.empty()) {
      fail(ErrorKind::precondition, "document and span must be non-empty");
    }
    std::unordered_set<std::string> vocab;
    for (const auto& t : text::lex(document)) {
      if (t.word) vocab.insert(utf8::casefold(t.text));
    }

    // Walk word tokens; runs of unsupported content words (allowing
    // stopwords between them) form candidate problematic phrases.
    const auto toks = text::lex(span);
    std::size_t content = 0;
    std::size_t supported = 0;
    std::size_t best_lo = 0, best_hi = 0, run_lo = 0, run_hi = 0;
    bool in_run = false;
    auto close_run = [&] {
      if (in_run && run_hi - run_lo > best_hi - best_lo) {
        best_lo = run_lo;
        best_hi = run_hi;
      }
      in_run = false;
    };
    for (const auto& t : toks) {
      if (!t.word) continue;
      const auto w = utf8::casefold(t.text);
      if (mock_detail::stopwords().count(w)) continue;
      ++content;
      if (vocab.count(w)) {
        ++supported;
        close_run();
      } else {
        if (!in_run) run_lo = t.char_start;
        in_run = true;
        run_hi = t.char_end;
      }
    }
    close_run();

    EntailmentVerdict v;
    v.raw_score = content == 0 ? 1.0 : static_cast<double>(supported) / static_cast<double>(content);
    if (supported == content) {
      v.label = EntailmentLabel::entailed;
      v.explanation = "Every content word of the summary appears in the document.";
      return v;
    }
    const auto dec = utf8::decode(span);
    const auto b0 = dec.byte_offsets[best_lo];
    std::string phrase(span.substr(b0, dec.byte_offsets[best_hi] - b0));
    v.label = EntailmentLabel::not_entailed;
    v.explanation = "The document does not mention \"" + phrase + "\".";
    v.problematic_spans.push_back(std::move(phrase));
    return v;
  }

  std::string revise(std::string_view document, std::string_view summary,
                     const std::vector<std::string>& flagged_spans,
                     std::string_view prompt) const override {
    if (flagged_spans.empty()) fail(ErrorKind::precondition, "revise requires flagged spans");
    std::string out(summary);
    if (opt_.adversarial) {
      const auto n = text::split_sentences(summary).size();
      append_sentence(out, "Unverified finding zq" + std::to_string(n) + " was reported.");
      return out;
    }
    for (const auto& span : flagged_spans) {
      if (span.empty()) continue;
      if (entail(document, span, prompt).label == EntailmentLabel::entailed) continue;
      const auto pos = out.find(span);
      if (pos == std::string::npos) continue;
      std::size_t lo = pos;
      std::size_t hi = pos + span.size();
      while (hi < out.size() && is_ascii_space(out[hi])) ++hi;
      if (hi == out.size()) {
        while (lo > 0 && is_ascii_space(out[lo - 1])) --lo;
      }
      out.erase(lo, hi - lo);
    }
    return out;
  }

  std::string identity() const override {
    return "mock/1 seed=" + std::to_string(opt_.seed) + " heads=" + std::to_string(opt_.heads) +
           (opt_.adversarial ? " adversarial" : "") +
           (opt_.injected.empty() ? "" : " injected=" + std::to_string(opt_.injected.size()));
  }

  /// Additive score given to attended positions before the softmax.
  static constexpr double kFocusBonus = 12.0;

 private:
  static bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

  // Header lines keep their own line so they stay separate sentences.
  static void append_sentence(std::string& out, std::string_view s) {
    if (!out.empty()) {
      const bool terminated = std::string_view(".?!\"')]").find(out.back()) != std::string_view::npos;
      out += terminated ? ' ' : '\n';
    }
    out += s;
  }

  void check_capacity(std::string_view prompt) const {
    const auto n = text::lex(prompt).size();
    if (n > opt_.context_limit) {
      fail(ErrorKind::capacity, "prompt has " + std::to_string(n) + " tokens, limit is " +
                                    std::to_string(opt_.context_limit));
    }
  }

  static std::string source_text(const GenerationRequest& request) {
    const auto dec = utf8::decode(request.prompt);
    if (request.source_begin > request.source_end || request.source_end > dec.size()) {
      fail(ErrorKind::structural, "source range outside prompt");
    }
    const auto b0 = dec.byte_offsets[request.source_begin];
    return request.prompt.substr(b0, dec.byte_offsets[request.source_end] - b0);
  }

  MockOptions opt_;
};

}  // namespace agenticsum
