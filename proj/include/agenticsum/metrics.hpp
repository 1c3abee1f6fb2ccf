#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agenticsum/detector.hpp"
#include "agenticsum/error.hpp"
#include "agenticsum/prompts.hpp"
#include "agenticsum/text.hpp"
#include "agenticsum/utf8.hpp"

namespace agenticsum::metrics {

/// Case-folded tokens split at whitespace and punctuation; every punctuation
/// char is a token of its own.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  for (auto& t : text::lex(s)) out.push_back(utf8::casefold(t.text));
  return out;
}

namespace detail {

using Ngram = std::vector<std::string>;

inline std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& toks,
                                                 std::size_t n) {
  std::map<Ngram, std::size_t> out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++out[Ngram(toks.begin() + static_cast<std::ptrdiff_t>(i),
                toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

}  // namespace detail

/// Clipped n-gram precision as (matched, total).
inline std::pair<std::size_t, std::size_t> clipped_precision(
    const std::vector<std::string>& hyp, const std::vector<std::string>& ref, std::size_t n) {
  const auto h = detail::ngram_counts(hyp, n);
  const auto r = detail::ngram_counts(ref, n);
  std::size_t matched = 0, total = 0;
  for (const auto& [g, c] : h) {
    total += c;
    const auto it = r.find(g);
    if (it != r.end()) matched += std::min(c, it->second);
  }
  return {matched, total};
}

/// Sentence-level BLEU-n (n = 1 or 2) without smoothing, scaled to [0, 100].
inline double bleu(std::string_view hypothesis, std::string_view reference, int n) {
  if (n != 1 && n != 2) fail(ErrorKind::config, "BLEU order must be 1 or 2");
  const auto hyp = tokenize(hypothesis);
  const auto ref = tokenize(reference);
  if (hyp.empty()) return 0.0;
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto [m, t] = clipped_precision(hyp, ref, static_cast<std::size_t>(k));
    if (m == 0 || t == 0) return 0.0;
    log_sum += std::log(static_cast<double>(m) / static_cast<double>(t));
  }
  const double c = static_cast<double>(hyp.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * bp * std::exp(log_sum / n);
}

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = a[i - 1] == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

inline RougeScore rouge_l(std::string_view hypothesis, std::string_view reference) {
  const auto hyp = tokenize(hypothesis);
  const auto ref = tokenize(reference);
  RougeScore s;
  if (hyp.empty() || ref.empty()) return s;
  const double lcs = static_cast<double>(lcs_length(hyp, ref));
  s.precision = 100.0 * lcs / static_cast<double>(hyp.size());
  s.recall = 100.0 * lcs / static_cast<double>(ref.size());
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for fewer than two values
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

// ---- LLM judge ----

inline std::string build_judge_prompt(std::string_view document, std::string_view summary) {
  return prompts::render(prompts::kJudgeTemplate,
                         {{"SOURCE_DOCUMENT", document}, {"GENERATED_SUMMARY", summary}})
      .text;
}

struct JudgeScores {
  int hallucination = 0;
  int factual = 0;
  int complete = 0;
  int coherent = 0;

  bool operator==(const JudgeScores&) const = default;
};

/// Scans for the four "Key: N" lines anywhere in the text; the first
/// occurrence of each key wins. Values must be integers in [1, 5].
inline JudgeScores parse_judge_scores(std::string_view response) {
  struct Slot {
    std::string_view key;
    int JudgeScores::*field;
  };
  static constexpr Slot slots[] = {{"Hallucination", &JudgeScores::hallucination},
                                   {"Factual", &JudgeScores::factual},
                                   {"Complete", &JudgeScores::complete},
                                   {"Coherent", &JudgeScores::coherent}};
  JudgeScores out;
  bool seen[4] = {false, false, false, false};
  for (const auto& line : detector::detail::split_lines(response)) {
    for (std::size_t k = 0; k < 4; ++k) {
      if (seen[k]) continue;
      const auto val = detector::detail::key_value(line, slots[k].key);
      if (!val) continue;
      const auto v = detector::detail::trim(*val);
      int n = 0;
      bool ok = !v.empty() && v.size() <= 3;
      for (char c : v) {
        if (c < '0' || c > '9') ok = false;
        if (ok) n = n * 10 + (c - '0');
      }
      if (!ok) {
        throw Error(ErrorKind::validation,
                    std::string(slots[k].key) + " is not an integer: '" + std::string(v) + "'");
      }
      if (n < 1 || n > 5) {
        throw Error(ErrorKind::validation,
                    std::string(slots[k].key) + " = " + std::to_string(n) + " is outside 1-5");
      }
      out.*(slots[k].field) = n;
      seen[k] = true;
    }
  }
  for (std::size_t k = 0; k < 4; ++k) {
    if (!seen[k]) {
      throw ParseError("judge response lacks '" + std::string(slots[k].key) + "'",
                       std::string(response));
    }
  }
  return out;
}

}  // namespace agenticsum::metrics
