#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "agenticsum/attention.hpp"
#include "agenticsum/backend.hpp"
#include "agenticsum/error.hpp"
#include "agenticsum/text.hpp"

namespace agenticsum::focus {

enum class Scorer { verbatim, received };

inline std::string_view to_string(Scorer s) {
  return s == Scorer::verbatim ? "verbatim" : "received";
}

inline Scorer parse_scorer(std::string_view s) {
  if (s == "verbatim") return Scorer::verbatim;
  if (s == "received") return Scorer::received;
  fail(ErrorKind::config, "unknown scorer '" + std::string(s) + "'");
}

struct SalienceScore {
  std::size_t sentence_index = 0;
  double beta = 0.0;

  bool operator==(const SalienceScore&) const = default;
};

/// Sentence importance: total attention mass divided by H*T. For attention
/// whose rows are normalized this is identically 1.
inline double salience_score(const AttentionTensor& a) {
  a.validate();
  if (a.tokens == 0 || a.heads == 0) fail(ErrorKind::structural, "empty sentence attention");
  double sum = 0.0;
  for (double w : a.weights) sum += w;
  return sum / (static_cast<double>(a.heads) * static_cast<double>(a.tokens));
}

/// Attention mass each token receives, summed over heads and queries and
/// divided by H*T.
inline std::vector<double> received_mass(const AttentionTensor& a) {
  a.validate();
  if (a.tokens == 0 || a.heads == 0) fail(ErrorKind::structural, "empty sentence attention");
  std::vector<double> mass(a.tokens, 0.0);
  for (std::size_t h = 0; h < a.heads; ++h)
    for (std::size_t i = 0; i < a.tokens; ++i)
      for (std::size_t k = 0; k < a.tokens; ++k) mass[k] += a.at(h, i, k);
  const double norm = static_cast<double>(a.heads) * static_cast<double>(a.tokens);
  for (double& m : mass) m /= norm;
  return mass;
}

/// Peak received mass over tokens; varies with attention shape even when
/// every row is normalized.
inline double salience_score_received(const AttentionTensor& a) {
  const auto mass = received_mass(a);
  return *std::max_element(mass.begin(), mass.end());
}

inline double score_with(Scorer scorer, const AttentionTensor& a) {
  return scorer == Scorer::verbatim ? salience_score(a) : salience_score_received(a);
}

/// k = clamp(floor(r*m), 1, m).
inline std::size_t retained_count(double r, std::size_t m) {
  if (!(r > 0.0 && r <= 1.0)) fail(ErrorKind::config, "retention ratio must lie in (0, 1]");
  if (m == 0) fail(ErrorKind::precondition, "document has no sentences");
  // The nudge keeps products such as 0.29 * 100 from flooring to 28.
  const auto k = static_cast<std::size_t>(std::floor(r * static_cast<double>(m) + 1e-9));
  return std::clamp<std::size_t>(k, 1, m);
}

/// Indices ordered by descending score, ties toward the earlier sentence.
inline std::vector<std::size_t> rank(const std::vector<SalienceScore>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a].beta > scores[b].beta;
  });
  return order;
}

struct CompressedDocument {
  text::Document source;
  std::vector<text::SentenceUnit> kept;  // original order
  double retention_ratio = 1.0;
  std::size_t k = 0;
  std::vector<SalienceScore> scores;     // one per source sentence

  std::vector<std::size_t> kept_indices() const {
    std::vector<std::size_t> out;
    out.reserve(kept.size());
    for (const auto& s : kept) out.push_back(s.index);
    return out;
  }

  /// Kept sentences, each followed by the separator that followed it in the
  /// source, so header lines keep their line breaks. Keeping every sentence
  /// reproduces the source text exactly.
  std::string text() const {
    const auto seps = text::separators(source.text, source.sentences);
    const std::size_t m = source.sentences.size();
    std::string out;
    for (std::size_t n = 0; n < kept.size(); ++n) {
      const std::size_t j = kept[n].index;
      if (n == 0 && j == 0) out += seps[0];
      if (n > 0) out += seps[kept[n - 1].index + 1];
      out += kept[n].text;
    }
    if (!kept.empty() && kept.back().index + 1 == m) out += seps[m];
    return out;
  }
};

/// Selects the top-k sentences from already computed scores.
inline CompressedDocument select(const text::Document& doc, double r,
                                 std::vector<SalienceScore> scores) {
  const std::size_t m = doc.sentences.size();
  const std::size_t k = retained_count(r, m);
  if (scores.size() != m) fail(ErrorKind::structural, "one salience score per sentence required");
  const auto order = rank(scores);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(chosen.begin(), chosen.end());

  CompressedDocument out;
  out.source = doc;
  out.retention_ratio = r;
  out.k = k;
  out.scores = std::move(scores);
  for (std::size_t j : chosen) out.kept.push_back(doc.sentences[j]);
  return out;
}

/// Scores every sentence with one sentence_attention call and keeps the top k.
inline CompressedDocument compress(const text::Document& doc, double r, Scorer scorer,
                                   const Backend& backend) {
  if (doc.sentences.empty()) fail(ErrorKind::precondition, "cannot compress an empty document");
  retained_count(r, doc.sentences.size());
  std::vector<SalienceScore> scores;
  scores.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) {
    scores.push_back({s.index, score_with(scorer, backend.sentence_attention(s.text))});
  }
  return select(doc, r, std::move(scores));
}

}  // namespace agenticsum::focus
