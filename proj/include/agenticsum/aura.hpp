#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "agenticsum/attention.hpp"
#include "agenticsum/backend.hpp"
#include "agenticsum/error.hpp"

namespace agenticsum::aura {

inline constexpr double kDefaultEpsStab = 1e-8;

/// One summary sentence with its grounding score `a` (mean token AURA over
/// `token_steps`) and entailment flag `h` (true when not entailed).
struct SpanGrounding {
  std::size_t index = 0;
  std::string text;
  std::vector<std::size_t> token_steps;  // 0-based indices into the token list
  double a = 0.0;
  bool h = false;
  EntailmentVerdict verdict;

  bool operator==(const SpanGrounding&) const = default;
};

/// Share of attention each head spends on source positions, averaged over
/// heads: (1/H) sum_h [ sum_{i in input} A[h,i] / (sum_i A[h,i] + eps) ].
inline double token_aura(const StepAttention& step, double eps_stab = kDefaultEpsStab) {
  if (!(eps_stab > 0.0)) fail(ErrorKind::config, "eps_stab must be positive");
  step.validate();
  double acc = 0.0;
  for (std::size_t h = 0; h < step.heads; ++h) {
    double total = 0.0;
    for (std::size_t i = 0; i < step.length; ++i) total += step.at(h, i);
    double source = 0.0;
    for (std::size_t i : step.input_positions) source += step.at(h, i);
    acc += source / (total + eps_stab);
  }
  return acc / static_cast<double>(step.heads);
}

inline std::vector<double> token_auras(const GenerationResult& gen,
                                       double eps_stab = kDefaultEpsStab) {
  std::vector<double> out;
  out.reserve(gen.step_attentions.size());
  for (const auto& s : gen.step_attentions) out.push_back(token_aura(s, eps_stab));
  return out;
}

inline double span_aura(std::span<const double> token_scores,
                        std::span<const std::size_t> members) {
  if (members.empty()) fail(ErrorKind::structural, "span has no tokens");
  double sum = 0.0;
  for (std::size_t t : members) {
    if (t >= token_scores.size()) fail(ErrorKind::structural, "span token index out of range");
    sum += token_scores[t];
  }
  return sum / static_cast<double>(members.size());
}

inline double mean_grounding(std::span<const double> span_scores) {
  if (span_scores.empty()) fail(ErrorKind::degenerate, "summary has no spans");
  double sum = 0.0;
  for (double a : span_scores) sum += a;
  return sum / static_cast<double>(span_scores.size());
}

inline double mean_grounding(std::span<const SpanGrounding> spans) {
  std::vector<double> a;
  a.reserve(spans.size());
  for (const auto& s : spans) a.push_back(s.a);
  return mean_grounding(std::span<const double>(a));
}

}  // namespace agenticsum::aura
