#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agenticsum/attention.hpp"
#include "agenticsum/error.hpp"

namespace agenticsum {

struct DecodingParams {
  std::size_t max_new_tokens = 512;
  double temperature = 0.0;
  // Sentence budget for extractive backends; 0 means unlimited.
  std::size_t max_sentences = 0;

  bool operator==(const DecodingParams&) const = default;
};

/// A generation prompt. [source_begin, source_end) are char offsets of the
/// document content inside `prompt`; only those tokens count as source for
/// grounding. Instruction scaffolding lies outside the range.
struct GenerationRequest {
  std::string prompt;
  std::size_t source_begin = 0;
  std::size_t source_end = 0;
};

struct GeneratedToken {
  std::string text;
  std::size_t start = 0;  // char offsets into GenerationResult::text
  std::size_t end = 0;

  bool operator==(const GeneratedToken&) const = default;
};

struct GenerationResult {
  std::string text;
  std::vector<GeneratedToken> tokens;
  std::vector<StepAttention> step_attentions;

  bool operator==(const GenerationResult&) const = default;
};

enum class EntailmentLabel { entailed, not_entailed };

inline std::string_view to_string(EntailmentLabel l) {
  return l == EntailmentLabel::entailed ? "Entailed" : "Not Entailed";
}

struct EntailmentVerdict {
  EntailmentLabel label = EntailmentLabel::entailed;
  std::string explanation;
  std::vector<std::string> problematic_spans;
  std::optional<double> raw_score;

  bool operator==(const EntailmentVerdict&) const = default;
};

/// The only source of model behaviour. Implementations must be safe to call
/// concurrently from several pipelines.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual GenerationResult generate(const GenerationRequest& request,
                                    const DecodingParams& params) const = 0;

  /// Teacher-forced pass: attention for `output` as if it had been generated
  /// from `request`. Used to ground revised summaries.
  virtual GenerationResult score(const GenerationRequest& request,
                                 std::string_view output) const = 0;

  virtual AttentionTensor sentence_attention(std::string_view sentence) const = 0;

  /// `prompt` is the rendered entailment prompt; backends may use it or
  /// build their own from the raw fields.
  virtual EntailmentVerdict entail(std::string_view document, std::string_view span,
                                   std::string_view prompt) const = 0;

  virtual std::string revise(std::string_view document, std::string_view summary,
                             const std::vector<std::string>& flagged_spans,
                             std::string_view prompt) const = 0;

  /// Stable identity recorded in run manifests.
  virtual std::string identity() const = 0;
};

}  // namespace agenticsum
