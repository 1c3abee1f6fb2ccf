#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>

#include "agenticsum/error.hpp"
#include "agenticsum/utf8.hpp"

namespace agenticsum::prompts {

// Each template is also shipped verbatim under assets/prompts/<name>.txt.

inline constexpr std::string_view kDraftVersion = "draft-prompt/1";
inline constexpr std::string_view kDraftTemplate =
    R"(Summarize the following clinical note. Use only information that is explicitly stated in the note.

Note:
{document}

Summary:
)";

inline constexpr std::string_view kEntailmentVersion = "entailment-prompt/1";
inline constexpr std::string_view kEntailmentTemplate =
    R"(You will be provided with:
- A clinical source document
- A machine-generated summary

Your task is to assess whether the summary is strictly entailed by the source document.

Definition of Entailment: A statement is entailed only if it is explicitly and unambiguously stated in the document. Any statement that requires inference, clinical reasoning, or prior medical knowledge should be treated as Not Entailed.

Key Instructions:
- DO NOT infer or assume missing information.
- DO NOT use clinical knowledge, reasoning, or common sense.
- DO NOT validate based on plausibility, typicality, or tone.
- DO NOT guess what the author likely meant.

You must treat the document as the only source of ground truth.

Document: {document}

Proposed Summary: {summary}

Output Format:
- Entailment Label: Entailed or Not Entailed
- Explanation: Justify your label with direct references to the document.
- Problematic Spans (if any): List the summary phrases not directly supported by the source.
)";

inline constexpr std::string_view kFixVersion = "fix-prompt/1";
inline constexpr std::string_view kFixTemplate =
    R"(You are revising a clinical summary so that every statement is supported by the source document.

Source document:
{document}

Current summary:
{summary}

Flagged spans:
{flagged}

Instructions:
- Revise ONLY the flagged spans listed above. Remove each one, or correct it using information explicitly stated in the source document.
- Preserve every other part of the summary verbatim and in the same order.
- Do not add information that is not explicitly stated in the source document.
- Return the full revised summary and nothing else.

Revised summary:
)";

inline constexpr std::string_view kJudgeVersion = "judge-prompt/1";
inline constexpr std::string_view kJudgeTemplate =
    R"(Task: Evaluate the generated medical summary against the source clinical document. Assign an integer score from 1 to 5 for each criterion defined below.

Source Document:
{SOURCE_DOCUMENT}

Generated Summary:
{GENERATED_SUMMARY}

Evaluation Criteria (1-5 scale):
- Hallucination: Degree of unsupported or fabricated content (1 = no hallucination; 5 = major fabrications)
- Factual Consistency: Faithfulness of statements to the source document (1 = highly inaccurate; 5 = fully accurate)
- Completeness: Coverage of core clinical information (1 = key information missing; 5 = fully comprehensive)
- Coherence: Fluency and logical organization of the summary (1 = poorly written; 5 = highly coherent)

Output Format:
Return the scores using the following strict key-value format, with no additional text:

Hallucination: X
Factual: X
Complete: X
Coherent: X
)";

struct Rendered {
  std::string text;
  // Char offsets of each substituted slot in `text`.
  std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> slots;
};

/// Single-pass substitution of "{name}" placeholders, so slot values that
/// themselves contain braces are never re-expanded.
inline Rendered render(std::string_view tmpl,
                       const std::map<std::string, std::string_view, std::less<>>& values) {
  Rendered out;
  std::size_t chars = 0;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = tmpl.substr(i + 1, close - i - 1);
        const auto it = values.find(name);
        if (it != values.end()) {
          const std::size_t len = utf8::length(it->second);
          out.slots[std::string(name)] = {chars, chars + len};
          out.text += it->second;
          chars += len;
          i = close + 1;
          continue;
        }
      }
    }
    out.text.push_back(tmpl[i]);
    // Count a char at each UTF-8 lead byte.
    if ((static_cast<unsigned char>(tmpl[i]) & 0xC0) != 0x80) ++chars;
    ++i;
  }
  for (const auto& [name, _] : values) {
    if (!out.slots.count(name)) fail(ErrorKind::structural, "template has no slot '" + name + "'");
  }
  return out;
}

}  // namespace agenticsum::prompts
