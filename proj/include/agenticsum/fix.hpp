#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "agenticsum/backend.hpp"
#include "agenticsum/detector.hpp"
#include "agenticsum/error.hpp"
#include "agenticsum/focus.hpp"
#include "agenticsum/prompts.hpp"

namespace agenticsum::fix {

inline std::string build_fix_prompt(std::string_view compressed_text, std::string_view summary,
                                    const std::vector<std::string>& flagged) {
  if (flagged.empty()) fail(ErrorKind::precondition, "fix prompt requires flagged spans");
  std::string list;
  for (std::size_t i = 0; i < flagged.size(); ++i) {
    if (i > 0) list += '\n';
    list += std::to_string(i + 1) + ". " + flagged[i];
  }
  return prompts::render(prompts::kFixTemplate,
                         {{"document", compressed_text}, {"summary", summary}, {"flagged", list}})
      .text;
}

inline std::string build_fix_prompt(const focus::CompressedDocument& reduced,
                                    std::string_view summary,
                                    const std::vector<std::string>& flagged) {
  return build_fix_prompt(reduced.text(), summary, flagged);
}

struct FixResult {
  std::string text;
  // Flagged spans still present verbatim after revision.
  std::vector<std::string> surviving;
};

/// One targeted revision of `summary` against the compressed document.
/// Throws a degenerate error when the backend returns an empty summary.
inline FixResult fix(const focus::CompressedDocument& reduced, std::string_view summary,
                     const detector::HallucinationSet& hset, const Backend& backend) {
  if (hset.empty()) fail(ErrorKind::precondition, "fix requires a non-empty hallucination set");
  const auto flagged = hset.texts();
  const auto context = reduced.text();
  FixResult out;
  out.text = backend.revise(context, summary, flagged, build_fix_prompt(context, summary, flagged));
  if (detector::detail::trim(out.text).empty()) {
    fail(ErrorKind::degenerate, "revision produced an empty summary");
  }
  for (const auto& f : flagged) {
    if (out.text.find(f) != std::string::npos) out.surviving.push_back(f);
  }
  return out;
}

}  // namespace agenticsum::fix
