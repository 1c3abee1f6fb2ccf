#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agenticsum/aura.hpp"
#include "agenticsum/backend.hpp"
#include "agenticsum/detector.hpp"
#include "agenticsum/error.hpp"
#include "agenticsum/fix.hpp"
#include "agenticsum/focus.hpp"
#include "agenticsum/prompts.hpp"
#include "agenticsum/text.hpp"

namespace agenticsum {

inline constexpr std::string_view kEngineVersion = "agenticsum-engine/0.1.0";

enum class Mode { vanilla, draft, fix_nosup, full };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::vanilla: return "vanilla";
    case Mode::draft: return "draft";
    case Mode::fix_nosup: return "fix_nosup";
    case Mode::full: return "full";
  }
  return "full";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "vanilla") return Mode::vanilla;
  if (s == "draft") return Mode::draft;
  if (s == "fix_nosup") return Mode::fix_nosup;
  if (s == "full") return Mode::full;
  fail(ErrorKind::config, "unknown mode '" + std::string(s) + "'");
}

enum class HaltReason { empty_hset, converged, no_new_spans, budget, degenerate, vanilla, draft };

inline std::string_view to_string(HaltReason r) {
  switch (r) {
    case HaltReason::empty_hset: return "empty_hset";
    case HaltReason::converged: return "converged";
    case HaltReason::no_new_spans: return "no_new_spans";
    case HaltReason::budget: return "budget";
    case HaltReason::degenerate: return "degenerate";
    case HaltReason::vanilla: return "vanilla";
    case HaltReason::draft: return "draft";
  }
  return "budget";
}

inline HaltReason parse_halt_reason(std::string_view s) {
  for (auto r : {HaltReason::empty_hset, HaltReason::converged, HaltReason::no_new_spans,
                 HaltReason::budget, HaltReason::degenerate, HaltReason::vanilla,
                 HaltReason::draft}) {
    if (to_string(r) == s) return r;
  }
  fail(ErrorKind::parse, "unknown halt reason '" + std::string(s) + "'");
}

struct PipelineConfig {
  double r = 0.6;  // uncalibrated default
  double tau = detector::kDefaultTau;
  double eps_conv = 0.01;
  double eps_stab = aura::kDefaultEpsStab;
  std::size_t t_max = 3;
  Mode mode = Mode::full;
  focus::Scorer scorer = focus::Scorer::verbatim;
  DecodingParams decoding;

  void validate() const {
    if (!(r > 0.0 && r <= 1.0)) fail(ErrorKind::config, "r must lie in (0, 1]");
    if (!(tau >= 0.0 && tau <= 1.0)) fail(ErrorKind::config, "tau must lie in [0, 1]");
    if (!(eps_conv > 0.0)) fail(ErrorKind::config, "eps_conv must be positive");
    if (!(eps_stab > 0.0)) fail(ErrorKind::config, "eps_stab must be positive");
    if (t_max < 1) fail(ErrorKind::config, "t_max must be at least 1");
    if (decoding.max_new_tokens < 1) fail(ErrorKind::config, "max_new_tokens must be positive");
  }

  bool operator==(const PipelineConfig&) const = default;
};

struct RefinementState {
  std::size_t t = 0;
  std::string summary;
  std::vector<aura::SpanGrounding> spans;
  std::optional<double> a_bar;  // absent when no spans were scored
  detector::HallucinationSet hset;

  bool operator==(const RefinementState&) const = default;
};

struct FocusRecord {
  std::size_t m = 0;
  std::size_t k = 0;
  std::vector<std::size_t> kept;
  std::vector<double> scores;

  bool operator==(const FocusRecord&) const = default;
};

struct RunManifest {
  std::string engine{kEngineVersion};
  std::string backend;
  std::string draft_template{prompts::kDraftVersion};
  std::string entailment_template{prompts::kEntailmentVersion};
  std::string fix_template{prompts::kFixVersion};
  std::string grounding_context = "reduced";

  bool operator==(const RunManifest&) const = default;
};

struct RefinementTrace {
  std::string doc_id;
  PipelineConfig config;
  RunManifest manifest;
  std::optional<FocusRecord> focus;
  std::vector<RefinementState> states;
  HaltReason halt_reason = HaltReason::budget;
  std::string final_summary;
  std::size_t fix_calls = 0;

  bool operator==(const RefinementTrace&) const = default;
};

/// Which halting conditions apply. fix_nosup runs a single forced pass with
/// the convergence and no-new-span checks switched off.
struct HaltPolicy {
  double eps_conv = 0.01;
  std::size_t t_max = 3;
  bool convergence_checks = true;

  static HaltPolicy from(const PipelineConfig& cfg) {
    if (cfg.mode == Mode::fix_nosup) return {cfg.eps_conv, 1, false};
    return {cfg.eps_conv, cfg.t_max, true};
  }
};

/// Checked in order: empty set, converged mean grounding, no new flagged
/// spans, budget. The first condition that holds gives the reason.
inline std::optional<HaltReason> should_halt(const RefinementState& curr,
                                             const RefinementState* prev,
                                             const HaltPolicy& policy) {
  if (curr.hset.empty()) return HaltReason::empty_hset;
  if (prev != nullptr && policy.convergence_checks) {
    if (curr.a_bar && prev->a_bar && std::fabs(*curr.a_bar - *prev->a_bar) < policy.eps_conv) {
      return HaltReason::converged;
    }
    if (detector::new_spans(curr.hset, prev->hset).empty()) return HaltReason::no_new_spans;
  }
  if (curr.t >= policy.t_max) return HaltReason::budget;
  return std::nullopt;
}

inline std::optional<HaltReason> should_halt(const RefinementState& curr,
                                             const RefinementState* prev,
                                             const PipelineConfig& cfg) {
  return should_halt(curr, prev, HaltPolicy::from(cfg));
}

/// Draft prompt with the source range marked for grounding.
inline GenerationRequest draft_request(std::string_view document_text) {
  auto rendered = prompts::render(prompts::kDraftTemplate, {{"document", document_text}});
  const auto [lo, hi] = rendered.slots.at("document");
  return {std::move(rendered.text), lo, hi};
}

namespace detail {

inline RefinementState make_state(std::size_t t, const GenerationResult& gen,
                                  const text::Document& doc, const PipelineConfig& cfg,
                                  const Backend& backend) {
  auto det = detector::detect(gen, doc, {cfg.tau, cfg.eps_stab}, backend, t);
  RefinementState s;
  s.t = t;
  s.summary = gen.text;
  s.a_bar = aura::mean_grounding(std::span<const aura::SpanGrounding>(det.spans));
  s.spans = std::move(det.spans);
  s.hset = std::move(det.hset);
  return s;
}

inline RefinementState empty_state(std::size_t t, std::string summary, double tau) {
  RefinementState s;
  s.t = t;
  s.summary = std::move(summary);
  s.hset.iteration = t;
  s.hset.tau = tau;
  return s;
}

}  // namespace detail

/// Runs one document through the configured pipeline:
///   vanilla   - generate from the full document, nothing else;
///   draft     - compress, generate, detect once;
///   fix_nosup - draft plus exactly one fix and re-detect;
///   full      - draft plus the supervised detect/fix loop, at most t_max fixes.
inline RefinementTrace run_pipeline(const text::Document& doc, const PipelineConfig& cfg,
                                    const Backend& backend) {
  cfg.validate();
  if (doc.sentences.empty()) fail(ErrorKind::precondition, "document has no sentences");

  RefinementTrace trace;
  trace.doc_id = doc.id;
  trace.config = cfg;
  trace.manifest.backend = backend.identity();

  if (cfg.mode == Mode::vanilla) {
    const auto gen = backend.generate(draft_request(doc.text), cfg.decoding);
    trace.manifest.grounding_context = "none";
    trace.states.push_back(detail::empty_state(0, gen.text, cfg.tau));
    trace.halt_reason = HaltReason::vanilla;
    trace.final_summary = gen.text;
    return trace;
  }

  const auto reduced = focus::compress(doc, cfg.r, cfg.scorer, backend);
  FocusRecord fr;
  fr.m = doc.sentences.size();
  fr.k = reduced.k;
  fr.kept = reduced.kept_indices();
  for (const auto& s : reduced.scores) fr.scores.push_back(s.beta);
  trace.focus = std::move(fr);

  const auto request = draft_request(reduced.text());
  const auto draft = backend.generate(request, cfg.decoding);
  if (detector::detail::trim(draft.text).empty()) {
    trace.states.push_back(detail::empty_state(0, draft.text, cfg.tau));
    trace.halt_reason = HaltReason::degenerate;
    trace.final_summary = draft.text;
    return trace;
  }
  trace.states.push_back(detail::make_state(0, draft, doc, cfg, backend));

  if (cfg.mode == Mode::draft) {
    trace.halt_reason = HaltReason::draft;
    trace.final_summary = draft.text;
    return trace;
  }

  const auto policy = HaltPolicy::from(cfg);
  if (auto halt = should_halt(trace.states.back(), nullptr, policy)) {
    trace.halt_reason = *halt;
    trace.final_summary = trace.states.back().summary;
    return trace;
  }

  for (;;) {
    const auto& curr = trace.states.back();
    fix::FixResult revised;
    try {
      revised = fix::fix(reduced, curr.summary, curr.hset, backend);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate) throw;
      ++trace.fix_calls;
      trace.halt_reason = HaltReason::degenerate;
      trace.final_summary = curr.summary;
      return trace;
    }
    ++trace.fix_calls;

    const auto gen = backend.score(request, revised.text);
    auto next = detail::make_state(curr.t + 1, gen, doc, cfg, backend);
    trace.states.push_back(std::move(next));
    const auto& prev = trace.states[trace.states.size() - 2];
    if (auto halt = should_halt(trace.states.back(), &prev, policy)) {
      trace.halt_reason = *halt;
      trace.final_summary = trace.states.back().summary;
      return trace;
    }
  }
}

/// Recomputes every state's mean grounding and hallucination set from its
/// recorded spans. Returns a description of each mismatch.
inline std::vector<std::string> check_consistency(const RefinementTrace& trace) {
  std::vector<std::string> problems;
  for (std::size_t n = 0; n < trace.states.size(); ++n) {
    const auto& s = trace.states[n];
    const auto at = "state " + std::to_string(n) + ": ";
    if (s.t != n) problems.push_back(at + "t is not consecutive");
    if (s.spans.empty()) {
      if (s.a_bar) problems.push_back(at + "a_bar recorded without spans");
      if (!s.hset.empty()) problems.push_back(at + "hset recorded without spans");
      continue;
    }
    const double a_bar = aura::mean_grounding(std::span<const aura::SpanGrounding>(s.spans));
    if (!s.a_bar || *s.a_bar != a_bar) problems.push_back(at + "a_bar does not recompute");
    auto recomputed = detector::flag_spans(s.spans, trace.config.tau, s.t);
    if (!(recomputed == s.hset)) problems.push_back(at + "hset does not recompute");
  }
  return problems;
}

}  // namespace agenticsum
