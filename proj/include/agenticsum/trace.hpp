#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

#include "agenticsum/supervisor.hpp"

namespace agenticsum::trace {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kSchema = "agenticsum-trace/1";

inline json to_json(const DecodingParams& d) {
  return {{"max_new_tokens", d.max_new_tokens},
          {"temperature", d.temperature},
          {"max_sentences", d.max_sentences}};
}

inline json to_json(const PipelineConfig& c) {
  return {{"r", c.r},
          {"tau", c.tau},
          {"eps_conv", c.eps_conv},
          {"eps_stab", c.eps_stab},
          {"t_max", c.t_max},
          {"mode", to_string(c.mode)},
          {"scorer", focus::to_string(c.scorer)},
          {"decoding", to_json(c.decoding)}};
}

inline json to_json(const EntailmentVerdict& v) {
  json j = {{"label", to_string(v.label)},
            {"explanation", v.explanation},
            {"problematic_spans", v.problematic_spans}};
  j["score"] = v.raw_score ? json(*v.raw_score) : json(nullptr);
  return j;
}

inline json to_json(const aura::SpanGrounding& s, bool flagged) {
  return {{"index", s.index},      {"text", s.text}, {"tokens", s.token_steps},
          {"a", s.a},              {"h", s.h},       {"flagged", flagged},
          {"verdict", to_json(s.verdict)}};
}

inline json to_json(const detector::HallucinationSet& h) {
  json arr = json::array();
  for (const auto& f : h.flagged) {
    arr.push_back({{"index", f.index}, {"text", f.text}, {"key", f.key}});
  }
  return arr;
}

inline json to_json(const RefinementState& s) {
  json spans = json::array();
  for (const auto& g : s.spans) spans.push_back(to_json(g, s.hset.contains(g.index)));
  json j = {{"t", s.t}, {"summary", s.summary}, {"spans", std::move(spans)}};
  j["a_bar"] = s.a_bar ? json(*s.a_bar) : json(nullptr);
  j["hset"] = to_json(s.hset);
  return j;
}

inline json to_json(const RefinementTrace& t) {
  json j;
  j["schema"] = kSchema;
  j["doc_id"] = t.doc_id;
  j["config"] = to_json(t.config);
  j["manifest"] = {{"engine", t.manifest.engine},
                   {"backend", t.manifest.backend},
                   {"templates",
                    {{"draft", t.manifest.draft_template},
                     {"entailment", t.manifest.entailment_template},
                     {"fix", t.manifest.fix_template}}},
                   {"grounding_context", t.manifest.grounding_context}};
  if (t.focus) {
    j["focus"] = {{"m", t.focus->m},
                  {"k", t.focus->k},
                  {"kept", t.focus->kept},
                  {"scores", t.focus->scores}};
  } else {
    j["focus"] = nullptr;
  }
  json states = json::array();
  for (const auto& s : t.states) states.push_back(to_json(s));
  j["states"] = std::move(states);
  j["halt_reason"] = to_string(t.halt_reason);
  j["final_summary"] = t.final_summary;
  j["fix_calls"] = t.fix_calls;
  return j;
}

inline DecodingParams decoding_from_json(const json& j) {
  DecodingParams d;
  d.max_new_tokens = j.at("max_new_tokens").get<std::size_t>();
  d.temperature = j.at("temperature").get<double>();
  d.max_sentences = j.at("max_sentences").get<std::size_t>();
  return d;
}

inline PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  c.r = j.at("r").get<double>();
  c.tau = j.at("tau").get<double>();
  c.eps_conv = j.at("eps_conv").get<double>();
  c.eps_stab = j.at("eps_stab").get<double>();
  c.t_max = j.at("t_max").get<std::size_t>();
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.scorer = focus::parse_scorer(j.at("scorer").get<std::string>());
  c.decoding = decoding_from_json(j.at("decoding"));
  return c;
}

inline EntailmentVerdict verdict_from_json(const json& j) {
  EntailmentVerdict v;
  const auto label = j.at("label").get<std::string>();
  if (label == "Entailed") {
    v.label = EntailmentLabel::entailed;
  } else if (label == "Not Entailed") {
    v.label = EntailmentLabel::not_entailed;
  } else {
    throw ParseError("unknown entailment label '" + label + "'", j.dump());
  }
  v.explanation = j.value("explanation", "");
  v.problematic_spans = j.value("problematic_spans", std::vector<std::string>{});
  if (j.contains("score") && !j["score"].is_null()) v.raw_score = j["score"].get<double>();
  return v;
}

inline RefinementState state_from_json(const json& j, double tau) {
  RefinementState s;
  s.t = j.at("t").get<std::size_t>();
  s.summary = j.at("summary").get<std::string>();
  for (const auto& g : j.at("spans")) {
    aura::SpanGrounding sg;
    sg.index = g.at("index").get<std::size_t>();
    sg.text = g.at("text").get<std::string>();
    sg.token_steps = g.at("tokens").get<std::vector<std::size_t>>();
    sg.a = g.at("a").get<double>();
    sg.h = g.at("h").get<bool>();
    sg.verdict = verdict_from_json(g.at("verdict"));
    s.spans.push_back(std::move(sg));
  }
  if (!j.at("a_bar").is_null()) s.a_bar = j["a_bar"].get<double>();
  s.hset.iteration = s.t;
  s.hset.tau = tau;
  for (const auto& f : j.at("hset")) {
    s.hset.flagged.push_back({f.at("index").get<std::size_t>(), f.at("text").get<std::string>(),
                              f.at("key").get<std::string>()});
  }
  return s;
}

inline RefinementTrace from_json(const json& j) {
  if (j.value("schema", "") != kSchema) {
    throw ParseError("unsupported trace schema", j.value("schema", ""));
  }
  RefinementTrace t;
  t.doc_id = j.at("doc_id").get<std::string>();
  t.config = config_from_json(j.at("config"));
  const auto& m = j.at("manifest");
  t.manifest.engine = m.at("engine").get<std::string>();
  t.manifest.backend = m.at("backend").get<std::string>();
  t.manifest.draft_template = m.at("templates").at("draft").get<std::string>();
  t.manifest.entailment_template = m.at("templates").at("entailment").get<std::string>();
  t.manifest.fix_template = m.at("templates").at("fix").get<std::string>();
  t.manifest.grounding_context = m.at("grounding_context").get<std::string>();
  if (!j.at("focus").is_null()) {
    const auto& f = j["focus"];
    t.focus = FocusRecord{f.at("m").get<std::size_t>(), f.at("k").get<std::size_t>(),
                          f.at("kept").get<std::vector<std::size_t>>(),
                          f.at("scores").get<std::vector<double>>()};
  }
  for (const auto& s : j.at("states")) t.states.push_back(state_from_json(s, t.config.tau));
  t.halt_reason = parse_halt_reason(j.at("halt_reason").get<std::string>());
  t.final_summary = j.at("final_summary").get<std::string>();
  t.fix_calls = j.at("fix_calls").get<std::size_t>();
  return t;
}

inline RefinementTrace parse(std::string_view text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed trace: ") + e.what(), std::string(text));
  }
}

inline std::string serialize(const RefinementTrace& t) { return to_json(t).dump(2) + "\n"; }

}  // namespace agenticsum::trace
