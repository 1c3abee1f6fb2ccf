#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "agenticsum/backend.hpp"
#include "agenticsum/detector.hpp"
#include "agenticsum/error.hpp"
#include "agenticsum/trace.hpp"

// HTTP/JSON backend protocol:
//   POST /v1/generate            GenerationRequest + decoding -> GenerationResult
//   POST /v1/sentence_attention  {text} -> {heads, tokens, weights}
//   POST /v1/entail              {document, span, prompt} -> verdict
//   POST /v1/revise              {document, summary, flagged_spans, prompt} -> {text}
//   GET  /v1/health              -> {status, model_id, attention_layer}
// Attention weights travel as nested arrays, or as base64 little-endian
// float32 when the request carries "encoding": "b64f32".

namespace agenticsum::remote {

using json = nlohmann::json;

inline constexpr std::string_view kB64F32 = "b64f32";

namespace b64 {

inline constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::vector<std::uint8_t> decode(std::string_view s) {
  std::vector<std::uint8_t> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : s) {
    if (c == '=') break;
    const auto pos = kAlphabet.find(c);
    if (pos == std::string_view::npos) {
      throw ParseError("invalid base64 character", std::string(s.substr(0, 64)));
    }
    acc = (acc << 6) | static_cast<std::uint32_t>(pos);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace b64

inline std::string encode_f32(const std::vector<double>& values) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(values.size() * 4);
  for (double v : values) {
    const float f = static_cast<float>(v);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>((u >> (8 * b)) & 0xFF));
  }
  return b64::encode(bytes);
}

inline std::vector<double> decode_f32(std::string_view text) {
  const auto bytes = b64::decode(text);
  if (bytes.size() % 4 != 0) throw ParseError("b64f32 payload is not a float32 array", "");
  std::vector<double> out;
  out.reserve(bytes.size() / 4);
  for (std::size_t i = 0; i < bytes.size(); i += 4) {
    const std::uint32_t u = bytes[i] | (bytes[i + 1] << 8) | (bytes[i + 2] << 16) |
                            (static_cast<std::uint32_t>(bytes[i + 3]) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    out.push_back(f);
  }
  return out;
}

// ---- message encoding shared by client and server ----

inline json encode_generation(const GenerationResult& g, bool b64f32) {
  json tokens = json::array();
  for (const auto& t : g.tokens) tokens.push_back({{"text", t.text}, {"start", t.start}, {"end", t.end}});
  json steps = json::array();
  for (const auto& s : g.step_attentions) {
    json step = {{"step", s.step}};
    if (b64f32) {
      step["shape"] = {s.heads, s.length};
      step["heads"] = encode_f32(s.weights);
    } else {
      json heads = json::array();
      for (std::size_t h = 0; h < s.heads; ++h) {
        heads.push_back(std::vector<double>(s.weights.begin() + h * s.length,
                                            s.weights.begin() + (h + 1) * s.length));
      }
      step["heads"] = std::move(heads);
    }
    steps.push_back(std::move(step));
  }
  json input = g.step_attentions.empty() ? json::array()
                                         : json(g.step_attentions.front().input_positions);
  return {{"text", g.text},
          {"tokens", std::move(tokens)},
          {"step_attentions", std::move(steps)},
          {"input_positions", std::move(input)}};
}

inline GenerationResult decode_generation(const json& j) {
  GenerationResult g;
  g.text = j.at("text").get<std::string>();
  for (const auto& t : j.at("tokens")) {
    g.tokens.push_back({t.at("text").get<std::string>(), t.at("start").get<std::size_t>(),
                        t.at("end").get<std::size_t>()});
  }
  const auto input = j.value("input_positions", std::vector<std::size_t>{});
  for (const auto& s : j.at("step_attentions")) {
    StepAttention sa;
    sa.step = s.at("step").get<std::size_t>();
    sa.input_positions = input;
    const auto& heads = s.at("heads");
    if (heads.is_string()) {
      const auto& shape = s.at("shape");
      sa.heads = shape.at(0).get<std::size_t>();
      sa.length = shape.at(1).get<std::size_t>();
      sa.weights = decode_f32(heads.get<std::string>());
    } else {
      sa.heads = heads.size();
      sa.length = heads.empty() ? 0 : heads.at(0).size();
      for (const auto& row : heads) {
        if (row.size() != sa.length) throw ParseError("ragged step attention", s.dump());
        for (const auto& w : row) sa.weights.push_back(w.get<double>());
      }
    }
    sa.validate();
    g.step_attentions.push_back(std::move(sa));
  }
  return g;
}

inline json encode_attention(const AttentionTensor& a, bool b64f32) {
  json j = {{"heads", a.heads}, {"tokens", a.tokens}};
  if (b64f32) {
    j["encoding"] = kB64F32;
    j["weights"] = encode_f32(a.weights);
    return j;
  }
  json w = json::array();
  for (std::size_t h = 0; h < a.heads; ++h) {
    json rows = json::array();
    for (std::size_t i = 0; i < a.tokens; ++i) {
      const auto row = a.weights.begin() + static_cast<std::ptrdiff_t>((h * a.tokens + i) * a.tokens);
      rows.push_back(std::vector<double>(row, row + static_cast<std::ptrdiff_t>(a.tokens)));
    }
    w.push_back(std::move(rows));
  }
  j["weights"] = std::move(w);
  return j;
}

inline AttentionTensor decode_attention(const json& j) {
  AttentionTensor a;
  a.heads = j.at("heads").get<std::size_t>();
  a.tokens = j.at("tokens").get<std::size_t>();
  const auto& w = j.at("weights");
  if (w.is_string()) {
    a.weights = decode_f32(w.get<std::string>());
  } else {
    for (const auto& head : w)
      for (const auto& row : head)
        for (const auto& x : row) a.weights.push_back(x.get<double>());
  }
  a.validate();
  return a;
}

/// Verdicts arrive either structured or as the model's raw text under "raw".
inline EntailmentVerdict decode_verdict(const json& j) {
  if (j.contains("raw") && j["raw"].is_string()) {
    auto v = detector::parse_entailment_response(j["raw"].get<std::string>());
    if (j.contains("score") && j["score"].is_number()) v.raw_score = j["score"].get<double>();
    return v;
  }
  try {
    auto v = trace::verdict_from_json(trace::json::parse(j.dump()));
    if (v.label == EntailmentLabel::entailed) v.problematic_spans.clear();
    return v;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed verdict: ") + e.what(), j.dump());
  }
}

inline json encode_verdict(const EntailmentVerdict& v) {
  return json::parse(trace::to_json(v).dump());
}

// ---- client ----

struct RemoteOptions {
  std::string url = "http://127.0.0.1:8080";
  bool b64f32 = false;
  int connect_timeout_s = 5;
  int read_timeout_s = 600;
};

/// Backend reached over HTTP. Each call opens its own client, so one instance
/// can be shared between threads.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteOptions options) : opt_(std::move(options)) {}

  GenerationResult generate(const GenerationRequest& request,
                            const DecodingParams& params) const override {
    if (request.prompt.empty()) fail(ErrorKind::precondition, "prompt must be non-empty");
    auto body = request_body(request);
    body["max_new_tokens"] = params.max_new_tokens;
    body["temperature"] = params.temperature;
    if (params.max_sentences > 0) body["max_sentences"] = params.max_sentences;
    return decode(post("/v1/generate", body), decode_generation);
  }

  GenerationResult score(const GenerationRequest& request,
                         std::string_view output) const override {
    auto body = request_body(request);
    body["forced_output"] = output;
    return decode(post("/v1/generate", body), decode_generation);
  }

  AttentionTensor sentence_attention(std::string_view sentence) const override {
    if (sentence.empty()) fail(ErrorKind::precondition, "sentence must be non-empty");
    json body = {{"text", sentence}};
    if (opt_.b64f32) body["encoding"] = kB64F32;
    return decode(post("/v1/sentence_attention", body), decode_attention);
  }

  EntailmentVerdict entail(std::string_view document, std::string_view span,
                           std::string_view prompt) const override {
    json body = {{"document", document}, {"span", span}, {"prompt", prompt}};
    return decode_verdict(post("/v1/entail", body));
  }

  std::string revise(std::string_view document, std::string_view summary,
                     const std::vector<std::string>& flagged_spans,
                     std::string_view prompt) const override {
    if (flagged_spans.empty()) fail(ErrorKind::precondition, "revise requires flagged spans");
    json body = {{"document", document},
                 {"summary", summary},
                 {"flagged_spans", flagged_spans},
                 {"prompt", prompt}};
    return decode(post("/v1/revise", body),
                  [](const json& j) { return j.at("text").get<std::string>(); });
  }

  json health() const {
    auto cli = client();
    auto res = cli.Get("/v1/health");
    return parse_response(res, "/v1/health");
  }

  std::string identity() const override {
    try {
      const auto h = health();
      return "remote " + opt_.url + " model=" + h.value("model_id", "?") +
             " layer=" + h.value("attention_layer", "?");
    } catch (const Error&) {
      return "remote " + opt_.url;
    }
  }

 private:
  httplib::Client client() const {
    httplib::Client cli(opt_.url);
    cli.set_connection_timeout(opt_.connect_timeout_s, 0);
    cli.set_read_timeout(opt_.read_timeout_s, 0);
    cli.set_write_timeout(opt_.read_timeout_s, 0);
    return cli;
  }

  json request_body(const GenerationRequest& request) const {
    json body = {{"prompt", request.prompt},
                 {"return_attentions", true},
                 {"source_span", {request.source_begin, request.source_end}}};
    if (opt_.b64f32) body["encoding"] = kB64F32;
    return body;
  }

  json post(const std::string& path, const json& body) const {
    auto cli = client();
    auto res = cli.Post(path, body.dump(), "application/json");
    return parse_response(res, path);
  }

  json parse_response(const httplib::Result& res, const std::string& path) const {
    if (!res) {
      fail(ErrorKind::transport, opt_.url + path + ": " + httplib::to_string(res.error()));
    }
    json j;
    try {
      j = json::parse(res->body);
    } catch (const json::exception&) {
      if (res->status >= 200 && res->status < 300) {
        throw ParseError(path + " returned invalid JSON", res->body);
      }
    }
    if (res->status == 413) fail(ErrorKind::capacity, path + ": " + error_message(j, res->body));
    if (res->status < 200 || res->status >= 300) {
      const auto kind = j.is_object() && j.contains("error") ? j["error"].value("kind", "") : "";
      const auto msg = path + ": HTTP " + std::to_string(res->status) + " " + error_message(j, res->body);
      for (auto k : {ErrorKind::structural, ErrorKind::config, ErrorKind::capacity,
                     ErrorKind::precondition, ErrorKind::validation, ErrorKind::degenerate}) {
        if (kind == to_string(k)) fail(k, msg);
      }
      fail(ErrorKind::transport, msg);
    }
    return j;
  }

  static std::string error_message(const json& j, const std::string& body) {
    if (j.is_object() && j.contains("error") && j["error"].is_object()) {
      return j["error"].value("message", body);
    }
    return body;
  }

  template <class F>
  static auto decode(const json& j, F&& f) -> decltype(f(j)) {
    try {
      return f(j);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed response: ") + e.what(), j.dump());
    }
  }

  RemoteOptions opt_;
};

// ---- reference server ----

struct ServerInfo {
  std::string model_id = "mock";
  std::string attention_layer = "final";
};

/// Registers the /v1/* handlers on `server`, answering from `backend`.
/// The backend must outlive the server.
inline void mount(httplib::Server& server, const Backend& backend, ServerInfo info = {}) {
  auto reply = [](httplib::Response& res, const json& j) {
    res.set_content(j.dump(), "application/json");
  };
  auto guarded = [reply](auto handler) {
    return [reply, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto body = req.body.empty() ? json::object() : json::parse(req.body);
        reply(res, handler(body));
      } catch (const Error& e) {
        res.status = e.kind() == ErrorKind::capacity ? 413 : 400;
        reply(res, {{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}});
      } catch (const std::exception& e) {
        res.status = 400;
        reply(res, {{"error", {{"kind", "parse"}, {"message", e.what()}}}});
      }
    };
  };

  server.Get("/v1/health", [reply, info](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"status", "ok"},
                {"model_id", info.model_id},
                {"attention_layer", info.attention_layer}});
  });
  server.Post("/v1/generate", guarded([&backend](const json& b) {
    GenerationRequest req;
    req.prompt = b.at("prompt").get<std::string>();
    const auto span = b.value("source_span", std::vector<std::size_t>{});
    if (span.size() == 2) {
      req.source_begin = span[0];
      req.source_end = span[1];
    }
    const bool b64 = b.value("encoding", "") == kB64F32;
    if (b.contains("forced_output")) {
      return encode_generation(backend.score(req, b["forced_output"].get<std::string>()), b64);
    }
    DecodingParams p;
    p.max_new_tokens = b.value("max_new_tokens", p.max_new_tokens);
    p.temperature = b.value("temperature", p.temperature);
    p.max_sentences = b.value("max_sentences", p.max_sentences);
    auto out = encode_generation(backend.generate(req, p), b64);
    if (!b.value("return_attentions", true)) out["step_attentions"] = json::array();
    return out;
  }));
  server.Post("/v1/sentence_attention", guarded([&backend](const json& b) {
    return encode_attention(backend.sentence_attention(b.at("text").get<std::string>()),
                            b.value("encoding", "") == kB64F32);
  }));
  server.Post("/v1/entail", guarded([&backend](const json& b) {
    const auto doc = b.at("document").get<std::string>();
    const auto span = b.at("span").get<std::string>();
    const auto prompt = b.value("prompt", detector::build_entailment_prompt(doc, span));
    return encode_verdict(backend.entail(doc, span, prompt));
  }));
  server.Post("/v1/revise", guarded([&backend](const json& b) {
    const auto flagged = b.at("flagged_spans").get<std::vector<std::string>>();
    return json{{"text", backend.revise(b.at("document").get<std::string>(),
                                        b.at("summary").get<std::string>(), flagged,
                                        b.value("prompt", ""))}};
  }));
}

}  // namespace agenticsum::remote
