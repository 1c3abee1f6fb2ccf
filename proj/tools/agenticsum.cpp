// agenticsum command-line driver.
//
//   agenticsum summarize --in notes.jsonl --out run1/ [--mode full] [--r 0.6] ...
//   agenticsum focus     --in notes.jsonl [--r 0.6]
//   agenticsum detect    --in pairs.jsonl
//   agenticsum eval      --in pairs.jsonl [--metrics rouge,bleu1,bleu2]
//   agenticsum stats     --ratings raters.csv
//   agenticsum serve     --port 8080 [--seed 0]
//
// Exit codes: 0 success, 1 some records failed, 2 usage or configuration error.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include "agenticsum/metrics.hpp"
#include "agenticsum/mock_backend.hpp"
#include "agenticsum/remote.hpp"
#include "agenticsum/stats.hpp"
#include "agenticsum/supervisor.hpp"
#include "agenticsum/trace.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace agenticsum;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// key=value lines; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trimmed = std::string(detector::detail::trim(line));
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    out[std::string(detector::detail::trim(trimmed.substr(0, eq)))] =
        std::string(detector::detail::trim(trimmed.substr(eq + 1)));
  }
  return out;
}

/// Options shared by the backend-facing subcommands. `setters` lets a config
/// file fill in whatever the command line left unset.
struct Settings {
  std::string backend = "mock";
  std::string url;
  std::uint64_t seed = 0;
  std::size_t heads = 4;
  std::vector<std::string> inject;
  bool adversarial = false;
  bool b64f32 = false;
  std::string config_path;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());

  std::string mode = "full";
  double r = 0.6;
  double tau = detector::kDefaultTau;
  double eps = 0.01;
  std::size_t tmax = 3;
  std::string scorer = "verbatim";
  std::size_t max_new_tokens = 512;
  std::size_t max_sentences = 0;

  std::map<std::string, std::function<void(const std::string&)>> setters;

  template <class T>
  void add(CLI::App& app, const std::string& name, T& field, const std::string& help) {
    app.add_option("--" + name, field, help)->capture_default_str();
    setters[name] = [this, name, &field](const std::string& v) {
      std::istringstream is(v);
      T parsed{};
      if constexpr (std::is_same_v<T, std::string>) {
        parsed = v;
      } else if (!(is >> parsed) || !(is >> std::ws).eof()) {
        throw UsageError("config value for '" + name + "' is not valid: " + v);
      }
      field = parsed;
    };
  }

  /// Applies config-file values to every setting not given on the command line.
  void apply_config(const CLI::App& app) {
    if (config_path.empty()) return;
    for (const auto& [key, value] : read_config_file(config_path)) {
      const auto it = setters.find(key);
      if (it == setters.end()) throw UsageError("unknown config key '" + key + "'");
      if (app.count("--" + key) > 0) continue;
      it->second(value);
    }
  }

  PipelineConfig pipeline() const {
    PipelineConfig c;
    c.mode = parse_mode(mode);
    c.r = r;
    c.tau = tau;
    c.eps_conv = eps;
    c.t_max = tmax;
    c.scorer = focus::parse_scorer(scorer);
    c.decoding.max_new_tokens = max_new_tokens;
    c.decoding.max_sentences = max_sentences;
    c.validate();
    return c;
  }

  std::unique_ptr<Backend> make_backend() const {
    if (backend == "mock") {
      MockOptions o;
      o.seed = seed;
      o.heads = heads;
      o.injected = inject;
      o.adversarial = adversarial;
      return std::make_unique<MockBackend>(std::move(o));
    }
    if (backend == "remote") {
      remote::RemoteOptions o;
      o.url = url;
      if (o.url.empty()) {
        const char* env = std::getenv("AGENTICSUM_BACKEND_URL");
        if (env == nullptr || *env == '\0') {
          throw UsageError("remote backend needs --url or AGENTICSUM_BACKEND_URL");
        }
        o.url = env;
      }
      o.b64f32 = b64f32;
      return std::make_unique<remote::RemoteBackend>(std::move(o));
    }
    throw UsageError("unknown backend '" + backend + "'");
  }
};

void add_backend_flags(CLI::App& app, Settings& s) {
  s.add(app, "backend", s.backend, "mock or remote");
  s.add(app, "url", s.url, "remote backend URL (default: $AGENTICSUM_BACKEND_URL)");
  s.add(app, "seed", s.seed, "mock backend seed");
  s.add(app, "heads", s.heads, "mock backend attention heads");
  app.add_option("--inject", s.inject, "sentence the mock appends to every draft (repeatable)");
  app.add_flag("--adversarial", s.adversarial, "mock revisions add an unsupported sentence");
  app.add_flag("--b64f32", s.b64f32, "request base64 float32 attention payloads");
  app.add_option("--config", s.config_path, "key=value file; flags take precedence")
      ->check(CLI::ExistingFile);
}

void add_pipeline_flags(CLI::App& app, Settings& s) {
  s.add(app, "mode", s.mode, "vanilla, draft, fix_nosup or full");
  s.add(app, "r", s.r, "retention ratio in (0, 1]");
  s.add(app, "tau", s.tau, "grounding threshold in [0, 1]");
  s.add(app, "eps", s.eps, "convergence tolerance on mean grounding");
  s.add(app, "tmax", s.tmax, "maximum fix passes");
  s.add(app, "scorer", s.scorer, "verbatim or received");
  s.add(app, "max-new-tokens", s.max_new_tokens, "generation budget");
  s.add(app, "max-sentences", s.max_sentences, "draft sentence cap (0 = none)");
  s.add(app, "jobs", s.jobs, "worker threads");
}

struct Record {
  std::size_t line = 0;
  std::optional<json> value;
  std::string error;  // set when the line is not valid JSON
};

std::vector<Record> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::vector<Record> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detector::detail::trim(line).empty()) continue;
    Record r;
    r.line = n;
    try {
      r.value = json::parse(line);
      if (!r.value->is_object()) {
        r.value.reset();
        r.error = "line is not a JSON object";
      }
    } catch (const json::exception& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string record_id(const Record& r) {
  if (r.value && r.value->contains("id")) {
    const auto& id = (*r.value)["id"];
    return id.is_string() ? id.get<std::string>() : id.dump();
  }
  return "line" + std::to_string(r.line);
}

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    fail(ErrorKind::parse, std::string("missing string field '") + key + "'");
  }
  return j[key].get<std::string>();
}

json error_json(const std::string& kind, const std::string& message) {
  return {{"kind", kind}, {"message", message}};
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

/// Per-record outcome: either a JSON result or an error.
struct Outcome {
  json result;
  bool ok = false;
};

template <class F>
Outcome guarded(const Record& r, F&& f) {
  Outcome o;
  if (!r.value) {
    o.result = {{"id", record_id(r)}, {"error", error_json("parse", r.error)}};
    return o;
  }
  try {
    o.result = f(*r.value);
    o.ok = true;
  } catch (const Error& e) {
    o.result = {{"id", record_id(r)}, {"error", error_json(std::string(to_string(e.kind())), e.what())}};
  } catch (const std::exception& e) {
    o.result = {{"id", record_id(r)}, {"error", error_json("parse", e.what())}};
  }
  return o;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << content;
}

// ---- summarize ----

int cmd_summarize(const Settings& s, const std::string& in_path, const std::string& out_dir) {
  const auto cfg = s.pipeline();
  const auto backend = s.make_backend();
  const auto records = read_jsonl(in_path);
  fs::create_directories(out_dir);

  std::vector<Outcome> outcomes(records.size());
  parallel_for(records.size(), s.jobs, [&](std::size_t i) {
    outcomes[i] = guarded(records[i], [&](const json& j) {
      const auto id = required_string(j, "id");
      if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..") {
        fail(ErrorKind::validation, "id '" + id + "' cannot name a trace file");
      }
      const auto doc = text::make_document(id, required_string(j, "text"));
      const auto tr = run_pipeline(doc, cfg, *backend);
      write_file(fs::path(out_dir) / (id + ".trace.json"), trace::serialize(tr));
      const auto& last = tr.states.back();
      return json{{"id", id},
                  {"summary", tr.final_summary},
                  {"halt_reason", to_string(tr.halt_reason)},
                  {"iterations", tr.fix_calls},
                  {"a_bar_final", last.a_bar ? json(*last.a_bar) : json(nullptr)}};
    });
  });

  std::ostringstream summary;
  bool failed = false;
  for (const auto& o : outcomes) {
    summary << o.result.dump() << "\n";
    if (!o.ok) {
      failed = true;
      std::cerr << "error: " << o.result.dump() << "\n";
    }
  }
  write_file(fs::path(out_dir) / "summary.jsonl", summary.str());
  return failed ? kPartial : kOk;
}

// ---- focus ----

int cmd_focus(const Settings& s, const std::string& in_path) {
  const auto scorer = focus::parse_scorer(s.scorer);
  focus::retained_count(s.r, 1);  // validates r up front
  const auto backend = s.make_backend();
  const auto records = read_jsonl(in_path);
  std::vector<Outcome> outcomes(records.size());
  parallel_for(records.size(), s.jobs, [&](std::size_t i) {
    outcomes[i] = guarded(records[i], [&](const json& j) {
      const auto doc = text::make_document(required_string(j, "id"), required_string(j, "text"));
      const auto reduced = focus::compress(doc, s.r, scorer, *backend);
      std::vector<double> scores;
      for (const auto& sc : reduced.scores) scores.push_back(sc.beta);
      return json{{"id", doc.id},
                  {"m", doc.sentences.size()},
                  {"k", reduced.k},
                  {"kept", reduced.kept_indices()},
                  {"scores", scores},
                  {"text", reduced.text()}};
    });
  });
  bool failed = false;
  for (const auto& o : outcomes) {
    std::cout << o.result.dump() << "\n";
    failed = failed || !o.ok;
  }
  return failed ? kPartial : kOk;
}

// ---- detect ----

int cmd_detect(const Settings& s, const std::string& in_path) {
  if (!(s.tau >= 0.0 && s.tau <= 1.0)) throw Error(ErrorKind::config, "tau must lie in [0, 1]");
  const auto backend = s.make_backend();
  const auto records = read_jsonl(in_path);
  std::vector<Outcome> outcomes(records.size());
  parallel_for(records.size(), s.jobs, [&](std::size_t i) {
    outcomes[i] = guarded(records[i], [&](const json& j) {
      const auto doc =
          text::make_document(required_string(j, "id"), required_string(j, "document"));
      const auto gen = backend->score(draft_request(doc.text), required_string(j, "summary"));
      auto det = detector::detect(gen, doc, {s.tau, aura::kDefaultEpsStab}, *backend);
      json spans = json::array();
      for (const auto& g : det.spans) spans.push_back(trace::to_json(g, det.hset.contains(g.index)));
      const auto a_bar = aura::mean_grounding(std::span<const aura::SpanGrounding>(det.spans));
      return json{{"id", doc.id},
                  {"spans", std::move(spans)},
                  {"a_bar", a_bar},
                  {"hset", trace::to_json(det.hset)}};
    });
  });
  bool failed = false;
  for (const auto& o : outcomes) {
    std::cout << o.result.dump() << "\n";
    failed = failed || !o.ok;
  }
  return failed ? kPartial : kOk;
}

// ---- eval ----

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = std::string(detector::detail::trim(item));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

int cmd_eval(const std::string& in_path, const std::string& metric_list,
             const std::string& out_path, std::size_t jobs) {
  const auto metrics = split_list(metric_list);
  if (metrics.empty()) throw UsageError("no metrics requested");
  for (const auto& m : metrics) {
    if (m != "rouge" && m != "bleu1" && m != "bleu2") throw UsageError("unknown metric '" + m + "'");
  }
  const auto records = read_jsonl(in_path);
  std::vector<Outcome> outcomes(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    outcomes[i] = guarded(records[i], [&](const json& j) {
      const auto hyp = required_string(j, "hypothesis");
      const auto ref = required_string(j, "reference");
      json row = {{"id", record_id(records[i])}};
      for (const auto& m : metrics) {
        if (m == "rouge") row["rouge_l"] = metrics::rouge_l(hyp, ref).f1;
        if (m == "bleu1") row["bleu1"] = metrics::bleu(hyp, ref, 1);
        if (m == "bleu2") row["bleu2"] = metrics::bleu(hyp, ref, 2);
      }
      // Externally computed BERTScore is carried through, never computed here.
      if (j.contains("bertscore")) row["bertscore"] = j["bertscore"].get<double>();
      return row;
    });
  });

  std::ofstream per_id;
  if (!out_path.empty()) {
    per_id.open(out_path);
    if (!per_id) throw UsageError("cannot write " + out_path);
  }
  std::vector<std::string> columns;
  for (const auto& m : metrics) columns.push_back(m == "rouge" ? "rouge_l" : m);
  columns.push_back("bertscore");
  std::map<std::string, std::vector<double>> values;
  bool failed = false;
  for (const auto& o : outcomes) {
    if (per_id.is_open()) per_id << o.result.dump() << "\n";
    if (!o.ok) {
      failed = true;
      std::cerr << "error: " << o.result.dump() << "\n";
      continue;
    }
    for (const auto& c : columns) {
      if (o.result.contains(c)) values[c].push_back(o.result[c].get<double>());
    }
  }
  std::cout << std::left << std::setw(10) << "metric" << std::setw(20) << "mean +/- std"
            << "n\n";
  for (const auto& c : columns) {
    if (!values.count(c)) continue;
    const auto ms = metrics::mean_std(values[c]);
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(2) << ms.mean << " +/- " << ms.std;
    std::cout << std::left << std::setw(10) << c << std::setw(20) << cell.str() << ms.n << "\n";
  }
  return failed ? kPartial : kOk;
}

// ---- stats ----

int cmd_stats(const std::string& ratings_path, bool as_json) {
  std::ifstream in(ratings_path);
  if (!in) throw UsageError("cannot read " + ratings_path);
  const auto reports = stats::domain_reports(stats::read_ratings_csv(in));
  auto fixed = [](double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
  };
  if (as_json) {
    for (const auto& d : reports) {
      json j = {{"domain", d.domain},
                {"raters", d.raters},
                {"correct", d.correct},
                {"accuracy", d.accuracy},
                {"mean_vanilla", d.mean_vanilla},
                {"mean_agentic", d.mean_agentic}};
      j["effect_size"] = d.effect_size ? json(*d.effect_size) : json(nullptr);
      j["wilcoxon_w"] = d.wilcoxon ? json(d.wilcoxon->w) : json(nullptr);
      j["wilcoxon_p"] = d.wilcoxon ? json(d.wilcoxon->p) : json(nullptr);
      j["dominance_p"] = d.dominance_p;
      std::cout << j.dump() << "\n";
    }
    return kOk;
  }
  const std::vector<std::pair<std::string, int>> header = {
      {"Domain", 16},        {"n", 4},          {"Acc. (%)", 10}, {"Vanilla", 9},
      {"AgenticSum", 12},    {"Effect", 8},     {"Wilcoxon p", 12}, {"Dominance p", 12}};
  for (const auto& [name, w] : header) std::cout << std::left << std::setw(w) << name;
  std::cout << "\n";
  for (const auto& d : reports) {
    const std::vector<std::string> cells = {
        d.domain,
        std::to_string(d.raters),
        fixed(d.accuracy, 1),
        fixed(d.mean_vanilla, 2),
        fixed(d.mean_agentic, 2),
        d.effect_size ? fixed(*d.effect_size, 3) : "n/a",
        d.wilcoxon ? stats::format_p(d.wilcoxon->p) : "n/a",
        stats::format_p(d.dominance_p)};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::cout << std::left << std::setw(header[c].second) << cells[c];
    }
    std::cout << "\n";
  }
  return kOk;
}

// ---- serve ----

int cmd_serve(const Settings& s, const std::string& host, int port) {
  const auto backend = s.make_backend();
  httplib::Server server;
  remote::ServerInfo info;
  info.model_id = backend->identity();
  remote::mount(server, *backend, info);
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    return kUsage;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-grounded summarization with supervised refinement"};
  app.require_subcommand(1);

  Settings settings;
  std::string in_path, out_path, metric_list = "rouge,bleu1,bleu2", ratings, host = "127.0.0.1";
  int port = 8080;
  bool stats_json = false;

  auto* summarize = app.add_subcommand("summarize", "run the pipeline over a JSONL corpus");
  summarize->add_option("--in", in_path, "JSONL records {id, text}")->required();
  summarize->add_option("--out", out_path, "output directory")->required();
  add_backend_flags(*summarize, settings);
  add_pipeline_flags(*summarize, settings);

  auto* focus_cmd = app.add_subcommand("focus", "compress documents and print kept sentences");
  focus_cmd->add_option("--in", in_path, "JSONL records {id, text}")->required();
  add_backend_flags(*focus_cmd, settings);
  add_pipeline_flags(*focus_cmd, settings);

  auto* detect_cmd = app.add_subcommand("detect", "score summary spans against documents");
  detect_cmd->add_option("--in", in_path, "JSONL records {id, document, summary}")->required();
  add_backend_flags(*detect_cmd, settings);
  add_pipeline_flags(*detect_cmd, settings);

  auto* eval_cmd = app.add_subcommand("eval", "lexical overlap metrics");
  eval_cmd->add_option("--in", in_path, "JSONL records {id, hypothesis, reference}")->required();
  eval_cmd->add_option("--metrics", metric_list, "comma list of rouge, bleu1, bleu2")
      ->capture_default_str();
  eval_cmd->add_option("--out", out_path, "per-id scores as JSONL");
  eval_cmd->add_option("--jobs", settings.jobs, "worker threads");

  auto* stats_cmd = app.add_subcommand("stats", "human-evaluation statistics per domain");
  stats_cmd->add_option("--ratings", ratings,
                        "CSV: rater_id,domain,vanilla_severity,agentic_severity,correct_guess")
      ->required();
  stats_cmd->add_flag("--json", stats_json, "one JSON object per domain");

  auto* serve_cmd = app.add_subcommand("serve", "expose a backend over the HTTP wire protocol");
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--port", port)->capture_default_str();
  add_backend_flags(*serve_cmd, settings);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    for (auto* sub : {summarize, focus_cmd, detect_cmd, serve_cmd}) {
      if (sub->parsed()) settings.apply_config(*sub);
    }
    if (summarize->parsed()) return cmd_summarize(settings, in_path, out_path);
    if (focus_cmd->parsed()) return cmd_focus(settings, in_path);
    if (detect_cmd->parsed()) return cmd_detect(settings, in_path);
    if (eval_cmd->parsed()) return cmd_eval(in_path, metric_list, out_path, settings.jobs);
    if (stats_cmd->parsed()) return cmd_stats(ratings, stats_json);
    if (serve_cmd->parsed()) return cmd_serve(settings, host, port);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    const bool usage = e.kind() == ErrorKind::config || e.kind() == ErrorKind::parse ||
                       e.kind() == ErrorKind::validation;
    return usage ? kUsage : kPartial;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPartial;
  }
  return kUsage;
}
