// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "agenticsum/aura.hpp"
#include "agenticsum/detector.hpp"
#include "agenticsum/focus.hpp"
#include "agenticsum/metrics.hpp"
#include "agenticsum/mock_backend.hpp"
#include "agenticsum/stats.hpp"
#include "agenticsum/supervisor.hpp"
#include "oracles.hpp"

using namespace agenticsum;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

int failures = 0;

void criterion(const std::string& name, const std::string& tolerance,
               const std::function<void(Outcome&)>& body, double budget_s = 0.0) {
  Outcome out;
  const auto t0 = Clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.check(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (budget_s > 0.0) {
    std::ostringstream os;
    os << "runtime " << secs << " s exceeds " << budget_s << " s";
    out.check(secs < budget_s, os.str());
  }
  std::printf("%s  %-24s %7.3fs  [%s]%s%s\n", out.ok ? "PASS" : "FAIL", name.c_str(), secs,
              tolerance.c_str(), out.ok ? "" : "  ", out.detail.c_str());
  if (!out.ok) ++failures;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

text::Document random_document(std::mt19937& rng, std::size_t m) {
  static const char* words[] = {"cough", "fever", "rate", "dose", "stable", "lesion", "node",
                                "pending", "clinic", "review", "oxygen", "culture"};
  std::string t;
  for (std::size_t j = 0; j < m; ++j) {
    if (j) t += ' ';
    t += "Item";
    const std::size_t len = 1 + rng() % 8;
    for (std::size_t k = 0; k < len; ++k) t += std::string(" ") + words[rng() % 12];
    t += '.';
  }
  return text::make_document("r", t);
}

}  // namespace

int main() {
  criterion("salience_degeneracy", "beta == 1 and oracle match within 1e-9; runtime < 1 s", [](Outcome& o) {
    std::mt19937 rng(101);
    for (int i = 0; i < 100; ++i) {
      const auto a = oracle::random_tensor(rng, 1 + rng() % 8, 1 + rng() % 32, true);
      const double s = focus::salience_score(a);
      o.check(std::fabs(s - 1.0) <= 1e-9, "row-stochastic score " + fmt(s));
    }
    for (int i = 0; i < 100; ++i) {
      const auto a = oracle::random_tensor(rng, 1 + rng() % 8, 1 + rng() % 32, false);
      const double s = focus::salience_score(a), ref = oracle::salience_triple_sum(a);
      o.check(std::fabs(s - ref) <= 1e-9, "score " + fmt(s) + " vs oracle " + fmt(ref));
    }
  }, 1.0);

  criterion("focus_selection", "|kept| = clamp(floor(r*m),1,m), order, min-kept >= max-dropped, nesting; runtime < 1 s", [](Outcome& o) {
    std::mt19937 rng(202);
    MockOptions mo;
    mo.seed = 202;
    const MockBackend mock(mo);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t m = 1 + rng() % 50;
      const auto doc = random_document(rng, m);
      o.check(doc.sentences.size() == m, "generated document has wrong sentence count");
      std::vector<std::size_t> prev;
      for (int tenth = 1; tenth <= 10; ++tenth) {
        const double r = tenth / 10.0;
        const auto c = focus::compress(doc, r, focus::Scorer::received, mock);
        const auto kept = c.kept_indices();
        const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(r * m + 1e-9)), 1, m);
        o.check(kept.size() == k, "kept " + std::to_string(kept.size()) + " of " + std::to_string(m) +
                                      " at r=" + fmt(r));
        o.check(std::is_sorted(kept.begin(), kept.end()), "kept sentences out of order");
        double min_kept = INFINITY, max_dropped = -INFINITY;
        for (std::size_t j = 0; j < m; ++j) {
          const double b = c.scores[j].beta;
          if (std::binary_search(kept.begin(), kept.end(), j)) min_kept = std::min(min_kept, b);
          else max_dropped = std::max(max_dropped, b);
        }
        o.check(min_kept >= max_dropped, "a dropped sentence outscored a kept one");
        o.check(std::includes(kept.begin(), kept.end(), prev.begin(), prev.end()),
                "kept set not nested in r");
        prev = kept;
      }
    }
  }, 1.0);

  criterion("aura_properties", "range [0,1], monotone, closed forms within 1e-9", [](Outcome& o) {
    auto step = [](std::size_t heads, std::size_t len, std::vector<std::size_t> in, std::vector<double> w) {
      StepAttention s;
      s.step = 1;
      s.heads = heads;
      s.length = len;
      s.input_positions = std::move(in);
      s.weights = std::move(w);
      return s;
    };
    const double eps = aura::kDefaultEpsStab;
    const double all = aura::token_aura(step(2, 3, {0, 1, 2}, {0.2, 0.3, 0.5, 0.1, 0.1, 0.8}), eps);
    o.check(std::fabs(all - 1.0 / (1.0 + eps)) <= 1e-9, "all-input case " + fmt(all));
    const double none = aura::token_aura(step(2, 3, {}, {0.2, 0.3, 0.5, 0.1, 0.1, 0.8}), eps);
    o.check(std::fabs(none) <= 1e-9, "no-input case " + fmt(none));
    // Two heads with 0.8 and 0.2 on the input; eps taken as negligible.
    const auto two = step(2, 2, {0}, {0.8, 0.2, 0.2, 0.8});
    const double half = aura::token_aura(two, 1e-12);
    o.check(std::fabs(half - 0.5) <= 1e-9, "two-head case " + fmt(half));
    const double half_eps = aura::token_aura(two, eps);
    o.check(std::fabs(half_eps - 0.5 / (1.0 + eps)) <= 1e-9, "two-head case at default eps " + fmt(half_eps));

    std::mt19937 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t heads = 1 + rng() % 8, len = 2 + rng() % 32;
      std::vector<double> w(heads * len);
      for (auto& x : w) x = u(rng);
      std::vector<std::size_t> in;
      for (std::size_t i = 0; i < len; ++i)
        if (rng() % 2) in.push_back(i);
      auto s = step(heads, len, in, w);
      const double a = aura::token_aura(s, eps);
      o.check(a >= 0.0 && a <= 1.0, "score outside [0,1]: " + fmt(a));
      if (in.empty() || in.size() == len) continue;
      // Shift mass from one non-input position to an input position.
      std::size_t from = 0;
      while (std::find(in.begin(), in.end(), from) != in.end()) ++from;
      for (std::size_t h = 0; h < heads; ++h) {
        const double moved = s.weights[h * len + from] * u(rng);
        s.weights[h * len + from] -= moved;
        s.weights[h * len + in[0]] += moved;
      }
      o.check(aura::token_aura(s, eps) >= a - 1e-12, "more input mass lowered the score");
    }
  });

  criterion("detector_set_law", "exact set equality on 1000 tables", [](Outcome& o) {
    std::mt19937 rng(404);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<aura::SpanGrounding> spans(rng() % 16);
      for (std::size_t j = 0; j < spans.size(); ++j) {
        spans[j].index = j;
        spans[j].text = "span " + std::to_string(j);
        spans[j].a = u(rng);
        spans[j].h = rng() % 4 == 0;
      }
      double t1 = u(rng), t2 = u(rng);
      if (t1 > t2) std::swap(t1, t2);
      const auto h1 = detector::flag_spans(spans, t1), h2 = detector::flag_spans(spans, t2);
      std::vector<std::size_t> brute, got;
      for (const auto& s : spans)
        if (s.h || s.a < t1) brute.push_back(s.index);
      for (const auto& f : h1.flagged) got.push_back(f.index);
      o.check(got == brute, "hallucination set differs from brute force");
      for (const auto& f : h1.flagged) o.check(h2.contains(f.index), "set shrank as tau grew");
    }
  });

  criterion("refinement_conformance", "empty_hset in <= 2 fixes, 0 fixes, T_max fixes, exact recompute; runtime < 5 s", [](Outcome& o) {
    const auto note = [](const char* f) { return text::make_document(f, oracle::read_fixture(f)); };
    std::vector<RefinementTrace> traces;

    // (a) a fabricated sentence is removed and the loop stops on an empty set
    const auto fab = run_pipeline(note("discharge_note.txt"), {}, oracle::fabricating_mock());
    o.check(fab.halt_reason == HaltReason::empty_hset, "(a) halt " + std::string(to_string(fab.halt_reason)));
    o.check(fab.fix_calls <= 2, "(a) took " + std::to_string(fab.fix_calls) + " iterations");
    o.check(fab.final_summary.find(oracle::kFabricated) == std::string::npos, "(a) fabricated text kept");
    traces.push_back(fab);

    // (b) nothing to fix
    const MockBackend plain;
    for (const char* f : {"discharge_note.txt", "followup_note.txt", "headache_note.txt"}) {
      const auto sup = run_pipeline(note(f), {}, plain);
      o.check(sup.fix_calls == 0, std::string("(b) fix calls on ") + f);
      traces.push_back(sup);
    }

    // (c) revisions that keep adding unsupported content exhaust the budget
    for (std::size_t tmax : {1, 2, 3, 5}) {
      PipelineConfig c;
      c.t_max = tmax;
      const auto adv = run_pipeline(note("headache_note.txt"), c, oracle::adversarial_mock());
      o.check(adv.fix_calls == tmax, "(c) fix calls " + std::to_string(adv.fix_calls) +
                                         " with t_max " + std::to_string(tmax));
      o.check(adv.halt_reason == HaltReason::budget,
              "(c) halt " + std::string(to_string(adv.halt_reason)));
      traces.push_back(adv);
    }

    // (d) every recorded state recomputes from its spans
    for (const auto& tr : traces) {
      const auto problems = check_consistency(tr);
      o.check(problems.empty(), "(d) " + (problems.empty() ? std::string() : problems.front()));
    }
  }, 5.0);

  criterion("template_fidelity", "verbatim anchors, exact parse", [](Outcome& o) {
    const auto ep = detector::build_entailment_prompt("doc", "span");
    o.check(ep.find("DO NOT infer or assume missing information.") != std::string::npos,
            "entailment anchor missing");
    const auto jp = metrics::build_judge_prompt("doc", "sum");
    o.check(jp.find("Hallucination: X") != std::string::npos, "judge anchor missing");
    const auto v = detector::parse_entailment_response(oracle::read_fixture("annotation_output.txt"));
    o.check(v.label == EntailmentLabel::not_entailed, "example label not parsed as Not Entailed");
    o.check(v.problematic_spans == std::vector<std::string>{"history of diabetes"},
            "example problematic span not parsed");
    bool rejected = false;
    try {
      metrics::parse_judge_scores("Hallucination: 2\nFactual: 6\nComplete: 3\nCoherent: 4");
    } catch (const Error& e) {
      rejected = e.kind() == ErrorKind::validation;
    }
    o.check(rejected, "judge parser accepted Factual: 6");
  });

  criterion("metrics", "ROUGE-L exact vs DP, BLEU-2 within 0.01, identity = 100", [](Outcome& o) {
    std::mt19937 rng(707);
    for (int trial = 0; trial < 200; ++trial) {
      const auto a = oracle::random_words(rng, 12, 5), b = oracle::random_words(rng, 12, 5);
      o.check(metrics::lcs_length(a, b) == oracle::lcs_table(a, b), "LCS differs from DP oracle");
      std::string ha, hb;
      for (const auto& w : a) ha += w + " ";
      for (const auto& w : b) hb += w + " ";
      const auto r = metrics::rouge_l(ha, hb);
      if (!a.empty() && !b.empty()) {
        const double lcs = static_cast<double>(oracle::lcs_table(a, b));
        const double p = lcs / a.size(), rc = lcs / b.size();
        const double f = p + rc > 0 ? 100.0 * 2 * p * rc / (p + rc) : 0.0;
        o.check(std::fabs(r.f1 - f) <= 1e-9, "ROUGE-L F1 " + fmt(r.f1) + " vs " + fmt(f));
      }
    }
    const double b2 = metrics::bleu("the cat sat", "the cat sat down", 2);
    o.check(std::fabs(b2 - 100.0 * std::exp(-1.0 / 3.0)) <= 0.01, "BLEU-2 hand case " + fmt(b2));
    const std::string x = "Rate control was achieved with metoprolol.";
    o.check(metrics::bleu(x, x, 1) == 100.0 && metrics::bleu(x, x, 2) == 100.0 &&
                metrics::rouge_l(x, x).f1 == 100.0,
            "identity inputs do not score 100");
  });

  criterion("human_eval_statistics", "p(18,23) in [0.0045,0.0055], p < 0.001, accuracy exact; runtime < 0.1 s", [](Outcome& o) {
    const double d18 = stats::binomial_dominance(18, 23);
    o.check(d18 >= 0.0045 && d18 <= 0.0055, "dominance(18,23) = " + fmt(d18));
    o.check(stats::format_p(d18) == "0.005", "dominance(18,23) prints " + stats::format_p(d18));
    o.check(std::fabs(d18 - oracle::binomial_tail(18, 23)) <= 1e-15, "dominance(18,23) vs tail sum");
    const double d21 = stats::binomial_dominance(21, 23), d20 = stats::binomial_dominance(20, 23);
    o.check(d21 < 0.001, "dominance(21,23) = " + fmt(d21));
    o.check(d20 < 0.001, "dominance(20,23) = " + fmt(d20));
    o.check(stats::correct_guess_accuracy(21, 23) == 91.3, "accuracy(21,23)");
    o.check(stats::correct_guess_accuracy(18, 23) == 78.3, "accuracy(18,23)");
    o.check(stats::correct_guess_accuracy(20, 23) == 87.0, "accuracy(20,23)");
  }, 0.1);

  criterion("wilcoxon_exact", "p within 1e-12 of enumeration", [](Outcome& o) {
    std::mt19937 rng(909);
    std::uniform_int_distribution<int> d(-4, 4);
    int done = 0;
    while (done < 50) {
      std::vector<double> diffs(1 + rng() % 10);
      for (auto& x : diffs) x = d(rng);
      if (std::all_of(diffs.begin(), diffs.end(), [](double x) { return x == 0.0; })) continue;
      const auto ref = oracle::wilcoxon_enumerate(diffs);
      const auto g = stats::wilcoxon_signed_rank(diffs, stats::Alternative::greater);
      const auto t = stats::wilcoxon_signed_rank(diffs, stats::Alternative::two_sided);
      o.check(std::fabs(g.p - ref.p_greater) <= 1e-12,
              "one-sided p " + fmt(g.p) + " vs " + fmt(ref.p_greater));
      o.check(std::fabs(t.p - ref.p_two_sided) <= 1e-12,
              "two-sided p " + fmt(t.p) + " vs " + fmt(ref.p_two_sided));
      o.check(g.w == ref.w, "W " + fmt(g.w) + " vs " + fmt(ref.w));
      ++done;
    }
  });

  criterion("ablation_modes", "1 state/0 fixes, draft prefix equal, 1 fix pass", [](Outcome& o) {
    const auto doc = text::make_document("d", oracle::read_fixture("discharge_note.txt"));
    const auto mock = oracle::fabricating_mock();
    PipelineConfig c;
    c.mode = Mode::vanilla;
    const auto v = run_pipeline(doc, c, mock);
    o.check(v.states.size() == 1 && v.fix_calls == 0, "vanilla trace shape");
    c.mode = Mode::draft;
    const auto d = run_pipeline(doc, c, mock);
    c.mode = Mode::full;
    const auto f = run_pipeline(doc, c, mock);
    o.check(d.states.size() == 1 && d.states[0] == f.states[0] && d.focus == f.focus,
            "draft trace is not the t=0 prefix of the full trace");
    c.mode = Mode::fix_nosup;
    const auto n = run_pipeline(doc, c, mock);
    o.check(n.fix_calls == 1, "fix_nosup made " + std::to_string(n.fix_calls) + " fix passes");
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
