#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "agenticsum/error.hpp"

namespace agenticsum::stats {

struct RatingPair {
  int vanilla = 1;  // severity 1 (none) .. 5 (severe)
  int agentic = 1;
};

struct PairedRatings {
  std::string domain;
  std::vector<RatingPair> pairs;

  void validate() const {
    if (pairs.empty()) fail(ErrorKind::precondition, "no ratings for domain '" + domain + "'");
    for (const auto& p : pairs) {
      if (p.vanilla < 1 || p.vanilla > 5 || p.agentic < 1 || p.agentic > 5) {
        fail(ErrorKind::validation, "severity ratings must lie in [1, 5]");
      }
    }
  }

  /// vanilla - agentic per rater; positive means the agentic summary was rated less severe.
  std::vector<double> differences() const {
    std::vector<double> d;
    d.reserve(pairs.size());
    for (const auto& p : pairs) d.push_back(static_cast<double>(p.vanilla - p.agentic));
    return d;
  }
};

enum class Alternative { greater, two_sided };

struct WilcoxonResult {
  double w = 0.0;   // sum of ranks of positive differences
  double p = 1.0;
  std::size_t n = 0;  // nonzero differences used
  bool exact = true;
};

inline constexpr std::size_t kExactWilcoxonLimit = 20;

/// Average ranks (1-based) of |d|, ties sharing the mean of their positions.
inline std::vector<double> abs_ranks(const std::vector<double>& d) {
  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });
  std::vector<double> ranks(d.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Paired signed-rank test on differences. Zero differences are dropped
/// before ranking. Exact null distribution for n <= 20, otherwise the normal
/// approximation with tie and continuity corrections.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences,
                                           Alternative alt = Alternative::greater) {
  std::vector<double> d;
  for (double x : differences) {
    if (x != 0.0) d.push_back(x);
  }
  if (d.empty()) fail(ErrorKind::undefined_test, "all paired differences are zero");
  const auto ranks = abs_ranks(d);
  WilcoxonResult out;
  out.n = d.size();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0) out.w += ranks[i];
  }

  if (out.n <= kExactWilcoxonLimit) {
    // Doubled ranks are integers, so the null distribution of 2W is a
    // subset-sum count over 2^n equally likely sign patterns.
    std::vector<std::uint64_t> doubled;
    std::uint64_t total = 0;
    for (double r : ranks) {
      doubled.push_back(static_cast<std::uint64_t>(std::llround(2.0 * r)));
      total += doubled.back();
    }
    std::vector<std::uint64_t> counts(total + 1, 0);
    counts[0] = 1;
    for (auto r : doubled) {
      for (std::uint64_t s = total; s + 1 > r; --s) counts[s] += counts[s - r];
    }
    const auto w2 = static_cast<std::uint64_t>(std::llround(2.0 * out.w));
    std::uint64_t upper = 0, lower = 0;
    for (std::uint64_t s = 0; s <= total; ++s) {
      if (s >= w2) upper += counts[s];
      if (s <= w2) lower += counts[s];
    }
    const double denom = std::ldexp(1.0, static_cast<int>(out.n));
    const double p_upper = static_cast<double>(upper) / denom;
    const double p_lower = static_cast<double>(lower) / denom;
    out.p = alt == Alternative::greater ? p_upper : std::min(1.0, 2.0 * std::min(p_upper, p_lower));
    return out;
  }

  out.exact = false;
  const double n = static_cast<double>(out.n);
  const double mean = n * (n + 1.0) / 4.0;
  double tie = 0.0;
  {
    std::map<double, std::size_t> groups;
    for (double r : ranks) ++groups[r];
    for (const auto& [_, t] : groups) {
      const double tt = static_cast<double>(t);
      tie += tt * tt * tt - tt;
    }
  }
  const double sd = std::sqrt(n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie / 48.0);
  if (alt == Alternative::greater) {
    const double z = (out.w - mean - 0.5) / sd;
    out.p = 0.5 * std::erfc(z / std::sqrt(2.0));
  } else {
    const double z = (std::fabs(out.w - mean) - 0.5) / sd;
    out.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  }
  return out;
}

inline WilcoxonResult wilcoxon_signed_rank(const PairedRatings& ratings,
                                           Alternative alt = Alternative::greater) {
  ratings.validate();
  return wilcoxon_signed_rank(ratings.differences(), alt);
}

/// (n+ - n-) / (n+ + n-) over nonzero differences.
inline double rank_biserial(const std::vector<double>& differences) {
  std::size_t pos = 0, neg = 0;
  for (double x : differences) {
    if (x > 0) ++pos;
    if (x < 0) ++neg;
  }
  if (pos + neg == 0) fail(ErrorKind::undefined_test, "all paired differences are zero");
  return (static_cast<double>(pos) - static_cast<double>(neg)) / static_cast<double>(pos + neg);
}

inline double rank_biserial(const PairedRatings& ratings) {
  ratings.validate();
  return rank_biserial(ratings.differences());
}

inline constexpr std::size_t kExactBinomialLimit = 64;

/// Exact C(n, k) for n <= 64.
inline unsigned __int128 binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 c = 1;
  for (std::size_t i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

/// One-sided P(X >= successes) for X ~ Binomial(n, 1/2).
inline double binomial_dominance(std::size_t successes, std::size_t n) {
  if (successes > n) fail(ErrorKind::precondition, "successes exceed trials");
  if (n <= kExactBinomialLimit) {
    unsigned __int128 tail = 0;
    for (std::size_t k = successes; k <= n; ++k) tail += binomial(n, k);
    return static_cast<double>(static_cast<long double>(tail) / std::ldexp(1.0L, static_cast<int>(n)));
  }
  long double tail = 0.0L;
  for (std::size_t k = successes; k <= n; ++k) {
    tail += std::exp(std::lgamma(static_cast<long double>(n) + 1) -
                     std::lgamma(static_cast<long double>(k) + 1) -
                     std::lgamma(static_cast<long double>(n - k) + 1) -
                     static_cast<long double>(n) * std::log(2.0L));
  }
  return static_cast<double>(std::min(tail, 1.0L));
}

/// 100 * successes / n, rounded to one decimal.
inline double correct_guess_accuracy(std::size_t successes, std::size_t n) {
  if (n == 0) fail(ErrorKind::precondition, "no raters");
  if (successes > n) fail(ErrorKind::precondition, "successes exceed raters");
  return std::round(1000.0 * static_cast<double>(successes) / static_cast<double>(n)) / 10.0;
}

inline std::string format_p(double p) {
  if (p < 0.001) return "<0.001";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << p;
  return os.str();
}

// ---- rater table ----

struct RaterRow {
  std::string rater_id;
  std::string domain;
  int vanilla = 1;
  int agentic = 1;
  bool correct_guess = false;
};

struct DomainReport {
  std::string domain;
  std::size_t raters = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double mean_vanilla = 0.0;
  double mean_agentic = 0.0;
  std::optional<double> effect_size;    // undefined when every difference is zero
  std::optional<WilcoxonResult> wilcoxon;
  double dominance_p = 1.0;
};

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return std::string(s);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_bool(const std::string& s) {
  std::string v;
  for (char c : s) v.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (v == "1" || v == "true" || v == "yes" || v == "y") return true;
  if (v == "0" || v == "false" || v == "no" || v == "n") return false;
  fail(ErrorKind::parse, "not a boolean: '" + s + "'");
}

inline int parse_rating(const std::string& s) {
  int v = 0;
  std::istringstream is(s);
  if (!(is >> v) || !is.eof()) fail(ErrorKind::parse, "not an integer rating: '" + s + "'");
  if (v < 1 || v > 5) fail(ErrorKind::validation, "rating outside [1, 5]: " + s);
  return v;
}

}  // namespace detail

/// Reads "rater_id,domain,vanilla_severity,agentic_severity,correct_guess"
/// rows. The header line is required.
inline std::vector<RaterRow> read_ratings_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::parse, "ratings file is empty");
  const auto header = detail::split_csv(line);
  const std::vector<std::string> expected = {"rater_id", "domain", "vanilla_severity",
                                             "agentic_severity", "correct_guess"};
  if (header != expected) fail(ErrorKind::parse, "unexpected ratings header: " + line);
  std::vector<RaterRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 5) {
      fail(ErrorKind::parse, "line " + std::to_string(lineno) + ": expected 5 columns");
    }
    rows.push_back({cells[0], cells[1], detail::parse_rating(cells[2]),
                    detail::parse_rating(cells[3]), detail::parse_bool(cells[4])});
  }
  return rows;
}

/// Per-domain accuracy, mean severities, effect size, Wilcoxon p
/// (one-sided, vanilla more severe) and dominance p, in first-seen order.
inline std::vector<DomainReport> domain_reports(const std::vector<RaterRow>& rows) {
  std::vector<DomainReport> out;
  std::map<std::string, PairedRatings> ratings;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const DomainReport& d) { return d.domain == r.domain; });
    if (it == out.end()) {
      out.push_back({});
      out.back().domain = r.domain;
      it = std::prev(out.end());
      ratings[r.domain].domain = r.domain;
    }
    ++it->raters;
    if (r.correct_guess) ++it->correct;
    it->mean_vanilla += r.vanilla;
    it->mean_agentic += r.agentic;
    ratings[r.domain].pairs.push_back({r.vanilla, r.agentic});
  }
  for (auto& d : out) {
    d.accuracy = correct_guess_accuracy(d.correct, d.raters);
    d.mean_vanilla /= static_cast<double>(d.raters);
    d.mean_agentic /= static_cast<double>(d.raters);
    d.dominance_p = binomial_dominance(d.correct, d.raters);
    const auto& pr = ratings[d.domain];
    try {
      d.effect_size = rank_biserial(pr);
      d.wilcoxon = wilcoxon_signed_rank(pr, Alternative::greater);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::undefined_test) throw;
    }
  }
  return out;
}

}  // namespace agenticsum::stats
