// Copyright 2026 the ranklab authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ranklab/data.hpp"
#include "ranklab/tensor.hpp"

namespace ranklab {

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
};

/// A query's retrieval output in evaluation order: score descending, doc-id
/// ascending on ties, no duplicate doc ids.
class RankedList {
 public:
  RankedList(std::string query_id, std::vector<ScoredDoc> docs)
      : query_id_(std::move(query_id)), docs_(std::move(docs)) {
    std::sort(docs_.begin(), docs_.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.doc_id < b.doc_id;
    });
    for (std::size_t i = 1; i < docs_.size(); ++i) {
      if (docs_[i].doc_id == docs_[i - 1].doc_id) {
        throw std::invalid_argument("RankedList: duplicate doc id '" + docs_[i].doc_id +
                                    "' for query '" + query_id_ + "'");
      }
    }
  }

  const std::string& query_id() const { return query_id_; }
  const std::vector<ScoredDoc>& docs() const { return docs_; }

 private:
  std::string query_id_;
  std::vector<ScoredDoc> docs_;
};

// ---------------------------------------------------------------------------
// Per-query metrics
// ---------------------------------------------------------------------------

namespace detail {

inline void check_cutoff(std::size_t k) {
  if (k < 1) throw std::invalid_argument("metric cutoff must be >= 1");
}

inline bool warn_if_unjudged(const RankedList& ranked, const QrelSet& qrels, WarningSink sink) {
  if (qrels.has_query(ranked.query_id())) return false;
  warn(sink, "query '" + ranked.query_id() + "' absent from qrels, scoring 0");
  return true;
}

}  // namespace detail

/// Reciprocal rank of the first relevant (grade > 0) document within the top
/// k, else 0.
inline double mrr_at_k(const RankedList& ranked, const QrelSet& qrels, std::size_t k,
                       WarningSink warnings = nullptr) {
  detail::check_cutoff(k);
  if (detail::warn_if_unjudged(ranked, qrels, warnings)) return 0.0;
  const std::size_t depth = std::min(k, ranked.docs().size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (qrels.grade(ranked.query_id(), ranked.docs()[r].doc_id) > 0) {
      return 1.0 / static_cast<double>(r + 1);
    }
  }
  return 0.0;
}

/// DCG@k with gain (2^g - 1) / log2(rank + 1), normalized by the ideal DCG
/// over the query's judged documents; 0 when no relevant document exists.
inline double ndcg_at_k(const RankedList& ranked, const QrelSet& qrels, std::size_t k,
                        WarningSink warnings = nullptr) {
  detail::check_cutoff(k);
  if (detail::warn_if_unjudged(ranked, qrels, warnings)) return 0.0;
  auto gain = [](int g) { return std::pow(2.0, g) - 1.0; };
  double dcg = 0.0;
  const std::size_t depth = std::min(k, ranked.docs().size());
  for (std::size_t r = 0; r < depth; ++r) {
    dcg += gain(qrels.grade(ranked.query_id(), ranked.docs()[r].doc_id)) /
           std::log2(static_cast<double>(r) + 2.0);
  }
  std::vector<int> grades;
  for (const auto& [doc, g] : qrels.judged(ranked.query_id())) grades.push_back(g);
  std::sort(grades.begin(), grades.end(), std::greater<int>());
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, grades.size()); ++r) {
    idcg += gain(grades[r]) / std::log2(static_cast<double>(r) + 2.0);
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

/// Expected reciprocal rank under the cascade model with stop probability
/// R = (2^g - 1) / 2^gmax.
inline double err_at_k(const RankedList& ranked, const QrelSet& qrels, std::size_t k, int gmax,
                       WarningSink warnings = nullptr) {
  detail::check_cutoff(k);
  if (gmax < 1) throw std::invalid_argument("err_at_k: gmax must be >= 1");
  if (detail::warn_if_unjudged(ranked, qrels, warnings)) return 0.0;
  const double denom = std::pow(2.0, gmax);
  double err = 0.0;
  double continue_p = 1.0;
  const std::size_t depth = std::min(k, ranked.docs().size());
  for (std::size_t r = 0; r < depth; ++r) {
    const int g = qrels.grade(ranked.query_id(), ranked.docs()[r].doc_id);
    if (g > gmax) {
      throw std::invalid_argument("err_at_k: grade " + std::to_string(g) + " exceeds gmax " +
                                  std::to_string(gmax));
    }
    const double stop = (std::pow(2.0, g) - 1.0) / denom;
    err += continue_p * stop / static_cast<double>(r + 1);
    continue_p *= 1.0 - stop;
  }
  return err;
}

// ---------------------------------------------------------------------------
// Run evaluation
// ---------------------------------------------------------------------------

enum class Metric { kMrr, kNdcg, kErr };

struct MetricSpec {
  Metric metric = Metric::kMrr;
  std::size_t k = 10;
  int gmax = 1;  // ERR only; 1 fits binary labels, 4 fits graded TREC-style

  std::string name() const {
    switch (metric) {
      case Metric::kMrr: return "mrr@" + std::to_string(k);
      case Metric::kNdcg: return "ndcg@" + std::to_string(k);
      case Metric::kErr: return "err@" + std::to_string(k);
    }
    return "?";
  }
};

inline MetricSpec metric_spec_from_string(const std::string& s, int gmax = 0) {
  const std::size_t at = s.find('@');
  if (at == std::string::npos) {
    throw std::invalid_argument("metric spec '" + s + "': expected <name>@<k>");
  }
  const std::string name = s.substr(0, at);
  MetricSpec spec;
  spec.k = static_cast<std::size_t>(parse_long(s.substr(at + 1), "metric cutoff"));
  detail::check_cutoff(spec.k);
  if (name == "mrr") {
    spec.metric = Metric::kMrr;
  } else if (name == "ndcg") {
    spec.metric = Metric::kNdcg;
  } else if (name == "err") {
    spec.metric = Metric::kErr;
  } else {
    throw std::invalid_argument("unknown metric '" + name + "' (expected mrr|ndcg|err)");
  }
  if (gmax > 0) spec.gmax = gmax;
  return spec;
}

inline double eval_metric(const RankedList& ranked, const QrelSet& qrels, const MetricSpec& spec,
                          WarningSink warnings = nullptr) {
  switch (spec.metric) {
    case Metric::kMrr: return mrr_at_k(ranked, qrels, spec.k, warnings);
    case Metric::kNdcg: return ndcg_at_k(ranked, qrels, spec.k, warnings);
    case Metric::kErr: return err_at_k(ranked, qrels, spec.k, spec.gmax, warnings);
  }
  throw std::invalid_argument("eval_metric: unhandled metric");
}

/// Per-query values and their arithmetic mean for one metric.
struct MetricReport {
  std::string metric_name;
  std::vector<std::pair<std::string, double>> per_query;  // qid order
  double mean = 0.0;
};

inline void write_metric_report(std::ostream& os, const MetricReport& report) {
  os << "qid,value\n";
  for (const auto& [qid, v] : report.per_query) os << qid << ',' << format_double(v) << '\n';
  os << "mean," << format_double(report.mean) << '\n';
}

/// Groups a run file by query and scores every query in the qrels; queries
/// missing from the run count 0, queries only in the run are warned about
/// and skipped.
inline MetricReport evaluate_run(const RunFile& run, const QrelSet& qrels, const MetricSpec& spec,
                                 WarningSink warnings = nullptr) {
  std::map<std::string, std::vector<ScoredDoc>> by_query;
  for (const RunEntry& e : run) {
    if (!qrels.has_query(e.query_id)) {
      detail::warn(warnings, "run query '" + e.query_id + "' has no judgments, skipping");
      continue;
    }
    by_query[e.query_id].push_back(ScoredDoc{e.doc_id, e.score});
  }
  MetricReport report;
  report.metric_name = spec.name();
  double total = 0.0;
  for (const std::string& qid : qrels.query_ids()) {
    double value = 0.0;
    const auto it = by_query.find(qid);
    if (it != by_query.end()) {
      value = eval_metric(RankedList(qid, it->second), qrels, spec, warnings);
    }
    report.per_query.emplace_back(qid, value);
    total += value;
  }
  report.mean = report.per_query.empty()
                    ? 0.0
                    : total / static_cast<double>(report.per_query.size());
  return report;
}

// ---------------------------------------------------------------------------
// Paired permutation (sign-flip) significance test
// ---------------------------------------------------------------------------

/// Two-sided paired randomization test on per-query values. For up to 12
/// queries every sign assignment is enumerated and the p-value is exact and
/// seed-independent; above that, n_perm Monte Carlo flips with add-one
/// smoothing: p = (1 + #{|mean diff perm| >= |mean diff obs|}) / (1 + n_perm).
inline double permutation_test(const std::vector<double>& per_query_a,
                               const std::vector<double>& per_query_b, std::size_t n_perm,
                               std::uint64_t seed) {
  if (per_query_a.size() != per_query_b.size()) {
    throw std::invalid_argument("permutation_test: length mismatch " +
                                std::to_string(per_query_a.size()) + " vs " +
                                std::to_string(per_query_b.size()));
  }
  if (per_query_a.empty()) throw std::invalid_argument("permutation_test: empty input");
  if (n_perm < 1) throw std::invalid_argument("permutation_test: n_perm must be >= 1");
  const std::size_t n = per_query_a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = per_query_a[i] - per_query_b[i];
  auto mean_abs = [&](auto&& sign_of) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += sign_of(i) ? -diff[i] : diff[i];
    return std::abs(s / static_cast<double>(n));
  };
  const double observed = mean_abs([](std::size_t) { return false; });
  // Ties at the boundary must count consistently across enumeration and
  // sampling despite reordering roundoff.
  const double tol = 1e-12 * std::max(1.0, observed);

  if (n <= 12) {
    const std::uint64_t total = 1ull << n;
    std::uint64_t count = 0;
    for (std::uint64_t bits = 0; bits < total; ++bits) {
      const double m = mean_abs([bits](std::size_t i) { return (bits >> i) & 1ull; });
      if (m >= observed - tol) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(total);
  }

  Rng rng(seed);
  std::uint64_t count = 0;
  for (std::size_t p = 0; p < n_perm; ++p) {
    std::vector<bool> flip(n);
    for (std::size_t i = 0; i < n; ++i) flip[i] = rng.bernoulli(0.5);
    const double m = mean_abs([&flip](std::size_t i) { return static_cast<bool>(flip[i]); });
    if (m >= observed - tol) ++count;
  }
  return static_cast<double>(1 + count) / static_cast<double>(1 + n_perm);
}

/// Paired comparison of two runs under one metric: means plus the sign-flip
/// p-value over the shared per-query values.
struct SignificanceReport {
  std::string metric_name;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double p_value = 1.0;
};

inline SignificanceReport compare_runs(const RunFile& run_a, const RunFile& run_b,
                                       const QrelSet& qrels, const MetricSpec& spec,
                                       std::size_t n_perm, std::uint64_t seed,
                                       WarningSink warnings = nullptr) {
  const MetricReport ra = evaluate_run(run_a, qrels, spec, warnings);
  const MetricReport rb = evaluate_run(run_b, qrels, spec, warnings);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < ra.per_query.size(); ++i) {
    a.push_back(ra.per_query[i].second);
    b.push_back(rb.per_query[i].second);
  }
  SignificanceReport report;
  report.metric_name = spec.name();
  report.mean_a = ra.mean;
  report.mean_b = rb.mean;
  report.p_value = permutation_test(a, b, n_perm, seed);
  return report;
}

inline void write_significance_report(std::ostream& os, const SignificanceReport& report) {
  os << "metric,mean_a,mean_b,p_value\n";
  os << report.metric_name << ',' << format_double(report.mean_a) << ','
     << format_double(report.mean_b) << ',' << format_double(report.p_value) << '\n';
}

}  // namespace ranklab
