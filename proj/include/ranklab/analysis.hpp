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

#include <array>
#include <set>
#include <string>
#include <vector>

#include "ranklab/data.hpp"
#include "ranklab/evaluation.hpp"
#include "ranklab/rankers.hpp"
#include "ranklab/tokenizer.hpp"

namespace ranklab {

// ---------------------------------------------------------------------------
// Reranking (shared by the CLI and the ablation study)
// ---------------------------------------------------------------------------

/// Scores every candidate and emits TREC run entries, query order preserved,
/// each query sorted score-descending with doc-id tie-break.
inline RunFile rerank_candidates(const RankerModel& model,
                                 const std::vector<CandidateSet>& candidates,
                                 const std::string& tag, EncodeOptions encode_opts = {},
                                 WarningSink warnings = nullptr) {
  RunFile run;
  for (const CandidateSet& set : candidates) {
    const std::vector<std::string> q_tokens = tokenize(set.query_text);
    std::vector<ScoredDoc> scored;
    scored.reserve(set.docs.size());
    for (const Candidate& c : set.docs) {
      scored.push_back(
          {c.doc_id, score_pair(model, q_tokens, tokenize(c.text), warnings, encode_opts).value()});
    }
    const RankedList list(set.query_id, std::move(scored));
    for (std::size_t r = 0; r < list.docs().size(); ++r) {
      run.push_back(RunEntry{set.query_id, list.docs()[r].doc_id, static_cast<long>(r + 1),
                             list.docs()[r].score, tag});
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// Token groups and attention allocation
// ---------------------------------------------------------------------------

enum class TokenGroup { kMarker, kStopword, kRegular };

inline const char* to_string(TokenGroup g) {
  switch (g) {
    case TokenGroup::kMarker: return "marker";
    case TokenGroup::kStopword: return "stopword";
    case TokenGroup::kRegular: return "regular";
  }
  return "?";
}

/// Partition of the real (non-PAD) positions: [CLS]/[SEP] are markers,
/// bundled-list membership makes a stopword, everything else is regular.
inline std::vector<TokenGroup> classify_tokens(const TokenSequence& seq, const Vocabulary& vocab,
                                               const std::set<std::string>& stopwords) {
  std::vector<TokenGroup> groups;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (seq.mask[i] != 1) continue;
    const int id = seq.ids[i];
    if (id == Vocabulary::kCls || id == Vocabulary::kSep) {
      groups.push_back(TokenGroup::kMarker);
    } else if (stopwords.count(vocab.token(id)) != 0) {
      groups.push_back(TokenGroup::kStopword);
    } else {
      groups.push_back(TokenGroup::kRegular);
    }
  }
  return groups;
}

/// Per layer and group: how many senders allocate more than the uniform
/// expectation (group size / real length) to the group, how many send a
/// majority (> 0.5), and the group sizes. Attention is averaged over heads
/// and measured on outgoing (sender) rows; both choices are recorded in the
/// run manifest of the CLI command that writes the report.
struct AttentionShareReport {
  struct Cell {
    std::size_t above_average = 0;
    std::size_t majority = 0;
    std::size_t group_total = 0;
  };
  std::vector<std::array<Cell, 3>> layers;  // index 0 = transformer layer 1

  void accumulate(const AttentionShareReport& other) {
    if (layers.empty()) layers.resize(other.layers.size());
    if (layers.size() != other.layers.size()) {
      throw std::invalid_argument("AttentionShareReport: layer count mismatch");
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
      for (std::size_t g = 0; g < 3; ++g) {
        layers[k][g].above_average += other.layers[k][g].above_average;
        layers[k][g].majority += other.layers[k][g].majority;
        layers[k][g].group_total += other.layers[k][g].group_total;
      }
    }
  }
};

inline AttentionShareReport attention_group_shares(const EncoderOutput& output,
                                                   const std::vector<TokenGroup>& groups) {
  const std::size_t n_real = groups.size();
  if (n_real == 0) throw std::invalid_argument("attention_group_shares: empty sequence");
  AttentionShareReport report;
  report.layers.resize(output.attention.size());
  std::array<std::size_t, 3> group_sizes{0, 0, 0};
  for (TokenGroup g : groups) ++group_sizes[static_cast<std::size_t>(g)];

  for (std::size_t k = 0; k < output.attention.size(); ++k) {
    const auto& heads = output.attention[k];
    for (std::size_t g = 0; g < 3; ++g) report.layers[k][g].group_total = group_sizes[g];
    for (std::size_t t = 0; t < n_real; ++t) {
      std::array<double, 3> mass{0.0, 0.0, 0.0};
      for (std::size_t j = 0; j < n_real; ++j) {
        double avg = 0.0;
        for (const Tensor& att : heads) avg += att.at(t, j);
        avg /= static_cast<double>(heads.size());
        mass[static_cast<std::size_t>(groups[j])] += avg;
      }
      for (std::size_t g = 0; g < 3; ++g) {
        const double uniform =
            static_cast<double>(group_sizes[g]) / static_cast<double>(n_real);
        if (mass[g] > uniform) ++report.layers[k][g].above_average;
        if (mass[g] > 0.5) ++report.layers[k][g].majority;
      }
    }
  }
  return report;
}

inline void write_attention_report(std::ostream& os, const AttentionShareReport& report) {
  os << "layer,group,count_above_average,count_majority,group_size_total\n";
  for (std::size_t k = 0; k < report.layers.size(); ++k) {
    for (std::size_t g = 0; g < 3; ++g) {
      os << (k + 1) << ',' << to_string(static_cast<TokenGroup>(g)) << ','
         << report.layers[k][g].above_average << ',' << report.layers[k][g].majority << ','
         << report.layers[k][g].group_total << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Term-removal influence
// ---------------------------------------------------------------------------

enum class InfluenceMode { kRandomOne, kExhaustive };

inline InfluenceMode influence_mode_from_string(const std::string& s) {
  if (s == "random-one") return InfluenceMode::kRandomOne;
  if (s == "exhaustive") return InfluenceMode::kExhaustive;
  throw std::invalid_argument("unknown influence mode '" + s +
                              "' (expected random-one|exhaustive)");
}

/// One removal experiment: the document re-scored with a single occurrence
/// of one regular term deleted.
struct InfluenceRecord {
  std::string query_id;
  std::string doc_id;
  std::string term;
  std::size_t occurrence = 0;  // index into the document's token list
  double original_score = 0.0;
  double removed_score = 0.0;

  double delta() const { return original_score - removed_score; }
};

namespace detail {

// Removal choice depends only on (seed, qid, docid) so parallel evaluation
// order cannot change results.
inline std::uint64_t pair_seed(std::uint64_t seed, const std::string& qid,
                               const std::string& did) {
  std::uint64_t h = 14695981039346656037ull ^ seed;
  auto mix = [&h](const std::string& s) {
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= 0xFF;
    h *= 1099511628211ull;
  };
  mix(qid);
  mix(did);
  return h;
}

}  // namespace detail

/// Removes regular (non-stopword) document terms and re-scores: random-one
/// picks a single seeded occurrence, exhaustive iterates all of them.
inline std::vector<InfluenceRecord> term_influence(
    const RankerModel& model, const std::string& query_id,
    const std::vector<std::string>& q_tokens, const std::string& doc_id,
    const std::vector<std::string>& d_tokens, const std::set<std::string>& stopwords,
    InfluenceMode mode, std::uint64_t seed, WarningSink warnings = nullptr) {
  std::vector<std::size_t> regular;
  for (std::size_t i = 0; i < d_tokens.size(); ++i) {
    if (stopwords.count(d_tokens[i]) == 0) regular.push_back(i);
  }
  if (regular.empty()) {
    detail::warn(warnings, "term_influence: document '" + doc_id + "' has no regular tokens");
    return {};
  }
  const double original = score_pair(model, q_tokens, d_tokens, warnings).value();

  std::vector<std::size_t> chosen;
  if (mode == InfluenceMode::kExhaustive) {
    chosen = regular;
  } else {
    Rng rng(detail::pair_seed(seed, query_id, doc_id));
    chosen.push_back(regular[rng.uniform_int(regular.size())]);
  }

  std::vector<InfluenceRecord> records;
  for (const std::size_t pos : chosen) {
    std::vector<std::string> without = d_tokens;
    without.erase(without.begin() + static_cast<std::ptrdiff_t>(pos));
    InfluenceRecord rec;
    rec.query_id = query_id;
    rec.doc_id = doc_id;
    rec.term = d_tokens[pos];
    rec.occurrence = pos;
    rec.original_score = original;
    rec.removed_score = score_pair(model, q_tokens, without, warnings).value();
    records.push_back(std::move(rec));
  }
  return records;
}

/// Exhaustive influence sorted by |delta| descending (term tie-break), cut
/// to top_n occurrences.
inline std::vector<InfluenceRecord> most_influential_terms(
    const RankerModel& model, const std::string& query_id,
    const std::vector<std::string>& q_tokens, const std::string& doc_id,
    const std::vector<std::string>& d_tokens, const std::set<std::string>& stopwords,
    std::size_t top_n, WarningSink warnings = nullptr) {
  std::vector<InfluenceRecord> records = term_influence(
      model, query_id, q_tokens, doc_id, d_tokens, stopwords, InfluenceMode::kExhaustive, 0,
      warnings);
  std::sort(records.begin(), records.end(), [](const InfluenceRecord& a, const InfluenceRecord& b) {
    const double da = std::abs(a.delta()), db = std::abs(b.delta());
    if (da != db) return da > db;
    if (a.term != b.term) return a.term < b.term;
    return a.occurrence < b.occurrence;
  });
  if (records.size() > top_n) records.resize(top_n);
  return records;
}

/// Fig. 3-style scatter rows: original vs removed score per experiment.
inline void write_scatter(std::ostream& os, const std::vector<InfluenceRecord>& records) {
  os << "qid,docid,term,original_score,removed_score\n";
  for (const InfluenceRecord& r : records) {
    os << r.query_id << ',' << r.doc_id << ',' << r.term << ',' << format_double(r.original_score)
       << ',' << format_double(r.removed_score) << '\n';
  }
}

inline void emit_scatter(const std::vector<InfluenceRecord>& records, const std::string& path) {
  if (records.empty()) throw std::invalid_argument("emit_scatter: no records");
  atomic_write(path, [&records](std::ostream& os) { write_scatter(os, records); });
}

inline void write_influential_terms(std::ostream& os,
                                    const std::vector<InfluenceRecord>& ranked) {
  os << "qid,docid,rank,term,abs_delta\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    os << ranked[i].query_id << ',' << ranked[i].doc_id << ',' << (i + 1) << ',' << ranked[i].term
       << ',' << format_double(std::abs(ranked[i].delta())) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Marker-removal ablation
// ---------------------------------------------------------------------------

/// Which markers the ablated condition drops: separators only (the [CLS]
/// stays for the scoring head) or all markers.
enum class MarkerRemoval { kSepOnly, kAll };

struct AblationResult {
  MetricReport with_markers;
  MetricReport without_markers;
  double p_value = 1.0;
};

/// Scores the evaluation set twice, with and without markers, and reports
/// both per-query metric sets plus the paired sign-flip p-value.
inline AblationResult marker_ablation(const RankerModel& model,
                                      const std::vector<CandidateSet>& eval_set,
                                      const QrelSet& qrels, const MetricSpec& spec,
                                      MarkerRemoval removal, std::size_t n_perm,
                                      std::uint64_t seed, WarningSink warnings = nullptr) {
  EncodeOptions stripped;
  stripped.cls = removal == MarkerRemoval::kSepOnly;
  stripped.sep = false;
  const RunFile full = rerank_candidates(model, eval_set, "markers", {}, warnings);
  const RunFile bare = rerank_candidates(model, eval_set, "no-markers", stripped, warnings);
  AblationResult result;
  result.with_markers = evaluate_run(full, qrels, spec, warnings);
  result.without_markers = evaluate_run(bare, qrels, spec, warnings);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < result.with_markers.per_query.size(); ++i) {
    a.push_back(result.with_markers.per_query[i].second);
    b.push_back(result.without_markers.per_query[i].second);
  }
  result.p_value = permutation_test(a, b, n_perm, seed);
  return result;
}

}  // namespace ranklab
