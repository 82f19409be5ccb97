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
#include "ranklab/tokenizer.hpp"

namespace ranklab {

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

/// Rebuildable in-memory inverted index over a tokenized corpus, scored with
/// idf = ln((N - df + 0.5)/(df + 0.5) + 1). Query term occurrences each
/// contribute once, so a term repeated in the query counts with its query
/// frequency.
class Bm25Index {
 public:
  explicit Bm25Index(const std::vector<std::pair<std::string, std::string>>& docs) {
    doc_ids_.reserve(docs.size());
    doc_len_.reserve(docs.size());
    doc_text_.reserve(docs.size());
    double total_len = 0.0;
    for (const auto& [doc_id, text] : docs) {
      const std::size_t d = doc_ids_.size();
      doc_ids_.push_back(doc_id);
      doc_text_.push_back(text);
      const std::vector<std::string> toks = tokenize(text);
      doc_len_.push_back(static_cast<double>(toks.size()));
      total_len += static_cast<double>(toks.size());
      std::map<std::string, long> tf;
      for (const std::string& t : toks) ++tf[t];
      for (const auto& [term, count] : tf) {
        postings_[term].emplace_back(d, count);
      }
    }
    avg_len_ = doc_ids_.empty() ? 0.0 : total_len / static_cast<double>(doc_ids_.size());
  }

  std::size_t num_docs() const { return doc_ids_.size(); }

  /// Top-k candidates for a query, score descending with doc-id tie-break.
  /// Only documents matching at least one query term appear; an empty query
  /// after tokenization yields an empty candidate set.
  CandidateSet rank(const std::string& query_id, const std::string& query_text, std::size_t k,
                    Bm25Params params = {}) const {
    if (k < 1) throw std::invalid_argument("bm25: k must be at least 1");
    CandidateSet out;
    out.query_id = query_id;
    out.query_text = query_text;
    const std::vector<std::string> q_tokens = tokenize(query_text);
    if (q_tokens.empty()) return out;
    const double n = static_cast<double>(num_docs());
    std::map<std::size_t, double> scores;
    for (const std::string& term : q_tokens) {
      const auto it = postings_.find(term);
      if (it == postings_.end()) continue;
      const double df = static_cast<double>(it->second.size());
      const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
      for (const auto& [d, tf] : it->second) {
        const double norm = params.k1 * (1.0 - params.b + params.b * doc_len_[d] / avg_len_);
        scores[d] += idf * static_cast<double>(tf) * (params.k1 + 1.0) /
                     (static_cast<double>(tf) + norm);
      }
    }
    std::vector<std::pair<std::size_t, double>> ranked(scores.begin(), scores.end());
    std::sort(ranked.begin(), ranked.end(), [this](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return doc_ids_[a.first] < doc_ids_[b.first];
    });
    if (ranked.size() > k) ranked.resize(k);
    for (const auto& [d, score] : ranked) {
      out.docs.push_back(Candidate{doc_ids_[d], doc_text_[d], score});
    }
    return out;
  }

 private:
  std::vector<std::string> doc_ids_;
  std::vector<std::string> doc_text_;
  std::vector<double> doc_len_;
  std::map<std::string, std::vector<std::pair<std::size_t, long>>> postings_;
  double avg_len_ = 0.0;
};

}  // namespace ranklab
