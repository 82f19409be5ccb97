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

#include <unistd.h>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ranklab {

// Warning sink for recoverable parse anomalies (duplicate qrel pairs, over-
// deep candidate lists). Null means warnings are dropped.
using WarningSink = std::vector<std::string>*;

namespace detail {

inline void warn(WarningSink sink, std::string msg) {
  if (sink) sink->push_back(std::move(msg));
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return in;
}

[[noreturn]] inline void parse_fail(const std::string& what, const std::string& path,
                                    std::size_t line_no, const std::string& detail) {
  throw std::runtime_error(what + " parse error at " + path + ":" +
                           std::to_string(line_no) + ": " + detail);
}

}  // namespace detail

/// Shortest decimal form that round-trips the exact double value.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(std::string(what) + ": bad number '" + s + "'");
  }
  return v;
}

inline long parse_long(const std::string& s, const char* what) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(std::string(what) + ": bad integer '" + s + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Record types
// ---------------------------------------------------------------------------

/// One training triple: query, relevant passage, non-relevant passage.
struct TripleRecord {
  std::string query;
  std::string positive;
  std::string negative;
};

struct Candidate {
  std::string doc_id;
  std::string text;
  double base_score = 0.0;
};

/// Base-retrieval candidates for one query, in rank order.
struct CandidateSet {
  std::string query_id;
  std::string query_text;
  std::vector<Candidate> docs;
};

/// Relevance judgments keyed by (query id, doc id).
class QrelSet {
 public:
  void set(const std::string& qid, const std::string& did, int grade) {
    grades_[{qid, did}] = grade;
    queries_.insert(qid);
    gmax_ = std::max(gmax_, grade);
  }

  int grade(const std::string& qid, const std::string& did) const {
    const auto it = grades_.find({qid, did});
    return it == grades_.end() ? 0 : it->second;
  }

  bool has(const std::string& qid, const std::string& did) const {
    return grades_.count({qid, did}) != 0;
  }

  bool has_query(const std::string& qid) const { return queries_.count(qid) != 0; }

  const std::set<std::string>& query_ids() const { return queries_; }

  /// Judged (doc id, grade) pairs for one query, in doc-id order.
  std::vector<std::pair<std::string, int>> judged(const std::string& qid) const {
    std::vector<std::pair<std::string, int>> out;
    for (auto it = grades_.lower_bound({qid, ""}); it != grades_.end() && it->first.first == qid;
         ++it) {
      out.emplace_back(it->first.second, it->second);
    }
    return out;
  }

  int gmax() const { return gmax_; }
  std::size_t size() const { return grades_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, int> grades_;
  std::set<std::string> queries_;
  int gmax_ = 0;
};

/// One line of a TREC run file: qid Q0 docid rank score runtag.
struct RunEntry {
  std::string query_id;
  std::string doc_id;
  long rank = 0;
  double score = 0.0;
  std::string tag;
};

using RunFile = std::vector<RunEntry>;

// ---------------------------------------------------------------------------
// Loaders (order preserving; malformed lines reported with line numbers)
// ---------------------------------------------------------------------------

/// Triples file: one record per line, three tab-separated non-empty fields.
inline std::vector<TripleRecord> load_triples(const std::string& path) {
  std::ifstream in = detail::open_or_throw(path);
  std::vector<TripleRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    if (f.size() != 3) {
      detail::parse_fail("triples", path, line_no,
                         "expected 3 tab-separated fields, got " + std::to_string(f.size()));
    }
    TripleRecord rec{detail::trim(f[0]), detail::trim(f[1]), detail::trim(f[2])};
    if (rec.query.empty() || rec.positive.empty() || rec.negative.empty()) {
      detail::parse_fail("triples", path, line_no, "empty field");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

/// Candidates file: "qid<TAB>docid<TAB>query_text<TAB>doc_text", one
/// candidate per line, grouped by qid. Lists deeper than max_depth are
/// truncated with a warning.
inline std::vector<CandidateSet> load_candidates(const std::string& path,
                                                 std::size_t max_depth = 100,
                                                 WarningSink warnings = nullptr) {
  std::ifstream in = detail::open_or_throw(path);
  std::vector<CandidateSet> out;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen_qids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    if (f.size() != 4) {
      detail::parse_fail("candidates", path, line_no,
                         "expected 4 tab-separated fields, got " + std::to_string(f.size()));
    }
    if (out.empty() || out.back().query_id != f[0]) {
      if (!seen_qids.insert(f[0]).second) {
        detail::parse_fail("candidates", path, line_no,
                           "query id '" + f[0] + "' is not contiguous");
      }
      out.push_back(CandidateSet{f[0], f[2], {}});
    } else if (out.back().query_text != f[2]) {
      detail::parse_fail("candidates", path, line_no,
                         "inconsistent query text for query id '" + f[0] + "'");
    }
    CandidateSet& set = out.back();
    for (const Candidate& c : set.docs) {
      if (c.doc_id == f[1]) {
        detail::parse_fail("candidates", path, line_no,
                           "duplicate doc id '" + f[1] + "' for query '" + f[0] + "'");
      }
    }
    if (set.docs.size() >= max_depth) {
      detail::warn(warnings, "candidates " + path + ":" + std::to_string(line_no) +
                                 ": query '" + f[0] + "' exceeds depth " +
                                 std::to_string(max_depth) + ", truncating");
      continue;
    }
    set.docs.push_back(Candidate{f[1], f[3], 0.0});
  }
  return out;
}

inline void write_candidates(std::ostream& os, const std::vector<CandidateSet>& sets) {
  for (const CandidateSet& s : sets) {
    for (const Candidate& c : s.docs) {
      os << s.query_id << '\t' << c.doc_id << '\t' << s.query_text << '\t' << c.text << '\n';
    }
  }
}

/// Qrels in TREC format: "qid 0 docid grade", space-separated. A repeated
/// (qid, docid) pair keeps the last grade and emits a warning.
inline QrelSet load_qrels(const std::string& path, WarningSink warnings = nullptr) {
  std::ifstream in = detail::open_or_throw(path);
  QrelSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string qid, iter, did, grade_s;
    if (!(ls >> qid >> iter >> did >> grade_s)) {
      detail::parse_fail("qrels", path, line_no, "expected 'qid 0 docid grade'");
    }
    std::string extra;
    if (ls >> extra) detail::parse_fail("qrels", path, line_no, "trailing field '" + extra + "'");
    const long grade = parse_long(grade_s, "qrels grade");
    if (grade < 0) detail::parse_fail("qrels", path, line_no, "negative grade");
    if (out.has(qid, did)) {
      detail::warn(warnings, "qrels " + path + ":" + std::to_string(line_no) +
                                 ": duplicate pair (" + qid + ", " + did + "), last wins");
    }
    out.set(qid, did, static_cast<int>(grade));
  }
  return out;
}

inline void write_qrels(std::ostream& os, const QrelSet& qrels) {
  for (const std::string& qid : qrels.query_ids()) {
    for (const auto& [did, grade] : qrels.judged(qid)) {
      os << qid << " 0 " << did << ' ' << grade << '\n';
    }
  }
}

/// Run file in TREC format: "qid Q0 docid rank score runtag".
inline RunFile load_run(const std::string& path) {
  std::ifstream in = detail::open_or_throw(path);
  RunFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string qid, q0, did, rank_s, score_s, tag;
    if (!(ls >> qid >> q0 >> did >> rank_s >> score_s >> tag)) {
      detail::parse_fail("run", path, line_no, "expected 'qid Q0 docid rank score runtag'");
    }
    RunEntry e;
    e.query_id = qid;
    e.doc_id = did;
    e.rank = parse_long(rank_s, "run rank");
    e.score = parse_double(score_s, "run score");
    e.tag = tag;
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_run(std::ostream& os, const RunFile& run) {
  for (const RunEntry& e : run) {
    os << e.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << format_double(e.score)
       << ' ' << e.tag << '\n';
  }
}

/// Corpus file: "docid<TAB>text", one document per line, order preserved.
inline std::vector<std::pair<std::string, std::string>> load_corpus(const std::string& path) {
  std::ifstream in = detail::open_or_throw(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    if (f.size() != 2) {
      detail::parse_fail("corpus", path, line_no,
                         "expected 2 tab-separated fields, got " + std::to_string(f.size()));
    }
    out.emplace_back(f[0], f[1]);
  }
  return out;
}

/// Queries file: "qid<TAB>text", one query per line.
inline std::vector<std::pair<std::string, std::string>> load_queries(const std::string& path) {
  return load_corpus(path);
}

// ---------------------------------------------------------------------------
// Atomic output
// ---------------------------------------------------------------------------

/// Writes via a temp file in the same directory and renames into place, so a
/// failed run never leaves a partial output observable.
inline void atomic_write(const std::string& path,
                         const std::function<void(std::ostream&)>& fill) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() /
                       (target.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream os(tmp);
    if (!os) throw std::runtime_error("cannot open for writing: " + tmp.string());
    fill(os);
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ranklab
