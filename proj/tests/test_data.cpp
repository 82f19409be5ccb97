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

#include "ranklab/data.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ranklab/tensor.hpp"

namespace ranklab {
namespace {

class TempDir {
 public:
  TempDir() {
    dir_ = std::filesystem::temp_directory_path() /
           ("ranklab_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path dir_;
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  os << content;
}

TEST(Triples, OneLineOneRecord) {
  TempDir tmp;
  write_file(tmp.path("t.tsv"), "what is x\tx is a thing\ty is a thing\n");
  const auto triples = load_triples(tmp.path("t.tsv"));
  ASSERT_EQ(triples.size(), 1u);
  EXPECT_EQ(triples[0].query, "what is x");
  EXPECT_EQ(triples[0].positive, "x is a thing");
  EXPECT_EQ(triples[0].negative, "y is a thing");
}

TEST(Triples, MissingFieldNamesLine) {
  TempDir tmp;
  write_file(tmp.path("t.tsv"), "q\tp\tn\nq-only\tp\n");
  try {
    load_triples(tmp.path("t.tsv"));
    FAIL() << "expected parse error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(Triples, EmptyFieldRejected) {
  TempDir tmp;
  write_file(tmp.path("t.tsv"), "q\t  \tn\n");
  EXPECT_THROW(load_triples(tmp.path("t.tsv")), std::runtime_error);
}

TEST(Qrels, TrecConvention) {
  TempDir tmp;
  write_file(tmp.path("q.txt"), "7 0 doc3 2\n7 0 doc4 0\n8 0 doc3 1\n");
  const QrelSet qrels = load_qrels(tmp.path("q.txt"));
  EXPECT_EQ(qrels.grade("7", "doc3"), 2);
  EXPECT_EQ(qrels.grade("7", "doc4"), 0);
  EXPECT_EQ(qrels.grade("8", "doc3"), 1);
  EXPECT_EQ(qrels.grade("9", "doc3"), 0);
  EXPECT_EQ(qrels.gmax(), 2);
}

TEST(Qrels, DuplicateLastWinsWithWarning) {
  TempDir tmp;
  write_file(tmp.path("q.txt"), "7 0 d1 1\n7 0 d1 3\n");
  std::vector<std::string> warnings;
  const QrelSet qrels = load_qrels(tmp.path("q.txt"), &warnings);
  EXPECT_EQ(qrels.grade("7", "d1"), 3);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("duplicate"), std::string::npos);
}

TEST(Qrels, NegativeGradeRejected) {
  TempDir tmp;
  write_file(tmp.path("q.txt"), "7 0 d1 -1\n");
  EXPECT_THROW(load_qrels(tmp.path("q.txt")), std::runtime_error);
}

TEST(Run, RoundTripByteIdentical) {
  TempDir tmp;
  const std::string content =
      "q1 Q0 d9 1 2.5 tag\n"
      "q1 Q0 d3 2 1.25 tag\n"
      "q2 Q0 d1 1 -0.5 tag\n";
  write_file(tmp.path("r.txt"), content);
  const RunFile run = load_run(tmp.path("r.txt"));
  std::ostringstream os;
  write_run(os, run);
  EXPECT_EQ(os.str(), content);
}

// Property: serialize-then-parse recovers every field for random runs, and a
// second serialization is byte-identical to the first.
TEST(Run, SerializeParseStability) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    RunFile run;
    const int n = 1 + static_cast<int>(rng.uniform_int(20));
    for (int i = 0; i < n; ++i) {
      RunEntry e;
      e.query_id = "q" + std::to_string(rng.uniform_int(5));
      e.doc_id = "d" + std::to_string(i);
      e.rank = i + 1;
      e.score = rng.normal() * 10.0;
      e.tag = "t";
      run.push_back(e);
    }
    std::ostringstream first;
    write_run(first, run);
    TempDir tmp;
    write_file(tmp.path("r.txt"), first.str());
    const RunFile back = load_run(tmp.path("r.txt"));
    std::ostringstream second;
    write_run(second, back);
    EXPECT_EQ(first.str(), second.str());
    ASSERT_EQ(back.size(), run.size());
    for (std::size_t i = 0; i < run.size(); ++i) {
      EXPECT_EQ(back[i].doc_id, run[i].doc_id);
      EXPECT_EQ(back[i].score, run[i].score);
    }
  }
}

TEST(Qrels, RoundTripByteIdentical) {
  TempDir tmp;
  const std::string content = "1 0 a 1\n1 0 b 0\n2 0 a 4\n";
  write_file(tmp.path("q.txt"), content);
  const QrelSet qrels = load_qrels(tmp.path("q.txt"));
  std::ostringstream os;
  write_qrels(os, qrels);
  EXPECT_EQ(os.str(), content);
}

TEST(Candidates, GroupedParse) {
  TempDir tmp;
  write_file(tmp.path("c.tsv"),
             "q1\td1\twhat is x\tx text\n"
             "q1\td2\twhat is x\tother text\n"
             "q2\td1\twhat is y\ty text\n");
  const auto sets = load_candidates(tmp.path("c.tsv"));
  ASSERT_EQ(sets.size(), 2u);
  EXPECT_EQ(sets[0].query_id, "q1");
  EXPECT_EQ(sets[0].query_text, "what is x");
  ASSERT_EQ(sets[0].docs.size(), 2u);
  EXPECT_EQ(sets[0].docs[1].doc_id, "d2");
  EXPECT_EQ(sets[1].docs.size(), 1u);
}

TEST(Candidates, DuplicateDocRejected) {
  TempDir tmp;
  write_file(tmp.path("c.tsv"), "q1\td1\tq\tt1\nq1\td1\tq\tt2\n");
  EXPECT_THROW(load_candidates(tmp.path("c.tsv")), std::runtime_error);
}

TEST(Candidates, DepthTruncationWarns) {
  TempDir tmp;
  std::string content;
  for (int i = 0; i < 5; ++i)
    content += "q1\td" + std::to_string(i) + "\tq\tt\n";
  write_file(tmp.path("c.tsv"), content);
  std::vector<std::string> warnings;
  const auto sets = load_candidates(tmp.path("c.tsv"), 3, &warnings);
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].docs.size(), 3u);
  EXPECT_EQ(warnings.size(), 2u);
}

TEST(Candidates, WriteReadRoundTrip) {
  std::vector<CandidateSet> sets(2);
  sets[0] = {"q1", "query one", {{"d1", "text a", 0.0}, {"d2", "text b", 0.0}}};
  sets[1] = {"q2", "query two", {{"d3", "text c", 0.0}}};
  std::ostringstream os;
  write_candidates(os, sets);
  TempDir tmp;
  write_file(tmp.path("c.tsv"), os.str());
  const auto back = load_candidates(tmp.path("c.tsv"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].docs[1].text, "text b");
  std::ostringstream os2;
  write_candidates(os2, back);
  EXPECT_EQ(os.str(), os2.str());
}

TEST(Corpus, TwoFieldLines) {
  TempDir tmp;
  write_file(tmp.path("corpus.tsv"), "d1\tthe first doc\nd2\tthe second doc\n");
  const auto docs = load_corpus(tmp.path("corpus.tsv"));
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[1].first, "d2");
  EXPECT_EQ(docs[1].second, "the second doc");
}

TEST(AtomicWrite, NoPartialOnFailure) {
  TempDir tmp;
  const std::string path = tmp.path("out.txt");
  EXPECT_THROW(atomic_write(path,
                            [](std::ostream& os) {
                              os << "partial";
                              throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  EXPECT_FALSE(std::filesystem::exists(path));
  atomic_write(path, [](std::ostream& os) { os << "done"; });
  EXPECT_EQ(read_file(path), "done");
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1e300, 3.141592653589793}) {
    const std::string s = format_double(v);
    EXPECT_EQ(parse_double(s, "test"), v) << s;
  }
  EXPECT_EQ(format_double(2.5), "2.5");
}

}  // namespace
}  // namespace ranklab
