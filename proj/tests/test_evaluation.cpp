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

#include "ranklab/evaluation.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace ranklab {
namespace {

RankedList make_list(const std::string& qid, const std::vector<std::string>& docs) {
  std::vector<ScoredDoc> scored;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    scored.push_back({docs[i], static_cast<double>(docs.size() - i)});
  }
  return RankedList(qid, scored);
}

TEST(RankedList, SortsAndRejectsDuplicates) {
  RankedList list("q", {{"b", 1.0}, {"a", 3.0}, {"c", 3.0}});
  EXPECT_EQ(list.docs()[0].doc_id, "a");  // tie at 3.0 broken by doc id
  EXPECT_EQ(list.docs()[1].doc_id, "c");
  EXPECT_EQ(list.docs()[2].doc_id, "b");
  EXPECT_THROW(RankedList("q", {{"a", 1.0}, {"a", 2.0}}), std::invalid_argument);
}

TEST(Mrr, FirstRelevantAtRankOne) {
  QrelSet qrels;
  qrels.set("q", "d1", 1);
  EXPECT_DOUBLE_EQ(mrr_at_k(make_list("q", {"d1", "d2"}), qrels, 10), 1.0);
}

TEST(Mrr, FirstRelevantAtRankThree) {
  QrelSet qrels;
  qrels.set("q", "d3", 2);
  EXPECT_DOUBLE_EQ(mrr_at_k(make_list("q", {"d1", "d2", "d3"}), qrels, 10), 1.0 / 3.0);
}

TEST(Mrr, CutoffExcludesRankEleven) {
  QrelSet qrels;
  qrels.set("q", "d11", 1);
  std::vector<std::string> docs;
  for (int i = 1; i <= 12; ++i) docs.push_back("d" + std::to_string(i));
  EXPECT_DOUBLE_EQ(mrr_at_k(make_list("q", docs), qrels, 10), 0.0);
}

TEST(Mrr, UnjudgedQueryWarnsAndScoresZero) {
  QrelSet qrels;
  qrels.set("other", "d1", 1);
  std::vector<std::string> warnings;
  EXPECT_DOUBLE_EQ(mrr_at_k(make_list("q", {"d1"}), qrels, 10, &warnings), 0.0);
  ASSERT_EQ(warnings.size(), 1u);
}

TEST(Ndcg, IdealOrderingIsOne) {
  QrelSet qrels;
  qrels.set("q", "d1", 3);
  qrels.set("q", "d2", 2);
  qrels.set("q", "d3", 0);
  EXPECT_NEAR(ndcg_at_k(make_list("q", {"d1", "d2", "d3"}), qrels, 20), 1.0, 1e-12);
}

TEST(Ndcg, NothingRelevantRetrievedIsZero) {
  QrelSet qrels;
  qrels.set("q", "relevant", 2);
  EXPECT_DOUBLE_EQ(ndcg_at_k(make_list("q", {"d1", "d2"}), qrels, 20), 0.0);
}

TEST(Ndcg, FiveDocGradedAgainstBruteForce) {
  QrelSet qrels;
  const std::vector<int> grades = {0, 3, 1, 0, 2};
  for (int i = 0; i < 5; ++i) qrels.set("q", "d" + std::to_string(i), grades[i]);
  const std::vector<std::string> order = {"d2", "d0", "d4", "d1", "d3"};
  // Direct formula evaluation for this explicit ordering.
  auto dcg_of = [&](const std::vector<int>& gs) {
    double s = 0.0;
    for (std::size_t r = 0; r < gs.size(); ++r)
      s += (std::pow(2.0, gs[r]) - 1.0) / std::log2(r + 2.0);
    return s;
  };
  const double dcg = dcg_of({1, 0, 2, 3, 0});
  const double idcg = dcg_of({3, 2, 1, 0, 0});
  EXPECT_NEAR(ndcg_at_k(make_list("q", order), qrels, 20), dcg / idcg, 1e-9);
}

TEST(Err, SingleDocHalf) {
  QrelSet qrels;
  qrels.set("q", "d1", 1);
  EXPECT_NEAR(err_at_k(make_list("q", {"d1"}), qrels, 20, 1), 0.5, 1e-12);
}

TEST(Err, AllZeroGradesZero) {
  QrelSet qrels;
  qrels.set("q", "d1", 0);
  qrels.set("q", "d2", 0);
  EXPECT_DOUBLE_EQ(err_at_k(make_list("q", {"d1", "d2"}), qrels, 20, 1), 0.0);
}

TEST(Err, TwoTopGradeDocsCascade) {
  QrelSet qrels;
  qrels.set("q", "d1", 1);
  qrels.set("q", "d2", 1);
  // 1 * 0.5 + (1/2) * 0.5 * 0.5 = 0.625
  EXPECT_NEAR(err_at_k(make_list("q", {"d1", "d2"}), qrels, 20, 1), 0.625, 1e-12);
}

TEST(Err, GradeAboveGmaxRejected) {
  QrelSet qrels;
  qrels.set("q", "d1", 3);
  EXPECT_THROW(err_at_k(make_list("q", {"d1"}), qrels, 20, 1), std::invalid_argument);
}

TEST(Metrics, AllValuesInUnitInterval) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    QrelSet qrels;
    std::vector<ScoredDoc> docs;
    const int n = 1 + static_cast<int>(rng.uniform_int(10));
    for (int i = 0; i < n; ++i) {
      docs.push_back({"d" + std::to_string(i), rng.normal()});
      qrels.set("q", "d" + std::to_string(i), static_cast<int>(rng.uniform_int(5)));
    }
    RankedList list("q", docs);
    for (double v : {mrr_at_k(list, qrels, 10), ndcg_at_k(list, qrels, 20),
                     err_at_k(list, qrels, 20, 4)}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Metrics, InvariantToPositiveScoreScaling) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    QrelSet qrels;
    std::vector<ScoredDoc> docs, scaled;
    const double factor = 0.5 + rng.uniform() * 10.0;
    for (int i = 0; i < 8; ++i) {
      const double s = rng.normal();
      docs.push_back({"d" + std::to_string(i), s});
      scaled.push_back({"d" + std::to_string(i), s * factor});
      qrels.set("q", "d" + std::to_string(i), static_cast<int>(rng.uniform_int(3)));
    }
    RankedList l1("q", docs), l2("q", scaled);
    EXPECT_EQ(mrr_at_k(l1, qrels, 10), mrr_at_k(l2, qrels, 10));
    EXPECT_EQ(ndcg_at_k(l1, qrels, 20), ndcg_at_k(l2, qrels, 20));
    EXPECT_EQ(err_at_k(l1, qrels, 20, 2), err_at_k(l2, qrels, 20, 2));
  }
}

TEST(EvaluateRun, IdealRunScoresOne) {
  QrelSet qrels;
  qrels.set("1", "a", 2);
  qrels.set("1", "b", 1);
  qrels.set("2", "c", 1);
  RunFile run = {{"1", "a", 1, 2.0, "t"}, {"1", "b", 2, 1.0, "t"}, {"2", "c", 1, 1.0, "t"}};
  const MetricReport report = evaluate_run(run, qrels, {Metric::kNdcg, 20, 1});
  EXPECT_NEAR(report.mean, 1.0, 1e-12);
}

TEST(EvaluateRun, EmptyRunAllZero) {
  QrelSet qrels;
  qrels.set("1", "a", 1);
  qrels.set("2", "b", 1);
  const MetricReport report = evaluate_run({}, qrels, {Metric::kMrr, 10, 1});
  ASSERT_EQ(report.per_query.size(), 2u);
  for (const auto& [qid, v] : report.per_query) EXPECT_DOUBLE_EQ(v, 0.0);
  EXPECT_DOUBLE_EQ(report.mean, 0.0);
}

TEST(EvaluateRun, CompositionMatchesPerQueryOps) {
  Rng rng(7);
  QrelSet qrels;
  RunFile run;
  std::map<std::string, std::vector<ScoredDoc>> per_query;
  for (int q = 0; q < 10; ++q) {
    const std::string qid = "q" + std::to_string(q);
    for (int d = 0; d < 6; ++d) {
      const std::string did = "d" + std::to_string(d);
      qrels.set(qid, did, static_cast<int>(rng.uniform_int(3)));
      const double score = rng.normal();
      run.push_back({qid, did, d + 1, score, "t"});
      per_query[qid].push_back({did, score});
    }
  }
  const MetricSpec spec{Metric::kNdcg, 20, 1};
  const MetricReport report = evaluate_run(run, qrels, spec);
  double total = 0.0;
  for (const auto& [qid, value] : report.per_query) {
    const double direct = ndcg_at_k(RankedList(qid, per_query[qid]), qrels, 20);
    EXPECT_NEAR(value, direct, 1e-12) << qid;
    total += value;
  }
  EXPECT_NEAR(report.mean, total / 10.0, 1e-12);
}

TEST(EvaluateRun, RunOnlyQueriesWarned) {
  QrelSet qrels;
  qrels.set("1", "a", 1);
  RunFile run = {{"1", "a", 1, 1.0, "t"}, {"99", "z", 1, 1.0, "t"}};
  std::vector<std::string> warnings;
  const MetricReport report = evaluate_run(run, qrels, {Metric::kMrr, 10, 1}, &warnings);
  EXPECT_EQ(report.per_query.size(), 1u);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("99"), std::string::npos);
}

TEST(Permutation, EqualInputsGiveOne) {
  const std::vector<double> a = {0.2, 0.4, 0.6, 0.5};
  EXPECT_DOUBLE_EQ(permutation_test(a, a, 1000, 1), 1.0);
}

TEST(Permutation, LargeShiftSignificant) {
  std::vector<double> a(20), b(20);
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    b[i] = rng.uniform();
    a[i] = b[i] + 100.0;
  }
  EXPECT_LT(permutation_test(a, b, 10000, 2), 0.05);
}

TEST(Permutation, ExactEnumerationAtTenQueries) {
  std::vector<double> a(10), b(10);
  for (int i = 0; i < 10; ++i) {
    b[i] = static_cast<double>(i);
    a[i] = b[i] + 100.0;
  }
  // All diffs equal: only the two all-same sign assignments reach |mean|.
  EXPECT_DOUBLE_EQ(permutation_test(a, b, 1, 3), 2.0 / 1024.0);
}

TEST(Permutation, SeedDeterminism) {
  std::vector<double> a(20), b(20);
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  EXPECT_EQ(permutation_test(a, b, 5000, 7), permutation_test(a, b, 5000, 7));
}

TEST(Permutation, SymmetricInExactMode) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(8), b(8);
    for (int i = 0; i < 8; ++i) {
      a[i] = rng.uniform();
      b[i] = rng.uniform();
    }
    EXPECT_DOUBLE_EQ(permutation_test(a, b, 1, 1), permutation_test(b, a, 1, 1));
  }
}

TEST(Permutation, LengthMismatchRejected) {
  EXPECT_THROW(permutation_test({1.0}, {1.0, 2.0}, 10, 1), std::invalid_argument);
}

TEST(MetricSpec, Parsing) {
  const MetricSpec spec = metric_spec_from_string("ndcg@20");
  EXPECT_EQ(spec.metric, Metric::kNdcg);
  EXPECT_EQ(spec.k, 20u);
  EXPECT_EQ(spec.name(), "ndcg@20");
  EXPECT_THROW(metric_spec_from_string("map@10"), std::invalid_argument);
  EXPECT_THROW(metric_spec_from_string("mrr"), std::invalid_argument);
}

TEST(Reports, CsvShapes) {
  MetricReport report;
  report.metric_name = "mrr@10";
  report.per_query = {{"1", 0.5}, {"2", 1.0}};
  report.mean = 0.75;
  std::ostringstream os;
  write_metric_report(os, report);
  EXPECT_EQ(os.str(), "qid,value\n1,0.5\n2,1\nmean,0.75\n");

  SignificanceReport sig{"mrr@10", 0.5, 0.25, 0.04};
  std::ostringstream os2;
  write_significance_report(os2, sig);
  EXPECT_EQ(os2.str(), "metric,mean_a,mean_b,p_value\nmrr@10,0.5,0.25,0.04\n");
}

}  // namespace
}  // namespace ranklab
