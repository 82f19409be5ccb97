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

#include "ranklab/analysis.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "ranklab/stopwords.hpp"
#include "ranklab/training.hpp"

namespace ranklab {
namespace {

Vocabulary word_vocab(int n, const std::vector<std::string>& extra = {}) {
  Vocabulary v;
  for (int i = 0; i < n; ++i) v.add("w" + std::to_string(i));
  for (const auto& w : extra) v.add(w);
  return v;
}

TEST(ClassifyTokens, MarkerStopwordRegular) {
  Vocabulary v = word_vocab(0, {"the", "cat"});
  TokenSequence seq = encode_single({"the", "cat"}, v, 6);
  const auto groups = classify_tokens(seq, v, default_stopwords());
  const std::vector<TokenGroup> want = {TokenGroup::kMarker, TokenGroup::kStopword,
                                        TokenGroup::kRegular, TokenGroup::kMarker};
  EXPECT_EQ(groups, want);
}

TEST(ClassifyTokens, PartitionCoversAllRealPositions) {
  Vocabulary v = word_vocab(10, {"the", "of"});
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::string> q, d;
    for (std::size_t i = 0; i < 1 + rng.uniform_int(3); ++i)
      q.push_back(rng.bernoulli(0.3) ? "the" : "w" + std::to_string(rng.uniform_int(10)));
    for (std::size_t i = 0; i < 1 + rng.uniform_int(5); ++i)
      d.push_back(rng.bernoulli(0.3) ? "of" : "w" + std::to_string(rng.uniform_int(10)));
    TokenSequence seq = encode_pair(q, d, v, 12);
    const auto groups = classify_tokens(seq, v, default_stopwords());
    EXPECT_EQ(groups.size(), seq.real_length());
  }
}

TEST(ClassifyTokens, Deterministic) {
  Vocabulary v = word_vocab(5, {"the"});
  TokenSequence seq = encode_pair({"the"}, {"w1", "w2"}, v, 8);
  EXPECT_EQ(classify_tokens(seq, v, default_stopwords()),
            classify_tokens(seq, v, default_stopwords()));
}

TEST(StopwordFile, MatchesEmbeddedList) {
  const auto from_file = load_stopwords(std::string(RANKLAB_DATA_DIR) + "/stopwords.txt");
  EXPECT_EQ(from_file, default_stopwords());
  EXPECT_EQ(from_file.size(), 179u);
}

// Hand-built 3-token attention: counts must match a manual tally.
TEST(AttentionShares, HandTally) {
  EncoderOutput out;
  // One layer, one head. Groups: [Marker, Stopword, Regular].
  // Sender masses: t0 -> (0.6, 0.3, 0.1); t1 -> (0.2, 0.2, 0.6); t2 -> (1/3 each).
  out.attention.push_back({Tensor::from(
      {3, 3}, {0.6, 0.3, 0.1, 0.2, 0.2, 0.6, 1.0 / 3, 1.0 / 3, 1.0 / 3})});
  const std::vector<TokenGroup> groups = {TokenGroup::kMarker, TokenGroup::kStopword,
                                          TokenGroup::kRegular};
  AttentionShareReport report = attention_group_shares(out, groups);
  ASSERT_EQ(report.layers.size(), 1u);
  // Uniform expectation is 1/3 per group.
  const auto& marker = report.layers[0][0];
  const auto& stop = report.layers[0][1];
  const auto& regular = report.layers[0][2];
  EXPECT_EQ(marker.above_average, 1u);   // only t0 (0.6 > 1/3)
  EXPECT_EQ(marker.majority, 1u);        // t0 (0.6 > 0.5)
  EXPECT_EQ(stop.above_average, 0u);     // 0.3, 0.2, 1/3 all <= 1/3... 0.3 and 0.2 below, 1/3 not above
  EXPECT_EQ(stop.majority, 0u);
  EXPECT_EQ(regular.above_average, 1u);  // t1 (0.6 > 1/3)
  EXPECT_EQ(regular.majority, 1u);       // t1
  EXPECT_EQ(marker.group_total, 1u);
  EXPECT_EQ(stop.group_total, 1u);
  EXPECT_EQ(regular.group_total, 1u);
}

TEST(AttentionShares, UniformAttentionMajorityGroup) {
  // All-regular 4-token sequence with uniform attention: every sender gives
  // the regular group mass 1 > 0.5.
  EncoderOutput out;
  out.attention.push_back({Tensor::filled({4, 4}, 0.25)});
  const std::vector<TokenGroup> groups(4, TokenGroup::kRegular);
  AttentionShareReport report = attention_group_shares(out, groups);
  EXPECT_EQ(report.layers[0][2].majority, 4u);
  // "Above average" against expectation 1.0 is impossible.
  EXPECT_EQ(report.layers[0][2].above_average, 0u);
}

TEST(AttentionShares, MassConservationAndMajorityImpliesAboveAverage) {
  Vocabulary v = word_vocab(8, {"the", "a"});
  EncoderConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.ff_dim = 16;
  cfg.max_positions = 12;
  cfg.vocab_size = v.size();
  EncoderParams params = init_params(cfg, 3);
  TokenSequence seq = encode_pair({"the", "w1"}, {"a", "w2", "w3"}, v, 10);
  EncoderOutput out = encoder_forward(seq, params, cfg);
  const auto groups = classify_tokens(seq, v, default_stopwords());
  const std::size_t n_real = groups.size();

  // Per sender, group masses sum to 1 (row stochasticity over real keys).
  for (std::size_t k = 0; k < out.attention.size(); ++k) {
    for (std::size_t t = 0; t < n_real; ++t) {
      double total = 0.0;
      for (std::size_t j = 0; j < n_real; ++j) {
        double avg = 0.0;
        for (const Tensor& att : out.attention[k]) avg += att.at(t, j);
        total += avg / static_cast<double>(out.attention[k].size());
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }

  AttentionShareReport report = attention_group_shares(out, groups);
  std::array<std::size_t, 3> sizes{0, 0, 0};
  for (TokenGroup g : groups) ++sizes[static_cast<std::size_t>(g)];
  for (const auto& layer : report.layers) {
    for (std::size_t g = 0; g < 3; ++g) {
      if (static_cast<double>(sizes[g]) / static_cast<double>(n_real) <= 0.5) {
        EXPECT_LE(layer[g].majority, layer[g].above_average);
      }
    }
  }
}

TEST(AttentionShares, CsvShape) {
  EncoderOutput out;
  out.attention.push_back({Tensor::filled({2, 2}, 0.5)});
  AttentionShareReport report =
      attention_group_shares(out, {TokenGroup::kMarker, TokenGroup::kRegular});
  std::ostringstream os;
  write_attention_report(os, report);
  const std::string text = os.str();
  EXPECT_NE(text.find("layer,group,count_above_average,count_majority,group_size_total\n"),
            std::string::npos);
  EXPECT_NE(text.find("1,marker,"), std::string::npos);
  EXPECT_NE(text.find("1,regular,"), std::string::npos);
}

RankerModel knrm_model(std::uint64_t seed, const Vocabulary& v) {
  HeadConfig hc;
  hc.embed_dim = 8;
  EncoderConfig cfg;
  cfg.vocab_size = v.size();
  return init_ranker(RankerKind::kKnrm, v, cfg, hc, seed, 16);
}

TEST(TermInfluence, ExhaustiveOneRecordPerRegularOccurrence) {
  Vocabulary v = word_vocab(6, {"the"});
  RankerModel model = knrm_model(1, v);
  const std::vector<std::string> doc = {"w1", "the", "w2", "w1"};
  const auto records = term_influence(model, "q1", {"w1"}, "d1", doc, default_stopwords(),
                                      InfluenceMode::kExhaustive, 0);
  ASSERT_EQ(records.size(), 3u);  // w1, w2, w1 (stopword excluded)
  EXPECT_EQ(records[0].occurrence, 0u);
  EXPECT_EQ(records[1].occurrence, 2u);
  EXPECT_EQ(records[2].occurrence, 3u);
  for (const auto& r : records) {
    EXPECT_NE(r.term, "the");
    EXPECT_DOUBLE_EQ(r.delta(), r.original_score - r.removed_score);
  }
}

TEST(TermInfluence, DuplicateTermRemovesSingleOccurrence) {
  Vocabulary v = word_vocab(4);
  RankerModel model = knrm_model(2, v);
  const std::vector<std::string> doc = {"w1", "w1"};
  const auto records = term_influence(model, "q", {"w1"}, "d", doc, default_stopwords(),
                                      InfluenceMode::kExhaustive, 0);
  ASSERT_EQ(records.size(), 2u);
  // Removing either occurrence leaves a 1-token document; the removed score
  // must equal scoring ["w1"] directly.
  const double one_left = score_pair(model, {"w1"}, {"w1"}).value();
  EXPECT_DOUBLE_EQ(records[0].removed_score, one_left);
  EXPECT_DOUBLE_EQ(records[1].removed_score, one_left);
}

TEST(TermInfluence, NoRegularTokensWarnsEmpty) {
  Vocabulary v = word_vocab(2, {"the", "of"});
  RankerModel model = knrm_model(3, v);
  std::vector<std::string> warnings;
  const auto records = term_influence(model, "q", {"w1"}, "d", {"the", "of"},
                                      default_stopwords(), InfluenceMode::kRandomOne, 5,
                                      &warnings);
  EXPECT_TRUE(records.empty());
  ASSERT_EQ(warnings.size(), 1u);
}

TEST(TermInfluence, RandomOneDeterministicPerPair) {
  Vocabulary v = word_vocab(8);
  RankerModel model = knrm_model(4, v);
  const std::vector<std::string> doc = {"w1", "w2", "w3", "w4", "w5"};
  const auto r1 = term_influence(model, "q9", {"w1"}, "d7", doc, default_stopwords(),
                                 InfluenceMode::kRandomOne, 42);
  const auto r2 = term_influence(model, "q9", {"w1"}, "d7", doc, default_stopwords(),
                                 InfluenceMode::kRandomOne, 42);
  ASSERT_EQ(r1.size(), 1u);
  EXPECT_EQ(r1[0].occurrence, r2[0].occurrence);
  // A different doc id draws independently.
  const auto r3 = term_influence(model, "q9", {"w1"}, "d8", doc, default_stopwords(),
                                 InfluenceMode::kRandomOne, 42);
  ASSERT_EQ(r3.size(), 1u);
}

TEST(MostInfluential, SingleRegularTokenIsRankOne) {
  Vocabulary v = word_vocab(4, {"the"});
  RankerModel model = knrm_model(5, v);
  const auto ranked = most_influential_terms(model, "q", {"w1"}, "d", {"the", "w2"},
                                             default_stopwords(), 5);
  ASSERT_EQ(ranked.size(), 1u);
  EXPECT_EQ(ranked[0].term, "w2");
}

TEST(MostInfluential, LengthAndOrdering) {
  Vocabulary v = word_vocab(8);
  RankerModel model = knrm_model(6, v);
  const std::vector<std::string> doc = {"w1", "w2", "w3", "w4", "w5", "w6"};
  const auto all = term_influence(model, "q", {"w3"}, "d", doc, default_stopwords(),
                                  InfluenceMode::kExhaustive, 0);
  for (std::size_t top_n : {2ul, 4ul, 10ul}) {
    const auto ranked = most_influential_terms(model, "q", {"w3"}, "d", doc,
                                               default_stopwords(), top_n);
    EXPECT_EQ(ranked.size(), std::min(top_n, all.size()));
    // Matches an external re-sort of the exhaustive records.
    auto sorted = all;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      if (std::abs(a.delta()) != std::abs(b.delta()))
        return std::abs(a.delta()) > std::abs(b.delta());
      if (a.term != b.term) return a.term < b.term;
      return a.occurrence < b.occurrence;
    });
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      EXPECT_EQ(ranked[i].term, sorted[i].term) << i;
      EXPECT_EQ(ranked[i].occurrence, sorted[i].occurrence) << i;
    }
  }
}

TEST(Scatter, FileShapeAndRoundTrip) {
  InfluenceRecord rec;
  rec.query_id = "q1";
  rec.doc_id = "d1";
  rec.term = "cat";
  rec.original_score = 0.75;
  rec.removed_score = -0.25;
  const auto tmp = std::filesystem::temp_directory_path() / "ranklab_scatter.csv";
  emit_scatter({rec}, tmp.string());
  const std::string text = read_file(tmp.string());
  EXPECT_EQ(text, "qid,docid,term,original_score,removed_score\nq1,d1,cat,0.75,-0.25\n");
  std::filesystem::remove(tmp);
  EXPECT_THROW(emit_scatter({}, tmp.string()), std::invalid_argument);
  EXPECT_FALSE(std::filesystem::exists(tmp));
}

TEST(Rerank, ProducesSortedRun) {
  Vocabulary v = word_vocab(8);
  RankerModel model = knrm_model(7, v);
  std::vector<CandidateSet> candidates(1);
  candidates[0].query_id = "q1";
  candidates[0].query_text = "w1 w2";
  for (int d = 0; d < 4; ++d)
    candidates[0].docs.push_back(
        {"d" + std::to_string(d), "w" + std::to_string(d) + " w" + std::to_string(d + 1), 0.0});
  RunFile run = rerank_candidates(model, candidates, "tag");
  ASSERT_EQ(run.size(), 4u);
  for (std::size_t i = 0; i < run.size(); ++i) {
    EXPECT_EQ(run[i].rank, static_cast<long>(i + 1));
    EXPECT_EQ(run[i].tag, "tag");
    if (i) EXPECT_LE(run[i].score, run[i - 1].score);
  }
}

TEST(MarkerAblation, ReportsBothConditions) {
  Vocabulary v = word_vocab(10);
  EncoderConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.ff_dim = 16;
  cfg.max_positions = 16;
  cfg.vocab_size = v.size();
  RankerModel model = init_ranker(RankerKind::kLastInt, v, cfg, HeadConfig{}, 11, 16);
  QrelSet qrels;
  std::vector<CandidateSet> eval_set;
  for (int q = 0; q < 4; ++q) {
    CandidateSet set;
    set.query_id = "q" + std::to_string(q);
    set.query_text = "w" + std::to_string(q);
    for (int d = 0; d < 3; ++d) {
      set.docs.push_back({"d" + std::to_string(d),
                          "w" + std::to_string((q + d) % 10) + " w" + std::to_string(d), 0.0});
      qrels.set(set.query_id, "d" + std::to_string(d), d == 0 ? 1 : 0);
    }
    eval_set.push_back(std::move(set));
  }
  for (MarkerRemoval removal : {MarkerRemoval::kSepOnly, MarkerRemoval::kAll}) {
    AblationResult result =
        marker_ablation(model, eval_set, qrels, {Metric::kMrr, 10, 1}, removal, 1000, 3);
    EXPECT_EQ(result.with_markers.per_query.size(), 4u);
    EXPECT_EQ(result.without_markers.per_query.size(), 4u);
    EXPECT_GE(result.p_value, 0.0);
    EXPECT_LE(result.p_value, 1.0);
  }
}

TEST(MarkerAblation, RemovalChangesLengthByMarkerCount) {
  Vocabulary v = word_vocab(6);
  TokenSequence full = encode_pair({"w1"}, {"w2", "w3"}, v, 10);
  EncodeOptions no_sep;
  no_sep.sep = false;
  TokenSequence cls_only = encode_pair({"w1"}, {"w2", "w3"}, v, 10, no_sep);
  EncodeOptions none;
  none.cls = false;
  none.sep = false;
  TokenSequence bare = encode_pair({"w1"}, {"w2", "w3"}, v, 10, none);
  EXPECT_EQ(full.real_length() - cls_only.real_length(), 2u);  // two separators
  EXPECT_EQ(full.real_length() - bare.real_length(), 3u);      // all markers
}

// Directional check on a model trained so that one term carries the signal:
// removing the query's key term from the passage moves the score more than
// removing any filler.
TEST(TermInfluence, TrainedSingleSignalModelRanksKeyFirst) {
  Vocabulary v = word_vocab(30);
  EncoderConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.ff_dim = 32;
  cfg.max_positions = 12;
  cfg.vocab_size = v.size();
  RankerModel model = init_ranker(RankerKind::kLastInt, v, cfg, HeadConfig{}, 5, 12);

  Rng rng(17);
  auto word = [](int i) { return "w" + std::to_string(i); };
  std::vector<TripleRecord> triples;
  for (int t = 0; t < 300; ++t) {
    const int key = static_cast<int>(rng.uniform_int(8));
    auto fill = [&](bool with_key) {
      std::vector<std::string> words;
      if (with_key) words.push_back(word(key));
      while (words.size() < 5) words.push_back(word(10 + static_cast<int>(rng.uniform_int(18))));
      for (std::size_t i = words.size(); i > 1; --i)
        std::swap(words[i - 1], words[rng.uniform_int(i)]);
      std::string text;
      for (const auto& w : words) text += w + " ";
      return text;
    };
    triples.push_back({word(key), fill(true), fill(false)});
  }
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.max_steps = 400;
  tc.val_interval = 100;
  tc.patience = 10;
  tc.seed = 2;
  train(model, triples, {}, tc);

  int key_first = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const int key = static_cast<int>(rng.uniform_int(8));
    std::vector<std::string> doc = {word(10 + t % 18), word(key), word(11 + t % 17), word(12)};
    const auto ranked = most_influential_terms(model, "q" + std::to_string(t), {word(key)},
                                               "d" + std::to_string(t), doc,
                                               default_stopwords(), 1);
    ASSERT_EQ(ranked.size(), 1u);
    if (ranked[0].term == word(key)) ++key_first;
  }
  EXPECT_GE(key_first, trials * 3 / 4) << "trained key term should dominate influence";
}

}  // namespace
}  // namespace ranklab
