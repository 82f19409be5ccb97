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

#include "ranklab/tokenizer.hpp"

#include <gtest/gtest.h>

#include "ranklab/tensor.hpp"

namespace ranklab {
namespace {

TEST(Tokenize, RuleApplication) {
  const std::vector<std::string> want = {"what", "is", "a", "pmi", "id"};
  EXPECT_EQ(tokenize("What is a PMI id?"), want);
}

TEST(Tokenize, Empty) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("   \t\n").empty());
}

TEST(Tokenize, EmDashNotSplit) {
  // Em-dash is not whitespace under the stated rule, so the pair stays one
  // token; this documents the word-tokenizer limitation.
  const std::vector<std::string> want = {"coffee\xE2\x80\x94"
                                         "drink"};
  EXPECT_EQ(tokenize("Coffee\xE2\x80\x94"
                     "drink"),
            want);
}

TEST(Tokenize, UnicodeWhitespaceSplits) {
  // U+3000 ideographic space between the words.
  const std::vector<std::string> want = {"a", "b"};
  EXPECT_EQ(tokenize("a\xE3\x80\x80"
                     "b"),
            want);
}

TEST(Tokenize, PunctuationStrippedAtEdgesOnly) {
  const std::vector<std::string> want = {"don't", "stop"};
  EXPECT_EQ(tokenize("\"don't\" stop!!"), want);
}

TEST(Vocabulary, ReservedIdsFixed) {
  Vocabulary v;
  EXPECT_EQ(v.id("[PAD]"), 0);
  EXPECT_EQ(v.id("[UNK]"), 1);
  EXPECT_EQ(v.id("[CLS]"), 2);
  EXPECT_EQ(v.id("[SEP]"), 3);
  EXPECT_EQ(v.id("[MASK]"), 4);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id("missing"), Vocabulary::kUnk);
}

TEST(BuildVocab, FrequencyThreshold) {
  Vocabulary v = build_vocab({"a a b"}, 2, 100);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
}

TEST(BuildVocab, CapWithLexTieBreak) {
  Vocabulary v = build_vocab({"a b"}, 1, Vocabulary::kReservedCount + 1);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
}

TEST(BuildVocab, EmptyCorpusRejected) {
  EXPECT_THROW(build_vocab({}, 1, 100), std::runtime_error);
}

TEST(BuildVocab, DeterministicAcrossRuns) {
  // Synthetic 1k-doc corpus; ids must be identical across two builds.
  std::vector<std::string> corpus;
  Rng rng(42);
  for (int d = 0; d < 1000; ++d) {
    std::string text;
    const int len = 5 + static_cast<int>(rng.uniform_int(10));
    for (int i = 0; i < len; ++i) {
      text += "w" + std::to_string(rng.uniform_int(300)) + " ";
    }
    corpus.push_back(text);
  }
  Vocabulary a = build_vocab(corpus, 2, 200);
  Vocabulary b = build_vocab(corpus, 2, 200);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(a.to_text(), b.to_text());
}

TEST(Vocabulary, TextRoundTrip) {
  Vocabulary v = build_vocab({"apple banana apple cherry"}, 1, 100);
  Vocabulary w = Vocabulary::from_text(v.to_text());
  EXPECT_TRUE(v == w);
}

TEST(EncodePair, ConstructionByDefinition) {
  Vocabulary v;
  const int a = v.add("a"), b = v.add("b"), c = v.add("c");
  TokenSequence seq = encode_pair({"a"}, {"b", "c"}, v, 8);
  const std::vector<int> ids = {Vocabulary::kCls, a, Vocabulary::kSep, b, c, Vocabulary::kSep,
                                0, 0};
  const std::vector<int> segments = {0, 0, 0, 1, 1, 1, 0, 0};
  const std::vector<int> mask = {1, 1, 1, 1, 1, 1, 0, 0};
  EXPECT_EQ(seq.ids, ids);
  EXPECT_EQ(seq.segments, segments);
  EXPECT_EQ(seq.mask, mask);
}

TEST(EncodePair, DocumentTruncatedFirst) {
  Vocabulary v;
  v.add("a");
  v.add("b");
  v.add("c");
  v.add("d");
  v.add("e");
  TokenSequence seq = encode_pair({"a"}, {"b", "c", "d", "e"}, v, 6);
  EXPECT_EQ(seq.real_length(), 6u);
  // [CLS] a [SEP] b c [SEP]
  EXPECT_EQ(seq.ids[3], v.id("b"));
  EXPECT_EQ(seq.ids[4], v.id("c"));
  EXPECT_EQ(seq.ids[5], Vocabulary::kSep);
}

TEST(EncodePair, QueryTruncatedWhenDocExhausted) {
  Vocabulary v;
  for (const char* t : {"a", "b", "c", "d", "e"}) v.add(t);
  TokenSequence seq = encode_pair({"a", "b", "c", "d"}, {"e"}, v, 6);
  // Doc goes first: budget 3 for tokens, all to the query.
  const std::vector<int> ids = {Vocabulary::kCls, v.id("a"), v.id("b"), v.id("c"),
                                Vocabulary::kSep, Vocabulary::kSep};
  EXPECT_EQ(seq.ids, ids);
}

TEST(EncodePair, UnknownTokenGetsUnk) {
  Vocabulary v;
  v.add("a");
  TokenSequence seq = encode_pair({"a"}, {"zzz"}, v, 8);
  EXPECT_EQ(seq.ids[3], Vocabulary::kUnk);
}

TEST(EncodePair, MaxLenTooSmallRejected) {
  Vocabulary v;
  EXPECT_THROW(encode_pair({"a"}, {"b"}, v, 3), std::invalid_argument);
}

TEST(EncodeSingle, Basic) {
  Vocabulary v;
  const int a = v.add("a"), b = v.add("b");
  TokenSequence seq = encode_single({"a", "b"}, v, 5);
  const std::vector<int> ids = {Vocabulary::kCls, a, b, Vocabulary::kSep, 0};
  EXPECT_EQ(seq.ids, ids);
  for (int s : seq.segments) EXPECT_EQ(s, 0);
}

TEST(EncodeSingle, EmptyTextAllowed) {
  Vocabulary v;
  TokenSequence seq = encode_single({}, v, 6);
  EXPECT_EQ(seq.ids[0], Vocabulary::kCls);
  EXPECT_EQ(seq.ids[1], Vocabulary::kSep);
  EXPECT_EQ(seq.real_length(), 2u);
}

TEST(EncodeSingle, OverlongTruncated) {
  Vocabulary v;
  std::vector<std::string> toks;
  for (int i = 0; i < 20; ++i) {
    toks.push_back("t" + std::to_string(i));
    v.add(toks.back());
  }
  TokenSequence seq = encode_single(toks, v, 8);
  EXPECT_EQ(seq.real_length(), 8u);
  EXPECT_EQ(seq.ids[7], Vocabulary::kSep);
  EXPECT_EQ(seq.ids[6], v.id("t5"));
}

// Structural invariants over random inputs: one CLS at position 0, the right
// SEP count, PAD suffix with segment 0 and mask 0.
TEST(Encode, StructuralInvariants) {
  Vocabulary v;
  for (int i = 0; i < 50; ++i) v.add("w" + std::to_string(i));
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> q, d;
    for (std::size_t i = 0; i < rng.uniform_int(6); ++i)
      q.push_back("w" + std::to_string(rng.uniform_int(60)));
    for (std::size_t i = 0; i < rng.uniform_int(12); ++i)
      d.push_back("w" + std::to_string(rng.uniform_int(60)));
    const std::size_t max_len = 4 + rng.uniform_int(12);
    for (int single = 0; single < 2; ++single) {
      TokenSequence seq = single ? encode_single(q, v, max_len) : encode_pair(q, d, v, max_len);
      ASSERT_EQ(seq.ids.size(), max_len);
      ASSERT_EQ(seq.segments.size(), max_len);
      ASSERT_EQ(seq.mask.size(), max_len);
      EXPECT_EQ(seq.ids[0], Vocabulary::kCls);
      int cls = 0, sep = 0;
      const std::size_t real = seq.real_length();
      for (std::size_t i = 0; i < max_len; ++i) {
        if (i < real) {
          EXPECT_EQ(seq.mask[i], 1);
        } else {
          EXPECT_EQ(seq.mask[i], 0);
          EXPECT_EQ(seq.ids[i], Vocabulary::kPad);
          EXPECT_EQ(seq.segments[i], 0);
        }
        if (seq.ids[i] == Vocabulary::kCls) ++cls;
        if (seq.ids[i] == Vocabulary::kSep) ++sep;
      }
      EXPECT_EQ(cls, 1);
      EXPECT_EQ(sep, single ? 1 : 2);
    }
  }
}

TEST(Encode, OriginTracksSourceWords) {
  Vocabulary v;
  v.add("x");
  v.add("y");
  v.add("z");
  TokenSequence seq = encode_pair({"x"}, {"y", "z"}, v, 8);
  EXPECT_EQ(seq.origin[0], -1);
  EXPECT_EQ(seq.origin[1], 0);  // query word 0
  EXPECT_EQ(seq.origin[2], -1);
  EXPECT_EQ(seq.origin[3], 0);  // doc word 0
  EXPECT_EQ(seq.origin[4], 1);  // doc word 1
  EXPECT_EQ(seq.origin[5], -1);
}

}  // namespace
}  // namespace ranklab
