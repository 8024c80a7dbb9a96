// Copyright 2026 The SCPN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "scpn/filters.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "filter_fixture.hpp"
#include "random_text.hpp"

namespace scpn {
namespace {

using testing_util::FilterFixture;

TEST(NgramOverlap, Examples) {
  EXPECT_DOUBLE_EQ(ngram_overlap("a b c", "a b c"), 1.0);
  EXPECT_DOUBLE_EQ(ngram_overlap("a b c", "d e f"), 0.0);
  EXPECT_NEAR(ngram_overlap("a b c", "a b d"), (2.0 / 4.0 + 1.0 / 3.0) / 2.0, 1e-12);
  EXPECT_NEAR(ngram_overlap("a b c", "a b d"), 0.41667, 1e-5);
  // Single words have no bigrams on either side.
  EXPECT_DOUBLE_EQ(ngram_overlap("a", "a"), 1.0);
  // Multisets, not sets.
  EXPECT_NEAR(ngram_overlap("a a", "a"), (1.0 / 2.0 + 0.0) / 2.0, 1e-12);
}

TEST(NgramOverlap, EmptySentence) {
  try {
    ngram_overlap("", "a");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptySentence);
  }
  EXPECT_THROW(ngram_overlap("a", "   "), Error);
}

TEST(NgramOverlap, SymmetricBoundedAndOneOnlyForEqualMultisets) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    std::string a = testing_util::random_sentence(rng, "abc");
    std::string b = testing_util::random_sentence(rng, "abc");
    if (split_whitespace(a).empty() || split_whitespace(b).empty()) continue;
    double x = ngram_overlap(a, b);
    EXPECT_EQ(x, ngram_overlap(b, a));
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
    auto ta = split_whitespace(a);
    auto tb = split_whitespace(b);
    bool same = detail::ngram_counts(ta, 1) == detail::ngram_counts(tb, 1) &&
                detail::ngram_counts(ta, 2) == detail::ngram_counts(tb, 2);
    EXPECT_EQ(x == 1.0, same) << a << " | " << b;
  }
}

TEST(CharTrigrams, BoundaryMarks) {
  EXPECT_EQ(char_trigrams("cat"), (std::vector<std::string>{"#ca", "cat", "at#"}));
  EXPECT_EQ(char_trigrams("a"), (std::vector<std::string>{"#a#"}));
}

class FileScorerTest : public ::testing::Test {
 protected:
  void SetUp() override { fixture_.write(); }
  void TearDown() override { fixture_.remove(); }
  FilterFixture fixture_;
};

TEST_F(FileScorerTest, HandBuiltCosines) {
  auto scorer = EmbeddingScorer::from_file(fixture_.path());
  EXPECT_NEAR(embed_similarity(scorer, "x", "y"), 0.0, 1e-12);
  EXPECT_NEAR(embed_similarity(scorer, "x y", "x"), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(embed_similarity(scorer, "x", "w"), -1.0, 1e-12);
  EXPECT_NEAR(embed_similarity(scorer, "x y z", "x y z"), 1.0, 1e-12);
}

TEST_F(FileScorerTest, UnknownSentenceIsZeroVector) {
  auto scorer = EmbeddingScorer::from_file(fixture_.path());
  try {
    scorer.similarity("x", "unknown words");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroVector);
  }
}

TEST(EmbeddingScorer, BadFiles) {
  auto path = (std::filesystem::temp_directory_path() / "scpn_bad_vectors.txt").string();
  std::ofstream(path) << "a 1 2\nb 1\n";
  EXPECT_THROW(EmbeddingScorer::from_file(path), Error);
  std::ofstream(path) << "a 1 x\n";
  EXPECT_THROW(EmbeddingScorer::from_file(path), Error);
  std::filesystem::remove(path);
  EXPECT_THROW(EmbeddingScorer::from_file(path), Error);
}

TEST(EmbeddingScorer, HashedIsDeterministicSymmetricAndSelfSimilar) {
  auto a = EmbeddingScorer::hashed(7);
  auto b = EmbeddingScorer::hashed(7);
  auto c = EmbeddingScorer::hashed(8);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    std::string s = testing_util::random_sentence(rng, "abcdef");
    std::string g = testing_util::random_sentence(rng, "abcdef");
    if (split_whitespace(s).empty() || split_whitespace(g).empty()) continue;
    EXPECT_NEAR(a.similarity(s, s), 1.0, 1e-6);
    EXPECT_EQ(a.similarity(s, g), b.similarity(s, g));
    EXPECT_EQ(a.similarity(s, g), a.similarity(g, s));
    EXPECT_GE(a.similarity(s, g), -1.0);
    EXPECT_LE(a.similarity(s, g), 1.0);
    EXPECT_EQ(a.embed(s).size(), 128);
    (void)c.similarity(s, g);
  }
  EXPECT_NE(a.embed("the cat"), c.embed("the cat"));
}

TEST(EmbeddingScorer, SharedWordsRaiseHashedSimilarity) {
  auto s = EmbeddingScorer::hashed(3);
  EXPECT_GT(s.similarity("the small dog ran home", "the small dog walked home"),
            s.similarity("the small dog ran home", "quick purple ideas sleep"));
}

TEST_F(FileScorerTest, TwentyCandidateHandOracle) {
  auto scorer = EmbeddingScorer::from_file(fixture_.path());
  auto cands = fixture_.candidates();
  auto kept = postprocess(cands, FilterConfig{}, scorer);
  std::size_t k = 0;
  for (const auto& row : FilterFixture::oracle()) {
    if (!row.keep) continue;
    ASSERT_LT(k, kept.size());
    EXPECT_EQ(kept[k].candidate, row.candidate);
    EXPECT_NEAR(kept[k].overlap, row.overlap, 1e-9) << row.candidate;
    EXPECT_NEAR(kept[k].similarity, row.similarity, 1e-9) << row.candidate;
    ++k;
  }
  EXPECT_EQ(k, kept.size());
  EXPECT_EQ(kept.size(), 10u);
}

TEST_F(FileScorerTest, IdentityAndExactThresholds) {
  auto scorer = EmbeddingScorer::from_file(fixture_.path());
  auto cands = fixture_.candidates();
  EXPECT_EQ(postprocess(cands, FilterConfig{0.0, -1.0}, scorer).size(), cands.size());
  auto exact = postprocess(cands, FilterConfig{1.0, -1.0}, scorer);
  ASSERT_EQ(exact.size(), 1u);
  EXPECT_EQ(exact[0].candidate, "x y z");
  EXPECT_THROW(postprocess(cands, FilterConfig{1.5, 0.0}, scorer), Error);
  EXPECT_THROW(postprocess(cands, FilterConfig{0.5, -2.0}, scorer), Error);
}

TEST_F(FileScorerTest, MonotoneOverThresholdGrid) {
  auto scorer = EmbeddingScorer::from_file(fixture_.path());
  auto cands = fixture_.candidates();
  std::vector<double> overlaps{0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 1.0};
  std::vector<double> sims{-1.0, -0.5, 0.0, 0.5, 0.7, 0.8, 0.95, 1.0};
  auto survivors = [&](double o, double s) {
    std::vector<std::string> out;
    for (const auto& c : postprocess(cands, FilterConfig{o, s}, scorer)) {
      out.push_back(c.candidate);
    }
    return out;
  };
  for (std::size_t i = 0; i < overlaps.size(); ++i) {
    for (std::size_t j = 0; j < sims.size(); ++j) {
      auto here = survivors(overlaps[i], sims[j]);
      auto subset_of = [&](const std::vector<std::string>& sub) {
        return std::all_of(sub.begin(), sub.end(), [&](const std::string& s) {
          return std::find(here.begin(), here.end(), s) != here.end();
        });
      };
      if (i + 1 < overlaps.size()) EXPECT_TRUE(subset_of(survivors(overlaps[i + 1], sims[j])));
      if (j + 1 < sims.size()) EXPECT_TRUE(subset_of(survivors(overlaps[i], sims[j + 1])));
    }
  }
}

TEST(Postprocess, DropsCandidatesWithUndefinedMetrics) {
  auto scorer = EmbeddingScorer::hashed(1);
  std::vector<ScoredCandidate> cands{{"a b", "", 0.0}, {"a b", "a b", -1.0}};
  auto kept = postprocess(cands, FilterConfig{0.0, -1.0}, scorer);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, -1.0);
}

}  // namespace
}  // namespace scpn
