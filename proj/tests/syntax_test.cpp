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

#include "scpn/syntax.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "random_trees.hpp"

namespace scpn {
namespace {

constexpr const char* kSheDroveHome = "(S(NP(PRP))(VP(VBD)(NP(NN)))(.))";

TEST(ParseBracketed, ReadsExampleParse) {
  ParseTree t = parse_bracketed(kSheDroveHome);
  EXPECT_EQ(t.label, "S");
  ASSERT_EQ(t.children.size(), 3u);
  EXPECT_EQ(t.children[0].label, "NP");
  EXPECT_EQ(t.children[1].label, "VP");
  EXPECT_EQ(t.children[2].label, ".");
  EXPECT_EQ(tree_depth(t), 4u);
  EXPECT_EQ(serialize(t), kSheDroveHome);
}

TEST(ParseBracketed, SingleNode) {
  ParseTree t = parse_bracketed("(S)");
  EXPECT_EQ(t.label, "S");
  EXPECT_TRUE(t.children.empty());
  EXPECT_EQ(serialize(t), "(S)");
}

TEST(ParseBracketed, WhitespaceIsIgnoredBetweenTokens) {
  ParseTree t = parse_bracketed("  ( S ( NP ( PRP ) )\n( VP ) ( . ) ) ");
  EXPECT_EQ(serialize(t), "(S(NP(PRP))(VP)(.))");
}

void ExpectError(const std::string& text, ErrorCode code, std::size_t offset) {
  try {
    parse_bracketed(text);
    FAIL() << "no error for " << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
    ASSERT_TRUE(e.offset().has_value());
    EXPECT_EQ(*e.offset(), offset) << e.what();
  }
}

TEST(ParseBracketed, Errors) {
  ExpectError("(S(NP)", ErrorCode::kUnbalancedBrackets, 7);
  ExpectError("(S)(S)", ErrorCode::kTrailingGarbage, 4);
  ExpectError("(S())", ErrorCode::kEmptyLabel, 4);
  ExpectError("S", ErrorCode::kUnbalancedBrackets, 1);
  ExpectError("", ErrorCode::kUnbalancedBrackets, 1);
  ExpectError("(S))", ErrorCode::kTrailingGarbage, 4);
}

TEST(StripLeaves, RemovesWords) {
  ParseTree t = parse_bracketed(
      "(S(NP(PRP she))(VP(VBD drove)(NP(NN home)))(. .))");
  EXPECT_EQ(serialize(t), "(S(NP(PRP she))(VP(VBD drove)(NP(NN home)))(. .))");
  ParseTree s = strip_leaves(t);
  EXPECT_EQ(serialize(s), kSheDroveHome);
  EXPECT_EQ(strip_leaves(s), s);
  EXPECT_EQ(serialize(strip_leaves(parse_bracketed("(NP(NN dog))"))), "(NP(NN))");
}

TEST(Linearize, RoundTripsThroughTokens) {
  ParseTree t = parse_bracketed(kSheDroveHome);
  auto toks = linearize(t);
  std::vector<std::string> want{"(S", "(NP", "(PRP", ")", ")", "(VP", "(VBD",
                                ")", "(NP", "(NN", ")", ")", ")", "(.", ")", ")"};
  EXPECT_EQ(toks, want);
  auto back = tree_from_tokens(toks);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(*back, t);
}

TEST(Linearize, RejectsMalformedTokenStreams) {
  using V = std::vector<std::string>;
  EXPECT_FALSE(tree_from_tokens(V{}).has_value());
  EXPECT_FALSE(tree_from_tokens(V{"(S"}).has_value());
  EXPECT_FALSE(tree_from_tokens(V{")"}).has_value());
  EXPECT_FALSE(tree_from_tokens(V{"(S", ")", "(S", ")"}).has_value());
  EXPECT_FALSE(tree_from_tokens(V{"(S", "word", ")"}).has_value());
}

TEST(Template, ExtractFromExample) {
  Template t = extract_template(parse_bracketed(kSheDroveHome));
  EXPECT_EQ(t.serialize(), "(S(NP)(VP)(.))");
  EXPECT_EQ(extract_template(parse_bracketed("(S)")).serialize(), "(S)");
}

TEST(Template, KeepsPunctuationChildren) {
  ParseTree t = parse_bracketed("(SBARQ(ADVP(RB))(,)(S(NP)(VP))(,)(SQ(VBZ)(NP)))");
  EXPECT_EQ(extract_template(t).serialize(), "(SBARQ(ADVP)(,)(S)(,)(SQ))");
}

TEST(Template, ParseAndSerialize) {
  Template t = Template::parse("(S(NP)(VP)(.))");
  EXPECT_EQ(t.root, "S");
  EXPECT_EQ(t.children, (std::vector<std::string>{"NP", "VP", "."}));
  EXPECT_EQ(Template::parse(t.serialize()), t);
  EXPECT_THROW(Template::parse("(S(NP(NN)))"), Error);
}

TEST(TemplateMatch, Basics) {
  ParseTree a = parse_bracketed(kSheDroveHome);
  EXPECT_TRUE(template_match(a, a));
  ParseTree b = parse_bracketed("(S(NP(DT)(NN))(VP(VBD))(.))");
  EXPECT_TRUE(template_match(a, b));
  EXPECT_FALSE(template_match(parse_bracketed("(S(NP)(VP))"),
                              parse_bracketed("(S(VP)(NP))")));
}

TEST(TemplateMatch, DeepMutationInvariance) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    ParseTree t = testing_util::random_tree(rng, 5, 4);
    ParseTree m = testing_util::mutate_below_level_two(rng, t);
    EXPECT_TRUE(template_match(t, m));
    EXPECT_EQ(extract_template(t), extract_template(m));
  }
}

TEST(TemplateMatch, EquivalenceRelation) {
  std::mt19937_64 rng(12);
  std::vector<ParseTree> trees;
  for (int i = 0; i < 60; ++i) trees.push_back(testing_util::random_tree(rng, 3, 3));
  for (const auto& a : trees) {
    EXPECT_TRUE(template_match(a, a));
    for (const auto& b : trees) {
      EXPECT_EQ(template_match(a, b), template_match(b, a));
      if (!template_match(a, b)) continue;
      for (const auto& c : trees) {
        if (template_match(b, c)) EXPECT_TRUE(template_match(a, c));
      }
    }
  }
}

TEST(Serialize, RandomRoundTrip) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 1000; ++i) {
    ParseTree t = testing_util::random_tree(rng, 5, 4);
    EXPECT_EQ(parse_bracketed(serialize(t)), t);
    auto back = tree_from_tokens(linearize(t));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, t);
  }
}

TEST(TopTemplates, CountsAndTies) {
  TemplateHistogram h;
  Template a = Template::parse("(S(NP)(VP))");
  Template b = Template::parse("(S(VP))");
  h.add(a, 3);
  h.add(b, 1);
  EXPECT_EQ(top_templates(h, 1), std::vector<Template>{a});
  EXPECT_EQ(top_templates(h, 5).size(), 2u);

  TemplateHistogram tie;
  tie.add(a, 2);
  tie.add(b, 2);
  // "(S(NP)(VP))" < "(S(VP))" byte-wise.
  EXPECT_EQ(top_templates(tie, 1), std::vector<Template>{a});
}

TEST(TopTemplates, MatchesBruteForceOracle) {
  std::mt19937_64 rng(14);
  std::vector<ParseTree> parses;
  for (int i = 0; i < 1000; ++i) parses.push_back(testing_util::random_tree(rng, 3, 3));
  // Oracle: count serialized templates in a plain map, sort by hand.
  std::map<std::string, int> counts;
  for (const auto& p : parses) {
    std::string s = "(" + p.label;
    for (const auto& c : p.children) s += "(" + c.label + ")";
    counts[s + ")"]++;
  }
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& [s, n] : counts) ranked.emplace_back(-n, s);
  std::sort(ranked.begin(), ranked.end());
  auto got = top_templates(parses, 20);
  ASSERT_EQ(got.size(), std::min<std::size_t>(20, ranked.size()));
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].serialize(), ranked[i].second) << i;
  }
}

TEST(TopTemplates, PrefixProperty) {
  std::mt19937_64 rng(15);
  std::vector<ParseTree> parses;
  for (int i = 0; i < 300; ++i) parses.push_back(testing_util::random_tree(rng, 3, 3));
  auto hist = TemplateHistogram::of(parses);
  for (std::size_t k = 1; k < 30; ++k) {
    auto small = top_templates(hist, k);
    auto big = top_templates(hist, k + 1);
    ASSERT_LE(small.size(), big.size());
    EXPECT_TRUE(std::equal(small.begin(), small.end(), big.begin()));
  }
}

TEST(TemplateEntropy, ClosedForms) {
  Template a = Template::parse("(A)");
  Template b = Template::parse("(B)");
  TemplateHistogram u;
  u.add(a);
  u.add(b);
  EXPECT_DOUBLE_EQ(template_entropy(u), 1.0);
  TemplateHistogram d;
  d.add(a, 4);
  EXPECT_EQ(template_entropy(d), 0.0);
  TemplateHistogram s;
  s.add(a, 3);
  s.add(b, 1);
  EXPECT_NEAR(template_entropy(s), 0.811278, 1e-6);
  EXPECT_THROW(template_entropy(TemplateHistogram{}), Error);
}

TEST(TemplateEntropy, UniformIsMaximal) {
  std::mt19937_64 rng(16);
  for (int n = 1; n <= 12; ++n) {
    TemplateHistogram uniform;
    TemplateHistogram skewed;
    for (int i = 0; i < n; ++i) {
      Template t{"T" + std::to_string(i), {}};
      uniform.add(t, 5);
      skewed.add(t, 1 + rng() % 9);
    }
    EXPECT_NEAR(template_entropy(uniform), std::log2(n), 1e-12);
    EXPECT_LE(template_entropy(skewed), std::log2(n) + 1e-12);
  }
}

}  // namespace
}  // namespace scpn
