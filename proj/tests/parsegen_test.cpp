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

#include "scpn/parsegen.hpp"

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "model_fixtures.hpp"
#include "scpn/synth.hpp"

namespace scpn {
namespace {

using Model = ScpnModel<float>;

ParaphraseExample SamplePair() {
  return ParaphraseExample::make(
      "the dog saw the cat .", "the cat was seen by the dog .",
      parse_bracketed("(S(NP(DT the)(NN dog))(VP(VBD saw)(NP(DT the)(NN cat)))(. .))"),
      parse_bracketed("(S(NP(DT the)(NN cat))(VP(VBD was)(VP(VBN seen)(PP(IN by)"
                      "(NP(DT the)(NN dog)))))(. .))"));
}

ScpnConfig FastConfig(bool parse_attention = true) {
  ScpnConfig c = testing_util::tiny_config(24);
  c.learning_rate = 1e-2;
  c.batch_size = 1;
  c.max_decode_length = 30;
  c.use_parse_attention = parse_attention;
  return c;
}

TrainOptions Steps(std::size_t n) {
  TrainOptions o;
  o.epochs = n;
  o.stop_below = 0.01;
  return o;
}

TEST(ParseGenInstance, Fields) {
  auto ex = SamplePair();
  Instance inst = parsegen_instance(ex);
  EXPECT_EQ(inst.source, linearize(ex.p1));
  EXPECT_EQ(inst.target, linearize(ex.p2));
  EXPECT_EQ(inst.control, (std::vector<std::string>{"(S", "(NP", ")", "(VP", ")", "(.", ")",
                                                    ")"}));
  // Control tokens always re-read as the same template.
  auto tree = tree_from_tokens(inst.control);
  ASSERT_TRUE(tree.has_value());
  EXPECT_EQ(extract_template(*tree), ex.t2);
}

TEST(FirstWellFormed, SkipsMalformedEntries) {
  std::vector<std::vector<std::string>> ranked{
      {"(S", "(NP", ")"}, {"(S", "(NP", ")", ")"}, {"(S", ")"}};
  EXPECT_EQ(first_well_formed(ranked), 1u);
  std::vector<std::vector<std::string>> none{{")"}, {}};
  EXPECT_FALSE(first_well_formed(none).has_value());
}

TEST(GenerateFullParse, NoWellFormedHypothesis) {
  ScpnConfig c = testing_util::tiny_config(8);
  c.use_copy = false;
  auto ex = SamplePair();
  std::vector<Instance> data{parsegen_instance(ex)};
  auto [words, controls] = instance_vocabs(data);
  Model gen(ModelKind::kParseGenerator, c, words, controls);
  gen.params().at("output.b").value(Vocab::kEos, 0) = 50.0f;
  try {
    generate_full_parse(gen, ex.p1, ex.t2, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoWellFormedHypothesis);
  }
}

class OverfitPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ex_ = new ParaphraseExample(SamplePair());
    std::vector<ParaphraseExample> one{*ex_};
    gen_ = train_parse_generator<float>(one, FastConfig(), Steps(300)).release();
    scpn_ = train_scpn<float>(one, std::nullopt, FastConfig(), Steps(300)).release();
  }
  static void TearDownTestSuite() {
    delete gen_;
    delete scpn_;
    delete ex_;
  }
  static ParaphraseExample* ex_;
  static Model* gen_;
  static Model* scpn_;
};

ParaphraseExample* OverfitPipeline::ex_ = nullptr;
Model* OverfitPipeline::gen_ = nullptr;
Model* OverfitPipeline::scpn_ = nullptr;

TEST_F(OverfitPipeline, GeneratorReproducesTargetParse) {
  auto g = generate_full_parse(*gen_, ex_->p1, ex_->t2, 4);
  EXPECT_EQ(g.tree, strip_leaves(ex_->p2));
  EXPECT_TRUE(g.conforms);
  EXPECT_EQ(parse_bracketed(serialize(g.tree)), g.tree);
}

TEST_F(OverfitPipeline, ConformityIsMeasuredNotForced) {
  Template other = Template::parse("(SQ(VBD)(NP)(VP)(.))");
  auto g = generate_full_parse(*gen_, ex_->p1, other, 4);
  EXPECT_EQ(g.conforms, extract_template(g.tree) == other);
  EXPECT_FALSE(g.conforms);
}

TEST_F(OverfitPipeline, GoldParseBypassEmitsTarget) {
  auto r = paraphrase_with_template(*scpn_, static_cast<const Model*>(nullptr), ex_->s1,
                                    ex_->p1, ex_->t2, 4, ex_->p2);
  ASSERT_FALSE(r.candidates.empty());
  EXPECT_EQ(r.candidates[0].text, ex_->s2);
  EXPECT_TRUE(r.conforms);
}

TEST_F(OverfitPipeline, GeneratedParsePipeline) {
  auto r = paraphrase_with_template(*scpn_, gen_, ex_->s1, ex_->p1, ex_->t2, 4);
  EXPECT_EQ(r.target_parse, strip_leaves(ex_->p2));
  ASSERT_FALSE(r.candidates.empty());
  EXPECT_EQ(r.candidates[0].text, ex_->s2);
  for (std::size_t i = 1; i < r.candidates.size(); ++i) {
    EXPECT_GE(r.candidates[i - 1].score, r.candidates[i].score);
  }
}

TEST_F(OverfitPipeline, BeamOneGivesOneCandidate) {
  auto r = paraphrase_with_template(*scpn_, gen_, ex_->s1, ex_->p1, ex_->t2, 1);
  EXPECT_EQ(r.candidates.size(), 1u);
}

TEST_F(OverfitPipeline, Deterministic) {
  auto a = paraphrase_with_template(*scpn_, gen_, ex_->s1, ex_->p1, ex_->t2, 4);
  auto b = paraphrase_with_template(*scpn_, gen_, ex_->s1, ex_->p1, ex_->t2, 4);
  ASSERT_EQ(a.candidates.size(), b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    EXPECT_EQ(a.candidates[i].text, b.candidates[i].text);
    EXPECT_EQ(a.candidates[i].log_prob, b.candidates[i].log_prob);
  }
}

TEST_F(OverfitPipeline, MissingGeneratorWithoutGoldParse) {
  EXPECT_THROW(paraphrase_with_template(*scpn_, static_cast<const Model*>(nullptr), ex_->s1,
                                        ex_->p1, ex_->t2, 2),
               Error);
}

TEST(TrainParseGenerator, UncontrolledIgnoresTemplate) {
  auto ex = SamplePair();
  std::vector<ParaphraseExample> one{ex};
  auto gen = train_parse_generator<float>(one, FastConfig(false), Steps(300));
  auto a = generate_full_parse(*gen, ex.p1, ex.t2, 4);
  auto b = generate_full_parse(*gen, ex.p1, Template::parse("(FRAG(NP))"), 4);
  EXPECT_EQ(a.tree, b.tree);
}

TEST(TrainParseGenerator, SeededRunsAreIdentical) {
  SynthGrammarConfig sc;
  sc.num_pairs = 12;
  auto data = synth_corpus(sc);
  ScpnConfig c = testing_util::tiny_config(8);
  c.batch_size = 4;
  auto a = train_parse_generator<float>(data, c, TrainOptions{2});
  auto b = train_parse_generator<float>(data, c, TrainOptions{2});
  ASSERT_EQ(a->params().size(), b->params().size());
  for (std::size_t i = 0; i < a->params().size(); ++i) {
    EXPECT_EQ(a->params()[i].value, b->params()[i].value);
  }
  EXPECT_EQ(a->kind(), ModelKind::kParseGenerator);
}

TEST(TrainParseGenerator, EmptyDataset) {
  std::vector<ParaphraseExample> none;
  EXPECT_THROW(train_parse_generator<float>(none, FastConfig()), Error);
}

TEST(RestoreCandidate, DropsDanglingContinuation) {
  EXPECT_EQ(restore_candidate({"lo@@", "w", "er@@"}), "low er");
  EXPECT_EQ(restore_candidate({"a", "b"}), "a b");
}

}  // namespace
}  // namespace scpn
