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

// Template -> full parse generation and the two-stage paraphrase pipeline.

#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scpn/corpus.hpp"
#include "scpn/scpn.hpp"
#include "scpn/subword.hpp"
#include "scpn/syntax.hpp"

namespace scpn {

// Parse-generator view of a pair: linearize(p1), tokens(t2) -> linearize(p2).
inline Instance parsegen_instance(const ParaphraseExample& ex) {
  return {linearize(ex.p1), ex.t2.tokens(), linearize(ex.p2)};
}

// Tokenized sentence as the SCPN encoder sees it.
inline std::vector<std::string> sentence_tokens(const std::optional<BpeModel>& bpe,
                                                std::string_view sentence) {
  std::string norm = normalize_sentence(sentence);
  return bpe ? bpe_apply(*bpe, norm) : split_whitespace(norm);
}

inline std::vector<Instance> scpn_instances(std::span<const ParaphraseExample> examples,
                                            const std::optional<BpeModel>& bpe) {
  std::vector<Instance> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({sentence_tokens(bpe, ex.s1), linearize(ex.p2), sentence_tokens(bpe, ex.s2)});
  }
  return out;
}

inline std::vector<Instance> parsegen_instances(std::span<const ParaphraseExample> examples) {
  std::vector<Instance> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(parsegen_instance(ex));
  return out;
}

// Word vocabulary over sources and targets, control vocabulary over controls.
inline std::pair<Vocab, Vocab> instance_vocabs(std::span<const Instance> data,
                                               std::size_t min_freq = 1) {
  std::vector<std::vector<std::string>> text;
  std::vector<std::vector<std::string>> controls;
  for (const auto& inst : data) {
    text.push_back(inst.source);
    text.push_back(inst.target);
    controls.push_back(inst.control);
  }
  return {build_vocab(text, min_freq), build_vocab(controls, 1)};
}

template <class T>
std::vector<EncodedInstance> encode_all(const ScpnModel<T>& model,
                                        std::span<const Instance> data) {
  std::vector<EncodedInstance> out;
  out.reserve(data.size());
  for (const auto& inst : data) out.push_back(model.encode_instance(inst));
  return out;
}

// Builds vocabularies from `data`, then trains a fresh model of `kind`.
template <class T>
std::unique_ptr<ScpnModel<T>> train_model(ModelKind kind, std::span<const Instance> data,
                                          const ScpnConfig& config,
                                          const TrainOptions& opts = {},
                                          std::size_t min_freq = 1) {
  if (data.empty()) throw Error(ErrorCode::kEmptyInput, "empty training set");
  auto [words, controls] = instance_vocabs(data, min_freq);
  auto model = std::make_unique<ScpnModel<T>>(kind, config, std::move(words),
                                              std::move(controls));
  auto encoded = encode_all(*model, data);
  train(*model, std::span<const EncodedInstance>(encoded), opts);
  return model;
}

// Same architecture and training contract as SCPN, with p1 as the copy
// source and t2 in the control pathway.
template <class T>
std::unique_ptr<ScpnModel<T>> train_parse_generator(
    std::span<const ParaphraseExample> examples, const ScpnConfig& config,
    const TrainOptions& opts = {}) {
  auto data = parsegen_instances(examples);
  return train_model<T>(ModelKind::kParseGenerator, data, config, opts);
}

template <class T>
std::unique_ptr<ScpnModel<T>> train_scpn(std::span<const ParaphraseExample> examples,
                                         const std::optional<BpeModel>& bpe,
                                         const ScpnConfig& config,
                                         const TrainOptions& opts = {},
                                         std::size_t min_freq = 1) {
  auto data = scpn_instances(examples, bpe);
  auto model = train_model<T>(ModelKind::kScpn, data, config, opts, min_freq);
  model->bpe() = bpe;
  return model;
}

// Index of the first ranked token sequence that forms one balanced tree.
inline std::optional<std::size_t> first_well_formed(
    std::span<const std::vector<std::string>> ranked) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (tree_from_tokens(ranked[i])) return i;
  }
  return std::nullopt;
}

struct GeneratedParse {
  ParseTree tree;
  bool conforms = false;  // extract_template(tree) == requested template
  std::size_t rank = 0;   // beam position the tree came from
};

template <class T>
GeneratedParse generate_full_parse(const ScpnModel<T>& generator, const ParseTree& p1,
                                   const Template& t2, int beam_size) {
  Instance inst{linearize(p1), t2.tokens(), {}};
  EncodedInstance e = generator.encode_instance(inst);
  const auto& cfg = generator.config();
  auto hyps = beam_search(generator, e,
                          BeamOptions{beam_size, cfg.max_parse_length, cfg.length_normalize});
  std::vector<std::vector<std::string>> ranked;
  for (const auto& h : hyps) {
    if (h.finished) ranked.push_back(hypothesis_tokens(generator, e, h));
  }
  auto pick = first_well_formed(ranked);
  if (!pick) {
    throw Error(ErrorCode::kNoWellFormedHypothesis,
                "no beam entry is a balanced tree for template " + t2.serialize());
  }
  GeneratedParse out;
  out.tree = *tree_from_tokens(ranked[*pick]);
  out.conforms = extract_template(out.tree) == t2;
  out.rank = *pick;
  return out;
}

struct Candidate {
  std::string text;
  double score = 0.0;
  double log_prob = 0.0;
};

struct PipelineResult {
  ParseTree target_parse;
  bool conforms = true;  // always true for the gold-parse bypass
  std::vector<Candidate> candidates;
};

// Rebuilds words from BPE pieces; a dangling continuation on the last piece
// is dropped.
inline std::string restore_candidate(std::vector<std::string> tokens) {
  if (!tokens.empty() && has_continuation(tokens.back())) {
    tokens.back().resize(tokens.back().size() - kContinuationMarker.size());
  }
  return bpe_restore(tokens);
}

// Decodes paraphrases of `s1` that follow `target`.
template <class T>
std::vector<Candidate> paraphrase_with_parse(const ScpnModel<T>& scpn, std::string_view s1,
                                             const ParseTree& target, int beam_size) {
  Instance inst{sentence_tokens(scpn.bpe(), s1), linearize(target), {}};
  EncodedInstance e = scpn.encode_instance(inst);
  const auto& cfg = scpn.config();
  auto hyps = beam_search(scpn, e,
                          BeamOptions{beam_size, cfg.max_decode_length, cfg.length_normalize});
  std::vector<Candidate> out;
  for (const auto& h : hyps) {
    auto toks = hypothesis_tokens(scpn, e, h);
    if (toks.empty()) continue;
    out.push_back({restore_candidate(std::move(toks)), h.score, h.log_prob});
  }
  return out;
}

// template -> parse -> paraphrase. With `gold_parse`, the generator is
// bypassed and the gold target parse is fed to SCPN directly.
template <class T>
PipelineResult paraphrase_with_template(const ScpnModel<T>& scpn,
                                        const ScpnModel<T>* generator, std::string_view s1,
                                        const ParseTree& p1, const Template& t2,
                                        int beam_size,
                                        const std::optional<ParseTree>& gold_parse = {}) {
  PipelineResult out;
  if (gold_parse) {
    out.target_parse = strip_leaves(*gold_parse);
  } else {
    if (generator == nullptr) {
      throw Error(ErrorCode::kInvalidConfig, "no parse generator and no gold parse");
    }
    auto gen = generate_full_parse(*generator, strip_leaves(p1), t2, beam_size);
    out.target_parse = std::move(gen.tree);
    out.conforms = gen.conforms;
  }
  out.candidates = paraphrase_with_parse(scpn, s1, out.target_parse, beam_size);
  return out;
}

// ---- exact template match evaluation ----

using SentenceParser = std::function<std::optional<ParseTree>(const std::string&)>;

struct TemplateMatchReport {
  std::size_t examples = 0;
  // Percent of top outputs whose parse template equals t2.
  double gold_parse = 0.0;       // SCPN fed the gold p2
  double generated_parse = 0.0;  // SCPN fed the generator's parse (nan if skipped)
  // Percent of generated parses whose template equals t2.
  double generator_conformity = 0.0;
  // Percent of gold-condition outputs whose template equals the input's
  // template p1; high values mean the control is being ignored.
  double same_as_input = 0.0;
  std::size_t unparsed_outputs = 0;
  std::size_t generator_failures = 0;
};

// Top-ranked output per example, parsed with `parser`; outputs the parser
// cannot analyse count as mismatches. `generator` may be null to evaluate
// the gold-parse condition only.
template <class T>
TemplateMatchReport evaluate_template_match(const ScpnModel<T>& scpn,
                                            const ScpnModel<T>* generator,
                                            std::span<const ParaphraseExample> examples,
                                            const SentenceParser& parser, int beam_size) {
  if (examples.empty()) throw Error(ErrorCode::kEmptyInput, "no evaluation examples");
  TemplateMatchReport r;
  r.examples = examples.size();
  std::vector<std::optional<ParseTree>> gold_out, gen_out;
  std::vector<ParseTree> targets, inputs;
  std::size_t conform = 0;
  auto top_parse = [&](const std::vector<Candidate>& cands) -> std::optional<ParseTree> {
    if (cands.empty()) return std::nullopt;
    auto t = parser(cands[0].text);
    if (!t) ++r.unparsed_outputs;
    return t;
  };
  for (const auto& ex : examples) {
    targets.push_back(ex.p2);
    inputs.push_back(ex.p1);
    gold_out.push_back(top_parse(paraphrase_with_parse(scpn, ex.s1, ex.p2, beam_size)));
    if (generator) {
      try {
        auto gen = generate_full_parse(*generator, ex.p1, ex.t2, beam_size);
        conform += gen.conforms;
        gen_out.push_back(top_parse(paraphrase_with_parse(scpn, ex.s1, gen.tree, beam_size)));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoWellFormedHypothesis) throw;
        ++r.generator_failures;
        gen_out.push_back(std::nullopt);
      }
    }
  }
  const auto policy = MissingParsePolicy::kCountAsMismatch;
  r.gold_parse = same_template_rate(gold_out, targets, policy);
  r.same_as_input = same_template_rate(gold_out, inputs, policy);
  if (generator) {
    r.generated_parse = same_template_rate(gen_out, targets, policy);
    r.generator_conformity =
        100.0 * static_cast<double>(conform) / static_cast<double>(examples.size());
  } else {
    r.generated_parse = std::numeric_limits<double>::quiet_NaN();
    r.generator_conformity = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace scpn
