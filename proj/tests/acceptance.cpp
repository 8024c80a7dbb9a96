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


// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "filter_fixture.hpp"
#include "json.hpp"
#include "model_fixtures.hpp"
#include "random_text.hpp"
#include "random_trees.hpp"
#include "scpn/adversarial.hpp"
#include "scpn/filters.hpp"
#include "scpn/parsegen.hpp"
#include "scpn/scpn.hpp"
#include "scpn/subword.hpp"
#include "scpn/synth.hpp"
#include "scpn/syntax.hpp"

namespace scpn {
namespace {

namespace tu = testing_util;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v, int digits = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

void log(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

// ---- 1: template mechanics ----

Outcome template_mechanics() {
  Template t = extract_template(parse_bracketed("(S(NP(PRP))(VP(VBD)(NP(NN)))(.))"));
  bool example = t.serialize() == "(S(NP)(VP)(.))";
  std::mt19937_64 rng(11);
  int invariant = 0;
  for (int i = 0; i < 1000; ++i) {
    ParseTree a = tu::random_tree(rng, 5, 4);
    ParseTree b = tu::mutate_below_level_two(rng, a);
    invariant += template_match(a, b) && extract_template(a) == extract_template(b);
  }
  // Changing a top-level child label must break the match.
  int sensitive = 0;
  int tried = 0;
  for (int i = 0; i < 1000; ++i) {
    ParseTree a = tu::random_tree(rng, 4, 3);
    if (a.children.empty()) continue;
    ParseTree b = a;
    b.children[rng() % b.children.size()].label += "X";
    ++tried;
    sensitive += !template_match(a, b);
  }
  return {example && invariant == 1000 && sensitive == tried,
          "example " + t.serialize() + ", invariant " + std::to_string(invariant) +
              "/1000, top-level edits detected " + std::to_string(sensitive) + "/" +
              std::to_string(tried)};
}

// ---- 2: BPE oracle ----

Outcome bpe_oracle() {
  std::vector<std::string> corpus{"low low lower"};
  BpeModel m = bpe_train(corpus, 2);
  using Merge = BpeModel::Merge;
  bool oracle = m.merges == std::vector<Merge>{{"l", "o"}, {"lo", "w"}} &&
                bpe_apply(m, "lower") == std::vector<std::string>{"low@@", "e@@", "r"};
  std::mt19937_64 rng(21);
  auto train = tu::random_sentences(rng, "abcdefgh", 200);
  BpeModel big = bpe_train(train, 60);
  int ok = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string s = tu::random_sentence(rng, "abcdefgh");
    ok += bpe_restore(bpe_apply(big, s)) == tu::normalize_ws(s);
  }
  return {oracle && ok == 1000, std::string("merge oracle ") + (oracle ? "exact" : "MISMATCH") +
                                    ", round trip " + std::to_string(ok) + "/1000"};
}

// ---- 3: gradients ----

// Extended precision keeps finite-difference round-off well below the
// tolerance even for near-zero gradient entries.
using Wide = long double;

Outcome gradients() {
  double worst = 0.0;
  std::string where;
  for (bool pa : {true, false}) {
    for (bool cp : {true, false}) {
      ScpnConfig c = tu::tiny_config(12);
      c.use_parse_attention = pa;
      c.use_copy = cp;
      c.init_scale = 0.5;
      ScpnModel<Wide> m(ModelKind::kScpn, c, tu::word_vocab(40), tu::control_vocab());
      std::mt19937_64 rng(14);
      EncodedInstance e = m.encode_instance(tu::copy_instance(rng, 40));
      const EncodedInstance* batch[] = {&e};
      std::function<Wide(bool)> loss = [&](bool grad) {
        Graph<Wide> g(grad);
        Var l = m.batch_loss(g, batch);
        if (grad) g.backward(l);
        return g.value(l)(0, 0);
      };
      auto r = net::check_gradients(loss, m.params(), net::GradCheckOptions{});
      if (r.max_relative_error >= worst) {
        worst = r.max_relative_error;
        where = std::string("scpn[pa=") + (pa ? "1" : "0") + ",copy=" + (cp ? "1" : "0") +
                "] " + r.worst_param;
      }
    }
  }
  double scpn_worst = worst;
  double clf_worst = 0.0;
  for (bool pair : {false, true}) {
    std::vector<TaskInstance> data{
        {"the good film", pair ? std::optional<std::string>("a b") : std::nullopt, 1},
        {"a bad film here", pair ? std::optional<std::string>("b") : std::nullopt, 0},
        {"good good", pair ? std::optional<std::string>("c a") : std::nullopt, 2}};
    std::vector<std::vector<std::string>> text;
    for (const auto& t : data) text.push_back(task_tokens(t.text_a));
    ClassifierConfig c;
    c.hidden = 8;
    c.embedding_size = 6;
    c.init_scale = 0.5;
    Classifier<Wide> model(c, build_vocab(text, 1), 3, pair);
    std::vector<const TaskInstance*> batch;
    for (const auto& t : data) batch.push_back(&t);
    std::function<Wide(bool)> loss = [&](bool grad) {
      Graph<Wide> g(grad);
      Var l = model.batch_loss(g, batch);
      if (grad) g.backward(l);
      return g.value(l)(0, 0);
    };
    auto r = net::check_gradients(loss, model.params(), net::GradCheckOptions{});
    clf_worst = std::max(clf_worst, r.max_relative_error);
  }
  return {scpn_worst < 1e-4 && clf_worst < 1e-4,
          "scpn max rel err " + sci(scpn_worst) + " (" + where + "), classifier " +
              sci(clf_worst) + ", limit 1e-4"};
}

// ---- 4: normalization ----

Outcome normalization() {
  double worst = 0.0;
  int steps = 0;
  std::mt19937_64 rng(6);
  for (bool pa : {true, false}) {
    for (bool cp : {true, false}) {
      ScpnConfig c = tu::tiny_config(16);
      c.use_parse_attention = pa;
      c.use_copy = cp;
      c.seed = rng();
      c.init_scale = 0.3;
      ScpnModel<float> m(ModelKind::kScpn, c, tu::word_vocab(30), tu::control_vocab());
      int here = 0;
      while (here < 100) {
        EncodedInstance e = m.encode_instance(tu::copy_instance(rng, 30));
        Graph<float> g(false);
        const EncodedInstance* one[] = {&e};
        auto enc = m.encode(g, one);
        auto state = m.initial_state(g, enc);
        int prev = Vocab::kBos;
        for (int tok : e.target_ext) {
          auto step = m.decode_step(g, state, enc, {prev});
          Matrix<float> d = m.distribution(g, step, enc, static_cast<int>(e.oov.size()));
          double sum = d.cast<double>().sum();
          worst = std::max(worst, std::abs(sum - 1.0));
          if (d.minCoeff() < 0.0f) worst = std::max(worst, 1.0);
          state = step.state;
          // Random teacher tokens keep the steps off the gold path too.
          prev = (rng() % 2) ? tok : static_cast<int>(rng() % m.vocab_size());
          if (prev == Vocab::kPad) prev = Vocab::kUnk;
          if (++here == 100) break;
        }
      }
      steps += here;
    }
  }
  return {worst <= 1e-6, std::to_string(steps) + " steps in 4 configurations (float), max |sum - 1| = " +
                             sci(worst) + ", limit 1e-6"};
}

// ---- 5: beam search oracle ----

using Scored = std::pair<double, std::vector<int>>;

void enumerate(const ScpnModel<double>& m, Graph<double>& g, const EncoderOutputs<double>& enc,
               const DecoderState<double>& state, std::vector<int>& prefix, double logp,
               int max_len, std::vector<Scored>& out) {
  auto step = m.decode_step(g, state, enc, {prefix.back()});
  auto d = m.distribution(g, step, enc, 0);
  for (Index id = 0; id < d.rows(); ++id) {
    if (id == Vocab::kPad || id == Vocab::kBos) continue;
    double lp = logp + std::log(d(id, 0));
    prefix.push_back(static_cast<int>(id));
    if (id == Vocab::kEos || static_cast<int>(prefix.size()) - 1 == max_len) {
      out.emplace_back(lp, prefix);
    } else {
      enumerate(m, g, enc, step.state, prefix, lp, max_len, out);
    }
    prefix.pop_back();
  }
}

Outcome beam_oracle() {
  std::mt19937_64 rng(17);
  int agree = 0;
  double worst = 0.0;
  for (int seed = 1; seed <= 20; ++seed) {
    ScpnConfig c = tu::tiny_config(8);
    c.seed = static_cast<std::uint64_t>(seed);
    c.init_scale = 0.7;
    c.use_copy = seed % 2 == 0;
    ScpnModel<double> m(ModelKind::kScpn, c, tu::word_vocab(2), tu::control_vocab());
    Instance inst{tu::random_words(rng, 2, 2, 4), tu::random_control(rng), {}};
    auto e = m.encode_instance(inst);
    Graph<double> g(false);
    const EncodedInstance* one[] = {&e};
    auto enc = m.encode(g, one);
    std::vector<Scored> all;
    std::vector<int> prefix{Vocab::kBos};
    enumerate(m, g, enc, m.initial_state(g, enc), prefix, 0.0, 4, all);
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    auto hyps = beam_search(m, e, BeamOptions{6 * 6 * 6 * 6, 4, false});
    bool same = hyps.size() == all.size();
    for (std::size_t i = 0; same && i < hyps.size(); ++i) {
      same = hyps[i].tokens == all[i].second;
      worst = std::max(worst, std::abs(hyps[i].log_prob - all[i].first));
    }
    agree += same && worst < 1e-9;
  }
  return {agree == 20, std::to_string(agree) +
                           "/20 models: full beam ranking equals exhaustive enumeration "
                           "(vocab 6, length 4), max log-prob gap " + sci(worst)};
}

// ---- 6: overfit ----

struct OverfitStats {
  double loss = 0.0;
  std::size_t steps = 0;
  double token_accuracy = 0.0;
};

OverfitStats overfit(ModelKind kind, const std::vector<Instance>& data, int hidden) {
  ScpnConfig c;
  c.embedding_size = hidden;
  c.encoder_hidden = hidden;
  c.parse_embedding_size = hidden / 2;
  c.parse_hidden = hidden;
  c.decoder_hidden = 2 * hidden;
  c.learning_rate = 1e-2;
  c.batch_size = 8;
  c.epochs = 500;
  c.seed = 5;
  auto [words, controls] = instance_vocabs(std::span<const Instance>(data));
  ScpnModel<float> m(kind, c, std::move(words), std::move(controls));
  auto encoded = encode_all(m, std::span<const Instance>(data));
  TrainOptions opts;
  opts.max_steps = 2000;
  // Train past the threshold so greedy decoding is stable; the loss and
  // step limits are still checked on the final state.
  opts.stop_below = 0.01;
  auto r = train(m, std::span<const EncodedInstance>(encoded), opts);
  OverfitStats s;
  s.loss = r.epoch_losses.back();
  s.steps = r.steps;
  std::size_t hit = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& e = encoded[i];
    int limit = static_cast<int>(data[i].target.size()) + 5;
    auto hyps = beam_search(m, e, BeamOptions{1, limit, true});
    auto got = hypothesis_tokens(m, e, hyps[0]);
    const auto& want = data[i].target;
    for (std::size_t k = 0; k < want.size(); ++k) hit += k < got.size() && got[k] == want[k];
    total += std::max(want.size(), got.size());
  }
  s.token_accuracy = 100.0 * static_cast<double>(hit) / static_cast<double>(total);
  return s;
}

Outcome overfit_oracle() {
  SynthGrammarConfig sc;
  sc.seed = 31;
  sc.num_pairs = 32;
  sc.keep_fraction = 0.0;
  auto pairs = synth_corpus(sc);
  std::vector<Instance> scpn_data = scpn_instances(pairs, std::nullopt);
  std::vector<Instance> gen_data = parsegen_instances(pairs);
  auto a = overfit(ModelKind::kScpn, scpn_data, 32);
  log("scpn overfit loss " + fmt(a.loss, 4) + " after " + std::to_string(a.steps) + " steps");
  auto b = overfit(ModelKind::kParseGenerator, gen_data, 32);
  log("parsegen overfit loss " + fmt(b.loss, 4) + " after " + std::to_string(b.steps) + " steps");
  bool ok = a.loss < 0.1 && b.loss < 0.1 && a.steps <= 2000 && b.steps <= 2000 &&
            a.token_accuracy >= 95.0 && b.token_accuracy >= 95.0;
  return {ok, "scpn loss " + fmt(a.loss, 4) + " in " + std::to_string(a.steps) + " steps, greedy " +
                  fmt(a.token_accuracy, 1) + "% tokens; parsegen loss " + fmt(b.loss, 4) + " in " +
                  std::to_string(b.steps) + " steps, greedy " + fmt(b.token_accuracy, 1) +
                  "% tokens (limits < 0.1, <= 2000, >= 95%)"};
}

// ---- 10: filter thresholds ----

Outcome filter_thresholds() {
  tu::FilterFixture fixture;
  fixture.write();
  auto scorer = EmbeddingScorer::from_file(fixture.path());
  auto cands = fixture.candidates();
  auto kept = postprocess(cands, FilterConfig{}, scorer);
  std::size_t k = 0;
  int agree = 0;
  for (const auto& row : tu::FilterFixture::oracle()) {
    bool survived = k < kept.size() && kept[k].candidate == row.candidate;
    bool metrics = true;
    if (survived) {
      metrics = std::abs(kept[k].overlap - row.overlap) < 1e-9 &&
                std::abs(kept[k].similarity - row.similarity) < 1e-9;
      ++k;
    }
    agree += survived == row.keep && metrics;
  }
  bool all_consumed = k == kept.size();
  std::vector<double> overlaps{0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 1.0};
  std::vector<double> sims{-1.0, -0.5, 0.0, 0.5, 0.7, 0.8, 0.95, 1.0};
  auto survivors = [&](double o, double s) {
    std::set<std::string> out;
    for (const auto& c : postprocess(cands, FilterConfig{.min_ngram_overlap = o, .min_similarity = s}, scorer)) out.insert(c.candidate);
    return out;
  };
  int violations = 0;
  for (std::size_t i = 0; i < overlaps.size(); ++i) {
    for (std::size_t j = 0; j < sims.size(); ++j) {
      auto here = survivors(overlaps[i], sims[j]);
      auto subset = [&](const std::set<std::string>& s) {
        return std::includes(here.begin(), here.end(), s.begin(), s.end());
      };
      if (i + 1 < overlaps.size() && !subset(survivors(overlaps[i + 1], sims[j]))) ++violations;
      if (j + 1 < sims.size() && !subset(survivors(overlaps[i], sims[j + 1]))) ++violations;
    }
  }
  fixture.remove();
  return {agree == 20 && all_consumed && violations == 0,
          std::to_string(agree) + "/20 candidates match the hand oracle (" +
              std::to_string(kept.size()) + " kept), monotonicity violations " +
              std::to_string(violations) + " over a 9x8 grid"};
}

// ---- 11: checkpoint round trip ----

Outcome checkpoint_round_trip() {
  auto dir = (fs::temp_directory_path() / ("scpn_accept_ckpt_" + std::to_string(::getpid())))
                 .string();
  ScpnConfig c = tu::tiny_config(16);
  c.seed = 21;
  ScpnModel<float> m(ModelKind::kScpn, c, tu::word_vocab(20), tu::control_vocab());
  std::vector<std::string> corpus{"w1 w2 w3", "w2 w3 w11"};
  m.bpe() = bpe_train(corpus, 4);
  save_checkpoint(m, dir);
  auto loaded = load_checkpoint<float>(dir);
  std::mt19937_64 rng(22);
  bool same = true;
  for (int i = 0; i < 10; ++i) {
    auto e = m.encode_instance(tu::copy_instance(rng, 20));
    same = same && m.sequence_nll(e) == loaded->sequence_nll(e);
    Graph<float> g1(false), g2(false);
    const EncodedInstance* one[] = {&e};
    auto enc1 = m.encode(g1, one);
    auto enc2 = loaded->encode(g2, one);
    auto s1 = m.decode_step(g1, m.initial_state(g1, enc1), enc1, {Vocab::kBos});
    auto s2 = loaded->decode_step(g2, loaded->initial_state(g2, enc2), enc2, {Vocab::kBos});
    same = same && m.distribution(g1, s1, enc1, static_cast<int>(e.oov.size())) ==
                       loaded->distribution(g2, s2, enc2, static_cast<int>(e.oov.size()));
    auto a = beam_search(m, e, BeamOptions{4, 8, true});
    auto b = beam_search(*loaded, e, BeamOptions{4, 8, true});
    same = same && a.size() == b.size();
    for (std::size_t k = 0; same && k < a.size(); ++k) {
      same = a[k].tokens == b[k].tokens && a[k].log_prob == b[k].log_prob;
    }
  }
  auto manifest = nlohmann::json::parse(io::read_file(dir + "/manifest.json"));
  std::size_t offset = 0;
  bool offsets = true;
  for (const auto& p : manifest["params"]) {
    offsets = offsets && p["offset"].get<std::size_t>() == offset;
    offset += 4 * p["length"].get<std::size_t>();
  }
  offsets = offsets && fs::file_size(dir + "/params.bin") == offset;
  // A truncated parameter file must be rejected.
  fs::resize_file(dir + "/params.bin", offset - 4);
  bool rejected = false;
  try {
    load_checkpoint<float>(dir);
  } catch (const Error& e) {
    rejected = e.code() == ErrorCode::kBadCheckpoint;
  }
  fs::remove_all(dir);
  return {same && offsets && rejected,
          std::string("forward outputs ") + (same ? "bit-identical" : "DIFFER") +
              ", manifest offsets " + (offsets ? "contiguous and match params.bin" : "WRONG") +
              ", truncation " + (rejected ? "rejected" : "NOT rejected")};
}


// ---- 7, 8, 9: shared synthetic run ----

// One 20k-pair corpus, one parse generator and three SCPN variants, trained
// on first use and shared by the end-to-end criteria.
struct ControlRun {
  static constexpr std::size_t kTrain = 20000;
  static constexpr std::size_t kTest = 1000;
  static constexpr int kBeam = 5;

  std::vector<ParaphraseExample> train;
  std::vector<ParaphraseExample> test;
  ScpnConfig config;
  ToyParser parser;
  std::unique_ptr<ScpnModel<float>> generator;
  std::map<std::string, std::unique_ptr<ScpnModel<float>>> models;
  std::map<std::string, TemplateMatchReport> reports;

  ControlRun() {
    SynthGrammarConfig sc;
    sc.seed = 11;
    sc.num_pairs = kTrain + kTest;
    auto all = synth_corpus(sc);
    train.assign(all.begin(), all.begin() + kTrain);
    test.assign(all.begin() + kTrain, all.end());
    const int h = 64;
    config.embedding_size = h;
    config.encoder_hidden = h;
    config.parse_embedding_size = h / 2;
    config.parse_hidden = h;
    config.decoder_hidden = 2 * h;
    config.epochs = 4;
    config.learning_rate = 2e-3;
    config.batch_size = 32;
    config.seed = 3;
    config.beam_size = kBeam;
  }

  static TrainOptions progress(const std::string& name) {
    TrainOptions opts;
    opts.on_epoch = [name](const TrainLogRecord& r) {
      log(name + " epoch " + std::to_string(r.epoch) + " loss " + fmt(r.loss, 4));
    };
    return opts;
  }

  SentenceParser sentence_parser() const {
    return [this](const std::string& s) { return parser.parse(normalize_sentence(s)); };
  }

  const ScpnModel<float>& parse_generator() {
    if (!generator) generator = train_parse_generator<float>(train, config, progress("parsegen"));
    return *generator;
  }

  const ScpnModel<float>& model(const std::string& name) {
    auto& m = models[name];
    if (!m) {
      ScpnConfig c = config;
      c.use_parse_attention = name == "full";
      c.use_copy = name != "nocopy";
      m = train_scpn<float>(train, std::nullopt, c, progress(name));
    }
    return *m;
  }

  // The generated-parse condition is evaluated for the full model only.
  const TemplateMatchReport& report(const std::string& name) {
    auto it = reports.find(name);
    if (it != reports.end()) return it->second;
    const ScpnModel<float>* gen = name == "full" ? &parse_generator() : nullptr;
    auto r = evaluate_template_match(model(name), gen, test, sentence_parser(), kBeam);
    log(name + ": gold " + fmt(r.gold_parse, 1) + ", same as input " +
        fmt(r.same_as_input, 1) + ", unparsed " + std::to_string(r.unparsed_outputs));
    return reports.emplace(name, r).first->second;
  }
};

ControlRun& control_run() {
  static ControlRun run;
  return run;
}

Outcome control_end_to_end() {
  const auto& r = control_run().report("full");
  bool ok = r.gold_parse >= 80.0 && r.generated_parse < r.gold_parse &&
            r.generated_parse >= 60.0 && r.generator_conformity >= 99.0;
  return {ok, "gold parse " + fmt(r.gold_parse, 1) + "%, generated parse " +
                  fmt(r.generated_parse, 1) + "%, generator conformity " +
                  fmt(r.generator_conformity, 1) + "% on " + std::to_string(r.examples) +
                  " held-out pairs (need >= 80, < gold and >= 60, >= 99)"};
}

Outcome ablation_direction() {
  auto& run = control_run();
  double full = run.report("full").same_as_input;
  double noz = run.report("noz").same_as_input;
  double nocopy = run.report("nocopy").same_as_input;
  return {noz > full && nocopy >= noz,
          "same template as input: full " + fmt(full, 1) + "%, no z_t " + fmt(noz, 1) +
              "%, no copy " + fmt(nocopy, 1) + "% (need no-z_t > full, no-copy >= no-z_t)"};
}

std::vector<TaskInstance> subject_task(std::uint64_t seed, std::size_t n) {
  std::vector<TaskInstance> out;
  for (auto& x : synth_subject_task(seed, n)) out.push_back({x.text, std::nullopt, x.label});
  return out;
}

Outcome adversarial_direction() {
  auto& run = control_run();
  TemplateHistogram histogram;
  for (const auto& ex : run.train) histogram.add(ex.t2);
  auto ranked = top_templates(histogram, 20);
  auto templates = sample_templates(ranked, 10, 20, 5);
  auto train = subject_task(101, 2000);
  auto dev = subject_task(102, 500);
  auto test = subject_task(103, 1000);
  PipelineSourceOptions po;
  po.beam_size = ControlRun::kBeam;
  auto source = pipeline_source(run.model("full"), run.parse_generator(), run.sentence_parser(), po);
  ClassifierConfig cc;
  cc.hidden = 32;
  cc.embedding_size = 32;
  cc.epochs = 5;
  cc.learning_rate = 2e-3;
  cc.seed = 7;
  auto rep = robustness_report<float>(train, dev, test, source, templates, cc);
  std::istringstream table(rep.table());
  for (std::string line; std::getline(table, line);) log(line);
  double drop = rep.before.test_accuracy - rep.after.test_accuracy;
  bool ok = rep.after.dev_broken < rep.before.dev_broken && drop <= 2.0;
  return {ok, "dev broken " + fmt(rep.before.dev_broken, 1) + "% -> " +
                  fmt(rep.after.dev_broken, 1) + "%, test accuracy " +
                  fmt(rep.before.test_accuracy, 1) + "% -> " + fmt(rep.after.test_accuracy, 1) +
                  "% (" + std::to_string(rep.train_size) + " -> " +
                  std::to_string(rep.augmented_size) + " training examples; need strict decrease, "
                  "drop <= 2 points)"};
}

}  // namespace
}  // namespace scpn

int main(int argc, char** argv) {
  using namespace scpn;
  // Criteria 7-9 share models; budgets count the work done inside each one,
  // so a later criterion reuses what an earlier one trained.
  std::vector<Criterion> all{
      {1, "template mechanics", 5, template_mechanics},
      {2, "BPE oracle", 5, bpe_oracle},
      {3, "gradient correctness", 60, gradients},
      {4, "distribution normalization", 10, normalization},
      {5, "beam-search oracle", 60, beam_oracle},
      {6, "overfit oracle", 600, overfit_oracle},
      {7, "control end-to-end", 7200, control_end_to_end},
      {8, "ablation direction", 7200, ablation_direction},
      {9, "adversarial direction", 1800, adversarial_direction},
      {10, "filter thresholds", 5, filter_thresholds},
      {11, "checkpoint round trip", 10, checkpoint_round_trip},
  };
  std::set<int> selected;
  std::set<int> allowed;  // criteria whose failure does not fail the exit code
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--allow-fail" && i + 1 < argc) {
      allowed.insert(std::stoi(argv[++i]));
    } else {
      selected.insert(std::stoi(a));
    }
  }
  int failed = 0;
  int tolerated = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    bool in_time = secs < c.budget_seconds;
    bool pass = o.pass && in_time;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name
              << "): " << o.detail << "; " << fmt(secs, 1) << " s (budget "
              << fmt(c.budget_seconds, 0) << " s" << (in_time ? "" : ", EXCEEDED") << ")"
              << std::endl;
    if (!pass) (allowed.count(c.id) ? tolerated : failed) += 1;
  }
  if (tolerated > 0) {
    std::cout << tolerated << " failing criterion(s) tolerated by --allow-fail" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
