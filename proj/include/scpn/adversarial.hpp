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

// Downstream classifier, broken-example evaluation and augmentation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "scpn/corpus.hpp"
#include "scpn/error.hpp"
#include "scpn/filters.hpp"
#include "scpn/io.hpp"
#include "scpn/net.hpp"
#include "scpn/parsegen.hpp"
#include "scpn/scpn.hpp"
#include "scpn/syntax.hpp"

namespace scpn {

struct TaskInstance {
  std::string text_a;
  std::optional<std::string> text_b;
  int label = 0;

  bool operator==(const TaskInstance&) const = default;
};

// label<TAB>text_a[<TAB>text_b]
inline std::vector<TaskInstance> load_task_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::vector<TaskInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2 && cols.size() != 3) {
      throw Error(ErrorCode::kBadColumnCount, "expected 2 or 3 columns in " + path,
                  std::nullopt, lineno);
    }
    TaskInstance t;
    try {
      std::size_t used = 0;
      t.label = std::stoi(cols[0], &used);
      if (used != cols[0].size() || t.label < 0) throw std::invalid_argument("label");
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidData, "bad label '" + cols[0] + "' in " + path,
                  std::nullopt, lineno);
    }
    t.text_a = cols[1];
    if (split_whitespace(t.text_a).empty()) {
      throw Error(ErrorCode::kInvalidData, "empty text_a in " + path, std::nullopt, lineno);
    }
    if (cols.size() == 3) t.text_b = cols[2];
    out.push_back(std::move(t));
  }
  return out;
}

inline void save_task_tsv(std::span<const TaskInstance> data, const std::string& path) {
  io::atomic_write(path, [&](std::ostream& out) {
    for (const auto& t : data) {
      out << t.label << '\t' << t.text_a;
      if (t.text_b) out << '\t' << *t.text_b;
      out << '\n';
    }
  });
}

struct ClassifierConfig {
  int hidden = 300;
  int embedding_size = 64;
  std::optional<std::string> embedding_path;
  std::uint64_t seed = 1;
  double init_scale = 0.08;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  int batch_size = 32;
  int epochs = 10;
  std::size_t min_freq = 1;

  void validate() const {
    if (hidden < 1 || embedding_size < 1 || batch_size < 1 || epochs < 0) {
      throw Error(ErrorCode::kInvalidConfig, "classifier sizes must be >= 1");
    }
    if (learning_rate < 0 || clip_norm < 0 || init_scale <= 0) {
      throw Error(ErrorCode::kInvalidConfig, "negative optimizer setting");
    }
  }
};

inline nlohmann::json to_json(const ClassifierConfig& c) {
  nlohmann::json j{{"hidden", c.hidden},
                   {"embedding_size", c.embedding_size},
                   {"seed", c.seed},
                   {"init_scale", c.init_scale},
                   {"learning_rate", c.learning_rate},
                   {"clip_norm", c.clip_norm},
                   {"batch_size", c.batch_size},
                   {"epochs", c.epochs},
                   {"min_freq", c.min_freq}};
  j["embedding_path"] = c.embedding_path ? nlohmann::json(*c.embedding_path) : nullptr;
  return j;
}

inline ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
  ClassifierConfig c;
  c.hidden = j.at("hidden").get<int>();
  c.embedding_size = j.at("embedding_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.init_scale = j.at("init_scale").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.min_freq = j.at("min_freq").get<std::size_t>();
  if (!j.at("embedding_path").is_null()) c.embedding_path = j.at("embedding_path");
  c.validate();
  return c;
}

inline std::vector<std::string> task_tokens(std::string_view text) {
  return split_whitespace(normalize_sentence(text));
}

// BiLSTM over word embeddings; a sentence is [fwd_last; bwd_first]. Pair
// tasks concatenate both sentence vectors before the linear softmax head.
template <class T>
class Classifier {
 public:
  Classifier(ClassifierConfig config, Vocab vocab, int num_classes, bool pair)
      : config_(std::move(config)), vocab_(std::move(vocab)), classes_(num_classes),
        pair_(pair) {
    config_.validate();
    if (num_classes < 2) throw Error(ErrorCode::kDegenerateLabels, "need >= 2 classes");
    const Index e = config_.embedding_size;
    const Index h = config_.hidden;
    emb_ = &params_.add("embed.words", e, vocab_.size());
    fwd_ = net::LstmCellWeights<T>::add_to(params_, "encoder.fwd", e, h);
    bwd_ = net::LstmCellWeights<T>::add_to(params_, "encoder.bwd", e, h);
    out_w_ = &params_.add("output.w", num_classes, (pair ? 4 : 2) * h);
    out_b_ = &params_.add("output.b", num_classes, 1);
    std::mt19937_64 rng(config_.seed);
    params_.init_uniform(rng, config_.init_scale);
    fwd_.init_forget_bias();
    bwd_.init_forget_bias();
  }

  Classifier(const Classifier&) = delete;
  Classifier& operator=(const Classifier&) = delete;

  const ClassifierConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  int num_classes() const { return classes_; }
  bool pair() const { return pair_; }
  net::ParamStore<T>& params() { return params_; }
  const net::ParamStore<T>& params() const { return params_; }

  // Copies vectors for known words from a "token v1 ... vd" file.
  std::size_t load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
    std::string line;
    std::size_t loaded = 0;
    while (std::getline(in, line)) {
      auto parts = split_whitespace(line);
      if (parts.size() != static_cast<std::size_t>(config_.embedding_size) + 1) continue;
      int id = vocab_.id(parts[0]);
      if (id == Vocab::kUnk && parts[0] != "<unk>") continue;
      try {
        for (int i = 0; i < config_.embedding_size; ++i) {
          emb_->value(i, id) =
              static_cast<T>(std::stod(parts[static_cast<std::size_t>(i) + 1]));
        }
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidData, "bad vector for '" + parts[0] + "' in " + path);
      }
      ++loaded;
    }
    return loaded;
  }

  // [C x B] unnormalized scores.
  Var logits(Graph<T>& g, std::span<const TaskInstance* const> batch) const {
    if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "empty batch");
    std::vector<std::vector<int>> a, b;
    for (const auto* t : batch) {
      a.push_back(vocab_.encode(task_tokens(t->text_a)));
      if (pair_) {
        if (!t->text_b) throw Error(ErrorCode::kInvalidData, "pair task needs text_b");
        b.push_back(vocab_.encode(task_tokens(*t->text_b)));
      }
    }
    Var rep = encode(g, a);
    if (pair_) rep = g.concat_rows({rep, encode(g, b)});
    return g.add_bias(g.matmul(g.param(*out_w_), rep), g.param(*out_b_));
  }

  // Mean negative log-likelihood of the labels.
  Var batch_loss(Graph<T>& g, std::span<const TaskInstance* const> batch) const {
    Var p = g.softmax_cols(logits(g, batch));
    std::vector<int> labels;
    for (const auto* t : batch) {
      if (t->label < 0 || t->label >= classes_) {
        throw Error(ErrorCode::kInvalidData, "label outside class range");
      }
      labels.push_back(t->label);
    }
    Matrix<T> w = Matrix<T>::Constant(1, static_cast<Index>(batch.size()),
                                      T(1) / static_cast<T>(batch.size()));
    return g.neg_log_sum(g.pick(p, labels), w);
  }

  std::vector<int> predict(std::span<const TaskInstance> data) const {
    std::vector<int> out;
    const std::size_t bs = static_cast<std::size_t>(config_.batch_size);
    for (std::size_t i = 0; i < data.size(); i += bs) {
      std::vector<const TaskInstance*> batch;
      for (std::size_t k = i; k < std::min(data.size(), i + bs); ++k) batch.push_back(&data[k]);
      Graph<T> g(false);
      const auto& z = g.value(logits(g, batch));
      for (Index j = 0; j < z.cols(); ++j) {
        Index best;
        z.col(j).maxCoeff(&best);
        out.push_back(static_cast<int>(best));
      }
    }
    return out;
  }

  int predict(const TaskInstance& t) const { return predict(std::span(&t, 1))[0]; }

  // Percent correct.
  double accuracy(std::span<const TaskInstance> data) const {
    if (data.empty()) throw Error(ErrorCode::kEmptyInput, "empty evaluation set");
    auto pred = predict(data);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) hits += pred[i] == data[i].label;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(data.size());
  }

 private:
  Var encode(Graph<T>& g, const std::vector<std::vector<int>>& seqs) const {
    const Index b = static_cast<Index>(seqs.size());
    std::size_t len = 0;
    for (const auto& s : seqs) {
      if (s.empty()) throw Error(ErrorCode::kEmptyInput, "empty sentence");
      len = std::max(len, s.size());
    }
    Matrix<T> mask = Matrix<T>::Zero(static_cast<Index>(len), b);
    std::vector<std::vector<int>> ids(len, std::vector<int>(static_cast<std::size_t>(b),
                                                            Vocab::kPad));
    for (Index j = 0; j < b; ++j) {
      const auto& s = seqs[static_cast<std::size_t>(j)];
      for (std::size_t t = 0; t < s.size(); ++t) {
        mask(static_cast<Index>(t), j) = T(1);
        ids[t][static_cast<std::size_t>(j)] = s[t];
      }
    }
    Var zero = g.constant(Matrix<T>::Zero(config_.hidden, b));
    std::vector<Var> emb;
    for (std::size_t t = 0; t < len; ++t) emb.push_back(g.lookup(*emb_, ids[t]));
    net::LstmState<T> s{zero, zero};
    for (std::size_t t = 0; t < len; ++t) {
      s = net::masked_lstm_step(g, fwd_, emb[t], s, mask.row(static_cast<Index>(t)));
    }
    Var fwd_last = s.h;
    s = {zero, zero};
    for (std::size_t t = len; t-- > 0;) {
      s = net::masked_lstm_step(g, bwd_, emb[t], s, mask.row(static_cast<Index>(t)));
    }
    return g.concat_rows({fwd_last, s.h});
  }

  ClassifierConfig config_;
  Vocab vocab_;
  int classes_;
  bool pair_;
  net::ParamStore<T> params_;
  net::Param<T>* emb_ = nullptr;
  net::LstmCellWeights<T> fwd_;
  net::LstmCellWeights<T> bwd_;
  net::Param<T>* out_w_ = nullptr;
  net::Param<T>* out_b_ = nullptr;
};

struct ClassifierTrainLog {
  std::size_t epoch = 0;
  double loss = 0.0;
};

template <class T>
std::unique_ptr<Classifier<T>> train_classifier(
    std::span<const TaskInstance> train, const ClassifierConfig& config,
    const std::function<void(const ClassifierTrainLog&)>& on_epoch = {}) {
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "empty training set");
  std::set<int> labels;
  bool pair = train[0].text_b.has_value();
  std::vector<std::vector<std::string>> text;
  for (const auto& t : train) {
    labels.insert(t.label);
    if (t.text_b.has_value() != pair) {
      throw Error(ErrorCode::kInvalidData, "mixed single-sentence and pair instances");
    }
    text.push_back(task_tokens(t.text_a));
    if (t.text_b) text.push_back(task_tokens(*t.text_b));
  }
  if (labels.size() < 2) {
    throw Error(ErrorCode::kDegenerateLabels, "training labels have a single class");
  }
  auto model = std::make_unique<Classifier<T>>(config, build_vocab(text, config.min_freq),
                                               *labels.rbegin() + 1, pair);
  if (config.embedding_path) model->load_embeddings(*config.embedding_path);

  net::Adam<T> adam(net::AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.clip_norm});
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t i = 0; i < order.size(); i += bs) {
      std::vector<const TaskInstance*> batch;
      for (std::size_t k = i; k < std::min(order.size(), i + bs); ++k) {
        batch.push_back(&train[order[k]]);
      }
      model->params().zero_grad();
      Graph<T> g(true);
      Var loss = model->batch_loss(g, batch);
      double lv = static_cast<double>(g.value(loss)(0, 0));
      if (!std::isfinite(lv)) throw Error(ErrorCode::kDivergedLoss, "non-finite loss");
      g.backward(loss);
      adam.step(model->params());
      total += lv * static_cast<double>(batch.size());
    }
    if (on_epoch) {
      on_epoch({static_cast<std::size_t>(epoch), total / static_cast<double>(train.size())});
    }
  }
  return model;
}

template <class T>
void save_classifier(const Classifier<T>& model, const std::string& dir) {
  io::atomic_write_dir(dir, [&](const std::filesystem::path& tmp) {
    nlohmann::json table = write_params(model.params(), tmp / "params.bin");
    model.vocab().save((tmp / "vocab.txt").string());
    nlohmann::json manifest{{"format_version", kCheckpointFormatVersion},
                            {"kind", "classifier"},
                            {"config", to_json(model.config())},
                            {"num_classes", model.num_classes()},
                            {"pair", model.pair()},
                            {"vocab", "vocab.txt"},
                            {"params_file", "params.bin"},
                            {"params", table}};
    std::ofstream(tmp / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
  });
}

template <class T>
std::unique_ptr<Classifier<T>> load_classifier(const std::string& dir) {
  const std::filesystem::path root(dir);
  nlohmann::json manifest = read_manifest(root);
  try {
    if (manifest.at("format_version").get<int>() != kCheckpointFormatVersion ||
        manifest.at("kind").get<std::string>() != "classifier") {
      throw Error(ErrorCode::kBadCheckpoint, dir + ": not a classifier checkpoint");
    }
    auto model = std::make_unique<Classifier<T>>(
        classifier_config_from_json(manifest.at("config")),
        Vocab::load((root / manifest.at("vocab").get<std::string>()).string()),
        manifest.at("num_classes").get<int>(), manifest.at("pair").get<bool>());
    read_params(model->params(), manifest.at("params"),
                io::read_file((root / "params.bin").string()), dir);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadCheckpoint, dir + ": manifest: " + e.what());
  }
}

// ---- paraphrase sources ----

// Filtered paraphrases of one sentence under one template, best first.
using ParaphraseSource =
    std::function<std::vector<std::string>(const std::string& sentence, const Template& t)>;

// Seeded draw of `n` distinct templates from the first `pool` of `ranked`.
inline std::vector<Template> sample_templates(std::span<const Template> ranked, std::size_t n,
                                              std::size_t pool, std::uint64_t seed) {
  std::vector<Template> candidates(ranked.begin(),
                                   ranked.begin() + static_cast<long>(std::min(pool, ranked.size())));
  if (candidates.empty()) throw Error(ErrorCode::kEmptyInput, "no templates to sample");
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(std::min(n, candidates.size()));
  return candidates;
}

struct PipelineSourceOptions {
  int beam_size = 10;
  // Surviving candidates kept per template.
  std::size_t per_template = 1;
  FilterConfig filter;
};

// scpn + parse generator + filters. `parse` supplies p1 for a sentence.
template <class T>
ParaphraseSource pipeline_source(
    const ScpnModel<T>& scpn, const ScpnModel<T>& generator,
    std::function<std::optional<ParseTree>(const std::string&)> parse,
    PipelineSourceOptions opts) {
  auto scorer = std::make_shared<EmbeddingScorer>(opts.filter.make_scorer());
  return [&scpn, &generator, parse = std::move(parse), opts,
          scorer](const std::string& sentence, const Template& t) {
    auto p1 = parse(sentence);
    if (!p1) throw Error(ErrorCode::kMissingParse, "cannot parse '" + sentence + "'");
    auto r = paraphrase_with_template(scpn, &generator, sentence, *p1, t, opts.beam_size);
    std::vector<ScoredCandidate> scored;
    std::string source = normalize_sentence(sentence);
    for (auto& c : r.candidates) {
      if (c.text == source) continue;
      scored.push_back({source, std::move(c.text), c.score});
    }
    std::vector<std::string> out;
    for (auto& f : postprocess(scored, opts.filter, *scorer)) {
      if (out.size() >= opts.per_template) break;
      out.push_back(std::move(f.candidate));
    }
    return out;
  };
}

// ---- broken-example evaluation ----

struct ParaphrasePrediction {
  std::string text;
  int prediction = 0;
};

struct AdversarialRecord {
  std::string x;
  int y_x = 0;
  int y_true = 0;
  std::vector<ParaphrasePrediction> paraphrases;
  bool broken = false;
  std::vector<std::string> errors;  // per-template pipeline failures
};

struct AdversarialReport {
  std::vector<AdversarialRecord> records;
  std::size_t correct = 0;
  std::size_t broken = 0;

  double accuracy() const { return pct(correct, records.size()); }
  // Headline: broken / correctly classified originals.
  double broken_rate() const { return pct(broken, correct); }
  // Alternative: broken / all evaluated examples.
  double broken_rate_all() const { return pct(broken, records.size()); }

  static double pct(std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : 100.0 * static_cast<double>(a) / static_cast<double>(b);
  }
};

namespace detail {

// Paraphrases of text_a, template by template, errors collected.
inline std::vector<std::string> paraphrases_of(const std::string& text,
                                               std::span<const Template> templates,
                                               const ParaphraseSource& source,
                                               std::vector<std::string>& errors) {
  std::vector<std::string> out;
  for (const auto& t : templates) {
    try {
      auto got = source(text, t);
      out.insert(out.end(), got.begin(), got.end());
    } catch (const std::exception& e) {
      errors.push_back(t.serialize() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detail

struct ParaphraseSet {
  std::vector<std::string> texts;
  std::vector<std::string> errors;
};

// Paraphrases of each example's text_a; pipeline failures are recorded,
// never thrown.
inline std::vector<ParaphraseSet> generate_paraphrases(std::span<const TaskInstance> data,
                                                       const ParaphraseSource& source,
                                                       std::span<const Template> templates) {
  if (templates.empty()) throw Error(ErrorCode::kEmptyInput, "no templates");
  std::vector<ParaphraseSet> out;
  out.reserve(data.size());
  for (const auto& inst : data) {
    ParaphraseSet set;
    set.texts = detail::paraphrases_of(inst.text_a, templates, source, set.errors);
    out.push_back(std::move(set));
  }
  return out;
}

template <class T>
AdversarialReport evaluate_broken(const Classifier<T>& classifier,
                                  std::span<const TaskInstance> eval,
                                  std::span<const ParaphraseSet> paraphrases) {
  if (paraphrases.size() != eval.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one paraphrase set per example expected");
  }
  AdversarialReport report;
  auto preds = classifier.predict(eval);
  for (std::size_t i = 0; i < eval.size(); ++i) {
    AdversarialRecord rec;
    rec.x = eval[i].text_a;
    rec.y_x = preds[i];
    rec.y_true = eval[i].label;
    rec.errors = paraphrases[i].errors;
    std::vector<TaskInstance> variants;
    for (const auto& t : paraphrases[i].texts) variants.push_back({t, eval[i].text_b, eval[i].label});
    if (!variants.empty()) {
      auto vp = classifier.predict(variants);
      for (std::size_t k = 0; k < variants.size(); ++k) {
        rec.paraphrases.push_back({variants[k].text_a, vp[k]});
      }
    }
    const bool correct = rec.y_x == rec.y_true;
    rec.broken = correct && std::any_of(rec.paraphrases.begin(), rec.paraphrases.end(),
                                        [&](const auto& p) { return p.prediction != rec.y_true; });
    report.correct += correct;
    report.broken += rec.broken;
    report.records.push_back(std::move(rec));
  }
  return report;
}

template <class T>
AdversarialReport evaluate_broken(const Classifier<T>& classifier,
                                  std::span<const TaskInstance> eval,
                                  const ParaphraseSource& source,
                                  std::span<const Template> templates) {
  auto sets = generate_paraphrases(eval, source, templates);
  return evaluate_broken(classifier, eval, std::span<const ParaphraseSet>(sets));
}

// Originals, then every surviving paraphrase with its source's label.
inline std::vector<TaskInstance> augment_training(std::span<const TaskInstance> train,
                                                  std::span<const ParaphraseSet> paraphrases) {
  if (paraphrases.size() != train.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one paraphrase set per example expected");
  }
  std::vector<TaskInstance> out(train.begin(), train.end());
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (const auto& t : paraphrases[i].texts) {
      out.push_back({t, train[i].text_b, train[i].label});
    }
  }
  return out;
}

inline std::vector<TaskInstance> augment_training(std::span<const TaskInstance> train,
                                                  const ParaphraseSource& source,
                                                  std::span<const Template> templates) {
  auto sets = generate_paraphrases(train, source, templates);
  return augment_training(train, std::span<const ParaphraseSet>(sets));
}

struct RobustnessRow {
  std::string model;
  double test_accuracy = 0.0;
  double dev_broken = 0.0;      // over correctly classified dev originals
  double dev_broken_all = 0.0;  // over all dev examples
};

struct RobustnessReport {
  RobustnessRow before;
  RobustnessRow after;
  std::size_t train_size = 0;
  std::size_t augmented_size = 0;
  AdversarialReport before_dev;
  AdversarialReport after_dev;

  std::string table() const {
    std::ostringstream out;
    out << "# dev broken: headline denominator = correctly classified dev originals;"
           " 'all' = every dev example\n";
    out << std::left << std::setw(22) << "Model" << std::right << std::setw(10) << "Test Acc"
        << std::setw(12) << "Dev Broken" << std::setw(16) << "Dev Broken(all)" << '\n';
    for (const auto* r : {&before, &after}) {
      out << std::left << std::setw(22) << r->model << std::right << std::fixed
          << std::setprecision(1) << std::setw(10) << r->test_accuracy << std::setw(12)
          << r->dev_broken << std::setw(16) << r->dev_broken_all << '\n';
    }
    return out.str();
  }

  nlohmann::json to_json() const {
    auto row = [](const RobustnessRow& r) {
      return nlohmann::json{{"model", r.model},
                            {"test_accuracy", r.test_accuracy},
                            {"dev_broken", r.dev_broken},
                            {"dev_broken_all", r.dev_broken_all}};
    };
    return {{"before", row(before)},
            {"after", row(after)},
            {"train_size", train_size},
            {"augmented_size", augmented_size},
            {"dev_broken_denominator", "correctly_classified"}};
  }
};

// Baseline vs. augmented classifier. Both start from the same seed, so a
// source with no candidates reproduces the baseline exactly.
template <class T>
RobustnessReport robustness_report(std::span<const TaskInstance> train,
                                   std::span<const TaskInstance> dev,
                                   std::span<const TaskInstance> test,
                                   const ParaphraseSource& source,
                                   std::span<const Template> templates,
                                   const ClassifierConfig& config) {
  RobustnessReport r;
  r.train_size = train.size();
  // Dev paraphrases do not depend on the classifier; generate them once.
  auto dev_sets = generate_paraphrases(dev, source, templates);
  std::span<const ParaphraseSet> dev_view(dev_sets);
  auto base = train_classifier<T>(train, config);
  r.before_dev = evaluate_broken(*base, dev, dev_view);
  r.before = {"baseline", base->accuracy(test), r.before_dev.broken_rate(),
              r.before_dev.broken_rate_all()};

  auto augmented = augment_training(train, source, templates);
  r.augmented_size = augmented.size();
  auto aug = train_classifier<T>(augmented, config);
  r.after_dev = evaluate_broken(*aug, dev, dev_view);
  r.after = {"+ augmentation", aug->accuracy(test), r.after_dev.broken_rate(),
             r.after_dev.broken_rate_all()};
  return r;
}

inline nlohmann::json to_json(const AdversarialRecord& r) {
  nlohmann::json ps = nlohmann::json::array();
  for (const auto& p : r.paraphrases) ps.push_back({{"text", p.text}, {"y", p.prediction}});
  return {{"x", r.x}, {"y_x", r.y_x}, {"y_true", r.y_true},
          {"paraphrases", ps}, {"broken", r.broken}, {"errors", r.errors}};
}

}  // namespace scpn
