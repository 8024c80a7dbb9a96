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

// Command-line front end: one binary, one subcommand per experiment step.
// Exit codes: 0 success, 1 usage error, 2 data or model error.

#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scpn/adversarial.hpp"
#include "scpn/corpus.hpp"
#include "scpn/error.hpp"
#include "scpn/filters.hpp"
#include "scpn/io.hpp"
#include "scpn/parsegen.hpp"
#include "scpn/scpn.hpp"
#include "scpn/subword.hpp"
#include "scpn/synth.hpp"
#include "scpn/syntax.hpp"

namespace scpn::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Everything a run depends on besides its input files.
struct RunConfig {
  std::uint64_t seed = 1;
  ScpnConfig scpn;
  ClassifierConfig classifier;
  FilterConfig filter;
  SynthGrammarConfig synth;
  std::map<std::string, std::string> paths;

  RunConfig() {
    classifier.hidden = 300;
    apply_seed(seed);
  }

  void apply_seed(std::uint64_t s) {
    seed = s;
    scpn.seed = s;
    classifier.seed = s;
    filter.embedding_seed = s;
    synth.seed = s;
  }

  // Sectioned key=value text; sections are [run], [scpn], [classifier],
  // [filter], [synth], [paths].
  std::string to_text() const {
    std::ostringstream out;
    std::string section;
    for (const auto& f : const_cast<RunConfig*>(this)->fields()) {
      if (f.section != section) {
        if (!section.empty()) out << '\n';
        section = f.section;
        out << '[' << section << "]\n";
      }
      out << f.key << " = " << f.get() << '\n';
    }
    if (!paths.empty()) {
      out << "\n[paths]\n";
      for (const auto& [k, v] : paths) out << k << " = " << v << '\n';
    }
    return out.str();
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    if (section == "paths") {
      paths[key] = value;
      return;
    }
    for (auto& f : fields()) {
      if (f.section == section && f.key == key) {
        try {
          f.set(value);
        } catch (const Error&) {
          throw;
        } catch (const std::exception&) {
          throw Error(ErrorCode::kInvalidConfig, "bad value for " + section + "." + key + ": '" +
                                                     value + "'");
        }
        return;
      }
    }
    throw Error(ErrorCode::kInvalidConfig, "unknown config key " + section + "." + key);
  }

  void load_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::string section = "run";
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
      ++lineno;
      line = trim(line.substr(0, line.find('#')));
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::kInvalidConfig, origin + ": expected key = value", std::nullopt,
                    lineno);
      }
      set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate();
  }

  void validate() const {
    scpn.validate();
    classifier.validate();
    filter.validate();
    synth.validate();
  }

 private:
  struct Field {
    std::string section;
    std::string key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
  };

  template <class V>
  static Field field(std::string section, std::string key, V& ref) {
    return {std::move(section), std::move(key),
            [&ref] {
              if constexpr (std::is_same_v<V, bool>) {
                return std::string(ref ? "true" : "false");
              } else if constexpr (std::is_floating_point_v<V>) {
                // Shortest text that parses back to the same value.
                char buf[32];
                auto res = std::to_chars(buf, buf + sizeof buf, ref);
                return std::string(buf, res.ptr);
              } else {
                return std::to_string(ref);
              }
            },
            [&ref](const std::string& v) {
              if constexpr (std::is_same_v<V, bool>) {
                if (v != "true" && v != "false") throw std::invalid_argument(v);
                ref = v == "true";
              } else {
                std::istringstream s(v);
                V parsed{};
                s >> parsed;
                if (!s || !s.eof()) throw std::invalid_argument(v);
                ref = parsed;
              }
            }};
  }

  std::vector<Field> fields() {
    std::vector<Field> f;
    // The run seed fans out to every sub-seed; later sections may pin their own.
    f.push_back({"run", "seed", [this] { return std::to_string(seed); },
                 [this](const std::string& v) {
                   std::uint64_t s = 0;
                   auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
                   if (ec != std::errc() || end != v.data() + v.size()) {
                     throw std::invalid_argument(v);
                   }
                   apply_seed(s);
                 }});
    auto& s = scpn;
    f.push_back(field("scpn", "embedding_size", s.embedding_size));
    f.push_back(field("scpn", "encoder_hidden", s.encoder_hidden));
    f.push_back(field("scpn", "parse_embedding_size", s.parse_embedding_size));
    f.push_back(field("scpn", "parse_hidden", s.parse_hidden));
    f.push_back(field("scpn", "decoder_hidden", s.decoder_hidden));
    f.push_back(field("scpn", "decoder_layers", s.decoder_layers));
    f.push_back(field("scpn", "beam_size", s.beam_size));
    f.push_back(field("scpn", "max_decode_length", s.max_decode_length));
    f.push_back(field("scpn", "max_source_length", s.max_source_length));
    f.push_back(field("scpn", "max_parse_length", s.max_parse_length));
    f.push_back(field("scpn", "use_parse_attention", s.use_parse_attention));
    f.push_back(field("scpn", "use_copy", s.use_copy));
    f.push_back(field("scpn", "length_normalize", s.length_normalize));
    f.push_back(field("scpn", "seed", s.seed));
    f.push_back(field("scpn", "init_scale", s.init_scale));
    f.push_back(field("scpn", "learning_rate", s.learning_rate));
    f.push_back(field("scpn", "clip_norm", s.clip_norm));
    f.push_back(field("scpn", "batch_size", s.batch_size));
    f.push_back(field("scpn", "epochs", s.epochs));
    auto& c = classifier;
    f.push_back(field("classifier", "hidden", c.hidden));
    f.push_back(field("classifier", "embedding_size", c.embedding_size));
    f.push_back(field("classifier", "seed", c.seed));
    f.push_back(field("classifier", "init_scale", c.init_scale));
    f.push_back(field("classifier", "learning_rate", c.learning_rate));
    f.push_back(field("classifier", "clip_norm", c.clip_norm));
    f.push_back(field("classifier", "batch_size", c.batch_size));
    f.push_back(field("classifier", "epochs", c.epochs));
    f.push_back(field("classifier", "min_freq", c.min_freq));
    f.push_back(field("filter", "min_ngram_overlap", filter.min_ngram_overlap));
    f.push_back(field("filter", "min_similarity", filter.min_similarity));
    f.push_back(field("filter", "embedding_seed", filter.embedding_seed));
    f.push_back(field("synth", "seed", synth.seed));
    f.push_back(field("synth", "num_pairs", synth.num_pairs));
    f.push_back(field("synth", "keep_fraction", synth.keep_fraction));
    f.push_back(field("synth", "synonym_rate", synth.synonym_rate));
    f.push_back({"synth", "transformations",
                 [this] {
                   std::string out;
                   for (auto t : synth.transformations) {
                     out += (out.empty() ? "" : ",") + std::string(transformation_name(t));
                   }
                   return out;
                 },
                 [this](const std::string& v) {
                   synth.transformations.clear();
                   std::stringstream ss(v);
                   std::string name;
                   while (std::getline(ss, name, ',')) {
                     synth.transformations.insert(parse_transformation(name));
                   }
                 }});
    return f;
  }
};

namespace detail {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::vector<std::string> overrides;  // section.key=value
};

inline RunConfig resolve_config(const Globals& g) {
  RunConfig cfg;
  if (g.seed) cfg.apply_seed(*g.seed);
  if (!g.config_path.empty()) cfg.load_text(io::read_file(g.config_path), g.config_path);
  for (const auto& o : g.overrides) {
    auto eq = o.find('=');
    auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw Error(ErrorCode::kInvalidConfig, "--set expects section.key=value, got '" + o + "'");
    }
    cfg.set(o.substr(0, dot), o.substr(dot + 1, eq - dot - 1), o.substr(eq + 1));
  }
  // An explicit --seed wins over any seed in the file.
  if (g.seed && !g.config_path.empty()) cfg.apply_seed(*g.seed);
  cfg.validate();
  return cfg;
}

inline void echo_config(const RunConfig& cfg, const fs::path& dir) {
  io::atomic_write((dir / "config.txt").string(), cfg.to_text());
}

inline std::vector<ParaphraseExample> load_pairs_any(const std::string& path) {
  // Two-column files are parsed with the grammar's chart parser.
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::string first;
  while (std::getline(in, first) && first.empty()) {
  }
  if (split_tabs(first).size() != 2) return load_pairs_tsv(path);
  ToyParser parser;
  std::vector<ParaphraseExample> out;
  in.clear();
  in.seekg(0);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2) {
      throw Error(ErrorCode::kBadColumnCount, path + ": expected 2 columns", std::nullopt,
                  lineno);
    }
    auto p1 = parser.parse(normalize_sentence(cols[0]));
    auto p2 = parser.parse(normalize_sentence(cols[1]));
    if (!p1 || !p2) {
      throw Error(ErrorCode::kParseError, path + ": sentence not covered by the grammar",
                  std::nullopt, lineno);
    }
    out.push_back(ParaphraseExample::make(cols[0], cols[1], *p1, *p2));
  }
  return out;
}

inline std::vector<Template> load_templates(const std::string& path) {
  std::vector<Template> out;
  std::istringstream in(io::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    out.push_back(Template::parse(tab == std::string::npos ? line : line.substr(tab + 1)));
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidData, "no templates in " + path);
  return out;
}

inline SentenceParser toy_parser() {
  auto parser = std::make_shared<ToyParser>();
  return [parser](const std::string& s) { return parser->parse(normalize_sentence(s)); };
}

inline std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace detail

// ---- subcommands ----

inline int cmd_synth(const RunConfig& cfg, const std::string& out_dir, const std::string& task,
                     std::ostream& out) {
  fs::create_directories(out_dir);
  if (task == "subject") {
    auto data = synth_subject_task(cfg.synth.seed, cfg.synth.num_pairs);
    auto path = (fs::path(out_dir) / "task.tsv").string();
    io::atomic_write(path, [&](std::ostream& o) {
      for (const auto& x : data) o << x.label << '\t' << x.text << '\n';
    });
    detail::echo_config(cfg, out_dir);
    out << "wrote " << data.size() << " labeled sentences to " << path << '\n';
    return kExitOk;
  }
  auto corpus = synth_corpus(cfg.synth);
  io::atomic_write((fs::path(out_dir) / "pairs.tsv").string(), [&](std::ostream& o) {
    for (const auto& ex : corpus) {
      o << ex.s1 << '\t' << ex.s2 << '\t' << serialize(ex.p1) << '\t' << serialize(ex.p2)
        << '\n';
    }
  });
  detail::echo_config(cfg, out_dir);
  out << "wrote " << corpus.size() << " pairs to " << (fs::path(out_dir) / "pairs.tsv").string()
      << '\n';
  return kExitOk;
}

inline int cmd_label(const RunConfig& cfg, const std::string& input, const std::string& out_dir,
                     std::size_t top_k, std::ostream& out) {
  auto data = detail::load_pairs_any(input);
  if (data.empty()) throw Error(ErrorCode::kEmptyCorpus, "no pairs in " + input);
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  io::atomic_write((dir / "labeled.tsv").string(), [&](std::ostream& o) {
    for (const auto& ex : data) {
      o << ex.s1 << '\t' << ex.s2 << '\t' << serialize(ex.p1) << '\t' << serialize(ex.p2)
        << '\t' << ex.t2.serialize() << '\n';
    }
  });
  std::vector<ParseTree> targets;
  for (const auto& ex : data) targets.push_back(ex.p2);
  auto hist = TemplateHistogram::of(targets);
  auto top = top_templates(hist, top_k);
  double entropy = template_entropy(hist);
  io::atomic_write((dir / "templates.txt").string(), [&](std::ostream& o) {
    o << "# count\ttemplate; entropy_bits = " << detail::fmt(entropy, 6) << '\n';
    for (const auto& t : top) o << hist.counts.at(t) << '\t' << t.serialize() << '\n';
  });
  nlohmann::json report{{"pairs", data.size()},
                        {"distinct_templates", hist.counts.size()},
                        {"entropy_bits", entropy}};
  io::atomic_write((dir / "report.json").string(), report.dump(2) + "\n");
  detail::echo_config(cfg, out_dir);
  out << "pairs " << data.size() << " templates " << hist.counts.size() << " entropy_bits "
      << detail::fmt(entropy, 6) << '\n';
  return kExitOk;
}

inline int cmd_bpe_train(const RunConfig& cfg, const std::string& input, std::size_t merges,
                         const std::string& output, std::ostream& out) {
  auto data = detail::load_pairs_any(input);
  std::vector<std::string> corpus;
  for (const auto& ex : data) {
    corpus.push_back(normalize_sentence(ex.s1));
    corpus.push_back(normalize_sentence(ex.s2));
  }
  auto model = bpe_train(corpus, merges);
  io::atomic_write(output, [&](std::ostream& o) {
    for (const auto& [l, r] : model.merges) o << l << ' ' << r << '\n';
  });
  (void)cfg;
  out << "learned " << model.merges.size() << " merges\n";
  return kExitOk;
}

inline int cmd_train(RunConfig cfg, const std::string& model_name, const std::string& data_path,
                     const std::string& out_dir, const std::string& merges_path,
                     bool no_parse_attention, bool no_copy, std::ostream& out) {
  ModelKind kind = parse_model_kind(model_name);
  if (no_parse_attention) cfg.scpn.use_parse_attention = false;
  if (no_copy) cfg.scpn.use_copy = false;
  cfg.paths["data"] = data_path;
  if (!merges_path.empty()) cfg.paths["merges"] = merges_path;
  cfg.validate();
  auto data = detail::load_pairs_any(data_path);
  fs::path dir(out_dir);
  fs::create_directories(dir);
  detail::echo_config(cfg, dir);

  std::ostringstream log;
  TrainOptions opts;
  opts.on_epoch = [&](const TrainLogRecord& r) {
    nlohmann::json rec{{"epoch", r.epoch}, {"step", r.step}, {"loss", r.loss},
                       {"grad_norm", r.grad_norm}};
    log << rec.dump() << '\n';
    out << "epoch " << r.epoch << " loss " << detail::fmt(r.loss) << '\n';
  };
  std::unique_ptr<ScpnModel<float>> model;
  if (kind == ModelKind::kParseGenerator) {
    model = train_parse_generator<float>(data, cfg.scpn, opts);
  } else {
    std::optional<BpeModel> bpe;
    if (!merges_path.empty()) bpe = load_merges(merges_path);
    model = train_scpn<float>(data, bpe, cfg.scpn, opts);
  }
  io::atomic_write((dir / "train_log.jsonl").string(), log.str());
  save_checkpoint(*model, (dir / "checkpoint").string());
  out << "saved " << (dir / "checkpoint").string() << '\n';
  return kExitOk;
}

inline int cmd_paraphrase(const RunConfig& cfg, const std::string& scpn_dir,
                          const std::string& gen_dir, const std::string& sentence,
                          const std::string& parse, const std::string& templ,
                          const std::string& gold, int beam, std::ostream& out) {
  auto scpn = load_checkpoint<float>(scpn_dir);
  std::unique_ptr<ScpnModel<float>> gen;
  std::optional<ParseTree> gold_parse;
  if (!gold.empty()) gold_parse = strip_leaves(parse_bracketed(gold));
  if (!gold_parse && gen_dir.empty()) {
    throw Error(ErrorCode::kMissingFlag, "--parsegen is required without --gold-parse");
  }
  if (!gen_dir.empty()) gen = load_checkpoint<float>(gen_dir);
  ParseTree p1;
  if (!parse.empty()) {
    p1 = strip_leaves(parse_bracketed(parse));
  } else if (auto t = detail::toy_parser()(sentence)) {
    p1 = *t;
  } else if (!gold_parse) {
    throw Error(ErrorCode::kMissingParse, "no --parse given and the sentence does not parse");
  }
  Template t2 = templ.empty() && gold_parse ? extract_template(*gold_parse)
                                            : Template::parse(templ);
  auto r = paraphrase_with_template(*scpn, gen.get(), sentence, p1, t2,
                                    beam > 0 ? beam : cfg.scpn.beam_size, gold_parse);
  auto scorer = cfg.filter.make_scorer();
  std::vector<ScoredCandidate> scored;
  for (const auto& c : r.candidates) {
    scored.push_back({normalize_sentence(sentence), c.text, c.score});
  }
  out << "# template " << t2.serialize() << "\n# target_parse " << serialize(r.target_parse)
      << (r.conforms ? "" : " (does not conform)") << '\n';
  out << "# rank\tscore\toverlap\tsimilarity\ttext\n";
  std::size_t rank = 0;
  for (const auto& c : postprocess(scored, cfg.filter, scorer)) {
    out << ++rank << '\t' << detail::fmt(c.score) << '\t' << detail::fmt(c.overlap) << '\t'
        << detail::fmt(c.similarity) << '\t' << c.candidate << '\n';
  }
  return kExitOk;
}

inline int cmd_eval_template_match(const RunConfig& cfg, const std::string& scpn_dir,
                                   const std::string& gen_dir, const std::string& data_path,
                                   std::size_t limit, int beam, const std::string& out_dir,
                                   std::ostream& out) {
  auto scpn = load_checkpoint<float>(scpn_dir);
  std::unique_ptr<ScpnModel<float>> gen;
  if (!gen_dir.empty()) gen = load_checkpoint<float>(gen_dir);
  auto data = detail::load_pairs_any(data_path);
  if (limit && data.size() > limit) data.resize(limit);
  auto r = evaluate_template_match(*scpn, gen.get(), std::span<const ParaphraseExample>(data),
                                   detail::toy_parser(), beam > 0 ? beam : cfg.scpn.beam_size);
  std::ostringstream table;
  table << std::left << std::setw(28) << "Condition" << "Template match %\n";
  table << std::setw(28) << "SCPN w/ gold parse" << detail::fmt(r.gold_parse, 1) << '\n';
  if (gen) {
    table << std::setw(28) << "SCPN w/ generated parse" << detail::fmt(r.generated_parse, 1)
          << '\n';
    table << std::setw(28) << "Parse generator" << detail::fmt(r.generator_conformity, 1)
          << '\n';
  }
  table << std::setw(28) << "Same template as input" << detail::fmt(r.same_as_input, 1) << '\n';
  out << table.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    nlohmann::json j{{"examples", r.examples},
                     {"gold_parse", r.gold_parse},
                     {"same_as_input", r.same_as_input},
                     {"unparsed_outputs", r.unparsed_outputs}};
    if (gen) {
      j["generated_parse"] = r.generated_parse;
      j["generator_conformity"] = r.generator_conformity;
      j["generator_failures"] = r.generator_failures;
    }
    io::atomic_write((fs::path(out_dir) / "template_match.json").string(), j.dump(2) + "\n");
    io::atomic_write((fs::path(out_dir) / "template_match.txt").string(), table.str());
    detail::echo_config(cfg, out_dir);
  }
  return kExitOk;
}

struct AdversarialArgs {
  std::string action;
  std::string scpn_dir;
  std::string gen_dir;
  std::string templates_path;
  std::size_t num_templates = 10;
  std::size_t pool = 20;
  std::string classifier_dir;
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string eval_path;
  std::string out_dir;
  int beam = 0;
};

inline int cmd_adversarial(const RunConfig& cfg, const AdversarialArgs& a, std::ostream& out) {
  auto need = [](const std::string& v, const char* flag) {
    if (v.empty()) throw Error(ErrorCode::kMissingFlag, std::string(flag) + " is required");
  };
  need(a.scpn_dir, "--scpn");
  need(a.gen_dir, "--parsegen");
  need(a.templates_path, "--templates");
  need(a.out_dir, "--out");
  auto scpn = load_checkpoint<float>(a.scpn_dir);
  auto gen = load_checkpoint<float>(a.gen_dir);
  auto ranked = detail::load_templates(a.templates_path);
  auto templates = sample_templates(ranked, a.num_templates, a.pool, cfg.seed);
  PipelineSourceOptions popts;
  popts.beam_size = a.beam > 0 ? a.beam : cfg.scpn.beam_size;
  popts.filter = cfg.filter;
  auto source = pipeline_source(*scpn, *gen, detail::toy_parser(), popts);
  fs::path dir(a.out_dir);
  fs::create_directories(dir);
  detail::echo_config(cfg, dir);

  auto write_records = [&](const AdversarialReport& rep, const std::string& name) {
    io::atomic_write((dir / name).string(), [&](std::ostream& o) {
      for (const auto& r : rep.records) o << to_json(r).dump() << '\n';
    });
  };
  if (a.action == "break") {
    need(a.eval_path, "--eval");
    std::unique_ptr<Classifier<float>> clf;
    if (!a.classifier_dir.empty()) {
      clf = load_classifier<float>(a.classifier_dir);
    } else {
      need(a.train_path, "--classifier or --train");
      auto train = load_task_tsv(a.train_path);
      clf = train_classifier<float>(train, cfg.classifier);
      save_classifier(*clf, (dir / "classifier").string());
    }
    auto eval = load_task_tsv(a.eval_path);
    auto rep = evaluate_broken(*clf, eval, source, templates);
    write_records(rep, "broken.jsonl");
    out << "accuracy " << detail::fmt(rep.accuracy(), 1) << " broken "
        << detail::fmt(rep.broken_rate(), 1) << " (of correct) "
        << detail::fmt(rep.broken_rate_all(), 1) << " (of all)\n";
  } else if (a.action == "augment") {
    need(a.train_path, "--train");
    auto train = load_task_tsv(a.train_path);
    auto aug = augment_training(train, source, templates);
    save_task_tsv(aug, (dir / "augmented.tsv").string());
    out << "original " << train.size() << " augmented " << aug.size() << '\n';
  } else {
    need(a.train_path, "--train");
    need(a.dev_path, "--dev");
    need(a.test_path, "--test");
    auto train = load_task_tsv(a.train_path);
    auto dev = load_task_tsv(a.dev_path);
    auto test = load_task_tsv(a.test_path);
    auto rep = robustness_report<float>(train, dev, test, source, templates, cfg.classifier);
    io::atomic_write((dir / "report.txt").string(), rep.table());
    io::atomic_write((dir / "report.json").string(), rep.to_json().dump(2) + "\n");
    write_records(rep.before_dev, "before_dev.jsonl");
    write_records(rep.after_dev, "after_dev.jsonl");
    out << rep.table();
  }
  return kExitOk;
}

// ---- entry point ----

inline int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Syntactically controlled paraphrase generation", "scpn"};
  app.require_subcommand(1);
  detail::Globals g;
  std::uint64_t seed = 1;
  auto* seed_opt = app.add_option("--seed", seed, "Global random seed");
  app.add_option("--config", g.config_path, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Override a config key: section.key=value");

  std::string out_dir;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic paraphrase corpus");
  std::size_t n = 0;
  synth->add_option("--n", n, "Number of pairs");
  synth->add_option("--out", out_dir, "Output directory")->required();
  std::string task = "pairs";
  synth->add_option("--task", task, "pairs | subject (label<TAB>sentence classification data)")
      ->check(CLI::IsMember({"pairs", "subject"}));

  auto* label = app.add_subcommand("label", "Label pairs with parse templates");
  std::string input;
  std::size_t top_k = 20;
  label->add_option("--input", input, "Pair TSV (2 or 4 columns)")->required();
  label->add_option("--out", out_dir, "Output directory")->required();
  label->add_option("--top-k", top_k, "Templates to keep");

  auto* bpe = app.add_subcommand("bpe-train", "Learn BPE merges from a pair TSV");
  std::size_t merges = kDefaultNumMerges;
  std::string output;
  bpe->add_option("--input", input, "Pair TSV")->required();
  bpe->add_option("--merges", merges, "Number of merges");
  bpe->add_option("--out", output, "Merges file")->required();

  auto* train = app.add_subcommand("train", "Train SCPN or the parse generator");
  std::string model_name = "scpn";
  std::string data_path;
  std::string merges_path;
  bool no_pa = false;
  bool no_copy = false;
  train->add_option("--model", model_name, "scpn | parsegen")
      ->check(CLI::IsMember({"scpn", "parsegen"}));
  train->add_option("--data", data_path, "Pair TSV")->required();
  train->add_option("--out", out_dir, "Run directory")->required();
  train->add_option("--bpe", merges_path, "Merges file (scpn only)");
  train->add_flag("--no-parse-attention", no_pa, "Drop the parse attention z_t");
  train->add_flag("--no-copy", no_copy, "Drop the copy mechanism");

  auto* para = app.add_subcommand("paraphrase", "Paraphrase one sentence under a template");
  std::string scpn_dir, gen_dir, sentence, parse, templ, gold;
  int beam = 0;
  para->add_option("--scpn", scpn_dir, "SCPN checkpoint directory")->required();
  para->add_option("--parsegen", gen_dir, "Parse generator checkpoint directory");
  para->add_option("--sentence", sentence, "Input sentence")->required();
  para->add_option("--parse", parse, "Bracketed parse of the sentence");
  para->add_option("--template", templ, "Target template, e.g. (S(NP)(VP)(.))");
  para->add_option("--gold-parse", gold, "Full target parse; bypasses the generator");
  para->add_option("--beam", beam, "Beam size");

  auto* etm = app.add_subcommand("eval-template-match", "Exact template match report");
  std::size_t limit = 0;
  etm->add_option("--scpn", scpn_dir, "SCPN checkpoint directory")->required();
  etm->add_option("--parsegen", gen_dir, "Parse generator checkpoint directory");
  etm->add_option("--data", data_path, "Pair TSV")->required();
  etm->add_option("--limit", limit, "Evaluate at most this many pairs");
  etm->add_option("--beam", beam, "Beam size");
  etm->add_option("--out", out_dir, "Report directory");

  auto* adv = app.add_subcommand("adversarial", "Broken-example experiments");
  AdversarialArgs aa;
  adv->add_option("action", aa.action, "break | augment | report")
      ->required()
      ->check(CLI::IsMember({"break", "augment", "report"}));
  adv->add_option("--scpn", aa.scpn_dir, "SCPN checkpoint directory");
  adv->add_option("--parsegen", aa.gen_dir, "Parse generator checkpoint directory");
  adv->add_option("--templates", aa.templates_path, "Template file from `label`");
  adv->add_option("--num-templates", aa.num_templates, "Templates sampled per run");
  adv->add_option("--pool", aa.pool, "Sample from this many top templates");
  adv->add_option("--classifier", aa.classifier_dir, "Classifier checkpoint directory");
  adv->add_option("--train", aa.train_path, "Task TSV");
  adv->add_option("--dev", aa.dev_path, "Task TSV");
  adv->add_option("--test", aa.test_path, "Task TSV");
  adv->add_option("--eval", aa.eval_path, "Task TSV");
  adv->add_option("--out", aa.out_dir, "Output directory");
  adv->add_option("--beam", aa.beam, "Beam size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    // Name the offending word when the first positional is not a subcommand.
    for (int i = 1; i < argc; ++i) {
      std::string_view a = argv[i];
      if (a == "--seed" || a == "--config" || a == "--set") {
        ++i;
        continue;
      }
      if (a.starts_with("-")) continue;
      if (app.get_subcommand_no_throw(std::string(a)) == nullptr) {
        err << "error: unknown command '" << a << "'\n";
      }
      break;
    }
    err << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (seed_opt->count()) g.seed = seed;
    RunConfig cfg = detail::resolve_config(g);
    if (synth->parsed()) {
      if (n) cfg.synth.num_pairs = n;
      cfg.validate();
      return cmd_synth(cfg, out_dir, task, out);
    }
    if (label->parsed()) return cmd_label(cfg, input, out_dir, top_k, out);
    if (bpe->parsed()) return cmd_bpe_train(cfg, input, merges, output, out);
    if (train->parsed()) {
      return cmd_train(cfg, model_name, data_path, out_dir, merges_path, no_pa, no_copy, out);
    }
    if (para->parsed()) {
      if (templ.empty() && gold.empty()) {
        throw Error(ErrorCode::kMissingFlag, "--template or --gold-parse is required");
      }
      return cmd_paraphrase(cfg, scpn_dir, gen_dir, sentence, parse, templ, gold, beam, out);
    }
    if (etm->parsed()) {
      return cmd_eval_template_match(cfg, scpn_dir, gen_dir, data_path, limit, beam, out_dir,
                                     out);
    }
    if (adv->parsed()) return cmd_adversarial(cfg, aa, out);
    throw Error(ErrorCode::kUnknownCommand, "no subcommand");
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::kUnknownCommand || e.code() == ErrorCode::kMissingFlag) {
      err << app.help();
      return kExitUsage;
    }
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace scpn::cli
