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

// A small closed-vocabulary English grammar used as a stand-in paraphrase
// corpus. Base sentences are sampled from the grammar and rewritten by one
// meaning-preserving transformation; gold parses come out by construction.
// ToyParser recovers the parse of any sentence the grammar covers, which
// makes template-match evaluation possible on model outputs.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "scpn/corpus.hpp"
#include "scpn/error.hpp"
#include "scpn/syntax.hpp"

namespace scpn {

enum class Transformation {
  kClauseSwap,
  kTopicalization,
  kQuestionFormation,
  kCleft,
  kConjunctionSplit,
};

inline constexpr std::array<Transformation, 5> kAllTransformations = {
    Transformation::kClauseSwap, Transformation::kTopicalization,
    Transformation::kQuestionFormation, Transformation::kCleft,
    Transformation::kConjunctionSplit};

inline std::string_view transformation_name(Transformation t) {
  switch (t) {
    case Transformation::kClauseSwap: return "clause_swap";
    case Transformation::kTopicalization: return "topicalization";
    case Transformation::kQuestionFormation: return "question_formation";
    case Transformation::kCleft: return "cleft";
    case Transformation::kConjunctionSplit: return "conjunction_split";
  }
  return "";
}

inline Transformation parse_transformation(std::string_view name) {
  for (auto t : kAllTransformations) {
    if (transformation_name(t) == name) return t;
  }
  throw Error(ErrorCode::kInvalidConfig,
              "unknown transformation: " + std::string(name));
}

struct SynthGrammarConfig {
  std::uint64_t seed = 1;
  std::size_t num_pairs = 1000;
  std::set<Transformation> transformations{kAllTransformations.begin(),
                                           kAllTransformations.end()};
  // Share of pairs whose syntax is left unchanged (lexical variation only).
  double keep_fraction = 0.6;
  // Per-word probability of a synonym swap on the paraphrase side.
  double synonym_rate = 0.3;

  void validate() const {
    if (num_pairs < 1) {
      throw Error(ErrorCode::kInvalidConfig, "num_pairs must be >= 1");
    }
    if (transformations.empty()) {
      throw Error(ErrorCode::kInvalidConfig,
                  "at least one transformation must be enabled");
    }
    if (keep_fraction < 0.0 || keep_fraction >= 1.0 || synonym_rate < 0.0 ||
        synonym_rate > 1.0) {
      throw Error(ErrorCode::kInvalidConfig, "rate outside [0, 1)");
    }
  }
};

struct Verb {
  std::string past;
  std::string base;
};

struct Lexicon {
  std::vector<std::string> determiners{"the", "a", "every", "some", "this"};
  std::vector<std::string> people{"teacher", "student", "farmer", "doctor",
                                  "child",   "girl",    "boy",    "king",
                                  "queen",   "soldier", "baker",  "sailor"};
  std::vector<std::string> animals{"dog",    "cat",  "bird", "horse",
                                   "fox",    "rabbit", "wolf", "bear",
                                   "mouse",  "goat", "duck", "lion"};
  std::vector<std::string> places{"garden", "park",   "house",   "river",
                                  "forest", "city",   "market",  "village",
                                  "kitchen", "field"};
  std::vector<std::string> adjectives{"old",   "young", "happy", "tired",
                                      "small", "big",   "quiet", "brave",
                                      "clever", "lazy"};
  std::vector<Verb> transitive{{"saw", "see"},         {"liked", "like"},
                               {"found", "find"},      {"helped", "help"},
                               {"chased", "chase"},    {"followed", "follow"},
                               {"called", "call"},     {"watched", "watch"},
                               {"visited", "visit"},   {"met", "meet"},
                               {"fed", "feed"},        {"painted", "paint"}};
  std::vector<Verb> intransitive{{"slept", "sleep"},   {"laughed", "laugh"},
                                 {"arrived", "arrive"}, {"waited", "wait"},
                                 {"smiled", "smile"},  {"danced", "dance"},
                                 {"rested", "rest"},   {"sang", "sing"}};
  std::vector<std::string> adverbs{"quickly", "slowly",    "quietly",
                                   "happily", "suddenly",  "carefully",
                                   "often",   "early"};
  std::vector<std::string> prepositions{"in",     "near",  "behind",
                                        "beside", "under", "across"};
  std::vector<std::string> subordinators{"because", "although", "while",
                                         "since"};
  std::vector<std::string> conjunctions{"and", "but"};
  // Symmetric synonym pairs used for lexical variation.
  std::vector<std::pair<std::string, std::string>> synonyms{
      {"child", "kid"},      {"happy", "glad"},     {"small", "little"},
      {"big", "large"},      {"quiet", "silent"},   {"saw", "noticed"},
      {"see", "notice"},     {"liked", "loved"},    {"like", "love"},
      {"helped", "assisted"}, {"help", "assist"},   {"quickly", "rapidly"},
      {"although", "though"}};

  std::string synonym_of(const std::string& w) const {
    for (const auto& [a, b] : synonyms) {
      if (w == a) return b;
      if (w == b) return a;
    }
    return {};
  }

  // word -> POS tags, in a fixed order.
  std::map<std::string, std::vector<std::string>> tag_dictionary() const {
    std::map<std::string, std::vector<std::string>> d;
    auto add = [&](const std::string& w, const std::string& tag) {
      auto& tags = d[w];
      for (const auto& t : tags) {
        if (t == tag) return;
      }
      tags.push_back(tag);
    };
    for (const auto& w : determiners) add(w, "DT");
    for (const auto* group : {&people, &animals, &places}) {
      for (const auto& w : *group) add(w, "NN");
    }
    for (const auto& w : adjectives) add(w, "JJ");
    for (const auto* group : {&transitive, &intransitive}) {
      for (const auto& v : *group) {
        add(v.past, "VBD");
        add(v.base, "VB");
      }
    }
    for (const auto& w : adverbs) add(w, "RB");
    for (const auto& w : prepositions) add(w, "IN");
    for (const auto& w : subordinators) add(w, "IN");
    for (const auto& w : conjunctions) add(w, "CC");
    add("what", "WP");
    add("did", "VBD");
    add("was", "VBD");
    add(",", ",");
    add(".", ".");
    add("?", ".");
    // Synonyms inherit the tags of their partner.
    std::vector<std::pair<std::string, std::string>> extra;
    for (const auto& [a, b] : synonyms) {
      if (d.count(a) && !d.count(b)) extra.emplace_back(b, a);
      if (d.count(b) && !d.count(a)) extra.emplace_back(a, b);
    }
    for (const auto& [w, src] : extra) d[w] = d[src];
    return d;
  }

  bool is_person(const std::string& noun) const {
    for (const auto& p : people) {
      if (p == noun) return true;
    }
    return noun == "kid";
  }

  bool is_animal(const std::string& noun) const {
    for (const auto& a : animals) {
      if (a == noun) return true;
    }
    return false;
  }
};

inline const Lexicon& default_lexicon() {
  static const Lexicon lex;
  return lex;
}

// Tree with lexical leaves plus the sentence it spells out.
struct Derivation {
  ParseTree tree;

  std::vector<std::string> words() const {
    std::vector<std::string> out;
    collect(tree, out);
    return out;
  }

  std::string sentence() const {
    std::string s;
    for (const auto& w : words()) {
      if (!s.empty()) s += ' ';
      s += w;
    }
    return s;
  }

  ParseTree parse() const { return strip_leaves(tree); }

 private:
  static void collect(const ParseTree& t, std::vector<std::string>& out) {
    if (t.lexical) {
      out.push_back(t.label);
      return;
    }
    for (const auto& c : t.children) collect(c, out);
  }
};

namespace synth {

inline ParseTree word(const std::string& tag, const std::string& w) {
  return ParseTree{tag, {ParseTree{w, {}, true}}, false};
}

inline ParseTree node(const std::string& label, std::vector<ParseTree> kids) {
  return ParseTree{label, std::move(kids), false};
}

struct NounPhrase {
  std::string det;
  std::string adj;  // empty = none
  std::string noun;

  ParseTree tree() const {
    std::vector<ParseTree> kids{word("DT", det)};
    if (!adj.empty()) kids.push_back(word("JJ", adj));
    kids.push_back(word("NN", noun));
    return node("NP", std::move(kids));
  }
};

struct PrepPhrase {
  std::string prep;
  NounPhrase np;

  ParseTree tree() const { return node("PP", {word("IN", prep), np.tree()}); }
};

// A verb phrase with optional object, PP and adverb.
struct Predicate {
  Verb verb;
  std::optional<NounPhrase> object;
  std::optional<PrepPhrase> pp;
  std::string adverb;

  ParseTree tree(bool base_form, bool with_object = true, bool with_pp = true,
                 bool with_adverb = true) const {
    std::vector<ParseTree> kids;
    kids.push_back(base_form ? word("VB", verb.base) : word("VBD", verb.past));
    if (with_object && object) kids.push_back(object->tree());
    if (with_pp && pp) kids.push_back(pp->tree());
    if (with_adverb && !adverb.empty()) {
      kids.push_back(node("ADVP", {word("RB", adverb)}));
    }
    return node("VP", std::move(kids));
  }
};

struct Clause {
  NounPhrase subject;
  Predicate predicate;

  ParseTree tree() const {
    return node("S", {subject.tree(), predicate.tree(false)});
  }
};

enum class BaseForm { kSimple, kSubordinate, kCoordinated };

struct BaseSentence {
  BaseForm form = BaseForm::kSimple;
  Clause main;
  // kSubordinate
  std::string subordinator;
  std::optional<Clause> subordinate;
  bool subordinate_first = false;
  // kCoordinated
  std::string conjunction;
  std::optional<Predicate> second;
};

inline ParseTree period() { return word(".", "."); }
inline ParseTree comma() { return word(",", ","); }

inline ParseTree sbar(const BaseSentence& b) {
  return node("SBAR", {word("IN", b.subordinator), b.subordinate->tree()});
}

// The untransformed realization.
inline ParseTree realize_base(const BaseSentence& b) {
  switch (b.form) {
    case BaseForm::kSimple:
      return node("S", {b.main.subject.tree(), b.main.predicate.tree(false),
                        period()});
    case BaseForm::kSubordinate: {
      if (b.subordinate_first) {
        return node("S", {sbar(b), comma(), b.main.subject.tree(),
                          b.main.predicate.tree(false), period()});
      }
      ParseTree vp = b.main.predicate.tree(false);
      vp.children.push_back(sbar(b));
      return node("S", {b.main.subject.tree(), std::move(vp), period()});
    }
    case BaseForm::kCoordinated: {
      ParseTree vp = node("VP", {b.main.predicate.tree(false),
                                 word("CC", b.conjunction),
                                 b.second->tree(false)});
      return node("S", {b.main.subject.tree(), std::move(vp), period()});
    }
  }
  return {};
}

inline bool applicable(Transformation t, const BaseSentence& b) {
  const auto& p = b.main.predicate;
  switch (t) {
    case Transformation::kClauseSwap:
      return b.form == BaseForm::kSubordinate;
    case Transformation::kTopicalization:
      return b.form == BaseForm::kSimple && (p.pp || !p.adverb.empty());
    case Transformation::kQuestionFormation:
      return b.form == BaseForm::kSimple;
    case Transformation::kCleft:
      return b.form == BaseForm::kSimple && p.object.has_value();
    case Transformation::kConjunctionSplit:
      return b.form == BaseForm::kCoordinated;
  }
  return false;
}

inline ParseTree realize(Transformation t, const BaseSentence& b) {
  const auto& subj = b.main.subject;
  const auto& pred = b.main.predicate;
  switch (t) {
    case Transformation::kClauseSwap: {
      BaseSentence flipped = b;
      flipped.subordinate_first = !b.subordinate_first;
      return realize_base(flipped);
    }
    case Transformation::kTopicalization: {
      if (pred.pp) {
        return node("S", {pred.pp->tree(), comma(), subj.tree(),
                          pred.tree(false, true, false, true), period()});
      }
      return node("S", {node("ADVP", {word("RB", pred.adverb)}), comma(),
                        subj.tree(), pred.tree(false, true, true, false),
                        period()});
    }
    case Transformation::kQuestionFormation:
      return node("SQ", {word("VBD", "did"), subj.tree(), pred.tree(true),
                         word(".", "?")});
    case Transformation::kCleft: {
      // what SUBJ VERBED [PP] [ADV] was OBJ .
      ParseTree inner = node("S", {subj.tree(), pred.tree(false, false)});
      ParseTree rel = node("SBAR", {node("WHNP", {word("WP", "what")}),
                                    std::move(inner)});
      ParseTree vp = node("VP", {word("VBD", "was"), pred.object->tree()});
      return node("S", {std::move(rel), std::move(vp), period()});
    }
    case Transformation::kConjunctionSplit: {
      ParseTree first = node("S", {subj.tree(), pred.tree(false)});
      ParseTree second = node("S", {subj.tree(), b.second->tree(false)});
      return node("S", {std::move(first), comma(), word("CC", b.conjunction),
                        std::move(second), period()});
    }
  }
  return {};
}

class Sampler {
 public:
  Sampler(const Lexicon& lex, std::uint64_t seed) : lex_(lex), rng_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  bool coin(double p) { return uniform() < p; }

  template <class T>
  const T& pick(const std::vector<T>& xs) {
    std::uniform_int_distribution<std::size_t> d(0, xs.size() - 1);
    return xs[d(rng_)];
  }

  std::size_t index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(rng_);
  }

  std::string agent() {
    return coin(0.5) ? pick(lex_.people) : pick(lex_.animals);
  }

  NounPhrase noun_phrase(const std::string& noun, double adj_rate) {
    NounPhrase np{pick(lex_.determiners), {}, noun};
    if (coin(adj_rate)) np.adj = pick(lex_.adjectives);
    return np;
  }

  std::string object_noun() {
    std::size_t k = index(lex_.people.size() + lex_.animals.size() +
                          lex_.places.size());
    if (k < lex_.people.size()) return lex_.people[k];
    k -= lex_.people.size();
    if (k < lex_.animals.size()) return lex_.animals[k];
    return lex_.places[k - lex_.animals.size()];
  }

  struct PredicateShape {
    double transitive = 0.7;
    double pp = 0.5;
    double adverb = 0.35;
    double adj = 0.3;
  };

  Predicate predicate(const PredicateShape& s) {
    Predicate p;
    if (coin(s.transitive)) {
      p.verb = pick(lex_.transitive);
      p.object = noun_phrase(object_noun(), s.adj);
    } else {
      p.verb = pick(lex_.intransitive);
    }
    if (coin(s.pp)) {
      p.pp = PrepPhrase{pick(lex_.prepositions),
                        noun_phrase(pick(lex_.places), s.adj)};
    }
    if (coin(s.adverb)) p.adverb = pick(lex_.adverbs);
    return p;
  }

  BaseSentence base(BaseForm form) {
    BaseSentence b;
    b.form = form;
    switch (form) {
      case BaseForm::kSimple:
        b.main = Clause{noun_phrase(agent(), 0.3), predicate({})};
        break;
      case BaseForm::kSubordinate: {
        PredicateShape plain{0.7, 0.0, 0.0, 0.0};
        b.main = Clause{noun_phrase(agent(), 0.3), predicate(plain)};
        b.subordinator = pick(lex_.subordinators);
        b.subordinate = Clause{noun_phrase(agent(), 0.0), predicate(plain)};
        b.subordinate_first = coin(0.5);
        break;
      }
      case BaseForm::kCoordinated: {
        PredicateShape plain{0.7, 0.0, 0.0, 0.2};
        b.main = Clause{noun_phrase(agent(), 0.3), predicate(plain)};
        b.conjunction = pick(lex_.conjunctions);
        b.second = predicate(plain);
        break;
      }
    }
    return b;
  }

  BaseSentence base_for(std::optional<Transformation> t) {
    if (!t) {
      double u = uniform();
      return base(u < 0.6   ? BaseForm::kSimple
                  : u < 0.8 ? BaseForm::kSubordinate
                            : BaseForm::kCoordinated);
    }
    for (;;) {
      BaseSentence b;
      switch (*t) {
        case Transformation::kClauseSwap:
          b = base(BaseForm::kSubordinate);
          break;
        case Transformation::kConjunctionSplit:
          b = base(BaseForm::kCoordinated);
          break;
        default:
          b = base(BaseForm::kSimple);
      }
      if (applicable(*t, b)) return b;
    }
  }

  // Swaps each word that has a synonym with probability `rate`.
  void vary_lexically(ParseTree& tree, double rate) {
    if (tree.lexical) {
      std::string alt = lex_.synonym_of(tree.label);
      if (!alt.empty() && coin(rate)) tree.label = alt;
      return;
    }
    for (auto& c : tree.children) vary_lexically(c, rate);
  }

 private:
  const Lexicon& lex_;
  std::mt19937_64 rng_;
};

}  // namespace synth

struct SynthPair {
  Derivation source;
  Derivation target;
  // nullopt: syntax kept, lexical variation only.
  std::optional<Transformation> transformation;
};

inline std::vector<SynthPair> synth_pairs(const SynthGrammarConfig& config,
                                          const Lexicon& lex = default_lexicon()) {
  config.validate();
  synth::Sampler s(lex, config.seed);
  std::vector<Transformation> enabled(config.transformations.begin(),
                                      config.transformations.end());
  std::vector<SynthPair> out;
  out.reserve(config.num_pairs);
  for (std::size_t i = 0; i < config.num_pairs; ++i) {
    std::optional<Transformation> t;
    if (!s.coin(config.keep_fraction)) t = s.pick(enabled);
    synth::BaseSentence b = s.base_for(t);
    SynthPair pair;
    pair.transformation = t;
    pair.source.tree = synth::realize_base(b);
    pair.target.tree = t ? synth::realize(*t, b) : synth::realize_base(b);
    s.vary_lexically(pair.target.tree, config.synonym_rate);
    out.push_back(std::move(pair));
  }
  return out;
}

inline std::vector<ParaphraseExample> synth_corpus(
    const SynthGrammarConfig& config, const Lexicon& lex = default_lexicon()) {
  std::vector<ParaphraseExample> out;
  for (auto& p : synth_pairs(config, lex)) {
    out.push_back(ParaphraseExample::make(p.source.sentence(),
                                          p.target.sentence(), p.source.parse(),
                                          p.target.parse()));
  }
  return out;
}

// Exact chart parser over the grammar above. Among several analyses the
// first rule in table order with the leftmost-shortest split wins.
class ToyParser {
 public:
  explicit ToyParser(const Lexicon& lex = default_lexicon())
      : tags_(lex.tag_dictionary()) {
    static const char* kRules[] = {
        "S -> NP VP .",       "S -> PP , NP VP .",   "S -> ADVP , NP VP .",
        "S -> SBAR , NP VP .", "S -> SBAR VP .",     "S -> S , CC S .",
        "S -> NP VP",         "SQ -> VBD NP VP .",   "NP -> DT NN",
        "NP -> DT JJ NN",     "PP -> IN NP",         "ADVP -> RB",
        "SBAR -> IN S",       "SBAR -> WHNP S",      "WHNP -> WP",
        "VP -> VBD",          "VP -> VBD NP",        "VP -> VBD PP",
        "VP -> VBD ADVP",     "VP -> VBD NP PP",     "VP -> VBD NP ADVP",
        "VP -> VBD PP ADVP",  "VP -> VBD NP PP ADVP", "VP -> VBD SBAR",
        "VP -> VBD NP SBAR",  "VP -> VB",            "VP -> VB NP",
        "VP -> VB PP",        "VP -> VB ADVP",       "VP -> VB NP PP",
        "VP -> VB NP ADVP",   "VP -> VB PP ADVP",    "VP -> VB NP PP ADVP",
        "VP -> VP CC VP",
    };
    for (const char* r : kRules) {
      auto parts = split_whitespace(r);
      Rule rule{parts[0], {parts.begin() + 2, parts.end()}};
      rules_.push_back(std::move(rule));
    }
    for (const auto& r : rules_) nonterminals_.insert(r.lhs);
  }

  // Leafless parse rooted at S or SQ, or nullopt if the grammar does not
  // cover the sentence.
  std::optional<ParseTree> parse(std::string_view sentence) const {
    auto words = split_whitespace(sentence);
    if (words.empty()) return std::nullopt;
    for (const auto& w : words) {
      if (!tags_.count(w)) return std::nullopt;
    }
    Chart chart{this, words, {}, {}};
    for (const char* root : {"S", "SQ"}) {
      if (auto t = chart.symbol(root, 0, words.size())) return strip_leaves(*t);
    }
    return std::nullopt;
  }

 private:
  struct Rule {
    std::string lhs;
    std::vector<std::string> rhs;
  };

  struct Chart {
    const ToyParser* g;
    std::vector<std::string> words;
    std::map<std::tuple<std::string, std::size_t, std::size_t>,
             std::optional<ParseTree>>
        memo;
    std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>,
             std::optional<std::vector<ParseTree>>>
        seq_memo;

    std::optional<ParseTree> symbol(const std::string& sym, std::size_t i,
                                    std::size_t j) {
      if (i >= j) return std::nullopt;
      if (!g->nonterminals_.count(sym)) {
        if (j != i + 1) return std::nullopt;
        for (const auto& t : g->tags_.at(words[i])) {
          if (t == sym) return synth::word(sym, words[i]);
        }
        return std::nullopt;
      }
      auto key = std::make_tuple(sym, i, j);
      if (auto it = memo.find(key); it != memo.end()) return it->second;
      memo[key] = std::nullopt;  // guards unary cycles
      std::optional<ParseTree> result;
      for (std::size_t r = 0; r < g->rules_.size() && !result; ++r) {
        if (g->rules_[r].lhs != sym) continue;
        if (auto kids = sequence(r, 0, i, j)) {
          result = ParseTree{sym, std::move(*kids), false};
        }
      }
      memo[key] = result;
      return result;
    }

    // Children for rule r's RHS[k..] spanning [i, j).
    std::optional<std::vector<ParseTree>> sequence(std::size_t r, std::size_t k,
                                                   std::size_t i, std::size_t j) {
      const auto& rhs = g->rules_[r].rhs;
      auto key = std::make_tuple(r, k, i, j);
      if (auto it = seq_memo.find(key); it != seq_memo.end()) return it->second;
      std::optional<std::vector<ParseTree>> result;
      std::size_t remaining = rhs.size() - k - 1;
      if (remaining == 0) {
        if (auto t = symbol(rhs[k], i, j)) result = std::vector<ParseTree>{*t};
      } else {
        for (std::size_t m = i + 1; m + remaining <= j && !result; ++m) {
          auto head = symbol(rhs[k], i, m);
          if (!head) continue;
          if (auto rest = sequence(r, k + 1, m, j)) {
            std::vector<ParseTree> kids{std::move(*head)};
            for (auto& t : *rest) kids.push_back(std::move(t));
            result = std::move(kids);
          }
        }
      }
      seq_memo[key] = result;
      return result;
    }
  };

  std::map<std::string, std::vector<std::string>> tags_;
  std::vector<Rule> rules_;
  std::set<std::string> nonterminals_;
};

// Sentence classification data over the same lexicon: the label is 1 when
// the main-clause subject is a person and 0 when it is an animal. Only base
// (untransformed, subordinate-clause-final) word orders are produced, so the
// subject is always the first noun.
struct LabeledSentence {
  std::string text;
  int label = 0;
};

inline std::vector<LabeledSentence> synth_subject_task(
    std::uint64_t seed, std::size_t n, const Lexicon& lex = default_lexicon()) {
  synth::Sampler s(lex, seed);
  std::vector<LabeledSentence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    synth::BaseSentence b =
        s.base(s.coin(0.5) ? synth::BaseForm::kSimple : synth::BaseForm::kSubordinate);
    b.subordinate_first = false;
    Derivation d{synth::realize_base(b)};
    out.push_back({d.sentence(), lex.is_person(b.main.subject.noun) ? 1 : 0});
  }
  return out;
}

}  // namespace scpn
