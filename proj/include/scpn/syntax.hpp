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

// Constituency trees without lexical leaves, their bracketed form, the
// "top two levels" templates used as syntactic control, and template
// statistics.

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scpn/error.hpp"

namespace scpn {

struct ParseTree {
  std::string label;
  std::vector<ParseTree> children;
  // Set for word leaves that were present in the input bracketing.
  bool lexical = false;

  bool operator==(const ParseTree&) const = default;

  bool is_leaf() const { return children.empty(); }
};

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_label_char(char c) { return !is_space(c) && c != '(' && c != ')'; }

class BracketReader {
 public:
  explicit BracketReader(std::string_view text) : text_(text) {}

  ParseTree read_document() {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != '(') {
      fail(ErrorCode::kUnbalancedBrackets, "expected '('");
    }
    ParseTree tree = read_tree();
    skip_space();
    if (pos_ != text_.size()) {
      fail(ErrorCode::kTrailingGarbage, "unexpected input after tree");
    }
    return tree;
  }

 private:
  [[noreturn]] void fail(ErrorCode code, const std::string& what) const {
    throw Error(code, what + " at offset " + std::to_string(pos_ + 1),
                pos_ + 1);
  }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string read_label() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_label_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  // Precondition: text_[pos_] == '('.
  ParseTree read_tree() {
    ++pos_;
    skip_space();
    ParseTree node;
    node.label = read_label();
    if (node.label.empty()) fail(ErrorCode::kEmptyLabel, "empty label");
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) {
        fail(ErrorCode::kUnbalancedBrackets, "missing ')'");
      }
      char c = text_[pos_];
      if (c == ')') {
        ++pos_;
        return node;
      }
      if (c == '(') {
        node.children.push_back(read_tree());
      } else {
        ParseTree leaf;
        leaf.label = read_label();
        leaf.lexical = true;
        node.children.push_back(std::move(leaf));
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline void serialize_into(const ParseTree& tree, std::string& out) {
  if (tree.lexical) {
    out += ' ';
    out += tree.label;
    return;
  }
  out += '(';
  out += tree.label;
  for (const auto& child : tree.children) serialize_into(child, out);
  out += ')';
}

inline void linearize_into(const ParseTree& tree,
                           std::vector<std::string>& out) {
  if (tree.lexical) return;
  out.push_back("(" + tree.label);
  for (const auto& child : tree.children) linearize_into(child, out);
  out.push_back(")");
}

}  // namespace detail

// Grammar: TREE := '(' LABEL (TREE | WORD)* ')'. Bare words become lexical
// leaves. Errors carry the 1-based byte offset where reading stopped.
inline ParseTree parse_bracketed(std::string_view text) {
  return detail::BracketReader(text).read_document();
}

inline ParseTree strip_leaves(const ParseTree& tree) {
  ParseTree out;
  out.label = tree.label;
  out.lexical = tree.lexical;
  for (const auto& child : tree.children) {
    if (!child.lexical) out.children.push_back(strip_leaves(child));
  }
  return out;
}

// Canonical form: no whitespace except the single space before a lexical
// leaf.
inline std::string serialize(const ParseTree& tree) {
  std::string out;
  detail::serialize_into(tree, out);
  return out;
}

inline std::size_t tree_depth(const ParseTree& tree) {
  std::size_t depth = 0;
  for (const auto& child : tree.children) {
    depth = std::max(depth, tree_depth(child));
  }
  return depth + 1;
}

inline std::size_t tree_size(const ParseTree& tree) {
  std::size_t n = 1;
  for (const auto& child : tree.children) n += tree_size(child);
  return n;
}

// Model-input token stream: "(X" for every open, ")" for every close.
inline std::vector<std::string> linearize(const ParseTree& tree) {
  std::vector<std::string> out;
  detail::linearize_into(tree, out);
  return out;
}

// Inverse of linearize. Returns nullopt unless the tokens form exactly one
// balanced tree.
inline std::optional<ParseTree> tree_from_tokens(
    std::span<const std::string> tokens) {
  std::vector<ParseTree> stack;
  std::optional<ParseTree> root;
  for (const auto& tok : tokens) {
    if (root) return std::nullopt;
    if (tok == ")") {
      if (stack.empty()) return std::nullopt;
      ParseTree done = std::move(stack.back());
      stack.pop_back();
      if (stack.empty()) {
        root = std::move(done);
      } else {
        stack.back().children.push_back(std::move(done));
      }
    } else if (tok.size() >= 2 && tok[0] == '(') {
      std::string_view label(tok);
      label.remove_prefix(1);
      if (!std::all_of(label.begin(), label.end(), detail::is_label_char)) {
        return std::nullopt;
      }
      stack.push_back(ParseTree{std::string(label), {}, false});
    } else {
      return std::nullopt;
    }
  }
  if (!stack.empty()) return std::nullopt;
  return root;
}

struct Template {
  std::string root;
  std::vector<std::string> children;

  auto operator<=>(const Template&) const = default;
  bool operator==(const Template&) const = default;

  std::string serialize() const {
    std::string out = "(" + root;
    for (const auto& c : children) out += "(" + c + ")";
    out += ")";
    return out;
  }

  ParseTree to_tree() const {
    ParseTree tree{root, {}, false};
    for (const auto& c : children) tree.children.push_back(ParseTree{c, {}, false});
    return tree;
  }

  std::vector<std::string> tokens() const { return linearize(to_tree()); }

  // Accepts any bracketed tree of depth <= 2.
  static Template parse(std::string_view text) {
    ParseTree tree = strip_leaves(parse_bracketed(text));
    if (tree_depth(tree) > 2) {
      throw Error(ErrorCode::kInvalidData,
                  "template deeper than two levels: " + std::string(text));
    }
    Template t{tree.label, {}};
    for (const auto& c : tree.children) t.children.push_back(c.label);
    return t;
  }
};

inline Template extract_template(const ParseTree& tree) {
  Template t{tree.label, {}};
  t.children.reserve(tree.children.size());
  for (const auto& c : tree.children) {
    if (!c.lexical) t.children.push_back(c.label);
  }
  return t;
}

inline bool template_match(const ParseTree& a, const ParseTree& b) {
  return extract_template(a) == extract_template(b);
}

struct TemplateHistogram {
  std::map<Template, std::size_t> counts;
  std::size_t total = 0;

  void add(const Template& t, std::size_t n = 1) {
    counts[t] += n;
    total += n;
  }

  static TemplateHistogram of(std::span<const ParseTree> parses) {
    TemplateHistogram h;
    for (const auto& p : parses) h.add(extract_template(p));
    return h;
  }
};

// Most frequent first; equal counts ordered by serialized form.
inline std::vector<Template> top_templates(const TemplateHistogram& hist,
                                           std::size_t k) {
  std::vector<std::pair<std::string, const Template*>> keyed;
  keyed.reserve(hist.counts.size());
  for (const auto& [t, n] : hist.counts) keyed.emplace_back(t.serialize(), &t);
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    std::size_t ca = hist.counts.at(*a.second);
    std::size_t cb = hist.counts.at(*b.second);
    if (ca != cb) return ca > cb;
    return a.first < b.first;
  });
  std::vector<Template> out;
  for (std::size_t i = 0; i < keyed.size() && i < k; ++i) {
    out.push_back(*keyed[i].second);
  }
  return out;
}

inline std::vector<Template> top_templates(std::span<const ParseTree> parses,
                                           std::size_t k) {
  return top_templates(TemplateHistogram::of(parses), k);
}

// Shannon entropy of the template distribution, in bits.
inline double template_entropy(const TemplateHistogram& hist) {
  if (hist.total == 0) {
    throw Error(ErrorCode::kEmptyHistogram, "histogram has no mass");
  }
  double h = 0.0;
  const double total = static_cast<double>(hist.total);
  for (const auto& [t, n] : hist.counts) {
    if (n == 0) continue;
    double p = static_cast<double>(n) / total;
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;
}

}  // namespace scpn
