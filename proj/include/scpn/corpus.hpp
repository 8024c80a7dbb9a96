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

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scpn/error.hpp"
#include "scpn/subword.hpp"
#include "scpn/syntax.hpp"

namespace scpn {

// A labeled pair <s1, s2, p1, p2>; t2 is always extract_template(p2).
struct ParaphraseExample {
  std::string s1;
  std::string s2;
  ParseTree p1;
  ParseTree p2;
  Template t2;

  static ParaphraseExample make(std::string s1, std::string s2, ParseTree p1,
                                ParseTree p2) {
    Template t2 = extract_template(p2);
    return {std::move(s1), std::move(s2), std::move(p1), std::move(p2),
            std::move(t2)};
  }

  bool operator==(const ParaphraseExample&) const = default;
};

// Lowercase ASCII and collapse whitespace.
inline std::string normalize_sentence(std::string_view text) {
  std::string out;
  for (const auto& w : split_whitespace(text)) {
    if (!out.empty()) out += ' ';
    for (char c : w) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Pair file: s1 TAB s2 TAB p1 TAB p2, one pair per line, no header.
inline std::vector<ParaphraseExample> load_pairs_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::vector<ParaphraseExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 4) {
      throw Error(ErrorCode::kBadColumnCount,
                  "line " + std::to_string(lineno) + " has " +
                      std::to_string(cols.size()) + " columns, expected 4",
                  std::nullopt, lineno);
    }
    if (split_whitespace(cols[0]).empty() || split_whitespace(cols[1]).empty()) {
      throw Error(ErrorCode::kInvalidData,
                  "empty sentence on line " + std::to_string(lineno),
                  std::nullopt, lineno);
    }
    ParseTree parses[2];
    for (int k = 0; k < 2; ++k) {
      try {
        parses[k] = strip_leaves(parse_bracketed(cols[2 + k]));
      } catch (const Error& e) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(lineno) + ", column " +
                        std::to_string(3 + k) + ": " + e.what(),
                    e.offset(), lineno);
      }
    }
    out.push_back(ParaphraseExample::make(cols[0], cols[1], std::move(parses[0]),
                                          std::move(parses[1])));
  }
  return out;
}

inline void save_pairs_tsv(std::span<const ParaphraseExample> examples,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (const auto& ex : examples) {
    out << ex.s1 << '\t' << ex.s2 << '\t' << serialize(ex.p1) << '\t'
        << serialize(ex.p2) << '\n';
  }
}

// Appends <s2, s1> for every pair, after all the originals.
inline std::vector<ParaphraseExample> add_reversed(
    std::span<const ParaphraseExample> examples) {
  std::vector<ParaphraseExample> out(examples.begin(), examples.end());
  out.reserve(examples.size() * 2);
  for (const auto& ex : examples) {
    out.push_back(ParaphraseExample::make(ex.s2, ex.s1, ex.p2, ex.p1));
  }
  return out;
}

// Token <-> id bijection with PAD, BOS, EOS, UNK at ids 0..3.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumReserved = 4;

  Vocab() {
    for (const char* t : {"<pad>", "<s>", "</s>", "<unk>"}) add(t);
  }

  int add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
  }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }

  int id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  int size() const { return static_cast<int>(tokens_.size()); }

  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::span<const std::string> tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

  // One token per line; the id is the zero-based line number.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
    for (const auto& t : tokens_) out << t << '\n';
  }

  static Vocab load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
    Vocab v;
    v.tokens_.clear();
    v.ids_.clear();
    std::string line;
    while (std::getline(in, line)) {
      if (v.ids_.count(line) != 0) {
        throw Error(ErrorCode::kInvalidData, "duplicate token in " + path);
      }
      v.ids_.emplace(line, static_cast<int>(v.tokens_.size()));
      v.tokens_.push_back(line);
    }
    if (v.tokens_.size() < kNumReserved) {
      throw Error(ErrorCode::kInvalidData, "vocab file too short: " + path);
    }
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

inline bool is_parse_symbol(std::string_view token) {
  return token == ")" || (token.size() >= 2 && token[0] == '(');
}

// Tokens with count >= min_freq, ordered by (count desc, token asc), after the
// reserved ids. Parse symbols are kept whatever their count.
inline Vocab build_vocab(std::span<const std::vector<std::string>> sequences,
                         std::size_t min_freq) {
  if (min_freq < 1) min_freq = 1;
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : sequences) {
    for (const auto& t : seq) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [t, n] : counts) {
    if (n >= min_freq || is_parse_symbol(t)) kept.emplace_back(t, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& [t, n] : kept) v.add(t);
  return v;
}

}  // namespace scpn
