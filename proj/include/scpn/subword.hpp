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

// Byte-pair-encoding subword units. Words are split into UTF-8 characters
// followed by a separate end-of-word sentinel; merges are learned greedily
// by pair frequency. Applied pieces carry "@@" on every non-final piece.

#pragma once

#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scpn/error.hpp"

namespace scpn {

inline constexpr std::string_view kContinuationMarker = "@@";
inline constexpr std::string_view kEndOfWord = "</w>";
inline constexpr std::size_t kDefaultNumMerges = 8000;

inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' ||
                               text[i] == '\n' || text[i] == '\r')) {
      ++i;
    }
    std::size_t start = i;
    while (i < text.size() && !(text[i] == ' ' || text[i] == '\t' ||
                                text[i] == '\n' || text[i] == '\r')) {
      ++i;
    }
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

// Splits into UTF-8 code points; malformed bytes become single-byte symbols.
inline std::vector<std::string> utf8_chars(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    auto lead = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    if (i + len > word.size()) len = 1;
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

struct BpeModel {
  using Merge = std::pair<std::string, std::string>;

  std::vector<Merge> merges;
  std::set<std::string> vocab;

  std::size_t rank(const Merge& m) const {
    auto it = ranks_.find(m.first + '\x1f' + m.second);
    return it == ranks_.end() ? npos : it->second;
  }

  void reindex() {
    ranks_.clear();
    for (std::size_t i = 0; i < merges.size(); ++i) {
      ranks_.emplace(merges[i].first + '\x1f' + merges[i].second, i);
    }
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::unordered_map<std::string, std::size_t> ranks_;
};

namespace detail {

inline std::vector<std::string> word_symbols(std::string_view word) {
  auto syms = utf8_chars(word);
  syms.emplace_back(kEndOfWord);
  return syms;
}

inline void merge_in_place(std::vector<std::string>& syms,
                           const std::string& left, const std::string& right) {
  std::vector<std::string> out;
  out.reserve(syms.size());
  for (std::size_t i = 0; i < syms.size(); ++i) {
    if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
      out.push_back(left + right);
      ++i;
    } else {
      out.push_back(std::move(syms[i]));
    }
  }
  syms = std::move(out);
}

}  // namespace detail

// Greedy most-frequent-pair merging. Ties go to the lexicographically
// smallest (left, right). Stops after `num_merges` merges or when no pair
// occurs at least twice.
inline BpeModel bpe_train(std::span<const std::string> corpus,
                          std::size_t num_merges) {
  std::map<std::string, std::size_t> word_counts;
  for (const auto& sentence : corpus) {
    for (auto& w : split_whitespace(sentence)) ++word_counts[w];
  }
  if (word_counts.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, "no words in BPE training corpus");
  }

  struct Entry {
    std::vector<std::string> syms;
    std::size_t count;
  };
  std::vector<Entry> words;
  words.reserve(word_counts.size());
  for (const auto& [w, n] : word_counts) {
    words.push_back({detail::word_symbols(w), n});
  }

  BpeModel model;
  while (model.merges.size() < num_merges) {
    std::map<std::pair<std::string, std::string>, std::size_t> pairs;
    for (const auto& e : words) {
      for (std::size_t i = 0; i + 1 < e.syms.size(); ++i) {
        pairs[{e.syms[i], e.syms[i + 1]}] += e.count;
      }
    }
    // std::map iterates in (left, right) order, so the first maximum wins
    // the tie-break.
    const std::pair<std::string, std::string>* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [p, n] : pairs) {
      if (n > best_count) {
        best = &p;
        best_count = n;
      }
    }
    if (best == nullptr || best_count < 2) break;
    auto merge = *best;
    for (auto& e : words) detail::merge_in_place(e.syms, merge.first, merge.second);
    model.merges.push_back(std::move(merge));
  }
  for (const auto& e : words) {
    for (const auto& s : e.syms) model.vocab.insert(s);
  }
  model.reindex();
  return model;
}

inline std::vector<std::string> bpe_apply_word(const BpeModel& model,
                                               std::string_view word) {
  auto syms = detail::word_symbols(word);
  for (;;) {
    std::size_t best_rank = BpeModel::npos;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      std::size_t r = model.rank({syms[i], syms[i + 1]});
      if (r < best_rank) best_rank = r;
    }
    if (best_rank == BpeModel::npos) break;
    const auto& m = model.merges[best_rank];
    detail::merge_in_place(syms, m.first, m.second);
  }
  // Drop the sentinel, either standalone or as a merged suffix.
  if (syms.back() == kEndOfWord) {
    syms.pop_back();
  } else {
    auto& last = syms.back();
    last.resize(last.size() - kEndOfWord.size());
  }
  for (std::size_t i = 0; i + 1 < syms.size(); ++i) syms[i] += kContinuationMarker;
  return syms;
}

inline std::vector<std::string> bpe_apply(const BpeModel& model,
                                          std::string_view sentence) {
  std::vector<std::string> out;
  for (const auto& w : split_whitespace(sentence)) {
    auto pieces = bpe_apply_word(model, w);
    out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return out;
}

inline bool has_continuation(std::string_view token) {
  return token.size() >= kContinuationMarker.size() &&
         token.substr(token.size() - kContinuationMarker.size()) ==
             kContinuationMarker;
}

inline std::string bpe_restore(std::span<const std::string> tokens) {
  std::string out;
  bool open_word = false;
  for (const auto& tok : tokens) {
    if (!open_word && !out.empty()) out += ' ';
    if (has_continuation(tok)) {
      out.append(tok, 0, tok.size() - kContinuationMarker.size());
      open_word = true;
    } else {
      out += tok;
      open_word = false;
    }
  }
  if (open_word) {
    throw Error(ErrorCode::kDanglingContinuation,
                "token sequence ends inside a word");
  }
  return out;
}

// Merges file: one "LEFT RIGHT" pair per line in training order.
inline void save_merges(const BpeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (const auto& [l, r] : model.merges) out << l << ' ' << r << '\n';
}

inline BpeModel load_merges(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  BpeModel model;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto parts = split_whitespace(line);
    if (parts.size() != 2) {
      throw Error(ErrorCode::kInvalidData, "bad merge line in " + path,
                  std::nullopt, lineno);
    }
    model.vocab.insert(parts[0]);
    model.vocab.insert(parts[1]);
    model.vocab.insert(parts[0] + parts[1]);
    model.merges.emplace_back(std::move(parts[0]), std::move(parts[1]));
  }
  model.reindex();
  return model;
}

}  // namespace scpn
