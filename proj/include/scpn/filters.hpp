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

// Candidate postprocessing: n-gram overlap and embedding similarity.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scpn/error.hpp"
#include "scpn/subword.hpp"

namespace scpn {

namespace detail {

inline std::map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& toks,
                                                       std::size_t n) {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key = toks[i];
    for (std::size_t k = 1; k < n; ++k) key += '\x1f' + toks[i + k];
    ++out[key];
  }
  return out;
}

}  // namespace detail

// Mean over n in {1, 2} of multiset Jaccard similarity. Orders with an
// empty union on both sides (single-word sentences have no bigrams) are
// left out of the mean.
inline double ngram_overlap(std::string_view s, std::string_view g) {
  auto a = split_whitespace(s);
  auto b = split_whitespace(g);
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptySentence, "empty sentence");
  double sum = 0.0;
  int orders = 0;
  for (std::size_t n : {1u, 2u}) {
    auto ca = detail::ngram_counts(a, n);
    auto cb = detail::ngram_counts(b, n);
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (const auto& [k, x] : ca) {
      auto it = cb.find(k);
      std::size_t y = it == cb.end() ? 0 : it->second;
      inter += std::min(x, y);
      uni += std::max(x, y);
    }
    for (const auto& [k, y] : cb) {
      if (!ca.count(k)) uni += y;
    }
    if (uni == 0) continue;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++orders;
  }
  return sum / orders;
}

// Character trigrams of a word padded with '#' boundary marks.
inline std::vector<std::string> char_trigrams(std::string_view word) {
  std::string padded = "#" + std::string(word) + "#";
  std::vector<std::string> out;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) out.push_back(padded.substr(i, 3));
  return out;
}

// Sentence embedding = [mean word vector; mean trigram vector]. Vectors come
// from a file or, without one, from a seeded hash projection.
class EmbeddingScorer {
 public:
  static EmbeddingScorer hashed(std::uint64_t seed, int dim = 64) {
    if (dim < 1) throw Error(ErrorCode::kInvalidConfig, "embedding dim must be >= 1");
    EmbeddingScorer s;
    s.dim_ = dim;
    s.seed_ = seed;
    return s;
  }

  // One "token v1 ... vd" entry per line; trigrams share the file.
  static EmbeddingScorer from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
    EmbeddingScorer s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto parts = split_whitespace(line);
      if (parts.empty()) continue;
      Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size() - 1));
      try {
        for (std::size_t i = 1; i < parts.size(); ++i) {
          v(static_cast<Eigen::Index>(i - 1)) = std::stod(parts[i]);
        }
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidData, "bad number in " + path, std::nullopt, lineno);
      }
      if (s.dim_ == 0) s.dim_ = static_cast<int>(v.size());
      if (v.size() != s.dim_ || s.dim_ == 0) {
        throw Error(ErrorCode::kInvalidData, "inconsistent vector size in " + path,
                    std::nullopt, lineno);
      }
      s.table_.emplace(parts[0], std::move(v));
    }
    if (s.dim_ == 0) throw Error(ErrorCode::kInvalidData, "no vectors in " + path);
    s.from_file_ = true;
    return s;
  }

  int dim() const { return dim_; }

  // 2*dim vector; throws ZeroVector when nothing in the sentence is known.
  Eigen::VectorXd embed(std::string_view sentence) const {
    auto words = split_whitespace(sentence);
    if (words.empty()) throw Error(ErrorCode::kEmptySentence, "empty sentence");
    Eigen::VectorXd wsum = Eigen::VectorXd::Zero(dim_);
    Eigen::VectorXd tsum = Eigen::VectorXd::Zero(dim_);
    int wn = 0;
    int tn = 0;
    for (const auto& w : words) {
      if (auto v = lookup(w)) {
        wsum += *v;
        ++wn;
      }
      for (const auto& tri : char_trigrams(w)) {
        if (auto v = lookup(tri)) {
          tsum += *v;
          ++tn;
        }
      }
    }
    Eigen::VectorXd out(2 * dim_);
    out.head(dim_) = wn ? Eigen::VectorXd(wsum / wn) : wsum;
    out.tail(dim_) = tn ? Eigen::VectorXd(tsum / tn) : tsum;
    if (out.squaredNorm() == 0.0) {
      throw Error(ErrorCode::kZeroVector, "no known vectors for '" + std::string(sentence) + "'");
    }
    return out;
  }

  double similarity(std::string_view s, std::string_view g) const {
    Eigen::VectorXd a = embed(s);
    Eigen::VectorXd b = embed(g);
    double c = a.dot(b) / (a.norm() * b.norm());
    return std::clamp(c, -1.0, 1.0);
  }

 private:
  std::optional<Eigen::VectorXd> lookup(const std::string& token) const {
    if (from_file_) {
      auto it = table_.find(token);
      if (it == table_.end()) return std::nullopt;
      return it->second;
    }
    // FNV-1a keeps the projection stable across platforms.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : token) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    std::mt19937_64 rng(h ^ seed_);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v(i) = u(rng);
    return v;
  }

  int dim_ = 0;
  std::uint64_t seed_ = 0;
  bool from_file_ = false;
  std::unordered_map<std::string, Eigen::VectorXd> table_;
};

inline double embed_similarity(const EmbeddingScorer& scorer, std::string_view s,
                               std::string_view g) {
  return scorer.similarity(s, g);
}

struct FilterConfig {
  double min_ngram_overlap = 0.5;
  double min_similarity = 0.7;
  std::optional<std::string> embedding_path;
  std::uint64_t embedding_seed = 1;

  void validate() const {
    if (min_ngram_overlap < 0.0 || min_ngram_overlap > 1.0) {
      throw Error(ErrorCode::kInvalidConfig, "min_ngram_overlap outside [0, 1]");
    }
    if (min_similarity < -1.0 || min_similarity > 1.0) {
      throw Error(ErrorCode::kInvalidConfig, "min_similarity outside [-1, 1]");
    }
  }

  EmbeddingScorer make_scorer() const {
    return embedding_path ? EmbeddingScorer::from_file(*embedding_path)
                          : EmbeddingScorer::hashed(embedding_seed);
  }
};

struct ScoredCandidate {
  std::string source;
  std::string candidate;
  double score = 0.0;
};

struct FilteredCandidate {
  std::string source;
  std::string candidate;
  double score = 0.0;
  double overlap = 0.0;
  double similarity = 0.0;
};

// Keeps, in order, the candidates meeting both thresholds. Candidates whose
// metrics are undefined (empty text, no known vectors) are dropped.
inline std::vector<FilteredCandidate> postprocess(std::span<const ScoredCandidate> candidates,
                                                  const FilterConfig& config,
                                                  const EmbeddingScorer& scorer) {
  config.validate();
  std::vector<FilteredCandidate> out;
  for (const auto& c : candidates) {
    double overlap;
    double sim;
    try {
      overlap = ngram_overlap(c.source, c.candidate);
      sim = scorer.similarity(c.source, c.candidate);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kEmptySentence || e.code() == ErrorCode::kZeroVector) continue;
      throw;
    }
    if (overlap >= config.min_ngram_overlap && sim >= config.min_similarity) {
      out.push_back({c.source, c.candidate, c.score, overlap, sim});
    }
  }
  return out;
}

}  // namespace scpn
