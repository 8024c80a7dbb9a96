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

// Minimal reverse-mode differentiation over dense column-batched matrices.
//
// Every value is a matrix whose columns are batch entries. Attention
// memories are stored time-major as [dim x (T * B)] with column t * B + b;
// a memory with B == 1 is broadcast to every query column. The scalar type
// is a template parameter so the same model code runs in float for
// training and in double for finite-difference checks.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scpn/error.hpp"

namespace scpn::net {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

template <class T>
struct Param {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
};

// Owns parameters in insertion order; addresses are stable.
template <class T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, Index rows, Index cols) {
    if (by_name_.count(name)) {
      throw Error(ErrorCode::kInvalidData, "duplicate parameter " + name);
    }
    auto p = std::make_unique<Param<T>>();
    p->name = name;
    p->value = Matrix<T>::Zero(rows, cols);
    p->grad = Matrix<T>::Zero(rows, cols);
    by_name_[name] = p.get();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Param<T>* find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  const Param<T>* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  Param<T>& at(const std::string& name) {
    auto* p = find(name);
    if (!p) throw Error(ErrorCode::kInvalidData, "no parameter " + name);
    return *p;
  }

  std::size_t size() const { return params_.size(); }
  Param<T>& operator[](std::size_t i) { return *params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  // uniform(-scale, scale), in insertion order.
  void init_uniform(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> d(-scale, scale);
    for (auto& p : params_) {
      for (Index i = 0; i < p->value.size(); ++i) {
        p->value.data()[i] = static_cast<T>(d(rng));
      }
    }
  }

  bool all_finite() const {
    for (const auto& p : params_) {
      if (!p->value.allFinite()) return false;
    }
    return true;
  }

  template <class U>
  void copy_values_from(const ParamStore<U>& other) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      params_[i]->value = other[i].value.template cast<T>();
    }
  }

 private:
  std::vector<std::unique_ptr<Param<T>>> params_;
  std::map<std::string, Param<T>*> by_name_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <class T>
class Graph {
 public:
  using Mat = Matrix<T>;

  // With record == false no backward closures are kept (inference).
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Mat value) { return push(std::move(value), false); }

  Var param(Param<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var{it->second};
    Node n;
    n.param = &p;
    n.needs_grad = record_;
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_[&p] = id;
    return Var{id};
  }

  const Mat& value(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    return n.param ? n.param->value : n.value;
  }

  std::size_t size() const { return nodes_.size(); }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    check(value(a).cols() == value(b).rows(), "matmul");
    Var out = push(value(a) * value(b), needs(a, b));
    on_back(out, [this, a, b, out] {
      const Mat& g = grad(out);
      if (needs(a)) grad(a).noalias() += g * value(b).transpose();
      if (needs(b)) grad(b).noalias() += value(a).transpose() * g;
    });
    return out;
  }

  // a^T b
  Var matmul_tn(Var a, Var b) {
    check(value(a).rows() == value(b).rows(), "matmul_tn");
    Var out = push(value(a).transpose() * value(b), needs(a, b));
    on_back(out, [this, a, b, out] {
      const Mat& g = grad(out);
      if (needs(a)) grad(a).noalias() += value(b) * g.transpose();
      if (needs(b)) grad(b).noalias() += value(a) * g;
    });
    return out;
  }

  Var add(Var a, Var b) {
    check(same_shape(a, b), "add");
    Var out = push(value(a) + value(b), needs(a, b));
    on_back(out, [this, a, b, out] {
      if (needs(a)) grad(a) += grad(out);
      if (needs(b)) grad(b) += grad(out);
    });
    return out;
  }

  // a + bias broadcast over columns; bias is [rows x 1].
  Var add_bias(Var a, Var bias) {
    check(value(bias).cols() == 1 && value(bias).rows() == value(a).rows(),
          "add_bias");
    Mat v = value(a).colwise() + value(bias).col(0);
    Var out = push(std::move(v), needs(a, bias));
    on_back(out, [this, a, bias, out] {
      if (needs(a)) grad(a) += grad(out);
      if (needs(bias)) grad(bias) += grad(out).rowwise().sum();
    });
    return out;
  }

  Var scale(Var a, T s) {
    Var out = push(value(a) * s, needs(a));
    on_back(out, [this, a, s, out] { grad(a) += grad(out) * s; });
    return out;
  }

  Var cmul(Var a, Var b) {
    check(same_shape(a, b), "cmul");
    Var out = push(value(a).cwiseProduct(value(b)), needs(a, b));
    on_back(out, [this, a, b, out] {
      if (needs(a)) grad(a) += grad(out).cwiseProduct(value(b));
      if (needs(b)) grad(b) += grad(out).cwiseProduct(value(a));
    });
    return out;
  }

  Var sigmoid(Var a) {
    Mat v = value(a).unaryExpr([](T x) { return stable_sigmoid(x); });
    Var out = push(std::move(v), needs(a));
    on_back(out, [this, a, out] {
      const Mat& y = value(out);
      grad(a) += grad(out).cwiseProduct(y.cwiseProduct((T(1) - y.array()).matrix()));
    });
    return out;
  }

  Var tanh(Var a) {
    Mat v = value(a).array().tanh().matrix();
    Var out = push(std::move(v), needs(a));
    on_back(out, [this, a, out] {
      const Mat& y = value(out);
      grad(a) += grad(out).cwiseProduct((T(1) - y.array().square()).matrix());
    });
    return out;
  }

  Var rows(Var a, Index start, Index n) {
    check(start >= 0 && start + n <= value(a).rows(), "rows");
    Var out = push(value(a).middleRows(start, n), needs(a));
    on_back(out, [this, a, start, n, out] {
      grad(a).middleRows(start, n) += grad(out);
    });
    return out;
  }

  Var concat_rows(std::span<const Var> parts) {
    check(!parts.empty(), "concat_rows");
    Index cols = value(parts[0]).cols();
    Index total = 0;
    bool ng = false;
    for (Var p : parts) {
      check(value(p).cols() == cols, "concat_rows");
      total += value(p).rows();
      ng = ng || needs(p);
    }
    Mat v(total, cols);
    Index r = 0;
    for (Var p : parts) {
      v.middleRows(r, value(p).rows()) = value(p);
      r += value(p).rows();
    }
    Var out = push(std::move(v), ng);
    std::vector<Var> ps(parts.begin(), parts.end());
    on_back(out, [this, ps, out] {
      Index r = 0;
      for (Var p : ps) {
        Index n = value(p).rows();
        if (needs(p)) grad(p) += grad(out).middleRows(r, n);
        r += n;
      }
    });
    return out;
  }

  Var concat_rows(std::initializer_list<Var> parts) {
    return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
  }

  // Time-major memory: step t's [d x B] block lands at columns t*B .. t*B+B-1.
  Var hstack(std::span<const Var> steps) {
    check(!steps.empty(), "hstack");
    Index d = value(steps[0]).rows();
    Index b = value(steps[0]).cols();
    bool ng = false;
    for (Var s : steps) {
      check(value(s).rows() == d && value(s).cols() == b, "hstack");
      ng = ng || needs(s);
    }
    Mat v(d, b * static_cast<Index>(steps.size()));
    for (std::size_t t = 0; t < steps.size(); ++t) {
      v.middleCols(static_cast<Index>(t) * b, b) = value(steps[t]);
    }
    Var out = push(std::move(v), ng);
    std::vector<Var> ss(steps.begin(), steps.end());
    on_back(out, [this, ss, b, out] {
      for (std::size_t t = 0; t < ss.size(); ++t) {
        if (needs(ss[t])) {
          grad(ss[t]) += grad(out).middleCols(static_cast<Index>(t) * b, b);
        }
      }
    });
    return out;
  }

  // mask is [1 x B] with entries in {0, 1}: out = m * a + (1 - m) * b.
  Var blend(const Mat& mask, Var a, Var b) {
    check(same_shape(a, b) && mask.rows() == 1 && mask.cols() == value(a).cols(),
          "blend");
    Mat v = value(a);
    for (Index j = 0; j < v.cols(); ++j) {
      if (mask(0, j) == T(0)) v.col(j) = value(b).col(j);
    }
    Var out = push(std::move(v), needs(a, b));
    on_back(out, [this, mask, a, b, out] {
      for (Index j = 0; j < mask.cols(); ++j) {
        Var src = mask(0, j) == T(0) ? b : a;
        if (needs(src)) grad(src).col(j) += grad(out).col(j);
      }
    });
    return out;
  }

  // Embedding lookup: column b of the output is column ids[b] of the table.
  Var lookup(Param<T>& table, std::vector<int> ids) {
    Index d = table.value.rows();
    Mat v(d, static_cast<Index>(ids.size()));
    for (std::size_t b = 0; b < ids.size(); ++b) {
      check(ids[b] >= 0 && ids[b] < table.value.cols(), "lookup");
      v.col(static_cast<Index>(b)) = table.value.col(ids[b]);
    }
    Var out = push(std::move(v), record_);
    Param<T>* p = &table;
    on_back(out, [this, p, ids = std::move(ids), out] {
      const Mat& g = grad(out);
      for (std::size_t b = 0; b < ids.size(); ++b) {
        p->grad.col(ids[b]) += g.col(static_cast<Index>(b));
      }
    });
    return out;
  }

  // ---- attention ----

  // scores(t, b) = u(:, b) . keys(:, t * Bm + b'), b' = b or 0 when the
  // memory is broadcast. Positions with mask(t, b') == 0 get -inf.
  Var attention_scores(Var u, Var keys, const Mat& mask) {
    const Mat& uv = value(u);
    const Mat& kv = value(keys);
    const Index b = uv.cols();
    const Index tlen = mask.rows();
    const Index bm = mask.cols();
    check(uv.rows() == kv.rows() && kv.cols() == tlen * bm &&
              (bm == b || bm == 1),
          "attention_scores");
    Mat s(tlen, b);
    for (Index j = 0; j < b; ++j) {
      const Index jm = bm == 1 ? 0 : j;
      for (Index t = 0; t < tlen; ++t) {
        s(t, j) = mask(t, jm) == T(0)
                      ? -std::numeric_limits<T>::infinity()
                      : uv.col(j).dot(kv.col(t * bm + jm));
      }
    }
    Var out = push(std::move(s), needs(u, keys));
    on_back(out, [this, u, keys, mask, out] {
      const Mat& g = grad(out);
      const Index b = value(u).cols();
      const Index tlen = mask.rows();
      const Index bm = mask.cols();
      for (Index j = 0; j < b; ++j) {
        const Index jm = bm == 1 ? 0 : j;
        for (Index t = 0; t < tlen; ++t) {
          if (mask(t, jm) == T(0)) continue;
          const T gs = g(t, j);
          if (needs(u)) grad(u).col(j) += gs * value(keys).col(t * bm + jm);
          if (needs(keys)) grad(keys).col(t * bm + jm) += gs * value(u).col(j);
        }
      }
    });
    return out;
  }

  // Column-wise softmax with max subtraction; -inf entries map to 0.
  Var softmax_cols(Var a) {
    Mat v = value(a);
    for (Index j = 0; j < v.cols(); ++j) {
      T m = v.col(j).maxCoeff();
      T z = 0;
      for (Index i = 0; i < v.rows(); ++i) {
        T e = std::isinf(v(i, j)) && v(i, j) < 0 ? T(0) : std::exp(v(i, j) - m);
        v(i, j) = e;
        z += e;
      }
      v.col(j) /= z;
    }
    Var out = push(std::move(v), needs(a));
    on_back(out, [this, a, out] {
      const Mat& y = value(out);
      const Mat& g = grad(out);
      for (Index j = 0; j < y.cols(); ++j) {
        T dot = y.col(j).dot(g.col(j));
        grad(a).col(j) += y.col(j).cwiseProduct(
            (g.col(j).array() - dot).matrix());
      }
    });
    return out;
  }

  // out(:, b) = sum_t w(t, b) * values(:, t * Bm + b').
  Var weighted_sum(Var w, Var values, Index memory_batch) {
    const Mat& wv = value(w);
    const Mat& vv = value(values);
    const Index b = wv.cols();
    const Index tlen = wv.rows();
    const Index bm = memory_batch;
    check(vv.cols() == tlen * bm && (bm == b || bm == 1), "weighted_sum");
    Mat out_v = Mat::Zero(vv.rows(), b);
    for (Index j = 0; j < b; ++j) {
      const Index jm = bm == 1 ? 0 : j;
      for (Index t = 0; t < tlen; ++t) {
        if (wv(t, j) != T(0)) out_v.col(j) += wv(t, j) * vv.col(t * bm + jm);
      }
    }
    Var out = push(std::move(out_v), needs(w, values));
    on_back(out, [this, w, values, bm, out] {
      const Mat& g = grad(out);
      const Index b = value(w).cols();
      const Index tlen = value(w).rows();
      for (Index j = 0; j < b; ++j) {
        const Index jm = bm == 1 ? 0 : j;
        for (Index t = 0; t < tlen; ++t) {
          if (needs(w)) grad(w)(t, j) += g.col(j).dot(value(values).col(t * bm + jm));
          if (needs(values)) {
            grad(values).col(t * bm + jm) += value(w)(t, j) * g.col(j);
          }
        }
      }
    });
    return out;
  }

  // ---- output layers ----

  // out(0, b) = p(ids[b], b).
  Var pick(Var p, std::vector<int> ids) {
    const Mat& pv = value(p);
    check(static_cast<Index>(ids.size()) == pv.cols(), "pick");
    Mat v(1, pv.cols());
    for (Index j = 0; j < pv.cols(); ++j) {
      check(ids[j] >= 0 && ids[j] < pv.rows(), "pick");
      v(0, j) = pv(ids[j], j);
    }
    Var out = push(std::move(v), needs(p));
    on_back(out, [this, p, ids = std::move(ids), out] {
      for (std::size_t j = 0; j < ids.size(); ++j) {
        grad(p)(ids[j], static_cast<Index>(j)) += grad(out)(0, static_cast<Index>(j));
      }
    });
    return out;
  }

  // Probability of target[b] under the pointer-generator mixture
  //   P(w) = p_gen * P_vocab(w) + (1 - p_gen) * sum_{i : src_i = w} alpha_i.
  // Targets >= vocab size exist only through copying. src_ids is
  // [T x Bm] time-major like the memory mask; padded positions carry -1.
  Var copy_mix_pick(Var p_vocab, Var p_gen, Var alpha,
                    const Eigen::MatrixXi& src_ids, std::vector<int> target) {
    const Mat& pv = value(p_vocab);
    const Mat& pg = value(p_gen);
    const Mat& al = value(alpha);
    const Index b = pv.cols();
    const Index bm = src_ids.cols();
    check(pg.rows() == 1 && pg.cols() == b && al.cols() == b &&
              al.rows() == src_ids.rows() && (bm == b || bm == 1) &&
              static_cast<Index>(target.size()) == b,
          "copy_mix_pick");
    Mat v(1, b);
    Mat copy_mass(1, b);
    for (Index j = 0; j < b; ++j) {
      const Index jm = bm == 1 ? 0 : j;
      T cm = 0;
      for (Index t = 0; t < al.rows(); ++t) {
        if (src_ids(t, jm) == target[j]) cm += al(t, j);
      }
      T vocab_p = target[j] < pv.rows() ? pv(target[j], j) : T(0);
      copy_mass(0, j) = cm;
      v(0, j) = pg(0, j) * vocab_p + (T(1) - pg(0, j)) * cm;
    }
    Var out = push(std::move(v), needs(p_vocab, p_gen) || needs(alpha));
    on_back(out, [this, p_vocab, p_gen, alpha, src_ids, target = std::move(target),
                  copy_mass, out] {
      const Mat& g = grad(out);
      const Mat& pv = value(p_vocab);
      const Mat& pg = value(p_gen);
      const Index bm = src_ids.cols();
      for (std::size_t jj = 0; jj < target.size(); ++jj) {
        const Index j = static_cast<Index>(jj);
        const Index jm = bm == 1 ? 0 : j;
        const T gj = g(0, j);
        const bool in_vocab = target[jj] < pv.rows();
        T vocab_p = in_vocab ? pv(target[jj], j) : T(0);
        if (needs(p_vocab) && in_vocab) grad(p_vocab)(target[jj], j) += gj * pg(0, j);
        if (needs(p_gen)) grad(p_gen)(0, j) += gj * (vocab_p - copy_mass(0, j));
        if (needs(alpha)) {
          for (Index t = 0; t < src_ids.rows(); ++t) {
            if (src_ids(t, jm) == target[jj]) {
              grad(alpha)(t, j) += gj * (T(1) - pg(0, j));
            }
          }
        }
      }
    });
    return out;
  }

  // -sum_b weight[b] * log p(0, b), as a 1x1 value.
  Var neg_log_sum(Var p, const Mat& weight) {
    const Mat& pv = value(p);
    check(pv.rows() == 1 && weight.rows() == 1 && weight.cols() == pv.cols(),
          "neg_log_sum");
    const T floor = std::numeric_limits<T>::min();
    T s = 0;
    for (Index j = 0; j < pv.cols(); ++j) {
      if (weight(0, j) != T(0)) s -= weight(0, j) * std::log(std::max(pv(0, j), floor));
    }
    Mat v(1, 1);
    v(0, 0) = s;
    Var out = push(std::move(v), needs(p));
    on_back(out, [this, p, weight, floor, out] {
      const T g = grad(out)(0, 0);
      for (Index j = 0; j < weight.cols(); ++j) {
        if (weight(0, j) == T(0)) continue;
        grad(p)(0, j) -= g * weight(0, j) / std::max(value(p)(0, j), floor);
      }
    });
    return out;
  }

  Var sum(Var a) {
    Mat v(1, 1);
    v(0, 0) = value(a).sum();
    Var out = push(std::move(v), needs(a));
    on_back(out, [this, a, out] { grad(a).array() += grad(out)(0, 0); });
    return out;
  }

  // ---- backward ----

  void backward(Var loss) {
    check(value(loss).size() == 1, "backward");
    if (!record_) {
      throw Error(ErrorCode::kInvalidData, "backward on a non-recording graph");
    }
    grad(loss).setOnes();
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back && n.grad.size() != 0) n.back();
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Param<T>* param = nullptr;
    bool needs_grad = false;
    std::function<void()> back;
  };

  static T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    T e = std::exp(x);
    return e / (T(1) + e);
  }

  static void check(bool ok, const char* op) {
    if (!ok) throw Error(ErrorCode::kShapeMismatch, std::string("shape mismatch in ") + op);
  }

  bool same_shape(Var a, Var b) const {
    return value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols();
  }

  bool needs(Var a) const { return nodes_[static_cast<std::size_t>(a.id)].needs_grad; }
  bool needs(Var a, Var b) const { return needs(a) || needs(b); }

  Mat& grad(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.param) return n.param->grad;
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  Var push(Mat value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad && record_;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  template <class F>
  void on_back(Var out, F&& f) {
    Node& n = nodes_[static_cast<std::size_t>(out.id)];
    if (n.needs_grad) n.back = std::forward<F>(f);
  }

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<Param<T>*, int> param_nodes_;
};

// ---- LSTM ----

// Gate rows are ordered input, forget, cell candidate, output.
template <class T>
struct LstmCellWeights {
  Param<T>* input_to_gates = nullptr;   // [4h x d_in]
  Param<T>* hidden_to_gates = nullptr;  // [4h x h]
  Param<T>* bias = nullptr;             // [4h x 1]

  Index hidden() const { return hidden_to_gates->value.cols(); }
  Index input() const { return input_to_gates->value.cols(); }

  static LstmCellWeights add_to(ParamStore<T>& store, const std::string& prefix,
                                Index input, Index hidden) {
    LstmCellWeights w;
    w.input_to_gates = &store.add(prefix + ".wx", 4 * hidden, input);
    w.hidden_to_gates = &store.add(prefix + ".wh", 4 * hidden, hidden);
    w.bias = &store.add(prefix + ".b", 4 * hidden, 1);
    return w;
  }

  // Forget-gate bias +1.
  void init_forget_bias() {
    const Index h = hidden();
    bias->value.middleRows(h, h).setConstant(T(1));
  }
};

template <class T>
struct LstmState {
  Var h;
  Var c;
};

template <class T>
LstmState<T> lstm_step(Graph<T>& g, const LstmCellWeights<T>& w, Var x,
                       LstmState<T> prev) {
  const Index h = w.hidden();
  if (g.value(x).rows() != w.input() || g.value(prev.h).rows() != h ||
      g.value(prev.c).rows() != h) {
    throw Error(ErrorCode::kShapeMismatch, "lstm_step input shapes");
  }
  Var gates = g.add_bias(
      g.add(g.matmul(g.param(*w.input_to_gates), x),
            g.matmul(g.param(*w.hidden_to_gates), prev.h)),
      g.param(*w.bias));
  Var i = g.sigmoid(g.rows(gates, 0, h));
  Var f = g.sigmoid(g.rows(gates, h, h));
  Var cand = g.tanh(g.rows(gates, 2 * h, h));
  Var o = g.sigmoid(g.rows(gates, 3 * h, h));
  Var c = g.add(g.cmul(f, prev.c), g.cmul(i, cand));
  Var hn = g.cmul(o, g.tanh(c));
  return {hn, c};
}

// Advances only the batch columns whose mask entry is nonzero; the others
// carry their previous state through.
template <class T>
LstmState<T> masked_lstm_step(Graph<T>& g, const LstmCellWeights<T>& w, Var x,
                              LstmState<T> prev,
                              const Matrix<std::type_identity_t<T>>& mask_row) {
  auto s = lstm_step(g, w, x, prev);
  if ((mask_row.array() != T(0)).all()) return s;
  return {g.blend(mask_row, s.h, prev.h), g.blend(mask_row, s.c, prev.c)};
}

// Single-vector convenience form.
template <class T>
std::pair<Vector<T>, Vector<T>> lstm_step(const LstmCellWeights<T>& w,
                                          const Vector<std::type_identity_t<T>>& x,
                                          const Vector<std::type_identity_t<T>>& h_prev,
                                          const Vector<std::type_identity_t<T>>& c_prev) {
  Graph<T> g(false);
  auto s = lstm_step(g, w, g.constant(x), {g.constant(h_prev), g.constant(c_prev)});
  return {g.value(s.h).col(0), g.value(s.c).col(0)};
}

// ---- bilinear attention ----

// Keys/values of one attention source, time-major, with a [T x Bm] mask.
template <class T>
struct Memory {
  Var keys;
  Var values;
  Matrix<T> mask;

  Index length() const { return mask.rows(); }
  Index batch() const { return mask.cols(); }
};

template <class T>
struct AttentionResult {
  Var context;
  Var weights;  // [T x B]
};

// score(q, k) = q^T W k with W of shape [d_query x d_key].
template <class T>
AttentionResult<T> bilinear_attention(Graph<T>& g, Param<T>& w, Var query,
                                      const Memory<T>& mem) {
  if (mem.length() == 0) throw Error(ErrorCode::kEmptyKeys, "attention over nothing");
  Var u = g.matmul_tn(g.param(w), query);
  Var scores = g.attention_scores(u, mem.keys, mem.mask);
  Var weights = g.softmax_cols(scores);
  Var context = g.weighted_sum(weights, mem.values, mem.batch());
  return {context, weights};
}

// Single-query convenience form.
template <class T>
std::pair<Vector<T>, Vector<T>> bilinear_attention(
    Param<T>& w, const Vector<std::type_identity_t<T>>& query,
    std::span<const Vector<std::type_identity_t<T>>> keys,
    std::span<const Vector<std::type_identity_t<T>>> values) {
  if (keys.empty()) throw Error(ErrorCode::kEmptyKeys, "attention over nothing");
  if (keys.size() != values.size()) {
    throw Error(ErrorCode::kShapeMismatch, "keys and values differ in length");
  }
  Graph<T> g(false);
  Matrix<T> k(keys[0].size(), static_cast<Index>(keys.size()));
  Matrix<T> v(values[0].size(), static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < keys.size(); ++i) {
    k.col(static_cast<Index>(i)) = keys[i];
    v.col(static_cast<Index>(i)) = values[i];
  }
  Memory<T> mem{g.constant(k), g.constant(v),
                Matrix<T>::Ones(static_cast<Index>(keys.size()), 1)};
  auto r = bilinear_attention(g, w, g.constant(query), mem);
  return {g.value(r.context).col(0), g.value(r.weights).col(0)};
}

// ---- optimization ----

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
};

template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Clips the global gradient norm, applies one update, and returns the
  // pre-clip norm.
  double step(ParamStore<T>& store) {
    if (m_.empty()) {
      for (std::size_t i = 0; i < store.size(); ++i) {
        m_.push_back(Matrix<T>::Zero(store[i].value.rows(), store[i].value.cols()));
        v_.push_back(m_.back());
      }
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < store.size(); ++i) {
      sq += static_cast<double>(store[i].grad.squaredNorm());
    }
    const double norm = std::sqrt(sq);
    const double clip = (config_.clip_norm > 0 && norm > config_.clip_norm)
                            ? config_.clip_norm / norm
                            : 1.0;
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double lr_t = config_.learning_rate *
                        std::sqrt(1.0 - std::pow(b2, static_cast<double>(t_))) /
                        (1.0 - std::pow(b1, static_cast<double>(t_)));
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto& p = store[i];
      auto g = (p.grad.array() * static_cast<T>(clip));
      m_[i].array() = static_cast<T>(b1) * m_[i].array() + static_cast<T>(1 - b1) * g;
      v_[i].array() = static_cast<T>(b2) * v_[i].array() + static_cast<T>(1 - b2) * g.square();
      p.value.array() -= static_cast<T>(lr_t) * m_[i].array() /
                         (v_[i].array().sqrt() + static_cast<T>(config_.epsilon));
    }
    return norm;
  }

  long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Matrix<T>> m_;
  std::vector<Matrix<T>> v_;
  long t_ = 0;
};

// ---- gradient verification ----

struct GradCheckOptions {
  double epsilon = 1e-4;
  // Entries checked; 0 checks every entry.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  std::string worst_param;
};

// `loss(true)` must zero nothing itself: the checker zeroes gradients, calls
// loss(true) which builds a graph, returns the loss and runs backward; then
// calls loss(false) for perturbed evaluations.
template <class T>
GradCheckResult check_gradients(const std::function<T(bool)>& loss,
                                ParamStore<T>& store,
                                GradCheckOptions opts = {}) {
  store.zero_grad();
  T base = loss(true);
  if (!std::isfinite(static_cast<double>(base))) {
    throw Error(ErrorCode::kNonFiniteLoss, "loss is not finite");
  }
  std::vector<std::pair<std::size_t, Index>> entries;
  for (std::size_t p = 0; p < store.size(); ++p) {
    for (Index i = 0; i < store[p].value.size(); ++i) entries.emplace_back(p, i);
  }
  if (opts.max_entries > 0 && entries.size() > opts.max_entries) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(opts.max_entries);
  }
  std::vector<Matrix<T>> analytic;
  for (std::size_t p = 0; p < store.size(); ++p) analytic.push_back(store[p].grad);

  GradCheckResult result;
  for (auto [p, i] : entries) {
    T& x = store[p].value.data()[i];
    const T saved = x;
    x = saved + static_cast<T>(opts.epsilon);
    T up = loss(false);
    x = saved - static_cast<T>(opts.epsilon);
    T down = loss(false);
    x = saved;
    if (!std::isfinite(static_cast<double>(up)) ||
        !std::isfinite(static_cast<double>(down))) {
      throw Error(ErrorCode::kNonFiniteLoss, "perturbed loss is not finite");
    }
    // Difference in T so wide types keep their extra precision.
    double numeric = static_cast<double>((up - down) / static_cast<T>(2.0 * opts.epsilon));
    double a = static_cast<double>(analytic[p].data()[i]);
    double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    double rel = std::abs(a - numeric) / denom;
    ++result.entries_checked;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_param = store[p].name;
    }
  }
  return result;
}

}  // namespace scpn::net
