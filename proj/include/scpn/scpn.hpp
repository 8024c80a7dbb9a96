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

// The syntactically controlled paraphrase network.
//
//   source tokens --biLSTM--> sentence memory  -.
//   control tokens --LSTM---> parse memory      +-> 2-layer LSTM decoder
//                                              -'    with copy over source
//
// At each step both memories are attended with bilinear scores using the
// previous top-layer hidden state as the query; layer one reads
// [w_{t-1}; a_t; z_t]. The output distribution mixes a vocabulary softmax
// over [h_t; a_t] with copy mass from the sentence attention weights.
//
// Source tokens missing from the vocabulary get per-example extended ids
// V, V+1, ... so they can still be copied.

#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "scpn/corpus.hpp"
#include "scpn/error.hpp"
#include "scpn/io.hpp"
#include "scpn/net.hpp"
#include "scpn/subword.hpp"
#include "scpn/syntax.hpp"

namespace scpn {

using net::Graph;
using net::Index;
using net::Matrix;
using net::Var;

enum class ModelKind { kScpn, kParseGenerator };

inline std::string model_kind_name(ModelKind k) {
  return k == ModelKind::kScpn ? "scpn" : "parsegen";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "scpn") return ModelKind::kScpn;
  if (s == "parsegen") return ModelKind::kParseGenerator;
  throw Error(ErrorCode::kInvalidConfig, "unknown model kind '" + s + "'");
}

// Desk-scale defaults.
struct ScpnConfig {
  int embedding_size = 64;
  int encoder_hidden = 64;  // per direction
  int parse_embedding_size = 32;
  int parse_hidden = 64;
  int decoder_hidden = 128;
  int decoder_layers = 2;
  int beam_size = 10;
  int max_decode_length = 60;
  int max_source_length = 60;
  int max_parse_length = 200;
  bool use_parse_attention = true;
  bool use_copy = true;
  bool length_normalize = true;
  std::uint64_t seed = 1;
  double init_scale = 0.08;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  int batch_size = 32;
  int epochs = 10;

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v < 1) {
        throw Error(ErrorCode::kInvalidConfig, std::string(name) + " must be >= 1");
      }
    };
    positive(embedding_size, "embedding_size");
    positive(encoder_hidden, "encoder_hidden");
    positive(parse_embedding_size, "parse_embedding_size");
    positive(parse_hidden, "parse_hidden");
    positive(decoder_hidden, "decoder_hidden");
    positive(decoder_layers, "decoder_layers");
    positive(beam_size, "beam_size");
    positive(max_decode_length, "max_decode_length");
    positive(max_source_length, "max_source_length");
    positive(max_parse_length, "max_parse_length");
    positive(batch_size, "batch_size");
    if (epochs < 0 || learning_rate < 0 || clip_norm < 0 || init_scale <= 0) {
      throw Error(ErrorCode::kInvalidConfig, "negative optimizer setting");
    }
  }
};

inline nlohmann::json to_json(const ScpnConfig& c) {
  return {
      {"embedding_size", c.embedding_size},
      {"encoder_hidden", c.encoder_hidden},
      {"parse_embedding_size", c.parse_embedding_size},
      {"parse_hidden", c.parse_hidden},
      {"decoder_hidden", c.decoder_hidden},
      {"decoder_layers", c.decoder_layers},
      {"beam_size", c.beam_size},
      {"max_decode_length", c.max_decode_length},
      {"max_source_length", c.max_source_length},
      {"max_parse_length", c.max_parse_length},
      {"use_parse_attention", c.use_parse_attention},
      {"use_copy", c.use_copy},
      {"length_normalize", c.length_normalize},
      {"seed", c.seed},
      {"init_scale", c.init_scale},
      {"learning_rate", c.learning_rate},
      {"clip_norm", c.clip_norm},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
  };
}

inline ScpnConfig scpn_config_from_json(const nlohmann::json& j) {
  ScpnConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("embedding_size", c.embedding_size);
  get("encoder_hidden", c.encoder_hidden);
  get("parse_embedding_size", c.parse_embedding_size);
  get("parse_hidden", c.parse_hidden);
  get("decoder_hidden", c.decoder_hidden);
  get("decoder_layers", c.decoder_layers);
  get("beam_size", c.beam_size);
  get("max_decode_length", c.max_decode_length);
  get("max_source_length", c.max_source_length);
  get("max_parse_length", c.max_parse_length);
  get("use_parse_attention", c.use_parse_attention);
  get("use_copy", c.use_copy);
  get("length_normalize", c.length_normalize);
  get("seed", c.seed);
  get("init_scale", c.init_scale);
  get("learning_rate", c.learning_rate);
  get("clip_norm", c.clip_norm);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  return c;
}

// ---- data ----

// Token-level training/inference instance.
struct Instance {
  std::vector<std::string> source;
  std::vector<std::string> control;
  std::vector<std::string> target;
};

// SCPN view of a pair: BPE(s1), linearize(p2) -> BPE(s2).
inline Instance scpn_instance(const ParaphraseExample& ex, const BpeModel& bpe) {
  return {bpe_apply(bpe, normalize_sentence(ex.s1)), linearize(ex.p2),
          bpe_apply(bpe, normalize_sentence(ex.s2))};
}

// Source and target ids in the word vocabulary, with per-example extended
// ids for out-of-vocabulary source tokens.
struct EncodedInstance {
  std::vector<int> source;      // in-vocab ids (OOV -> UNK)
  std::vector<int> source_ext;  // extended ids
  std::vector<int> control;
  std::vector<int> target_ext;  // ..., EOS
  std::vector<std::string> oov;  // token for extended id V + k
};

inline EncodedInstance encode_instance(const Instance& inst, const Vocab& words,
                                       const Vocab& controls) {
  EncodedInstance e;
  const int v = words.size();
  std::map<std::string, int> oov_ids;
  for (const auto& t : inst.source) {
    int id = words.id(t);
    e.source.push_back(id);
    if (id == Vocab::kUnk && t != "<unk>") {
      auto [it, fresh] = oov_ids.emplace(t, v + static_cast<int>(e.oov.size()));
      if (fresh) e.oov.push_back(t);
      e.source_ext.push_back(it->second);
    } else {
      e.source_ext.push_back(id);
    }
  }
  e.control = controls.encode(inst.control);
  for (const auto& t : inst.target) {
    int id = words.id(t);
    if (id == Vocab::kUnk) {
      if (auto it = oov_ids.find(t); it != oov_ids.end()) id = it->second;
    }
    e.target_ext.push_back(id);
  }
  e.target_ext.push_back(Vocab::kEos);
  return e;
}

// Maps extended ids back to strings, dropping BOS/EOS.
inline std::vector<std::string> decode_tokens(std::span<const int> ids,
                                              const Vocab& words,
                                              std::span<const std::string> oov) {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id == Vocab::kBos || id == Vocab::kEos || id == Vocab::kPad) continue;
    if (id >= words.size()) {
      out.push_back(oov[static_cast<std::size_t>(id - words.size())]);
    } else {
      out.push_back(words.token(id));
    }
  }
  return out;
}

// ---- model ----

template <class T>
struct EncoderOutputs {
  net::Memory<T> sentence;              // [2h x T*B]
  std::optional<net::Memory<T>> parse;  // [hp x Tp*B]
  std::vector<Var> init_h;              // per decoder layer, [hd x B]
  Eigen::MatrixXi source_ext;           // [T x B], -1 on padding
  Index batch = 0;
};

template <class T>
struct DecoderState {
  std::vector<net::LstmState<T>> layers;
  Var h;  // top-layer hidden output

  Index width(const Graph<T>& g) const { return g.value(h).cols(); }
};

template <class T>
struct StepOutput {
  DecoderState<T> state;
  Var p_vocab;  // [V x B]
  Var p_gen;    // [1 x B], invalid without copy
  Var alpha;    // sentence attention [T x B], query h_{t-1}
  Var a;        // sentence context
  Var copy_alpha;  // copy attention [T x B], query h_t; invalid without copy
  Var z;        // parse context, invalid without parse attention
};

template <class T>
class ScpnModel {
 public:
  ScpnModel(ModelKind kind, ScpnConfig config, Vocab words, Vocab controls)
      : kind_(kind),
        config_(std::move(config)),
        words_(std::move(words)),
        controls_(std::move(controls)) {
    config_.validate();
    build();
    std::mt19937_64 rng(config_.seed);
    params_.init_uniform(rng, config_.init_scale);
    for (auto* cell : cells()) cell->init_forget_bias();
  }

  ScpnModel(const ScpnModel&) = delete;
  ScpnModel& operator=(const ScpnModel&) = delete;

  ModelKind kind() const { return kind_; }
  const ScpnConfig& config() const { return config_; }
  ScpnConfig& mutable_config() { return config_; }
  const Vocab& words() const { return words_; }
  const Vocab& controls() const { return controls_; }
  net::ParamStore<T>& params() { return params_; }
  const net::ParamStore<T>& params() const { return params_; }
  std::optional<BpeModel>& bpe() { return bpe_; }
  const std::optional<BpeModel>& bpe() const { return bpe_; }

  int vocab_size() const { return words_.size(); }

  // The parse generator reads linearized parses, so its source obeys the
  // parse length cap.
  int source_limit() const {
    return kind_ == ModelKind::kParseGenerator ? config_.max_parse_length
                                               : config_.max_source_length;
  }

  // Batched encoder. Examples may differ in length; padding is masked.
  EncoderOutputs<T> encode(Graph<T>& g,
                           std::span<const EncodedInstance* const> batch) const {
    const Index b = static_cast<Index>(batch.size());
    if (b == 0) throw Error(ErrorCode::kEmptyInput, "empty batch");
    std::size_t tlen = 0;
    std::size_t plen = 0;
    for (const auto* e : batch) {
      if (e->source.empty()) throw Error(ErrorCode::kEmptyInput, "empty source");
      if (config_.use_parse_attention && e->control.empty()) {
        throw Error(ErrorCode::kEmptyInput, "empty control sequence");
      }
      if (e->source.size() > static_cast<std::size_t>(source_limit())) {
        throw Error(ErrorCode::kTooLong,
                    "source longer than " + std::to_string(source_limit()));
      }
      if (e->control.size() > static_cast<std::size_t>(config_.max_parse_length)) {
        throw Error(ErrorCode::kTooLong, "control longer than " +
                                             std::to_string(config_.max_parse_length));
      }
      tlen = std::max(tlen, e->source.size());
      plen = std::max(plen, e->control.size());
    }

    EncoderOutputs<T> out;
    out.batch = b;
    Matrix<T> mask = Matrix<T>::Zero(static_cast<Index>(tlen), b);
    out.source_ext = Eigen::MatrixXi::Constant(static_cast<Index>(tlen), b, -1);
    std::vector<std::vector<int>> ids(tlen, std::vector<int>(static_cast<std::size_t>(b),
                                                             Vocab::kPad));
    for (Index j = 0; j < b; ++j) {
      const auto* e = batch[static_cast<std::size_t>(j)];
      for (std::size_t t = 0; t < e->source.size(); ++t) {
        mask(static_cast<Index>(t), j) = T(1);
        out.source_ext(static_cast<Index>(t), j) = e->source_ext[t];
        ids[t][static_cast<std::size_t>(j)] = e->source[t];
      }
    }
    const Index h = config_.encoder_hidden;
    std::vector<Var> emb;
    for (std::size_t t = 0; t < tlen; ++t) emb.push_back(g.lookup(*word_emb_, ids[t]));
    Var zero = g.constant(Matrix<T>::Zero(h, b));
    std::vector<Var> fwd(tlen), bwd(tlen);
    net::LstmState<T> s{zero, zero};
    for (std::size_t t = 0; t < tlen; ++t) {
      s = masked_step(g, enc_fwd_, emb[t], s, mask.row(static_cast<Index>(t)));
      fwd[t] = s.h;
    }
    Var fwd_last = s.h;
    s = {zero, zero};
    for (std::size_t k = tlen; k-- > 0;) {
      s = masked_step(g, enc_bwd_, emb[k], s, mask.row(static_cast<Index>(k)));
      bwd[k] = s.h;
    }
    Var bwd_first = s.h;
    Var states = g.concat_rows({g.hstack(fwd), g.hstack(bwd)});
    out.sentence = net::Memory<T>{states, states, mask};

    Var summary = g.concat_rows({fwd_last, bwd_first});
    for (int l = 0; l < config_.decoder_layers; ++l) {
      out.init_h.push_back(g.tanh(g.add_bias(
          g.matmul(g.param(*init_w_[static_cast<std::size_t>(l)]), summary),
          g.param(*init_b_[static_cast<std::size_t>(l)]))));
    }

    if (config_.use_parse_attention) {
      Matrix<T> pmask = Matrix<T>::Zero(static_cast<Index>(plen), b);
      std::vector<std::vector<int>> pids(
          plen, std::vector<int>(static_cast<std::size_t>(b), Vocab::kPad));
      for (Index j = 0; j < b; ++j) {
        const auto* e = batch[static_cast<std::size_t>(j)];
        for (std::size_t t = 0; t < e->control.size(); ++t) {
          pmask(static_cast<Index>(t), j) = T(1);
          pids[t][static_cast<std::size_t>(j)] = e->control[t];
        }
      }
      const Index hp = config_.parse_hidden;
      Var pzero = g.constant(Matrix<T>::Zero(hp, b));
      net::LstmState<T> ps{pzero, pzero};
      std::vector<Var> pst(plen);
      for (std::size_t t = 0; t < plen; ++t) {
        ps = masked_step(g, enc_parse_, g.lookup(*parse_emb_, pids[t]), ps,
                         pmask.row(static_cast<Index>(t)));
        pst[t] = ps.h;
      }
      Var pstates = g.hstack(pst);
      out.parse = net::Memory<T>{pstates, pstates, pmask};
    }
    return out;
  }

  DecoderState<T> initial_state(Graph<T>& g, const EncoderOutputs<T>& enc) const {
    DecoderState<T> st;
    Var zero = g.constant(Matrix<T>::Zero(config_.decoder_hidden, enc.batch));
    for (Var h : enc.init_h) st.layers.push_back({h, zero});
    st.h = st.layers.back().h;
    return st;
  }

  // One decoder step for a batch of states. The encoder memory may have
  // batch 1 (shared by all columns, as in beam search) or match the state.
  StepOutput<T> decode_step(Graph<T>& g, const DecoderState<T>& state,
                            const EncoderOutputs<T>& enc,
                            const std::vector<int>& prev_ext) const {
    const Index b = state.width(g);
    if (static_cast<Index>(prev_ext.size()) != b ||
        (enc.batch != b && enc.batch != 1) ||
        static_cast<int>(state.layers.size()) != config_.decoder_layers) {
      throw Error(ErrorCode::kShapeMismatch, "decoder state does not match batch");
    }
    std::vector<int> prev(prev_ext);
    for (int& id : prev) {
      if (id >= vocab_size()) id = Vocab::kUnk;
    }
    StepOutput<T> out;
    Var w = g.lookup(*word_emb_, prev);
    auto att = net::bilinear_attention(g, *att_sentence_, state.h, enc.sentence);
    out.a = att.context;
    out.alpha = att.weights;
    std::vector<Var> input{w, out.a};
    if (config_.use_parse_attention) {
      auto patt = net::bilinear_attention(g, *att_parse_, state.h, *enc.parse);
      out.z = patt.context;
      input.push_back(out.z);
    }
    Var x = g.concat_rows(input);
    for (int l = 0; l < config_.decoder_layers; ++l) {
      auto s = net::lstm_step(g, dec_[static_cast<std::size_t>(l)],
                              x, state.layers[static_cast<std::size_t>(l)]);
      out.state.layers.push_back(s);
      x = s.h;
    }
    out.state.h = x;
    Var ha = g.concat_rows({x, out.a});
    out.p_vocab = g.softmax_cols(
        g.add_bias(g.matmul(g.param(*out_w_), ha), g.param(*out_b_)));
    if (config_.use_copy) {
      // The copy pointer reads the post-step state, so it already knows
      // w_{t-1} and z_t when choosing which source position to copy.
      auto catt = net::bilinear_attention(g, *att_copy_, x, enc.sentence);
      out.copy_alpha = catt.weights;
      Var feats = g.concat_rows({x, catt.context, w});
      out.p_gen = g.sigmoid(
          g.add_bias(g.matmul(g.param(*gate_w_), feats), g.param(*gate_b_)));
    }
    return out;
  }

  // Full distribution over the extended vocabulary [V + n_ext x B].
  Matrix<T> distribution(const Graph<T>& g, const StepOutput<T>& step,
                         const EncoderOutputs<T>& enc, int n_ext) const {
    const Matrix<T>& pv = g.value(step.p_vocab);
    const Index v = pv.rows();
    const Index b = pv.cols();
    Matrix<T> p = Matrix<T>::Zero(v + n_ext, b);
    if (!config_.use_copy) {
      p.topRows(v) = pv;
      return p;
    }
    const Matrix<T>& pg = g.value(step.p_gen);
    const Matrix<T>& al = g.value(step.copy_alpha);
    const Index bm = enc.source_ext.cols();
    for (Index j = 0; j < b; ++j) {
      p.col(j).head(v) = pg(0, j) * pv.col(j);
      const Index jm = bm == 1 ? 0 : j;
      for (Index t = 0; t < al.rows(); ++t) {
        int id = enc.source_ext(t, jm);
        if (id >= 0) p(id, j) += (T(1) - pg(0, j)) * al(t, j);
      }
    }
    return p;
  }

  // Sum of -log P(target) over all target tokens, divided by their count
  // (teacher forcing; BOS fed first, EOS last).
  Var batch_loss(Graph<T>& g, std::span<const EncodedInstance* const> batch,
                 std::size_t* token_count = nullptr) const {
    EncoderOutputs<T> enc = encode(g, batch);
    const Index b = enc.batch;
    std::size_t steps = 0;
    std::size_t total = 0;
    for (const auto* e : batch) {
      if (e->target_ext.empty()) throw Error(ErrorCode::kEmptyInput, "empty target");
      steps = std::max(steps, e->target_ext.size());
      total += e->target_ext.size();
    }
    if (token_count) *token_count = total;
    const T inv = T(1) / static_cast<T>(total);
    DecoderState<T> state = initial_state(g, enc);
    std::vector<int> prev(static_cast<std::size_t>(b), Vocab::kBos);
    Var loss;
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<int> tgt(static_cast<std::size_t>(b), Vocab::kPad);
      Matrix<T> weight = Matrix<T>::Zero(1, b);
      for (Index j = 0; j < b; ++j) {
        const auto& seq = batch[static_cast<std::size_t>(j)]->target_ext;
        if (t < seq.size()) {
          int id = seq[t];
          if (!config_.use_copy && id >= vocab_size()) id = Vocab::kUnk;
          tgt[static_cast<std::size_t>(j)] = id;
          weight(0, j) = inv;
        }
      }
      StepOutput<T> step = decode_step(g, state, enc, prev);
      Var p = config_.use_copy
                  ? g.copy_mix_pick(step.p_vocab, step.p_gen, step.copy_alpha,
                                    enc.source_ext, tgt)
                  : g.pick(step.p_vocab, tgt);
      Var term = g.neg_log_sum(p, weight);
      loss = loss.valid() ? g.add(loss, term) : term;
      state = step.state;
      prev = tgt;
    }
    return loss;
  }

  T sequence_nll(const EncodedInstance& e) const {
    Graph<T> g(false);
    const EncodedInstance* one[] = {&e};
    Var l = batch_loss(g, one);
    T v = g.value(l)(0, 0);
    if (!std::isfinite(static_cast<double>(v))) {
      throw Error(ErrorCode::kNonFiniteLoss, "sequence loss is not finite");
    }
    return v;
  }

  EncodedInstance encode_instance(const Instance& inst) const {
    return scpn::encode_instance(inst, words_, controls_);
  }

 private:
  net::LstmState<T> masked_step(Graph<T>& g, const net::LstmCellWeights<T>& w, Var x,
                                net::LstmState<T> prev,
                                const Matrix<T>& mask_row) const {
    return net::masked_lstm_step(g, w, x, prev, mask_row);
  }

  std::vector<net::LstmCellWeights<T>*> cells() {
    std::vector<net::LstmCellWeights<T>*> out{&enc_fwd_, &enc_bwd_};
    if (config_.use_parse_attention) out.push_back(&enc_parse_);
    for (auto& d : dec_) out.push_back(&d);
    return out;
  }

  void build() {
    const Index e = config_.embedding_size;
    const Index h = config_.encoder_hidden;
    const Index hd = config_.decoder_hidden;
    const Index v = words_.size();
    word_emb_ = &params_.add("embed.words", e, v);
    enc_fwd_ = net::LstmCellWeights<T>::add_to(params_, "encoder.fwd", e, h);
    enc_bwd_ = net::LstmCellWeights<T>::add_to(params_, "encoder.bwd", e, h);
    Index dec_in = e + 2 * h;
    if (config_.use_parse_attention) {
      const Index ep = config_.parse_embedding_size;
      const Index hp = config_.parse_hidden;
      parse_emb_ = &params_.add("embed.parse", ep, controls_.size());
      enc_parse_ = net::LstmCellWeights<T>::add_to(params_, "encoder.parse", ep, hp);
      att_parse_ = &params_.add("attention.parse.w", hd, hp);
      dec_in += hp;
    }
    att_sentence_ = &params_.add("attention.sentence.w", hd, 2 * h);
    for (int l = 0; l < config_.decoder_layers; ++l) {
      std::string p = "decoder.l" + std::to_string(l);
      init_w_.push_back(&params_.add(p + ".init.w", hd, 2 * h));
      init_b_.push_back(&params_.add(p + ".init.b", hd, 1));
      dec_.push_back(net::LstmCellWeights<T>::add_to(params_, p, l == 0 ? dec_in : hd, hd));
    }
    out_w_ = &params_.add("output.w", v, hd + 2 * h);
    out_b_ = &params_.add("output.b", v, 1);
    if (config_.use_copy) {
      att_copy_ = &params_.add("copy.attention.w", hd, 2 * h);
      gate_w_ = &params_.add("copy.gate.w", 1, hd + 2 * h + e);
      gate_b_ = &params_.add("copy.gate.b", 1, 1);
    }
  }

  ModelKind kind_;
  ScpnConfig config_;
  Vocab words_;
  Vocab controls_;
  std::optional<BpeModel> bpe_;
  net::ParamStore<T> params_;
  net::Param<T>* word_emb_ = nullptr;
  net::Param<T>* parse_emb_ = nullptr;
  net::LstmCellWeights<T> enc_fwd_, enc_bwd_, enc_parse_;
  net::Param<T>* att_sentence_ = nullptr;
  net::Param<T>* att_parse_ = nullptr;
  std::vector<net::Param<T>*> init_w_, init_b_;
  std::vector<net::LstmCellWeights<T>> dec_;
  net::Param<T>* out_w_ = nullptr;
  net::Param<T>* out_b_ = nullptr;
  net::Param<T>* att_copy_ = nullptr;
  net::Param<T>* gate_w_ = nullptr;
  net::Param<T>* gate_b_ = nullptr;
};

// Single-example encoder view with per-position state vectors.
template <class T>
struct EncodedStates {
  std::vector<net::Vector<T>> sentence;
  std::vector<net::Vector<T>> parse;
};

template <class T>
EncodedStates<T> encode_inputs(const ScpnModel<T>& model, const EncodedInstance& e) {
  Graph<T> g(false);
  const EncodedInstance* one[] = {&e};
  auto enc = model.encode(g, one);
  EncodedStates<T> out;
  const auto& s = g.value(enc.sentence.keys);
  for (Index t = 0; t < s.cols(); ++t) out.sentence.push_back(s.col(t));
  if (enc.parse) {
    const auto& p = g.value(enc.parse->keys);
    for (Index t = 0; t < p.cols(); ++t) out.parse.push_back(p.col(t));
  }
  return out;
}

// ---- training ----

struct TrainLogRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;       // token-weighted mean over the epoch
  double grad_norm = 0.0;  // last step, before clipping
  double seconds = 0.0;
};

struct TrainOptions {
  // 0 = use the config's epoch count.
  std::size_t epochs = 0;
  // Stop after this many optimizer steps (0 = no cap).
  std::size_t max_steps = 0;
  // Stop once an epoch's mean loss falls below this (0 = never).
  double stop_below = 0.0;
  std::function<void(const TrainLogRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<double> epoch_losses;
  std::size_t steps = 0;
};

// Mini-batch Adam with global-norm clipping. Batches are cut from a seeded
// shuffle each epoch, so the run is a function of (data, config).
template <class T>
TrainResult train(ScpnModel<T>& model, std::span<const EncodedInstance> data,
                  const TrainOptions& opts = {}) {
  if (data.empty()) throw Error(ErrorCode::kEmptyInput, "empty training set");
  const auto& cfg = model.config();
  net::Adam<T> adam(net::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.clip_norm});
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t epochs = opts.epochs ? opts.epochs : static_cast<std::size_t>(cfg.epochs);
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  TrainResult result;
  auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    double last_norm = 0.0;
    bool capped = false;
    for (std::size_t i = 0; i < order.size(); i += bs) {
      std::vector<const EncodedInstance*> batch;
      for (std::size_t k = i; k < std::min(order.size(), i + bs); ++k) {
        batch.push_back(&data[order[k]]);
      }
      model.params().zero_grad();
      Graph<T> g(true);
      std::size_t tokens = 0;
      Var loss = model.batch_loss(g, batch, &tokens);
      double lv = static_cast<double>(g.value(loss)(0, 0));
      if (!std::isfinite(lv)) {
        throw Error(ErrorCode::kDivergedLoss,
                    "non-finite loss at step " + std::to_string(result.steps + 1));
      }
      g.backward(loss);
      last_norm = adam.step(model.params());
      ++result.steps;
      loss_sum += lv * static_cast<double>(tokens);
      token_sum += tokens;
      if (opts.max_steps && result.steps >= opts.max_steps) {
        capped = true;
        break;
      }
    }
    double mean = loss_sum / static_cast<double>(token_sum);
    result.epoch_losses.push_back(mean);
    if (opts.on_epoch) {
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count();
      opts.on_epoch({epoch, result.steps, mean, last_norm, secs});
    }
    if (capped || (opts.stop_below > 0 && mean < opts.stop_below)) break;
  }
  return result;
}

// ---- beam search ----

struct Hypothesis {
  std::vector<int> tokens;  // BOS-prefixed extended ids
  double log_prob = 0.0;
  double score = 0.0;  // ranking score
  bool finished = false;  // ended with EOS (false: cut at max length)

  std::size_t length() const { return tokens.size() - 1; }
};

struct BeamOptions {
  int beam_size = 10;
  int max_length = 60;  // generated tokens, EOS included
  bool length_normalize = true;
};

namespace detail {

inline bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace detail

// Standard beam search over the mixed distribution. PAD and BOS are never
// proposed. Hypotheses that emit EOS retire; whatever is alive at
// max_length is retired unfinished. Returns all retired hypotheses, best
// first.
template <class T>
std::vector<Hypothesis> beam_search(const ScpnModel<T>& model, const EncodedInstance& input,
                                    const BeamOptions& opts) {
  if (opts.beam_size < 1 || opts.max_length < 1) {
    throw Error(ErrorCode::kInvalidConfig, "beam size and max length must be >= 1");
  }
  Graph<T> g(false);
  const EncodedInstance* one[] = {&input};
  EncoderOutputs<T> enc = model.encode(g, one);
  const int n_ext = static_cast<int>(input.oov.size());
  auto score_of = [&](const Hypothesis& h) {
    return opts.length_normalize ? h.log_prob / static_cast<double>(h.length())
                                 : h.log_prob;
  };

  struct Live {
    Hypothesis hyp;
    int column;
  };
  DecoderState<T> state = model.initial_state(g, enc);
  std::vector<Live> alive{{Hypothesis{{Vocab::kBos}, 0.0, 0.0, false}, 0}};
  std::vector<Hypothesis> done;
  const std::size_t beam = static_cast<std::size_t>(opts.beam_size);

  for (int step = 1; step <= opts.max_length && !alive.empty(); ++step) {
    std::vector<int> prev;
    for (const auto& l : alive) prev.push_back(l.hyp.tokens.back());
    // Gather the surviving columns of the state.
    DecoderState<T> cur;
    {
      std::vector<Index> cols;
      for (const auto& l : alive) cols.push_back(l.column);
      auto gather = [&](Var v) {
        const auto& m = g.value(v);
        Matrix<T> out(m.rows(), static_cast<Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) {
          out.col(static_cast<Index>(k)) = m.col(cols[k]);
        }
        return g.constant(std::move(out));
      };
      for (const auto& ls : state.layers) cur.layers.push_back({gather(ls.h), gather(ls.c)});
      cur.h = cur.layers.back().h;
    }
    StepOutput<T> out = model.decode_step(g, cur, enc, prev);
    Matrix<T> dist = model.distribution(g, out, enc, n_ext);

    struct Cand {
      double log_prob;
      std::size_t parent;
      int token;
    };
    std::vector<Cand> cands;
    for (std::size_t k = 0; k < alive.size(); ++k) {
      for (Index id = 0; id < dist.rows(); ++id) {
        if (id == Vocab::kPad || id == Vocab::kBos) continue;
        double p = static_cast<double>(dist(id, static_cast<Index>(k)));
        if (!(p > 0.0)) continue;
        cands.push_back({alive[k].hyp.log_prob + std::log(p), k, static_cast<int>(id)});
      }
    }
    // Raw log-probability ranking for pruning, ties by token sequence.
    auto seq_less = [&](const Cand& a, const Cand& b) {
      const auto& ta = alive[a.parent].hyp.tokens;
      const auto& tb = alive[b.parent].hyp.tokens;
      if (ta != tb) return ta < tb;
      return a.token < b.token;
    };
    std::size_t keep = std::min(cands.size(), beam);
    std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(keep), cands.end(),
                      [&](const Cand& a, const Cand& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        return seq_less(a, b);
                      });
    cands.resize(keep);

    std::vector<Live> next;
    for (const auto& c : cands) {
      Hypothesis h = alive[c.parent].hyp;
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      if (c.token == Vocab::kEos) {
        h.finished = true;
        h.score = score_of(h);
        done.push_back(std::move(h));
      } else if (step == opts.max_length) {
        h.score = score_of(h);
        done.push_back(std::move(h));
      } else {
        next.push_back({std::move(h), static_cast<int>(c.parent)});
      }
    }
    if (done.size() >= beam) break;
    state = out.state;
    alive = std::move(next);
  }
  std::sort(done.begin(), done.end(), detail::hypothesis_before);
  return done;
}

template <class T>
std::vector<std::string> hypothesis_tokens(const ScpnModel<T>& model,
                                           const EncodedInstance& input,
                                           const Hypothesis& h) {
  return decode_tokens(h.tokens, model.words(), input.oov);
}

// ---- checkpoints ----

inline constexpr int kCheckpointFormatVersion = 1;

// params.bin: every parameter in store order, row-major little-endian f32.
// Returns the manifest's parameter table.
template <class T>
nlohmann::json write_params(const net::ParamStore<T>& store, const std::filesystem::path& file) {
  nlohmann::json table = nlohmann::json::array();
  std::vector<float> flat;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& p = store[i];
    const Index r = p.value.rows();
    const Index c = p.value.cols();
    for (Index a = 0; a < r; ++a) {
      for (Index b = 0; b < c; ++b) flat.push_back(static_cast<float>(p.value(a, b)));
    }
    const std::size_t len = static_cast<std::size_t>(r * c);
    table.push_back({{"name", p.name},
                     {"shape", {r, c}},
                     {"dtype", "f32"},
                     {"offset", offset},
                     {"length", len}});
    offset += len * sizeof(float);
  }
  std::ofstream out(file, std::ios::binary);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(float)));
  } else {
    for (float f : flat) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      char bytes[4] = {char(u), char(u >> 8), char(u >> 16), char(u >> 24)};
      out.write(bytes, 4);
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + file.string());
  return table;
}

// Fills `store` from params.bin bytes, checking names, shapes, dtype and
// that offsets tile the file exactly.
template <class T>
void read_params(net::ParamStore<T>& store, const nlohmann::json& table,
                 const std::string& bytes, const std::string& where) {
  auto bad = [&](const std::string& why) {
    return Error(ErrorCode::kBadCheckpoint, where + ": " + why);
  };
  if (table.size() != store.size()) throw bad("parameter count mismatch");
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& entry = table[i];
    auto& p = store[i];
    if (entry.at("name").get<std::string>() != p.name) {
      throw bad("parameter " + std::to_string(i) + " is " +
                entry.at("name").get<std::string>() + ", expected " + p.name);
    }
    if (entry.at("dtype").get<std::string>() != "f32") throw bad("dtype must be f32");
    auto shape = entry.at("shape").get<std::vector<Index>>();
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
      throw bad("shape mismatch for " + p.name);
    }
    auto offset = entry.at("offset").get<std::size_t>();
    auto length = entry.at("length").get<std::size_t>();
    if (offset != expected_offset || length != static_cast<std::size_t>(p.value.size()) ||
        offset + length * 4 > bytes.size()) {
      throw bad("bad offset/length for " + p.name);
    }
    const unsigned char* src = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
    std::size_t k = 0;
    for (Index a = 0; a < p.value.rows(); ++a) {
      for (Index b = 0; b < p.value.cols(); ++b, ++k) {
        std::uint32_t u = std::uint32_t(src[4 * k]) | std::uint32_t(src[4 * k + 1]) << 8 |
                          std::uint32_t(src[4 * k + 2]) << 16 |
                          std::uint32_t(src[4 * k + 3]) << 24;
        float f;
        std::memcpy(&f, &u, 4);
        p.value(a, b) = static_cast<T>(f);
      }
    }
    expected_offset = offset + length * 4;
  }
  if (expected_offset != bytes.size()) throw bad("trailing bytes in params.bin");
}

inline nlohmann::json read_manifest(const std::filesystem::path& root) {
  try {
    return nlohmann::json::parse(io::read_file((root / "manifest.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadCheckpoint, std::string("manifest: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kBadCheckpoint, e.what());
  }
}

template <class T>
void save_checkpoint(const ScpnModel<T>& model, const std::string& dir) {
  io::atomic_write_dir(dir, [&](const std::filesystem::path& tmp) {
    nlohmann::json table = write_params(model.params(), tmp / "params.bin");
    model.words().save((tmp / "vocab.txt").string());
    model.controls().save((tmp / "control_vocab.txt").string());
    nlohmann::json manifest{
        {"format_version", kCheckpointFormatVersion},
        {"kind", model_kind_name(model.kind())},
        {"config", to_json(model.config())},
        {"vocab", "vocab.txt"},
        {"control_vocab", "control_vocab.txt"},
        {"params_file", "params.bin"},
        {"params", table},
    };
    if (model.bpe()) {
      save_merges(*model.bpe(), (tmp / "merges.txt").string());
      manifest["merges"] = "merges.txt";
    } else {
      manifest["merges"] = nullptr;
    }
    std::ofstream(tmp / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
  });
}

template <class T>
std::unique_ptr<ScpnModel<T>> load_checkpoint(const std::string& dir) {
  const std::filesystem::path root(dir);
  nlohmann::json manifest = read_manifest(root);
  try {
    if (manifest.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw Error(ErrorCode::kBadCheckpoint, dir + ": unsupported format version");
    }
    ModelKind kind = parse_model_kind(manifest.at("kind").get<std::string>());
    ScpnConfig cfg = scpn_config_from_json(manifest.at("config"));
    Vocab words = Vocab::load((root / manifest.at("vocab").get<std::string>()).string());
    Vocab controls =
        Vocab::load((root / manifest.at("control_vocab").get<std::string>()).string());
    auto model = std::make_unique<ScpnModel<T>>(kind, cfg, std::move(words),
                                                std::move(controls));
    if (!manifest.at("merges").is_null()) {
      model->bpe() = load_merges((root / manifest.at("merges").get<std::string>()).string());
    }
    read_params(model->params(), manifest.at("params"),
                io::read_file((root / "params.bin").string()), dir);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadCheckpoint, dir + ": manifest: " + e.what());
  }
}

// ---- syntactic control metrics ----

enum class MissingParsePolicy { kThrow, kCountAsMismatch };

// 100 * fraction of outputs whose template equals the reference template.
inline double same_template_rate(std::span<const std::optional<ParseTree>> outputs,
                                 std::span<const ParseTree> references,
                                 MissingParsePolicy policy = MissingParsePolicy::kThrow) {
  if (outputs.size() != references.size()) {
    throw Error(ErrorCode::kShapeMismatch, "outputs and references differ in length");
  }
  if (outputs.empty()) throw Error(ErrorCode::kEmptyInput, "no outputs");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (!outputs[i]) {
      if (policy == MissingParsePolicy::kThrow) {
        throw Error(ErrorCode::kMissingParse, "output " + std::to_string(i) + " has no parse");
      }
      continue;
    }
    hits += template_match(*outputs[i], references[i]);
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(outputs.size());
}

inline double same_template_rate(std::span<const ParseTree> outputs,
                                 std::span<const ParseTree> references) {
  std::vector<std::optional<ParseTree>> wrapped(outputs.begin(), outputs.end());
  return same_template_rate(wrapped, references);
}

}  // namespace scpn
