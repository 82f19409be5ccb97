// Copyright 2026 the ranklab authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "ranklab/tensor.hpp"
#include "ranklab/tokenizer.hpp"

namespace ranklab {

/// Transformer encoder hyperparameters. Desk defaults keep per-layer
/// analyses meaningful while tests stay in the minutes range; paper-scale
/// values (24 layers / 1024 hidden / 16 heads) remain a legal config.
struct EncoderConfig {
  std::size_t layers = 4;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t ff_dim = 256;
  std::size_t max_positions = 128;
  std::size_t vocab_size = 0;
  double dropout = 0.0;

  void validate() const {
    if (layers < 1) throw std::invalid_argument("EncoderConfig: layers must be >= 1");
    if (hidden == 0 || heads == 0 || hidden % heads != 0) {
      throw std::invalid_argument("EncoderConfig: hidden (" + std::to_string(hidden) +
                                  ") must be divisible by heads (" + std::to_string(heads) + ")");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw std::invalid_argument("EncoderConfig: dropout must be in [0,1)");
    }
    if (vocab_size == 0) throw std::invalid_argument("EncoderConfig: vocab_size unset");
    if (ff_dim == 0 || max_positions == 0) {
      throw std::invalid_argument("EncoderConfig: ff_dim and max_positions must be positive");
    }
  }
};

struct EncoderLayerParams {
  Tensor att_wq, att_bq;
  Tensor att_wk, att_bk;
  Tensor att_wv, att_bv;
  Tensor att_wo, att_bo;
  Tensor ln1_gain, ln1_bias;
  Tensor ff1_w, ff1_b;
  Tensor ff2_w, ff2_b;
  Tensor ln2_gain, ln2_bias;
};

struct EncoderParams {
  Tensor token_emb;  // vocab x H
  Tensor pos_emb;    // max_positions x H
  Tensor seg_emb;    // 2 x H
  Tensor emb_ln_gain, emb_ln_bias;
  std::vector<EncoderLayerParams> layers;
};

namespace detail {

inline std::string layer_prefix(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "encoder/layer%02zu/", k);
  return buf;
}

}  // namespace detail

/// Stable name -> tensor listing; the ordering defines checkpoint layout and
/// the optimizer's iteration order.
inline std::vector<std::pair<std::string, Tensor>> named_params(const EncoderParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("encoder/token_emb", p.token_emb);
  out.emplace_back("encoder/pos_emb", p.pos_emb);
  out.emplace_back("encoder/seg_emb", p.seg_emb);
  out.emplace_back("encoder/emb_ln_gain", p.emb_ln_gain);
  out.emplace_back("encoder/emb_ln_bias", p.emb_ln_bias);
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const std::string pre = detail::layer_prefix(k);
    const EncoderLayerParams& l = p.layers[k];
    out.emplace_back(pre + "att_wq", l.att_wq);
    out.emplace_back(pre + "att_bq", l.att_bq);
    out.emplace_back(pre + "att_wk", l.att_wk);
    out.emplace_back(pre + "att_bk", l.att_bk);
    out.emplace_back(pre + "att_wv", l.att_wv);
    out.emplace_back(pre + "att_bv", l.att_bv);
    out.emplace_back(pre + "att_wo", l.att_wo);
    out.emplace_back(pre + "att_bo", l.att_bo);
    out.emplace_back(pre + "ln1_gain", l.ln1_gain);
    out.emplace_back(pre + "ln1_bias", l.ln1_bias);
    out.emplace_back(pre + "ff1_w", l.ff1_w);
    out.emplace_back(pre + "ff1_b", l.ff1_b);
    out.emplace_back(pre + "ff2_w", l.ff2_w);
    out.emplace_back(pre + "ff2_b", l.ff2_b);
    out.emplace_back(pre + "ln2_gain", l.ln2_gain);
    out.emplace_back(pre + "ln2_bias", l.ln2_bias);
  }
  return out;
}

namespace detail {

inline Tensor init_weight(std::vector<std::size_t> shape, Rng& rng, double stddev = 0.02) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (std::size_t i = 0; i < t.size(); ++i)
    t.mutable_data()[i] = rng.truncated_normal(stddev);
  return t;
}

inline Tensor init_zeros(std::vector<std::size_t> shape) {
  return Tensor::zeros(std::move(shape), true);
}

inline Tensor init_ones(std::vector<std::size_t> shape) {
  return Tensor::filled(std::move(shape), 1.0, true);
}

}  // namespace detail

/// Fresh parameters: embeddings and projections from a truncated normal with
/// std 0.02, biases zero, layer-norm gain 1 / bias 0. Deterministic in seed.
inline EncoderParams init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  EncoderParams p;
  const std::size_t h = cfg.hidden, f = cfg.ff_dim;
  p.token_emb = detail::init_weight({cfg.vocab_size, h}, rng);
  p.pos_emb = detail::init_weight({cfg.max_positions, h}, rng);
  p.seg_emb = detail::init_weight({2, h}, rng);
  p.emb_ln_gain = detail::init_ones({h});
  p.emb_ln_bias = detail::init_zeros({h});
  for (std::size_t k = 0; k < cfg.layers; ++k) {
    EncoderLayerParams l;
    l.att_wq = detail::init_weight({h, h}, rng);
    l.att_bq = detail::init_zeros({h});
    l.att_wk = detail::init_weight({h, h}, rng);
    l.att_bk = detail::init_zeros({h});
    l.att_wv = detail::init_weight({h, h}, rng);
    l.att_bv = detail::init_zeros({h});
    l.att_wo = detail::init_weight({h, h}, rng);
    l.att_bo = detail::init_zeros({h});
    l.ln1_gain = detail::init_ones({h});
    l.ln1_bias = detail::init_zeros({h});
    l.ff1_w = detail::init_weight({h, f}, rng);
    l.ff1_b = detail::init_zeros({f});
    l.ff2_w = detail::init_weight({f, h}, rng);
    l.ff2_b = detail::init_zeros({h});
    l.ln2_gain = detail::init_ones({h});
    l.ln2_bias = detail::init_zeros({h});
    p.layers.push_back(std::move(l));
  }
  return p;
}

/// hidden[k] for k = 0 (embedding output) .. L, each len x H; attention[k][a]
/// is the post-softmax len x len matrix of layer k+1, head a. Padding key
/// positions carry exactly zero attention.
struct EncoderOutput {
  std::vector<Tensor> hidden;
  std::vector<std::vector<Tensor>> attention;

  const Tensor& last_hidden() const { return hidden.back(); }
};

struct ForwardOptions {
  // When set and the config's dropout rate is positive, inverted dropout is
  // applied to embeddings, attention probabilities, and sublayer outputs.
  Rng* dropout_rng = nullptr;
};

/// Token + position + segment embedding sum, layer-normed; hidden[0].
inline Tensor embed(const TokenSequence& seq, const EncoderParams& params,
                    const EncoderConfig& cfg) {
  const std::size_t len = seq.ids.size();
  if (len == 0) throw std::invalid_argument("embed: empty sequence");
  if (len > cfg.max_positions) {
    throw std::invalid_argument("embed: sequence length " + std::to_string(len) +
                                " exceeds max positions " + std::to_string(cfg.max_positions));
  }
  std::vector<std::size_t> tok_idx(len), pos_idx(len), seg_idx(len);
  for (std::size_t i = 0; i < len; ++i) {
    if (seq.ids[i] < 0 || static_cast<std::size_t>(seq.ids[i]) >= cfg.vocab_size) {
      throw std::invalid_argument("embed: token id " + std::to_string(seq.ids[i]) +
                                  " out of range for vocab size " +
                                  std::to_string(cfg.vocab_size));
    }
    if (seq.segments[i] < 0 || seq.segments[i] > 1) {
      throw std::invalid_argument("embed: segment id must be 0 or 1");
    }
    tok_idx[i] = static_cast<std::size_t>(seq.ids[i]);
    pos_idx[i] = i;
    seg_idx[i] = static_cast<std::size_t>(seq.segments[i]);
  }
  Tensor x = add(add(gather_rows(params.token_emb, tok_idx), gather_rows(params.pos_emb, pos_idx)),
                 gather_rows(params.seg_emb, seg_idx));
  return layer_norm(x, params.emb_ln_gain, params.emb_ln_bias);
}

/// Full encoder pass: per layer, multi-head self-attention with padding keys
/// masked out pre-softmax, add & norm, gelu feed-forward, add & norm.
inline EncoderOutput encoder_forward(const TokenSequence& seq, const EncoderParams& params,
                                     const EncoderConfig& cfg, ForwardOptions opts = {}) {
  cfg.validate();
  if (params.layers.size() != cfg.layers) {
    throw std::invalid_argument("encoder_forward: params have " +
                                std::to_string(params.layers.size()) + " layers, config wants " +
                                std::to_string(cfg.layers));
  }
  const std::size_t len = seq.ids.size();
  const std::size_t n_heads = cfg.heads;
  const std::size_t dh = cfg.hidden / n_heads;
  const bool training = opts.dropout_rng != nullptr && cfg.dropout > 0.0;
  auto maybe_dropout = [&](const Tensor& t) {
    return training ? dropout(t, cfg.dropout, *opts.dropout_rng) : t;
  };

  // -1e30 on padding keys underflows to exactly zero after softmax.
  Tensor mask_bias = Tensor::zeros({len});
  for (std::size_t j = 0; j < len; ++j)
    mask_bias.mutable_data()[j] = seq.mask[j] == 1 ? 0.0 : -1e30;

  EncoderOutput out;
  out.hidden.push_back(maybe_dropout(embed(seq, params, cfg)));
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (std::size_t k = 0; k < cfg.layers; ++k) {
    const EncoderLayerParams& l = params.layers[k];
    const Tensor& x = out.hidden.back();
    Tensor q = add_rowvec(matmul(x, l.att_wq), l.att_bq);
    Tensor key = add_rowvec(matmul(x, l.att_wk), l.att_bk);
    Tensor v = add_rowvec(matmul(x, l.att_wv), l.att_bv);

    std::vector<Tensor> head_ctx;
    std::vector<Tensor> head_probs;
    for (std::size_t a = 0; a < n_heads; ++a) {
      Tensor qh = slice_cols(q, a * dh, dh);
      Tensor kh = slice_cols(key, a * dh, dh);
      Tensor vh = slice_cols(v, a * dh, dh);
      Tensor scores = add_rowvec(scale(matmul_nt(qh, kh), att_scale), mask_bias);
      Tensor probs = softmax_rows(scores);
      head_probs.push_back(probs);
      head_ctx.push_back(matmul(maybe_dropout(probs), vh));
    }
    out.attention.push_back(std::move(head_probs));

    Tensor att_out = maybe_dropout(add_rowvec(matmul(concat_cols(head_ctx), l.att_wo), l.att_bo));
    Tensor x1 = layer_norm(add(x, att_out), l.ln1_gain, l.ln1_bias);

    Tensor ff = gelu(add_rowvec(matmul(x1, l.ff1_w), l.ff1_b));
    ff = maybe_dropout(add_rowvec(matmul(ff, l.ff2_w), l.ff2_b));
    out.hidden.push_back(layer_norm(add(x1, ff), l.ln2_gain, l.ln2_bias));
  }
  return out;
}

}  // namespace ranklab
