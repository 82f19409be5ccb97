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

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ranklab/checkpoint.hpp"
#include "ranklab/data.hpp"
#include "ranklab/encoder.hpp"
#include "ranklab/tensor.hpp"
#include "ranklab/tokenizer.hpp"

namespace ranklab {

enum class RankerKind { kRep, kLastInt, kMultInt, kTermTrans, kKnrm, kConvKnrm };

inline std::string to_string(RankerKind kind) {
  switch (kind) {
    case RankerKind::kRep: return "rep";
    case RankerKind::kLastInt: return "last_int";
    case RankerKind::kMultInt: return "mult_int";
    case RankerKind::kTermTrans: return "term_trans";
    case RankerKind::kKnrm: return "knrm";
    case RankerKind::kConvKnrm: return "conv_knrm";
  }
  throw std::invalid_argument("unknown RankerKind");
}

inline RankerKind ranker_kind_from_string(const std::string& s) {
  if (s == "rep") return RankerKind::kRep;
  if (s == "last_int") return RankerKind::kLastInt;
  if (s == "mult_int") return RankerKind::kMultInt;
  if (s == "term_trans") return RankerKind::kTermTrans;
  if (s == "knrm") return RankerKind::kKnrm;
  if (s == "conv_knrm") return RankerKind::kConvKnrm;
  throw std::invalid_argument("unknown ranker kind '" + s +
                              "' (expected rep|last_int|mult_int|term_trans|knrm|conv_knrm)");
}

/// Whether the query and document token states entering the translation
/// matrix come from the concatenated qd encoding or from two independent
/// encodings. The source text is ambiguous on this; concatenated is the
/// default because it keeps cross-sequence attention in play.
enum class TermTransMode { kConcat, kSeparate };

/// Gaussian kernel bank for soft-match counting. The standard bank is one
/// exact-match kernel (mu 1, sigma 1e-3) plus evenly spaced soft kernels
/// with sigma 0.1 covering [-1, 1].
struct KernelBank {
  std::vector<double> mu;
  std::vector<double> sigma;

  static KernelBank standard(std::size_t count = 11) {
    if (count < 2) throw std::invalid_argument("KernelBank: need at least 2 kernels");
    KernelBank bank;
    bank.mu.push_back(1.0);
    bank.sigma.push_back(1e-3);
    const std::size_t bins = count - 1;
    for (std::size_t i = 0; i < bins; ++i) {
      bank.mu.push_back(1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(bins));
      bank.sigma.push_back(0.1);
    }
    return bank;
  }

  std::size_t size() const { return mu.size(); }

  void validate() const {
    if (mu.size() != sigma.size() || mu.empty()) {
      throw std::invalid_argument("KernelBank: mu/sigma size mismatch or empty");
    }
    for (double s : sigma) {
      if (!(s > 0.0)) throw std::invalid_argument("KernelBank: sigma must be positive");
    }
  }
};

// Floor inside the log of kernel pooling; keeps far-off-support kernels from
// producing -inf.
inline constexpr double kKernelPoolEps = 1e-10;

/// Per-kernel soft counts of a translation matrix M (query rows, document
/// columns): K_k = sum_i log(max(sum_j exp(-(M_ij - mu_k)^2 / (2 sigma_k^2)), eps)).
inline std::vector<Tensor> kernel_pool_scalars(const Tensor& m, const KernelBank& bank,
                                               double eps = kKernelPoolEps) {
  bank.validate();
  std::vector<Tensor> features;
  features.reserve(bank.size());
  for (std::size_t k = 0; k < bank.size(); ++k) {
    Tensor d = add_scalar(m, -bank.mu[k]);
    Tensor e = exp_t(scale(mul(d, d), -1.0 / (2.0 * bank.sigma[k] * bank.sigma[k])));
    features.push_back(sum_all(log_t(clamp_min(sum_rows(e), eps))));
  }
  return features;
}

inline Tensor kernel_pool(const Tensor& m, const KernelBank& bank, double eps = kKernelPoolEps) {
  return stack_scalars(kernel_pool_scalars(m, bank, eps));
}

// ---------------------------------------------------------------------------
// Head parameters
// ---------------------------------------------------------------------------

struct RepHead {};  // cosine of the two [CLS] vectors; nothing to learn

struct LastIntHead {
  Tensor w;  // [H]
};

struct MultIntHead {
  std::size_t layer_lo = 1;  // 1-based transformer layer, embedding excluded
  std::size_t layer_hi = 1;
  std::vector<Tensor> w;  // one [H] per layer in [lo, hi]
};

struct TermTransHead {
  std::size_t layer_lo = 1;
  std::size_t layer_hi = 1;
  TermTransMode mode = TermTransMode::kConcat;
  std::vector<Tensor> proj;     // one [H x proj_dim] per layer
  std::vector<Tensor> w_trans;  // one scalar per layer
};

struct KnrmHead {
  Tensor emb;  // [V x E] word embeddings
  KernelBank kernels;
  Tensor w_out;  // [K]
  Tensor bias;   // scalar
};

struct ConvKnrmHead {
  Tensor emb;  // [V x E]
  std::size_t max_ngram = 2;
  std::vector<Tensor> conv_w;  // order n: [(n*E) x F]
  std::vector<Tensor> conv_b;  // order n: [F]
  KernelBank kernels;
  Tensor w_out;  // [K * max_ngram^2]
  Tensor bias;   // scalar
};

using HeadParams =
    std::variant<RepHead, LastIntHead, MultIntHead, TermTransHead, KnrmHead, ConvKnrmHead>;

/// Scalar relevance score plus the pieces it was combined from. For the
/// layer-summing heads the parts sum to the final score; for the kernel
/// family the parts are the pooled features feeding tanh(w * phi + b).
struct ScoreBreakdown {
  Tensor score;
  std::vector<std::pair<std::string, double>> parts;

  double value() const { return score.value(); }
};

// ---------------------------------------------------------------------------
// Scorers
// ---------------------------------------------------------------------------

namespace detail {

inline void check_layer_range(std::size_t lo, std::size_t hi, std::size_t layers,
                              std::size_t have, const char* who) {
  if (lo < 1 || hi > layers || lo > hi) {
    throw std::invalid_argument(std::string(who) + ": layer range [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + "] invalid for " +
                                std::to_string(layers) + " layers");
  }
  if (have != hi - lo + 1) {
    throw std::invalid_argument(std::string(who) + ": " + std::to_string(have) +
                                " per-layer parameters for range of " +
                                std::to_string(hi - lo + 1));
  }
}

inline std::string layer_key(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "layer%02zu", k);
  return buf;
}

// Real non-marker positions on one side of an encoded sequence.
inline std::vector<std::size_t> side_positions(const TokenSequence& seq, int segment) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (seq.mask[i] != 1 || seq.segments[i] != segment) continue;
    if (seq.ids[i] == Vocabulary::kCls || seq.ids[i] == Vocabulary::kSep) continue;
    out.push_back(i);
  }
  return out;
}

}  // namespace detail

/// Cosine of the last-layer [CLS] embeddings of independently encoded query
/// and document; always in [-1, 1].
inline ScoreBreakdown score_rep(const TokenSequence& q, const TokenSequence& d,
                                const EncoderParams& enc, const EncoderConfig& cfg,
                                const RepHead& = {}, ForwardOptions fwd = {}) {
  EncoderOutput qo = encoder_forward(q, enc, cfg, fwd);
  EncoderOutput dd = encoder_forward(d, enc, cfg, fwd);
  ScoreBreakdown out;
  out.score = cosine(row_as_vector(qo.last_hidden(), 0), row_as_vector(dd.last_hidden(), 0));
  out.parts.emplace_back("cosine", out.score.value());
  return out;
}

inline ScoreBreakdown score_last_int(const EncoderOutput& qd, const LastIntHead& head) {
  ScoreBreakdown out;
  out.score = dot(head.w, row_as_vector(qd.last_hidden(), 0));
  out.parts.emplace_back("w_cls", out.score.value());
  return out;
}

inline ScoreBreakdown score_last_int(const TokenSequence& qd, const EncoderParams& enc,
                                     const EncoderConfig& cfg, const LastIntHead& head,
                                     ForwardOptions fwd = {}) {
  return score_last_int(encoder_forward(qd, enc, cfg, fwd), head);
}

/// Sum over the selected layers of w_mult[k] . hidden[k][CLS].
inline ScoreBreakdown score_mult_int(const EncoderOutput& qd, const MultIntHead& head) {
  detail::check_layer_range(head.layer_lo, head.layer_hi, qd.hidden.size() - 1, head.w.size(),
                            "score_mult_int");
  ScoreBreakdown out;
  out.score = Tensor::scalar(0.0);
  for (std::size_t k = head.layer_lo; k <= head.layer_hi; ++k) {
    Tensor term = dot(head.w[k - head.layer_lo], row_as_vector(qd.hidden[k], 0));
    out.parts.emplace_back(detail::layer_key(k), term.value());
    out.score = add(out.score, term);
  }
  return out;
}

inline ScoreBreakdown score_mult_int(const TokenSequence& qd, const EncoderParams& enc,
                                     const EncoderConfig& cfg, const MultIntHead& head,
                                     ForwardOptions fwd = {}) {
  return score_mult_int(encoder_forward(qd, enc, cfg, fwd), head);
}

/// One layer's translation-matrix mean: project both sides, relu, all-pairs
/// cosine, mean over pairs. Values land in [0, 1] because relu output is
/// nonnegative and zero-norm rows contribute cosine 0.
inline Tensor term_trans_layer_mean(const Tensor& q_states, const Tensor& d_states,
                                    const Tensor& proj) {
  Tensor qp = normalize_rows(relu(matmul(q_states, proj)));
  Tensor dp = normalize_rows(relu(matmul(d_states, proj)));
  return mean_all(matmul_nt(qp, dp));
}

namespace detail {

inline ScoreBreakdown score_term_trans_impl(const std::vector<Tensor>& hidden_q,
                                            const std::vector<Tensor>& hidden_d,
                                            const std::vector<std::size_t>& q_pos,
                                            const std::vector<std::size_t>& d_pos,
                                            const TermTransHead& head, WarningSink warnings) {
  check_layer_range(head.layer_lo, head.layer_hi, hidden_q.size() - 1, head.proj.size(),
                    "score_term_trans");
  if (head.w_trans.size() != head.proj.size()) {
    throw std::invalid_argument("score_term_trans: w_trans/proj count mismatch");
  }
  ScoreBreakdown out;
  if (q_pos.empty() || d_pos.empty()) {
    warn(warnings, "term_trans: empty " + std::string(q_pos.empty() ? "query" : "document") +
                       " side after marker exclusion, score 0");
    out.score = Tensor::scalar(0.0);
    return out;
  }
  out.score = Tensor::scalar(0.0);
  for (std::size_t k = head.layer_lo; k <= head.layer_hi; ++k) {
    const std::size_t i = k - head.layer_lo;
    Tensor sk = term_trans_layer_mean(gather_rows(hidden_q[k], q_pos),
                                      gather_rows(hidden_d[k], d_pos), head.proj[i]);
    Tensor term = mul(head.w_trans[i], sk);
    out.parts.emplace_back(layer_key(k), term.value());
    out.score = add(out.score, term);
  }
  return out;
}

}  // namespace detail

/// Translation-matrix head on the concatenated qd encoding: token states are
/// picked out by segment id, markers excluded.
inline ScoreBreakdown score_term_trans(const EncoderOutput& qd, const TokenSequence& seq,
                                       const TermTransHead& head, WarningSink warnings = nullptr) {
  return detail::score_term_trans_impl(qd.hidden, qd.hidden, detail::side_positions(seq, 0),
                                       detail::side_positions(seq, 1), head, warnings);
}

inline ScoreBreakdown score_term_trans(const TokenSequence& qd, const EncoderParams& enc,
                                       const EncoderConfig& cfg, const TermTransHead& head,
                                       WarningSink warnings = nullptr, ForwardOptions fwd = {}) {
  return score_term_trans(encoder_forward(qd, enc, cfg, fwd), qd, head, warnings);
}

/// Separate-encoding variant: query and document each encoded alone.
inline ScoreBreakdown score_term_trans_separate(const TokenSequence& q, const TokenSequence& d,
                                                const EncoderParams& enc,
                                                const EncoderConfig& cfg,
                                                const TermTransHead& head,
                                                WarningSink warnings = nullptr,
                                                ForwardOptions fwd = {}) {
  EncoderOutput qo = encoder_forward(q, enc, cfg, fwd);
  EncoderOutput dd = encoder_forward(d, enc, cfg, fwd);
  return detail::score_term_trans_impl(qo.hidden, dd.hidden, detail::side_positions(q, 0),
                                       detail::side_positions(d, 0), head, warnings);
}

/// Kernel-pooled soft matches over the embedding cosine translation matrix,
/// combined by tanh(w . phi + b). An empty side contributes zero features.
inline ScoreBreakdown knrm_score(const std::vector<std::size_t>& q_ids,
                                 const std::vector<std::size_t>& d_ids, const KnrmHead& head) {
  Tensor phi;
  if (q_ids.empty() || d_ids.empty()) {
    phi = Tensor::zeros({head.kernels.size()});
  } else {
    Tensor qe = normalize_rows(gather_rows(head.emb, q_ids));
    Tensor de = normalize_rows(gather_rows(head.emb, d_ids));
    phi = kernel_pool(matmul_nt(qe, de), head.kernels);
  }
  ScoreBreakdown out;
  out.score = tanh_t(add(dot(head.w_out, phi), head.bias));
  for (std::size_t k = 0; k < head.kernels.size(); ++k) {
    char name[16];
    std::snprintf(name, sizeof(name), "k%02zu", k);
    out.parts.emplace_back(name, phi.at(k));
  }
  return out;
}

namespace detail {

// n-gram representations by 1-D convolution: row i is the linear map of the
// concatenated embeddings of tokens i..i+n-1. No activation: an identity
// filter must reproduce the unigram embeddings exactly.
inline std::optional<Tensor> ngram_features(const Tensor& emb_rows, const Tensor& conv_w,
                                            const Tensor& conv_b, std::size_t n) {
  const std::size_t len = emb_rows.rows();
  if (len < n) return std::nullopt;
  const std::size_t m = len - n + 1;
  std::vector<Tensor> shifted;
  shifted.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i + s;
    shifted.push_back(gather_rows(emb_rows, idx));
  }
  return add_rowvec(matmul(concat_cols(shifted), conv_w), conv_b);
}

}  // namespace detail

/// N-gram extension: kernel pooling over every (query n-gram order, document
/// n-gram order) cross-match matrix, features concatenated into one linear
/// layer. Sides shorter than an order contribute zero features there.
inline ScoreBreakdown conv_knrm_score(const std::vector<std::size_t>& q_ids,
                                      const std::vector<std::size_t>& d_ids,
                                      const ConvKnrmHead& head) {
  if (head.conv_w.size() != head.max_ngram || head.conv_b.size() != head.max_ngram) {
    throw std::invalid_argument("conv_knrm_score: filters for " +
                                std::to_string(head.conv_w.size()) + " orders, max_ngram " +
                                std::to_string(head.max_ngram));
  }
  const std::size_t n_kernels = head.kernels.size();
  std::vector<std::optional<Tensor>> q_grams(head.max_ngram), d_grams(head.max_ngram);
  if (!q_ids.empty()) {
    Tensor qe = gather_rows(head.emb, q_ids);
    for (std::size_t n = 1; n <= head.max_ngram; ++n)
      q_grams[n - 1] = detail::ngram_features(qe, head.conv_w[n - 1], head.conv_b[n - 1], n);
  }
  if (!d_ids.empty()) {
    Tensor de = gather_rows(head.emb, d_ids);
    for (std::size_t n = 1; n <= head.max_ngram; ++n)
      d_grams[n - 1] = detail::ngram_features(de, head.conv_w[n - 1], head.conv_b[n - 1], n);
  }
  ScoreBreakdown out;
  std::vector<Tensor> feature_scalars;
  for (std::size_t a = 0; a < head.max_ngram; ++a) {
    for (std::size_t b = 0; b < head.max_ngram; ++b) {
      std::vector<Tensor> block;
      if (q_grams[a] && d_grams[b]) {
        Tensor m = matmul_nt(normalize_rows(*q_grams[a]), normalize_rows(*d_grams[b]));
        block = kernel_pool_scalars(m, head.kernels);
      } else {
        block.assign(n_kernels, Tensor::scalar(0.0));
      }
      for (std::size_t k = 0; k < n_kernels; ++k) {
        char name[24];
        std::snprintf(name, sizeof(name), "q%zud%zu/k%02zu", a + 1, b + 1, k);
        out.parts.emplace_back(name, block[k].value());
        feature_scalars.push_back(block[k]);
      }
    }
  }
  Tensor phi = stack_scalars(feature_scalars);
  if (head.w_out.size() != phi.size()) {
    throw std::invalid_argument("conv_knrm_score: w_out length " +
                                std::to_string(head.w_out.size()) + " != feature count " +
                                std::to_string(phi.size()));
  }
  out.score = tanh_t(add(dot(head.w_out, phi), head.bias));
  return out;
}

// ---------------------------------------------------------------------------
// Model bundle
// ---------------------------------------------------------------------------

/// Head construction knobs; zeros mean "derive from the encoder config".
struct HeadConfig {
  std::size_t layer_lo = 1;
  std::size_t layer_hi = 0;  // 0 -> last layer
  std::size_t proj_dim = 0;  // 0 -> hidden size
  TermTransMode term_trans_mode = TermTransMode::kConcat;
  std::size_t embed_dim = 64;
  std::size_t filters = 128;
  std::size_t max_ngram = 2;
  KernelBank kernels = KernelBank::standard();
};

/// A scorer with everything needed to go from raw text to a score: the
/// vocabulary, the encoder (when the kind uses one), and head parameters.
struct RankerModel {
  RankerKind kind = RankerKind::kLastInt;
  Vocabulary vocab;
  EncoderConfig enc_cfg;
  EncoderParams encoder;
  HeadParams head;
  HeadConfig head_cfg;
  std::size_t max_len = 128;

  bool uses_encoder() const {
    return kind != RankerKind::kKnrm && kind != RankerKind::kConvKnrm;
  }
};

inline RankerModel init_ranker(RankerKind kind, const Vocabulary& vocab, EncoderConfig enc_cfg,
                               HeadConfig hc, std::uint64_t seed, std::size_t max_len = 128) {
  RankerModel model;
  model.kind = kind;
  model.vocab = vocab;
  model.max_len = max_len;
  enc_cfg.vocab_size = vocab.size();
  Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
  if (kind == RankerKind::kKnrm || kind == RankerKind::kConvKnrm) {
    hc.kernels.validate();
    if (kind == RankerKind::kKnrm) {
      KnrmHead head;
      head.emb = detail::init_weight({vocab.size(), hc.embed_dim}, rng);
      head.kernels = hc.kernels;
      head.w_out = detail::init_weight({hc.kernels.size()}, rng, 0.1);
      head.bias = Tensor::zeros({1}, true);
      model.head = std::move(head);
    } else {
      ConvKnrmHead head;
      head.emb = detail::init_weight({vocab.size(), hc.embed_dim}, rng);
      head.max_ngram = hc.max_ngram;
      for (std::size_t n = 1; n <= hc.max_ngram; ++n) {
        head.conv_w.push_back(detail::init_weight({n * hc.embed_dim, hc.filters}, rng));
        head.conv_b.push_back(Tensor::zeros({hc.filters}, true));
      }
      head.kernels = hc.kernels;
      head.w_out =
          detail::init_weight({hc.kernels.size() * hc.max_ngram * hc.max_ngram}, rng, 0.1);
      head.bias = Tensor::zeros({1}, true);
      model.head = std::move(head);
    }
    model.enc_cfg = enc_cfg;
    model.head_cfg = hc;
    return model;
  }

  model.enc_cfg = enc_cfg;
  model.encoder = init_params(enc_cfg, seed);
  if (hc.layer_hi == 0) hc.layer_hi = enc_cfg.layers;
  if (hc.proj_dim == 0) hc.proj_dim = enc_cfg.hidden;
  model.head_cfg = hc;
  switch (kind) {
    case RankerKind::kRep:
      model.head = RepHead{};
      break;
    case RankerKind::kLastInt: {
      LastIntHead head;
      head.w = detail::init_weight({enc_cfg.hidden}, rng);
      model.head = std::move(head);
      break;
    }
    case RankerKind::kMultInt: {
      MultIntHead head;
      head.layer_lo = hc.layer_lo;
      head.layer_hi = hc.layer_hi;
      for (std::size_t k = hc.layer_lo; k <= hc.layer_hi; ++k)
        head.w.push_back(detail::init_weight({enc_cfg.hidden}, rng));
      model.head = std::move(head);
      break;
    }
    case RankerKind::kTermTrans: {
      TermTransHead head;
      head.layer_lo = hc.layer_lo;
      head.layer_hi = hc.layer_hi;
      head.mode = hc.term_trans_mode;
      for (std::size_t k = hc.layer_lo; k <= hc.layer_hi; ++k) {
        head.proj.push_back(detail::init_weight({enc_cfg.hidden, hc.proj_dim}, rng));
        head.w_trans.push_back(detail::init_weight({1}, rng, 0.1));
      }
      model.head = std::move(head);
      break;
    }
    default:
      throw std::invalid_argument("init_ranker: unhandled kind");
  }
  return model;
}

inline std::vector<std::pair<std::string, Tensor>> named_params(const RankerModel& model) {
  std::vector<std::pair<std::string, Tensor>> out;
  if (model.uses_encoder()) out = named_params(model.encoder);
  std::visit(
      [&out](const auto& head) {
        using T = std::decay_t<decltype(head)>;
        if constexpr (std::is_same_v<T, RepHead>) {
          // no head parameters
        } else if constexpr (std::is_same_v<T, LastIntHead>) {
          out.emplace_back("head/w", head.w);
        } else if constexpr (std::is_same_v<T, MultIntHead>) {
          for (std::size_t k = head.layer_lo; k <= head.layer_hi; ++k) {
            char name[32];
            std::snprintf(name, sizeof(name), "head/w_mult%02zu", k);
            out.emplace_back(name, head.w[k - head.layer_lo]);
          }
        } else if constexpr (std::is_same_v<T, TermTransHead>) {
          for (std::size_t k = head.layer_lo; k <= head.layer_hi; ++k) {
            char name[32];
            std::snprintf(name, sizeof(name), "head/proj%02zu", k);
            out.emplace_back(name, head.proj[k - head.layer_lo]);
            std::snprintf(name, sizeof(name), "head/w_trans%02zu", k);
            out.emplace_back(name, head.w_trans[k - head.layer_lo]);
          }
        } else if constexpr (std::is_same_v<T, KnrmHead>) {
          out.emplace_back("head/emb", head.emb);
          out.emplace_back("head/w_out", head.w_out);
          out.emplace_back("head/bias", head.bias);
        } else if constexpr (std::is_same_v<T, ConvKnrmHead>) {
          out.emplace_back("head/emb", head.emb);
          for (std::size_t n = 1; n <= head.max_ngram; ++n) {
            char name[32];
            std::snprintf(name, sizeof(name), "head/conv_w%zu", n);
            out.emplace_back(name, head.conv_w[n - 1]);
            std::snprintf(name, sizeof(name), "head/conv_b%zu", n);
            out.emplace_back(name, head.conv_b[n - 1]);
          }
          out.emplace_back("head/w_out", head.w_out);
          out.emplace_back("head/bias", head.bias);
        }
      },
      model.head);
  return out;
}

namespace detail {

inline std::vector<std::size_t> token_ids_for_embedding(const RankerModel& model,
                                                        const std::vector<std::string>& tokens) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(static_cast<std::size_t>(model.vocab.id(t)));
  return ids;
}

}  // namespace detail

/// One entry point for every scorer: takes raw word tokens, builds whatever
/// encoding the kind needs, and returns the score with its breakdown.
inline ScoreBreakdown score_pair(const RankerModel& model, const std::vector<std::string>& q_tokens,
                                 const std::vector<std::string>& d_tokens,
                                 WarningSink warnings = nullptr, EncodeOptions encode_opts = {},
                                 ForwardOptions fwd = {}) {
  switch (model.kind) {
    case RankerKind::kRep: {
      TokenSequence q = encode_single(q_tokens, model.vocab, model.max_len, encode_opts);
      TokenSequence d = encode_single(d_tokens, model.vocab, model.max_len, encode_opts);
      return score_rep(q, d, model.encoder, model.enc_cfg, {}, fwd);
    }
    case RankerKind::kLastInt: {
      TokenSequence qd = encode_pair(q_tokens, d_tokens, model.vocab, model.max_len, encode_opts);
      return score_last_int(qd, model.encoder, model.enc_cfg, std::get<LastIntHead>(model.head),
                            fwd);
    }
    case RankerKind::kMultInt: {
      TokenSequence qd = encode_pair(q_tokens, d_tokens, model.vocab, model.max_len, encode_opts);
      return score_mult_int(qd, model.encoder, model.enc_cfg, std::get<MultIntHead>(model.head),
                            fwd);
    }
    case RankerKind::kTermTrans: {
      const auto& head = std::get<TermTransHead>(model.head);
      if (head.mode == TermTransMode::kSeparate) {
        TokenSequence q = encode_single(q_tokens, model.vocab, model.max_len, encode_opts);
        TokenSequence d = encode_single(d_tokens, model.vocab, model.max_len, encode_opts);
        return score_term_trans_separate(q, d, model.encoder, model.enc_cfg, head, warnings, fwd);
      }
      TokenSequence qd = encode_pair(q_tokens, d_tokens, model.vocab, model.max_len, encode_opts);
      return score_term_trans(qd, model.encoder, model.enc_cfg, head, warnings, fwd);
    }
    case RankerKind::kKnrm:
      return knrm_score(detail::token_ids_for_embedding(model, q_tokens),
                        detail::token_ids_for_embedding(model, d_tokens),
                        std::get<KnrmHead>(model.head));
    case RankerKind::kConvKnrm:
      return conv_knrm_score(detail::token_ids_for_embedding(model, q_tokens),
                             detail::token_ids_for_embedding(model, d_tokens),
                             std::get<ConvKnrmHead>(model.head));
  }
  throw std::invalid_argument("score_pair: unhandled kind");
}

// ---------------------------------------------------------------------------
// Checkpoint round trip
// ---------------------------------------------------------------------------

namespace detail {

inline void put_encoder_config(Checkpoint& cp, const EncoderConfig& cfg) {
  cp.config["encoder.layers"] = std::to_string(cfg.layers);
  cp.config["encoder.hidden"] = std::to_string(cfg.hidden);
  cp.config["encoder.heads"] = std::to_string(cfg.heads);
  cp.config["encoder.ff_dim"] = std::to_string(cfg.ff_dim);
  cp.config["encoder.max_positions"] = std::to_string(cfg.max_positions);
  cp.config["encoder.vocab_size"] = std::to_string(cfg.vocab_size);
  cp.config["encoder.dropout"] = format_double(cfg.dropout);
}

inline EncoderConfig encoder_config_from(const Checkpoint& cp) {
  EncoderConfig cfg;
  cfg.layers = parse_long(cp.config_value("encoder.layers"), "layers");
  cfg.hidden = parse_long(cp.config_value("encoder.hidden"), "hidden");
  cfg.heads = parse_long(cp.config_value("encoder.heads"), "heads");
  cfg.ff_dim = parse_long(cp.config_value("encoder.ff_dim"), "ff_dim");
  cfg.max_positions = parse_long(cp.config_value("encoder.max_positions"), "max_positions");
  cfg.vocab_size = parse_long(cp.config_value("encoder.vocab_size"), "vocab_size");
  cfg.dropout = parse_double(cp.config_value("encoder.dropout"), "dropout");
  return cfg;
}

inline Tensor grab_trainable(const Checkpoint& cp, const std::string& name) {
  Tensor t = cp.tensor(name);
  t.set_requires_grad(true);
  return t;
}

inline EncoderParams encoder_params_from(const Checkpoint& cp, std::size_t layers) {
  EncoderParams p;
  p.token_emb = grab_trainable(cp, "encoder/token_emb");
  p.pos_emb = grab_trainable(cp, "encoder/pos_emb");
  p.seg_emb = grab_trainable(cp, "encoder/seg_emb");
  p.emb_ln_gain = grab_trainable(cp, "encoder/emb_ln_gain");
  p.emb_ln_bias = grab_trainable(cp, "encoder/emb_ln_bias");
  for (std::size_t k = 0; k < layers; ++k) {
    const std::string pre = layer_prefix(k);
    EncoderLayerParams l;
    l.att_wq = grab_trainable(cp, pre + "att_wq");
    l.att_bq = grab_trainable(cp, pre + "att_bq");
    l.att_wk = grab_trainable(cp, pre + "att_wk");
    l.att_bk = grab_trainable(cp, pre + "att_bk");
    l.att_wv = grab_trainable(cp, pre + "att_wv");
    l.att_bv = grab_trainable(cp, pre + "att_bv");
    l.att_wo = grab_trainable(cp, pre + "att_wo");
    l.att_bo = grab_trainable(cp, pre + "att_bo");
    l.ln1_gain = grab_trainable(cp, pre + "ln1_gain");
    l.ln1_bias = grab_trainable(cp, pre + "ln1_bias");
    l.ff1_w = grab_trainable(cp, pre + "ff1_w");
    l.ff1_b = grab_trainable(cp, pre + "ff1_b");
    l.ff2_w = grab_trainable(cp, pre + "ff2_w");
    l.ff2_b = grab_trainable(cp, pre + "ff2_b");
    l.ln2_gain = grab_trainable(cp, pre + "ln2_gain");
    l.ln2_bias = grab_trainable(cp, pre + "ln2_bias");
    p.layers.push_back(std::move(l));
  }
  return p;
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

inline std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, "kernel list"));
  return out;
}

}  // namespace detail

inline Checkpoint to_checkpoint(const RankerModel& model) {
  Checkpoint cp;
  cp.config["format"] = "1";
  cp.config["kind"] = to_string(model.kind);
  cp.config["max_len"] = std::to_string(model.max_len);
  cp.config["vocab"] = model.vocab.to_text();
  if (model.uses_encoder()) detail::put_encoder_config(cp, model.enc_cfg);
  cp.config["head.layer_lo"] = std::to_string(model.head_cfg.layer_lo);
  cp.config["head.layer_hi"] = std::to_string(model.head_cfg.layer_hi);
  cp.config["head.proj_dim"] = std::to_string(model.head_cfg.proj_dim);
  cp.config["head.term_trans_mode"] =
      model.head_cfg.term_trans_mode == TermTransMode::kConcat ? "concat" : "separate";
  cp.config["head.embed_dim"] = std::to_string(model.head_cfg.embed_dim);
  cp.config["head.filters"] = std::to_string(model.head_cfg.filters);
  cp.config["head.max_ngram"] = std::to_string(model.head_cfg.max_ngram);
  cp.config["head.kernel_mu"] = detail::join_doubles(model.head_cfg.kernels.mu);
  cp.config["head.kernel_sigma"] = detail::join_doubles(model.head_cfg.kernels.sigma);
  for (const auto& [name, t] : named_params(model)) cp.put(name, t);
  return cp;
}

inline RankerModel from_checkpoint(const Checkpoint& cp) {
  RankerModel model;
  model.kind = ranker_kind_from_string(cp.config_value("kind"));
  model.max_len = static_cast<std::size_t>(parse_long(cp.config_value("max_len"), "max_len"));
  model.vocab = Vocabulary::from_text(cp.config_value("vocab"));
  HeadConfig hc;
  hc.layer_lo = parse_long(cp.config_value("head.layer_lo"), "layer_lo");
  hc.layer_hi = parse_long(cp.config_value("head.layer_hi"), "layer_hi");
  hc.proj_dim = parse_long(cp.config_value("head.proj_dim"), "proj_dim");
  hc.term_trans_mode = cp.config_value("head.term_trans_mode") == "separate"
                           ? TermTransMode::kSeparate
                           : TermTransMode::kConcat;
  hc.embed_dim = parse_long(cp.config_value("head.embed_dim"), "embed_dim");
  hc.filters = parse_long(cp.config_value("head.filters"), "filters");
  hc.max_ngram = parse_long(cp.config_value("head.max_ngram"), "max_ngram");
  hc.kernels.mu = detail::split_doubles(cp.config_value("head.kernel_mu"));
  hc.kernels.sigma = detail::split_doubles(cp.config_value("head.kernel_sigma"));
  model.head_cfg = hc;

  auto grab = [&cp](const std::string& name) { return detail::grab_trainable(cp, name); };

  if (model.kind == RankerKind::kKnrm) {
    KnrmHead head;
    head.emb = grab("head/emb");
    head.kernels = hc.kernels;
    head.w_out = grab("head/w_out");
    head.bias = grab("head/bias");
    model.head = std::move(head);
    return model;
  }
  if (model.kind == RankerKind::kConvKnrm) {
    ConvKnrmHead head;
    head.emb = grab("head/emb");
    head.max_ngram = hc.max_ngram;
    for (std::size_t n = 1; n <= hc.max_ngram; ++n) {
      char name[32];
      std::snprintf(name, sizeof(name), "head/conv_w%zu", n);
      head.conv_w.push_back(grab(name));
      std::snprintf(name, sizeof(name), "head/conv_b%zu", n);
      head.conv_b.push_back(grab(name));
    }
    head.kernels = hc.kernels;
    head.w_out = grab("head/w_out");
    head.bias = grab("head/bias");
    model.head = std::move(head);
    return model;
  }

  model.enc_cfg = detail::encoder_config_from(cp);
  model.encoder = detail::encoder_params_from(cp, model.enc_cfg.layers);

  switch (model.kind) {
    case RankerKind::kRep:
      model.head = RepHead{};
      break;
    case RankerKind::kLastInt: {
      LastIntHead head;
      head.w = grab("head/w");
      model.head = std::move(head);
      break;
    }
    case RankerKind::kMultInt: {
      MultIntHead head;
      head.layer_lo = hc.layer_lo;
      head.layer_hi = hc.layer_hi;
      for (std::size_t k = hc.layer_lo; k <= hc.layer_hi; ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "head/w_mult%02zu", k);
        head.w.push_back(grab(name));
      }
      model.head = std::move(head);
      break;
    }
    case RankerKind::kTermTrans: {
      TermTransHead head;
      head.layer_lo = hc.layer_lo;
      head.layer_hi = hc.layer_hi;
      head.mode = hc.term_trans_mode;
      for (std::size_t k = hc.layer_lo; k <= hc.layer_hi; ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "head/proj%02zu", k);
        head.proj.push_back(grab(name));
        std::snprintf(name, sizeof(name), "head/w_trans%02zu", k);
        head.w_trans.push_back(grab(name));
      }
      model.head = std::move(head);
      break;
    }
    default:
      break;
  }
  return model;
}

inline void save_ranker(const RankerModel& model, const std::string& path) {
  to_checkpoint(model).save(path);
}

inline RankerModel load_ranker(const std::string& path) {
  return from_checkpoint(Checkpoint::load(path));
}

}  // namespace ranklab
