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
#include <map>
#include <string>
#include <vector>

#include "ranklab/checkpoint.hpp"
#include "ranklab/data.hpp"
#include "ranklab/encoder.hpp"
#include "ranklab/rankers.hpp"
#include "ranklab/tensor.hpp"
#include "ranklab/tokenizer.hpp"

namespace ranklab {

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class LossKind { kClassification, kPairwise };

/// The paper family names "classification loss" without fixing the link; the
/// sigmoid form is the default and the two-way softmax over logits (s, 0) is
/// available behind this switch. For a scalar score they coincide.
enum class ClassificationLink { kSigmoid, kSoftmax2 };

inline Tensor classification_loss(const Tensor& score, double label,
                                  ClassificationLink link = ClassificationLink::kSigmoid) {
  if (label != 0.0 && label != 1.0) {
    throw std::invalid_argument("classification_loss: label must be 0 or 1");
  }
  if (link == ClassificationLink::kSigmoid) {
    return bce_with_logits(score, label);
  }
  Tensor logits = as_row(stack_scalars({score, Tensor::scalar(0.0)}));
  return softmax_cross_entropy_rows(logits, {label == 1.0 ? 0ul : 1ul});
}

/// Hinge on the score gap: max(0, margin - (s_pos - s_neg)).
inline Tensor pairwise_loss(const Tensor& score_pos, const Tensor& score_neg, double margin) {
  if (margin < 0.0) throw std::invalid_argument("pairwise_loss: margin must be >= 0");
  return relu(add_scalar(sub(score_neg, score_pos), margin));
}

// ---------------------------------------------------------------------------
// Pretraining batches
// ---------------------------------------------------------------------------

/// Masked sequences with their mask positions and original ids, plus
/// sentence-pair adjacency labels when built by next_seq_batch.
struct PretrainBatch {
  std::vector<TokenSequence> sequences;
  std::vector<std::vector<std::size_t>> mask_positions;
  std::vector<std::vector<std::size_t>> original_ids;
  std::vector<int> next_labels;  // -1 when adjacency does not apply
};

/// Masks real non-marker positions at the given rate: 80% [MASK], 10% a
/// random non-reserved token, 10% unchanged. Deterministic in the seed.
inline PretrainBatch mask_lm_batch(const std::vector<TokenSequence>& sequences,
                                   const Vocabulary& vocab, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("mask_lm_batch: rate must be in [0, 1)");
  }
  Rng rng(seed);
  PretrainBatch batch;
  batch.next_labels.assign(sequences.size(), -1);
  for (const TokenSequence& src : sequences) {
    TokenSequence seq = src;
    std::vector<std::size_t> positions;
    std::vector<std::size_t> originals;
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
      if (seq.mask[i] != 1) continue;
      const int id = seq.ids[i];
      if (id == Vocabulary::kCls || id == Vocabulary::kSep || id == Vocabulary::kPad) continue;
      if (!rng.bernoulli(rate)) continue;
      positions.push_back(i);
      originals.push_back(static_cast<std::size_t>(id));
      const double r = rng.uniform();
      if (r < 0.8) {
        seq.ids[i] = Vocabulary::kMask;
      } else if (r < 0.9 && vocab.size() > Vocabulary::kReservedCount) {
        seq.ids[i] = Vocabulary::kReservedCount +
                     static_cast<int>(rng.uniform_int(vocab.size() - Vocabulary::kReservedCount));
      }  // else keep the original token
    }
    batch.sequences.push_back(std::move(seq));
    batch.mask_positions.push_back(std::move(positions));
    batch.original_ids.push_back(std::move(originals));
  }
  return batch;
}

/// Adjacency batch over an ordered passage list: half adjacent pairs
/// (label 1), half random non-adjacent pairs (label 0), laid out by
/// encode_pair.
inline PretrainBatch next_seq_batch(const std::vector<std::string>& passages,
                                    const Vocabulary& vocab, std::size_t max_len,
                                    std::size_t count, std::uint64_t seed) {
  if (passages.size() < 2) {
    throw std::invalid_argument("next_seq_batch: need at least 2 passages, got " +
                                std::to_string(passages.size()));
  }
  Rng rng(seed);
  PretrainBatch batch;
  for (std::size_t s = 0; s < count; ++s) {
    const bool adjacent = rng.bernoulli(0.5);
    const std::size_t i = rng.uniform_int(passages.size() - 1);
    std::size_t j;
    if (adjacent) {
      j = i + 1;
    } else {
      do {
        j = rng.uniform_int(passages.size());
      } while (j == i + 1 || j == i);
    }
    batch.sequences.push_back(
        encode_pair(tokenize(passages[i]), tokenize(passages[j]), vocab, max_len));
    batch.mask_positions.emplace_back();
    batch.original_ids.emplace_back();
    batch.next_labels.push_back(adjacent ? 1 : 0);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Bias-corrected Adam with optional per-name-prefix learning-rate
/// overrides (the Term-Trans head trains its projection layer faster).
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::pair<std::string, double>> lr_overrides;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;

  double lr_for(const std::string& name) const {
    for (const auto& [prefix, rate] : lr_overrides) {
      if (name.rfind(prefix, 0) == 0) return rate;
    }
    return lr;
  }
};

inline void adam_step(const std::vector<std::pair<std::string, Tensor>>& params,
                      AdamState& state) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, param] : params) {
    Tensor p = param;
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(p.size(), 0.0);
    if (v.empty()) v.assign(p.size(), 0.0);
    if (m.size() != p.size()) {
      throw std::invalid_argument("adam_step: state shape mismatch for '" + name + "'");
    }
    const std::vector<double>* grad = p.has_grad() ? &p.grad() : nullptr;
    const double rate = state.lr_for(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grad ? (*grad)[i] : 0.0;
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.mutable_data()[i] -= rate * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

inline void zero_grads(const std::vector<std::pair<std::string, Tensor>>& params) {
  for (const auto& [name, p] : params) {
    Tensor t = p;
    t.zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Fine-tuning
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-3;        // desk-scale default; 3e-6 is the paper-fidelity value
  double proj_lr = 0.002;  // Term-Trans projection layer
  std::size_t batch_size = 8;
  std::size_t max_steps = 1000;
  std::size_t val_interval = 100;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kClassification;
  ClassificationLink link = ClassificationLink::kSigmoid;
  double margin = 1.0;

  void validate() const {
    if (!(lr > 0.0) || !(proj_lr > 0.0)) {
      throw std::invalid_argument("TrainConfig: learning rates must be positive");
    }
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (batch_size < 1 || max_steps < 1 || val_interval < 1) {
      throw std::invalid_argument("TrainConfig: batch_size/max_steps/val_interval must be >= 1");
    }
  }
};

struct TrainLogEntry {
  std::size_t step;
  std::string split;  // "train" or "val"
  double loss;
};

using TrainLog = std::vector<TrainLogEntry>;

inline void write_train_log(std::ostream& os, const TrainLog& log) {
  os << "step,split,loss\n";
  for (const TrainLogEntry& e : log) {
    os << e.step << ',' << e.split << ',' << format_double(e.loss) << '\n';
  }
}

/// A validation example: tokenized query/document with a binary label.
struct LabeledPair {
  std::vector<std::string> q;
  std::vector<std::string> d;
  double label = 0.0;
};

struct TrainResult {
  TrainLog log;
  std::size_t best_step = 0;
  double best_val = 0.0;
  std::size_t steps_run = 0;
};

namespace detail {

inline double validation_loss(const RankerModel& model, const std::vector<LabeledPair>& dev,
                              ClassificationLink link) {
  if (dev.empty()) return 0.0;
  double total = 0.0;
  for (const LabeledPair& ex : dev) {
    total += classification_loss(score_pair(model, ex.q, ex.d).score, ex.label, link).value();
  }
  return total / static_cast<double>(dev.size());
}

inline void restore_params(RankerModel& model, const Checkpoint& snapshot) {
  for (auto& [name, t] : named_params(model)) {
    Tensor dst = t;
    dst.mutable_data() = snapshot.tensor(name).data();
  }
}

}  // namespace detail

/// Mini-batch fine-tuning with Adam: iterates random triples, evaluates the
/// validation loss every val_interval steps, stops after `patience`
/// non-improving evaluations or max_steps, and leaves the best-validation
/// parameters in the model. Aborts with the step number on a NaN loss.
inline TrainResult train(RankerModel& model, const std::vector<TripleRecord>& triples,
                         const std::vector<LabeledPair>& dev, const TrainConfig& cfg) {
  cfg.validate();
  if (triples.empty()) throw std::invalid_argument("train: no training triples");
  Rng rng(cfg.seed);
  Rng dropout_rng(cfg.seed ^ 0x5DEECE66Dull);
  ForwardOptions fwd;
  if (model.uses_encoder() && model.enc_cfg.dropout > 0.0) fwd.dropout_rng = &dropout_rng;
  auto params = named_params(model);
  AdamState adam;
  adam.lr = cfg.lr;
  if (model.kind == RankerKind::kTermTrans) {
    adam.lr_overrides.emplace_back("head/proj", cfg.proj_lr);
    adam.lr_overrides.emplace_back("head/w_trans", cfg.proj_lr);
  }
  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  Checkpoint best_snapshot;
  std::size_t bad_evals = 0;

  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    GradTape tape;
    Tensor loss = Tensor::scalar(0.0);
    std::size_t n_terms = 0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const TripleRecord& triple = triples[rng.uniform_int(triples.size())];
      const auto q = tokenize(triple.query);
      const auto pos = tokenize(triple.positive);
      const auto neg = tokenize(triple.negative);
      if (cfg.loss == LossKind::kClassification) {
        loss = add(loss,
                   classification_loss(score_pair(model, q, pos, nullptr, {}, fwd).score, 1.0,
                                       cfg.link));
        loss = add(loss,
                   classification_loss(score_pair(model, q, neg, nullptr, {}, fwd).score, 0.0,
                                       cfg.link));
        n_terms += 2;
      } else {
        loss = add(loss, pairwise_loss(score_pair(model, q, pos, nullptr, {}, fwd).score,
                                       score_pair(model, q, neg, nullptr, {}, fwd).score,
                                       cfg.margin));
        n_terms += 1;
      }
    }
    loss = scale(loss, 1.0 / static_cast<double>(n_terms));
    const double train_loss = loss.value();
    if (!std::isfinite(train_loss)) {
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
    }
    backward(loss, tape);
    adam_step(params, adam);
    zero_grads(params);
    result.log.push_back({step, "train", train_loss});
    result.steps_run = step;

    if (step % cfg.val_interval == 0) {
      const double val = detail::validation_loss(model, dev, cfg.link);
      if (!std::isfinite(val)) {
        throw std::runtime_error("train: non-finite validation loss at step " +
                                 std::to_string(step));
      }
      result.log.push_back({step, "val", val});
      if (val < best_val) {
        best_val = val;
        result.best_step = step;
        best_snapshot = to_checkpoint(model);
        bad_evals = 0;
      } else {
        ++bad_evals;
        if (bad_evals >= cfg.patience) break;
      }
    }
  }
  if (result.best_step > 0) {
    detail::restore_params(model, best_snapshot);
    result.best_val = best_val;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Pretraining
// ---------------------------------------------------------------------------

/// Heads used only during pretraining: the Mask-LM output bias (logits tie
/// to the token embedding table) and the next-sequence classifier.
struct PretrainHeads {
  Tensor mlm_bias;  // [V]
  Tensor nsp_w;     // [H]
  Tensor nsp_b;     // scalar
};

inline PretrainHeads init_pretrain_heads(std::size_t vocab_size, std::size_t hidden,
                                         std::uint64_t seed) {
  Rng rng(seed ^ 0xA5A5A5A5DEADBEEFull);
  PretrainHeads heads;
  heads.mlm_bias = Tensor::zeros({vocab_size}, true);
  heads.nsp_w = detail::init_weight({hidden}, rng);
  heads.nsp_b = Tensor::zeros({1}, true);
  return heads;
}

inline std::vector<std::pair<std::string, Tensor>> named_params(const PretrainHeads& heads) {
  return {{"pretrain/mlm_bias", heads.mlm_bias},
          {"pretrain/nsp_w", heads.nsp_w},
          {"pretrain/nsp_b", heads.nsp_b}};
}

struct PretrainConfig {
  std::size_t steps = 500;
  std::size_t batch_size = 8;
  double mask_rate = 0.15;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t max_len = 128;
};

/// Mask-LM plus next-sequence loss for one prepared batch.
inline Tensor pretrain_loss(const PretrainBatch& batch, const EncoderParams& enc,
                            const EncoderConfig& cfg, const PretrainHeads& heads) {
  Tensor loss = Tensor::scalar(0.0);
  std::size_t n_terms = 0;
  for (std::size_t s = 0; s < batch.sequences.size(); ++s) {
    const EncoderOutput out = encoder_forward(batch.sequences[s], enc, cfg);
    if (!batch.mask_positions[s].empty()) {
      Tensor states = gather_rows(out.last_hidden(), batch.mask_positions[s]);
      Tensor logits = add_rowvec(matmul_nt(states, enc.token_emb), heads.mlm_bias);
      loss = add(loss, softmax_cross_entropy_rows(logits, batch.original_ids[s]));
      ++n_terms;
    }
    if (batch.next_labels[s] >= 0) {
      Tensor logit = add(dot(heads.nsp_w, row_as_vector(out.last_hidden(), 0)), heads.nsp_b);
      loss = add(loss, bce_with_logits(logit, batch.next_labels[s]));
      ++n_terms;
    }
  }
  if (n_terms == 0) return loss;
  return scale(loss, 1.0 / static_cast<double>(n_terms));
}

/// Next-sequence sampling, masking, and Adam over encoder plus pretraining
/// heads. Returns the training log; parameters are updated in place.
inline TrainLog pretrain(EncoderParams& enc, const EncoderConfig& cfg, const Vocabulary& vocab,
                         const std::vector<std::string>& passages, PretrainHeads& heads,
                         const PretrainConfig& pcfg) {
  if (!(pcfg.mask_rate >= 0.0 && pcfg.mask_rate < 1.0)) {
    throw std::invalid_argument("pretrain: mask_rate must be in [0, 1)");
  }
  Rng rng(pcfg.seed);
  auto params = named_params(enc);
  for (auto& p : named_params(heads)) params.push_back(p);
  AdamState adam;
  adam.lr = pcfg.lr;
  TrainLog log;
  for (std::size_t step = 1; step <= pcfg.steps; ++step) {
    PretrainBatch pairs =
        next_seq_batch(passages, vocab, pcfg.max_len, pcfg.batch_size, rng.next_u64());
    PretrainBatch batch = mask_lm_batch(pairs.sequences, vocab, pcfg.mask_rate, rng.next_u64());
    batch.next_labels = pairs.next_labels;
    GradTape tape;
    Tensor loss = pretrain_loss(batch, enc, cfg, heads);
    const double value = loss.value();
    if (!std::isfinite(value)) {
      throw std::runtime_error("pretrain: non-finite loss at step " + std::to_string(step));
    }
    backward(loss, tape);
    adam_step(params, adam);
    zero_grads(params);
    log.push_back({step, "train", value});
  }
  return log;
}

/// Pretrain checkpoints carry the encoder, vocabulary, and pretraining
/// heads under kind "pretrain"; fine-tuning consumes the encoder part.
inline Checkpoint pretrain_checkpoint(const EncoderParams& enc, const EncoderConfig& cfg,
                                      const Vocabulary& vocab, const PretrainHeads& heads,
                                      std::size_t max_len) {
  Checkpoint cp;
  cp.config["format"] = "1";
  cp.config["kind"] = "pretrain";
  cp.config["max_len"] = std::to_string(max_len);
  cp.config["vocab"] = vocab.to_text();
  detail::put_encoder_config(cp, cfg);
  for (const auto& [name, t] : named_params(enc)) cp.put(name, t);
  for (const auto& [name, t] : named_params(heads)) cp.put(name, t);
  return cp;
}

struct PretrainedEncoder {
  Vocabulary vocab;
  EncoderConfig cfg;
  EncoderParams params;
  std::size_t max_len = 128;
};

inline PretrainedEncoder load_pretrained_encoder(const std::string& path) {
  const Checkpoint cp = Checkpoint::load(path);
  if (cp.config_value("kind") != "pretrain") {
    throw std::runtime_error("checkpoint at " + path + " has kind '" +
                             cp.config_value("kind") + "', expected 'pretrain'");
  }
  PretrainedEncoder out;
  out.vocab = Vocabulary::from_text(cp.config_value("vocab"));
  out.max_len = parse_long(cp.config_value("max_len"), "max_len");
  out.cfg = detail::encoder_config_from(cp);
  out.params = detail::encoder_params_from(cp, out.cfg.layers);
  return out;
}

}  // namespace ranklab
