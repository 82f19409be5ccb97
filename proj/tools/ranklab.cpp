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

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ranklab/analysis.hpp"
#include "ranklab/bm25.hpp"
#include "ranklab/checkpoint.hpp"
#include "ranklab/data.hpp"
#include "ranklab/encoder.hpp"
#include "ranklab/evaluation.hpp"
#include "ranklab/manifest.hpp"
#include "ranklab/rankers.hpp"
#include "ranklab/stopwords.hpp"
#include "ranklab/tokenizer.hpp"
#include "ranklab/training.hpp"

namespace ranklab {
namespace {

constexpr const char* kVersion = "ranklab 0.1.0";

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
}

EncoderConfig encoder_config_from_settings(Settings& s, std::size_t vocab_size,
                                           std::size_t max_len) {
  EncoderConfig cfg;
  cfg.layers = s.get_int("encoder.layers", 4);
  cfg.hidden = s.get_int("encoder.hidden", 64);
  cfg.heads = s.get_int("encoder.heads", 4);
  cfg.ff_dim = s.get_int("encoder.ff_dim", 256);
  cfg.max_positions = s.get_int("encoder.max_positions", static_cast<long>(max_len));
  cfg.dropout = s.get_double("encoder.dropout", 0.0);
  cfg.vocab_size = vocab_size;
  return cfg;
}

HeadConfig head_config_from_settings(Settings& s) {
  HeadConfig hc;
  hc.layer_lo = s.get_int("head.layer_lo", 1);
  hc.layer_hi = s.get_int("head.layer_hi", 0);
  hc.proj_dim = s.get_int("head.proj_dim", 0);
  hc.term_trans_mode = s.get("head.term_trans_mode", "concat") == "separate"
                           ? TermTransMode::kSeparate
                           : TermTransMode::kConcat;
  hc.embed_dim = s.get_int("head.embed_dim", 64);
  hc.filters = s.get_int("head.filters", 128);
  hc.max_ngram = s.get_int("head.max_ngram", 2);
  hc.kernels = KernelBank::standard(s.get_int("head.kernels", 11));
  return hc;
}

TrainConfig train_config_from_settings(Settings& s) {
  TrainConfig cfg;
  cfg.lr = s.get_double("train.lr", 1e-3);
  cfg.proj_lr = s.get_double("train.proj_lr", 0.002);
  cfg.batch_size = s.get_int("train.batch_size", 8);
  cfg.max_steps = s.get_int("train.max_steps", 1000);
  cfg.val_interval = s.get_int("train.val_interval", 100);
  cfg.patience = s.get_int("train.patience", 3);
  cfg.seed = s.get_int("seed", 0);
  cfg.loss = s.get("train.loss", "classification") == "pairwise" ? LossKind::kPairwise
                                                                 : LossKind::kClassification;
  cfg.link = s.get("train.link", "sigmoid") == "softmax2" ? ClassificationLink::kSoftmax2
                                                          : ClassificationLink::kSigmoid;
  cfg.margin = s.get_double("train.margin", 1.0);
  return cfg;
}

std::set<std::string> stopwords_from(const RunManifest& m) {
  const auto it = m.inputs.find("stopwords");
  if (it == m.inputs.end()) return default_stopwords();
  return load_stopwords(it->second);
}

// Attention analysis accepts both ranker and pretrain checkpoints.
struct AnyEncoder {
  Vocabulary vocab;
  EncoderConfig cfg;
  EncoderParams params;
  std::size_t max_len = 128;
};

AnyEncoder load_any_encoder(const std::string& path) {
  const Checkpoint cp = Checkpoint::load(path);
  const std::string kind = cp.config_value("kind");
  AnyEncoder out;
  if (kind == "pretrain") {
    PretrainedEncoder pre = load_pretrained_encoder(path);
    out.vocab = std::move(pre.vocab);
    out.cfg = pre.cfg;
    out.params = std::move(pre.params);
    out.max_len = pre.max_len;
    return out;
  }
  RankerModel model = from_checkpoint(cp);
  if (!model.uses_encoder()) {
    throw std::runtime_error("checkpoint kind '" + kind + "' has no encoder to analyze");
  }
  out.vocab = std::move(model.vocab);
  out.cfg = model.enc_cfg;
  out.params = std::move(model.encoder);
  out.max_len = model.max_len;
  return out;
}

// ---------------------------------------------------------------------------
// Command cores. Each consumes a manifest's inputs/outputs/settings so that
// `rerun` can replay a saved manifest byte for byte.
// ---------------------------------------------------------------------------

void run_build_vocab(RunManifest& m) {
  const auto docs = load_corpus(m.input("corpus"));
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& [id, text] : docs) texts.push_back(text);
  const long min_count = m.settings.get_int("vocab.min_count", 1);
  const long max_size = m.settings.get_int("vocab.max_size", 50000);
  const Vocabulary vocab = build_vocab(texts, min_count, max_size);
  atomic_write(m.output("vocab"), [&vocab](std::ostream& os) { os << vocab.to_text(); });
}

void run_pretrain(RunManifest& m) {
  const Vocabulary vocab = Vocabulary::from_text(read_file(m.input("vocab")));
  const auto docs = load_corpus(m.input("corpus"));
  std::vector<std::string> passages;
  for (const auto& [id, text] : docs) passages.push_back(text);

  const std::size_t max_len = m.settings.get_int("max_len", 128);
  const EncoderConfig cfg = encoder_config_from_settings(m.settings, vocab.size(), max_len);
  PretrainConfig pcfg;
  pcfg.steps = m.settings.get_int("pretrain.steps", 500);
  pcfg.batch_size = m.settings.get_int("pretrain.batch_size", 8);
  pcfg.mask_rate = m.settings.get_double("pretrain.mask_rate", 0.15);
  pcfg.lr = m.settings.get_double("pretrain.lr", 1e-3);
  pcfg.seed = m.settings.get_int("seed", 0);
  pcfg.max_len = max_len;

  EncoderParams enc = init_params(cfg, pcfg.seed);
  PretrainHeads heads = init_pretrain_heads(vocab.size(), cfg.hidden, pcfg.seed);
  const TrainLog log = pretrain(enc, cfg, vocab, passages, heads, pcfg);

  pretrain_checkpoint(enc, cfg, vocab, heads, max_len).save(m.output("checkpoint"));
  if (m.outputs.count("log")) {
    atomic_write(m.output("log"), [&log](std::ostream& os) { write_train_log(os, log); });
  }
}

void run_train(RunManifest& m) {
  const RankerKind kind = ranker_kind_from_string(m.settings.get("ranker.kind", "last_int"));
  const std::uint64_t seed = m.settings.get_int("seed", 0);
  HeadConfig hc = head_config_from_settings(m.settings);

  RankerModel model;
  if (m.inputs.count("init")) {
    PretrainedEncoder pre = load_pretrained_encoder(m.input("init"));
    const std::size_t max_len =
        m.settings.get_int("max_len", static_cast<long>(pre.max_len));
    if (max_len > pre.cfg.max_positions) {
      throw std::runtime_error("max_len " + std::to_string(max_len) +
                               " exceeds the pretrained encoder's max positions " +
                               std::to_string(pre.cfg.max_positions));
    }
    model = init_ranker(kind, pre.vocab, pre.cfg, hc, seed, max_len);
    model.encoder = std::move(pre.params);  // keep the pretrained weights
  } else {
    const std::size_t max_len = m.settings.get_int("max_len", 128);
    const Vocabulary vocab = Vocabulary::from_text(read_file(m.input("vocab")));
    const EncoderConfig cfg = encoder_config_from_settings(m.settings, vocab.size(), max_len);
    model = init_ranker(kind, vocab, cfg, hc, seed, max_len);
  }

  const auto triples = load_triples(m.input("triples"));
  std::vector<std::string> warnings;
  const std::size_t depth = m.settings.get_int("bm25.depth", 100);
  const auto dev_sets = load_candidates(m.input("dev_candidates"), depth, &warnings);
  const QrelSet dev_qrels = load_qrels(m.input("dev_qrels"), &warnings);
  const std::size_t val_sample = m.settings.get_int("train.val_sample", 64);
  std::vector<LabeledPair> dev;
  for (const CandidateSet& set : dev_sets) {
    for (const Candidate& c : set.docs) {
      if (dev.size() >= val_sample) break;
      dev.push_back(LabeledPair{tokenize(set.query_text), tokenize(c.text),
                                dev_qrels.grade(set.query_id, c.doc_id) > 0 ? 1.0 : 0.0});
    }
  }

  const TrainConfig cfg = train_config_from_settings(m.settings);
  const TrainResult result = train(model, triples, dev, cfg);
  save_ranker(model, m.output("checkpoint"));
  if (m.outputs.count("log")) {
    atomic_write(m.output("log"),
                 [&result](std::ostream& os) { write_train_log(os, result.log); });
  }
  print_warnings(warnings);
  std::cerr << "trained " << to_string(kind) << " for " << result.steps_run
            << " steps, best val loss " << result.best_val << " at step " << result.best_step
            << '\n';
}

void run_bm25(RunManifest& m) {
  const auto corpus = load_corpus(m.input("corpus"));
  const auto queries = load_queries(m.input("queries"));
  Bm25Params params;
  params.k1 = m.settings.get_double("bm25.k1", 0.9);
  params.b = m.settings.get_double("bm25.b", 0.4);
  const std::size_t depth = m.settings.get_int("bm25.depth", 100);
  const Bm25Index index(corpus);
  std::vector<CandidateSet> sets;
  for (const auto& [qid, text] : queries) {
    CandidateSet set = index.rank(qid, text, depth, params);
    if (!set.docs.empty()) sets.push_back(std::move(set));
  }
  atomic_write(m.output("candidates"),
               [&sets](std::ostream& os) { write_candidates(os, sets); });
}

void run_rerank(RunManifest& m) {
  RankerModel model = load_ranker(m.input("checkpoint"));
  const std::string requested = m.settings.get("ranker.kind", to_string(model.kind));
  if (ranker_kind_from_string(requested) != model.kind) {
    throw std::runtime_error("checkpoint holds a '" + to_string(model.kind) +
                             "' ranker but '" + requested + "' was requested");
  }
  const std::size_t depth = m.settings.get_int("bm25.depth", 100);
  std::vector<std::string> warnings;
  const auto candidates = load_candidates(m.input("candidates"), depth, &warnings);
  const std::string tag = m.settings.get("tag", "ranklab-" + to_string(model.kind));
  const RunFile run = rerank_candidates(model, candidates, tag, {}, &warnings);
  atomic_write(m.output("run"), [&run](std::ostream& os) { write_run(os, run); });
  print_warnings(warnings);
}

int resolve_gmax(Settings& s, const QrelSet& qrels) {
  const long configured = s.get_int("eval.gmax", 0);
  if (configured > 0) return static_cast<int>(configured);
  return std::max(1, qrels.gmax());
}

void run_eval(RunManifest& m) {
  const RunFile run = load_run(m.input("run"));
  std::vector<std::string> warnings;
  const QrelSet qrels = load_qrels(m.input("qrels"), &warnings);
  const int gmax = resolve_gmax(m.settings, qrels);
  const std::string metrics = m.settings.get("eval.metrics", "mrr@10");
  std::vector<std::string> names;
  std::istringstream ms(metrics);
  std::string name;
  while (std::getline(ms, name, ',')) {
    if (!detail::trim(name).empty()) names.push_back(detail::trim(name));
  }
  if (names.empty()) throw std::runtime_error("eval: empty metrics list");
  const std::string base = m.output("report");
  for (const std::string& metric_name : names) {
    const MetricSpec spec = metric_spec_from_string(metric_name, gmax);
    const MetricReport report = evaluate_run(run, qrels, spec, &warnings);
    const std::string path = names.size() == 1 ? base : base + "." + metric_name;
    if (names.size() > 1) m.outputs["report." + metric_name] = path;
    atomic_write(path, [&report](std::ostream& os) { write_metric_report(os, report); });
    std::cout << report.metric_name << " mean " << format_double(report.mean) << '\n';
  }
  print_warnings(warnings);
}

void run_significance(RunManifest& m) {
  const RunFile run_a = load_run(m.input("run_a"));
  const RunFile run_b = load_run(m.input("run_b"));
  std::vector<std::string> warnings;
  const QrelSet qrels = load_qrels(m.input("qrels"), &warnings);
  const int gmax = resolve_gmax(m.settings, qrels);
  const MetricSpec spec = metric_spec_from_string(m.settings.get("sig.metric", "mrr@10"), gmax);
  const std::size_t n_perm = m.settings.get_int("sig.n_perm", 100000);
  const std::uint64_t seed = m.settings.get_int("seed", 0);
  const SignificanceReport report =
      compare_runs(run_a, run_b, qrels, spec, n_perm, seed, &warnings);
  atomic_write(m.output("report"),
               [&report](std::ostream& os) { write_significance_report(os, report); });
  std::cout << report.metric_name << " mean_a " << format_double(report.mean_a) << " mean_b "
            << format_double(report.mean_b) << " p " << format_double(report.p_value) << '\n';
  print_warnings(warnings);
}

void run_analyze_attention(RunManifest& m) {
  const AnyEncoder enc = load_any_encoder(m.input("checkpoint"));
  const auto stopwords = stopwords_from(m);
  std::vector<std::string> warnings;
  const std::size_t depth = m.settings.get_int("bm25.depth", 100);
  const auto candidates = load_candidates(m.input("candidates"), depth, &warnings);
  const std::size_t max_pairs = m.settings.get_int("attention.max_pairs", 100);
  // Aggregation choices recorded for the report's consumers.
  m.settings.set("attention.aggregation", "head_mean");
  m.settings.set("attention.direction", "sender");

  AttentionShareReport total;
  std::size_t pairs = 0;
  for (const CandidateSet& set : candidates) {
    const auto q_tokens = tokenize(set.query_text);
    for (const Candidate& c : set.docs) {
      if (pairs >= max_pairs) break;
      const TokenSequence seq = encode_pair(q_tokens, tokenize(c.text), enc.vocab, enc.max_len);
      const EncoderOutput out = encoder_forward(seq, enc.params, enc.cfg);
      total.accumulate(
          attention_group_shares(out, classify_tokens(seq, enc.vocab, stopwords)));
      ++pairs;
    }
    if (pairs >= max_pairs) break;
  }
  if (pairs == 0) throw std::runtime_error("analyze-attention: no candidate pairs to analyze");
  atomic_write(m.output("report"),
               [&total](std::ostream& os) { write_attention_report(os, total); });
  print_warnings(warnings);
}

void run_analyze_influence(RunManifest& m) {
  RankerModel model = load_ranker(m.input("checkpoint"));
  const auto stopwords = stopwords_from(m);
  std::vector<std::string> warnings;
  const std::size_t depth = m.settings.get_int("bm25.depth", 100);
  const auto candidates = load_candidates(m.input("candidates"), depth, &warnings);
  const InfluenceMode mode =
      influence_mode_from_string(m.settings.get("influence.mode", "random-one"));
  const std::uint64_t seed = m.settings.get_int("seed", 0);
  const std::size_t max_pairs = m.settings.get_int("influence.max_pairs", 100);
  const std::size_t top_n = m.settings.get_int("influence.top_n", 3);

  std::vector<InfluenceRecord> scatter;
  std::vector<InfluenceRecord> ranked_terms;
  std::size_t pairs = 0;
  for (const CandidateSet& set : candidates) {
    const auto q_tokens = tokenize(set.query_text);
    for (const Candidate& c : set.docs) {
      if (pairs >= max_pairs) break;
      const auto d_tokens = tokenize(c.text);
      const auto records = term_influence(model, set.query_id, q_tokens, c.doc_id, d_tokens,
                                          stopwords, mode, seed, &warnings);
      scatter.insert(scatter.end(), records.begin(), records.end());
      if (mode == InfluenceMode::kExhaustive && m.outputs.count("terms")) {
        const auto top = most_influential_terms(model, set.query_id, q_tokens, c.doc_id,
                                                d_tokens, stopwords, top_n, &warnings);
        ranked_terms.insert(ranked_terms.end(), top.begin(), top.end());
      }
      ++pairs;
    }
    if (pairs >= max_pairs) break;
  }
  if (scatter.empty()) throw std::runtime_error("analyze-influence: no influence records");
  emit_scatter(scatter, m.output("scatter"));
  if (m.outputs.count("terms")) {
    atomic_write(m.output("terms"),
                 [&ranked_terms](std::ostream& os) { write_influential_terms(os, ranked_terms); });
  }
  print_warnings(warnings);
}

void run_ablate_markers(RunManifest& m) {
  RankerModel model = load_ranker(m.input("checkpoint"));
  std::vector<std::string> warnings;
  const std::size_t depth = m.settings.get_int("bm25.depth", 100);
  const auto candidates = load_candidates(m.input("candidates"), depth, &warnings);
  const QrelSet qrels = load_qrels(m.input("qrels"), &warnings);
  const int gmax = resolve_gmax(m.settings, qrels);
  const MetricSpec spec =
      metric_spec_from_string(m.settings.get("ablate.metric", "mrr@10"), gmax);
  const MarkerRemoval removal = m.settings.get("ablate.removal", "sep-only") == "all"
                                    ? MarkerRemoval::kAll
                                    : MarkerRemoval::kSepOnly;
  const std::size_t n_perm = m.settings.get_int("sig.n_perm", 100000);
  const std::uint64_t seed = m.settings.get_int("seed", 0);
  const AblationResult result =
      marker_ablation(model, candidates, qrels, spec, removal, n_perm, seed, &warnings);

  const std::string base = m.output("report");
  m.outputs["with_markers"] = base + ".with.csv";
  m.outputs["without_markers"] = base + ".without.csv";
  atomic_write(m.outputs["with_markers"], [&result](std::ostream& os) {
    write_metric_report(os, result.with_markers);
  });
  atomic_write(m.outputs["without_markers"], [&result](std::ostream& os) {
    write_metric_report(os, result.without_markers);
  });
  SignificanceReport sig{spec.name(), result.with_markers.mean, result.without_markers.mean,
                         result.p_value};
  atomic_write(base, [&sig](std::ostream& os) { write_significance_report(os, sig); });
  std::cout << spec.name() << " with " << format_double(sig.mean_a) << " without "
            << format_double(sig.mean_b) << " p " << format_double(sig.p_value) << '\n';
  print_warnings(warnings);
}

const std::map<std::string, std::string> kPrimaryOutput = {
    {"build-vocab", "vocab"},          {"pretrain", "checkpoint"},
    {"train", "checkpoint"},           {"bm25", "candidates"},
    {"rerank", "run"},                 {"eval", "report"},
    {"significance", "report"},        {"analyze-attention", "report"},
    {"analyze-influence", "scatter"},  {"ablate-markers", "report"},
};

void execute(RunManifest& m) {
  if (m.command == "build-vocab") {
    run_build_vocab(m);
  } else if (m.command == "pretrain") {
    run_pretrain(m);
  } else if (m.command == "train") {
    run_train(m);
  } else if (m.command == "bm25") {
    run_bm25(m);
  } else if (m.command == "rerank") {
    run_rerank(m);
  } else if (m.command == "eval") {
    run_eval(m);
  } else if (m.command == "significance") {
    run_significance(m);
  } else if (m.command == "analyze-attention") {
    run_analyze_attention(m);
  } else if (m.command == "analyze-influence") {
    run_analyze_influence(m);
  } else if (m.command == "ablate-markers") {
    run_ablate_markers(m);
  } else {
    throw std::runtime_error("unknown command '" + m.command + "'");
  }
  m.version = kVersion;
  m.save(m.output(kPrimaryOutput.at(m.command)) + ".manifest");
}

struct CliState {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  RunManifest manifest;

  void finalize_settings() {
    std::map<std::string, std::string> merged;
    if (!config_path.empty()) {
      merged = load_kv_file(config_path);
    }
    // Flag-provided settings override config file entries.
    for (const auto& [k, v] : manifest.settings.values()) merged[k] = v;
    for (const std::string& kv : overrides) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("--set expects key=value, got '" + kv + "'");
      }
      merged[detail::trim(kv.substr(0, eq))] = detail::trim(kv.substr(eq + 1));
    }
    manifest.settings = Settings(merged);
    if (!config_path.empty()) manifest.inputs["config"] = config_path;
  }
};

}  // namespace
}  // namespace ranklab

int main(int argc, char** argv) {
  using namespace ranklab;
  CLI::App app{"desk-scale neural ranking laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CliState state;
  std::string rerun_path;

  auto add_common = [&state](CLI::App* cmd) {
    cmd->add_option("--config", state.config_path, "flat key=value config file");
    cmd->add_option("--set", state.overrides, "override a config key (key=value)")
        ->take_all();
  };
  auto opt_in = [&state](CLI::App* cmd, const std::string& flag, const std::string& name,
                         const std::string& help, bool required = true) {
    auto* o = cmd->add_option_function<std::string>(
        flag, [&state, name](const std::string& v) { state.manifest.inputs[name] = v; }, help);
    if (required) o->required();
    return o;
  };
  auto opt_out = [&state](CLI::App* cmd, const std::string& flag, const std::string& name,
                          const std::string& help, bool required = true) {
    auto* o = cmd->add_option_function<std::string>(
        flag, [&state, name](const std::string& v) { state.manifest.outputs[name] = v; }, help);
    if (required) o->required();
    return o;
  };
  auto opt_setting = [&state](CLI::App* cmd, const std::string& flag, const std::string& key,
                              const std::string& help) {
    return cmd->add_option_function<std::string>(
        flag, [&state, key](const std::string& v) { state.manifest.settings.set(key, v); }, help);
  };

  CLI::App* build_vocab = app.add_subcommand("build-vocab", "build a vocabulary from a corpus");
  add_common(build_vocab);
  opt_in(build_vocab, "--corpus", "corpus", "docid<TAB>text corpus file");
  opt_out(build_vocab, "--out", "vocab", "output vocabulary file");
  opt_setting(build_vocab, "--min-count", "vocab.min_count", "minimum token frequency");
  opt_setting(build_vocab, "--max-size", "vocab.max_size", "vocabulary cap incl. reserved");

  CLI::App* pretrain_cmd = app.add_subcommand("pretrain", "masked-token + adjacency pretraining");
  add_common(pretrain_cmd);
  opt_in(pretrain_cmd, "--corpus", "corpus", "ordered passage corpus (docid<TAB>text)");
  opt_in(pretrain_cmd, "--vocab", "vocab", "vocabulary file");
  opt_out(pretrain_cmd, "--out", "checkpoint", "output checkpoint");
  opt_out(pretrain_cmd, "--log", "log", "training log CSV", false);
  opt_setting(pretrain_cmd, "--steps", "pretrain.steps", "pretraining steps");
  opt_setting(pretrain_cmd, "--seed", "seed", "RNG seed");

  CLI::App* train_cmd = app.add_subcommand("train", "fine-tune a ranker on triples");
  add_common(train_cmd);
  opt_in(train_cmd, "--triples", "triples", "training triples TSV");
  opt_in(train_cmd, "--dev-candidates", "dev_candidates", "validation candidates file");
  opt_in(train_cmd, "--dev-qrels", "dev_qrels", "validation qrels");
  opt_in(train_cmd, "--init", "init", "pretrain checkpoint to start from", false);
  opt_in(train_cmd, "--vocab", "vocab", "vocabulary file (when no --init)", false);
  opt_out(train_cmd, "--out", "checkpoint", "output checkpoint");
  opt_out(train_cmd, "--log", "log", "training log CSV", false);
  opt_setting(train_cmd, "--ranker", "ranker.kind",
              "rep|last_int|mult_int|term_trans|knrm|conv_knrm");
  opt_setting(train_cmd, "--seed", "seed", "RNG seed");
  opt_setting(train_cmd, "--max-steps", "train.max_steps", "optimizer step cap");

  CLI::App* bm25_cmd = app.add_subcommand("bm25", "generate base-retrieval candidates");
  add_common(bm25_cmd);
  opt_in(bm25_cmd, "--corpus", "corpus", "docid<TAB>text corpus file");
  opt_in(bm25_cmd, "--queries", "queries", "qid<TAB>text queries file");
  opt_out(bm25_cmd, "--out", "candidates", "output candidates file");
  opt_setting(bm25_cmd, "--depth", "bm25.depth", "candidates per query");
  opt_setting(bm25_cmd, "--k1", "bm25.k1", "BM25 k1");
  opt_setting(bm25_cmd, "--b", "bm25.b", "BM25 b");

  CLI::App* rerank_cmd = app.add_subcommand("rerank", "rescore candidates with a checkpoint");
  add_common(rerank_cmd);
  opt_in(rerank_cmd, "--checkpoint", "checkpoint", "ranker checkpoint");
  opt_in(rerank_cmd, "--candidates", "candidates", "candidates file");
  opt_out(rerank_cmd, "--out", "run", "output TREC run file");
  opt_setting(rerank_cmd, "--ranker", "ranker.kind", "expected ranker kind");
  opt_setting(rerank_cmd, "--tag", "tag", "run tag");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a run against qrels");
  add_common(eval_cmd);
  opt_in(eval_cmd, "--run", "run", "TREC run file");
  opt_in(eval_cmd, "--qrels", "qrels", "qrels file");
  opt_out(eval_cmd, "--out", "report", "report CSV (suffixed per metric when several)");
  opt_setting(eval_cmd, "--metrics", "eval.metrics", "comma list, e.g. mrr@10,ndcg@20,err@20");
  opt_setting(eval_cmd, "--gmax", "eval.gmax", "max grade for ERR (0 = derive from qrels)");

  CLI::App* sig_cmd = app.add_subcommand("significance", "paired permutation test of two runs");
  add_common(sig_cmd);
  opt_in(sig_cmd, "--run-a", "run_a", "first run file");
  opt_in(sig_cmd, "--run-b", "run_b", "second run file");
  opt_in(sig_cmd, "--qrels", "qrels", "qrels file");
  opt_out(sig_cmd, "--out", "report", "significance report CSV");
  opt_setting(sig_cmd, "--metric", "sig.metric", "metric, e.g. mrr@10");
  opt_setting(sig_cmd, "--n-perm", "sig.n_perm", "Monte Carlo permutations");
  opt_setting(sig_cmd, "--seed", "seed", "RNG seed");

  CLI::App* att_cmd = app.add_subcommand("analyze-attention", "per-layer attention group shares");
  add_common(att_cmd);
  opt_in(att_cmd, "--checkpoint", "checkpoint", "ranker or pretrain checkpoint");
  opt_in(att_cmd, "--candidates", "candidates", "candidates file");
  opt_in(att_cmd, "--stopwords", "stopwords", "stopword list (default: bundled)", false);
  opt_out(att_cmd, "--out", "report", "attention report CSV");
  opt_setting(att_cmd, "--max-pairs", "attention.max_pairs", "pairs to analyze");

  CLI::App* inf_cmd = app.add_subcommand("analyze-influence", "term-removal influence");
  add_common(inf_cmd);
  opt_in(inf_cmd, "--checkpoint", "checkpoint", "ranker checkpoint");
  opt_in(inf_cmd, "--candidates", "candidates", "candidates file");
  opt_in(inf_cmd, "--stopwords", "stopwords", "stopword list (default: bundled)", false);
  opt_out(inf_cmd, "--out", "scatter", "scatter CSV");
  opt_out(inf_cmd, "--terms-out", "terms", "influential-terms CSV (exhaustive mode)", false);
  opt_setting(inf_cmd, "--mode", "influence.mode", "random-one|exhaustive");
  opt_setting(inf_cmd, "--seed", "seed", "RNG seed");
  opt_setting(inf_cmd, "--max-pairs", "influence.max_pairs", "pairs to analyze");
  opt_setting(inf_cmd, "--top-n", "influence.top_n", "terms per pair in --terms-out");

  CLI::App* abl_cmd = app.add_subcommand("ablate-markers", "metric with and without markers");
  add_common(abl_cmd);
  opt_in(abl_cmd, "--checkpoint", "checkpoint", "ranker checkpoint");
  opt_in(abl_cmd, "--candidates", "candidates", "candidates file");
  opt_in(abl_cmd, "--qrels", "qrels", "qrels file");
  opt_out(abl_cmd, "--out", "report", "significance-style report CSV");
  opt_setting(abl_cmd, "--metric", "ablate.metric", "metric, e.g. mrr@10");
  opt_setting(abl_cmd, "--removal", "ablate.removal", "sep-only|all");
  opt_setting(abl_cmd, "--n-perm", "sig.n_perm", "permutations");
  opt_setting(abl_cmd, "--seed", "seed", "RNG seed");

  CLI::App* rerun_cmd = app.add_subcommand("rerun", "replay a saved run manifest");
  rerun_cmd->add_option("manifest", rerun_path, "path to a .manifest file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (rerun_cmd->parsed()) {
      RunManifest m = RunManifest::load(rerun_path);
      execute(m);
      return 0;
    }
    for (auto* cmd : app.get_subcommands()) {
      state.manifest.command = cmd->get_name();
    }
    state.finalize_settings();
    execute(state.manifest);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "ranklab: " << e.what() << '\n';
    return 1;
  }
}
