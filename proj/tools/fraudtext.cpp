// SPDX-License-Identifier: Apache-2.0
// fraudtext: generate, preprocess, train, evaluate and compare from the shell.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>

#include "fraudtext/format.hpp"
#include "fraudtext/harness.hpp"
#include "fraudtext/runtime.hpp"

using namespace fraudtext;

namespace {

// Flags that map one-to-one onto config keys. Values go through
// RunConfig::set so flags, --set and config files parse identically.
struct KeyFlags {
  std::optional<std::string> config;
  std::vector<std::string> overrides;
  std::vector<std::pair<std::string, std::string>> flags;  // key, value
  std::map<std::string, std::string> storage;

  void add_common(CLI::App* app) {
    app->add_option("--config", config, "Key = value config file");
    app->add_option("--set", overrides, "Override one config key (key=value), repeatable");
  }
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option(flag, storage[key], help)->each([this, key](const std::string& v) {
      flags.emplace_back(key, v);
    });
  }
  RunConfig resolve() const {
    RunConfig cfg = config ? load_config(*config) : RunConfig{};
    for (const auto& s : overrides) apply_override(cfg, s);
    for (const auto& [k, v] : flags) cfg.set(k, v);
    return cfg;
  }
};

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void print_epoch(std::string_view model, const EpochReport& e) {
  std::fprintf(stderr, "%s epoch %lld  loss %s  auc %s  val_loss %s  val_auc %s\n",
               std::string(model).c_str(), static_cast<long long>(e.epoch),
               fixed(e.record.train_loss, 4).c_str(), fixed(e.record.train_auc, 4).c_str(),
               fixed(e.record.val_loss, 4).c_str(), fixed(e.record.val_auc, 4).c_str());
}

Index arch_index(Architecture a) {
  for (std::size_t i = 0; i < kArchitectures.size(); ++i) {
    if (kArchitectures[i] == a) return static_cast<Index>(i);
  }
  return 0;
}

int run_generate(const KeyFlags& keys, const std::string& out) {
  const RunConfig cfg = stage("config", [&] { return keys.resolve(); });
  const auto corpus = stage("generate", [&] { return generate_corpus(cfg.generator); });
  stage("write", [&] { save_corpus(out, corpus); });
  std::printf("wrote %zu sentences (%lld F) to %s\n", corpus.size(),
              static_cast<long long>(cfg.generator.minority_count()), out.c_str());
  return 0;
}

int run_preprocess(const KeyFlags& keys, const std::string& in, const std::string& out) {
  const RunConfig cfg = stage("config", [&] {
    RunConfig c = keys.resolve();
    c.hp.validate();
    return c;
  });
  const auto corpus = stage("corpus", [&] { return load_corpus(in); });
  DatasetFile file;
  file.config = pipeline_config(cfg);
  file.data = stage("preprocess", [&] { return preprocess(corpus, file.config); });
  stage("write", [&] { save_dataset(file, out); });
  std::printf("train %lld rows (%lld before oversampling), test %lld rows, %zu words -> %s\n",
              static_cast<long long>(file.data.train.size()),
              static_cast<long long>(file.data.train_rows_before_oversampling),
              static_cast<long long>(file.data.test.size()), file.data.tokenizer.words().size(),
              out.c_str());
  return 0;
}

int run_train(const KeyFlags& keys, const std::string& model_name, const std::string& data_path,
              const std::string& out) {
  const DatasetFile data = stage("dataset", [&] { return load_dataset(data_path); });
  Architecture arch{};
  const RunConfig cfg = stage("config", [&] {
    RunConfig c = keys.resolve();
    arch = parse_architecture(model_name);
    // The encoded data fixes the vocabulary and sequence length.
    c.hp.vocab_size = data.config.vocab_size;
    c.hp.maxlen = data.config.maxlen;
    c.hp.test_fraction = data.config.test_fraction;
    c.hp.validate();
    return c;
  });
  Checkpoint ckpt;
  ckpt.hp = cfg.hp;
  ckpt.tokenizer = data.data.tokenizer;
  stage("train " + model_name, [&] {
    SeededRng rng(cfg.hp.seed + static_cast<std::uint64_t>(arch_index(arch)));
    ckpt.model = build_model(arch, cfg.hp, rng);
    TrainResult r = train(ckpt.model, data.data.train, data.data.test,
                          train_config(cfg.hp, cfg.clip_norm), rng,
                          [&](const EpochReport& e) { print_epoch(model_name, e); });
    ckpt.history = std::move(r.history);
    ckpt.adam = std::move(r.adam);
  });
  stage("write", [&] { save_checkpoint(ckpt, out); });
  std::cout << report_table({make_result_row(model_name, ckpt.history)});
  return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data_path) {
  const Checkpoint ckpt = stage("checkpoint", [&] { return load_checkpoint(model_path); });
  const DatasetFile data = stage("dataset", [&] { return load_dataset(data_path); });
  stage("evaluate", [&] {
    if (!(data.data.tokenizer == ckpt.tokenizer) || data.config.maxlen != ckpt.model.maxlen()) {
      throw DataError("the dataset was encoded with another tokenizer or sequence length");
    }
    const Evaluation tr = evaluate(ckpt.model, data.data.train);
    const Evaluation te = evaluate(ckpt.model, data.data.test);
    std::printf("model %s\n", std::string(architecture_name(ckpt.model.spec().arch)).c_str());
    std::printf("train  rows %7lld  loss %s  auc %s\n",
                static_cast<long long>(data.data.train.size()), fixed(tr.loss, 4).c_str(),
                fixed(tr.auc, 4).c_str());
    std::printf("test   rows %7lld  loss %s  auc %s\n",
                static_cast<long long>(data.data.test.size()), fixed(te.loss, 4).c_str(),
                fixed(te.auc, 4).c_str());
  });
  return 0;
}

int run_compare_cmd(const KeyFlags& keys, const std::string& out) {
  const RunConfig cfg = stage("config", [&] { return keys.resolve(); });
  const CompareResult result = run_compare(cfg, [](const CompareProgress& p) {
    print_epoch(architecture_name(p.arch), p.report);
  });
  write_report(result, out);
  std::vector<ResultRow> rows;
  for (const auto& r : result.runs) rows.push_back(r.row);
  std::cout << report_table(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  retain_heap_memory();
  CLI::App app{"Text-based fraud classification models"};
  app.require_subcommand(1);

  KeyFlags gen_keys, pre_keys, train_keys, cmp_keys;
  std::string out, in, model, data;

  auto* gen = app.add_subcommand("generate", "Write a synthetic labelled corpus CSV");
  gen->add_option("--out", out, "Corpus CSV to write")->required();
  gen_keys.add_common(gen);
  gen_keys.add(gen, "--total", "total", "Number of sentences");
  gen_keys.add(gen, "--ratio", "ratio", "NF per F, e.g. 175 or 175:1");
  gen_keys.add(gen, "--p-signal", "p_signal", "Signal-token probability in F sentences");
  gen_keys.add(gen, "--seed", "generator_seed", "Generator seed");

  auto* pre = app.add_subcommand("preprocess", "Clean, split, tokenize, pad and oversample a corpus");
  pre->add_option("--in", in, "Corpus CSV")->required();
  pre->add_option("--out", out, "Encoded dataset to write")->required();
  pre_keys.add_common(pre);
  pre_keys.add(pre, "--maxlen", "maxlen", "Padded sequence length");
  pre_keys.add(pre, "--vocab-size", "vocab_size", "Tokenizer vocabulary size");
  pre_keys.add(pre, "--test-fraction", "test_fraction", "Held-out fraction");
  pre_keys.add(pre, "--split-mode", "split_mode", "stratified or chronological");
  pre_keys.add(pre, "--seed", "seed", "Split and oversampling seed");

  auto* trn = app.add_subcommand("train", "Train one model on an encoded dataset");
  trn->add_option("--model", model, "simple_nn, vanilla_rnn, lstm, gru or multi_lstm")->required();
  trn->add_option("--data", data, "Encoded dataset")->required();
  trn->add_option("--out", out, "Checkpoint to write")->required();
  train_keys.add_common(trn);
  train_keys.add(trn, "--epochs", "epochs", "Training epochs");
  train_keys.add(trn, "--batch-size", "batch_size", "Mini-batch size");
  train_keys.add(trn, "--lr", "learning_rate", "Adam learning rate");
  train_keys.add(trn, "--seed", "seed", "Base seed; the model index is added");

  auto* ev = app.add_subcommand("evaluate", "Loss and AUC of a checkpoint on an encoded dataset");
  ev->add_option("--model", model, "Checkpoint")->required();
  ev->add_option("--data", data, "Encoded dataset")->required();

  auto* cmp = app.add_subcommand("compare", "Train all models on one split and write a report");
  cmp->add_option("--out", out, "Report directory")->required();
  cmp_keys.add_common(cmp);

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "generate") return run_generate(gen_keys, out);
    if (command == "preprocess") return run_preprocess(pre_keys, in, out);
    if (command == "train") return run_train(train_keys, model, data, out);
    if (command == "evaluate") return run_evaluate(model, data);
    return run_compare_cmd(cmp_keys, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fraudtext %s: %s\n", command.c_str(), e.what());
    return 1;
  }
}
