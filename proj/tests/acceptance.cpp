// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset, e.g. `acceptance 1 2 8`.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fraudtext/format.hpp"
#include "fraudtext/harness.hpp"
#include "fraudtext/metrics.hpp"
#include "fraudtext/runtime.hpp"
#include "support/auc_oracle.hpp"
#include "support/gradcheck.hpp"
#include "support/layer_checks.hpp"

using namespace fraudtext;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string num(double v, int digits = 4) { return fixed(v, digits); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// ------------------------------------------------------------------ 1

Outcome gradients() {
  Outcome out;
  constexpr int kConfigs = 100;
  constexpr double kTolerance = 1e-4;
  const struct {
    const char* name;
    double (*check)(SeededRng&);
  } layers[] = {
      {"dense", testing::check_dense},
      {"embedding", testing::check_embedding},
      {"flatten", testing::check_flatten},
      {"rnn cell", testing::check_rnn_cell},
      {"lstm cell", testing::check_lstm_cell},
      {"gru cell", testing::check_gru_cell},
      {"bidirectional", testing::check_bidirectional},
      {"bidirectional (token input)", testing::check_bidirectional_tokens},
      {"bidirectional stacked", testing::check_bidirectional_stacked},
      {"dropout (fixed mask)", testing::check_dropout},
      {"batch norm", testing::check_batchnorm},
  };
  const auto t0 = Clock::now();
  SeededRng rng(20240601);
  for (const auto& layer : layers) {
    double worst = 0.0;
    for (int i = 0; i < kConfigs; ++i) worst = std::max(worst, layer.check(rng));
    out.require(worst <= kTolerance, std::string(layer.name) + " worst relative error " +
                                         sci(worst));
    out.note(std::string(layer.name) + ": worst " + sci(worst) + " over " +
             std::to_string(kConfigs) + " configurations");
  }
  const double secs = seconds_since(t0);
  out.require(secs < 120.0, "suite took " + num(secs, 1) + " s");
  out.note("wall time " + num(secs, 1) + " s");
  return out;
}

// ------------------------------------------------------------------ 2

Outcome auc_oracles() {
  Outcome out;
  SeededRng rng(1234);
  double worst_rank = 0.0;
  double worst_trap = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = testing::random_auc_instance(rng, 2000);
    const double oracle = testing::pairwise_auc(inst.scores, inst.labels);
    const double rank = auc(inst.scores, inst.labels);
    const double trap = trapezoid_area(roc_points(inst.scores, inst.labels));
    worst_rank = std::max(worst_rank, std::abs(rank - oracle));
    worst_trap = std::max(worst_trap, std::abs(trap - rank));
  }
  out.require(worst_rank <= 1e-12, "rank AUC vs pairwise " + sci(worst_rank));
  out.require(worst_trap <= 1e-12, "trapezoid vs Mann-Whitney " + sci(worst_trap));
  out.note("max |rank - pairwise| = " + sci(worst_rank) +
           ", max |trapezoid - rank| = " + sci(worst_trap) + " over 1000 instances");
  return out;
}

// ------------------------------------------------------------------ 3

std::string corpus_bytes(const std::vector<LabeledSentence>& corpus) {
  std::ostringstream s;
  write_corpus(s, corpus);
  return s.str();
}

Outcome pipeline() {
  Outcome out;
  GeneratorConfig g;
  g.total = 10000;
  const auto corpus = generate_corpus(g);
  out.require(corpus_bytes(corpus) == corpus_bytes(generate_corpus(g)), "generator is not reproducible");

  const PipelineConfig cfg;  // vocab 20000, maxlen 200
  const PreparedData data = preprocess(corpus, cfg);
  const Index table = cfg.vocab_size + 2;

  for (const EncodedDataset* d : {&data.train, &data.test}) {
    out.require(d->sequences.cols() == 200, "padded length " + std::to_string(d->sequences.cols()));
    out.require(d->sequences.minCoeff() >= 0 && d->sequences.maxCoeff() < table,
                "token index outside [0, vocab_size + 2)");
  }
  out.require(data.train.count(0) == data.train.count(1),
              "train classes " + std::to_string(data.train.count(0)) + " vs " +
                  std::to_string(data.train.count(1)));

  // Frozen tokenizer: match every test row to the corpus sentence it
  // encodes, refit on everything else and demand the identical tokenizer.
  std::vector<std::vector<std::string>> words;
  std::map<std::pair<std::vector<std::int32_t>, int>, std::vector<std::size_t>> by_encoding;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    words.push_back(remove_stopwords(split_words(clean_text(corpus[i].text)), english_stopwords()));
    const TokenMatrix row = pad_sequences({data.tokenizer.encode(words.back())}, cfg.maxlen);
    by_encoding[{std::vector<std::int32_t>(row.data(), row.data() + row.size()),
                 encode_label(corpus[i].label)}]
        .push_back(i);
  }
  std::vector<bool> in_test(corpus.size(), false);
  bool matched = true;
  for (Index r = 0; r < data.test.size(); ++r) {
    std::vector<std::int32_t> seq(static_cast<std::size_t>(cfg.maxlen));
    for (Index t = 0; t < cfg.maxlen; ++t) seq[static_cast<std::size_t>(t)] = data.test.sequences(r, t);
    auto it = by_encoding.find({seq, data.test.labels[static_cast<std::size_t>(r)]});
    if (it == by_encoding.end() || it->second.empty()) {
      matched = false;
      break;
    }
    in_test[it->second.back()] = true;
    it->second.pop_back();
  }
  out.require(matched, "a test row is not the tokenizer's encoding of any corpus sentence");
  std::vector<std::vector<std::string>> train_words;
  std::size_t test_only_oov = 0;
  std::set<std::string> train_vocab;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (in_test[i]) continue;
    train_words.push_back(words[i]);
    train_vocab.insert(words[i].begin(), words[i].end());
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!in_test[i]) continue;
    for (const auto& w : words[i]) {
      if (!train_vocab.count(w)) {
        ++test_only_oov;
        out.require(data.tokenizer.index_of(w) == Tokenizer::kOov, "test-only word \"" + w + "\" has an index");
      }
    }
  }
  out.require(Tokenizer::fit(train_words, cfg.vocab_size) == data.tokenizer,
              "tokenizer differs from a refit on the train side alone");

  const std::string bytes = encode_dataset({cfg, data});
  out.require(bytes == encode_dataset({cfg, preprocess(corpus, cfg)}), "pipeline is not byte-deterministic");
  out.note("train " + std::to_string(data.train.size()) + " rows (" +
           std::to_string(data.train.count(1)) + " per class), test " +
           std::to_string(data.test.size()) + ", " + std::to_string(data.tokenizer.words().size()) +
           " words, " + std::to_string(test_only_oov) + " test-only tokens mapped to OOV");
  return out;
}

// ------------------------------------------------------------------ 4, 5, 6

RunConfig separable_config() {
  RunConfig cfg;
  cfg.generator.total = 5000;
  cfg.generator.ratio = 10.0;
  cfg.generator.p_signal = 0.3;
  cfg.hp.hidden_size = 32;
  cfg.hp.epochs = 5;
  return cfg;
}

RunConfig no_signal_config() {
  RunConfig cfg;
  cfg.generator.total = 3520;
  cfg.generator.ratio = 175.0;
  cfg.generator.p_signal = 0.0;
  return cfg;
}

const fs::path kReportRoot = fs::temp_directory_path() / "fraudtext_acceptance";

CompareResult timed_compare(const RunConfig& cfg, double& secs, const std::string& report_dir) {
  const auto t0 = Clock::now();
  CompareResult r = run_compare(cfg, [](const CompareProgress& p) {
    std::fprintf(stderr, "    %s epoch %lld val_auc %s\n", std::string(architecture_name(p.arch)).c_str(),
                 static_cast<long long>(p.report.epoch), num(p.report.record.val_auc).c_str());
  });
  secs = seconds_since(t0);
  write_report(r, kReportRoot / report_dir);
  return r;
}

Outcome convergence() {
  Outcome out;
  double secs = 0.0;
  const CompareResult r = timed_compare(separable_config(), secs, "separable");
  for (const ModelRun& run : r.runs) {
    out.require(run.row.val_auc >= 0.95, run.row.model_name + " val_auc " + num(run.row.val_auc));
    out.note(run.row.model_name + ": val_auc " + num(run.row.val_auc) + " (best epoch " +
             std::to_string(run.row.best_epoch) + ")");
  }
  out.require(secs <= 300.0, "wall time " + num(secs, 1) + " s");
  out.note("wall time " + num(secs, 1) + " s");
  return out;
}

Outcome overfitting() {
  Outcome out;
  double secs = 0.0;
  const CompareResult r = timed_compare(no_signal_config(), secs, "no_signal");
  for (const ModelRun& run : r.runs) {
    double train_auc = 0.0;
    for (const EpochRecord& e : run.history) train_auc = std::max(train_auc, e.train_auc);
    const double val = run.row.val_auc;
    out.require(train_auc >= 0.99, run.row.model_name + " train_auc " + num(train_auc));
    out.require(val >= 0.35 && val <= 0.65, run.row.model_name + " val_auc " + num(val));
    out.note(run.row.model_name + ": max train_auc " + num(train_auc) + ", best-epoch val_auc " +
             num(val) + " (epoch " + std::to_string(run.row.best_epoch) + ")");
  }
  out.require(secs <= 600.0, "wall time " + num(secs, 1) + " s");
  out.note("wall time " + num(secs, 1) + " s");
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  Outcome out;
  RunConfig cfg = separable_config();
  cfg.generator.total = 1500;
  cfg.hp.epochs = 2;
  cfg.hp.maxlen = 60;
  for (const char* dir : {"rerun_a", "rerun_b"}) {
    fs::remove_all(kReportRoot / dir);
    write_report(run_compare(cfg), kReportRoot / dir);
  }
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(kReportRoot / "rerun_a")) {
    const fs::path other = kReportRoot / "rerun_b" / entry.path().filename();
    out.require(fs::exists(other) && slurp(entry.path()) == slurp(other),
                entry.path().filename().string() + " differs");
    ++files;
  }
  out.require(files == 7, std::to_string(files) + " report files");
  out.note(std::to_string(files) + " files byte-identical across two runs");
  return out;
}

// ------------------------------------------------------------------ 7

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

TokenMatrix random_tokens(SeededRng& rng, Index rows, Index cols, Index table) {
  TokenMatrix t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<std::int32_t>(rng.below(table));
  return t;
}

Checkpoint random_checkpoint(SeededRng& rng) {
  HyperParams hp;
  hp.vocab_size = 3 + static_cast<Index>(rng.below(40));
  hp.embedding_dim = 1 + static_cast<Index>(rng.below(6));
  hp.maxlen = 1 + static_cast<Index>(rng.below(10));
  hp.hidden_size = 1 + static_cast<Index>(rng.below(5));
  hp.dense_size = 1 + static_cast<Index>(rng.below(6));
  hp.batch_size = 4 + static_cast<Index>(rng.below(12));
  hp.epochs = 1;
  hp.seed = rng.next_u64();
  const Architecture arch = kArchitectures[rng.below(kArchitectures.size())];
  SeededRng model_rng(hp.seed);

  Checkpoint ckpt;
  ckpt.hp = hp;
  ckpt.model = build_model(arch, hp, model_rng);
  std::vector<std::string> vocab;
  for (Index w = 0; w < hp.vocab_size; ++w) vocab.push_back("w" + std::to_string(w));
  ckpt.tokenizer = Tokenizer::from_words(vocab, hp.vocab_size);

  // A short training run so batch-norm statistics, Adam moments and the
  // history are all non-trivial.
  EncodedDataset d;
  const Index n = 24;
  d.sequences = random_tokens(rng, n, hp.maxlen, hp.vocab_size + 2);
  for (Index i = 0; i < n; ++i) {
    d.labels.push_back(static_cast<int>(i % 2));
    d.times.push_back(Date{static_cast<std::int32_t>(i)});
  }
  TrainResult r = train(ckpt.model, d, d, train_config(hp), model_rng);
  ckpt.history = r.history;
  if (rng.bernoulli(0.5)) ckpt.adam = std::move(r.adam);
  return ckpt;
}

Outcome checkpoints() {
  Outcome out;
  SeededRng rng(777);
  const fs::path dir = kReportRoot / "checkpoints";
  fs::create_directories(dir);
  int identical = 0;
  std::vector<std::string> saved;
  for (int i = 0; i < 100; ++i) {
    const Checkpoint ckpt = random_checkpoint(rng);
    const fs::path path = dir / ("model_" + std::to_string(i) + ".ckpt");
    save_checkpoint(ckpt, path);
    const Checkpoint back = load_checkpoint(path);
    const TokenMatrix probe = random_tokens(rng, 1 + static_cast<Index>(rng.below(40)),
                                            ckpt.hp.maxlen, ckpt.hp.vocab_size + 2);
    identical += bitwise_equal(ckpt.model.predict(probe), back.model.predict(probe)) ? 1 : 0;
    if (i < 20) saved.push_back(slurp(path));
    fs::remove(path);
  }
  out.require(identical == 100, std::to_string(identical) + "/100 round trips bitwise identical");

  int detected = 0;
  int in_payload = 0;
  for (int i = 0; i < 20; ++i) {
    std::string bytes = saved[static_cast<std::size_t>(i)];
    // Half the corruptions land in the binary parameter section.
    const std::size_t data_start = bytes.find("\ndata\n") + 6;
    const bool payload = i % 2 == 0;
    const std::size_t lo = payload ? data_start : 0;
    const std::size_t pos = lo + rng.below(bytes.size() - lo);
    bytes[pos] = static_cast<char>(bytes[pos] ^ static_cast<char>(1 + rng.below(255)));
    in_payload += pos >= data_start ? 1 : 0;
    try {
      (void)decode_checkpoint(bytes);
    } catch (const IntegrityError&) {
      ++detected;
    }
  }
  out.require(detected == 20, std::to_string(detected) + "/20 corruptions detected");
  out.note(std::to_string(identical) + "/100 round trips bitwise identical; " + std::to_string(detected) +
           "/20 corruptions detected (" + std::to_string(in_payload) + " inside parameter data)");
  return out;
}

// ------------------------------------------------------------------ 8

Outcome best_epochs() {
  Outcome out;
  SeededRng rng(88);
  int agree = 0;
  int with_ties = 0;
  constexpr int kCases = 2000;
  for (int c = 0; c < kCases; ++c) {
    const Index epochs = 1 + static_cast<Index>(rng.below(30));
    // Coarse levels make repeated maxima common.
    const std::uint64_t levels = 2 + rng.below(c % 2 == 0 ? 4 : 1000);
    TrainHistory h;
    for (Index e = 0; e < epochs; ++e) {
      EpochRecord r;
      r.train_loss = rng.uniform();
      r.train_auc = rng.uniform();
      r.val_loss = rng.uniform();
      r.val_auc = static_cast<double>(rng.below(levels)) / static_cast<double>(levels - 1);
      h.push_back(r);
    }
    double top = -1.0;
    Index expected = 0;
    int count_top = 0;
    for (Index e = 0; e < epochs; ++e) top = std::max(top, h[static_cast<std::size_t>(e)].val_auc);
    for (Index e = epochs; e-- > 0;) {
      if (h[static_cast<std::size_t>(e)].val_auc == top) {
        expected = e + 1;
        ++count_top;
      }
    }
    with_ties += count_top > 1 ? 1 : 0;
    const auto [got, record] = best_epoch(h);
    const ResultRow row = make_result_row("m", h);
    const bool ok = got == expected && record == h[static_cast<std::size_t>(expected - 1)] &&
                    row.best_epoch == expected && row.val_auc == top &&
                    row.train_loss == record.train_loss;
    agree += ok ? 1 : 0;
  }
  out.require(agree == kCases, std::to_string(kCases - agree) + " mismatches");
  out.note(std::to_string(agree) + "/" + std::to_string(kCases) + " histories agree (" +
           std::to_string(with_ties) + " with tied maxima)");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  retain_heap_memory();
  const struct {
    int id;
    const char* title;
    Outcome (*run)();
  } criteria[] = {
      {1, "layer gradients match central finite differences", gradients},
      {2, "rank AUC equals the pairwise and trapezoid oracles", auc_oracles},
      {3, "pipeline invariants on a 10,000-sentence corpus", pipeline},
      {4, "separable corpus: every model reaches val AUC >= 0.95 within 5 minutes", convergence},
      {5, "no-signal corpus: train AUC >= 0.99, val AUC in [0.35, 0.65], within 10 minutes",
       overfitting},
      {6, "compare reruns are byte-identical", determinism},
      {7, "checkpoint round trips and corruption detection", checkpoints},
      {8, "best-epoch selection with earliest tie-break", best_epochs},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    std::fprintf(stderr, "criterion %d: running\n", c.id);
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("exception: ") + e.what());
    }
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::printf("criterion %d: %s  %s\n", c.id, o.pass ? "PASS" : "FAIL", c.title);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
