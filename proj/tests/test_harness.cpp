// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fraudtext/harness.hpp"

using namespace fraudtext;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string config_error(const std::string& text) {
  try {
    (void)parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

RunConfig small_run() {
  return parse(
      "# small separable run\n"
      "total = 160\nratio = 3:1\np_signal = 0.5\nbase_vocab = 60\nsignal_vocab = 5\n"
      "min_length = 3\nmax_length = 8\n"
      "vocab_size = 40\nembedding_dim = 3\nmaxlen = 8\nbatch_size = 32\nepochs = 2\n"
      "hidden_size = 2\ndense_size = 3\nlearning_rate = 0.01\n");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config: defaults, keys and comments") {
  const RunConfig d = parse("");
  CHECK(d.hp.vocab_size == 20000);
  CHECK(d.hp.embedding_dim == 150);
  CHECK(d.hp.batch_size == 256);
  CHECK(d.hp.epochs == 10);
  CHECK(d.generator.ratio == 175.0);
  CHECK(d.models.size() == 5);

  const RunConfig c = parse(
      "epochs = 3   # fewer\n\n  learning_rate=0.005\nratio = 10:1\nfirst_date = 2010-01-01\n"
      "split_mode = chronological\nremove_stopwords = false\nmodels = gru, simple_nn\n"
      "generator_seed = 9\nseed = 4\nclip_norm = 1.5\ncorpus = data/x.csv\n");
  CHECK(c.hp.epochs == 3);
  CHECK(c.hp.learning_rate == 0.005);
  CHECK(c.generator.ratio == 10.0);
  CHECK(c.generator.first_date == Date::from_ymd(2010, 1, 1));
  CHECK(c.split_mode == SplitMode::chronological);
  CHECK_FALSE(c.remove_stopwords);
  CHECK(c.models == std::vector<Architecture>{Architecture::simple_nn, Architecture::gru});
  CHECK(c.generator.seed == 9);
  CHECK(c.hp.seed == 4);
  CHECK(c.clip_norm == 1.5);
  CHECK(c.corpus == "data/x.csv");
}

TEST_CASE("config: errors carry the line") {
  CHECK(config_error("epochs = 2\nbogus = 1\n").find("line 2") != std::string::npos);
  CHECK(config_error("bogus = 1\n").find("unknown key") != std::string::npos);
  CHECK(config_error("epochs = 2\n\nepochs = 3\n").find("line 3") != std::string::npos);
  CHECK(config_error("epochs = 2\nepochs\n").find("line 2") != std::string::npos);
  CHECK(config_error("epochs = two\n").find("line 1") != std::string::npos);
  CHECK(config_error("models = lstm, cnn\n").find("cnn") != std::string::npos);
  CHECK(config_error("ratio = 3:0\n") != "");
  CHECK(config_error("first_date = 2010-13-01\n") != "");

  RunConfig bad = parse("epochs = 0\n");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = parse("total = 50\nratio = 175\n");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = parse("total = 50\nratio = 175\ncorpus = x.csv\n");
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("config: overrides") {
  RunConfig c = parse("epochs = 3\n");
  apply_override(c, "epochs=7");
  apply_override(c, " hidden_size = 5 ");
  CHECK(c.hp.epochs == 7);
  CHECK(c.hp.hidden_size == 5);
  CHECK_THROWS_AS(apply_override(c, "epochs"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "nothing=1"), ConfigError);
}

TEST_CASE("report formats") {
  const std::vector<ResultRow> rows{{"simple_nn", 0.5, 1.0, 0.75, 0.5087, 3},
                                    {"vanilla_rnn", 0.125, 0.99, 0.1, 0.599, 10}};
  CHECK(report_csv(rows) ==
        "model,train_loss,train_auc,val_loss,val_auc,best_epoch\n"
        "simple_nn,0.5,1,0.75,0.5087,3\n"
        "vanilla_rnn,0.125,0.99,0.1,0.599,10\n");
  const std::string table = report_table(rows);
  CHECK(table.find("simple_nn        0.5000     1.0000     0.7500     0.5087          3") !=
        std::string::npos);
  CHECK(history_csv({{0.5, 0.6, 0.7, 0.8}}) == "epoch,train_loss,train_auc,val_loss,val_auc\n1,0.5,0.6,0.7,0.8\n");
}

TEST_CASE("compare: table order, seeds and byte-identical reruns") {
  RunConfig cfg = small_run();
  std::vector<std::string> seen;
  const CompareResult a = run_compare(cfg, [&](const CompareProgress& p) {
    if (p.report.epoch == 1) seen.emplace_back(architecture_name(p.arch));
  });
  REQUIRE(a.runs.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.runs[i].arch == kArchitectures[i]);
    CHECK(a.runs[i].history.size() == 2);
    CHECK(a.runs[i].row == make_result_row(a.runs[i].row.model_name, a.runs[i].history));
  }
  CHECK(seen.size() == 5);

  // Each model's result depends only on its own derived seed.
  cfg.models = {Architecture::gru};
  const CompareResult only = run_compare(cfg);
  REQUIRE(only.runs.size() == 1);
  CHECK(only.runs[0].history == a.runs[3].history);

  const auto dir = std::filesystem::temp_directory_path() / "fraudtext_compare_test";
  std::filesystem::remove_all(dir);
  write_report(a, dir / "one");
  write_report(run_compare(small_run()), dir / "two");
  for (const char* f : {"report.csv", "report.txt", "history_simple_nn.csv", "history_vanilla_rnn.csv",
                        "history_lstm.csv", "history_gru.csv", "history_multi_lstm.csv"}) {
    CAPTURE(f);
    const std::string one = slurp(dir / "one" / f);
    CHECK_FALSE(one.empty());
    CHECK(one == slurp(dir / "two" / f));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("compare: failures name the stage") {
  const auto stage_of = [](const RunConfig& cfg) -> std::string {
    try {
      (void)run_compare(cfg);
    } catch (const StageError& e) {
      CHECK(std::string(e.what()).rfind(e.stage() + ": ", 0) == 0);
      return e.stage();
    }
    return "";
  };
  RunConfig cfg = small_run();
  cfg.corpus = "/nonexistent/corpus.csv";
  CHECK(stage_of(cfg) == "corpus");

  cfg = small_run();
  cfg.hp.epochs = 0;
  CHECK(stage_of(cfg) == "config");

  // Every row of one class: the split leaves no minority rows to oversample.
  const auto path = std::filesystem::temp_directory_path() / "fraudtext_one_class.csv";
  {
    std::ofstream out(path);
    out << "text,label,time\n";
    for (int i = 0; i < 20; ++i) out << "alpha beta gamma " << i << ",NF,2010-01-01\n";
  }
  cfg = small_run();
  cfg.corpus = path.string();
  CHECK(stage_of(cfg) == "preprocess");
  std::filesystem::remove(path);
}
