// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/harness.hpp"

#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "fraudtext/format.hpp"

namespace fraudtext {
namespace {

std::string_view trim(std::string_view s) {
  const auto blank = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && blank(s.back())) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError(std::string(key) + ": expected " + std::string(want) + ", got \"" +
                    std::string(value) + "\"");
}

Index as_count(std::string_view key, std::string_view value) {
  const auto v = parse_integer(value);
  if (!v) bad_value(key, value, "an integer");
  return static_cast<Index>(*v);
}

double as_real(std::string_view key, std::string_view value) {
  const auto v = parse_double(value);
  if (!v) bad_value(key, value, "a number");
  return *v;
}

std::uint64_t as_seed(std::string_view key, std::string_view value) {
  const auto v = parse_unsigned(value);
  if (!v) bad_value(key, value, "a non-negative integer");
  return *v;
}

bool as_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

Date as_date(std::string_view key, std::string_view value) {
  try {
    return Date::parse(value);
  } catch (const ParseError&) {
    bad_value(key, value, "a YYYY-MM-DD date");
  }
}

// "175" or "175:1"
double as_ratio(std::string_view key, std::string_view value) {
  const std::size_t colon = value.find(':');
  if (colon == std::string_view::npos) return as_real(key, value);
  const auto num = parse_double(value.substr(0, colon));
  const auto den = parse_double(value.substr(colon + 1));
  if (!num || !den || !(*den > 0.0)) bad_value(key, value, "a ratio such as 175:1");
  return *num / *den;
}

std::vector<Architecture> as_models(std::string_view value) {
  std::set<Architecture> chosen;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t comma = std::min(value.find(',', start), value.size());
    const std::string_view name = trim(value.substr(start, comma - start));
    if (!name.empty()) chosen.insert(parse_architecture(name));
    start = comma + 1;
  }
  if (chosen.empty()) throw ConfigError("models: the list is empty");
  std::vector<Architecture> out;
  for (Architecture a : kArchitectures) {
    if (chosen.count(a)) out.push_back(a);
  }
  return out;
}

Index arch_index(Architecture a) {
  for (std::size_t i = 0; i < kArchitectures.size(); ++i) {
    if (kArchitectures[i] == a) return static_cast<Index>(i);
  }
  return 0;
}

template <class F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  if (key == "vocab_size") hp.vocab_size = as_count(key, value);
  else if (key == "embedding_dim") hp.embedding_dim = as_count(key, value);
  else if (key == "maxlen") hp.maxlen = as_count(key, value);
  else if (key == "batch_size") hp.batch_size = as_count(key, value);
  else if (key == "epochs") hp.epochs = as_count(key, value);
  else if (key == "learning_rate") hp.learning_rate = as_real(key, value);
  else if (key == "hidden_size") hp.hidden_size = as_count(key, value);
  else if (key == "dense_size") hp.dense_size = as_count(key, value);
  else if (key == "dropout_rate") hp.dropout_rate = as_real(key, value);
  else if (key == "test_fraction") hp.test_fraction = as_real(key, value);
  else if (key == "seed") hp.seed = as_seed(key, value);
  else if (key == "total") generator.total = as_count(key, value);
  else if (key == "ratio") generator.ratio = as_ratio(key, value);
  else if (key == "p_signal") generator.p_signal = as_real(key, value);
  else if (key == "base_vocab") generator.base_vocab = as_count(key, value);
  else if (key == "signal_vocab") generator.signal_vocab = as_count(key, value);
  else if (key == "min_length") generator.min_length = as_count(key, value);
  else if (key == "max_length") generator.max_length = as_count(key, value);
  else if (key == "p_stopword") generator.p_stopword = as_real(key, value);
  else if (key == "first_date") generator.first_date = as_date(key, value);
  else if (key == "last_date") generator.last_date = as_date(key, value);
  else if (key == "generator_seed") generator.seed = as_seed(key, value);
  else if (key == "corpus") corpus = std::string(value);
  else if (key == "split_mode") split_mode = parse_split_mode(value);
  else if (key == "remove_stopwords") remove_stopwords = as_bool(key, value);
  else if (key == "models") models = as_models(value);
  else if (key == "clip_norm") clip_norm = as_real(key, value);
  else throw ConfigError("unknown key \"" + std::string(key) + "\"");
}

void RunConfig::validate() const {
  hp.validate();
  if (corpus.empty()) generator.validate();
  if (models.empty()) throw ConfigError("models: the list is empty");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::string raw;
  for (Index line = 1; std::getline(in, raw); ++line) {
    std::string_view s = raw;
    if (const std::size_t hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const std::string where = "config line " + std::to_string(line) + ": ";
    const std::size_t eq = s.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string_view key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(where + "key \"" + std::string(key) + "\" appears twice");
    }
    try {
      cfg.set(key, trim(s.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override \"" + std::string(assignment) + "\" is not key=value");
  }
  cfg.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

PipelineConfig pipeline_config(const RunConfig& cfg) {
  PipelineConfig p;
  p.vocab_size = cfg.hp.vocab_size;
  p.maxlen = cfg.hp.maxlen;
  p.test_fraction = cfg.hp.test_fraction;
  p.split_mode = cfg.split_mode;
  p.seed = cfg.hp.seed;
  p.remove_stopwords = cfg.remove_stopwords;
  return p;
}

TrainConfig train_config(const HyperParams& hp, double clip_norm) {
  TrainConfig tc;
  tc.batch_size = hp.batch_size;
  tc.epochs = hp.epochs;
  tc.adam.learning_rate = hp.learning_rate;
  tc.clip_norm = clip_norm;
  return tc;
}

CompareResult run_compare(const RunConfig& cfg,
                          const std::function<void(const CompareProgress&)>& on_epoch) {
  in_stage("config", [&] { cfg.validate(); });
  const auto corpus = in_stage("corpus", [&] {
    return cfg.corpus.empty() ? generate_corpus(cfg.generator) : load_corpus(cfg.corpus);
  });
  const PreparedData data = in_stage("preprocess", [&] { return preprocess(corpus, pipeline_config(cfg)); });

  CompareResult result;
  result.train_rows = data.train.size();
  result.test_rows = data.test.size();
  for (Architecture arch : cfg.models) {
    const std::string name(architecture_name(arch));
    result.runs.push_back(in_stage("train " + name, [&] {
      SeededRng rng(cfg.hp.seed + static_cast<std::uint64_t>(arch_index(arch)));
      Model model = build_model(arch, cfg.hp, rng);
      TrainResult r = train(model, data.train, data.test, train_config(cfg.hp, cfg.clip_norm), rng,
                            [&](const EpochReport& e) {
                              if (on_epoch) on_epoch({arch, e});
                            });
      ModelRun run;
      run.arch = arch;
      run.row = make_result_row(name, r.history);
      run.history = std::move(r.history);
      return run;
    }));
  }
  return result;
}

std::string report_csv(const std::vector<ResultRow>& rows) {
  std::string out = "model,train_loss,train_auc,val_loss,val_auc,best_epoch\n";
  for (const ResultRow& r : rows) {
    out += r.model_name + "," + exact_decimal(r.train_loss) + "," + exact_decimal(r.train_auc) + "," +
           exact_decimal(r.val_loss) + "," + exact_decimal(r.val_auc) + "," +
           std::to_string(r.best_epoch) + "\n";
  }
  return out;
}

std::string report_table(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %10s %10s %10s %10s %10s\n", "model", "train_loss",
                "train_auc", "val_loss", "val_auc", "best_epoch");
  out << line;
  for (const ResultRow& r : rows) {
    std::snprintf(line, sizeof line, "%-12s %10s %10s %10s %10s %10lld\n", r.model_name.c_str(),
                  fixed(r.train_loss, 4).c_str(), fixed(r.train_auc, 4).c_str(),
                  fixed(r.val_loss, 4).c_str(), fixed(r.val_auc, 4).c_str(),
                  static_cast<long long>(r.best_epoch));
    out << line;
  }
  return out.str();
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,train_loss,train_auc,val_loss,val_auc\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const EpochRecord& r = history[e];
    out += std::to_string(e + 1) + "," + exact_decimal(r.train_loss) + "," + exact_decimal(r.train_auc) +
           "," + exact_decimal(r.val_loss) + "," + exact_decimal(r.val_auc) + "\n";
  }
  return out;
}

void write_report(const CompareResult& result, const std::filesystem::path& dir) {
  in_stage("report", [&] {
    std::filesystem::create_directories(dir);
    std::vector<ResultRow> rows;
    for (const ModelRun& run : result.runs) {
      rows.push_back(run.row);
      write_file(dir / ("history_" + run.row.model_name + ".csv"), history_csv(run.history));
    }
    write_file(dir / "report.csv", report_csv(rows));
    write_file(dir / "report.txt", report_table(rows));
  });
}

}  // namespace fraudtext
