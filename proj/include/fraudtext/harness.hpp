// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fraudtext/checkpoint.hpp"
#include "fraudtext/corpus.hpp"
#include "fraudtext/error.hpp"

namespace fraudtext {

/**
 * Everything a compare run depends on. The text form is one `key = value`
 * per line with `#` comments; keys are the HyperParams and GeneratorConfig
 * field names (the generator seed is `generator_seed`) plus
 *
 *   corpus            CSV path; when empty the generator is used
 *   split_mode        stratified | chronological
 *   remove_stopwords  true | false
 *   models            comma list of architecture names
 *   clip_norm         global gradient-norm clip, 0 disables
 */
struct RunConfig {
  HyperParams hp;
  GeneratorConfig generator;
  std::string corpus;
  SplitMode split_mode = SplitMode::stratified;
  bool remove_stopwords = true;
  std::vector<Architecture> models{kArchitectures.begin(), kArchitectures.end()};
  double clip_norm = 0.0;

  /// Throws ConfigError for an unknown key or a bad value.
  void set(std::string_view key, std::string_view value);
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Unknown and repeated keys are errors; messages carry the 1-based line.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` override.
void apply_override(RunConfig& cfg, std::string_view assignment);

PipelineConfig pipeline_config(const RunConfig& cfg);
TrainConfig train_config(const HyperParams& hp, double clip_norm = 0.0);

/// A failure inside one stage of a run; what() starts with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ModelRun {
  Architecture arch = Architecture::simple_nn;
  TrainHistory history;
  ResultRow row;
};

struct CompareResult {
  Index train_rows = 0;  // after oversampling
  Index test_rows = 0;
  std::vector<ModelRun> runs;  // in kArchitectures order
};

struct CompareProgress {
  Architecture arch = Architecture::simple_nn;
  EpochReport report;
};

/**
 * Loads or generates the corpus, preprocesses it once and trains every
 * configured model on that split. Model i of the canonical order is built
 * and trained with seed hp.seed + i. Failures raise StageError.
 */
CompareResult run_compare(const RunConfig& cfg,
                          const std::function<void(const CompareProgress&)>& on_epoch = {});

std::string report_csv(const std::vector<ResultRow>& rows);
std::string report_table(const std::vector<ResultRow>& rows);
std::string history_csv(const TrainHistory& history);

/// Writes report.csv, report.txt and history_<model>.csv into `dir`.
void write_report(const CompareResult& result, const std::filesystem::path& dir);

}  // namespace fraudtext
