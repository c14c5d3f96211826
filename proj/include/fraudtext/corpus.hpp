// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fraudtext/text.hpp"

namespace fraudtext {

/**
 * Corpus CSV: header `text,label,time`, RFC-4180 quoting, label F or NF and
 * an ISO date. Errors carry the 1-based line where the offending record
 * starts.
 */
std::vector<LabeledSentence> read_corpus(std::istream& in);
std::vector<LabeledSentence> load_corpus(const std::filesystem::path& path);

void write_corpus(std::ostream& out, const std::vector<LabeledSentence>& corpus);
void save_corpus(const std::filesystem::path& path, const std::vector<LabeledSentence>& corpus);

struct GeneratorConfig {
  Index total = 3520;
  double ratio = 175.0;      // NF per F
  double p_signal = 0.3;     // per-token replacement probability in F sentences
  Index base_vocab = 2000;
  Index signal_vocab = 50;
  Index min_length = 10;
  Index max_length = 30;
  double p_stopword = 0.15;  // chance of a stop word before each token
  Date first_date = Date::from_ymd(2000, 12, 1);
  Date last_date = Date::from_ymd(2022, 7, 31);
  std::uint64_t seed = 42;

  /// Throws ConfigError naming the first bad field.
  void validate() const;
  Index minority_count() const;
};

/// Synthetic vocabularies: disjoint, stop-word free, stable under clean_text.
std::vector<std::string> base_words(Index count);
std::vector<std::string> signal_words(Index count);

/**
 * NF and F sentences share one construction: a length drawn uniformly from
 * [min_length, max_length] and uniform base-vocabulary tokens. In F sentences
 * each token is then replaced by a uniform signal token with probability
 * p_signal. F count is round(total / (ratio + 1)); labels are placed in
 * random order and dates drawn uniformly from the configured range.
 */
std::vector<LabeledSentence> generate_corpus(const GeneratorConfig& cfg);

}  // namespace fraudtext
