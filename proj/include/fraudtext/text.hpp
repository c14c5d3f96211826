// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fraudtext/error.hpp"
#include "fraudtext/rng.hpp"
#include "fraudtext/tensor.hpp"

namespace fraudtext {

// ------------------------------------------------------------------ records

enum class Label { nf, f };

/// F -> 1, NF -> 0.
int encode_label(Label label);
Label decode_label(int value);
std::string_view label_name(Label label);
/// Accepts exactly "F" or "NF".
Label parse_label(std::string_view token);

/// Calendar date stored as days since 1970-01-01.
struct Date {
  std::int32_t days = 0;

  static Date from_ymd(int year, unsigned month, unsigned day);
  /// Strict ISO-8601 YYYY-MM-DD; throws ParseError.
  static Date parse(std::string_view iso);
  std::string iso() const;

  auto operator<=>(const Date&) const = default;
};

struct LabeledSentence {
  std::string text;
  Label label = Label::nf;
  Date time;

  bool operator==(const LabeledSentence&) const = default;
};

// ----------------------------------------------------------------- cleaning

/// Lowercase, map every character outside [a-z0-9 ] to a space, collapse
/// whitespace runs and trim.
std::string clean_text(std::string_view raw);

std::vector<std::string> split_words(std::string_view cleaned);

using WordSet = std::unordered_set<std::string>;

/// The bundled English stop-word list (see kStopwordListVersion).
const WordSet& english_stopwords();
inline constexpr std::string_view kStopwordListVersion = "en-2023.1";

std::vector<std::string> remove_stopwords(const std::vector<std::string>& words,
                                          const WordSet& stoplist);

// ---------------------------------------------------------------- tokenizer

/**
 * Frozen word -> index map. Index 0 is padding, 1 is out-of-vocabulary and
 * fitted words take 2, 3, ... by descending training frequency, ties going
 * to the word seen first. At most vocab_size words are kept.
 */
class Tokenizer {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kOov = 1;

  Tokenizer() = default;

  /// Throws DataError on an empty corpus.
  static Tokenizer fit(const std::vector<std::vector<std::string>>& texts, Index vocab_size);

  /// Rebuild from words already in index order (index 2 first).
  static Tokenizer from_words(std::vector<std::string> words, Index vocab_size);

  std::int32_t index_of(std::string_view word) const;
  std::vector<std::int32_t> encode(const std::vector<std::string>& words) const;

  const std::vector<std::string>& words() const { return words_; }
  Index vocab_size() const { return vocab_size_; }
  /// Rows an embedding table needs: vocab_size + 2 reserved/fitted slots.
  Index table_rows() const { return vocab_size_ + 2; }

  bool operator==(const Tokenizer& other) const {
    return vocab_size_ == other.vocab_size_ && words_ == other.words_;
  }

 private:
  Index vocab_size_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int32_t> index_;
};

std::vector<std::vector<std::int32_t>> texts_to_sequences(
    const std::vector<std::vector<std::string>>& texts, const Tokenizer& tokenizer);

/// Post-padding with 0 and post-truncation to exactly maxlen columns.
TokenMatrix pad_sequences(const std::vector<std::vector<std::int32_t>>& sequences, Index maxlen);

// ------------------------------------------------------------------ dataset

struct EncodedDataset {
  TokenMatrix sequences;       // rows x maxlen
  std::vector<int> labels;     // 0 or 1
  std::vector<Date> times;

  Index size() const { return sequences.rows(); }
  Index count(int label) const {
    return static_cast<Index>(std::count(labels.begin(), labels.end(), label));
  }
  /// Throws DataError if lengths disagree, labels are not 0/1 or a token id
  /// is >= table_rows.
  void validate(Index table_rows) const;
  EncodedDataset subset(const std::vector<Index>& rows) const;

  bool operator==(const EncodedDataset& other) const {
    return sequences == other.sequences && labels == other.labels && times == other.times;
  }
};

/// Duplicates minority rows, sampled with replacement, until both classes
/// have equal counts, then shuffles all rows. Throws DataError when a class
/// is missing.
EncodedDataset oversample_minority(const EncodedDataset& train, SeededRng& rng);

// -------------------------------------------------------------------- split

enum class SplitMode { stratified, chronological };

std::string_view split_mode_name(SplitMode mode);
SplitMode parse_split_mode(std::string_view name);

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> test;
};

/**
 * Row indices of a train/test partition, each list in ascending order.
 * stratified: every class contributes round(n_class * test_fraction) randomly
 * chosen rows to the test side. chronological: rows are ordered by time
 * (stable) and the latest round(n * test_fraction) form the test side.
 */
SplitIndices split_indices(const std::vector<Label>& labels, const std::vector<Date>& times,
                           double test_fraction, SeededRng& rng, SplitMode mode);

template <typename Record>
std::pair<std::vector<Record>, std::vector<Record>> split_train_test(
    const std::vector<Record>& data, double test_fraction, SeededRng& rng, SplitMode mode) {
  std::vector<Label> labels;
  std::vector<Date> times;
  labels.reserve(data.size());
  times.reserve(data.size());
  for (const Record& r : data) {
    labels.push_back(r.label);
    times.push_back(r.time);
  }
  const SplitIndices idx = split_indices(labels, times, test_fraction, rng, mode);
  std::pair<std::vector<Record>, std::vector<Record>> out;
  for (Index i : idx.train) out.first.push_back(data[static_cast<std::size_t>(i)]);
  for (Index i : idx.test) out.second.push_back(data[static_cast<std::size_t>(i)]);
  return out;
}

// ----------------------------------------------------------------- pipeline

struct PipelineConfig {
  Index vocab_size = 20000;
  Index maxlen = 200;
  double test_fraction = 0.2;
  SplitMode split_mode = SplitMode::stratified;
  std::uint64_t seed = 42;
  bool remove_stopwords = true;
};

struct PreparedData {
  Tokenizer tokenizer;
  EncodedDataset train;  // oversampled
  EncodedDataset test;
  Index train_rows_before_oversampling = 0;
};

/// clean -> drop stop words -> split -> fit tokenizer on train -> encode and
/// pad both sides -> oversample train.
PreparedData preprocess(const std::vector<LabeledSentence>& corpus, const PipelineConfig& cfg);

}  // namespace fraudtext
