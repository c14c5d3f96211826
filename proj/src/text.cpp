// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/text.hpp"

#include <chrono>
#include <cstdio>
#include <numeric>

namespace fraudtext {

int encode_label(Label label) { return label == Label::f ? 1 : 0; }

Label decode_label(int value) {
  if (value != 0 && value != 1) {
    throw DataError("label value " + std::to_string(value) + " is not 0 or 1");
  }
  return value == 1 ? Label::f : Label::nf;
}

std::string_view label_name(Label label) { return label == Label::f ? "F" : "NF"; }

Label parse_label(std::string_view token) {
  if (token == "F") return Label::f;
  if (token == "NF") return Label::nf;
  throw ParseError("label \"" + std::string(token) + "\" is neither F nor NF");
}

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok()) {
    throw ParseError("invalid calendar date " + std::to_string(year) + "-" +
                     std::to_string(month) + "-" + std::to_string(day));
  }
  return Date{static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count())};
}

Date Date::parse(std::string_view iso) {
  const auto digits = [&](std::size_t from, std::size_t n) {
    int v = 0;
    for (std::size_t i = from; i < from + n; ++i) {
      if (iso[i] < '0' || iso[i] > '9') throw ParseError("");
      v = v * 10 + (iso[i] - '0');
    }
    return v;
  };
  try {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw ParseError("");
    return from_ymd(digits(0, 4), static_cast<unsigned>(digits(5, 2)),
                    static_cast<unsigned>(digits(8, 2)));
  } catch (const ParseError&) {
    throw ParseError("unparseable date \"" + std::string(iso) + "\" (expected YYYY-MM-DD)");
  }
}

std::string Date::iso() const {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string clean_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    char c = ch;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (!keep) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_words(std::string_view cleaned) {
  std::vector<std::string> words;
  std::size_t pos = 0;
  while (pos < cleaned.size()) {
    while (pos < cleaned.size() && cleaned[pos] == ' ') ++pos;
    const std::size_t start = pos;
    while (pos < cleaned.size() && cleaned[pos] != ' ') ++pos;
    if (pos > start) words.emplace_back(cleaned.substr(start, pos - start));
  }
  return words;
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& words,
                                          const WordSet& stoplist) {
  std::vector<std::string> kept;
  kept.reserve(words.size());
  for (const auto& w : words) {
    if (stoplist.find(w) == stoplist.end()) kept.push_back(w);
  }
  return kept;
}

Tokenizer Tokenizer::fit(const std::vector<std::vector<std::string>>& texts, Index vocab_size) {
  if (vocab_size < 1) throw ParameterError("tokenizer: vocab_size must be at least 1");
  struct Entry {
    std::size_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Entry> counts;
  std::vector<std::string> order;
  for (const auto& text : texts) {
    for (const auto& w : text) {
      auto [it, inserted] = counts.try_emplace(w);
      if (inserted) {
        it->second.first_seen = order.size();
        order.push_back(w);
      }
      ++it->second.count;
    }
  }
  if (order.empty()) throw DataError("tokenizer: cannot fit on an empty corpus");
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    return counts[a].count > counts[b].count;
  });
  if (static_cast<Index>(order.size()) > vocab_size) order.resize(static_cast<std::size_t>(vocab_size));
  return from_words(std::move(order), vocab_size);
}

Tokenizer Tokenizer::from_words(std::vector<std::string> words, Index vocab_size) {
  if (static_cast<Index>(words.size()) > vocab_size) {
    throw DataError("tokenizer: " + std::to_string(words.size()) + " words exceed vocab_size " +
                    std::to_string(vocab_size));
  }
  Tokenizer tok;
  tok.vocab_size_ = vocab_size;
  tok.words_ = std::move(words);
  for (std::size_t i = 0; i < tok.words_.size(); ++i) {
    if (!tok.index_.emplace(tok.words_[i], static_cast<std::int32_t>(i) + 2).second) {
      throw DataError("tokenizer: duplicate word \"" + tok.words_[i] + "\"");
    }
  }
  return tok;
}

std::int32_t Tokenizer::index_of(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? kOov : it->second;
}

std::vector<std::int32_t> Tokenizer::encode(const std::vector<std::string>& words) const {
  std::vector<std::int32_t> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(index_of(w));
  return ids;
}

std::vector<std::vector<std::int32_t>> texts_to_sequences(
    const std::vector<std::vector<std::string>>& texts, const Tokenizer& tokenizer) {
  std::vector<std::vector<std::int32_t>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(tokenizer.encode(t));
  return out;
}

TokenMatrix pad_sequences(const std::vector<std::vector<std::int32_t>>& sequences, Index maxlen) {
  if (maxlen < 1) throw ParameterError("pad_sequences: maxlen must be at least 1");
  TokenMatrix out = TokenMatrix::Constant(static_cast<Index>(sequences.size()), maxlen,
                                          Tokenizer::kPad);
  for (std::size_t r = 0; r < sequences.size(); ++r) {
    const Index n = std::min<Index>(maxlen, static_cast<Index>(sequences[r].size()));
    for (Index t = 0; t < n; ++t) out(static_cast<Index>(r), t) = sequences[r][static_cast<std::size_t>(t)];
  }
  return out;
}

void EncodedDataset::validate(Index table_rows) const {
  const auto n = static_cast<std::size_t>(sequences.rows());
  if (labels.size() != n || times.size() != n) {
    throw DataError("dataset: " + std::to_string(n) + " sequences but " +
                    std::to_string(labels.size()) + " labels and " +
                    std::to_string(times.size()) + " times");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("dataset: label " + std::to_string(y) + " is not 0/1");
  }
  if (sequences.size() > 0 &&
      (sequences.minCoeff() < 0 || sequences.maxCoeff() >= table_rows)) {
    throw DataError("dataset: token ids must lie in [0, " + std::to_string(table_rows) + ")");
  }
}

EncodedDataset EncodedDataset::subset(const std::vector<Index>& rows) const {
  EncodedDataset out;
  out.sequences.resize(static_cast<Index>(rows.size()), sequences.cols());
  out.labels.reserve(rows.size());
  out.times.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.sequences.row(static_cast<Index>(i)) = sequences.row(rows[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
    out.times.push_back(times[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

EncodedDataset oversample_minority(const EncodedDataset& train, SeededRng& rng) {
  const Index positives = train.count(1);
  const Index negatives = train.count(0);
  if (positives == 0 || negatives == 0) {
    throw DataError("oversample: both classes are required (got " + std::to_string(negatives) +
                    " NF and " + std::to_string(positives) + " F)");
  }
  const int minority = positives < negatives ? 1 : 0;
  std::vector<Index> minority_rows;
  for (Index i = 0; i < train.size(); ++i) {
    if (train.labels[static_cast<std::size_t>(i)] == minority) minority_rows.push_back(i);
  }
  std::vector<Index> rows(static_cast<std::size_t>(train.size()));
  std::iota(rows.begin(), rows.end(), Index{0});
  const Index extra = std::abs(positives - negatives);
  for (Index k = 0; k < extra; ++k) {
    rows.push_back(minority_rows[rng.below(minority_rows.size())]);
  }
  rng.shuffle(std::span<Index>(rows));
  return train.subset(rows);
}

std::string_view split_mode_name(SplitMode mode) {
  return mode == SplitMode::stratified ? "stratified" : "chronological";
}

SplitMode parse_split_mode(std::string_view name) {
  if (name == "stratified" || name == "random-stratified") return SplitMode::stratified;
  if (name == "chronological") return SplitMode::chronological;
  throw ConfigError("unknown split mode \"" + std::string(name) + "\"");
}

SplitIndices split_indices(const std::vector<Label>& labels, const std::vector<Date>& times,
                           double test_fraction, SeededRng& rng, SplitMode mode) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ParameterError("split: test_fraction " + std::to_string(test_fraction) +
                         " is outside (0, 1)");
  }
  const std::size_t n = labels.size();
  std::vector<char> is_test(n, 0);
  if (mode == SplitMode::stratified) {
    for (Label cls : {Label::nf, Label::f}) {
      std::vector<Index> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == cls) members.push_back(static_cast<Index>(i));
      }
      if (members.empty()) {
        throw DataError("split: class " + std::string(label_name(cls)) +
                        " is empty; stratified split needs both classes");
      }
      rng.shuffle(std::span<Index>(members));
      const auto n_test = static_cast<std::size_t>(
          std::llround(static_cast<double>(members.size()) * test_fraction));
      for (std::size_t k = 0; k < n_test; ++k) is_test[static_cast<std::size_t>(members[k])] = 1;
    }
  } else {
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return times[static_cast<std::size_t>(a)] < times[static_cast<std::size_t>(b)];
    });
    const auto n_test =
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    for (std::size_t k = n - n_test; k < n; ++k) is_test[static_cast<std::size_t>(order[k])] = 1;
  }
  SplitIndices out;
  for (std::size_t i = 0; i < n; ++i) {
    (is_test[i] ? out.test : out.train).push_back(static_cast<Index>(i));
  }
  return out;
}

namespace {

struct PreparedSentence {
  std::vector<std::string> words;
  Label label;
  Date time;
};

// Independent sub-streams of the pipeline seed.
enum Stream : std::uint64_t { kSplitStream = 1, kOversampleStream = 2 };

EncodedDataset encode(const std::vector<PreparedSentence>& records, const Tokenizer& tok,
                      Index maxlen) {
  std::vector<std::vector<std::int32_t>> seqs;
  EncodedDataset ds;
  seqs.reserve(records.size());
  for (const auto& r : records) {
    seqs.push_back(tok.encode(r.words));
    ds.labels.push_back(encode_label(r.label));
    ds.times.push_back(r.time);
  }
  ds.sequences = pad_sequences(seqs, maxlen);
  return ds;
}

}  // namespace

PreparedData preprocess(const std::vector<LabeledSentence>& corpus, const PipelineConfig& cfg) {
  if (corpus.empty()) throw DataError("preprocess: empty corpus");
  const WordSet empty;
  const WordSet& stoplist = cfg.remove_stopwords ? english_stopwords() : empty;
  std::vector<PreparedSentence> records;
  records.reserve(corpus.size());
  for (const auto& s : corpus) {
    records.push_back({remove_stopwords(split_words(clean_text(s.text)), stoplist), s.label,
                       s.time});
  }

  const SeededRng root(cfg.seed);
  SeededRng split_rng = root.derive(kSplitStream);
  auto [train, test] = split_train_test(records, cfg.test_fraction, split_rng, cfg.split_mode);

  std::vector<std::vector<std::string>> train_texts;
  train_texts.reserve(train.size());
  for (const auto& r : train) train_texts.push_back(r.words);

  PreparedData out;
  out.tokenizer = Tokenizer::fit(train_texts, cfg.vocab_size);
  const EncodedDataset encoded_train = encode(train, out.tokenizer, cfg.maxlen);
  out.train_rows_before_oversampling = encoded_train.size();
  SeededRng oversample_rng = root.derive(kOversampleStream);
  out.train = oversample_minority(encoded_train, oversample_rng);
  out.test = encode(test, out.tokenizer, cfg.maxlen);
  return out;
}

}  // namespace fraudtext
