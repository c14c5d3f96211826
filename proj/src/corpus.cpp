// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/corpus.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>

namespace fraudtext {

namespace {

std::string at_line(std::size_t line) { return "corpus line " + std::to_string(line) + ": "; }

// Reads one CSV record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  const std::size_t start = line;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  int ch;
  while ((ch = in.get()) != std::char_traits<char>::eof()) {
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || was_quoted) {
        throw ParseError(at_line(start) + "stray quote inside an unquoted field");
      }
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c == '\r' && in.peek() == '\n') {
      // CRLF terminator; the newline ends the record below.
    } else if (c == '\n') {
      ++line;
      fields.push_back(std::move(field));
      return true;
    } else {
      if (was_quoted) throw ParseError(at_line(start) + "text after a closing quote");
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError(at_line(start) + "unterminated quoted field");
  ++line;
  fields.push_back(std::move(field));
  return true;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Consonant-vowel syllables; words never contain 'q'.
constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

std::string syllable_word(std::size_t code, std::size_t min_syllables) {
  const std::size_t radix = kConsonants.size() * kVowels.size();
  std::string w;
  std::size_t n = 0;
  do {
    const std::size_t s = code % radix;
    w.push_back(kConsonants[s / kVowels.size()]);
    w.push_back(kVowels[s % kVowels.size()]);
    code /= radix;
    ++n;
  } while (code > 0 || n < min_syllables);
  return w;
}

std::vector<std::string> make_words(Index count, const std::string& prefix) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  const WordSet& stop = english_stopwords();
  for (std::size_t code = 0; static_cast<Index>(out.size()) < count; ++code) {
    std::string w = prefix + syllable_word(code, 2);
    if (stop.find(w) == stop.end()) out.push_back(std::move(w));
  }
  return out;
}

constexpr std::array<std::string_view, 8> kFillers{"the", "of", "and", "to", "in", "was", "by",
                                                   "for"};

}  // namespace

std::vector<LabeledSentence> read_corpus(std::istream& in) {
  std::size_t line = 1;
  std::vector<std::string> fields;
  if (!read_record(in, fields, line)) throw ParseError("corpus line 1: missing header");
  if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
  if (fields != std::vector<std::string>{"text", "label", "time"}) {
    throw ParseError("corpus line 1: header must be text,label,time");
  }
  std::vector<LabeledSentence> out;
  for (;;) {
    const std::size_t start = line;
    if (!read_record(in, fields, line)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != 3) {
      throw ParseError(at_line(start) + "expected 3 fields, found " + std::to_string(fields.size()));
    }
    if (blank(fields[0])) throw ParseError(at_line(start) + "empty text");
    LabeledSentence s;
    s.text = std::move(fields[0]);
    try {
      s.label = parse_label(fields[1]);
      s.time = Date::parse(fields[2]);
    } catch (const ParseError& e) {
      throw ParseError(at_line(start) + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LabeledSentence> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open corpus " + path.string());
  return read_corpus(in);
}

void write_corpus(std::ostream& out, const std::vector<LabeledSentence>& corpus) {
  out << "text,label,time\n";
  for (const auto& s : corpus) {
    out << quote(s.text) << ',' << label_name(s.label) << ',' << s.time.iso() << '\n';
  }
}

void save_corpus(const std::filesystem::path& path, const std::vector<LabeledSentence>& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus " + path.string());
  write_corpus(out, corpus);
  if (!out.flush()) throw Error("failed writing corpus " + path.string());
}

void GeneratorConfig::validate() const {
  if (total < 2) throw ConfigError("generator: total must be at least 2");
  if (!(ratio >= 1.0)) throw ConfigError("generator: ratio must be at least 1");
  if (!(p_signal >= 0.0 && p_signal <= 1.0)) throw ConfigError("generator: p_signal must lie in [0, 1]");
  if (!(p_stopword >= 0.0 && p_stopword < 1.0)) {
    throw ConfigError("generator: p_stopword must lie in [0, 1)");
  }
  if (base_vocab < 1 || signal_vocab < 1) throw ConfigError("generator: vocabularies must be non-empty");
  if (min_length < 1 || min_length > max_length) {
    throw ConfigError("generator: need 1 <= min_length <= max_length");
  }
  if (first_date > last_date) throw ConfigError("generator: first_date is after last_date");
  const Index minority = minority_count();
  if (minority < 1 || minority >= total) {
    throw ConfigError("generator: total " + std::to_string(total) + " at ratio " +
                      std::to_string(ratio) + " yields " + std::to_string(minority) +
                      " minority samples");
  }
}

Index GeneratorConfig::minority_count() const {
  return static_cast<Index>(std::llround(static_cast<double>(total) / (ratio + 1.0)));
}

std::vector<std::string> base_words(Index count) { return make_words(count, ""); }
std::vector<std::string> signal_words(Index count) { return make_words(count, "q"); }

std::vector<LabeledSentence> generate_corpus(const GeneratorConfig& cfg) {
  cfg.validate();
  const auto base = base_words(cfg.base_vocab);
  const auto signal = signal_words(cfg.signal_vocab);
  SeededRng rng(cfg.seed);

  std::vector<Label> labels(static_cast<std::size_t>(cfg.total), Label::nf);
  std::fill_n(labels.begin(), cfg.minority_count(), Label::f);
  rng.shuffle(std::span<Label>(labels));

  const auto span_days = static_cast<std::uint64_t>(cfg.last_date.days - cfg.first_date.days) + 1;
  std::vector<LabeledSentence> out;
  out.reserve(labels.size());
  for (Label label : labels) {
    const auto length = cfg.min_length + static_cast<Index>(rng.below(
                                             static_cast<std::uint64_t>(cfg.max_length - cfg.min_length + 1)));
    std::string text;
    for (Index k = 0; k < length; ++k) {
      if (rng.bernoulli(cfg.p_stopword)) {
        text += kFillers[rng.below(kFillers.size())];
        text += ' ';
      }
      const std::string* word = &base[rng.below(base.size())];
      // Drawn for both classes so the two share one random stream layout.
      const bool swap = rng.bernoulli(cfg.p_signal);
      const std::string& replacement = signal[rng.below(signal.size())];
      if (label == Label::f && swap) word = &replacement;
      text += *word;
      text += k + 1 == length ? "." : " ";
    }
    text[0] = static_cast<char>(text[0] - 'a' + 'A');
    const Date time{cfg.first_date.days + static_cast<std::int32_t>(rng.below(span_days))};
    out.push_back({std::move(text), label, time});
  }
  return out;
}

}  // namespace fraudtext
