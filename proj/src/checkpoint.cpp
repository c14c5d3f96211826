// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/checkpoint.hpp"

#include <set>

#include "fraudtext/error.hpp"
#include "fraudtext/format.hpp"

namespace fraudtext {
namespace {

constexpr std::string_view kCheckpointKind = "checkpoint";
constexpr std::string_view kDatasetKind = "dataset";

Index get_count(const Container& c, std::string_view key) {
  const auto v = parse_integer(c.get(key));
  if (!v) throw IntegrityError("container: field " + std::string(key) + " is not an integer");
  return static_cast<Index>(*v);
}

double get_real(const Container& c, std::string_view key) {
  const auto v = parse_double(c.get(key));
  if (!v) throw IntegrityError("container: field " + std::string(key) + " is not a number");
  return *v;
}

std::uint64_t get_seed(const Container& c, std::string_view key) {
  const auto v = parse_unsigned(c.get(key));
  if (!v) throw IntegrityError("container: field " + std::string(key) + " is not a seed");
  return *v;
}

void put_hyperparams(Container& c, const HyperParams& hp) {
  c.set("vocab_size", std::to_string(hp.vocab_size));
  c.set("embedding_dim", std::to_string(hp.embedding_dim));
  c.set("maxlen", std::to_string(hp.maxlen));
  c.set("batch_size", std::to_string(hp.batch_size));
  c.set("epochs", std::to_string(hp.epochs));
  c.set("learning_rate", exact_decimal(hp.learning_rate));
  c.set("hidden_size", std::to_string(hp.hidden_size));
  c.set("dense_size", std::to_string(hp.dense_size));
  c.set("dropout_rate", exact_decimal(hp.dropout_rate));
  c.set("test_fraction", exact_decimal(hp.test_fraction));
  c.set("seed", std::to_string(hp.seed));
}

HyperParams get_hyperparams(const Container& c) {
  HyperParams hp;
  hp.vocab_size = get_count(c, "vocab_size");
  hp.embedding_dim = get_count(c, "embedding_dim");
  hp.maxlen = get_count(c, "maxlen");
  hp.batch_size = get_count(c, "batch_size");
  hp.epochs = get_count(c, "epochs");
  hp.learning_rate = get_real(c, "learning_rate");
  hp.hidden_size = get_count(c, "hidden_size");
  hp.dense_size = get_count(c, "dense_size");
  hp.dropout_rate = get_real(c, "dropout_rate");
  hp.test_fraction = get_real(c, "test_fraction");
  hp.seed = get_seed(c, "seed");
  try {
    hp.validate();
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint: ") + e.what());
  }
  return hp;
}

void put_tokenizer(Container& c, const Tokenizer& tok) {
  c.set("tokenizer_vocab_size", std::to_string(tok.vocab_size()));
  c.blobs.push_back(Blob::strings("tokenizer.words", tok.words()));
}

Tokenizer get_tokenizer(const Container& c) {
  const Blob& words = c.blob("tokenizer.words");
  if (words.type != BlobType::text) throw IntegrityError("container: tokenizer.words is not text");
  try {
    return Tokenizer::from_words(words.text, get_count(c, "tokenizer_vocab_size"));
  } catch (const IntegrityError&) {
    throw;
  } catch (const Error& e) {
    throw IntegrityError(std::string("container: tokenizer: ") + e.what());
  }
}

Matrix checked_matrix(const Container& c, const std::string& name, Index rows, Index cols) {
  const Blob& b = c.blob(name);
  if (b.type != BlobType::f64 || b.rows != rows || b.cols != cols) {
    throw IntegrityError("checkpoint: blob \"" + name + "\" is " + shape_string(b.rows, b.cols) +
                         ", expected " + shape_string(rows, cols));
  }
  return b.as_matrix();
}

void put_encoded(Container& c, const std::string& prefix, const EncodedDataset& d) {
  c.blobs.push_back(Blob::tokens(prefix + ".sequences", d.sequences));
  TokenMatrix labels(d.size(), 1), days(d.size(), 1);
  for (Index i = 0; i < d.size(); ++i) {
    labels(i, 0) = d.labels[static_cast<std::size_t>(i)];
    days(i, 0) = d.times[static_cast<std::size_t>(i)].days;
  }
  c.blobs.push_back(Blob::tokens(prefix + ".labels", labels));
  c.blobs.push_back(Blob::tokens(prefix + ".days", days));
}

EncodedDataset get_encoded(const Container& c, const std::string& prefix, Index maxlen) {
  EncodedDataset d;
  d.sequences = c.blob(prefix + ".sequences").as_tokens();
  const TokenMatrix labels = c.blob(prefix + ".labels").as_tokens();
  const TokenMatrix days = c.blob(prefix + ".days").as_tokens();
  const Index n = d.sequences.rows();
  if (d.sequences.cols() != maxlen || labels.rows() != n || labels.cols() != 1 ||
      days.rows() != n || days.cols() != 1) {
    throw IntegrityError("dataset: " + prefix + " blobs disagree in shape");
  }
  for (Index i = 0; i < n; ++i) {
    d.labels.push_back(labels(i, 0));
    d.times.push_back(Date{days(i, 0)});
  }
  return d;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Container c;
  c.kind = std::string(kCheckpointKind);
  c.set("architecture", std::string(architecture_name(ckpt.model.spec().arch)));
  c.set("spec", ckpt.model.spec().describe());
  put_hyperparams(c, ckpt.hp);
  put_tokenizer(c, ckpt.tokenizer);

  const auto tensors = ckpt.model.tensors();
  for (const auto& t : tensors) c.blobs.push_back(Blob::matrix("param." + t.name, *t.value));

  Matrix history(static_cast<Index>(ckpt.history.size()), 4);
  for (std::size_t e = 0; e < ckpt.history.size(); ++e) {
    const EpochRecord& r = ckpt.history[e];
    history.row(static_cast<Index>(e)) << r.train_loss, r.train_auc, r.val_loss, r.val_auc;
  }
  c.blobs.push_back(Blob::matrix("history", history));

  c.set("adam", ckpt.adam ? "1" : "0");
  if (ckpt.adam) {
    const AdamState& a = *ckpt.adam;
    c.set("adam_step", std::to_string(a.step));
    c.set("adam_learning_rate", exact_decimal(a.config.learning_rate));
    c.set("adam_beta1", exact_decimal(a.config.beta1));
    c.set("adam_beta2", exact_decimal(a.config.beta2));
    c.set("adam_epsilon", exact_decimal(a.config.epsilon));
    std::size_t k = 0;
    for (const auto& t : tensors) {
      if (!t.trainable) continue;
      if (k >= a.m.size() || k >= a.v.size()) throw ShapeError("checkpoint: Adam state is incomplete");
      c.blobs.push_back(Blob::matrix("adam.m." + t.name, a.m[k]));
      c.blobs.push_back(Blob::matrix("adam.v." + t.name, a.v[k]));
      ++k;
    }
  }
  return encode_container(c);
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  const Container c = decode_container(bytes, kCheckpointKind);
  Checkpoint ckpt;
  ckpt.hp = get_hyperparams(c);
  Architecture arch{};
  try {
    arch = parse_architecture(c.get("architecture"));
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint: ") + e.what());
  }
  SeededRng scratch(0);
  ckpt.model = build_model(arch, ckpt.hp, scratch);
  if (c.get("spec") != ckpt.model.spec().describe()) {
    throw IntegrityError("checkpoint: stored layer list does not match " +
                         std::string(architecture_name(arch)));
  }
  ckpt.tokenizer = get_tokenizer(c);
  if (ckpt.tokenizer.table_rows() != ckpt.model.vocab_rows()) {
    throw IntegrityError("checkpoint: tokenizer and embedding table sizes disagree");
  }

  std::set<std::string> expected{"tokenizer.words", "history"};
  for (auto& t : ckpt.model.tensors()) {
    const std::string name = "param." + t.name;
    *t.value = checked_matrix(c, name, t.value->rows(), t.value->cols());
    expected.insert(name);
  }

  const Blob& history = c.blob("history");
  if (history.type != BlobType::f64 || history.cols != 4) {
    throw IntegrityError("checkpoint: history blob has the wrong shape");
  }
  const Matrix h = history.as_matrix();
  for (Index e = 0; e < h.rows(); ++e) ckpt.history.push_back({h(e, 0), h(e, 1), h(e, 2), h(e, 3)});

  if (c.get("adam") == "1") {
    AdamState a;
    a.step = get_count(c, "adam_step");
    a.config = {get_real(c, "adam_learning_rate"), get_real(c, "adam_beta1"),
                get_real(c, "adam_beta2"), get_real(c, "adam_epsilon")};
    for (const auto& t : std::as_const(ckpt.model).tensors()) {
      if (!t.trainable) continue;
      for (const char* part : {"adam.m.", "adam.v."}) {
        const std::string name = part + t.name;
        (part[5] == 'm' ? a.m : a.v).push_back(checked_matrix(c, name, t.value->rows(), t.value->cols()));
        expected.insert(name);
      }
    }
    ckpt.adam = std::move(a);
  } else if (c.get("adam") != "0") {
    throw IntegrityError("checkpoint: bad adam flag");
  }
  for (const Blob& b : c.blobs) {
    if (!expected.count(b.name)) throw IntegrityError("checkpoint: unexpected blob \"" + b.name + "\"");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

std::string encode_dataset(const DatasetFile& file) {
  Container c;
  c.kind = std::string(kDatasetKind);
  const PipelineConfig& p = file.config;
  c.set("vocab_size", std::to_string(p.vocab_size));
  c.set("maxlen", std::to_string(p.maxlen));
  c.set("test_fraction", exact_decimal(p.test_fraction));
  c.set("split_mode", std::string(split_mode_name(p.split_mode)));
  c.set("seed", std::to_string(p.seed));
  c.set("remove_stopwords", p.remove_stopwords ? "1" : "0");
  c.set("stopword_list", std::string(kStopwordListVersion));
  c.set("train_rows_before_oversampling", std::to_string(file.data.train_rows_before_oversampling));
  put_tokenizer(c, file.data.tokenizer);
  put_encoded(c, "train", file.data.train);
  put_encoded(c, "test", file.data.test);
  return encode_container(c);
}

DatasetFile decode_dataset(std::string_view bytes) {
  const Container c = decode_container(bytes, kDatasetKind);
  DatasetFile f;
  f.config.vocab_size = get_count(c, "vocab_size");
  f.config.maxlen = get_count(c, "maxlen");
  f.config.test_fraction = get_real(c, "test_fraction");
  try {
    f.config.split_mode = parse_split_mode(c.get("split_mode"));
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("dataset: ") + e.what());
  }
  f.config.seed = get_seed(c, "seed");
  f.config.remove_stopwords = c.get("remove_stopwords") == "1";
  f.data.train_rows_before_oversampling = get_count(c, "train_rows_before_oversampling");
  f.data.tokenizer = get_tokenizer(c);
  if (f.data.tokenizer.vocab_size() != f.config.vocab_size || f.config.maxlen < 1) {
    throw IntegrityError("dataset: tokenizer does not match the stored configuration");
  }
  f.data.train = get_encoded(c, "train", f.config.maxlen);
  f.data.test = get_encoded(c, "test", f.config.maxlen);
  try {
    f.data.train.validate(f.data.tokenizer.table_rows());
    f.data.test.validate(f.data.tokenizer.table_rows());
  } catch (const DataError& e) {
    throw IntegrityError(std::string("dataset: ") + e.what());
  }
  return f;
}

void save_dataset(const DatasetFile& file, const std::filesystem::path& path) {
  write_file(path, encode_dataset(file));
}

DatasetFile load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

}  // namespace fraudtext
