// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "fraudtext/container.hpp"
#include "fraudtext/metrics.hpp"
#include "fraudtext/model.hpp"
#include "fraudtext/text.hpp"
#include "fraudtext/train.hpp"

namespace fraudtext {

struct Checkpoint {
  Model model;
  HyperParams hp;
  Tokenizer tokenizer;
  TrainHistory history;
  std::optional<AdamState> adam;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws IntegrityError (VersionError for another format version) on any
/// damage, missing tensor or shape disagreement.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Encoded dataset: the split, oversampled train side, test side and the
/// tokenizer they were encoded with.
struct DatasetFile {
  PipelineConfig config;
  PreparedData data;
};

std::string encode_dataset(const DatasetFile& file);
DatasetFile decode_dataset(std::string_view bytes);

void save_dataset(const DatasetFile& file, const std::filesystem::path& path);
DatasetFile load_dataset(const std::filesystem::path& path);

}  // namespace fraudtext
