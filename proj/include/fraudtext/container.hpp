// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fraudtext/tensor.hpp"

namespace fraudtext {

inline constexpr int kFormatVersion = 1;

enum class BlobType { f64, i32, text };

/// One named payload. f64 and i32 blobs are rows x cols, row-major; text
/// blobs hold `rows` newline-free strings.
struct Blob {
  std::string name;
  BlobType type = BlobType::f64;
  Index rows = 0;
  Index cols = 0;
  std::vector<double> f64;
  std::vector<std::int32_t> i32;
  std::vector<std::string> text;

  static Blob matrix(std::string name, const Matrix& m);
  static Blob tokens(std::string name, const TokenMatrix& m);
  static Blob strings(std::string name, std::vector<std::string> items);

  /// These throw IntegrityError when the blob has another type.
  Matrix as_matrix() const;
  TokenMatrix as_tokens() const;
};

/**
 * Self-describing file:
 *
 *   fraudtext <kind>
 *   format_version 1
 *   meta <key> <value>          (any number, value runs to end of line)
 *   blob <name> <type> <rows> <cols>
 *   data
 *   <payloads, little-endian, in blob order>
 *   end
 *   crc32 <8 hex digits>        (CRC-32 of every byte before this line)
 */
struct Container {
  std::string kind;
  int version = kFormatVersion;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<Blob> blobs;

  void set(std::string key, std::string value);
  bool has(std::string_view key) const;
  /// Throws IntegrityError when the key is missing.
  const std::string& get(std::string_view key) const;
  const Blob& blob(std::string_view name) const;
  bool has_blob(std::string_view name) const;
};

std::string encode_container(const Container& c);

/**
 * Checks the checksum first, then the structure. Any damage raises
 * IntegrityError; a well-formed file of another format version raises
 * VersionError, and one of another kind IntegrityError.
 */
Container decode_container(std::string_view bytes, std::string_view expected_kind);

/// Writes through a temporary file and a rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

std::uint32_t crc32_of(std::string_view bytes);

}  // namespace fraudtext
