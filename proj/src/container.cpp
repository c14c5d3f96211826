// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/container.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <system_error>

#include "fraudtext/error.hpp"

namespace fraudtext {
namespace {

constexpr std::string_view kMagic = "fraudtext ";
constexpr std::size_t kTrailerSize = 15;  // "crc32 " + 8 hex + '\n'

std::string_view type_name(BlobType t) {
  switch (t) {
    case BlobType::f64: return "f64";
    case BlobType::i32: return "i32";
    case BlobType::text: return "text";
  }
  return "?";
}

BlobType parse_type(std::string_view s) {
  if (s == "f64") return BlobType::f64;
  if (s == "i32") return BlobType::i32;
  if (s == "text") return BlobType::text;
  throw IntegrityError("container: unknown blob type \"" + std::string(s) + "\"");
}

bool is_token(std::string_view s) {
  return !s.empty() && std::none_of(s.begin(), s.end(), [](char ch) {
    return ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t';
  });
}

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

std::size_t payload_bytes(const Blob& b) {
  const auto n = static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols);
  switch (b.type) {
    case BlobType::f64: return n * 8;
    case BlobType::i32: return n * 4;
    case BlobType::text: return static_cast<std::size_t>(b.cols);
  }
  return 0;
}

Index parse_count(std::string_view s, std::string_view what) {
  long long v = -1;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || v < 0) {
    throw IntegrityError("container: bad " + std::string(what) + " \"" + std::string(s) + "\"");
  }
  return static_cast<Index>(v);
}

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t next = std::min(line.find(' ', pos), line.size());
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

// Line-oriented reader over the header part.
struct Cursor {
  std::string_view bytes;
  std::size_t pos = 0;

  std::string_view line() {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw IntegrityError("container: truncated header");
    const std::string_view out = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return out;
  }
};

}  // namespace

Blob Blob::matrix(std::string name, const Matrix& m) {
  Blob b;
  b.name = std::move(name);
  b.type = BlobType::f64;
  b.rows = m.rows();
  b.cols = m.cols();
  b.f64.assign(m.data(), m.data() + m.size());
  return b;
}

Blob Blob::tokens(std::string name, const TokenMatrix& m) {
  Blob b;
  b.name = std::move(name);
  b.type = BlobType::i32;
  b.rows = m.rows();
  b.cols = m.cols();
  b.i32.assign(m.data(), m.data() + m.size());
  return b;
}

Blob Blob::strings(std::string name, std::vector<std::string> items) {
  Blob b;
  b.name = std::move(name);
  b.type = BlobType::text;
  b.rows = static_cast<Index>(items.size());
  Index bytes = 0;
  for (const auto& s : items) {
    if (s.find('\n') != std::string::npos) {
      throw ParameterError("container: text item in \"" + b.name + "\" contains a newline");
    }
    bytes += static_cast<Index>(s.size()) + 1;
  }
  b.cols = bytes;
  b.text = std::move(items);
  return b;
}

Matrix Blob::as_matrix() const {
  if (type != BlobType::f64) throw IntegrityError("container: blob \"" + name + "\" is not f64");
  Matrix m(rows, cols);
  std::copy(f64.begin(), f64.end(), m.data());
  return m;
}

TokenMatrix Blob::as_tokens() const {
  if (type != BlobType::i32) throw IntegrityError("container: blob \"" + name + "\" is not i32");
  TokenMatrix m(rows, cols);
  std::copy(i32.begin(), i32.end(), m.data());
  return m;
}

void Container::set(std::string key, std::string value) {
  for (auto& [k, v] : meta) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  meta.emplace_back(std::move(key), std::move(value));
}

bool Container::has(std::string_view key) const {
  return std::any_of(meta.begin(), meta.end(), [&](const auto& kv) { return kv.first == key; });
}

const std::string& Container::get(std::string_view key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw IntegrityError("container: missing field \"" + std::string(key) + "\"");
}

bool Container::has_blob(std::string_view name) const {
  return std::any_of(blobs.begin(), blobs.end(), [&](const Blob& b) { return b.name == name; });
}

const Blob& Container::blob(std::string_view name) const {
  for (const Blob& b : blobs) {
    if (b.name == name) return b;
  }
  throw IntegrityError("container: missing blob \"" + std::string(name) + "\"");
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(
        std::min<std::size_t>(bytes.size() - pos, std::numeric_limits<uInt>::max()));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string encode_container(const Container& c) {
  if (!is_token(c.kind)) throw ParameterError("container: bad kind \"" + c.kind + "\"");
  std::string out;
  out += kMagic;
  out += c.kind;
  out += "\nformat_version " + std::to_string(c.version) + "\n";
  for (const auto& [k, v] : c.meta) {
    if (!is_token(k) || v.find('\n') != std::string::npos) {
      throw ParameterError("container: field \"" + k + "\" cannot be stored");
    }
    out += "meta " + k + " " + v + "\n";
  }
  for (const Blob& b : c.blobs) {
    if (!is_token(b.name)) throw ParameterError("container: bad blob name \"" + b.name + "\"");
    const auto n = static_cast<std::size_t>(b.rows * b.cols);
    const bool sized = (b.type == BlobType::f64 && b.f64.size() == n) ||
                       (b.type == BlobType::i32 && b.i32.size() == n) ||
                       (b.type == BlobType::text && b.text.size() == static_cast<std::size_t>(b.rows));
    if (!sized) throw ShapeError("container: blob \"" + b.name + "\" does not match its shape");
    out += "blob " + b.name + " " + std::string(type_name(b.type)) + " " + std::to_string(b.rows) +
           " " + std::to_string(b.cols) + "\n";
  }
  out += "data\n";
  for (const Blob& b : c.blobs) {
    switch (b.type) {
      case BlobType::f64:
        for (double v : b.f64) put_le(out, std::bit_cast<std::uint64_t>(v));
        break;
      case BlobType::i32:
        for (std::int32_t v : b.i32) put_le(out, static_cast<std::uint32_t>(v));
        break;
      case BlobType::text:
        for (const auto& s : b.text) {
          out += s;
          out += '\n';
        }
        break;
    }
  }
  out += "end\n";
  char trailer[kTrailerSize + 1];
  std::snprintf(trailer, sizeof trailer, "crc32 %08x\n", static_cast<unsigned>(crc32_of(out)));
  out += trailer;
  return out;
}

Container decode_container(std::string_view bytes, std::string_view expected_kind) {
  if (bytes.size() < kTrailerSize) throw IntegrityError("container: file is truncated");
  const std::string_view body = bytes.substr(0, bytes.size() - kTrailerSize);
  const std::string_view trailer = bytes.substr(bytes.size() - kTrailerSize);
  unsigned stored = 0;
  {
    const std::string_view hex = trailer.substr(6, 8);
    const auto [end, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), stored, 16);
    const bool lower_hex = std::all_of(hex.begin(), hex.end(), [](char ch) {
      return (ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f');
    });
    if (trailer.substr(0, 6) != "crc32 " || trailer.back() != '\n' || ec != std::errc{} ||
        end != hex.data() + hex.size() || !lower_hex) {
      throw IntegrityError("container: missing or damaged checksum trailer");
    }
  }
  if (crc32_of(body) != stored) throw IntegrityError("container: checksum mismatch");

  Cursor cur{body};
  Container c;
  const std::string_view magic = cur.line();
  if (magic.substr(0, kMagic.size()) != kMagic) throw IntegrityError("container: not a fraudtext file");
  c.kind = std::string(magic.substr(kMagic.size()));
  const auto version = fields(cur.line());
  if (version.size() != 2 || version[0] != "format_version") {
    throw IntegrityError("container: missing format_version");
  }
  c.version = static_cast<int>(parse_count(version[1], "format_version"));
  if (c.version != kFormatVersion) {
    throw VersionError("container: format_version " + std::to_string(c.version) +
                       " is not supported (this build reads " + std::to_string(kFormatVersion) +
                       ")");
  }
  if (c.kind != expected_kind) {
    throw IntegrityError("container: expected a " + std::string(expected_kind) + " file, found " +
                         c.kind);
  }
  for (;;) {
    const std::string_view line = cur.line();
    if (line == "data") break;
    if (line.substr(0, 5) == "meta ") {
      const std::string_view rest = line.substr(5);
      const std::size_t sp = rest.find(' ');
      if (sp == std::string_view::npos || sp == 0) throw IntegrityError("container: bad meta line");
      c.meta.emplace_back(std::string(rest.substr(0, sp)), std::string(rest.substr(sp + 1)));
    } else if (line.substr(0, 5) == "blob ") {
      const auto f = fields(line);
      if (f.size() != 5 || f[1].empty()) throw IntegrityError("container: bad blob line");
      Blob b;
      b.name = std::string(f[1]);
      b.type = parse_type(f[2]);
      b.rows = parse_count(f[3], "row count");
      b.cols = parse_count(f[4], "column count");
      c.blobs.push_back(std::move(b));
    } else {
      throw IntegrityError("container: unexpected header line");
    }
  }

  std::size_t pos = cur.pos;
  for (Blob& b : c.blobs) {
    const std::size_t need = payload_bytes(b);
    if (need > body.size() - pos) throw IntegrityError("container: blob \"" + b.name + "\" is truncated");
    const char* p = body.data() + pos;
    const auto n = static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols);
    switch (b.type) {
      case BlobType::f64:
        b.f64.resize(n);
        for (std::size_t i = 0; i < n; ++i) b.f64[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
        break;
      case BlobType::i32:
        b.i32.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          b.i32[i] = static_cast<std::int32_t>(get_le<std::uint32_t>(p + 4 * i));
        }
        break;
      case BlobType::text: {
        std::string_view all(p, need);
        while (!all.empty()) {
          const std::size_t nl = all.find('\n');
          if (nl == std::string_view::npos) break;
          b.text.emplace_back(all.substr(0, nl));
          all.remove_prefix(nl + 1);
        }
        if (!all.empty() || b.text.size() != static_cast<std::size_t>(b.rows)) {
          throw IntegrityError("container: text blob \"" + b.name + "\" is inconsistent");
        }
        break;
      }
    }
    pos += need;
  }
  if (body.substr(pos) != "end\n") throw IntegrityError("container: trailing bytes after the payload");
  return c;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fraudtext
