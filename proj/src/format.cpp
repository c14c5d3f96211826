// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/format.hpp"

#include <charconv>
#include <cstdio>
#include <system_error>

namespace fraudtext {
namespace {

template <typename T>
std::optional<T> parse_whole(std::string_view s) {
  T v{};
  if (s.empty()) return std::nullopt;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::string exact_decimal(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, end) : std::string("nan");
}

std::optional<double> parse_double(std::string_view s) { return parse_whole<double>(s); }
std::optional<long long> parse_integer(std::string_view s) { return parse_whole<long long>(s); }
std::optional<unsigned long long> parse_unsigned(std::string_view s) {
  return parse_whole<unsigned long long>(s);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace fraudtext
