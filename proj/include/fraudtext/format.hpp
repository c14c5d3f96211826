// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace fraudtext {

/// Shortest decimal that parses back to exactly `v`.
std::string exact_decimal(double v);

/// Whole-string parses; nullopt on any stray character.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_integer(std::string_view s);
std::optional<unsigned long long> parse_unsigned(std::string_view s);

/// Fixed-point with `digits` decimals, as printf("%.*f").
std::string fixed(double v, int digits);

}  // namespace fraudtext
