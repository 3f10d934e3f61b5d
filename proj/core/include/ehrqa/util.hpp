#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ehrqa {

// FNV-1a, used for config fingerprints and prompt fingerprints. Stable
// across platforms and runs; not cryptographic.
std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

// Shortest decimal representation that round-trips the double.
std::string format_double(double value);

// Fixed-point helpers for report rendering.
std::string format_fixed(double value, int decimals);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view text);

// Parses a non-negative decimal number ("9", "9.5"). Returns nullopt on
// anything else (signs, exponents, stray characters).
std::optional<double> parse_plain_number(std::string_view s);

// Divides a plain decimal literal by ten by shifting the decimal point,
// then converts. Avoids the double-rounding of parse-then-divide, so
// "9.2" maps to the double nearest 0.92.
std::optional<double> parse_decimal_tenth(std::string_view s);

// Multiplies the shortest representation of v by ten textually; inverse
// of parse_decimal_tenth for values produced by it.
std::string times_ten_text(double v);

std::string read_text_file(const std::string& path);

// Deterministic RNG: raw mt19937_64 draws with hand-rolled mappings, so
// sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Uniform in [lo, hi).
  double range(double lo, double hi);

  // Derives an independent stream for a named subcomponent.
  Rng fork(std::string_view label) const;

 private:
  std::uint64_t state_;
};

}  // namespace ehrqa
