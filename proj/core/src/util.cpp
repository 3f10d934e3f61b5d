#include "ehrqa/util.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ehrqa {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out.push_back(' ');
    in_ws = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    auto line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

std::optional<double> parse_plain_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  bool seen_digit = false;
  bool seen_dot = false;
  for (char c : s) {
    if (c >= '0' && c <= '9') {
      seen_digit = true;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      return std::nullopt;
    }
  }
  if (!seen_digit) return std::nullopt;
  double out = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return out;
}

std::optional<double> parse_decimal_tenth(std::string_view s) {
  s = trim(s);
  if (!parse_plain_number(s)) return std::nullopt;
  std::string digits;
  std::size_t point = std::string::npos;
  for (char c : s) {
    if (c == '.') {
      point = digits.size();
    } else {
      digits.push_back(c);
    }
  }
  if (point == std::string::npos) point = digits.size();
  // Value is digits with an implicit decimal point at `point`; shift left by one.
  std::string shifted;
  if (point == 0) {
    shifted = "0.0" + digits;
  } else if (point == 1) {
    shifted = "0." + digits;
  } else {
    shifted = digits.substr(0, point - 1) + "." + digits.substr(point - 1);
  }
  double out = 0.0;
  auto res = std::from_chars(shifted.data(), shifted.data() + shifted.size(), out);
  if (res.ec != std::errc()) return std::nullopt;
  return out;
}

std::string times_ten_text(double v) {
  std::string s = format_double(v);
  if (s.find('e') != std::string::npos || s.find('E') != std::string::npos) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v * 10.0);
    return buf;
  }
  auto dot = s.find('.');
  if (dot == std::string::npos) return s == "0" ? s : s + "0";
  std::string digits = s.substr(0, dot) + s.substr(dot + 1);
  std::size_t point = dot + 1;  // decimal point shifted one digit right
  std::string out;
  if (point >= digits.size()) {
    out = digits;
    out.append(point - digits.size(), '0');
  } else {
    out = digits.substr(0, point) + "." + digits.substr(point);
  }
  // Strip leading zeros ("09.5" -> "9.5") but keep one digit before the point.
  std::size_t stop = out.find('.');
  if (stop == std::string::npos) stop = out.size();
  std::size_t lead = 0;
  while (lead + 1 < stop && out[lead] == '0') ++lead;
  out = out.substr(lead);
  if (out.find('.') != std::string::npos) {
    while (!out.empty() && out.back() == '0') out.pop_back();
    if (!out.empty() && out.back() == '.') out.pop_back();
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {
std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  return n == 0 ? 0 : next_u64() % n;
}

double Rng::range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

Rng Rng::fork(std::string_view label) const {
  std::uint64_t s = state_;
  return Rng(s ^ fnv1a64(label));
}

}  // namespace ehrqa
