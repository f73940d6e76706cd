#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace nfsum {

using i128 = __int128;
using u128 = unsigned __int128;

// Largest magnitude admitted for stored coefficients: |v| < 2^127.
inline constexpr u128 kMaxMagnitude = (u128(1) << 127) - 1;

inline constexpr u128 uabs(i128 v) {
  return v < 0 ? u128(0) - static_cast<u128>(v) : static_cast<u128>(v);
}

inline std::string to_string(u128 v) {
  if (v == 0) return "0";
  std::string s;
  while (v != 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

inline std::string to_string(i128 v) {
  if (v < 0) return "-" + to_string(uabs(v));
  return to_string(static_cast<u128>(v));
}

// Strict decimal: optional leading '-', at least one digit, nothing else.
// Rejects magnitudes of 2^127 and above.
inline std::optional<i128> parse_i128(std::string_view s) {
  bool neg = false;
  if (!s.empty() && s.front() == '-') {
    neg = true;
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  u128 v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    const auto digit = static_cast<unsigned>(c - '0');
    if (v > (kMaxMagnitude - digit) / 10) return std::nullopt;
    v = v * 10 + digit;
  }
  const auto mag = static_cast<i128>(v);
  return neg ? -mag : mag;
}

inline u128 isqrt(u128 n) {
  if (n == 0) return 0;
  auto r = static_cast<u128>(std::sqrt(static_cast<long double>(n)));
  while (r > 0 && (r > n / r)) --r;
  while ((r + 1) <= n / (r + 1)) ++r;
  return r;
}

inline long double to_long_double(i128 v) { return static_cast<long double>(v); }

// 256-bit unsigned value, only what exact bound checks need.
struct U256 {
  u128 hi = 0;
  u128 lo = 0;

  friend bool operator==(const U256&, const U256&) = default;
  friend auto operator<=>(const U256& a, const U256& b) {
    if (a.hi != b.hi) return a.hi < b.hi ? -1 : 1;
    if (a.lo != b.lo) return a.lo < b.lo ? -1 : 1;
    return 0;
  }
};

inline U256 mul_wide(u128 a, u128 b) {
  const u128 mask = (u128(1) << 64) - 1;
  const u128 a0 = a & mask, a1 = a >> 64;
  const u128 b0 = b & mask, b1 = b >> 64;
  const u128 p00 = a0 * b0;
  const u128 p01 = a0 * b1;
  const u128 p10 = a1 * b0;
  const u128 p11 = a1 * b1;
  const u128 mid = (p00 >> 64) + (p01 & mask) + (p10 & mask);
  U256 r;
  r.lo = (p00 & mask) | (mid << 64);
  r.hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
  return r;
}

// Saturating 256-bit multiply by a 128-bit factor; saturation is reported
// through `overflow`.
inline U256 mul_sat(const U256& a, u128 b, bool& overflow) {
  const U256 lo = mul_wide(a.lo, b);
  const U256 hi = mul_wide(a.hi, b);
  if (hi.hi != 0 || hi.lo + lo.hi < lo.hi) {
    overflow = true;
    return U256{~u128(0), ~u128(0)};
  }
  return U256{hi.lo + lo.hi, lo.lo};
}

}  // namespace nfsum
