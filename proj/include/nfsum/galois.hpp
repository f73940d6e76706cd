#pragma once

// Sizes of the full admissible product image mod h,
//   A_h = {(A, B) in GL2(Z/h)^2 : det A = det B in ((Z/h)^x)^(k-1)},
// its trace-sum-zero subset C_h, and delta(h) = |C_h| / |A_h|.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "nfsum/arith.hpp"
#include "nfsum/error.hpp"
#include "nfsum/int128.hpp"
#include "nfsum/parallel.hpp"

namespace nfsum::galois {

// Exact non-negative rational in lowest terms.
struct Rational {
  u128 num = 0;
  u128 den = 1;

  static Rational make(u128 n, u128 d) {
    if (d == 0) throw Error(ErrorKind::kUndefinedInput, "zero denominator");
    const u128 g = arith::gcd(n, d);
    return g == 0 ? Rational{0, 1} : Rational{n / g, d / g};
  }
  long double value() const { return to_long_double(num) / to_long_double(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

inline u128 checked_mul(u128 a, u128 b, const char* what) {
  u128 r;
  if (__builtin_mul_overflow(a, b, &r)) throw Error(ErrorKind::kCapacity, what);
  return r;
}

inline Rational operator*(const Rational& a, const Rational& b) {
  // Cross-reduce first so the products stay small.
  const u128 g1 = arith::gcd(a.num, b.den), g2 = arith::gcd(b.num, a.den);
  const u128 n1 = g1 ? a.num / g1 : 0, d2 = g1 ? b.den / g1 : b.den;
  const u128 n2 = g2 ? b.num / g2 : 0, d1 = g2 ? a.den / g2 : a.den;
  return Rational::make(checked_mul(n1, n2, "rational overflow"),
                        checked_mul(d1, d2, "rational overflow"));
}

enum class Method { kEnumeration, kClosedForm, kCrt };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::kEnumeration: return "enumeration";
    case Method::kClosedForm: return "closed-form";
    case Method::kCrt: return "crt";
  }
  return "?";
}

struct GaloisCounts {
  std::uint64_t h = 1;
  int k = 2;
  u128 sizeA = 1;
  u128 sizeC = 1;
  Method method = Method::kCrt;

  Rational delta() const { return Rational::make(sizeC, sizeA); }
  bool same_sizes(const GaloisCounts& o) const { return sizeA == o.sizeA && sizeC == o.sizeC; }
};

namespace detail {

inline void check_weight(int k) {
  if (k < 2 || k % 2 != 0) throw Error(ErrorKind::kParameter, "weight k must be even and >= 2");
}

inline std::uint64_t powmod(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  b %= m;
  while (e) {
    if (e & 1) r = r * b % m;
    b = b * b % m;
    e >>= 1;
  }
  return r;
}

// Membership table for D = ((Z/h)^x)^(k-1).
inline std::vector<char> admissible_dets(std::uint64_t h, int k) {
  std::vector<char> in(h, 0);
  for (std::uint64_t u = 1; u < h; ++u) {
    if (std::gcd(u, h) == 1) in[powmod(u, static_cast<std::uint64_t>(k - 1), h)] = 1;
  }
  if (h == 1) in.assign(1, 1);
  return in;
}

}  // namespace detail

inline constexpr std::uint64_t kMaxEnumerationModulus = 16;

// Literal count over pairs of invertible matrices, one determinant class at a
// time; the oracle for everything else in this module.
inline GaloisCounts enumerate_counts(std::uint64_t h, int k, unsigned threads = 1) {
  detail::check_weight(k);
  if (h < 2 || h > kMaxEnumerationModulus) {
    throw Error(ErrorKind::kCapacity, "enumeration supports 2 <= h <= " +
                                          std::to_string(kMaxEnumerationModulus));
  }
  const auto in_d = detail::admissible_dets(h, k);
  // Traces of the invertible matrices, grouped by determinant.
  std::vector<std::vector<std::uint8_t>> traces(h);
  for (std::uint64_t a = 0; a < h; ++a)
    for (std::uint64_t b = 0; b < h; ++b)
      for (std::uint64_t c = 0; c < h; ++c)
        for (std::uint64_t d = 0; d < h; ++d) {
          const std::uint64_t det = (a * d + h * h - b * c) % h;
          if (!in_d[det]) continue;
          traces[det].push_back(static_cast<std::uint8_t>((a + d) % h));
        }
  struct Partial {
    u128 a = 0, c = 0;
  };
  const auto parts = parallel_map<Partial>(h, threads, [&](std::size_t det) {
    Partial out;
    const auto& tr = traces[det];
    for (std::uint8_t ta : tr) {
      for (std::uint8_t tb : tr) {
        ++out.a;
        if ((ta + tb) % h == 0) ++out.c;
      }
    }
    return out;
  });
  GaloisCounts r{h, k, 0, 0, Method::kEnumeration};
  for (const auto& p : parts) {
    r.sizeA += p.a;
    r.sizeC += p.c;
  }
  return r;
}

// #{M in GL2(F_l) : tr M = t, det M = d}.
inline std::uint64_t count_matrices_trace_det(std::uint64_t ell, std::uint64_t t, std::uint64_t d) {
  if (ell < 2 || !arith::is_prime(ell)) throw Error(ErrorKind::kParameter, "ell must be prime");
  t %= ell;
  d %= ell;
  if (d == 0) throw Error(ErrorKind::kNonUnit, "determinant must be a unit");
  if (ell == 2) {
    std::uint64_t n = 0;
    for (unsigned m = 0; m < 16; ++m) {
      const unsigned a = m & 1, b = (m >> 1) & 1, c = (m >> 2) & 1, e = (m >> 3) & 1;
      if (((a * e + b * c) & 1) == d && ((a + e) & 1) == t) ++n;
    }
    return n;
  }
  const std::uint64_t disc = (t * t % ell + 4 * (ell - d)) % ell;
  if (disc == 0) return ell * ell;
  return arith::jacobi(static_cast<i128>(disc), ell) == 1 ? ell * ell + ell : ell * ell - ell;
}

inline GaloisCounts counts_closed_form(std::uint64_t ell, int k) {
  detail::check_weight(k);
  if (ell == 2) {
    throw Error(ErrorKind::kRedirect, "closed form needs an odd prime; use enumerate_counts for 2");
  }
  if (ell < 2 || !arith::is_prime(ell)) throw Error(ErrorKind::kParameter, "ell must be prime");
  // sum_t N(t,d) N(-t,d) depends on d only through its quadratic character.
  auto fiber_square_sum = [&](std::uint64_t d) {
    u128 s = 0;
    for (std::uint64_t t = 0; t < ell; ++t) {
      const u128 n = count_matrices_trace_det(ell, t, d);
      const u128 m = count_matrices_trace_det(ell, (ell - t) % ell, d);
      s += n * m;
    }
    return s;
  };
  const auto in_d = detail::admissible_dets(ell, k);
  u128 squares = 0, nonsquares = 0;
  std::uint64_t nonresidue = 0;
  for (std::uint64_t d = 1; d < ell; ++d) {
    const bool sq = arith::jacobi(static_cast<i128>(d), ell) == 1;
    if (!sq && nonresidue == 0) nonresidue = d;
    if (in_d[d]) ++(sq ? squares : nonsquares);
  }
  const u128 gl = u128(ell) * ell * ell - ell;
  GaloisCounts r{ell, k, 0, 0, Method::kClosedForm};
  r.sizeA = (squares + nonsquares) * gl * gl;
  r.sizeC = squares * fiber_square_sum(1) + (nonsquares ? nonsquares * fiber_square_sum(nonresidue) : 0);
  return r;
}

// Counts for a prime l: enumeration at 2, closed form otherwise.
inline GaloisCounts counts_at_prime(std::uint64_t ell, int k) {
  return ell == 2 ? enumerate_counts(2, k) : counts_closed_form(ell, k);
}

inline GaloisCounts delta_squarefree(std::uint64_t h, int k) {
  detail::check_weight(k);
  if (h == 0) throw Error(ErrorKind::kUnsupportedModulus, "h must be positive");
  GaloisCounts r{h, k, 1, 1, Method::kCrt};
  if (h == 1) return r;
  for (const auto& [p, e] : arith::factorize(static_cast<i128>(h)).factors) {
    if (e > 1) {
      throw Error(ErrorKind::kUnsupportedModulus,
                  "h=" + std::to_string(h) + " is not squarefree; prime powers only via "
                  "enumeration at h in {4, 8, 9}");
    }
    const auto c = counts_at_prime(static_cast<std::uint64_t>(p), k);
    r.sizeA = checked_mul(r.sizeA, c.sizeA, "|A_h| exceeds 128 bits");
    r.sizeC = checked_mul(r.sizeC, c.sizeC, "|C_h| exceeds 128 bits");
  }
  return r;
}

// delta(h) for any supported modulus: squarefree h via CRT (a single prime
// reports its own method), prime powers 4, 8, 9 via enumeration.
inline GaloisCounts galois_counts(std::uint64_t h, int k) {
  if (h == 4 || h == 8 || h == 9) return enumerate_counts(h, k);
  if (h >= 2 && arith::is_prime(h)) return counts_at_prime(h, k);
  return delta_squarefree(h, k);
}

inline std::string csv_header() { return "h,k,sizeA,sizeC,delta_num,delta_den,method\n"; }

inline std::string csv_row(const GaloisCounts& c) {
  const auto d = c.delta();
  return std::to_string(c.h) + "," + std::to_string(c.k) + "," + nfsum::to_string(c.sizeA) +
         "," + nfsum::to_string(c.sizeC) + "," + nfsum::to_string(d.num) + "," +
         nfsum::to_string(d.den) + "," +
         to_string(c.method) + "\n";
}

struct AsymptoticRow {
  std::uint64_t ell = 0;
  Rational delta;
  long double ell_delta = 0;       // l * delta(l)
  long double scaled_c = 0;        // |C_l| gcd(l-1, k-1) / l^6
};

struct AsymptoticReport {
  int k = 2;
  std::vector<AsymptoticRow> rows;
  long double fitted_c = 0;  // max over rows of l * |l delta(l) - 1|
  // True when |scaled_c - 1| is nonincreasing over l >= 11.
  bool scaled_c_monotone = true;
};

inline constexpr std::uint64_t kMaxAsymptoticEll = 10'000;

// Odd primes 3 <= l <= lmax, closed form.
inline AsymptoticReport asymptotic_report(std::uint64_t lmax, int k) {
  detail::check_weight(k);
  if (lmax > kMaxAsymptoticEll) {
    throw Error(ErrorKind::kCapacity, "asymptotic_report supports lmax <= 10^4");
  }
  AsymptoticReport rep{k, {}, 0, true};
  if (lmax < 3) return rep;
  const auto primes = arith::primes_up_to(lmax);
  long double prev_gap = -1;
  for (std::uint32_t ell : primes.primes()) {
    if (ell == 2) continue;
    const auto c = counts_closed_form(ell, k);
    AsymptoticRow row;
    row.ell = ell;
    row.delta = c.delta();
    row.ell_delta = row.delta.value() * ell;
    const long double l6 = std::pow(static_cast<long double>(ell), 6);
    row.scaled_c = to_long_double(c.sizeC) *
                   static_cast<long double>(std::gcd<std::uint64_t>(ell - 1, k - 1)) / l6;
    rep.fitted_c = std::max(rep.fitted_c, ell * std::abs(row.ell_delta - 1));
    if (ell >= 11) {
      const long double gap = std::abs(row.scaled_c - 1);
      if (prev_gap >= 0 && gap > prev_gap) rep.scaled_c_monotone = false;
      prev_gap = gap;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace nfsum::galois
