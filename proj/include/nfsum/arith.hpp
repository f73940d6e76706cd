#pragma once

// Primes, 128-bit factorization and the arithmetic functions P(n), omega(n),
// omega_u(n) and the l-adic valuation.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "nfsum/error.hpp"
#include "nfsum/int128.hpp"

namespace nfsum::arith {

inline constexpr std::uint64_t kTrialDivisionLimit = 100'000;
inline constexpr std::uint64_t kSegmentSize = std::uint64_t(1) << 20;
inline constexpr std::uint64_t kMaxSieveLimit = std::uint64_t(1) << 32;

class PrimeTable {
 public:
  PrimeTable() = default;
  PrimeTable(std::uint64_t limit, std::vector<std::uint32_t> primes)
      : limit_(limit), primes_(std::move(primes)) {}

  std::uint64_t limit() const noexcept { return limit_; }
  std::span<const std::uint32_t> primes() const& noexcept { return primes_; }
  std::span<const std::uint32_t> primes() const&& = delete;
  std::size_t size() const noexcept { return primes_.size(); }

  bool contains(std::uint64_t n) const {
    return std::binary_search(primes_.begin(), primes_.end(), n,
                              [](auto a, auto b) {
                                return static_cast<std::uint64_t>(a) <
                                       static_cast<std::uint64_t>(b);
                              });
  }

  // pi(x) for x <= limit().
  std::size_t count_up_to(std::uint64_t x) const {
    return static_cast<std::size_t>(
        std::upper_bound(primes_.begin(), primes_.end(), x,
                         [](std::uint64_t v, std::uint32_t p) { return v < p; }) -
        primes_.begin());
  }

 private:
  std::uint64_t limit_ = 0;
  std::vector<std::uint32_t> primes_;
};

namespace detail {

inline std::vector<std::uint32_t> simple_sieve(std::uint32_t limit) {
  std::vector<bool> composite(static_cast<std::size_t>(limit) + 1, false);
  std::vector<std::uint32_t> out;
  for (std::uint64_t i = 2; i <= limit; ++i) {
    if (composite[i]) continue;
    out.push_back(static_cast<std::uint32_t>(i));
    for (std::uint64_t j = i * i; j <= limit; j += i) composite[j] = true;
  }
  return out;
}

inline const std::vector<std::uint32_t>& trial_primes() {
  static const std::vector<std::uint32_t> primes =
      simple_sieve(static_cast<std::uint32_t>(kTrialDivisionLimit));
  return primes;
}

}  // namespace detail

// Segmented sieve of Eratosthenes.
inline PrimeTable primes_up_to(std::uint64_t x) {
  if (x < 2) throw Error(ErrorKind::kEmptyDomain, "primes_up_to needs x >= 2");
  if (x > kMaxSieveLimit) {
    throw Error(ErrorKind::kCapacity, "primes_up_to supports x <= 2^32");
  }
  const auto root = static_cast<std::uint32_t>(isqrt(x));
  const auto base = detail::simple_sieve(std::max<std::uint32_t>(root, 2));
  std::vector<std::uint32_t> primes;
  std::vector<char> segment(kSegmentSize);
  for (std::uint64_t lo = 2; lo <= x; lo += kSegmentSize) {
    const std::uint64_t hi = std::min(x, lo + kSegmentSize - 1);
    std::fill(segment.begin(), segment.end(), 1);
    for (std::uint32_t p : base) {
      const std::uint64_t pp = std::uint64_t(p) * p;
      if (pp > hi) break;
      std::uint64_t start = std::max(pp, (lo + p - 1) / p * p);
      for (std::uint64_t j = start; j <= hi; j += p) segment[j - lo] = 0;
    }
    for (std::uint64_t n = lo; n <= hi; ++n) {
      if (segment[n - lo]) primes.push_back(static_cast<std::uint32_t>(n));
    }
  }
  return PrimeTable(x, std::move(primes));
}

// Montgomery arithmetic modulo an odd n < 2^127 with R = 2^128.
class Montgomery {
 public:
  explicit Montgomery(u128 n) : n_(n) {
    u128 inv = n;  // correct to 3 bits for odd n
    for (int i = 0; i < 7; ++i) inv *= 2 - n * inv;
    neg_inv_ = u128(0) - inv;
    r_mod_ = (u128(0) - n) % n;
    r2_ = r_mod_;
    for (int i = 0; i < 128; ++i) r2_ = add(r2_, r2_);
  }

  u128 modulus() const noexcept { return n_; }
  u128 one() const noexcept { return r_mod_; }

  u128 to(u128 a) const { return mul(a % n_, r2_); }
  u128 from(u128 a) const { return reduce(U256{0, a}); }

  u128 add(u128 a, u128 b) const {
    u128 s = a + b;  // no wrap: a, b < n < 2^127
    return s >= n_ ? s - n_ : s;
  }
  u128 sub(u128 a, u128 b) const { return a >= b ? a - b : a + n_ - b; }
  u128 mul(u128 a, u128 b) const { return reduce(mul_wide(a, b)); }
  u128 half(u128 a) const { return (a & 1) ? (a + n_) >> 1 : a >> 1; }

  u128 pow(u128 base, u128 e) const {
    u128 r = r_mod_;
    while (e != 0) {
      if (e & 1) r = mul(r, base);
      base = mul(base, base);
      e >>= 1;
    }
    return r;
  }

 private:
  u128 reduce(const U256& t) const {
    const u128 m = t.lo * neg_inv_;
    const U256 mn = mul_wide(m, n_);
    const u128 carry = (t.lo != 0) ? 1 : 0;
    u128 r = t.hi + mn.hi + carry;
    return r >= n_ ? r - n_ : r;
  }

  u128 n_;
  u128 neg_inv_ = 0;
  u128 r_mod_ = 0;
  u128 r2_ = 0;
};

inline int jacobi(i128 a_signed, u128 n) {
  u128 a;
  if (a_signed < 0) {
    const u128 m = uabs(a_signed) % n;
    a = m == 0 ? 0 : n - m;
  } else {
    a = static_cast<u128>(a_signed) % n;
  }
  int result = 1;
  while (a != 0) {
    while ((a & 1) == 0) {
      a >>= 1;
      const auto r = static_cast<unsigned>(n & 7);
      if (r == 3 || r == 5) result = -result;
    }
    std::swap(a, n);
    if ((a & 3) == 3 && (n & 3) == 3) result = -result;
    a %= n;
  }
  return n == 1 ? result : 0;
}

namespace detail {

inline bool strong_probable_prime(const Montgomery& mont, u128 base) {
  const u128 n = mont.modulus();
  u128 d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  const u128 one = mont.one();
  const u128 minus_one = mont.sub(0, one);
  u128 x = mont.pow(mont.to(base), d);
  if (x == one || x == minus_one) return true;
  for (int i = 1; i < s; ++i) {
    x = mont.mul(x, x);
    if (x == minus_one) return true;
    if (x == one) return false;
  }
  return false;
}

// Strong Lucas probable-prime test with Selfridge parameters (P = 1).
inline bool strong_lucas_probable_prime(const Montgomery& mont) {
  const u128 n = mont.modulus();
  const u128 root = isqrt(n);
  if (root * root == n) return false;
  i128 d = 5;
  for (;;) {
    const int j = jacobi(d, n);
    if (j == -1) break;
    if (j == 0 && uabs(d) != n) return false;
    d = d > 0 ? -(d + 2) : -d + 2;
  }
  const i128 q = (1 - d) / 4;
  auto to_mont_signed = [&](i128 v) {
    const u128 m = mont.to(uabs(v) % n);
    return v < 0 ? mont.sub(0, m) : m;
  };
  const u128 dm = to_mont_signed(d);
  const u128 qm = to_mont_signed(q);
  const u128 one = mont.one();

  u128 k = n + 1;
  int s = 0;
  while ((k & 1) == 0) {
    k >>= 1;
    ++s;
  }
  // Binary ladder for U_k, V_k, Q^k from the top bit of k.
  u128 u = one, v = one, qk = qm;  // index 1 (P = 1)
  int top = 127;
  while (((k >> top) & 1) == 0) --top;
  for (int bit = top - 1; bit >= 0; --bit) {
    u = mont.mul(u, v);
    v = mont.sub(mont.mul(v, v), mont.add(qk, qk));
    qk = mont.mul(qk, qk);
    if ((k >> bit) & 1) {
      const u128 nu = mont.half(mont.add(u, v));
      const u128 nv = mont.half(mont.add(mont.mul(dm, u), v));
      u = nu;
      v = nv;
      qk = mont.mul(qk, qm);
    }
  }
  if (u == 0 || v == 0) return true;
  for (int r = 1; r < s; ++r) {
    v = mont.sub(mont.mul(v, v), mont.add(qk, qk));
    qk = mont.mul(qk, qk);
    if (v == 0) return true;
  }
  return false;
}

inline constexpr std::uint32_t kMillerRabinBases[] = {2,  3,  5,  7,  11, 13,
                                                     17, 19, 23, 29, 31, 37};

}  // namespace detail

// Deterministic below 2^64 (first twelve prime bases); above that the same
// strong-pseudoprime bases plus a strong Lucas test (Baillie-PSW style).
inline bool is_prime(u128 n) {
  if (n < 2) return false;
  for (std::uint32_t p : detail::kMillerRabinBases) {
    if (n == p) return true;
    if (n % p == 0) return false;
  }
  if (n < 41 * 41) return true;
  const Montgomery mont(n);
  for (std::uint32_t b : detail::kMillerRabinBases) {
    if (!detail::strong_probable_prime(mont, b)) return false;
  }
  if (n >> 64 == 0) return true;
  return detail::strong_lucas_probable_prime(mont);
}

struct PrimePower {
  u128 prime = 0;
  int exponent = 0;
  friend bool operator==(const PrimePower&, const PrimePower&) = default;
};

struct Factorization {
  i128 value = 0;
  std::vector<PrimePower> factors;  // primes strictly increasing

  u128 magnitude() const { return uabs(value); }
};

inline u128 gcd(u128 a, u128 b) {
  while (b != 0) {
    a %= b;
    std::swap(a, b);
  }
  return a;
}

namespace detail {

// Pollard rho with Brent's cycle detection and batched gcds. Returns a
// nontrivial divisor of the odd composite n.
inline u128 brent_rho(u128 n, std::mt19937_64& rng) {
  const Montgomery mont(n);
  std::uniform_int_distribution<std::uint64_t> dist(1, ~std::uint64_t(0));
  constexpr u128 kBatch = 128;
  for (;;) {
    const u128 c = mont.to(dist(rng) % n);
    u128 y = mont.to(dist(rng) % n);
    auto f = [&](u128 v) { return mont.add(mont.mul(v, v), c); };
    u128 g = 1, q = mont.one(), x = y, ys = y;
    for (u128 r = 1; g == 1; r <<= 1) {
      x = y;
      for (u128 i = 0; i < r; ++i) y = f(y);
      for (u128 k = 0; k < r && g == 1; k += kBatch) {
        ys = y;
        const u128 lim = std::min(kBatch, r - k);
        for (u128 i = 0; i < lim; ++i) {
          y = f(y);
          q = mont.mul(q, mont.sub(x, y));
        }
        g = gcd(mont.from(q), n);
      }
    }
    if (g == n) {
      do {
        ys = f(ys);
        g = gcd(mont.from(mont.sub(x, ys)), n);
      } while (g == 1);
    }
    if (g != n) return g;
  }
}

inline void split(u128 n, std::mt19937_64& rng, std::vector<u128>& out) {
  if (n == 1) return;
  if (is_prime(n)) {
    out.push_back(n);
    return;
  }
  const u128 d = brent_rho(n, rng);
  split(d, rng, out);
  split(n / d, rng, out);
}

}  // namespace detail

inline constexpr std::uint64_t kDefaultRhoSeed = 0x6e6673756d2d7268ULL;

// Trial division by primes <= 1e5, then Brent-rho on the cofactor with a
// fixed seed; every reported factor passes is_prime.
inline Factorization factorize(i128 n, std::uint64_t seed = kDefaultRhoSeed) {
  if (n == 0) throw Error(ErrorKind::kUndefinedInput, "factorize(0)");
  Factorization out;
  out.value = n;
  u128 m = uabs(n);
  for (std::uint32_t p : detail::trial_primes()) {
    if (u128(p) * p > m) break;
    if (m % p != 0) continue;
    int e = 0;
    while (m % p == 0) {
      m /= p;
      ++e;
    }
    out.factors.push_back({p, e});
  }
  if (m == 1) return out;
  std::vector<u128> rest;
  if (m <= u128(kTrialDivisionLimit) * kTrialDivisionLimit) {
    rest.push_back(m);  // no factor below the trial bound, so m is prime
  } else {
    std::mt19937_64 rng(seed);
    detail::split(m, rng, rest);
  }
  std::sort(rest.begin(), rest.end());
  for (u128 p : rest) {
    if (!out.factors.empty() && out.factors.back().prime == p) {
      ++out.factors.back().exponent;
    } else {
      out.factors.push_back({p, 1});
    }
  }
  return out;
}

inline std::optional<u128> largest_prime_factor(const Factorization& f) {
  if (f.factors.empty()) return std::nullopt;
  return f.factors.back().prime;
}

inline std::optional<u128> largest_prime_factor(i128 n) {
  return largest_prime_factor(factorize(n));
}

inline int omega(const Factorization& f) {
  return static_cast<int>(f.factors.size());
}

inline int omega(i128 n) { return omega(factorize(n)); }

// Distinct prime divisors p <= u.
inline int omega_up_to(const Factorization& f, long double u) {
  int count = 0;
  for (const auto& pp : f.factors) {
    if (static_cast<long double>(pp.prime) <= u) ++count;
  }
  return count;
}

inline int omega_up_to(i128 n, long double u) {
  if (n == 0) throw Error(ErrorKind::kUndefinedInput, "omega_up_to(0)");
  return omega_up_to(factorize(n), u);
}

inline int valuation(i128 n, u128 ell) {
  if (n == 0) throw Error(ErrorKind::kUndefinedInput, "valuation(0)");
  if (ell < 2) throw Error(ErrorKind::kParameter, "valuation needs a prime");
  u128 m = uabs(n);
  int e = 0;
  while (m % ell == 0) {
    m /= ell;
    ++e;
  }
  return e;
}

}  // namespace nfsum::arith
