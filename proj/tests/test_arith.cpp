#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "nfsum/arith.hpp"

namespace nfsum::arith {
namespace {

// Independent oracle: plain trial-division primality.
bool naive_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t d = 2; d * d <= n; ++d) {
    if (n % d == 0) return false;
  }
  return true;
}

// Independent oracle: trial-division factorization.
std::vector<PrimePower> naive_factor(std::uint64_t n) {
  std::vector<PrimePower> out;
  for (std::uint64_t d = 2; d * d <= n; ++d) {
    int e = 0;
    while (n % d == 0) {
      n /= d;
      ++e;
    }
    if (e > 0) out.push_back({d, e});
  }
  if (n > 1) out.push_back({n, 1});
  return out;
}

i128 parse(const char* s) { return *parse_i128(s); }

TEST(PrimesUpTo, SmallExamples) {
  auto t10 = primes_up_to(10);
  EXPECT_EQ(std::vector<std::uint32_t>(t10.primes().begin(), t10.primes().end()),
            (std::vector<std::uint32_t>{2, 3, 5, 7}));
  auto t2 = primes_up_to(2);
  ASSERT_EQ(t2.size(), 1u);
  EXPECT_EQ(t2.primes()[0], 2u);
}

TEST(PrimesUpTo, RejectsEmptyDomain) {
  try {
    primes_up_to(1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyDomain);
  }
}

TEST(PrimesUpTo, MillionHas78498Entries) {
  // Oracle: a non-segmented sieve written independently of the library.
  const std::uint64_t x = 1'000'000;
  std::vector<char> sieve(x + 1, 1);
  sieve[0] = sieve[1] = 0;
  for (std::uint64_t i = 2; i * i <= x; ++i) {
    if (!sieve[i]) continue;
    for (std::uint64_t j = i * i; j <= x; j += i) sieve[j] = 0;
  }
  std::size_t count = 0;
  for (char c : sieve) count += c;
  EXPECT_EQ(count, 78498u);
  const auto table = primes_up_to(x);
  EXPECT_EQ(table.size(), 78498u);
  EXPECT_EQ(table.count_up_to(x), 78498u);
  EXPECT_EQ(table.count_up_to(1000), 168u);
}

TEST(PrimesUpTo, SpansSegmentsAndAgreesWithTrialDivision) {
  const std::uint64_t x = 3 * kSegmentSize + 17;
  const auto table = primes_up_to(x);
  std::size_t idx = 0;
  for (std::uint64_t n = 2; n <= 100'000; ++n) {
    const bool in_table = idx < table.size() && table.primes()[idx] == n;
    ASSERT_EQ(in_table, naive_prime(n)) << n;
    if (in_table) ++idx;
  }
  // Around segment boundaries.
  for (std::uint64_t n = kSegmentSize - 200; n < kSegmentSize + 200; ++n) {
    EXPECT_EQ(table.contains(n), naive_prime(n)) << n;
  }
  const auto again = primes_up_to(x);
  EXPECT_TRUE(std::equal(table.primes().begin(), table.primes().end(),
                         again.primes().begin(), again.primes().end()));
}

TEST(IsPrime, AgreesWithTrialDivision) {
  for (std::uint64_t n = 0; n < 20'000; ++n) {
    ASSERT_EQ(is_prime(n), naive_prime(n)) << n;
  }
}

TEST(IsPrime, StrongPseudoprimesAndLargePrimes) {
  EXPECT_FALSE(is_prime(3825123056546413051ULL));  // spsp to bases <= 23
  EXPECT_FALSE(is_prime(parse("318665857834031151167461")));   // bases <= 37
  EXPECT_FALSE(is_prime(parse("3317044064679887385961981")));  // bases <= 37
  EXPECT_TRUE(is_prime(parse("618970019642690137449562111")));  // 2^89-1
  EXPECT_TRUE(is_prime(parse("162259276829213363391578010288127")));
  EXPECT_TRUE(is_prime(kMaxMagnitude));  // 2^127-1
  EXPECT_FALSE(is_prime(kMaxMagnitude - 2));
  EXPECT_TRUE(is_prime(18446744073709551557ULL));  // largest prime < 2^64
}

TEST(Factorize, Examples) {
  auto f12 = factorize(12);
  EXPECT_EQ(f12.factors, (std::vector<PrimePower>{{2, 2}, {3, 1}}));
  EXPECT_TRUE(factorize(-1).factors.empty());
  EXPECT_EQ(factorize(4830).factors,
            (std::vector<PrimePower>{{2, 1}, {3, 1}, {5, 1}, {7, 1}, {23, 1}}));
  EXPECT_EQ(factorize(4830).factors, naive_factor(4830));
}

TEST(Factorize, ZeroIsUndefined) {
  EXPECT_THROW(factorize(0), Error);
  EXPECT_THROW(largest_prime_factor(i128(0)), Error);
  EXPECT_THROW(omega_up_to(0, 10), Error);
  EXPECT_THROW(valuation(0, 2), Error);
}

TEST(Factorize, ExhaustiveRecompositionTo1e5) {
  for (std::int64_t n = 2; n <= 100'000; ++n) {
    for (i128 v : {i128(n), -i128(n)}) {
      const auto f = factorize(v);
      u128 prod = 1;
      u128 prev = 0;
      for (const auto& [p, e] : f.factors) {
        ASSERT_GT(p, prev);
        ASSERT_TRUE(is_prime(p));
        for (int i = 0; i < e; ++i) prod *= p;
        prev = p;
      }
      ASSERT_EQ(prod, static_cast<u128>(n));
    }
    if (n % 97 == 0) ASSERT_EQ(factorize(n).factors, naive_factor(n)) << n;
  }
}

TEST(Factorize, LargeCompositesUseRho) {
  // Frozen with an external CAS.
  const auto f = factorize(parse("38685858342366310558646275751907728029"));
  EXPECT_EQ(f.factors, (std::vector<PrimePower>{
                           {1000003, 2},
                           {1099511627791ULL, 1},
                           {35184372088891ULL, 1}}));
  const auto g = factorize(-parse("15950736038550673894841798988606213693"));
  EXPECT_EQ(g.factors, (std::vector<PrimePower>{
                           {3, 1}, {1073741827ULL, 2}, {4611686018427388039ULL, 1}}));
  const auto h = factorize(parse("318665857834031151167461"));
  EXPECT_EQ(h.factors,
            (std::vector<PrimePower>{{399165290221ULL, 1}, {798330580441ULL, 1}}));
}

TEST(Factorize, RandomProductsRecompose) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    u128 v = 1;
    for (int i = 0; i < 3; ++i) v *= (rng() >> 34) | 1;  // ~3 x 30 bits
    const auto f = factorize(static_cast<i128>(v));
    u128 prod = 1;
    for (const auto& [p, e] : f.factors) {
      ASSERT_TRUE(is_prime(p));
      for (int i = 0; i < e; ++i) prod *= p;
    }
    ASSERT_EQ(prod, v);
  }
}

TEST(LargestPrimeFactor, Examples) {
  EXPECT_EQ(largest_prime_factor(i128(100)), u128(5));
  EXPECT_FALSE(largest_prime_factor(i128(-1)).has_value());
  EXPECT_FALSE(largest_prime_factor(i128(1)).has_value());
  EXPECT_EQ(largest_prime_factor(i128(4830)), u128(23));
}

TEST(LargestPrimeFactor, CofactorIsSmoother) {
  for (std::int64_t n = 2; n <= 20'000; ++n) {
    const u128 p = *largest_prime_factor(i128(n));
    ASSERT_EQ(n % static_cast<std::int64_t>(p), 0);
    u128 cof = n;
    while (cof % p == 0) cof /= p;
    for (const auto& pp : factorize(static_cast<i128>(cof)).factors) {
      ASSERT_LT(pp.prime, p);
    }
  }
}

TEST(Omega, Examples) {
  EXPECT_EQ(omega(i128(12)), 2);
  EXPECT_EQ(omega_up_to(30, 4), 2);
  EXPECT_EQ(valuation(48, 2), 4);
  EXPECT_EQ(omega(i128(-1)), 0);
}

TEST(Omega, Properties) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = static_cast<std::int64_t>(rng() % 1'000'000) + 2;
    const auto f = factorize(n);
    EXPECT_EQ(omega(f), static_cast<int>(f.factors.size()));
    EXPECT_EQ(omega_up_to(f, static_cast<long double>(n)), omega(f));
    EXPECT_LE(omega_up_to(f, 50), omega(f));
    const auto m = static_cast<std::int64_t>(rng() % 1'000'000) + 1;
    for (u128 ell : {2, 3, 5, 7}) {
      EXPECT_EQ(valuation(i128(n) * m, ell), valuation(n, ell) + valuation(m, ell));
    }
  }
}

TEST(Montgomery, MatchesNaiveMulmod) {
  std::mt19937_64 rng(3);
  const u128 n = (u128(rng()) << 60) | rng() | 1;
  const Montgomery mont(n);
  for (int i = 0; i < 1000; ++i) {
    const u128 a = ((u128(rng()) << 64) | rng()) % n;
    const u128 b = rng() % n;
    // a*b fits when b < 2^64 and n < 2^124: check via the long product.
    const U256 w = mul_wide(a, b);
    u128 expect = 0;
    // Horner over the 256-bit value in base 2^64.
    const u128 mask = (u128(1) << 64) - 1;
    for (u128 limb : {w.hi >> 64, w.hi & mask, w.lo >> 64, w.lo & mask}) {
      for (int s = 0; s < 64; ++s) expect = (expect * 2) % n;
      expect = (expect + limb) % n;
    }
    EXPECT_EQ(mont.from(mont.mul(mont.to(a), mont.to(b))), expect);
  }
}

}  // namespace
}  // namespace nfsum::arith
