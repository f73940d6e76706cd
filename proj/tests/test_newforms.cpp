#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "nfsum/newforms.hpp"

namespace nfsum::newforms {
namespace {

using ec::Weierstrass;

// Oracle: literal count of affine solutions over F_p x F_p, plus infinity.
std::int64_t enumerate_ap(const Weierstrass& e, std::int64_t p) {
  std::int64_t n = 1;
  for (std::int64_t x = 0; x < p; ++x) {
    for (std::int64_t y = 0; y < p; ++y) {
      const i128 lhs = i128(y) * y + i128(e.a1) * x * y + i128(e.a3) * y;
      const i128 rhs = i128(x) * x * x + i128(e.a2) * x * x + i128(e.a4) * x + e.a6;
      if ((lhs - rhs) % p == 0) ++n;
    }
  }
  return p + 1 - n;
}

// Oracle: sigma-function identity for tau, exact in 128 bits for small n.
i128 sigma(std::int64_t n, int k) {
  i128 s = 0;
  for (std::int64_t d = 1; d <= n; ++d) {
    if (n % d != 0) continue;
    i128 v = 1;
    for (int i = 0; i < k; ++i) v *= d;
    s += v;
  }
  return s;
}
i128 tau_sigma_oracle(std::int64_t n) {
  i128 conv = 0;
  for (std::int64_t k = 1; k < n; ++k) conv += sigma(k, 5) * sigma(n - k, 5);
  const i128 num = 65 * sigma(n, 11) + 691 * sigma(n, 5) - 691 * 252 * conv;
  EXPECT_EQ(num % 756, 0);
  return num / 756;
}

// Oracle: q * prod_{m=1}^{nmax} (1 - q^m)^24 by multiplying each binomial
// factor in turn.
std::vector<i128> tau_product_oracle(std::size_t nmax) {
  std::vector<i128> c(nmax, 0);  // coefficient of q^i in the product
  c[0] = 1;
  for (std::size_t m = 1; m < nmax; ++m) {
    for (int rep = 0; rep < 24; ++rep) {
      for (std::size_t i = nmax - 1; i >= m; --i) c[i] -= c[i - m];
    }
  }
  return c;  // tau(n) = c[n-1]
}

const Weierstrass k37a{0, 0, 1, -1, 0};
const Weierstrass k389a{0, 1, 1, -2, 0};

TEST(PointCount, SmallExamples) {
  const Weierstrass e{0, 0, 0, 1, 1};  // y^2 = x^3 + x + 1
  EXPECT_EQ(enumerate_ap(e, 5), -3);
  EXPECT_EQ(ec::ap_naive(e, 5), -3);
  EXPECT_EQ(ec::ap_from_curve(e, 5), -3);
  EXPECT_EQ(ec::count_points(e, 5), 9u);
  // Long model at p = 2.
  EXPECT_EQ(ec::ap_from_curve(k37a, 2), enumerate_ap(k37a, 2));
  EXPECT_EQ(ec::ap_from_curve(k37a, 2), -2);
  EXPECT_EQ(ec::ap_from_curve(k37a, 3), enumerate_ap(k37a, 3));
}

TEST(PointCount, DiscriminantsOfFixtures) {
  EXPECT_EQ(ec::invariants(k37a).disc, 37);
  EXPECT_EQ(ec::invariants(k389a).disc, 389);
}

TEST(PointCount, BadPrimeRaises) {
  try {
    ec::ap_from_curve(k37a, 37);
    FAIL();
  } catch (const BadReductionError& e) {
    EXPECT_EQ(e.prime(), 37u);
    EXPECT_EQ(e.kind(), ErrorKind::kBadReduction);
  }
  EXPECT_THROW(ec::ap_bsgs(k389a, 389), BadReductionError);
}

TEST(PointCount, ExhaustiveAgreesWithLiteralEnumeration) {
  for (const auto& e : {k37a, k389a, Weierstrass{0, -1, 1, -10, -20}}) {
    for (std::int64_t p : {2, 3, 5, 7, 13, 31, 101, 211, 307}) {
      if (!ec::has_good_reduction(e, p)) continue;
      ASSERT_EQ(ec::ap_naive(e, p), enumerate_ap(e, p)) << p;
    }
  }
}

TEST(PointCount, BadPrimeCoefficientsOfMinimalModels) {
  // Multiplicative reduction: a_p = +-1.
  EXPECT_EQ(std::abs(ec::ap_any_prime(k37a, 37)), 1);
  EXPECT_EQ(ec::ap_any_prime(k37a, 37), enumerate_ap(k37a, 37));
  EXPECT_EQ(std::abs(ec::ap_any_prime(k389a, 389)), 1);
}

TEST(PointCount, BsgsAgreesWithNaive) {
  const auto primes = arith::primes_up_to(3000);
  for (const auto& e : {k37a, k389a}) {
    for (std::uint32_t p : primes.primes()) {
      if (p < 5 || !ec::has_good_reduction(e, p)) continue;
      ASSERT_EQ(ec::ap_bsgs(e, p), ec::ap_naive(e, p)) << p;
    }
  }
  // Sparse sample of larger primes.
  for (std::uint64_t p : {10007ULL, 65537ULL, 100003ULL, 999983ULL, 4294967291ULL}) {
    ec::BsgsStats stats;
    const auto a = ec::ap_bsgs(k37a, p, &stats);
    EXPECT_LE(i128(a) * a, i128(4) * p);
    if (p < 2'000'000) EXPECT_EQ(a, ec::ap_naive(k37a, p)) << p;
    EXPECT_FALSE(stats.fell_back);
  }
}

TEST(PointCount, HasseBoundOnRandomCurves) {
  std::mt19937_64 rng(11);
  const auto primes = arith::primes_up_to(50'000);
  for (int trial = 0; trial < 300; ++trial) {
    const Weierstrass e{0, 0, 0, static_cast<std::int64_t>(rng() % 2001) - 1000,
                        static_cast<std::int64_t>(rng() % 2001) - 1000};
    if (ec::invariants(e).disc == 0) continue;
    const std::uint64_t p = primes.primes()[100 + rng() % (primes.size() - 100)];
    if (!ec::has_good_reduction(e, p)) continue;
    const auto a = ec::ap_bsgs(e, p);
    ASSERT_LE(i128(a) * a, i128(4) * p);
    ASSERT_EQ(a, ec::ap_naive(e, p));
  }
}

TEST(Tau, SmallValuesMatchOracles) {
  const auto table = delta_tau_table(200);
  EXPECT_EQ(table.at(1), 1);
  EXPECT_EQ(table.at(2), -24);
  EXPECT_EQ(table.at(3), 252);
  EXPECT_EQ(table.at(4), -1472);
  EXPECT_EQ(table.at(5), 4830);
  for (std::int64_t n = 1; n <= 40; ++n) {
    ASSERT_EQ(table.at(n), tau_sigma_oracle(n)) << n;
  }
  const auto product = tau_product_oracle(200);
  for (std::uint64_t n = 1; n <= 200; ++n) ASSERT_EQ(table.at(n), product[n - 1]) << n;
  EXPECT_EQ(arith::factorize(table.at(5)).factors,
            (std::vector<arith::PrimePower>{{2, 1}, {3, 1}, {5, 1}, {7, 1}, {23, 1}}));
}

TEST(Tau, HeckeRecurrenceAtPrimeSquares) {
  const auto table = delta_tau_table(10'000);
  for (std::uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61,
                          67, 71, 73, 79, 83, 89, 97}) {
    i128 p11 = 1;
    for (int i = 0; i < 11; ++i) p11 *= p;
    ASSERT_EQ(table.at(p * p), table.at(p) * table.at(p) - p11) << p;
  }
  check_deligne(table);
}

TEST(Tau, CapacityAndThreadIndependence) {
  EXPECT_THROW(delta_tau_table(kMaxTauIndex + 1), Error);
  EXPECT_EQ(delta_tau_table(3000, 1), delta_tau_table(3000, 4));
}

TEST(Deligne, ExactBoundary) {
  EXPECT_TRUE(within_deligne(4, 5, 2));    // 16 <= 20
  EXPECT_FALSE(within_deligne(5, 5, 2));   // 25 > 20
  EXPECT_TRUE(within_deligne(-4, 5, 2));
  EXPECT_TRUE(within_deligne(kMaxMagnitude, 1'000'003, 24));  // rhs saturates
  // k = 12, p = 2: 4 * 2^11 = 8192, floor(sqrt) = 90.
  EXPECT_TRUE(within_deligne(90, 2, 12));
  EXPECT_FALSE(within_deligne(91, 2, 12));
}

std::string cache_text(const std::string& header, const std::string& body) {
  return std::string(kCacheMagic) + "\n" + header + "\n" + body;
}

TEST(CacheFormat, LoadExamples) {
  const auto t = parse_table(cache_text("#k=2 N=37 label=x mode=primes nmax=3", "2,-2\n3,-3\n"));
  EXPECT_EQ(t.at(2), -2);
  EXPECT_EQ(t.at(3), -3);
  EXPECT_EQ(t.spec().level, 37u);

  const auto empty = parse_table(cache_text("#k=2 N=37 label=x mode=primes nmax=0", ""));
  EXPECT_EQ(empty.nmax(), 0u);
  EXPECT_TRUE(empty.entries().empty());
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse_table(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  ADD_FAILURE() << "expected a parse error";
  return 0;
}

TEST(CacheFormat, Rejections) {
  // Deligne: |a(5)| = 5 > 2 sqrt(5).
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 label=x mode=primes nmax=5",
                                        "2,-2\n3,-3\n5,5\n")),
            5u);
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 label=x mode=primes nmax=5",
                                        "3,-3\n2,-2\n")),
            3u);
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 mode=primes nmax=5", "")), 2u);
  EXPECT_EQ(parse_error_line("#newform-coeffs v2\n"), 1u);
  EXPECT_EQ(parse_error_line(cache_text("#k=3 N=37 label=x mode=primes nmax=5", "")), 2u);
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 label=x mode=primes nmax=3",
                                        "2,-2\n3,-3 \n")),
            4u);
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 label=x mode=primes nmax=3",
                                        "2,-2\n3,-3\r\n")),
            4u);
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 label=x mode=primes nmax=3",
                                        "2,-2\n3,-3")),
            4u);
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 label=x mode=primes nmax=3",
                                        "2,-2\n3,+3\n")),
            4u);
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 label=x mode=primes nmax=7",
                                        "2,-2\n3,-3\n7,1\n")),
            5u);  // 5 missing
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 label=x mode=primes nmax=7",
                                        "2,-2\n3,-3\n")),
            5u);  // ends early
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 label=x mode=all nmax=2", "1,2\n2,-2\n")),
            3u);
  EXPECT_EQ(parse_error_line(cache_text("#k=2 N=37 label=x mode=all nmax=2", "1,1\n4,0\n")),
            4u);
}

TEST(CacheFormat, BadPrimesAreExemptFromTheBound) {
  // 37 | N, so a(37) is not Deligne-checked.
  std::string body;
  const auto table = arith::primes_up_to(37);
  for (std::uint32_t p : table.primes()) {
    body += std::to_string(p) + "," + (p == 37 ? "-1" : "0") + "\n";
  }
  EXPECT_NO_THROW(parse_table(cache_text("#k=2 N=37 label=x mode=primes nmax=37", body)));
}

TEST(CacheFormat, PersistedTablesReloadBitIdentically) {
  const auto dir = std::filesystem::temp_directory_path() / "nfsum_cache_test";
  std::filesystem::create_directories(dir);
  std::vector<CoefficientTable> tables = {build_table(fixture_37a(), 5000, 1),
                                          build_table(fixture_delta(), 500, 1),
                                          extend_to_all_n(build_table(fixture_389a(), 300, 1), 300)};
  for (const auto& t : tables) {
    const auto path = dir / (t.spec().label + ".coeffs");
    save_coefficients(t, path);
    const auto back = load_coefficients(path);
    EXPECT_EQ(back.entries(), t.entries());
    EXPECT_EQ(serialize(back), serialize(t));
    std::ifstream in(path, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(bytes, serialize(t));
  }
  std::filesystem::remove_all(dir);
}

TEST(BuildTable, FixturesSatisfyDeligneAndMatchEnumeration) {
  const auto f = build_table(fixture_37a(), 2000, 2);
  const auto g = build_table(fixture_389a(), 2000, 2);
  EXPECT_EQ(f.at(2), -2);
  EXPECT_EQ(f.at(3), -3);
  EXPECT_EQ(f.at(5), -2);
  EXPECT_EQ(f.at(7), -1);
  for (std::uint64_t p : {2, 3, 5, 7, 11, 13, 37, 389}) {
    EXPECT_EQ(f.at(p), enumerate_ap(k37a, p)) << p;
    EXPECT_EQ(g.at(p), enumerate_ap(k389a, p)) << p;
  }
  check_deligne(f);
  check_deligne(g);
}

TEST(BuildTable, RejectsInvalidSpecs) {
  auto bad = fixture_37a();
  bad.weight = 4;
  EXPECT_THROW(build_table(bad, 100), Error);
  auto sing = fixture_37a();
  sing.source = Weierstrass{0, 0, 0, 0, 0};
  EXPECT_THROW(build_table(sing, 100), Error);
  auto wrong_level = fixture_37a();
  wrong_level.level = 1;  // 37 | disc but not N
  EXPECT_THROW(build_table(wrong_level, 100), Error);
  auto cm = fixture_37a();
  cm.non_cm = false;
  EXPECT_THROW(build_table(cm, 100), Error);
}

TEST(ExtendToAllN, HeckeRelationsAndMultiplicativity) {
  const auto primes = build_table(fixture_37a(), 1000, 1);
  const auto all = extend_to_all_n(primes, 1000);
  EXPECT_EQ(all.at(1), 1);
  EXPECT_EQ(all.at(4), all.at(2) * all.at(2) - 2);
  EXPECT_EQ(all.at(9), all.at(3) * all.at(3) - 3);
  EXPECT_EQ(all.at(8), all.at(2) * all.at(4) - 2 * all.at(2));
  EXPECT_EQ(all.at(6), all.at(2) * all.at(3));
  EXPECT_EQ(all.at(37 * 37 > 1000 ? 37 : 37), primes.at(37));
  // Known q-expansion of 37a: q - 2q^2 - 3q^3 + 2q^4 - 2q^5 + 6q^6 - q^7.
  EXPECT_EQ(all.at(4), 2);
  EXPECT_EQ(all.at(6), 6);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const std::uint64_t m = rng() % 31 + 1, n = rng() % 31 + 1;
    if (std::gcd(m, n) != 1) continue;
    ASSERT_EQ(all.at(m * n), all.at(m) * all.at(n));
  }
}

TEST(ExtendToAllN, RamifiedPrimesUseDegenerateRecurrence) {
  const auto primes = build_table(fixture_37a(), 1400, 1);
  const auto all = extend_to_all_n(primes, 1400);
  EXPECT_EQ(all.at(37 * 37), primes.at(37) * primes.at(37));
}

TEST(ExtendToAllN, DeltaFromPrimesMatchesQExpansion) {
  const auto qexp = delta_tau_table(2000);
  const auto rebuilt = extend_to_all_n(primes_only(qexp), 2000);
  EXPECT_EQ(rebuilt.entries(), qexp.entries());
  EXPECT_EQ(rebuilt.at(4), -1472);
}

TEST(ExtendToAllN, MissingPrimeIsIncompleteInput) {
  const auto primes = build_table(fixture_37a(), 100, 1);
  try {
    extend_to_all_n(primes, 200);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIncompleteInput);
  }
}

PairContext fixture_pair(std::uint64_t nmax, Sign sign = Sign::kPlus) {
  return PairContext::make(build_table(fixture_37a(), nmax, 1),
                           build_table(fixture_389a(), nmax, 1), sign);
}

TEST(PairContext, Invariants) {
  const auto ctx = fixture_pair(100);
  EXPECT_EQ(ctx.level, 37u * 389u);
  auto f = build_table(fixture_37a(), 100, 1);
  EXPECT_THROW(PairContext::make(f, f, Sign::kPlus), Error);
  EXPECT_THROW(PairContext::make(f, build_table(fixture_delta(), 100, 1), Sign::kPlus), Error);
}

TEST(SumCoefficient, Examples) {
  const auto plus = fixture_pair(1000);
  const auto minus = fixture_pair(1000, Sign::kMinus);
  EXPECT_EQ(sum_coefficient(plus, 5), enumerate_ap(k37a, 5) + enumerate_ap(k389a, 5));
  for (std::uint64_t p : {2, 3, 5, 7, 11, 101, 997}) {
    EXPECT_EQ(sum_coefficient(plus, p) - sum_coefficient(minus, p), 2 * plus.g.at(p));
    const i128 s = sum_coefficient(plus, p);
    EXPECT_LE(s * s, i128(16) * p);
  }
  EXPECT_THROW(sum_coefficient(plus, 1009), Error);
  EXPECT_THROW(sum_coefficient(plus, 37), Error);
  auto lax = plus;
  lax.good_prime_only = false;
  EXPECT_NO_THROW(sum_coefficient(lax, 37));

  // Synthetic: a_f(p) = 3, a_g(p) = -3.
  NewformSpec fs{"f", 2, 1, FileSource{}, true}, gs{"g", 2, 1, FileSource{}, true};
  const auto ctx = PairContext::make(CoefficientTable(fs, 7, TableMode::kPrimes, {{7, 3}}),
                                     CoefficientTable(gs, 7, TableMode::kPrimes, {{7, -3}}),
                                     Sign::kPlus);
  EXPECT_EQ(sum_coefficient(ctx, 7), 0);
}

// Oracle: direct divisor sum.
i128 convolution_oracle(const CoefficientTable& f, const CoefficientTable& g, std::uint64_t n) {
  i128 s = 0;
  for (std::uint64_t d = 1; d <= n; ++d) {
    if (n % d == 0) s += f.at(d) * g.at(n / d);
  }
  return s;
}

TEST(DirichletConvolution, MatchesDivisorSumsAndIsMultiplicative) {
  const std::uint64_t nmax = 10'000;
  const auto f = extend_to_all_n(build_table(fixture_37a(), nmax, 1), nmax);
  const auto g = extend_to_all_n(build_table(fixture_389a(), nmax, 1), nmax);
  const auto c = dirichlet_convolution(f, g, nmax);
  EXPECT_EQ(c.at(1), 1);
  for (std::uint64_t p : {2, 3, 5, 7, 37, 389, 9973}) EXPECT_EQ(c.at(p), f.at(p) + g.at(p));
  for (std::uint64_t n = 1; n <= 1000; ++n) ASSERT_EQ(c.at(n), convolution_oracle(f, g, n)) << n;
  std::mt19937_64 rng(9);
  int checked = 0;
  while (checked < 2000) {
    const std::uint64_t m = rng() % 200 + 1, n = rng() % 200 + 1;
    if (std::gcd(m, n) != 1 || m * n > nmax) continue;
    ASSERT_EQ(c.at(m * n), c.at(m) * c.at(n)) << m << " " << n;
    ++checked;
  }
}

TEST(DirichletConvolution, OverflowNamesIndex) {
  NewformSpec spec{"big", 2, 1, FileSource{}, true};
  const i128 huge = i128(1) << 100;
  std::vector<Entry> e{{1, 1}, {2, huge}, {3, 0}, {4, huge}};
  const CoefficientTable t(spec, 4, TableMode::kAll, e);
  try {
    dirichlet_convolution(t, t, 4);
    FAIL();
  } catch (const OverflowError& err) {
    EXPECT_EQ(err.index(), 4u);
  }
  EXPECT_THROW(dirichlet_convolution(t, t, 5), Error);
}

TEST(NormalizedPair, Examples) {
  NewformSpec es{"e", 2, 496, Weierstrass{0, 0, 0, 1, 1}, true};
  NewformSpec zs{"z", 2, 1, FileSource{}, true};
  const auto ctx = PairContext::make(build_table(es, 10, 1),
                                     CoefficientTable(zs, 10, TableMode::kPrimes,
                                                      {{2, 0}, {3, 0}, {5, 0}, {7, 0}}),
                                     Sign::kPlus);
  const auto st = normalized_pair(ctx, 5);
  EXPECT_NEAR(st.s, -3.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(st.s, -1.3416, 1e-4);
  EXPECT_EQ(st.t, 0.0);

  const auto pair = fixture_pair(20'000);
  for (const auto& ps : good_prime_sums(pair, 20'000)) {
    const auto v = normalized_pair(pair, ps.p);
    ASSERT_LE(std::abs(v.s), 2.0 + 1e-12);
    ASSERT_LE(std::abs(v.t), 2.0 + 1e-12);
  }
  const std::uint64_t p = 1'000'003;
  const auto extremal = static_cast<double>(to_long_double(isqrt(u128(4) * p)) / normalizer(p, 2));
  EXPECT_LE(extremal, 2.0);
  EXPECT_GT(extremal, 1.999);
}

TEST(TwistScan, Examples) {
  auto f = build_table(fixture_37a(), 10'000, 1);
  auto copy = f;
  copy.relabel("37a-copy");
  const auto same = twist_equivalence_scan(PairContext::make(f, copy, Sign::kPlus), 10'000);
  EXPECT_EQ(same.fraction, 1.0);
  EXPECT_TRUE(same.likely_twist_equivalent);

  const auto generic = twist_equivalence_scan(fixture_pair(10'000), 10'000);
  EXPECT_LT(generic.fraction, 0.5);
  EXPECT_FALSE(generic.likely_twist_equivalent);

  const auto none = twist_equivalence_scan(fixture_pair(100), 1);
  EXPECT_TRUE(none.insufficient_data);
}

}  // namespace
}  // namespace nfsum::newforms
