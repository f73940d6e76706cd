#pragma once

// Integer Fourier coefficients of newforms: generation (elliptic curves, the
// Delta q-expansion, files), the on-disk cache format, Hecke extension to all
// n, and the pair sums S_p = a_f(p) +- a_g(p).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "nfsum/arith.hpp"
#include "nfsum/error.hpp"
#include "nfsum/int128.hpp"
#include "nfsum/parallel.hpp"
#include "nfsum/point_count.hpp"

namespace nfsum::newforms {

struct DeltaQexp {
  friend bool operator==(const DeltaQexp&, const DeltaQexp&) = default;
};
struct FileSource {
  std::string path;
  friend bool operator==(const FileSource&, const FileSource&) = default;
};
using Source = std::variant<ec::Weierstrass, DeltaQexp, FileSource>;

struct NewformSpec {
  std::string label;
  int weight = 2;
  std::uint64_t level = 1;
  Source source = DeltaQexp{};
  bool non_cm = true;  // declared, not verified

  friend bool operator==(const NewformSpec&, const NewformSpec&) = default;
};

inline void validate(const NewformSpec& spec) {
  if (spec.label.empty() ||
      spec.label.find_first_of(" \t\r\n,=") != std::string::npos) {
    throw Error(ErrorKind::kParameter, "label must be nonempty without spaces, ',' or '='");
  }
  if (spec.weight < 2 || spec.weight % 2 != 0) {
    throw Error(ErrorKind::kParameter, "weight must be even and >= 2");
  }
  if (spec.level < 1) throw Error(ErrorKind::kParameter, "level must be positive");
  if (!spec.non_cm) {
    throw Error(ErrorKind::kParameter, spec.label + " is not declared non-CM");
  }
  if (const auto* curve = std::get_if<ec::Weierstrass>(&spec.source)) {
    if (spec.weight != 2) throw Error(ErrorKind::kParameter, "curves give weight 2");
    if (ec::invariants(*curve).disc == 0) {
      throw Error(ErrorKind::kParameter, "singular Weierstrass model");
    }
  }
  if (std::holds_alternative<DeltaQexp>(spec.source) &&
      (spec.weight != 12 || spec.level != 1)) {
    throw Error(ErrorKind::kParameter, "Delta has weight 12 and level 1");
  }
}

enum class TableMode { kPrimes, kAll };

inline const char* to_string(TableMode m) { return m == TableMode::kPrimes ? "primes" : "all"; }

// |a| <= 2 p^((k-1)/2), decided exactly as a^2 <= 4 p^(k-1).
inline bool within_deligne(i128 a, std::uint64_t p, int weight) {
  const u128 mag = uabs(a);
  const U256 lhs = mul_wide(mag, mag);
  bool overflow = false;
  U256 rhs{0, 4};
  for (int i = 0; i < weight - 1 && !overflow; ++i) rhs = mul_sat(rhs, p, overflow);
  return overflow || lhs <= rhs;
}

struct Entry {
  std::uint64_t n = 0;
  i128 a = 0;
  friend bool operator==(const Entry&, const Entry&) = default;
};

class CoefficientTable {
 public:
  CoefficientTable() = default;
  CoefficientTable(NewformSpec spec, std::uint64_t nmax, TableMode mode,
                   std::vector<Entry> entries)
      : spec_(std::move(spec)), nmax_(nmax), mode_(mode), entries_(std::move(entries)) {}

  const NewformSpec& spec() const noexcept { return spec_; }
  std::uint64_t nmax() const noexcept { return nmax_; }
  TableMode mode() const noexcept { return mode_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  std::optional<i128> find(std::uint64_t n) const {
    if (mode_ == TableMode::kAll) {
      if (n == 0 || n > entries_.size()) return std::nullopt;
      return entries_[n - 1].a;
    }
    auto it = std::lower_bound(entries_.begin(), entries_.end(), n,
                               [](const Entry& e, std::uint64_t v) { return e.n < v; });
    if (it == entries_.end() || it->n != n) return std::nullopt;
    return it->a;
  }

  i128 at(std::uint64_t n) const {
    if (auto v = find(n)) return *v;
    throw Error(ErrorKind::kCoverage, spec_.label + " has no coefficient at n=" +
                                          std::to_string(n) + " (nmax=" +
                                          std::to_string(nmax_) + ")");
  }

  void relabel(std::string label) { spec_.label = std::move(label); }

  friend bool operator==(const CoefficientTable&, const CoefficientTable&) = default;

 private:
  NewformSpec spec_;
  std::uint64_t nmax_ = 0;
  TableMode mode_ = TableMode::kPrimes;
  std::vector<Entry> entries_;
};

// Throws at the first good prime violating the Deligne bound.
inline void check_deligne(const CoefficientTable& t) {
  for (const auto& e : t.entries()) {
    if (t.mode() == TableMode::kAll && !arith::is_prime(e.n)) continue;
    if (t.spec().level % e.n == 0) continue;
    if (!within_deligne(e.a, e.n, t.spec().weight)) {
      throw Error(ErrorKind::kParameter,
                  t.spec().label + ": Deligne bound violated at p=" + std::to_string(e.n));
    }
  }
}

// ---------------------------------------------------------------------------
// Cache file format (bit-exact):
//   #newform-coeffs v1
//   #k=<int> N=<int> label=<string> mode=<primes|all> nmax=<int>
//   <n>,<a>          one per line, n strictly increasing, LF endings

inline constexpr std::string_view kCacheMagic = "#newform-coeffs v1";

inline std::string serialize(const CoefficientTable& t) {
  std::string out;
  out.reserve(32 + t.entries().size() * 12);
  out += kCacheMagic;
  out += '\n';
  out += "#k=" + std::to_string(t.spec().weight) + " N=" + std::to_string(t.spec().level) +
         " label=" + t.spec().label + " mode=" + to_string(t.mode()) +
         " nmax=" + std::to_string(t.nmax()) + "\n";
  for (const auto& e : t.entries()) {
    out += std::to_string(e.n);
    out += ',';
    out += nfsum::to_string(e.a);
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::optional<std::uint64_t> parse_canonical_u64(std::string_view s) {
  if (s.empty() || (s.size() > 1 && s.front() == '0') || s.size() > 19) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

inline std::optional<i128> parse_canonical_i128(std::string_view s) {
  std::string_view digits = s;
  if (!digits.empty() && digits.front() == '-') digits.remove_prefix(1);
  if (digits.empty() || (digits.size() > 1 && digits.front() == '0')) return std::nullopt;
  if (s == "-0") return std::nullopt;
  return parse_i128(s);
}

}  // namespace detail

inline CoefficientTable parse_table(std::string_view text, std::string origin = {}) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    if (pos >= text.size()) return std::nullopt;
    const std::size_t nl = text.find('\n', pos);
    ++line_no;
    if (nl == std::string_view::npos) {
      throw ParseError(line_no, "missing LF line terminator");
    }
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      throw ParseError(line_no, "trailing whitespace");
    }
    return line;
  };

  const auto magic = next_line();
  if (!magic || *magic != kCacheMagic) throw ParseError(1, "bad magic line");
  const auto header = next_line();
  if (!header) throw ParseError(2, "missing header line");

  NewformSpec spec;
  spec.source = FileSource{std::move(origin)};
  TableMode mode = TableMode::kPrimes;
  std::uint64_t nmax = 0;
  {
    if (header->empty() || header->front() != '#') throw ParseError(2, "header must start with '#'");
    std::string_view rest = header->substr(1);
    const char* keys[] = {"k", "N", "label", "mode", "nmax"};
    for (int i = 0; i < 5; ++i) {
      const std::size_t sp = rest.find(' ');
      std::string_view tok = rest.substr(0, sp);
      rest = sp == std::string_view::npos ? std::string_view{} : rest.substr(sp + 1);
      const std::size_t eq = tok.find('=');
      if (eq == std::string_view::npos || tok.substr(0, eq) != keys[i]) {
        throw ParseError(2, std::string("expected field '") + keys[i] + "='");
      }
      const std::string_view val = tok.substr(eq + 1);
      if (i == 2) {
        spec.label = std::string(val);
        continue;
      }
      if (i == 3) {
        if (val == "primes") mode = TableMode::kPrimes;
        else if (val == "all") mode = TableMode::kAll;
        else throw ParseError(2, "mode must be primes or all");
        continue;
      }
      const auto num = detail::parse_canonical_u64(val);
      if (!num) throw ParseError(2, std::string("bad integer for ") + keys[i]);
      if (i == 0) spec.weight = static_cast<int>(*num);
      if (i == 1) spec.level = *num;
      if (i == 4) nmax = *num;
    }
    if (!rest.empty()) throw ParseError(2, "unexpected trailing header fields");
    try {
      validate(spec);
    } catch (const Error& e) {
      throw ParseError(2, e.what());
    }
  }

  std::vector<Entry> entries;
  std::uint64_t expected_prime = 2;  // next prime index required in primes mode
  while (auto line = next_line()) {
    const std::size_t comma = line->find(',');
    if (comma == std::string_view::npos) throw ParseError(line_no, "expected '<n>,<a>'");
    const auto n = detail::parse_canonical_u64(line->substr(0, comma));
    const auto a = detail::parse_canonical_i128(line->substr(comma + 1));
    if (!n || !a) throw ParseError(line_no, "malformed decimal integer");
    if (!entries.empty() && *n <= entries.back().n) {
      throw ParseError(line_no, "indices must be strictly increasing");
    }
    if (*n < 1 || *n > nmax) throw ParseError(line_no, "index outside [1, nmax]");
    if (mode == TableMode::kAll) {
      if (*n != entries.size() + 1) throw ParseError(line_no, "all-n mode needs consecutive n");
      if (*n == 1 && *a != 1) throw ParseError(line_no, "a(1) must be 1");
    } else {
      if (!arith::is_prime(*n)) throw ParseError(line_no, "primes mode index is not prime");
      if (*n != expected_prime) {
        throw ParseError(line_no, "missing prime index " + std::to_string(expected_prime));
      }
      expected_prime = *n + 1;
      while (!arith::is_prime(expected_prime)) ++expected_prime;
    }
    const bool prime_index = mode == TableMode::kPrimes || arith::is_prime(*n);
    if (prime_index && spec.level % *n != 0 && !within_deligne(*a, *n, spec.weight)) {
      throw ParseError(line_no, "Deligne bound violated at p=" + std::to_string(*n));
    }
    entries.push_back({*n, *a});
  }
  const bool complete = mode == TableMode::kAll ? entries.size() == nmax
                                                : expected_prime > nmax;
  if (!complete) throw ParseError(line_no + 1, "table ends before nmax");
  return CoefficientTable(std::move(spec), nmax, mode, std::move(entries));
}

inline CoefficientTable load_coefficients(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_table(ss.str(), path.string());
}

// Writes to a sibling temporary and renames it over `path`.
inline void save_coefficients(const CoefficientTable& t, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp);
    const std::string text = serialize(t);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::kIo, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Delta = q prod (1 - q^n)^24.

inline constexpr std::uint64_t kMaxTauIndex = 1'000'000;

// Nonzero coefficients of prod (1 - q^n) up to q^degree (Euler's pentagonal
// number theorem), ascending by exponent.
inline std::vector<std::pair<std::uint64_t, int>> pentagonal_series(std::uint64_t degree) {
  std::vector<std::pair<std::uint64_t, int>> terms{{0, 1}};
  for (std::uint64_t k = 1;; ++k) {
    const std::uint64_t e1 = k * (3 * k - 1) / 2, e2 = k * (3 * k + 1) / 2;
    if (e1 > degree) break;
    const int sign = (k % 2 == 1) ? -1 : 1;
    terms.emplace_back(e1, sign);
    if (e2 <= degree) terms.emplace_back(e2, sign);
  }
  return terms;
}

// All-n table of tau(n), n <= nmax: the pentagonal series multiplied into an
// accumulator 23 times.
inline CoefficientTable delta_tau_table(std::uint64_t nmax, unsigned threads = 1) {
  if (nmax < 1) throw Error(ErrorKind::kParameter, "nmax must be positive");
  if (nmax > kMaxTauIndex) {
    throw Error(ErrorKind::kCapacity, "tau table supports nmax <= 1e6");
  }
  const std::uint64_t degree = nmax - 1;
  const auto eta = pentagonal_series(degree);
  std::vector<i128> acc(nmax, 0), next(nmax, 0);
  for (const auto& [e, s] : eta) acc[e] = s;
  for (int power = 2; power <= 24; ++power) {
    parallel_for(nmax, threads, [&](std::size_t n) {
      i128 sum = 0;
      for (const auto& [e, s] : eta) {
        if (e > n) break;
        sum += s > 0 ? acc[n - e] : -acc[n - e];
      }
      next[n] = sum;
    });
    acc.swap(next);
  }
  std::vector<Entry> entries(nmax);
  for (std::uint64_t n = 1; n <= nmax; ++n) entries[n - 1] = {n, acc[n - 1]};
  NewformSpec spec{"delta", 12, 1, DeltaQexp{}, true};
  return CoefficientTable(std::move(spec), nmax, TableMode::kAll, std::move(entries));
}

// ---------------------------------------------------------------------------

inline CoefficientTable primes_only(const CoefficientTable& t) {
  if (t.mode() == TableMode::kPrimes) return t;
  std::vector<Entry> primes;
  for (const auto& e : t.entries()) {
    if (arith::is_prime(e.n)) primes.push_back(e);
  }
  return CoefficientTable(t.spec(), t.nmax(), TableMode::kPrimes, std::move(primes));
}

// Prime-indexed table for p <= nmax from the form's source, Deligne-checked.
// `seed` only steers which random points BSGS tries; the values are exact.
inline CoefficientTable build_table(const NewformSpec& spec, std::uint64_t nmax,
                                    unsigned threads = 0, std::uint64_t seed = 0) {
  validate(spec);
  if (nmax < 2) throw Error(ErrorKind::kParameter, "nmax must be >= 2");
  CoefficientTable table;
  if (const auto* curve = std::get_if<ec::Weierstrass>(&spec.source)) {
    const auto primes = arith::primes_up_to(nmax);
    const auto disc = ec::invariants(*curve).disc;
    auto values = parallel_map<std::int64_t>(primes.size(), threads, [&](std::size_t i) {
      const std::uint64_t p = primes.primes()[i];
      if (disc % static_cast<i128>(p) == 0) {
        if (spec.level % p != 0) {
          throw Error(ErrorKind::kParameter, spec.label + ": model is singular at p=" +
                                                 std::to_string(p) + " which does not divide N");
        }
        return ec::ap_any_prime(*curve, p);
      }
      return ec::ap_from_curve(*curve, p, seed);
    });
    std::vector<Entry> entries(primes.size());
    for (std::size_t i = 0; i < primes.size(); ++i) entries[i] = {primes.primes()[i], values[i]};
    table = CoefficientTable(spec, nmax, TableMode::kPrimes, std::move(entries));
  } else if (std::holds_alternative<DeltaQexp>(spec.source)) {
    auto all = delta_tau_table(nmax, threads);
    all.relabel(spec.label);
    table = primes_only(all);
  } else {
    const auto& file = std::get<FileSource>(spec.source);
    auto loaded = load_coefficients(file.path);
    if (loaded.nmax() < nmax) {
      throw Error(ErrorKind::kCoverage, file.path + " ends at nmax=" +
                                            std::to_string(loaded.nmax()));
    }
    if (loaded.spec().weight != spec.weight || loaded.spec().level != spec.level) {
      throw Error(ErrorKind::kParameter, file.path + " header disagrees with " + spec.label);
    }
    std::vector<Entry> entries;
    for (const auto& e : primes_only(loaded).entries()) {
      if (e.n <= nmax) entries.push_back(e);
    }
    table = CoefficientTable(spec, nmax, TableMode::kPrimes, std::move(entries));
  }
  check_deligne(table);
  return table;
}

namespace detail {

inline i128 checked_mul(i128 a, i128 b, std::uint64_t n, const char* what) {
  i128 r;
  if (__builtin_mul_overflow(a, b, &r)) throw OverflowError(n, what);
  return r;
}
inline i128 checked_add(i128 a, i128 b, std::uint64_t n, const char* what) {
  i128 r;
  if (__builtin_add_overflow(a, b, &r)) throw OverflowError(n, what);
  return r;
}

}  // namespace detail

// a(p^{r+1}) = a(p) a(p^r) - p^{k-1} a(p^{r-1}) at p not dividing the level,
// a(p^{r+1}) = a(p) a(p^r) at p | level, and a(mn) = a(m) a(n) for coprime m, n.
inline CoefficientTable extend_to_all_n(const CoefficientTable& primes, std::uint64_t nmax) {
  if (nmax < 1) throw Error(ErrorKind::kParameter, "nmax must be positive");
  std::vector<std::uint32_t> spf(nmax + 1, 0);
  for (std::uint64_t i = 2; i <= nmax; ++i) {
    if (spf[i] != 0) continue;
    for (std::uint64_t j = i; j <= nmax; j += i) {
      if (spf[j] == 0) spf[j] = static_cast<std::uint32_t>(i);
    }
  }
  const int weight = primes.spec().weight;
  const std::uint64_t level = primes.spec().level;
  std::vector<i128> a(nmax + 1, 0);
  a[1] = 1;
  for (std::uint64_t n = 2; n <= nmax; ++n) {
    const std::uint64_t p = spf[n];
    std::uint64_t m = n;
    int e = 0;
    while (m % p == 0) {
      m /= p;
      ++e;
    }
    if (m != 1) {
      a[n] = detail::checked_mul(a[n / m], a[m], n, "multiplicative extension");
      continue;
    }
    if (e == 1) {
      const auto ap = primes.find(p);
      if (!ap) {
        throw Error(ErrorKind::kIncompleteInput,
                    primes.spec().label + " is missing a(" + std::to_string(p) + ")");
      }
      a[n] = *ap;
      continue;
    }
    i128 v = detail::checked_mul(a[p], a[n / p], n, "Hecke recurrence");
    if (level % p != 0) {
      i128 pk = 1;
      for (int i = 0; i < weight - 1; ++i) pk = detail::checked_mul(pk, p, n, "p^(k-1)");
      v = detail::checked_add(v, -detail::checked_mul(pk, a[n / p / p], n, "Hecke recurrence"),
                              n, "Hecke recurrence");
    }
    a[n] = v;
  }
  std::vector<Entry> entries(nmax);
  for (std::uint64_t n = 1; n <= nmax; ++n) entries[n - 1] = {n, a[n]};
  return CoefficientTable(primes.spec(), nmax, TableMode::kAll, std::move(entries));
}

// ---------------------------------------------------------------------------

enum class Sign { kPlus, kMinus };

inline const char* to_string(Sign s) { return s == Sign::kPlus ? "plus" : "minus"; }

struct PairContext {
  CoefficientTable f;
  CoefficientTable g;
  std::uint64_t level = 1;  // lcm(N_f, N_g)
  Sign sign = Sign::kPlus;
  bool good_prime_only = true;
  bool twist_inequivalent = true;  // declared

  static PairContext make(CoefficientTable f, CoefficientTable g, Sign sign) {
    if (f.spec().weight != g.spec().weight) {
      throw Error(ErrorKind::kParameter, "pair members must share the weight");
    }
    if (f.spec().label == g.spec().label) {
      throw Error(ErrorKind::kParameter, "pair members need distinct labels");
    }
    PairContext ctx;
    ctx.level = std::lcm(f.spec().level, g.spec().level);
    ctx.f = std::move(f);
    ctx.g = std::move(g);
    ctx.sign = sign;
    return ctx;
  }

  int weight() const { return f.spec().weight; }
  std::uint64_t nmax() const { return std::min(f.nmax(), g.nmax()); }
  bool is_good(std::uint64_t p) const { return level % p != 0; }
};

inline i128 sum_coefficient(const PairContext& ctx, std::uint64_t p) {
  if (p > ctx.f.nmax() || p > ctx.g.nmax()) {
    throw Error(ErrorKind::kCoverage, "p=" + std::to_string(p) + " beyond table range");
  }
  if (ctx.good_prime_only && !ctx.is_good(p)) {
    throw Error(ErrorKind::kParameter, "p=" + std::to_string(p) + " divides the level");
  }
  const i128 af = ctx.f.at(p), ag = ctx.g.at(p);
  return ctx.sign == Sign::kPlus ? af + ag : af - ag;
}

struct PrimeSum {
  std::uint64_t p = 0;
  i128 af = 0, ag = 0, s = 0;
};

// S_p for every good prime p <= x (p not dividing the level), ascending.
inline std::vector<PrimeSum> good_prime_sums(const PairContext& ctx, std::uint64_t x) {
  if (x > ctx.nmax()) {
    throw Error(ErrorKind::kCoverage, "tables end at " + std::to_string(ctx.nmax()) +
                                          ", requested x=" + std::to_string(x));
  }
  std::vector<PrimeSum> out;
  if (x < 2) return out;
  const auto table = arith::primes_up_to(x);
  for (std::uint32_t p : table.primes()) {
    if (!ctx.is_good(p)) continue;
    const i128 af = ctx.f.at(p), ag = ctx.g.at(p);
    out.push_back({p, af, ag, ctx.sign == Sign::kPlus ? af + ag : af - ag});
  }
  return out;
}

struct ConvolutionTable {
  std::uint64_t nmax = 0;
  std::vector<i128> values;  // values[n] for 1 <= n <= nmax; values[0] unused

  i128 at(std::uint64_t n) const {
    if (n < 1 || n > nmax) throw Error(ErrorKind::kCoverage, "convolution index out of range");
    return values[n];
  }
};

inline ConvolutionTable dirichlet_convolution(const CoefficientTable& f,
                                              const CoefficientTable& g, std::uint64_t nmax) {
  for (const auto* t : {&f, &g}) {
    if (t->mode() != TableMode::kAll || t->nmax() < nmax) {
      throw Error(ErrorKind::kCoverage, t->spec().label + " is not an all-n table to " +
                                            std::to_string(nmax));
    }
  }
  ConvolutionTable out{nmax, std::vector<i128>(nmax + 1, 0)};
  for (std::uint64_t d = 1; d <= nmax; ++d) {
    const i128 fd = f.entries()[d - 1].a;
    if (fd == 0) continue;
    for (std::uint64_t m = 1; d * m <= nmax; ++m) {
      const std::uint64_t n = d * m;
      const i128 term = detail::checked_mul(fd, g.entries()[m - 1].a, n, "convolution");
      out.values[n] = detail::checked_add(out.values[n], term, n, "convolution");
    }
  }
  return out;
}

struct NormalizedPair {
  double s = 0.0;
  double t = 0.0;
};

inline long double normalizer(std::uint64_t p, int weight) {
  return std::pow(static_cast<long double>(p), static_cast<long double>(weight - 1) / 2.0L);
}

inline NormalizedPair normalized_pair(const PairContext& ctx, std::uint64_t p) {
  if (!ctx.is_good(p)) {
    throw Error(ErrorKind::kParameter, "p=" + std::to_string(p) + " divides the level");
  }
  const long double scale = normalizer(p, ctx.weight());
  return {static_cast<double>(to_long_double(ctx.f.at(p)) / scale),
          static_cast<double>(to_long_double(ctx.g.at(p)) / scale)};
}

struct TwistScan {
  std::uint64_t x = 0;
  std::uint64_t primes = 0;
  std::uint64_t matches = 0;  // a_f(p)^2 == a_g(p)^2
  double fraction = 0.0;
  bool insufficient_data = false;
  bool likely_twist_equivalent = false;
};

inline constexpr double kTwistFlagThreshold = 0.95;

// Heuristic: twist-equivalent pairs have |a_f(p)| = |a_g(p)| at every good p.
inline TwistScan twist_equivalence_scan(const PairContext& ctx, std::uint64_t x) {
  TwistScan r;
  r.x = x;
  for (const auto& ps : good_prime_sums(ctx, x)) {
    ++r.primes;
    if (uabs(ps.af) == uabs(ps.ag)) ++r.matches;
  }
  if (r.primes == 0) {
    r.insufficient_data = true;
    return r;
  }
  r.fraction = static_cast<double>(r.matches) / static_cast<double>(r.primes);
  r.likely_twist_equivalent = r.fraction > kTwistFlagThreshold;
  return r;
}

// Built-in forms. The two curves are the default pair; Delta is weight 12.
inline NewformSpec fixture_37a() { return {"37a", 2, 37, ec::Weierstrass{0, 0, 1, -1, 0}, true}; }
inline NewformSpec fixture_389a() { return {"389a", 2, 389, ec::Weierstrass{0, 1, 1, -2, 0}, true}; }
inline NewformSpec fixture_11a() { return {"11a", 2, 11, ec::Weierstrass{0, -1, 1, -10, -20}, true}; }
inline NewformSpec fixture_delta() { return {"delta", 12, 1, DeltaQexp{}, true}; }

inline std::optional<NewformSpec> builtin_form(std::string_view label) {
  if (label == "37a") return fixture_37a();
  if (label == "389a") return fixture_389a();
  if (label == "11a") return fixture_11a();
  if (label == "delta") return fixture_delta();
  return std::nullopt;
}

}  // namespace nfsum::newforms
