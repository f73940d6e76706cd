#pragma once

// a_p = p + 1 - #E(F_p) for rational elliptic curves: exhaustive counting for
// small p and baby-step/giant-step order finding (curve plus quadratic twist)
// for large p.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <iterator>
#include <random>
#include <utility>
#include <vector>

#include "nfsum/error.hpp"
#include "nfsum/int128.hpp"

namespace nfsum::ec {

// Long Weierstrass model y^2 + a1 xy + a3 y = x^3 + a2 x^2 + a4 x + a6.
struct Weierstrass {
  std::int64_t a1 = 0, a2 = 0, a3 = 0, a4 = 0, a6 = 0;
  friend bool operator==(const Weierstrass&, const Weierstrass&) = default;
};

struct Invariants {
  i128 b2, b4, b6, b8, c4, c6, disc;
};

inline Invariants invariants(const Weierstrass& e) {
  const i128 a1 = e.a1, a2 = e.a2, a3 = e.a3, a4 = e.a4, a6 = e.a6;
  Invariants r{};
  r.b2 = a1 * a1 + 4 * a2;
  r.b4 = 2 * a4 + a1 * a3;
  r.b6 = a3 * a3 + 4 * a6;
  r.b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4;
  r.c4 = r.b2 * r.b2 - 24 * r.b4;
  r.c6 = -r.b2 * r.b2 * r.b2 + 36 * r.b2 * r.b4 - 216 * r.b6;
  r.disc = -r.b2 * r.b2 * r.b8 - 8 * r.b4 * r.b4 * r.b4 - 27 * r.b6 * r.b6 +
           9 * r.b2 * r.b4 * r.b6;
  return r;
}

inline bool has_good_reduction(const Weierstrass& e, std::uint64_t p) {
  const i128 d = invariants(e).disc;
  return d % static_cast<i128>(p) != 0;
}

// Arithmetic modulo a prime p < 2^32.
class Fp {
 public:
  explicit Fp(std::uint64_t p) : p_(p) {}

  std::uint64_t p() const noexcept { return p_; }
  std::uint64_t reduce(i128 v) const {
    const i128 r = v % static_cast<i128>(p_);
    return static_cast<std::uint64_t>(r < 0 ? r + p_ : r);
  }
  std::uint64_t add(std::uint64_t a, std::uint64_t b) const {
    const std::uint64_t s = a + b;
    return s >= p_ ? s - p_ : s;
  }
  std::uint64_t sub(std::uint64_t a, std::uint64_t b) const {
    return a >= b ? a - b : a + p_ - b;
  }
  std::uint64_t mul(std::uint64_t a, std::uint64_t b) const { return a * b % p_; }
  std::uint64_t pow(std::uint64_t b, std::uint64_t e) const {
    std::uint64_t r = 1 % p_;
    while (e != 0) {
      if (e & 1) r = mul(r, b);
      b = mul(b, b);
      e >>= 1;
    }
    return r;
  }
  std::uint64_t inv(std::uint64_t a) const {
    std::int64_t t = 0, new_t = 1;
    std::int64_t r = static_cast<std::int64_t>(p_), new_r = static_cast<std::int64_t>(a);
    while (new_r != 0) {
      const std::int64_t q = r / new_r;
      t = std::exchange(new_t, t - q * new_t);
      r = std::exchange(new_r, r - q * new_r);
    }
    return static_cast<std::uint64_t>(t < 0 ? t + static_cast<std::int64_t>(p_) : t);
  }
  int legendre(std::uint64_t a) const {
    if (a % p_ == 0) return 0;
    return pow(a, (p_ - 1) / 2) == 1 ? 1 : -1;
  }
  // Tonelli-Shanks; `a` must be a nonzero square.
  std::uint64_t sqrt(std::uint64_t a) const {
    if (p_ % 4 == 3) return pow(a, (p_ + 1) / 4);
    std::uint64_t q = p_ - 1;
    int s = 0;
    while ((q & 1) == 0) {
      q >>= 1;
      ++s;
    }
    std::uint64_t z = 2;
    while (legendre(z) != -1) ++z;
    std::uint64_t m = static_cast<std::uint64_t>(s);
    std::uint64_t c = pow(z, q), t = pow(a, q), r = pow(a, (q + 1) / 2);
    while (t != 1) {
      std::uint64_t i = 0, t2 = t;
      while (t2 != 1) {
        t2 = mul(t2, t2);
        ++i;
      }
      std::uint64_t b = c;
      for (std::uint64_t j = 0; j + i + 1 < m; ++j) b = mul(b, b);
      m = i;
      c = mul(b, b);
      t = mul(t, c);
      r = mul(r, b);
    }
    return r;
  }

 private:
  std::uint64_t p_;
};

// Quadratic character table of F_p, O(p) memory.
inline std::vector<std::int8_t> character_table(std::uint64_t p) {
  std::vector<std::int8_t> chi(p, -1);
  chi[0] = 0;
  for (std::uint64_t y = 1; y <= p / 2; ++y) chi[y * y % p] = 1;
  return chi;
}

// Number of projective points on the reduction of `e` mod p, singular point
// included. Exhaustive: a double loop at p = 2, otherwise one quadratic
// character evaluation per x after completing the square.
inline std::uint64_t count_points(const Weierstrass& e, std::uint64_t p) {
  const Fp f(p);
  if (p == 2) {
    std::uint64_t n = 1;
    for (std::int64_t x = 0; x < 2; ++x) {
      for (std::int64_t y = 0; y < 2; ++y) {
        const i128 lhs = i128(y) * y + i128(e.a1) * x * y + i128(e.a3) * y;
        const i128 rhs = i128(x) * x * x + i128(e.a2) * x * x + i128(e.a4) * x + e.a6;
        if (f.reduce(lhs - rhs) == 0) ++n;
      }
    }
    return n;
  }
  const Invariants inv = invariants(e);
  const std::uint64_t b2 = f.reduce(inv.b2), b4 = f.reduce(2 * inv.b4),
                      b6 = f.reduce(inv.b6);
  const auto chi = character_table(p);
  std::uint64_t n = 1;
  for (std::uint64_t x = 0; x < p; ++x) {
    // (2y + a1 x + a3)^2 = 4x^3 + b2 x^2 + 2 b4 x + b6
    const std::uint64_t v =
        f.add(f.mul(f.add(f.mul(f.add(f.mul(4 % p, x), b2), x), b4), x), b6);
    n += static_cast<std::uint64_t>(1 + chi[v]);
  }
  return n;
}

// Exhaustive a_p at a good prime.
inline std::int64_t ap_naive(const Weierstrass& e, std::uint64_t p) {
  if (!has_good_reduction(e, p)) throw BadReductionError(p);
  return static_cast<std::int64_t>(p + 1) -
         static_cast<std::int64_t>(count_points(e, p));
}

// p + 1 - #E~(F_p) at any prime; at bad primes of a minimal model this is the
// newform coefficient (+-1 multiplicative, 0 additive).
inline std::int64_t ap_any_prime(const Weierstrass& e, std::uint64_t p) {
  return static_cast<std::int64_t>(p + 1) -
         static_cast<std::int64_t>(count_points(e, p));
}

struct BsgsStats {
  std::uint64_t points_used = 0;
  bool fell_back = false;
};

namespace detail {

struct Point {
  std::uint64_t x = 0, y = 0;
  bool inf = true;
};

// Short model y^2 = x^3 + a x + b over F_p.
class ShortCurve {
 public:
  ShortCurve(const Fp& f, std::uint64_t a, std::uint64_t b) : f_(f), a_(a), b_(b) {}

  std::uint64_t rhs(std::uint64_t x) const {
    return f_.add(f_.mul(f_.add(f_.mul(x, x), a_), x), b_);
  }

  Point neg(const Point& P) const {
    return P.inf ? P : Point{P.x, f_.sub(0, P.y), false};
  }

  Point add(const Point& P, const Point& Q) const {
    if (P.inf) return Q;
    if (Q.inf) return P;
    std::uint64_t lambda;
    if (P.x == Q.x) {
      if (f_.add(P.y, Q.y) == 0) return Point{};
      lambda = f_.mul(f_.add(f_.mul(3, f_.mul(P.x, P.x)), a_), f_.inv(f_.add(P.y, P.y)));
    } else {
      lambda = f_.mul(f_.sub(Q.y, P.y), f_.inv(f_.sub(Q.x, P.x)));
    }
    const std::uint64_t x3 = f_.sub(f_.sub(f_.mul(lambda, lambda), P.x), Q.x);
    const std::uint64_t y3 = f_.sub(f_.mul(lambda, f_.sub(P.x, x3)), P.y);
    return Point{x3, y3, false};
  }

  Point mul(Point P, std::uint64_t k) const {
    Point r{};
    while (k != 0) {
      if (k & 1) r = add(r, P);
      P = add(P, P);
      k >>= 1;
    }
    return r;
  }

  std::uint64_t key(const Point& P) const {
    return P.inf ? ~std::uint64_t(0) : P.x * f_.p() + P.y;
  }

  // All t in [-bound, bound] with t*P == (p+1)*P, i.e. the traces compatible
  // with the order of P.
  std::vector<std::int64_t> compatible_traces(const Point& P, std::int64_t bound) const {
    const auto width = static_cast<std::uint64_t>(2 * bound + 1);
    const std::uint64_t m = static_cast<std::uint64_t>(isqrt(width)) + 1;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> baby;
    baby.reserve(m);
    Point jp{};
    for (std::uint64_t j = 0; j < m; ++j) {
      baby.emplace_back(key(jp), j);
      jp = add(jp, P);
    }
    std::sort(baby.begin(), baby.end());
    const Point step = neg(mul(P, m));
    Point giant = add(mul(P, f_.p() + 1), mul(P, static_cast<std::uint64_t>(bound)));
    std::vector<std::int64_t> out;
    for (std::uint64_t i = 0; i * m <= width; ++i) {
      const std::uint64_t k = key(giant);
      auto it = std::lower_bound(baby.begin(), baby.end(), std::make_pair(k, std::uint64_t(0)));
      for (; it != baby.end() && it->first == k; ++it) {
        const std::int64_t t = -bound + static_cast<std::int64_t>(i * m + it->second);
        if (t <= bound) out.push_back(t);
      }
      giant = add(giant, step);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  const Fp& f_;
  std::uint64_t a_, b_;
};

}  // namespace detail

inline constexpr int kMaxBsgsPoints = 48;

// Order finding on random points of E and of its quadratic twist until a
// single trace in the Hasse interval survives; falls back to exhaustive
// counting if the candidates never narrow to one.
inline std::int64_t ap_bsgs(const Weierstrass& e, std::uint64_t p,
                            BsgsStats* stats = nullptr, std::uint64_t seed = 0) {
  if (p < 5) throw Error(ErrorKind::kParameter, "BSGS backend needs p >= 5");
  if (!has_good_reduction(e, p)) throw BadReductionError(p);
  const Fp f(p);
  const Invariants inv = invariants(e);
  const std::uint64_t a = f.reduce(-27 * inv.c4);
  const std::uint64_t b = f.reduce(-54 * inv.c6);
  std::uint64_t d = 2;
  while (f.legendre(d) != -1) ++d;
  const std::uint64_t d2 = f.mul(d, d);
  const detail::ShortCurve curve(f, a, b);
  const detail::ShortCurve twist(f, f.mul(a, d2), f.mul(b, f.mul(d2, d)));
  const auto bound = static_cast<std::int64_t>(isqrt(u128(4) * p));

  std::mt19937_64 rng(seed ^ (p * 0x9e3779b97f4a7c15ULL));
  std::uniform_int_distribution<std::uint64_t> pick(0, p - 1);
  std::optional<std::vector<std::int64_t>> candidates;
  BsgsStats local;
  for (int attempt = 0; attempt < kMaxBsgsPoints; ++attempt) {
    const bool on_twist = (attempt % 2) == 1;
    const detail::ShortCurve& c = on_twist ? twist : curve;
    detail::Point P;
    for (;;) {
      const std::uint64_t x = pick(rng);
      const std::uint64_t r = c.rhs(x);
      if (f.legendre(r) == 1) {
        P = {x, f.sqrt(r), false};
        break;
      }
    }
    ++local.points_used;
    auto traces = c.compatible_traces(P, bound);
    if (on_twist) {
      for (auto& t : traces) t = -t;
      std::sort(traces.begin(), traces.end());
    }
    if (!candidates) {
      candidates = std::move(traces);
    } else {
      std::vector<std::int64_t> both;
      std::set_intersection(candidates->begin(), candidates->end(), traces.begin(),
                            traces.end(), std::back_inserter(both));
      candidates = std::move(both);
    }
    if (candidates->size() == 1) {
      if (stats) *stats = local;
      return candidates->front();
    }
  }
  local.fell_back = true;
  if (stats) *stats = local;
  return ap_naive(e, p);
}

inline constexpr std::uint64_t kNaiveCrossover = 10'000;

// a_p at a good prime: exhaustive below 1e4, BSGS above.
inline std::int64_t ap_from_curve(const Weierstrass& e, std::uint64_t p, std::uint64_t seed = 0) {
  if (!has_good_reduction(e, p)) throw BadReductionError(p);
  if (p < kNaiveCrossover) return ap_naive(e, p);
  return ap_bsgs(e, p, nullptr, seed);
}

}  // namespace nfsum::ec
