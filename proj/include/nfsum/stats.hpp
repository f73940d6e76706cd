#pragma once

// Empirical experiments on S_p = a_f(p) +- a_g(p) and the convolution
// a_f * a_g, with their model predictions and JSON/CSV reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "nfsum/arith.hpp"
#include "nfsum/error.hpp"
#include "nfsum/galois.hpp"
#include "nfsum/newforms.hpp"
#include "nfsum/parallel.hpp"

namespace nfsum::stats {

using json = nlohmann::ordered_json;
using newforms::PairContext;
using newforms::PrimeSum;

// Experiments need log log x > 1.
inline constexpr std::uint64_t kMinX = 16;

// ---------------------------------------------------------------------------
// Reports

enum class Status { kPass, kFail, kReportOnly, kInsufficientData };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::kPass: return "pass";
    case Status::kFail: return "fail";
    case Status::kReportOnly: return "report-only";
    case Status::kInsufficientData: return "insufficient-data";
  }
  return "?";
}

inline std::optional<Status> status_from_string(std::string_view s) {
  for (Status v : {Status::kPass, Status::kFail, Status::kReportOnly, Status::kInsufficientData}) {
    if (s == to_string(v)) return v;
  }
  return std::nullopt;
}

// One CSV row: a parameter point with its observed and (optional) model value.
struct SeriesRow {
  std::string point;
  double observed = 0;
  std::optional<double> predicted;

  friend bool operator==(const SeriesRow&, const SeriesRow&) = default;
};

struct DensityReport {
  std::string experiment;
  json params = json::object();
  json observed = json::object();
  json predicted = nullptr;  // null when there is no model
  json bands = nullptr;      // null when no band applies
  Status status = Status::kReportOnly;
  std::optional<double> runtime_ms;
  std::vector<SeriesRow> series;  // stored under observed.series
};

inline json to_json(const DensityReport& r) {
  json observed = r.observed;
  json series = json::array();
  for (const auto& row : r.series) {
    series.push_back(json::array(
        {row.point, row.observed, row.predicted ? json(*row.predicted) : json(nullptr)}));
  }
  observed["series"] = std::move(series);
  json out;
  out["experiment"] = r.experiment;
  out["params"] = r.params;
  out["observed"] = std::move(observed);
  out["predicted"] = r.predicted;
  out["bands"] = r.bands;
  out["status"] = to_string(r.status);
  out["runtime_ms"] = r.runtime_ms ? json(*r.runtime_ms) : json(nullptr);
  return out;
}

inline std::string to_json_text(const DensityReport& r) { return to_json(r).dump(2) + "\n"; }

inline DensityReport report_from_json(const json& j) {
  auto fail = [](const std::string& what) -> DensityReport {
    throw ParseError(0, "report: " + what);
  };
  static constexpr const char* kFields[] = {"experiment", "params", "observed", "predicted",
                                            "bands",      "status", "runtime_ms"};
  if (!j.is_object()) return fail("top level must be an object");
  if (j.size() != std::size(kFields)) return fail("expected exactly 7 top-level fields");
  std::size_t i = 0;
  for (const auto& [key, value] : j.items()) {
    if (key != kFields[i++]) return fail("field order/name mismatch at '" + key + "'");
  }
  DensityReport r;
  if (!j["experiment"].is_string()) return fail("experiment must be a string");
  r.experiment = j["experiment"].get<std::string>();
  if (!j["params"].is_object()) return fail("params must be an object");
  r.params = j["params"];
  if (!j["observed"].is_object() || !j["observed"].contains("series") ||
      !j["observed"]["series"].is_array()) {
    return fail("observed must be an object with a series array");
  }
  r.observed = j["observed"];
  for (const auto& row : r.observed["series"]) {
    if (!row.is_array() || row.size() != 3 || !row[0].is_string() || !row[1].is_number() ||
        !(row[2].is_number() || row[2].is_null())) {
      return fail("malformed series row");
    }
    r.series.push_back({row[0].get<std::string>(), row[1].get<double>(),
                        row[2].is_null() ? std::nullopt
                                         : std::optional<double>(row[2].get<double>())});
  }
  r.observed.erase("series");
  r.predicted = j["predicted"];
  r.bands = j["bands"];
  if (!j["status"].is_string()) return fail("status must be a string");
  const auto st = status_from_string(j["status"].get<std::string>());
  if (!st) return fail("unknown status");
  r.status = *st;
  if (j["runtime_ms"].is_number()) {
    r.runtime_ms = j["runtime_ms"].get<double>();
  } else if (!j["runtime_ms"].is_null()) {
    return fail("runtime_ms must be a number or null");
  }
  return r;
}

inline DensityReport parse_report(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("report: ") + e.what());
  }
  return report_from_json(j);
}

inline std::string to_csv(const DensityReport& r) {
  std::string out = "point,observed,predicted\n";
  for (const auto& row : r.series) {
    out += row.point + "," + json(row.observed).dump() + "," +
           (row.predicted ? json(*row.predicted).dump() : std::string()) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binomial bands

inline double binomial_sigma(double p, std::uint64_t n) {
  if (n == 0) return std::numeric_limits<double>::infinity();
  return std::sqrt(std::max(0.0, p * (1 - p)) / static_cast<double>(n));
}

inline bool within_band(double observed, double p, std::uint64_t n, double sigmas) {
  return std::abs(observed - p) <= sigmas * binomial_sigma(p, n) + 1e-12;
}

// ---------------------------------------------------------------------------
// Quadrature and the Sato-Tate law

class GaussLegendre {
 public:
  explicit GaussLegendre(int n) : nodes_(n), weights_(n) {
    for (int i = 0; i < n; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes_[i] = x;
      weights_[i] = 2 / ((1 - x * x) * dp * dp);
    }
  }

  // Composite rule over `panels` equal panels of [a, b].
  template <typename Fn>
  double integrate(Fn&& f, double a, double b, int panels = 1) const {
    CompensatedSum total;
    const double h = (b - a) / panels;
    for (int j = 0; j < panels; ++j) {
      const double lo = a + j * h, mid = lo + h / 2;
      for (std::size_t i = 0; i < nodes_.size(); ++i) {
        total.add(weights_[i] * f(mid + h / 2 * nodes_[i]) * h / 2);
      }
    }
    return total.value();
  }

 private:
  std::vector<double> nodes_, weights_;
};

// Semicircle density (1/pi) sqrt(1 - t^2/4) on [-2, 2].
inline double st_density(double t) {
  if (t <= -2 || t >= 2) return 0;
  return std::sqrt(1 - t * t / 4) / std::numbers::pi;
}

inline double st_cdf(double t) {
  if (t <= -2) return 0;
  if (t >= 2) return 1;
  return 0.5 + t * std::sqrt(4 - t * t) / (4 * std::numbers::pi) +
         std::asin(t / 2) / std::numbers::pi;
}

inline double st_interval_mass(double a, double b) { return st_cdf(b) - st_cdf(a); }

// nu_ST(|s + t| > c) for the product law.
inline double tail_model_mass(double c) {
  if (c <= 0) return 1;
  if (c >= 4) return 0;
  static const GaussLegendre gl(32);
  // s = 2 sin(theta); weight (2/pi) cos^2(theta); kinks at s = c - 2, 2 - c.
  auto integrand = [c](double theta) {
    const double s = 2 * std::sin(theta), w = std::cos(theta);
    return (2 / std::numbers::pi) * w * w * (1 - st_cdf(c - s) + st_cdf(-c - s));
  };
  std::vector<double> cuts = {-std::numbers::pi / 2, std::asin((c - 2) / 2),
                              std::asin((2 - c) / 2), std::numbers::pi / 2};
  std::sort(cuts.begin(), cuts.end());
  CompensatedSum total;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) total.add(gl.integrate(integrand, cuts[i], cuts[i + 1], 16));
  }
  return std::clamp(total.value(), 0.0, 1.0);
}

struct SatoTateGrid {
  std::vector<double> cuts;                 // per-axis breakpoints, -2 ... 2
  std::vector<double> cell_mass;            // row-major, s index first
  std::vector<std::uint64_t> cell_count;    // same layout

  std::size_t cells_per_axis() const { return cuts.size() - 1; }
  double mass(std::size_t i, std::size_t j) const { return cell_mass[i * cells_per_axis() + j]; }
  std::uint64_t count(std::size_t i, std::size_t j) const {
    return cell_count[i * cells_per_axis() + j];
  }
  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : cell_count) n += c;
    return n;
  }
};

inline void validate_cuts(const std::vector<double>& cuts) {
  if (cuts.size() < 2 || cuts.front() != -2.0 || cuts.back() != 2.0) {
    throw Error(ErrorKind::kParameter, "grid cuts must start at -2 and end at 2");
  }
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    if (!(cuts[i] > cuts[i - 1])) throw Error(ErrorKind::kParameter, "grid cuts must increase");
  }
}

inline std::vector<double> uniform_cuts(int cells) {
  if (cells < 1) throw Error(ErrorKind::kParameter, "grid needs at least one cell per axis");
  std::vector<double> cuts(cells + 1);
  for (int i = 0; i <= cells; ++i) cuts[i] = -2.0 + 4.0 * i / cells;
  cuts.back() = 2.0;
  return cuts;
}

inline std::size_t cell_index(const std::vector<double>& cuts, double v) {
  const auto it = std::upper_bound(cuts.begin(), cuts.end(), v);
  const auto i = static_cast<std::ptrdiff_t>(it - cuts.begin()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
      i, 0, static_cast<std::ptrdiff_t>(cuts.size()) - 2));
}

// ---------------------------------------------------------------------------
// Shared helpers

inline void require_coverage(const PairContext& ctx, std::uint64_t x) {
  if (x > ctx.nmax()) {
    throw Error(ErrorKind::kCoverage, "tables end at " + std::to_string(ctx.nmax()) +
                                          ", requested x=" + std::to_string(x));
  }
}

inline json pair_params(const PairContext& ctx, std::uint64_t x) {
  json p;
  p["f"] = ctx.f.spec().label;
  p["g"] = ctx.g.spec().label;
  p["weight"] = ctx.weight();
  p["level"] = ctx.level;
  p["sign"] = newforms::to_string(ctx.sign);
  p["x"] = x;
  return p;
}

inline double ratio(std::uint64_t a, std::uint64_t b) {
  return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
}

// Decades 10^j <= x with 10^j >= lo, followed by x itself.
inline std::vector<std::uint64_t> decade_points(std::uint64_t lo, std::uint64_t x) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t d = 10; d <= x && d <= std::numeric_limits<std::uint64_t>::max() / 10;
       d *= 10) {
    if (d >= lo && d < x) out.push_back(d);
  }
  out.push_back(x);
  return out;
}

inline bool divides(std::uint64_t h, i128 v) {
  return static_cast<u128>(uabs(v) % h) == 0;
}

inline u128 i128_mod(i128 v, std::uint64_t h) { return uabs(v) % h; }

// ---------------------------------------------------------------------------
// Divisibility counts

inline std::uint64_t count_divisible(std::span<const PrimeSum> sums, std::uint64_t x,
                                     std::uint64_t h, bool nonzero_only) {
  if (h == 0) throw Error(ErrorKind::kParameter, "h must be >= 1");
  std::uint64_t n = 0;
  for (const auto& ps : sums) {
    if (ps.p > x) break;
    if (std::gcd(ps.p, h) != 1) continue;
    if (nonzero_only && ps.s == 0) continue;
    if (divides(h, ps.s)) ++n;
  }
  return n;
}

inline std::uint64_t good_primes_coprime_to(std::span<const PrimeSum> sums, std::uint64_t x,
                                            std::uint64_t h) {
  std::uint64_t n = 0;
  for (const auto& ps : sums) {
    if (ps.p > x) break;
    if (std::gcd(ps.p, h) == 1) ++n;
  }
  return n;
}

// #{p <= x : (p, hN) = 1, h | S_p}.
inline std::uint64_t pi_fg(const PairContext& ctx, std::uint64_t x, std::uint64_t h) {
  const auto sums = newforms::good_prime_sums(ctx, x);
  return count_divisible(sums, x, h, false);
}

// As pi_fg with S_p != 0.
inline std::uint64_t pi_fg_star(const PairContext& ctx, std::uint64_t x, std::uint64_t h) {
  const auto sums = newforms::good_prime_sums(ctx, x);
  return count_divisible(sums, x, h, true);
}

struct VanishingCount {
  std::uint64_t x = 0;
  std::uint64_t zero = 0;
  std::uint64_t primes = 0;  // good primes p <= x
  double ratio = 0;
};

inline VanishingCount vanishing_count(std::span<const PrimeSum> sums, std::uint64_t x) {
  VanishingCount v{x, 0, 0, 0};
  for (const auto& ps : sums) {
    if (ps.p > x) break;
    ++v.primes;
    if (ps.s == 0) ++v.zero;
  }
  v.ratio = ratio(v.zero, v.primes);
  return v;
}

inline VanishingCount vanishing_count(const PairContext& ctx, std::uint64_t x) {
  return vanishing_count(newforms::good_prime_sums(ctx, x), x);
}

inline DensityReport vanishing_report(const PairContext& ctx, std::uint64_t x) {
  require_coverage(ctx, x);
  DensityReport r;
  r.experiment = "vanishing";
  r.params = pair_params(ctx, x);
  const auto sums = newforms::good_prime_sums(ctx, x);
  const auto v = vanishing_count(sums, x);
  r.observed["zero"] = v.zero;
  r.observed["primes"] = v.primes;
  r.observed["ratio"] = v.ratio;
  for (std::uint64_t d : decade_points(10, x)) {
    r.series.push_back({"x=" + std::to_string(d), vanishing_count(sums, d).ratio, std::nullopt});
  }
  r.status = x < kMinX || v.primes == 0 ? Status::kInsufficientData : Status::kReportOnly;
  return r;
}

// ---------------------------------------------------------------------------
// Chebotarev frequencies

struct ChebotarevOptions {
  std::vector<std::uint64_t> exceptional;  // moduli whose image is known non-full
  bool override_exceptional = false;
  double sigmas = 3;
};

inline galois::Rational model_delta(std::uint64_t ell, int k) {
  if (ell == 1) return {1, 1};
  return galois::galois_counts(ell, k).delta();
}

inline DensityReport chebotarev_report(const PairContext& ctx, std::uint64_t x,
                                       const std::vector<std::uint64_t>& ells,
                                       const ChebotarevOptions& opt = {}) {
  require_coverage(ctx, x);
  if (ells.empty()) throw Error(ErrorKind::kParameter, "chebotarev needs at least one modulus");
  for (std::uint64_t ell : ells) {
    if (ell == 0) throw Error(ErrorKind::kParameter, "modulus must be >= 1");
    if (ell > 1 && std::gcd(ell, ctx.level) != 1) {
      throw Error(ErrorKind::kUnsupportedModulus,
                  "modulus " + std::to_string(ell) + " shares a factor with the level");
    }
    const bool exceptional =
        std::find(opt.exceptional.begin(), opt.exceptional.end(), ell) != opt.exceptional.end();
    if (exceptional && !opt.override_exceptional) {
      throw Error(ErrorKind::kParameter,
                  "modulus " + std::to_string(ell) +
                      " is marked exceptional (non-full image); pass --override-exceptional");
    }
  }
  const auto sums = newforms::good_prime_sums(ctx, x);
  DensityReport r;
  r.experiment = "chebotarev";
  r.params = pair_params(ctx, x);
  r.params["ell"] = ells;
  r.params["sigmas"] = opt.sigmas;
  r.params["override_exceptional"] = opt.override_exceptional;
  json obs = json::array(), pred = json::array(), bands = json::array();
  bool all_within = true, insufficient = x < kMinX;
  for (std::uint64_t ell : ells) {
    const auto delta = model_delta(ell, ctx.weight());
    const double d = static_cast<double>(delta.value());
    const std::uint64_t n = good_primes_coprime_to(sums, x, ell);
    const std::uint64_t hits = count_divisible(sums, x, ell, false);
    const double observed = ratio(hits, n);
    const double sigma = binomial_sigma(d, n);
    const bool within = n > 0 && within_band(observed, d, n, opt.sigmas);
    if (n == 0) insufficient = true;
    all_within = all_within && within;
    json o;
    o["ell"] = ell;
    o["primes"] = n;
    o["hits"] = hits;
    o["ratio"] = observed;
    o["deviation_sigma"] = sigma > 0 && std::isfinite(sigma) ? json((observed - d) / sigma)
                                                             : json(nullptr);
    obs.push_back(o);
    json p;
    p["ell"] = ell;
    p["delta_num"] = nfsum::to_string(delta.num);
    p["delta_den"] = nfsum::to_string(delta.den);
    p["delta"] = d;
    p["method"] = ell == 1 ? "unit" : galois::to_string(galois::galois_counts(ell, ctx.weight()).method);
    pred.push_back(p);
    json b;
    b["ell"] = ell;
    b["sigma"] = std::isfinite(sigma) ? json(sigma) : json(nullptr);
    b["lo"] = std::isfinite(sigma) ? json(d - opt.sigmas * sigma) : json(nullptr);
    b["hi"] = std::isfinite(sigma) ? json(d + opt.sigmas * sigma) : json(nullptr);
    b["within"] = within;
    bands.push_back(b);
    r.series.push_back({"ell=" + std::to_string(ell), observed, d});
  }
  r.observed["rows"] = std::move(obs);
  r.predicted = json::object({{"model", "full admissible image"}, {"rows", std::move(pred)}});
  r.bands = json::object({{"rows", std::move(bands)}});
  r.status = insufficient ? Status::kInsufficientData : all_within ? Status::kPass : Status::kFail;
  return r;
}

// ---------------------------------------------------------------------------
// Joint Sato-Tate

inline SatoTateGrid satotate_grid(const PairContext& ctx, std::uint64_t x,
                                  const std::vector<double>& cuts) {
  validate_cuts(cuts);
  require_coverage(ctx, x);
  SatoTateGrid g;
  g.cuts = cuts;
  const std::size_t m = cuts.size() - 1;
  g.cell_mass.resize(m * m);
  g.cell_count.assign(m * m, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      g.cell_mass[i * m + j] =
          st_interval_mass(cuts[i], cuts[i + 1]) * st_interval_mass(cuts[j], cuts[j + 1]);
  for (const auto& ps : newforms::good_prime_sums(ctx, x)) {
    const auto st = newforms::normalized_pair(ctx, ps.p);
    ++g.cell_count[cell_index(cuts, st.s) * m + cell_index(cuts, st.t)];
  }
  return g;
}

inline DensityReport satotate_report(const PairContext& ctx, std::uint64_t x,
                                     const std::vector<double>& cuts, double sigmas = 4) {
  const auto g = satotate_grid(ctx, x, cuts);
  const std::size_t m = g.cells_per_axis();
  const std::uint64_t n = g.total();
  DensityReport r;
  r.experiment = "satotate";
  r.params = pair_params(ctx, x);
  r.params["cuts"] = cuts;
  r.params["sigmas"] = sigmas;
  bool ok = n > 0 && x >= kMinX;
  json counts = json::array(), masses = json::array(), dev = json::array();
  for (std::size_t i = 0; i < m; ++i) {
    json crow = json::array(), mrow = json::array(), drow = json::array();
    for (std::size_t j = 0; j < m; ++j) {
      const double mass = g.mass(i, j), obs = ratio(g.count(i, j), n);
      const double sigma = binomial_sigma(mass, n);
      ok = ok && within_band(obs, mass, n, sigmas);
      crow.push_back(g.count(i, j));
      mrow.push_back(mass);
      drow.push_back(sigma > 0 && std::isfinite(sigma) ? json((obs - mass) / sigma)
                                                       : json(nullptr));
      r.series.push_back({"cell=" + std::to_string(i) + ":" + std::to_string(j), obs, mass});
    }
    counts.push_back(crow);
    masses.push_back(mrow);
    dev.push_back(drow);
  }
  // Quadrants split at 0 on each axis; a value of exactly 0 goes up.
  std::uint64_t quad[4] = {0, 0, 0, 0};
  for (const auto& ps : newforms::good_prime_sums(ctx, x)) {
    const auto st = newforms::normalized_pair(ctx, ps.p);
    ++quad[(st.s >= 0 ? 2 : 0) + (st.t >= 0 ? 1 : 0)];
  }
  json qobs = json::array();
  for (auto q : quad) {
    qobs.push_back(ratio(q, n));
    ok = ok && within_band(ratio(q, n), 0.25, n, sigmas);
  }
  r.observed["primes"] = n;
  r.observed["cell_count"] = std::move(counts);
  r.observed["quadrant_ratio"] = std::move(qobs);
  r.predicted = json::object({{"model", "product semicircle"},
                              {"cell_mass", std::move(masses)},
                              {"quadrant_mass", 0.25}});
  r.bands = json::object({{"sigmas", sigmas}, {"deviation_sigma", std::move(dev)}});
  r.status = (n == 0 || x < kMinX) ? Status::kInsufficientData : ok ? Status::kPass : Status::kFail;
  return r;
}

// ---------------------------------------------------------------------------
// Tail density T_M

struct TailCount {
  std::uint64_t primes = 0;
  std::uint64_t hits = 0;
};

// |S_p| >= p^((k-1)/2) / M, compared as M^2 S_p^2 >= p^(k-1).
inline bool in_tail(i128 s, std::uint64_t p, int k, double M) {
  const long double lhs = static_cast<long double>(M) * to_long_double(uabs(s));
  return lhs * lhs >= std::pow(static_cast<long double>(p), k - 1);
}

inline TailCount tail_count(std::span<const PrimeSum> sums, std::uint64_t x, int k, double M) {
  TailCount t;
  for (const auto& ps : sums) {
    if (ps.p > x) break;
    ++t.primes;
    if (in_tail(ps.s, ps.p, k, M)) ++t.hits;
  }
  return t;
}

inline DensityReport tail_density_report(const PairContext& ctx, std::uint64_t x, double M,
                                         double sigmas = 3) {
  if (!(M > 0.25)) throw Error(ErrorKind::kParameter, "M must exceed 1/4");
  require_coverage(ctx, x);
  const auto sums = newforms::good_prime_sums(ctx, x);
  const auto t = tail_count(sums, x, ctx.weight(), M);
  const double model = tail_model_mass(1.0 / M);
  const double obs = ratio(t.hits, t.primes);
  DensityReport r;
  r.experiment = "tails";
  r.params = pair_params(ctx, x);
  r.params["M"] = M;
  r.params["sigmas"] = sigmas;
  r.observed["primes"] = t.primes;
  r.observed["hits"] = t.hits;
  r.observed["ratio"] = obs;
  r.predicted = json::object({{"model", "product semicircle, |s+t| > 1/M"}, {"mass", model}});
  const double sigma = binomial_sigma(model, t.primes);
  const bool within = t.primes > 0 && within_band(obs, model, t.primes, sigmas);
  r.bands = json::object({{"sigma", std::isfinite(sigma) ? json(sigma) : json(nullptr)},
                          {"within", within}});
  for (std::uint64_t d : decade_points(100, x)) {
    const auto td = tail_count(sums, d, ctx.weight(), M);
    r.series.push_back({"x=" + std::to_string(d), ratio(td.hits, td.primes), model});
  }
  r.status = (t.primes == 0 || x < kMinX) ? Status::kInsufficientData
             : within                      ? Status::kPass
                                           : Status::kFail;
  return r;
}

// ---------------------------------------------------------------------------
// Normal order

// Number of distinct primes q <= u dividing v (v != 0).
inline int omega_small(i128 v, long double u, const arith::PrimeTable& small) {
  const u128 a = uabs(v);
  int n = 0;
  for (std::uint32_t q : small.primes()) {
    if (q > u) break;
    if (a % q == 0) ++n;
  }
  return n;
}

struct MomentResult {
  Status status = Status::kInsufficientData;
  std::optional<double> moment;
  std::uint64_t qualifying = 0;  // primes with S_p != 0
  std::uint64_t primes = 0;      // good primes, the pi(x) normalizer
  double loglog = 0;             // log log u, or log log x for the log p variant
  std::string note;
};

inline constexpr double kMaxEta = 1.0 / 14.0;

inline void check_eta(double eta) {
  if (!(eta > 0 && eta < kMaxEta)) {
    throw Error(ErrorKind::kParameter, "eta must lie in (0, 1/14)");
  }
}

// sum over nonzero values of (omega_u(v) - log log u)^2 / (primes log log u).
inline MomentResult normal_order_moment_values(std::span<const i128> values,
                                               std::uint64_t primes, long double u) {
  MomentResult r;
  r.primes = primes;
  const long double lu = std::log(u);
  if (!(lu > 1)) {
    r.loglog = lu > 0 ? static_cast<double>(std::log(lu)) : -std::numeric_limits<double>::infinity();
    r.note = "log log u <= 0";
    return r;
  }
  const long double ll = std::log(lu);
  r.loglog = static_cast<double>(ll);
  const auto small = arith::primes_up_to(std::max<std::uint64_t>(2, static_cast<std::uint64_t>(u)));
  CompensatedSum sum;
  for (i128 v : values) {
    if (v == 0) continue;
    ++r.qualifying;
    const double d = static_cast<double>(omega_small(v, u, small) - ll);
    sum.add(d * d);
  }
  if (r.qualifying == 0 || primes == 0) {
    r.note = "no qualifying primes";
    return r;
  }
  r.moment = sum.value() / (static_cast<double>(primes) * static_cast<double>(ll));
  r.status = Status::kReportOnly;
  return r;
}

inline MomentResult normal_order_moment(std::span<const PrimeSum> sums, std::uint64_t x,
                                        double eta) {
  check_eta(eta);
  std::vector<i128> values;
  std::uint64_t primes = 0;
  for (const auto& ps : sums) {
    if (ps.p > x) break;
    ++primes;
    values.push_back(ps.s);
  }
  if (x < kMinX) {
    MomentResult r;
    r.primes = primes;
    r.note = "x < 16";
    return r;
  }
  return normal_order_moment_values(values, primes,
                                    std::pow(static_cast<long double>(x), eta));
}

inline MomentResult normal_order_moment(const PairContext& ctx, std::uint64_t x, double eta) {
  check_eta(eta);
  require_coverage(ctx, x);
  return normal_order_moment(newforms::good_prime_sums(ctx, x), x, eta);
}

// sum over S_p != 0 of (omega(S_p) - log log p)^2 / (pi(x) log log x).
inline MomentResult normal_order_moment_logp(std::span<const PrimeSum> sums, std::uint64_t x,
                                             unsigned threads = 1) {
  MomentResult r;
  std::vector<const PrimeSum*> nonzero;
  for (const auto& ps : sums) {
    if (ps.p > x) break;
    ++r.primes;
    if (ps.s != 0) nonzero.push_back(&ps);
  }
  r.qualifying = nonzero.size();
  if (x < kMinX) {
    r.note = "x < 16";
    return r;
  }
  const long double llx = std::log(std::log(static_cast<long double>(x)));
  r.loglog = static_cast<double>(llx);
  if (nonzero.empty()) {
    r.note = "no qualifying primes";
    return r;
  }
  const auto omegas = parallel_map<int>(nonzero.size(), threads, [&](std::size_t i) {
    return arith::omega(nonzero[i]->s);
  });
  CompensatedSum sum;
  for (std::size_t i = 0; i < nonzero.size(); ++i) {
    const long double llp = std::log(std::log(static_cast<long double>(nonzero[i]->p)));
    const double d = static_cast<double>(omegas[i] - llp);
    sum.add(d * d);
  }
  r.moment = sum.value() / (static_cast<double>(r.primes) * static_cast<double>(llx));
  r.status = Status::kReportOnly;
  return r;
}

inline MomentResult normal_order_moment_logp(const PairContext& ctx, std::uint64_t x,
                                             unsigned threads = 1) {
  require_coverage(ctx, x);
  return normal_order_moment_logp(newforms::good_prime_sums(ctx, x), x, threads);
}

inline json moment_json(const MomentResult& m) {
  json j;
  j["status"] = to_string(m.status);
  j["moment"] = m.moment ? json(*m.moment) : json(nullptr);
  j["qualifying"] = m.qualifying;
  j["primes"] = m.primes;
  j["loglog"] = std::isfinite(m.loglog) ? json(m.loglog) : json(nullptr);
  if (!m.note.empty()) j["note"] = m.note;
  return j;
}

inline DensityReport normal_order_report(const PairContext& ctx, std::uint64_t x, double eta,
                                         unsigned threads = 1) {
  check_eta(eta);
  require_coverage(ctx, x);
  const auto sums = newforms::good_prime_sums(ctx, x);
  DensityReport r;
  r.experiment = "normal-order";
  r.params = pair_params(ctx, x);
  r.params["eta"] = eta;
  const auto thm = normal_order_moment(sums, x, eta);
  const auto cor = normal_order_moment_logp(sums, x, threads);
  r.observed["omega_u"] = moment_json(thm);
  r.observed["omega_logp"] = moment_json(cor);
  for (std::uint64_t d : decade_points(100, x)) {
    const auto a = normal_order_moment(sums, d, eta);
    const auto b = normal_order_moment_logp(sums, d, threads);
    if (a.moment) r.series.push_back({"omega_u,x=" + std::to_string(d), *a.moment, std::nullopt});
    if (b.moment) {
      r.series.push_back({"omega_logp,x=" + std::to_string(d), *b.moment, std::nullopt});
    }
  }
  r.status = (thm.moment || cor.moment) ? Status::kReportOnly : Status::kInsufficientData;
  return r;
}

// ---------------------------------------------------------------------------
// Largest prime factor threshold

// (log v)^(1/14) (log log v)^(3/7 - eps); 0 where log log v <= 0.
inline long double lpf_threshold(long double v, double eps) {
  if (!(v > std::numbers::e_v<long double>)) return 0;
  const long double lv = std::log(v);
  return std::pow(lv, 1.0L / 14) * std::pow(std::log(lv), 3.0L / 7 - eps);
}

inline bool passes_threshold(i128 v, long double at, double eps) {
  if (v == 0) return false;
  const auto P = arith::largest_prime_factor(v);
  return P && to_long_double(*P) > lpf_threshold(at, eps);
}

struct LpfResult {
  std::uint64_t x = 0;
  std::uint64_t primes = 0;
  std::uint64_t zero = 0;
  std::uint64_t unit = 0;     // |S_p| = 1
  std::uint64_t passing = 0;
  double fraction = 0;        // passing / primes
  double exceptional = 0;     // 1 - fraction
};

inline void check_epsilon(double eps) {
  if (!(eps > 0) || !std::isfinite(eps)) throw Error(ErrorKind::kParameter, "epsilon must be > 0");
}

namespace detail {

// Per-prime pass flags, shared by the decade series.
inline std::vector<char> lpf_flags(std::span<const PrimeSum> sums, double eps, unsigned threads) {
  return parallel_map<char>(sums.size(), threads, [&](std::size_t i) -> char {
    return passes_threshold(sums[i].s, static_cast<long double>(sums[i].p), eps) ? 1 : 0;
  });
}

inline LpfResult lpf_tally(std::span<const PrimeSum> sums, const std::vector<char>& flags,
                           std::uint64_t x) {
  LpfResult r;
  r.x = x;
  for (std::size_t i = 0; i < sums.size() && sums[i].p <= x; ++i) {
    ++r.primes;
    if (sums[i].s == 0) ++r.zero;
    if (uabs(sums[i].s) == 1) ++r.unit;
    if (flags[i]) ++r.passing;
  }
  r.fraction = ratio(r.passing, r.primes);
  r.exceptional = r.primes ? 1 - r.fraction : 0;
  return r;
}

}  // namespace detail

inline LpfResult lpf_threshold_density(const PairContext& ctx, std::uint64_t x, double eps,
                                       unsigned threads = 1) {
  check_epsilon(eps);
  require_coverage(ctx, x);
  const auto sums = newforms::good_prime_sums(ctx, x);
  return detail::lpf_tally(sums, detail::lpf_flags(sums, eps, threads), x);
}

inline DensityReport lpf_report(const PairContext& ctx, std::uint64_t x, double eps,
                                unsigned threads = 1) {
  check_epsilon(eps);
  require_coverage(ctx, x);
  const auto sums = newforms::good_prime_sums(ctx, x);
  const auto flags = detail::lpf_flags(sums, eps, threads);
  const auto res = detail::lpf_tally(sums, flags, x);
  DensityReport r;
  r.experiment = "lpf";
  r.params = pair_params(ctx, x);
  r.params["epsilon"] = eps;
  r.observed["primes"] = res.primes;
  r.observed["zero"] = res.zero;
  r.observed["unit"] = res.unit;
  r.observed["passing"] = res.passing;
  r.observed["fraction"] = res.fraction;
  r.observed["exceptional_ratio"] = res.exceptional;
  r.observed["threshold_at_x"] = static_cast<double>(lpf_threshold(x, eps));
  for (std::uint64_t d : decade_points(100, x)) {
    r.series.push_back({"x=" + std::to_string(d), detail::lpf_tally(sums, flags, d).fraction,
                        std::nullopt});
  }
  r.status = (res.primes == 0 || x < kMinX) ? Status::kInsufficientData : Status::kReportOnly;
  return r;
}

// ---------------------------------------------------------------------------
// GRH-conditional growth (report only)

// log p / e^(3 (log log p)^(1/2 + eps)), for p >= 3.
inline long double grh_lpf_bound(long double p, double eps) {
  const long double ll = std::log(std::log(p));
  return std::log(p) / std::exp(3 * std::pow(ll, 0.5L + eps));
}

inline long double grh_size_bound(long double p, double eps) {
  return std::pow(std::log(std::log(p)), 0.5L + eps) * grh_lpf_bound(p, eps);
}

struct GrhResult {
  std::uint64_t primes = 0;  // good p in [3, x] with S_p != 0
  std::uint64_t lpf_ok = 0;
  std::uint64_t size_ok = 0;
  std::optional<std::uint64_t> crossover;
};

inline DensityReport grh_growth_report(const PairContext& ctx, std::uint64_t x, double eps,
                                       unsigned threads = 1) {
  check_epsilon(eps);
  require_coverage(ctx, x);
  std::vector<PrimeSum> used;
  for (const auto& ps : newforms::good_prime_sums(ctx, x)) {
    if (ps.p >= 3 && ps.s != 0) used.push_back(ps);
  }
  const auto lpf = parallel_map<double>(used.size(), threads, [&](std::size_t i) {
    const auto P = arith::largest_prime_factor(used[i].s);
    return P ? static_cast<double>(std::log(to_long_double(*P))) : 0.0;
  });
  GrhResult g;
  g.primes = used.size();
  for (std::size_t i = 0; i < used.size(); ++i) {
    const long double p = static_cast<long double>(used[i].p);
    if (lpf[i] > 0 && lpf[i] >= grh_lpf_bound(p, eps)) ++g.lpf_ok;
    if (std::log(to_long_double(uabs(used[i].s))) >= grh_size_bound(p, eps)) ++g.size_ok;
  }
  // Smallest prime from which the bound in (a) never exceeds the largest
  // possible log |S_p| = log(4 p^((k-1)/2)) up to x.
  if (x >= 3) {
    const auto table = arith::primes_up_to(x);
    const auto primes = table.primes();
    std::optional<std::uint64_t> cross;
    for (auto it = primes.rbegin(); it != primes.rend() && *it >= 3; ++it) {
      const long double p = *it;
      const long double cap = std::log(4.0L) + (ctx.weight() - 1) / 2.0L * std::log(p);
      if (grh_lpf_bound(p, eps) > cap) break;
      cross = *it;
    }
    g.crossover = cross;
  }
  DensityReport r;
  r.experiment = "grh";
  r.params = pair_params(ctx, x);
  r.params["epsilon"] = eps;
  r.observed["primes"] = g.primes;
  r.observed["lpf_bound_fraction"] = ratio(g.lpf_ok, g.primes);
  r.observed["size_bound_fraction"] = ratio(g.size_ok, g.primes);
  r.observed["crossover_p"] = g.crossover ? json(*g.crossover) : json(nullptr);
  r.series.push_back({"lpf_bound", ratio(g.lpf_ok, g.primes), std::nullopt});
  r.series.push_back({"size_bound", ratio(g.size_ok, g.primes), std::nullopt});
  r.status = Status::kReportOnly;
  return r;
}

// ---------------------------------------------------------------------------
// Convolution density over n

struct ConvolutionDensity {
  std::uint64_t X = 0;
  std::uint64_t zero = 0;
  std::uint64_t passing = 0;  // nonzero with P > threshold(n)
  std::uint64_t unit = 0;     // |(a_f * a_g)(n)| = 1
  double zero_fraction = 0;
  double passing_fraction = 0;
  double fraction = 0;        // in the set: zero or passing
};

namespace detail {

inline newforms::CoefficientTable all_n(const newforms::CoefficientTable& t, std::uint64_t X) {
  if (t.mode() == newforms::TableMode::kAll && t.nmax() >= X) return t;
  return newforms::extend_to_all_n(t, X);
}

inline ConvolutionDensity convolution_tally(const std::vector<char>& in_set,
                                            const newforms::ConvolutionTable& c, std::uint64_t X) {
  ConvolutionDensity d;
  d.X = X;
  for (std::uint64_t n = 1; n <= X; ++n) {
    const i128 v = c.at(n);
    if (v == 0) {
      ++d.zero;
    } else if (uabs(v) == 1) {
      ++d.unit;
    } else if (in_set[n]) {
      ++d.passing;
    }
  }
  d.zero_fraction = ratio(d.zero, X);
  d.passing_fraction = ratio(d.passing, X);
  d.fraction = ratio(d.zero + d.passing, X);
  return d;
}

}  // namespace detail

inline DensityReport convolution_report(const PairContext& ctx, std::uint64_t X, double eps,
                                        unsigned threads = 1) {
  check_epsilon(eps);
  if (X < 1) throw Error(ErrorKind::kEmptyDomain, "X must be >= 1");
  require_coverage(ctx, X);
  const auto f = detail::all_n(ctx.f, X), g = detail::all_n(ctx.g, X);
  const auto conv = newforms::dirichlet_convolution(f, g, X);
  const auto flags = parallel_map<char>(X + 1, threads, [&](std::size_t n) -> char {
    if (n == 0) return 0;
    const i128 v = conv.values[n];
    return v != 0 && passes_threshold(v, static_cast<long double>(n), eps) ? 1 : 0;
  });
  const auto d = detail::convolution_tally(flags, conv, X);
  DensityReport r;
  r.experiment = "convolution";
  r.params = pair_params(ctx, X);
  r.params.erase("x");
  r.params["X"] = X;
  r.params["epsilon"] = eps;
  r.observed["zero"] = d.zero;
  r.observed["passing"] = d.passing;
  r.observed["unit"] = d.unit;
  r.observed["zero_fraction"] = d.zero_fraction;
  r.observed["passing_fraction"] = d.passing_fraction;
  r.observed["fraction"] = d.fraction;
  for (std::uint64_t n : decade_points(10, X)) {
    r.series.push_back({"X=" + std::to_string(n), detail::convolution_tally(flags, conv, n).fraction,
                        std::nullopt});
  }
  r.status = X < kMinX ? Status::kInsufficientData : Status::kReportOnly;
  return r;
}

inline ConvolutionDensity convolution_density(const PairContext& ctx, std::uint64_t X, double eps,
                                              unsigned threads = 1) {
  const auto r = convolution_report(ctx, X, eps, threads);
  ConvolutionDensity d;
  d.X = X;
  d.zero = r.observed["zero"].get<std::uint64_t>();
  d.passing = r.observed["passing"].get<std::uint64_t>();
  d.unit = r.observed["unit"].get<std::uint64_t>();
  d.zero_fraction = r.observed["zero_fraction"].get<double>();
  d.passing_fraction = r.observed["passing_fraction"].get<double>();
  d.fraction = r.observed["fraction"].get<double>();
  return d;
}

// ---------------------------------------------------------------------------
// Sieve sets Q and T over n

enum class PrimePredicate { kAll, kTheoremThreshold };

inline const char* to_string(PrimePredicate p) {
  return p == PrimePredicate::kAll ? "all" : "theorem-threshold";
}

// in_p[p] = 1 when p is in the prime set, for p <= X.
inline std::vector<char> prime_set(PrimePredicate pred, std::uint64_t X, double eps,
                                   const PairContext* ctx = nullptr, unsigned threads = 1) {
  std::vector<char> in_p(X + 1, 0);
  if (X < 2) return in_p;
  if (pred == PrimePredicate::kAll) {
    const auto table = arith::primes_up_to(X);
    for (std::uint32_t p : table.primes()) in_p[p] = 1;
    return in_p;
  }
  if (ctx == nullptr) throw Error(ErrorKind::kParameter, "threshold predicate needs a form pair");
  require_coverage(*ctx, X);
  const auto sums = newforms::good_prime_sums(*ctx, X);
  const auto flags = detail::lpf_flags(sums, eps, threads);
  for (std::size_t i = 0; i < sums.size(); ++i) in_p[sums[i].p] = flags[i];
  return in_p;
}

struct SieveSetCounts {
  std::uint64_t X = 0;
  std::uint64_t q = 0;
  std::uint64_t t = 0;
  bool t_subset_q = true;
};

struct SieveSetResult {
  std::vector<SieveSetCounts> decades;  // cumulative counts at each decade point
};

// Membership for n <= X; n < 3 is outside both sets since log log n <= 0.
inline SieveSetResult sieve_set_density(std::uint64_t X, double eps, const std::vector<char>& in_p) {
  check_epsilon(eps);
  if (X < 1 || in_p.size() < X + 1) throw Error(ErrorKind::kCoverage, "prime set must cover X");
  std::vector<std::uint32_t> spf(X + 1, 0);
  for (std::uint64_t i = 2; i <= X; ++i) {
    if (spf[i]) continue;
    for (std::uint64_t j = i; j <= X; j += i) {
      if (!spf[j]) spf[j] = static_cast<std::uint32_t>(i);
    }
  }
  const auto points = decade_points(10, X);
  SieveSetResult res;
  SieveSetCounts run;
  std::size_t next = 0;
  for (std::uint64_t n = 1; n <= X; ++n) {
    if (n >= 3) {
      const long double ln = std::log(static_cast<long double>(n));
      const long double bound = ln / std::pow(std::log(ln), static_cast<long double>(eps));
      bool q = false, t = false;
      std::uint64_t m = n;
      while (m > 1) {
        const std::uint32_t p = spf[m];
        int e = 0;
        while (m % p == 0) {
          m /= p;
          ++e;
        }
        if (in_p[p] && std::log(static_cast<long double>(p)) > bound) {
          q = true;
          if (e == 1) t = true;
        }
      }
      run.q += q;
      run.t += t;
      if (t && !q) run.t_subset_q = false;
    }
    while (next < points.size() && points[next] == n) {
      run.X = n;
      res.decades.push_back(run);
      ++next;
    }
  }
  return res;
}

inline DensityReport sieve_set_report(std::uint64_t X, double eps, PrimePredicate pred,
                                      const PairContext* ctx = nullptr, unsigned threads = 1) {
  check_epsilon(eps);
  const auto in_p = prime_set(pred, X, eps, ctx, threads);
  const auto res = sieve_set_density(X, eps, in_p);
  DensityReport r;
  r.experiment = "sieve-sets";
  r.params = ctx ? pair_params(*ctx, X) : json::object();
  r.params.erase("x");
  r.params["X"] = X;
  r.params["epsilon"] = eps;
  r.params["predicate"] = to_string(pred);
  const auto& last = res.decades.back();
  r.observed["q_count"] = last.q;
  r.observed["t_count"] = last.t;
  r.observed["q_density"] = ratio(last.q, X);
  r.observed["t_density"] = ratio(last.t, X);
  bool subset = true;
  for (const auto& d : res.decades) {
    subset = subset && d.t_subset_q && d.t <= d.q;
    r.series.push_back({"Q,X=" + std::to_string(d.X), ratio(d.q, d.X), std::nullopt});
    r.series.push_back({"T,X=" + std::to_string(d.X), ratio(d.t, d.X), std::nullopt});
  }
  r.observed["t_subset_q"] = subset;
  r.status = X < kMinX ? Status::kInsufficientData : Status::kReportOnly;
  return r;
}

// ---------------------------------------------------------------------------
// Twist-equivalence heuristic

inline DensityReport twist_scan_report(const PairContext& ctx, std::uint64_t x) {
  require_coverage(ctx, x);
  const auto scan = newforms::twist_equivalence_scan(ctx, x);
  DensityReport r;
  r.experiment = "twist-scan";
  r.params = pair_params(ctx, x);
  r.observed["primes"] = scan.primes;
  r.observed["matches"] = scan.matches;
  r.observed["fraction"] = scan.fraction;
  r.observed["likely_twist_equivalent"] = scan.likely_twist_equivalent;
  r.predicted = json::object({{"flag_threshold", newforms::kTwistFlagThreshold}});
  r.series.push_back({"x=" + std::to_string(x), scan.fraction, std::nullopt});
  r.status = scan.insufficient_data ? Status::kInsufficientData : Status::kReportOnly;
  return r;
}

}  // namespace nfsum::stats
