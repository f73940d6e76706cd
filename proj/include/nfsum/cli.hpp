#pragma once

// The `nfsum` command-line runner: cache lifecycle, experiment dispatch and
// report emission.

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nfsum/config.hpp"
#include "nfsum/galois.hpp"
#include "nfsum/newforms.hpp"
#include "nfsum/stats.hpp"

namespace nfsum::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Order used by `all`.
inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "delta", "chebotarev", "satotate",    "vanishing",  "tails",     "normal-order",
      "lpf",   "grh",        "convolution", "sieve-sets", "twist-scan"};
  return names;
}

// Exclusive lock on a cache directory, held for the life of the object. A
// lock left by a process that no longer exists is taken over.
class CacheLock {
 public:
  explicit CacheLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    for (int attempt = 0; attempt < 2; ++attempt) {
      const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
      if (fd >= 0) {
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        return;
      }
      if (errno != EEXIST) throw Error(ErrorKind::kIo, "cannot create " + path_.string());
      long owner = 0;
      std::ifstream(path_) >> owner;
      if (owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno == EPERM)) {
        throw Error(ErrorKind::kIo, "cache directory " + dir.string() +
                                        " is locked by running process " + std::to_string(owner));
      }
      fs::remove(path_);
    }
    throw Error(ErrorKind::kIo, "could not lock " + dir.string());
  }
  ~CacheLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  CacheLock(const CacheLock&) = delete;
  CacheLock& operator=(const CacheLock&) = delete;

 private:
  fs::path path_;
};

inline fs::path cache_path(const ExperimentConfig& c, const std::string& label) {
  return fs::path(c.cache_dir) / (label + ".coeffs");
}

inline void write_atomic(const fs::path& path, const std::string& bytes) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp);
    out << bytes;
    if (!out.flush()) throw Error(ErrorKind::kIo, "write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Largest n any experiment in the run reads from the tables.
inline std::uint64_t coverage_needed(const ExperimentConfig& c) { return std::max(c.x, c.X); }

// ---------------------------------------------------------------------------
// coeffs

inline std::string refresh_table(const ExperimentConfig& c, const std::string& label) {
  const auto path = cache_path(c, label);
  const std::uint64_t need = coverage_needed(c);
  const auto spec = newforms::builtin_form(label);
  if (!spec) {
    if (!fs::exists(path)) {
      throw Error(ErrorKind::kParameter, "unknown form '" + label + "': not built in and no " +
                                             path.string() + " supplied");
    }
    const auto t = newforms::load_coefficients(path);
    if (t.nmax() < need) {
      throw Error(ErrorKind::kCoverage, path.string() + " ends at nmax=" + std::to_string(t.nmax()) +
                                            ", need " + std::to_string(need));
    }
    return label + ": user-supplied table, nmax=" + std::to_string(t.nmax());
  }
  if (fs::exists(path)) {
    try {
      const auto t = newforms::load_coefficients(path);
      if (t.nmax() >= need && t.spec().weight == spec->weight && t.spec().level == spec->level &&
          t.spec().label == label) {
        return label + ": up to date, nmax=" + std::to_string(t.nmax());
      }
    } catch (const ParseError&) {
      // Corrupt cache: rebuild below.
    }
  }
  const auto table = newforms::build_table(*spec, need, c.threads, c.seed);
  newforms::save_coefficients(table, path);
  return label + ": built, nmax=" + std::to_string(need) + ", " +
         std::to_string(table.entries().size()) + " primes";
}

inline newforms::CoefficientTable load_cached(const ExperimentConfig& c, const std::string& label,
                                              std::uint64_t need) {
  const auto path = cache_path(c, label);
  if (!fs::exists(path)) {
    throw Error(ErrorKind::kIncompleteInput, "no cached coefficients for '" + label + "' in " +
                                                 c.cache_dir + "; run `nfsum coeffs` first");
  }
  auto t = newforms::load_coefficients(path);
  if (t.nmax() < need) {
    throw Error(ErrorKind::kCoverage, "cached table for '" + label + "' ends at " +
                                          std::to_string(t.nmax()) + "; run `nfsum coeffs --x " +
                                          std::to_string(need) + "` first");
  }
  return t;
}

inline newforms::PairContext load_pair(const ExperimentConfig& c, std::uint64_t need) {
  auto f = load_cached(c, c.f_label, need);
  auto g = load_cached(c, c.g_label, need);
  return newforms::PairContext::make(std::move(f), std::move(g), c.sign);
}

// ---------------------------------------------------------------------------
// delta

inline std::vector<galois::GaloisCounts> delta_rows(std::uint64_t lmax, int k) {
  if (lmax > galois::kMaxAsymptoticEll) {
    throw Error(ErrorKind::kCapacity, "delta supports --lmax <= 10000");
  }
  std::map<std::uint64_t, galois::GaloisCounts> at_prime;
  auto prime_counts = [&](std::uint64_t p) -> const galois::GaloisCounts& {
    auto it = at_prime.find(p);
    if (it == at_prime.end()) it = at_prime.emplace(p, galois::counts_at_prime(p, k)).first;
    return it->second;
  };
  std::vector<galois::GaloisCounts> rows;
  for (std::uint64_t h = 2; h <= lmax; ++h) {
    if (h == 4 || h == 8 || h == 9) {
      rows.push_back(galois::enumerate_counts(h, k));
      continue;
    }
    const auto f = arith::factorize(static_cast<i128>(h));
    bool squarefree = true;
    for (const auto& pp : f.factors) squarefree = squarefree && pp.exponent == 1;
    if (!squarefree) continue;
    if (f.factors.size() == 1) {
      rows.push_back(prime_counts(h));
      continue;
    }
    galois::GaloisCounts r{h, k, 1, 1, galois::Method::kCrt};
    for (const auto& pp : f.factors) {
      const auto& pc = prime_counts(static_cast<std::uint64_t>(pp.prime));
      r.sizeA = galois::checked_mul(r.sizeA, pc.sizeA, "|A_h| exceeds 128 bits");
      r.sizeC = galois::checked_mul(r.sizeC, pc.sizeC, "|C_h| exceeds 128 bits");
    }
    rows.push_back(r);
  }
  return rows;
}

inline stats::DensityReport delta_report(const std::vector<galois::GaloisCounts>& rows,
                                         std::uint64_t lmax, int k) {
  using stats::json;
  stats::DensityReport r;
  r.experiment = "delta";
  r.params = json::object({{"lmax", lmax}, {"k", k}});
  json table = json::array();
  for (const auto& c : rows) {
    const auto d = c.delta();
    table.push_back(json::object({{"h", c.h},
                                  {"sizeA", nfsum::to_string(c.sizeA)},
                                  {"sizeC", nfsum::to_string(c.sizeC)},
                                  {"delta_num", nfsum::to_string(d.num)},
                                  {"delta_den", nfsum::to_string(d.den)},
                                  {"method", galois::to_string(c.method)}}));
    if (arith::is_prime(c.h)) {
      r.series.push_back({"ell=" + std::to_string(c.h),
                          static_cast<double>(d.value() * static_cast<long double>(c.h)), 1.0});
    }
  }
  r.observed["rows"] = std::move(table);
  const auto asym = galois::asymptotic_report(lmax, k);
  r.observed["fitted_c"] = static_cast<double>(asym.fitted_c);
  r.observed["scaled_c_monotone_from_11"] = asym.scaled_c_monotone;
  r.predicted = json::object({{"model", "l * delta(l) -> 1"}});
  r.status = rows.empty() ? stats::Status::kInsufficientData : stats::Status::kReportOnly;
  return r;
}

// ---------------------------------------------------------------------------
// Dispatch

struct Outcome {
  stats::Status status = stats::Status::kReportOnly;
  std::string summary;
};

inline std::string summarize(const stats::DensityReport& r) {
  std::string s = r.experiment + ": " + stats::to_string(r.status);
  for (const char* key : {"ratio", "fraction", "q_density"}) {
    if (r.observed.contains(key)) s += " " + std::string(key) + "=" + r.observed[key].dump();
  }
  return s;
}

inline stats::DensityReport run_experiment(const std::string& name, const ExperimentConfig& c) {
  if (name == "delta") return delta_report(delta_rows(c.lmax, c.k), c.lmax, c.k);
  if (name == "sieve-sets" && c.predicate == stats::PrimePredicate::kAll) {
    return stats::sieve_set_report(c.X, c.epsilon, c.predicate, nullptr, c.threads);
  }
  const bool over_n = name == "convolution" || name == "sieve-sets";
  const auto ctx = load_pair(c, over_n ? c.X : c.x);
  if (name == "chebotarev") {
    stats::ChebotarevOptions opt{c.exceptional, c.override_exceptional, 3};
    return stats::chebotarev_report(ctx, c.x, c.ells, opt);
  }
  if (name == "satotate") return stats::satotate_report(ctx, c.x, stats::uniform_cuts(c.grid));
  if (name == "vanishing") return stats::vanishing_report(ctx, c.x);
  if (name == "tails") return stats::tail_density_report(ctx, c.x, c.M);
  if (name == "normal-order") return stats::normal_order_report(ctx, c.x, c.eta, c.threads);
  if (name == "lpf") return stats::lpf_report(ctx, c.x, c.epsilon, c.threads);
  if (name == "grh") return stats::grh_growth_report(ctx, c.x, c.epsilon, c.threads);
  if (name == "convolution") return stats::convolution_report(ctx, c.X, c.epsilon, c.threads);
  if (name == "sieve-sets") return stats::sieve_set_report(c.X, c.epsilon, c.predicate, &ctx, c.threads);
  if (name == "twist-scan") return stats::twist_scan_report(ctx, c.x);
  throw Error(ErrorKind::kParameter, "unknown experiment " + name);
}

inline Outcome run_and_write(const std::string& name, const ExperimentConfig& c, bool timing) {
  const auto start = std::chrono::steady_clock::now();
  auto report = run_experiment(name, c);
  if (timing) {
    report.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  const fs::path out(c.out_dir);
  write_atomic(out / (name + ".json"), stats::to_json_text(report));
  if (name == "delta") {
    std::string csv = galois::csv_header();
    for (const auto& row : delta_rows(c.lmax, c.k)) csv += galois::csv_row(row);
    write_atomic(out / "delta.csv", csv);
  } else {
    write_atomic(out / (name + ".csv"), stats::to_csv(report));
  }
  return {report.status, summarize(report)};
}

inline std::string dry_run_plan(const std::string& name, const ExperimentConfig& c) {
  auto approx_primes = [](std::uint64_t x) {
    return x < 3 ? std::uint64_t(0)
                 : static_cast<std::uint64_t>(static_cast<double>(x) / std::log(static_cast<double>(x)));
  };
  const std::uint64_t need = coverage_needed(c);
  if (name == "coeffs") {
    return "coeffs: " + c.f_label + ", " + c.g_label + " at primes <= " + std::to_string(need) +
           " (~" + std::to_string(approx_primes(need)) + " primes each; exhaustive count below " +
           std::to_string(ec::kNaiveCrossover) + ", BSGS above) into " + c.cache_dir;
  }
  if (name == "delta") {
    return "delta: moduli 2.." + std::to_string(c.lmax) + ", k=" + std::to_string(c.k) +
           " (closed form per prime, O(l) each)";
  }
  const bool over_n = name == "convolution" || name == "sieve-sets";
  const std::uint64_t bound = over_n ? c.X : c.x;
  return name + ": " + (over_n ? "n <= " : "primes <= ") + std::to_string(bound) + " (~" +
         std::to_string(over_n ? bound : approx_primes(bound)) + " items) from " + c.cache_dir;
}

inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kOverflow:
    case ErrorKind::kBadReduction:
    case ErrorKind::kUndefinedInput:
    case ErrorKind::kNonUnit:
      return kExitFailure;
    default:
      return kExitUsage;
  }
}

inline std::string help_footer() {
  std::string s =
      "Defaults: --x 100000 --X 10000 --ell 5,7,11 --epsilon 0.1 --M 1 --eta 1/15 --sign plus\n"
      "  --pair 37a,389a --grid 4 --lmax 50 --k 2 --predicate theorem-threshold\n"
      "  --cache-dir nfsum-cache --out nfsum-out --threads 0 (all cores) --seed 1\n"
      "Config files hold key=value lines (# starts a comment); keys:";
  for (auto k : config_keys()) s += " " + std::string(k);
  s += "\nExit status: 0 pass or report-only, 1 failed check, 2 usage or precondition error.";
  return s;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Statistics of sums of Fourier coefficients of two newforms", "nfsum"};
  app.footer(help_footer());
  app.fallthrough();
  app.require_subcommand(1);

  std::map<std::string, std::string> flag_values;
  for (auto key : config_keys()) {
    if (key == "override-exceptional") continue;
    flag_values[std::string(key)];
  }
  std::string config_path;
  bool override_flag = false, dry_run = false, timing = false;
  app.add_option("--config", config_path, "key=value config file (flags override it)");
  app.add_option("--x", flag_values["x"], "prime range bound for per-prime experiments");
  app.add_option("--X", flag_values["X"], "range bound over n (convolution, sieve-sets)");
  app.add_option("--ell", flag_values["ell"], "comma-separated moduli for chebotarev");
  app.add_option("--exceptional", flag_values["exceptional"],
                 "moduli whose image is known to be non-full");
  app.add_flag("--override-exceptional", override_flag, "allow exceptional moduli");
  app.add_option("--epsilon", flag_values["epsilon"], "epsilon > 0");
  app.add_option("--M", flag_values["M"], "tail parameter M > 1/4");
  app.add_option("--eta", flag_values["eta"], "u = x^eta with 0 < eta < 1/14");
  app.add_option("--sign", flag_values["sign"], "plus or minus");
  app.add_option("--pair", flag_values["pair"], "<labelF>,<labelG>");
  app.add_option("--grid", flag_values["grid"], "Sato-Tate cells per axis");
  app.add_option("--lmax", flag_values["lmax"], "largest modulus for delta");
  app.add_option("--k", flag_values["k"], "weight for delta");
  app.add_option("--predicate", flag_values["predicate"], "all or theorem-threshold");
  app.add_option("--cache-dir", flag_values["cache-dir"], "coefficient cache directory");
  app.add_option("--out", flag_values["out"], "report output directory");
  app.add_option("--threads", flag_values["threads"], "worker threads, 0 = all cores");
  app.add_option("--seed", flag_values["seed"], "seed for randomized point counting");
  app.add_flag("--dry-run", dry_run, "print the planned work and exit");
  app.add_flag("--timing", timing, "record runtime_ms in reports");

  std::vector<std::pair<std::string, CLI::App*>> subs;
  subs.emplace_back("coeffs", app.add_subcommand("coeffs", "build or refresh cached coefficient tables"));
  for (const auto& name : experiment_names()) {
    subs.emplace_back(name, app.add_subcommand(name, "run the " + name + " experiment"));
  }
  subs.emplace_back("all", app.add_subcommand("all", "coeffs followed by every experiment"));
  auto* validate = app.add_subcommand("validate-report", "check that a report re-parses losslessly");
  std::string report_path;
  validate->add_option("file", report_path, "report JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (validate->parsed()) {
      const auto text = read_file(report_path);
      const auto report = stats::parse_report(text);
      if (stats::to_json_text(report) != text) {
        err << report_path << ": parses but does not re-serialize identically\n";
        return kExitFailure;
      }
      out << report_path << ": valid " << report.experiment << " report ("
          << stats::to_string(report.status) << ")\n";
      return kExitOk;
    }

    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& [key, value] : flag_values) {
      if (app.count("--" + key) == 0) continue;
      try {
        apply_setting(cfg, key, value, 0);
      } catch (const ParseError& e) {
        const std::string what = e.what();
        err << "error: --" << key << what.substr(what.find(':') + 1) << "\n";
        return kExitUsage;
      }
    }
    if (override_flag) cfg.override_exceptional = true;

    std::string sub;
    for (const auto& [name, ptr] : subs) {
      if (ptr->parsed()) sub = name;
    }
    std::vector<std::string> steps;
    if (sub == "all") {
      steps.push_back("coeffs");
      for (const auto& n : experiment_names()) steps.push_back(n);
    } else {
      steps.push_back(sub);
    }

    if (dry_run) {
      for (const auto& s : steps) out << dry_run_plan(s, cfg) << "\n";
      return kExitOk;
    }

    const bool needs_cache = sub != "delta" && !(sub == "sieve-sets" &&
                                                 cfg.predicate == stats::PrimePredicate::kAll);
    std::optional<CacheLock> lock;
    if (needs_cache) lock.emplace(cfg.cache_dir);

    int code = kExitOk;
    for (const auto& s : steps) {
      if (s == "coeffs") {
        out << refresh_table(cfg, cfg.f_label) << "\n";
        out << refresh_table(cfg, cfg.g_label) << "\n";
        continue;
      }
      const auto outcome = run_and_write(s, cfg, timing);
      out << outcome.summary << "\n";
      if (outcome.status == stats::Status::kFail) code = kExitFailure;
    }
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace nfsum::cli
