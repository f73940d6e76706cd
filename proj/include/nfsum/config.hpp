#pragma once

// Experiment configuration: `key=value` files with `#` comments, overridden
// by command-line flags of the same names.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nfsum/error.hpp"
#include "nfsum/newforms.hpp"
#include "nfsum/stats.hpp"

namespace nfsum::cli {

struct ExperimentConfig {
  std::string f_label = "37a";
  std::string g_label = "389a";
  newforms::Sign sign = newforms::Sign::kPlus;
  std::uint64_t x = 100'000;
  std::uint64_t X = 10'000;
  double epsilon = 0.1;
  double M = 1.0;
  double eta = 1.0 / 15;
  std::vector<std::uint64_t> ells = {5, 7, 11};
  std::vector<std::uint64_t> exceptional;
  bool override_exceptional = false;
  int grid = 4;
  std::uint64_t lmax = 50;
  int k = 2;
  stats::PrimePredicate predicate = stats::PrimePredicate::kTheoremThreshold;
  std::string cache_dir = "nfsum-cache";
  std::string out_dir = "nfsum-out";
  unsigned threads = 0;  // 0 = all hardware threads
  std::uint64_t seed = 1;
};

// Keys accepted in config files; flags use the same names with a `--` prefix.
inline const std::vector<std::string_view>& config_keys() {
  static const std::vector<std::string_view> keys = {
      "x",    "X",  "ell",  "exceptional", "override-exceptional", "epsilon", "M",
      "eta",  "sign", "pair", "grid",      "lmax",                 "k",       "predicate",
      "cache-dir", "out", "threads", "seed"};
  return keys;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view v, std::size_t line, std::string_view key) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) {
    throw ParseError(line, std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

inline double parse_real(std::string_view v, std::size_t line, std::string_view key) {
  // from_chars for double is available in libstdc++ 11.
  const double d = parse_number<double>(v, line, key);
  if (!std::isfinite(d)) throw ParseError(line, std::string(key) + ": must be finite");
  return d;
}

inline std::vector<std::uint64_t> parse_list(std::string_view v, std::size_t line,
                                             std::string_view key) {
  std::vector<std::uint64_t> out;
  if (trim(v).empty()) return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                            : comma - start));
    out.push_back(parse_number<std::uint64_t>(item, line, key));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool parse_bool(std::string_view v, std::size_t line, std::string_view key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(line, std::string(key) + ": expected true or false");
}

}  // namespace detail

// Sets one key; `line` is reported in errors (0 for command-line flags).
inline void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view raw,
                          std::size_t line) {
  using detail::parse_number;
  using detail::parse_real;
  const auto v = detail::trim(raw);
  const std::string k(key);
  auto bad = [&](const std::string& why) { throw ParseError(line, k + ": " + why); };
  if (key == "x") {
    c.x = parse_number<std::uint64_t>(v, line, key);
  } else if (key == "X") {
    c.X = parse_number<std::uint64_t>(v, line, key);
  } else if (key == "ell") {
    c.ells = detail::parse_list(v, line, key);
    if (c.ells.empty()) bad("needs at least one modulus");
  } else if (key == "exceptional") {
    c.exceptional = detail::parse_list(v, line, key);
  } else if (key == "override-exceptional") {
    c.override_exceptional = detail::parse_bool(v, line, key);
  } else if (key == "epsilon") {
    c.epsilon = parse_real(v, line, key);
    if (!(c.epsilon > 0)) bad("epsilon must be > 0");
  } else if (key == "M") {
    c.M = parse_real(v, line, key);
    if (!(c.M > 0.25)) bad("M must exceed 1/4");
  } else if (key == "eta") {
    c.eta = parse_real(v, line, key);
    if (!(c.eta > 0 && c.eta < stats::kMaxEta)) bad("eta must lie in (0, 1/14)");
  } else if (key == "sign") {
    if (v == "plus") {
      c.sign = newforms::Sign::kPlus;
    } else if (v == "minus") {
      c.sign = newforms::Sign::kMinus;
    } else {
      bad("expected plus or minus");
    }
  } else if (key == "pair") {
    const auto comma = v.find(',');
    if (comma == std::string_view::npos) bad("expected <labelF>,<labelG>");
    c.f_label = std::string(detail::trim(v.substr(0, comma)));
    c.g_label = std::string(detail::trim(v.substr(comma + 1)));
    if (c.f_label.empty() || c.g_label.empty()) bad("empty label");
    if (c.f_label == c.g_label) bad("labels must differ");
  } else if (key == "grid") {
    c.grid = parse_number<int>(v, line, key);
    if (c.grid < 1 || c.grid > 64) bad("grid must be in [1, 64]");
  } else if (key == "lmax") {
    c.lmax = parse_number<std::uint64_t>(v, line, key);
  } else if (key == "k") {
    c.k = parse_number<int>(v, line, key);
    if (c.k < 2 || c.k % 2 != 0) bad("k must be even and >= 2");
  } else if (key == "predicate") {
    if (v == "all") {
      c.predicate = stats::PrimePredicate::kAll;
    } else if (v == "theorem-threshold") {
      c.predicate = stats::PrimePredicate::kTheoremThreshold;
    } else {
      bad("expected all or theorem-threshold");
    }
  } else if (key == "cache-dir") {
    if (v.empty()) bad("empty path");
    c.cache_dir = std::string(v);
  } else if (key == "out") {
    if (v.empty()) bad("empty path");
    c.out_dir = std::string(v);
  } else if (key == "threads") {
    c.threads = parse_number<unsigned>(v, line, key);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(v, line, key);
  } else {
    throw ParseError(line, "unknown key '" + k + "'");
  }
}

inline void parse_config_text(ExperimentConfig& c, std::string_view text) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
    const auto key = detail::trim(line.substr(0, eq));
    for (char ch : std::string(line)) {
      if (static_cast<unsigned char>(ch) > 127) throw ParseError(line_no, "non-ASCII character");
    }
    if (!seen.insert(std::string(key)).second) {
      throw ParseError(line_no, "duplicate key '" + std::string(key) + "'");
    }
    apply_setting(c, key, line.substr(eq + 1), line_no);
  }
}

inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  parse_config_text(c, text);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace nfsum::cli
