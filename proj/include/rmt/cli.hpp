#pragma once

#include "rmt/anticoncentration.hpp"
#include "rmt/core.hpp"
#include "rmt/counting.hpp"
#include "rmt/entry_law.hpp"
#include "rmt/experiments.hpp"
#include "rmt/lcd.hpp"
#include "rmt/report.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace rmt::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kValidation = 3, kBackend = 4 };

/// Malformed command line: unknown verb or option, bad option syntax.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Well-formed but invalid values, or a missing required key.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// --help was given; `text` is the help to print.
struct HelpRequested {
  std::string text;
};

struct LcdCommand {
  ComplexVec a;
  LcdParams params;
};

struct RhoCommand {
  ConcentrationQuery query;
  bool exact = false;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
};

struct EsseenCommand {
  EsseenInputs inputs;
};

struct CountCommand {
  CountingBoundParams params;
  std::optional<std::size_t> enumerate_n;
  int box = 1;
  EntryLaw law = EntryLaw::real_rademacher();
};

struct GoodnessCommand {
  EntryLaw law = EntryLaw::complex_gaussian();
  std::size_t trials = 1000000;
  std::uint64_t seed = 0;
  std::vector<double> grid;
};

using Payload = std::variant<TailConfig, EsdConfig, SingleVectorConfig, NormControlConfig, GammaTailConfig, LcdCommand,
                             RhoCommand, EsseenCommand, CountCommand, GoodnessCommand>;

struct Command {
  std::string verb;
  std::filesystem::path out_dir = "rmt-out";
  unsigned threads = 0;
  Payload payload;
};

// ---------------------------------------------------------------------------
// Value parsers. All throw ValidationError naming the key.

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v))
    throw ValidationError(key + ": '" + text + "' is not a finite number");
  return v;
}

inline std::size_t to_size(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw ValidationError(key + ": '" + text + "' is not a nonnegative integer");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// "lo:hi:logK" (K log-spaced points) or a comma-separated ascending list.
inline std::vector<double> parse_eta_grid(const std::string& key, const std::string& text) {
  std::vector<double> out;
  const auto parts = detail::split(text, ':');
  if (parts.size() == 3) {
    const double lo = detail::to_double(key, parts[0]), hi = detail::to_double(key, parts[1]);
    const std::string k = detail::trim(parts[2]);
    if (k.rfind("log", 0) != 0) throw ValidationError(key + ": expected lo:hi:logK");
    const std::size_t count = detail::to_size(key, k.substr(3));
    if (!(lo > 0.0 && hi > lo && count >= 2)) throw ValidationError(key + ": need 0 < lo < hi and K >= 2");
    return log_grid(lo, hi, count);
  }
  if (parts.size() != 1) throw ValidationError(key + ": expected lo:hi:logK or a comma list");
  for (const auto& p : detail::split(text, ',')) out.push_back(detail::to_double(key, p));
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(out[i] > 0.0) || (i && out[i] <= out[i - 1]))
      throw ValidationError(key + ": values must be positive and strictly ascending");
  return out;
}

/// "a:b" (inclusive), "a:b:step" or "a,b,c".
inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  const auto parts = detail::split(text, ':');
  if (parts.size() == 2 || parts.size() == 3) {
    const std::size_t a = detail::to_size(key, parts[0]), b = detail::to_size(key, parts[1]);
    const std::size_t step = parts.size() == 3 ? detail::to_size(key, parts[2]) : 1;
    if (a > b || step == 0) throw ValidationError(key + ": need a <= b and step >= 1");
    for (std::size_t v = a; v <= b; v += step) out.push_back(v);
    return out;
  }
  if (parts.size() != 1) throw ValidationError(key + ": expected a:b, a:b:step or a comma list");
  for (const auto& p : detail::split(text, ',')) out.push_back(detail::to_size(key, p));
  return out;
}

/// Comma list whose items are "x" or "x*k" (x repeated k times).
inline std::vector<double> parse_real_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::string body = detail::trim(text);
  if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
  for (const auto& item : detail::split(body, ',')) {
    const auto star = item.find('*');
    if (star == std::string::npos) {
      out.push_back(detail::to_double(key, item));
    } else {
      const double v = detail::to_double(key, item.substr(0, star));
      const std::size_t k = detail::to_size(key, item.substr(star + 1));
      out.insert(out.end(), k, v);
    }
  }
  return out;
}

/// "[1, 1+i, -0.5i]" or "1,1+i".
inline ComplexVec parse_complex_vector(const std::string& key, const std::string& text) {
  std::string body = detail::trim(text);
  if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
  if (detail::trim(body).empty()) throw ValidationError(key + ": empty vector");
  const auto items = detail::split(body, ',');
  ComplexVec v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    try {
      v[static_cast<Eigen::Index>(i)] = EntryLaw::parse_complex(items[i]);
    } catch (const std::exception&) {
      throw ValidationError(key + ": '" + items[i] + "' is not a complex number");
    }
  }
  if (!all_finite(v)) throw ValidationError(key + ": entries must be finite");
  return v;
}

inline EntryLaw parse_law(const std::string& key, const std::string& text) {
  try {
    return EntryLaw::parse(text);
  } catch (const std::exception& e) {
    throw ValidationError(key + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Command line

namespace detail {

/// Option values as parsed strings; validated into typed configs afterwards.
struct Raw {
  std::string out = "rmt-out";
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  std::string law;
  std::string n;
  std::string trials;
  std::string eta;
  std::string shift;
  std::string fit_range = "1e-4:1e-2";
  std::size_t min_fit_count = 0;
  bool strict = false;
  // esd
  std::size_t cells = 10;
  double extent = 1.5;
  std::uint64_t stream_id = 0;
  // single-vector
  std::string vector_kind = "e1-e2";
  double c = 0.1;
  // norms
  double epsilon = 0.0;
  std::string deltas = "0.2,0.6";
  std::size_t perm_n = 12;
  std::size_t perm_trials = 10000;
  double perm_constant = 20.0;
  std::size_t a4_m = 12;
  std::size_t a4_trials = 100000;
  // gamma / lcd
  std::size_t samples = 100;
  std::string source = "planted";
  std::optional<double> gamma, alpha;
  double theta_max = 0.0;
  double step = 1e-3;
  int depth = 6;
  std::size_t rho_trials = 10000;
  double c_bound = 1.0;
  std::string vector;
  // rho
  std::string weights;
  double radius = 1.0;
  bool exact = false;
  // esseen
  double t = 0.0;
  std::string tj, rho_tj;
  double c_esseen = 1.0;
  // count
  std::optional<double> s, k, p, rho, c_count;
  double c_z = 1.0;
  std::optional<std::size_t> enumerate_n;
  int box = 1;
  // goodness
  std::string grid;
};

inline void common_options(CLI::App* sub, Raw& r) {
  sub->add_option("--out", r.out, "output directory for result files")->capture_default_str();
  sub->add_option("--threads", r.threads, "worker threads; 0 uses RMT_THREADS or all cores")->capture_default_str();
  sub->fallthrough();  // --config lives on the top-level app
  sub->allow_config_extras(CLI::config_extras_mode::error);
}

/// TOML reader that files top-level keys under the verb being parsed, so a
/// config file can be written as plain `key = value` lines.
class VerbConfig : public CLI::ConfigTOML {
 public:
  explicit VerbConfig(const CLI::App* app) : app_(app) {}
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    const auto subs = app_->get_subcommands();
    if (subs.empty()) return items;
    for (auto& item : items)
      if (item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == "default"))
        item.parents = {subs.front()->get_name()};
    return items;
  }

 private:
  const CLI::App* app_;
};

inline void seed_option(CLI::App* sub, Raw& r) {
  sub->add_option("--seed", r.seed, "64-bit seed (required; there is no entropy default)");
}

inline std::string build_help(CLI::App& app) { return app.help("", CLI::AppFormatMode::All); }

}  // namespace detail

/// Parses and validates argv. Throws UsageError, ValidationError or HelpRequested.
inline Command parse_and_validate(int argc, const char* const* argv) {
  using detail::Raw;
  Raw r;
  CLI::App app{"Least-singular-value tail, anti-concentration and LCD toolkit", "rmt"};
  app.set_help_flag();
  app.set_help_all_flag("-h,--help", "print help for every verb and key");
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "flat key = value file mirroring the flags of the verb; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.config_formatter(std::make_shared<detail::VerbConfig>(&app));

  auto* tail = app.add_subcommand("tail", "tail of the least singular value of M + N_n");
  detail::common_options(tail, r);
  detail::seed_option(tail, r);
  tail->add_option("--n", r.n, "matrix dimension (default 64)");
  tail->add_option("--law", r.law, "entry law (default complex-gaussian)");
  tail->add_option("--trials", r.trials, "number of sampled matrices (default 4000)");
  tail->add_option("--eta", r.eta, "eta grid lo:hi:logK or comma list (default 1e-4:1e-1:log16)");
  tail->add_option("--shift", r.shift, "deterministic shift M: zero | diag[:c] (c n^0.51 I) | file:<path> (default diag:0.5)");
  tail->add_option("--fit-range", r.fit_range, "eta window lo:hi of the log-log slope fit")->capture_default_str();
  tail->add_option("--min-fit-count", r.min_fit_count, "least count for a point to enter the fit (default 20)");
  tail->add_flag("--strict-shift", r.strict, "reject shifts with operator norm above n^0.51");

  auto* esd = app.add_subcommand("esd", "eigenvalues of N_n / sqrt(n) against the uniform law on the disc");
  detail::common_options(esd, r);
  detail::seed_option(esd, r);
  esd->add_option("--n", r.n, "matrix dimension, at most 1024 (default 512)");
  esd->add_option("--law", r.law, "entry law (default complex-gaussian)");
  esd->add_option("--cells", r.cells, "grid cells per side on [-extent, extent]^2")->capture_default_str();
  esd->add_option("--extent", r.extent, "half-width of the grid")->capture_default_str();
  esd->add_option("--stream-id", r.stream_id, "stream of the sampled matrix")->capture_default_str();

  auto* single = app.add_subcommand("single-vector", "Pr(||(M + N_n) v|| <= c sqrt(n)) as n grows");
  detail::common_options(single, r);
  detail::seed_option(single, r);
  single->add_option("--n", r.n, "dimensions a:b, a:b:step or a comma list (default 10:40)");
  single->add_option("--law", r.law, "entry law (default rademacher)");
  single->add_option("--vector", r.vector_kind, "unit vector v: e1 | e1-e2 | flat")->capture_default_str();
  single->add_option("--shift", r.shift, "deterministic shift M (default zero)");
  single->add_option("--c", r.c, "threshold constant c")->capture_default_str();
  single->add_option("--trials", r.trials, "trials per n (default 100000)");
  single->add_option("--min-fit-count", r.min_fit_count, "least count for an n to enter the fit (default 1)");

  auto* norms = app.add_subcommand("norms", "row selection and restricted infinity-to-two norms");
  detail::common_options(norms, r);
  detail::seed_option(norms, r);
  norms->add_option("--n", r.n, "matrix dimension (default 256)");
  norms->add_option("--law", r.law, "entry law (default complex-gaussian)");
  norms->add_option("--epsilon", r.epsilon, "row threshold exponent in (0, 1/2) (default 0.01)");
  norms->add_option("--trials", r.trials, "sampled matrices (default 200)");
  norms->add_option("--deltas", r.deltas, "column-subset exponents; |J| = n^(1-delta)")->capture_default_str();
  norms->add_option("--perm-n", r.perm_n, "size of the permuted square matrix (<= 20)")->capture_default_str();
  norms->add_option("--perm-trials", r.perm_trials, "independent row permutations")->capture_default_str();
  norms->add_option("--perm-constant", r.perm_constant, "constant in the sqrt(mn) n^eps comparison")->capture_default_str();
  norms->add_option("--a4-m", r.a4_m, "length of y in the permutation tail check")->capture_default_str();
  norms->add_option("--a4-trials", r.a4_trials, "permutations in the tail check")->capture_default_str();

  auto* gamma = app.add_subcommand("gamma", "LCD classes and the rounding decomposition on sampled unit vectors");
  detail::common_options(gamma, r);
  detail::seed_option(gamma, r);
  gamma->add_option("--n", r.n, "dimension, at most 64 (default 64)");
  gamma->add_option("--samples", r.samples, "sampled unit vectors")->capture_default_str();
  gamma->add_option("--eta", r.eta, "scale eta; the class threshold is n^0.7 / eta (default 1e-2)");
  gamma->add_option("--source", r.source, "vectors: planted | random | sqrt")->capture_default_str();
  gamma->add_option("--gamma", r.gamma, "LCD gamma (default n^-1/2)");
  gamma->add_option("--alpha", r.alpha, "LCD alpha (default n^0.01)");
  gamma->add_option("--theta-max", r.theta_max, "LCD search cap; 0 picks it from the source")->capture_default_str();
  gamma->add_option("--step", r.step, "coarse LCD grid step")->capture_default_str();
  gamma->add_option("--depth", r.depth, "halvings below the coarse step")->capture_default_str();
  gamma->add_option("--law", r.law, "entry law for the concentration check (default rademacher)");
  gamma->add_option("--rho-trials", r.rho_trials, "Monte Carlo sums per concentration estimate")->capture_default_str();
  gamma->add_option("--c-bound", r.c_bound, "constant of the LCD concentration bound (>= 1)")->capture_default_str();
  gamma->add_flag("--strict-range", r.strict, "require eta in [2^-n^0.0001, n^-2)");

  auto* lcd = app.add_subcommand("lcd", "least common denominator of a unit vector");
  detail::common_options(lcd, r);
  lcd->add_option("--vector", r.vector, "complex vector, e.g. [1,0] or [1,1+i]")->required();
  lcd->add_option("--gamma", r.gamma, "LCD gamma in (0,1) (default 0.1)");
  lcd->add_option("--alpha", r.alpha, "LCD alpha > 0 (default 0.5)");
  lcd->add_option("--theta-max", r.theta_max, "search cap on |theta| (default 10)");
  lcd->add_option("--step", r.step, "coarse grid step")->capture_default_str();
  lcd->add_option("--depth", r.depth, "halvings below the coarse step")->capture_default_str();
  lcd->add_flag("--normalize", r.strict, "scale the vector to unit norm first");

  auto* rho = app.add_subcommand("rho", "Levy concentration of sum v_i z_i at radius r");
  detail::common_options(rho, r);
  detail::seed_option(rho, r);
  rho->add_option("--weights", r.weights, "complex weights, e.g. [1,1]")->required();
  rho->add_option("--law", r.law, "entry law (default rademacher)");
  rho->add_option("--radius", r.radius, "ball radius r > 0")->capture_default_str();
  rho->add_flag("--exact", r.exact, "exhaustive enumeration (discrete laws only)");
  rho->add_option("--trials", r.trials, "Monte Carlo sums (default 100000)");

  auto* esseen = app.add_subcommand("esseen", "Esseen-type bound C t^2 (sum t_j^4 (1 - rho_j))^-1/2");
  detail::common_options(esseen, r);
  esseen->add_option("--t", r.t, "radius t >= max t_j")->required();
  esseen->add_option("--tj", r.tj, "radii t_j as a list; x*k repeats x k times")->required();
  esseen->add_option("--rho", r.rho_tj, "values rho_{t_j, z_j}(1), same length as --tj")->required();
  esseen->add_option("--c-esseen", r.c_esseen, "constant C >= 1")->capture_default_str();

  auto* count = app.add_subcommand("count", "counting bound for level sets modulo p");
  detail::common_options(count, r);
  count->add_option("--n", r.n, "dimension n")->required();
  count->add_option("--s", r.s, "sparsity parameter s")->required();
  count->add_option("--k", r.k, "parameter k")->required();
  count->add_option("--rho", r.rho, "level rho in (0,1)")->required();
  count->add_option("--p", r.p, "odd prime p (default: smallest prime >= C / rho)");
  count->add_option("--c", r.c_count, "constant C of the bound; required, no default");
  count->add_option("--c-z", r.c_z, "goodness constant C_z of the law")->capture_default_str();
  count->add_option("--enumerate-n", r.enumerate_n, "also enumerate the level set in this dimension");
  count->add_option("--box", r.box, "box bound H for the enumeration")->capture_default_str();
  count->add_option("--law", r.law, "discrete law for the enumeration (default rademacher)");

  auto* good = app.add_subcommand("goodness", "smallest grid C for which the law is C-good");
  detail::common_options(good, r);
  detail::seed_option(good, r);
  good->add_option("--law", r.law, "entry law (default complex-gaussian)");
  good->add_option("--trials", r.trials, "Monte Carlo pairs, >= 1e4 (default 1e6)");
  good->add_option("--grid", r.grid, "candidate C values as a list (default 1.0, 1.1, ..., 10)");

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{detail::build_help(app)};
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested{detail::build_help(app)};
  } catch (const CLI::RequiredError& e) {
    // a missing verb is a usage problem; a missing key of a known verb is not
    if (app.get_subcommands().empty()) throw UsageError(e.what());
    throw ValidationError(e.what());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  Command cmd;
  CLI::App* sub = app.get_subcommands().front();
  cmd.verb = sub->get_name();
  cmd.out_dir = r.out;
  cmd.threads = r.threads;
  const auto need_seed = [&]() -> std::uint64_t {
    if (!r.seed) throw ValidationError("seed: --seed is required for the stochastic verb '" + cmd.verb + "'");
    return *r.seed;
  };
  const auto size_or = [&](const std::string& key, const std::string& text, std::size_t dflt) {
    return text.empty() ? dflt : detail::to_size(key, text);
  };
  const auto positive = [](const std::string& key, double v) {
    if (!(v > 0.0)) throw ValidationError(key + ": must be positive");
  };
  const auto at_least_one = [](const std::string& key, std::size_t v) {
    if (v < 1) throw ValidationError(key + ": must be >= 1");
  };

  try {
    if (cmd.verb == "tail") {
      TailConfig c;
      c.seed = need_seed();
      c.n = size_or("n", r.n, 64);
      at_least_one("n", c.n);
      c.law = r.law.empty() ? EntryLaw::complex_gaussian() : parse_law("law", r.law);
      c.trials = size_or("trials", r.trials, 4000);
      at_least_one("trials", c.trials);
      if (!r.eta.empty()) c.eta = parse_eta_grid("eta", r.eta);
      try {
        if (!r.shift.empty()) c.shift = ShiftSpec::parse(r.shift);
      } catch (const Error& e) {
        throw ValidationError(std::string("shift: ") + e.what());
      }
      const auto fr = detail::split(r.fit_range, ':');
      if (fr.size() != 2) throw ValidationError("fit-range: expected lo:hi");
      c.fit_lo = detail::to_double("fit-range", fr[0]);
      c.fit_hi = detail::to_double("fit-range", fr[1]);
      if (!(c.fit_lo > 0.0 && c.fit_hi > c.fit_lo)) throw ValidationError("fit-range: need 0 < lo < hi");
      c.min_fit_count = r.min_fit_count ? r.min_fit_count : 20;
      c.strict_shift = r.strict;
      c.threads = r.threads;
      cmd.payload = c;
    } else if (cmd.verb == "esd") {
      EsdConfig c;
      c.seed = need_seed();
      c.n = size_or("n", r.n, 512);
      if (c.n < 1 || c.n > kMaxEsdDimension) throw ValidationError("n: must lie in [1, 1024]");
      c.law = r.law.empty() ? EntryLaw::complex_gaussian() : parse_law("law", r.law);
      at_least_one("cells", r.cells);
      positive("extent", r.extent);
      c.cells = r.cells;
      c.extent = r.extent;
      c.stream_id = r.stream_id;
      cmd.payload = c;
    } else if (cmd.verb == "single-vector") {
      SingleVectorConfig c;
      c.seed = need_seed();
      c.ns = parse_size_list("n", r.n.empty() ? "10:40" : r.n);
      c.law = r.law.empty() ? EntryLaw::real_rademacher() : parse_law("law", r.law);
      try {
        c.vector = parse_test_vector(r.vector_kind);
        if (!r.shift.empty()) c.shift = ShiftSpec::parse(r.shift);
      } catch (const Error& e) {
        throw ValidationError(std::string(r.shift.empty() ? "vector: " : "vector/shift: ") + e.what());
      }
      for (std::size_t n : c.ns) {
        if (n < 1) throw ValidationError("n: dimensions must be >= 1");
        if (c.vector == TestVector::E1MinusE2 && n < 2) throw ValidationError("n: e1-e2 needs n >= 2");
      }
      positive("c", r.c);
      c.c = r.c;
      c.trials = size_or("trials", r.trials, 100000);
      at_least_one("trials", c.trials);
      c.min_fit_count = r.min_fit_count ? r.min_fit_count : 1;
      c.threads = r.threads;
      cmd.payload = c;
    } else if (cmd.verb == "norms") {
      NormControlConfig c;
      c.seed = need_seed();
      c.n = size_or("n", r.n, 256);
      if (c.n < 2) throw ValidationError("n: must be >= 2");
      c.law = r.law.empty() ? EntryLaw::complex_gaussian() : parse_law("law", r.law);
      c.epsilon = r.epsilon == 0.0 ? 0.01 : r.epsilon;
      if (!(c.epsilon > 0.0 && c.epsilon < 0.5)) throw ValidationError("epsilon: must lie in (0, 1/2)");
      c.trials = size_or("trials", r.trials, 200);
      at_least_one("trials", c.trials);
      c.deltas = parse_real_list("deltas", r.deltas);
      for (double d : c.deltas)
        if (!(d > 0.0 && d < 1.0)) throw ValidationError("deltas: each delta must lie in (0, 1)");
      if (r.perm_n > kMaxExhaustiveColumns) throw ValidationError("perm-n: at most 20");
      c.perm_n = r.perm_n;
      c.perm_trials = r.perm_trials;
      positive("perm-constant", r.perm_constant);
      c.perm_constant = r.perm_constant;
      c.a4_m = r.a4_m;
      c.a4_trials = r.a4_trials;
      c.threads = r.threads;
      cmd.payload = c;
    } else if (cmd.verb == "gamma") {
      GammaTailConfig c;
      c.seed = need_seed();
      c.n = size_or("n", r.n, 64);
      if (c.n < 1 || c.n > kMaxGammaTailDimension) throw ValidationError("n: must lie in [1, 64]");
      at_least_one("samples", r.samples);
      c.samples = r.samples;
      c.eta = r.eta.empty() ? 1e-2 : detail::to_double("eta", r.eta);
      positive("eta", c.eta);
      try {
        c.source = parse_vector_source(r.source);
      } catch (const Error& e) {
        throw ValidationError(std::string("source: ") + e.what());
      }
      if (r.gamma && !(*r.gamma > 0.0 && *r.gamma < 1.0)) throw ValidationError("gamma: must lie in (0, 1)");
      if (r.alpha) positive("alpha", *r.alpha);
      c.gamma = r.gamma;
      c.alpha = r.alpha;
      if (r.theta_max < 0.0) throw ValidationError("theta-max: must be >= 0");
      c.theta_max = r.theta_max;
      positive("step", r.step);
      if (r.depth < 0 || r.depth > 30) throw ValidationError("depth: must lie in [0, 30]");
      c.step = r.step;
      c.depth = r.depth;
      c.law = r.law.empty() ? EntryLaw::real_rademacher() : parse_law("law", r.law);
      if (r.rho_trials < 1000) throw ValidationError("rho-trials: must be >= 1000");
      c.rho_trials = r.rho_trials;
      if (!(r.c_bound >= 1.0)) throw ValidationError("c-bound: must be >= 1");
      c.c_bound = r.c_bound;
      c.strict_range = r.strict;
      c.threads = r.threads;
      cmd.payload = c;
    } else if (cmd.verb == "lcd") {
      LcdCommand c;
      c.a = parse_complex_vector("vector", r.vector);
      if (r.strict) {
        if (c.a.norm() == 0.0) throw ValidationError("vector: cannot normalize the zero vector");
        c.a /= c.a.norm();
      }
      if (c.a.norm() == 0.0) throw ValidationError("vector: must be nonzero");
      if (std::abs(c.a.norm() - 1.0) > 1e-10) throw ValidationError("vector: must have unit norm (or pass --normalize)");
      c.params.gamma = r.gamma.value_or(0.1);
      c.params.alpha = r.alpha.value_or(0.5);
      c.params.theta_max = r.theta_max > 0.0 ? r.theta_max : 10.0;
      c.params.step = r.step;
      c.params.depth = r.depth;
      if (!(c.params.gamma > 0.0 && c.params.gamma < 1.0)) throw ValidationError("gamma: must lie in (0, 1)");
      positive("alpha", c.params.alpha);
      positive("step", c.params.step);
      if (r.depth < 0 || r.depth > 30) throw ValidationError("depth: must lie in [0, 30]");
      cmd.payload = c;
    } else if (cmd.verb == "rho") {
      RhoCommand c;
      c.query.weights = parse_complex_vector("weights", r.weights);
      c.query.law = r.law.empty() ? EntryLaw::real_rademacher() : parse_law("law", r.law);
      positive("radius", r.radius);
      c.query.radius = r.radius;
      c.exact = r.exact;
      if (c.exact && !c.query.law.is_discrete()) throw ValidationError("exact: needs a discrete law");
      c.trials = size_or("trials", r.trials, 100000);
      if (!c.exact) {
        c.seed = need_seed();
        if (c.trials < 1000) throw ValidationError("trials: must be >= 1000");
      }
      cmd.payload = c;
    } else if (cmd.verb == "esseen") {
      EsseenCommand c;
      c.inputs.t = r.t;
      c.inputs.t_j = parse_real_list("tj", r.tj);
      c.inputs.rho_tj = parse_real_list("rho", r.rho_tj);
      c.inputs.c_esseen = r.c_esseen;
      if (c.inputs.t_j.size() != c.inputs.rho_tj.size()) throw ValidationError("rho: length differs from tj");
      cmd.payload = c;
    } else if (cmd.verb == "count") {
      CountCommand c;
      if (!r.c_count) throw ValidationError("c: --c is required; the bound's constant has no default");
      auto& q = c.params;
      q.n = static_cast<double>(detail::to_size("n", r.n));
      q.s = *r.s;
      q.k = *r.k;
      q.rho = *r.rho;
      q.c = *r.c_count;
      q.c_z = r.c_z;
      for (auto [key, v] : {std::pair{"n", q.n}, {"s", q.s}, {"k", q.k}, {"rho", q.rho}, {"c", q.c}, {"c-z", q.c_z}})
        positive(key, v);
      if (!(q.rho <= 1.0)) throw ValidationError("rho: must lie in (0, 1]");
      if (r.p) {
        q.p = *r.p;
        positive("p", q.p);
      } else {
        try {
          q.p = static_cast<double>(prime_at_least(q.c / q.rho));
        } catch (const Error& e) {
          throw ValidationError(std::string("p: ") + e.what());
        }
      }
      c.enumerate_n = r.enumerate_n;
      if (r.box < 0) throw ValidationError("box: must be >= 0");
      c.box = r.box;
      c.law = r.law.empty() ? EntryLaw::real_rademacher() : parse_law("law", r.law);
      if (c.enumerate_n && !c.law.is_discrete()) throw ValidationError("law: enumeration needs a discrete law");
      cmd.payload = c;
    } else if (cmd.verb == "goodness") {
      GoodnessCommand c;
      c.law = r.law.empty() ? EntryLaw::complex_gaussian() : parse_law("law", r.law);
      c.trials = size_or("trials", r.trials, 1000000);
      if (!c.law.is_discrete()) {
        c.seed = need_seed();
        if (c.trials < 10000) throw ValidationError("trials: must be >= 10000");
      }
      c.grid = r.grid.empty() ? default_goodness_grid() : parse_real_list("grid", r.grid);
      for (std::size_t i = 0; i < c.grid.size(); ++i)
        if (!(c.grid[i] >= 1.0) || (i && c.grid[i] <= c.grid[i - 1]))
          throw ValidationError("grid: values must be >= 1 and strictly ascending");
      cmd.payload = c;
    }
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
  return cmd;
}

// ---------------------------------------------------------------------------
// Dispatch

namespace detail {

inline std::string fmt_complex(const Complex& z) {
  std::string s = format_number(z.real());
  if (z.imag() != 0.0) s += (z.imag() < 0 ? "-" : "+") + format_number(std::abs(z.imag())) + "i";
  return s;
}

inline std::string fmt_vector(const ComplexVec& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_complex(v[i]);
  return s + "]";
}

inline std::string fmt_bound(const BoundValue& b) {
  return format_number(b.value) + (b.vacuous ? " (vacuous, raw " + format_number(b.raw) + ")" : "");
}

}  // namespace detail

inline int run(const Command& cmd, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  const fs::path dir = cmd.out_dir;
  try {
    if (const auto* c = std::get_if<TailConfig>(&cmd.payload)) {
      const auto res = tail_experiment(*c);
      write_text(dir / "tail.jsonl", to_jsonl(res.records));
      write_text(dir / "tail.csv", tail_table(res.curve).str());
      write_text(dir / "tail.svg", tail_svg(res.curve, c->n));
      out << "tail n=" << c->n << " trials=" << res.curve.trials_used << " failures=" << res.curve.failures
          << " slope=" << (res.curve.fit ? format_number(res.curve.fit->slope) : std::string("n/a"))
          << " fit_points=" << (res.curve.fit ? res.curve.fit->points : 0)
          << " envelope_C=" << format_number(res.curve.envelope_c) << " monotone=" << res.curve.monotone() << '\n';
    } else if (const auto* c = std::get_if<EsdConfig>(&cmd.payload)) {
      const auto res = esd_experiment(*c);
      const auto& h = res.histogram;
      write_text(dir / "esd.jsonl", to_jsonl(res.records));
      write_text(dir / "esd_radial.csv", esd_table(h).str());
      write_text(dir / "esd_eigenvalues.csv", esd_eigenvalue_table(h).str());
      write_text(dir / "esd.svg", svg_eigenvalue_scatter(h.eigenvalues, h.extent, "n = " + std::to_string(c->n)));
      out << "esd n=" << c->n << " discrepancy=" << format_number(h.discrepancy)
          << " F(0.5)=" << format_number(radial_cdf(h.eigenvalues, 0.5))
          << " mean_modulus=" << format_number(h.mean_modulus) << " outside=" << h.outside << '\n';
    } else if (const auto* c = std::get_if<SingleVectorConfig>(&cmd.payload)) {
      const auto rep = single_vector_experiment(*c);
      write_text(dir / "single_vector.jsonl", to_jsonl(rep.records));
      write_text(dir / "single_vector.csv", single_vector_table(rep).str());
      out << "single-vector v=" << to_string(c->vector) << " c=" << format_number(c->c)
          << " slope=" << (rep.fit ? format_number(rep.fit->slope) : std::string("n/a"))
          << " fit_points=" << (rep.fit ? rep.fit->points : 0) << '\n';
    } else if (const auto* c = std::get_if<NormControlConfig>(&cmd.payload)) {
      const auto rep = norm_control_experiment(*c);
      write_text(dir / "norms.jsonl", to_jsonl(rep.records));
      write_text(dir / "norms.csv", norm_control_table(rep).str());
      out << "norms n=" << c->n << " excluded<=limit " << rep.part1_success << "/" << c->trials
          << " ratio_q99=" << format_number(rep.ratio_q99) << " perm_max=" << format_number(rep.perm_max)
          << " perm_threshold=" << format_number(rep.perm_threshold) << " a4_dominated=" << rep.a4_dominated << '\n';
    } else if (const auto* c = std::get_if<GammaTailConfig>(&cmd.payload)) {
      const auto rep = gamma_tail_experiment(*c);
      write_text(dir / "gamma.jsonl", to_jsonl(rep.records));
      CsvTable t{{"quantity", "value"}, {}};
      for (auto [k, v] : {std::pair{"gamma1", rep.gamma1}, {"gamma2", rep.gamma2}, {"undetermined", rep.undetermined},
                          {"decomposition_failures", rep.decomposition_failures},
                          {"witness_norm_failures", rep.witness_norm_failures}, {"rho_failures", rep.rho_failures},
                          {"vacuous_bounds", rep.vacuous_bounds}})
        t.add({k, std::to_string(v)});
      write_text(dir / "gamma.csv", t.str());
      out << "gamma n=" << c->n << " threshold=" << format_number(rep.threshold) << " gamma1=" << rep.gamma1
          << " gamma2=" << rep.gamma2 << " undetermined=" << rep.undetermined
          << " decomposition_failures=" << rep.decomposition_failures << " rho_failures=" << rep.rho_failures << '\n';
    } else if (const auto* c = std::get_if<LcdCommand>(&cmd.payload)) {
      const auto res = lcd_search(c->a, c->params);
      out << "lcd infimum=" << format_number(res.infimum_estimate)
          << " certified_lower=" << format_number(res.certified_lower);
      if (res.theta)
        out << " theta=" << detail::fmt_complex(*res.theta) << " witness=" << detail::fmt_vector(*res.point)
            << " distance=" << format_number(res.achieved_distance);
      else
        out << " exhausted up to theta_max=" << format_number(c->params.theta_max);
      out << '\n';
    } else if (const auto* c = std::get_if<RhoCommand>(&cmd.payload)) {
      ConcentrationEstimate est;
      if (c->exact) {
        est = rho_exact(c->query);
      } else {
        RandomStream stream(c->seed, 0);
        est = rho_mc(c->query, c->trials, stream);
      }
      out << format_number(est.rho_hat) << " method=" << (c->exact ? "exact" : "monte-carlo") << " ci=["
          << format_number(est.ci.lo) << "," << format_number(est.ci.hi) << "] center="
          << detail::fmt_complex(est.best_center) << '\n';
    } else if (const auto* c = std::get_if<EsseenCommand>(&cmd.payload)) {
      out << "esseen bound=" << detail::fmt_bound(esseen_bound(c->inputs)) << '\n';
    } else if (const auto* c = std::get_if<CountCommand>(&cmd.payload)) {
      const auto res = counting_bound(c->params);
      const auto& h = res.hypotheses;
      out << "count log_bound=" << format_number(res.log_value) << " log_sparse=" << format_number(res.log_sparse)
          << " log_spread=" << format_number(res.log_spread) << " p=" << format_number(c->params.p)
          << " hypotheses_ok=" << h.all() << " [rho_in_unit=" << h.rho_in_unit << " k_large=" << h.k_large
          << " k_below_sqrt_s=" << h.k_below_sqrt_s << " sqrt_s_below_s=" << h.sqrt_s_below_s
          << " s_below_n_over_log=" << h.s_below_n_over_log << " rho_large=" << h.rho_large
          << " p_below_power=" << h.p_below_power << " p_above_inverse_rho=" << h.p_above_inverse_rho
          << " p_odd_prime=" << h.p_odd_prime << "]";
      if (c->enumerate_n) {
        const bool prime_ok = h.p_odd_prime;
        const auto ls = enumerate_level_set(*c->enumerate_n, c->box, c->law, c->params.rho,
                                            prime_ok ? static_cast<std::uint64_t>(c->params.p) : 0, cmd.threads);
        out << " level_set=" << ls.vectors.size() << " phi_image=" << ls.phi_image_size << " prime=" << ls.prime;
      }
      out << '\n';
    } else if (const auto* c = std::get_if<GoodnessCommand>(&cmd.payload)) {
      const auto est = estimate_goodness(c->law, c->trials, c->grid, c->seed, cmd.threads);
      out << "goodness C_z=" << format_number(est.c_z) << " u_z=" << format_number(est.u_z)
          << " v_z=" << format_number(est.v_z) << " exact=" << est.exact << '\n';
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return e.kind() == ErrorKind::BackendFailure ? kBackend : kValidation;
  }
  return kOk;
}

/// parse_and_validate + run with exit-code mapping.
inline int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return run(parse_and_validate(argc, argv), out, err);
  } catch (const HelpRequested& h) {
    out << h.text;
    return kOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nrun with --help for the list of verbs and keys\n";
    return kUsage;
  } catch (const ValidationError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kBackend;
  }
}

}  // namespace rmt::cli
