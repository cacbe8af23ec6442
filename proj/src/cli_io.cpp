#include "chlosv/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "chlosv/errors.hpp"

namespace chlosv {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool valid_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return false;
  const std::chrono::year_month_day ymd{std::chrono::year{std::stoi(s.substr(0, 4))},
                                        std::chrono::month{static_cast<unsigned>(std::stoi(s.substr(5, 2)))},
                                        std::chrono::day{static_cast<unsigned>(std::stoi(s.substr(8, 2)))}};
  return ymd.ok();
}

double to_double(const std::string& key, const std::string& value) {
  const auto v = parse_number(value);
  if (!v) throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  return *v;
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("config key '" + key + "': expected an integer");
  return v;
}

int to_int32(const std::string& key, const std::string& value) {
  const auto v = to_int(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError("config key '" + key + "': integer out of range");
  return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  std::string s = value;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [&](const char* k, auto member) {
      t[k] = [member](RunConfig& c, const std::string& key, const std::string& v) { member(c) = to_double(key, v); };
    };
    auto i32 = [&](const char* k, auto member) {
      t[k] = [member](RunConfig& c, const std::string& key, const std::string& v) { member(c) = to_int32(key, v); };
    };
    auto flag = [&](const char* k, auto member) {
      t[k] = [member](RunConfig& c, const std::string& key, const std::string& v) { member(c) = to_bool(key, v); };
    };
    auto str = [&](const char* k, auto member) {
      t[k] = [member](RunConfig& c, const std::string&, const std::string& v) { member(c) = v; };
    };

    t["model"] = [](RunConfig& c, const std::string&, const std::string& v) { c.model = parse_variant(v); };
    i32("particles", [](RunConfig& c) -> int& { return c.particles; });
    num("discount", [](RunConfig& c) -> double& { return c.discount; });
    t["seed"] = [](RunConfig& c, const std::string& key, const std::string& v) {
      const auto s = to_int(key, v);
      if (s < 0) throw ConfigError("config key 'seed': must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    };
    num("d_mu", [](RunConfig& c) -> double& { return c.prior.d_mu; });
    num("D_mu", [](RunConfig& c) -> double& { return c.prior.D_mu; });
    num("d_alpha", [](RunConfig& c) -> double& { return c.prior.d_alpha; });
    num("D_alpha", [](RunConfig& c) -> double& { return c.prior.D_alpha; });
    num("q_phi", [](RunConfig& c) -> double& { return c.prior.q_phi; });
    num("r_phi", [](RunConfig& c) -> double& { return c.prior.r_phi; });
    num("u_tau", [](RunConfig& c) -> double& { return c.prior.u_tau; });
    num("v_tau", [](RunConfig& c) -> double& { return c.prior.v_tau; });
    num("rel_tol", [](RunConfig& c) -> double& { return c.series.rel_tol; });
    i32("max_terms", [](RunConfig& c) -> int& { return c.series.max_terms; });
    num("resample_ess_fraction", [](RunConfig& c) -> double& { return c.resample_ess_fraction; });
    flag("weekend_effect", [](RunConfig& c) -> bool& { return c.weekend_effect; });
    flag("strict", [](RunConfig& c) -> bool& { return c.strict; });
    str("input", [](RunConfig& c) -> std::string& { return c.input; });
    str("output", [](RunConfig& c) -> std::string& { return c.output; });
    str("truth_output", [](RunConfig& c) -> std::string& { return c.truth_output; });
    i32("n_periods", [](RunConfig& c) -> int& { return c.n_periods; });
    i32("grid_nodes", [](RunConfig& c) -> int& { return c.grid_nodes; });
    num("mu", [](RunConfig& c) -> double& { return c.mu; });
    num("alpha", [](RunConfig& c) -> double& { return c.alpha; });
    num("phi", [](RunConfig& c) -> double& { return c.phi; });
    num("tau", [](RunConfig& c) -> double& { return c.tau; });
    num("s0", [](RunConfig& c) -> double& { return c.s0; });
    i32("n_datasets", [](RunConfig& c) -> int& { return c.n_datasets; });
    i32("dataset", [](RunConfig& c) -> int& { return c.dataset; });
    str("pairs", [](RunConfig& c) -> std::string& { return c.pairs; });
    num("oracle_mu", [](RunConfig& c) -> double& { return c.oracle_mu; });
    num("oracle_sigma", [](RunConfig& c) -> double& { return c.oracle_sigma; });
    t["paths"] = [](RunConfig& c, const std::string& key, const std::string& v) {
      c.paths = to_int(key, v);
      if (c.paths < 1) throw ConfigError("config key 'paths': must be positive");
    };
    i32("oracle_grid", [](RunConfig& c) -> int& { return c.oracle_grid; });
    flag("bridge", [](RunConfig& c) -> bool& { return c.bridge; });
    num("low_min", [](RunConfig& c) -> double& { return c.box.low_min; });
    num("low_max", [](RunConfig& c) -> double& { return c.box.low_max; });
    num("high_min", [](RunConfig& c) -> double& { return c.box.high_min; });
    num("high_max", [](RunConfig& c) -> double& { return c.box.high_max; });
    num("close_min", [](RunConfig& c) -> double& { return c.box.close_min; });
    num("close_max", [](RunConfig& c) -> double& { return c.box.close_max; });
    return t;
  }();
  return table;
}

std::ofstream open_output(const std::string& path) {
  if (path.empty()) throw ConfigError("no output path given (--output)");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot open output file '" + path + "'");
  return os;
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const FilterDegeneracy& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InvalidInput& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitOther;
  }
}

}  // namespace

std::vector<BarRecord> parse_bars(const std::filesystem::path& path, const ParseOptions& opts,
                                  std::vector<std::string>* warnings) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open bar file '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line)) throw DataError("bar file '" + path.string() + "' is empty");
  std::string header = trim(line);
  header.erase(std::remove(header.begin(), header.end(), ' '), header.end());
  if (header != "date,open,high,low,close")
    throw DataError("line 1: expected header 'date,open,high,low,close', got '" + trim(line) + "'");

  std::vector<BarRecord> out;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto f = split(trim(line), ',');
    if (f.size() != 5) throw DataError(where + "expected 5 fields, got " + std::to_string(f.size()));
    BarRecord r;
    r.date = f[0];
    if (!valid_iso_date(r.date)) throw DataError(where + "invalid date '" + r.date + "'");
    auto price = [&](const std::string& field, const char* name) -> std::optional<double> {
      if (field.empty()) return std::nullopt;
      const auto v = parse_number(field);
      if (!v) throw DataError(where + "malformed " + name + " '" + field + "'");
      if (!(*v > 0.0)) throw DataError(where + name + " must be positive");
      return v;
    };
    const auto open = price(f[1], "open");
    const auto close = price(f[4], "close");
    if (!open || !close) throw DataError(where + "open and close are required");
    r.open = *open;
    r.close = *close;
    r.high = price(f[2], "high");
    r.low = price(f[3], "low");

    std::string violation;
    if (r.high && *r.high < std::max(r.open, r.close)) violation = "high below max(open, close)";
    if (r.low && *r.low > std::min(r.open, r.close)) violation = "low above min(open, close)";
    if (r.high && r.low && *r.low > *r.high) violation = "low above high";
    if (!violation.empty()) {
      if (opts.strict) throw DataError(where + violation);
      if (warnings) warnings->push_back(where + violation + "; extremes treated as missing");
      r.high.reset();
      r.low.reset();
    }
    out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const BarRecord& a, const BarRecord& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].date == out[i - 1].date) throw DataError("duplicate date " + out[i].date);
  return out;
}

std::vector<ChloObservation<double>> to_observations(const std::vector<BarRecord>& bars) {
  std::vector<ChloObservation<double>> out;
  out.reserve(bars.size());
  for (const auto& b : bars) {
    ChloObservation<double> o;
    o.open = std::log(b.open);
    o.close = std::log(b.close);
    const bool zero_range = b.high && b.low && *b.high == *b.low;
    if (b.high && !zero_range) o.high = std::log(*b.high);
    if (b.low && !zero_range) o.low = std::log(*b.low);
    out.push_back(o);
  }
  return out;
}

std::vector<std::string> weekly_dates(std::size_t count, const std::string& first) {
  if (!valid_iso_date(first)) throw ConfigError("invalid start date '" + first + "'");
  using namespace std::chrono;
  sys_days day = year_month_day{year{std::stoi(first.substr(0, 4))},
                                month{static_cast<unsigned>(std::stoi(first.substr(5, 2)))},
                                std::chrono::day{static_cast<unsigned>(std::stoi(first.substr(8, 2)))}};
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    out.emplace_back(buf);
    day += days{7};
  }
  return out;
}

FilterConfig RunConfig::filter_config() const {
  FilterConfig f;
  f.variant = model;
  f.particles = particles;
  f.discount = discount;
  f.seed = seed;
  f.prior = prior;
  f.series = series;
  f.weekend_effect = weekend_effect;
  f.resample_ess_fraction = resample_ess_fraction;
  f.validate();
  return f;
}

SimConfig RunConfig::sim_config() const {
  SimConfig s;
  s.n_periods = n_periods;
  s.grid_nodes = grid_nodes;
  s.theta_true = {mu, alpha, phi, tau * tau};
  s.s0 = s0;
  s.n_datasets = n_datasets;
  s.seed = seed;
  s.validate();
  return s;
}

std::vector<ModelPair> RunConfig::model_pairs() const {
  std::vector<ModelPair> out;
  for (const auto& item : split(pairs, ',')) {
    const auto parts = split(item, '/');
    if (parts.size() != 2) throw ConfigError("pairs: expected entries like 'stsv/rasv', got '" + item + "'");
    out.push_back({parse_variant(parts[0]), parse_variant(parts[1])});
  }
  if (out.empty()) throw ConfigError("pairs: empty list");
  return out;
}

void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& t = setters();
  const auto it = t.find(key);
  if (it == t.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, trim(value));
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      apply_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_bars(std::ostream& os, const std::vector<std::string>& dates, const std::vector<PriceBar>& prices) {
  if (dates.size() != prices.size()) throw InvalidInput("write_bars: size mismatch");
  os << "date,open,high,low,close\n";
  for (std::size_t i = 0; i < prices.size(); ++i) {
    const auto& p = prices[i];
    os << dates[i] << ',' << format_double(p.open) << ',' << format_double(p.high) << ',' << format_double(p.low)
       << ',' << format_double(p.close) << '\n';
  }
}

void write_truth(std::ostream& os, const std::vector<std::string>& dates, const std::vector<double>& true_sigma) {
  if (dates.size() != true_sigma.size()) throw InvalidInput("write_truth: size mismatch");
  os << "date,true_sigma\n";
  for (std::size_t i = 0; i < dates.size(); ++i) os << dates[i] << ',' << format_double(true_sigma[i]) << '\n';
}

void write_snapshots(std::ostream& os, const std::vector<std::string>& dates,
                     const std::vector<FilterSnapshot>& snaps) {
  if (dates.size() != snaps.size()) throw InvalidInput("write_snapshots: size mismatch");
  os << "date,sigma_mean,sigma_q05,sigma_q95,mu_mean,mu_q05,mu_q95,alpha_mean,alpha_q05,alpha_q95,"
        "phi_mean,phi_q05,phi_q95,tau2_mean,tau2_q05,tau2_q95,ess,neg_inf_loglik,series_failures\n";
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const auto& s = snaps[i];
    os << dates[i];
    for (const Summary* x : {&s.sigma, &s.mu, &s.alpha, &s.phi, &s.tau2})
      os << ',' << format_double(x->mean) << ',' << format_double(x->q05) << ',' << format_double(x->q95);
    os << ',' << format_double(s.ess) << ',' << s.neg_inf_loglik << ',' << s.series_failures << '\n';
  }
}

void write_study_table(std::ostream& os, const std::vector<RatioRow>& rows) {
  os << "models,rmsd_median,rmsd_q05,rmsd_q95,mad_median,mad_q05,mad_q95\n";
  for (const auto& r : rows)
    os << pair_label(r.pair) << ',' << format_double(r.rmsd_median) << ',' << format_double(r.rmsd_q05) << ','
       << format_double(r.rmsd_q95) << ',' << format_double(r.mad_median) << ',' << format_double(r.mad_q05) << ','
       << format_double(r.mad_q95) << '\n';
}

int run_fit(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    const FilterConfig fc = cfg.filter_config();
    if (cfg.input.empty()) throw ConfigError("fit needs --input");
    std::vector<std::string> warnings;
    const auto records = parse_bars(cfg.input, ParseOptions{cfg.strict}, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    if (records.empty()) throw DataError("no bars in '" + cfg.input + "'");
    const auto snaps = run_filter(to_observations(records), fc);
    std::vector<std::string> dates;
    for (const auto& r : records) dates.push_back(r.date);
    auto os = open_output(cfg.output);
    write_snapshots(os, dates, snaps);
  });
}

int run_simulate(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    const SimConfig sc = cfg.sim_config();
    if (cfg.dataset < 0) throw ConfigError("dataset must be non-negative");
    const SimDataset ds = simulate_dataset(sc, static_cast<std::uint64_t>(cfg.dataset));
    const auto dates = weekly_dates(ds.prices.size());
    auto os = open_output(cfg.output);
    write_bars(os, dates, ds.prices);
    if (!cfg.truth_output.empty()) {
      std::vector<double> sigma;
      for (const double ls : ds.true_log_sigma) sigma.push_back(std::exp(ls));
      auto ts = open_output(cfg.truth_output);
      write_truth(ts, dates, sigma);
    }
  });
}

int run_study(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    const auto result = run_study(cfg.sim_config(), cfg.filter_config(), cfg.model_pairs());
    auto os = open_output(cfg.output);
    write_study_table(os, result.rows);
  });
}

int run_oracle(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    if (!(cfg.oracle_sigma > 0.0)) throw ConfigError("oracle_sigma must be positive");
    if (cfg.oracle_grid < 2) throw ConfigError("oracle_grid must be >= 2");
    const PeriodParams<double> p{cfg.oracle_mu, cfg.oracle_sigma};
    const auto est = mc_density_oracle(p, cfg.box, static_cast<std::size_t>(cfg.paths), cfg.oracle_grid, cfg.seed,
                                       cfg.bridge);
    auto os = open_output(cfg.output);
    os << "probability,standard_error,paths,low_min,low_max,high_min,high_max,close_min,close_max\n";
    os << format_double(est.probability) << ',' << format_double(est.standard_error) << ',' << cfg.paths;
    for (const double b : {cfg.box.low_min, cfg.box.low_max, cfg.box.high_min, cfg.box.high_max, cfg.box.close_min,
                           cfg.box.close_max})
      os << ',' << format_double(b);
    os << '\n';
  });
}

}  // namespace chlosv
