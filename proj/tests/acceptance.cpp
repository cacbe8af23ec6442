// Acceptance run: one PASS/FAIL line per criterion, plus supporting detail lines.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "chlosv/cli_io.hpp"
#include "chlosv/likelihood.hpp"
#include "chlosv/particle_filter.hpp"
#include "chlosv/simulator.hpp"
#include "chlosv/weights.hpp"
#include "oracles.hpp"

using namespace chlosv;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("[%s] %d. %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
}

void note(const std::string& s) {
  std::printf("       %s\n", s.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_err(double got, long double want) {
  return static_cast<double>(std::fabs(static_cast<long double>(got) / want - 1.0L));
}

// ---------------------------------------------------------------------------
// 1. series engine against long reference sums

void criterion_series() {
  const auto t0 = Clock::now();
  CounterRng rng(101);
  int points = 0, within_20 = 0, total_evals = 0;
  double worst = 0.0;
  while (points < 100) {
    const double sigma = 0.005 + 0.095 * open_uniform(rng);
    const double mu = (open_uniform(rng) - 0.5) * sigma;
    const double open = 4.0 + open_uniform(rng);
    CounterRng path_rng(101, stream_key(Stream::kOracle, 1), static_cast<std::uint64_t>(points + 1000 * total_evals));
    ++total_evals;
    const auto bar = simulate_period(open, PeriodParams<double>{mu, sigma}, 1000, path_rng, true);
    if (!(*bar.low < std::min(open, bar.close) && *bar.high > std::max(open, bar.close))) continue;
    const double r = *bar.high - *bar.low;
    const PeriodParams<double> p{mu, sigma};

    const auto d8 = log_density_chlo(bar, p);
    const auto d9 = log_density_range_close(r, bar.open, bar.close, p);
    const auto d10 = log_density_range(r, sigma);
    const double e8 = rel_err(std::exp(d8.value), oracle::chlo_density(open, bar.close, *bar.low, *bar.high, mu, sigma));
    const double e9 = rel_err(std::exp(d9.value), oracle::range_close_density(r, open, bar.close, mu, sigma));
    const double e10 = rel_err(std::exp(d10.value), oracle::range_density(r, sigma));
    worst = std::max({worst, e8, e9, e10});
    if (d8.terms_used <= 20 && d9.terms_used <= 20 && d10.terms_used <= 20) ++within_20;
    ++points;
  }
  const double secs = seconds_since(t0);
  const bool pass = worst <= 1e-10 && within_20 >= 95 && secs < 1.0;
  report(1, "series truncation", pass,
         fmt("100 simulated interior points, worst relative error %.2e (<= 1e-10), %d/100 within 20 blocks "
             "(>= 95), %.3f s (< 1 s)",
             worst, within_20, secs));
}

// ---------------------------------------------------------------------------
// 2. Gaussian limit

double chlo_pdf(double open, double close, double low, double high, const PeriodParams<double>& p) {
  ChloObservation<double> o;
  o.open = open;
  o.close = close;
  o.low = low;
  o.high = high;
  return std::exp(log_density_chlo(o, p).value);
}

void criterion_gaussian_limit() {
  const auto t0 = Clock::now();
  CounterRng rng(202);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double sigma = 0.01 + 0.04 * open_uniform(rng);
    const double mu = (open_uniform(rng) - 0.5) * 0.5 * sigma;
    const double open = 4.0 + open_uniform(rng);
    const double close = open + mu + sigma * standard_normal(rng);
    const PeriodParams<double> p{mu, sigma};
    const double lo_end = open - 8 * sigma - 8 * std::fabs(mu), hi_end = open + 8 * sigma + 8 * std::fabs(mu);
    const double mn = std::min(open, close), mx = std::max(open, close);
    const double got = oracle::integrate(
        [&](double low) {
          return oracle::integrate([&](double high) { return chlo_pdf(open, close, low, high, p); }, mx, hi_end, 1e-9);
        },
        lo_end, mn, 1e-9);
    worst = std::max(worst, std::fabs(got / oracle::gaussian_pdf(close, open + mu, sigma) - 1.0));
  }
  const double secs = seconds_since(t0);
  report(2, "Gaussian limit", worst <= 1e-4 && secs < 60,
         fmt("50 points, worst relative error %.2e (<= 1e-4), %.1f s (< 60 s)", worst, secs));
}

// ---------------------------------------------------------------------------
// 3. marginalization chain and normalization

void criterion_chain() {
  const auto t0 = Clock::now();
  double worst89 = 0.0, worst910 = 0.0, worst_norm = 0.0;
  const double sigma = 0.02;
  for (const double rr : {0.5, 1.0, 1.5, 2.5})
    for (const double xf : {-0.6, -0.2, 0.3, 0.8})
      for (const double mf : {0.0, 0.2}) {
        const double r = rr * sigma, x = xf * r, mu = mf * sigma;
        const PeriodParams<double> p{mu, sigma};
        const double q = oracle::integrate([&](double a) { return chlo_pdf(0.0, x, a, a + r, p); },
                                           std::max(0.0, x) - r, std::min(0.0, x));
        const double d9 = std::exp(log_density_range_close(r, 0.0, x, p).value);
        worst89 = std::max(worst89, std::fabs(d9 / q - 1.0));
      }
  for (const double s : {0.01, 0.02, 0.1})
    for (const double rr : {0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0}) {
      const double r = rr * s;
      const PeriodParams<double> p{0.0, s};
      const double q = oracle::integrate(
          [&](double x) { return std::exp(log_density_range_close(r, 0.0, x, p).value); }, -r, r);
      worst910 = std::max(worst910, std::fabs(std::exp(log_density_range(r, s).value) / q - 1.0));
    }
  for (const double s : {0.01, 0.02, 0.1}) {
    const double total =
        oracle::integrate([&](double r) { return std::exp(log_density_range(r, s).value); }, 0.0, 12 * s, 1e-12);
    worst_norm = std::max(worst_norm, std::fabs(total - 1.0));
  }
  const double secs = seconds_since(t0);
  report(3, "marginalization chain", worst89 <= 1e-4 && worst910 <= 1e-4 && worst_norm <= 1e-6 && secs < 300,
         fmt("joint->range+close worst %.2e over 32 points, range+close->range worst %.2e over 24 points "
             "(<= 1e-4), |normalization - 1| worst %.2e (<= 1e-6), %.1f s (< 300 s)",
             worst89, worst910, worst_norm, secs));
}

// ---------------------------------------------------------------------------
// 4. Monte Carlo path oracle

struct BoxCheck {
  int within = 0;
  int total = 0;
  double worst_z = 0.0;
  double min_mass = 1.0;

  void add(const OracleEstimate& est, double exact) {
    const double z = std::fabs(est.probability - exact) / est.standard_error;
    worst_z = std::max(worst_z, z);
    min_mass = std::min(min_mass, exact);
    ++total;
    if (z <= 3.0) ++within;
  }
};

void criterion_oracle() {
  const auto t0 = Clock::now();
  const std::size_t paths = 1000000;
  const int steps = 10000;
  const double sigma = 0.02;

  BoxCheck joint, cmax, cmin, range;
  {
    const PeriodParams<double> p{0.004, sigma};
    const auto sample = simulate_extremes(0.0, p, paths, steps, 4004, true);
    const double w = 0.008;
    // joint boxes: 5 close windows x 4 placements of the extreme windows
    for (const double c0 : {-0.025, -0.012, -0.003, 0.006, 0.018})
      for (const auto [dl, dh] : {std::pair{0.0, 0.0}, std::pair{0.008, 0.0}, std::pair{0.0, 0.008},
                                  std::pair{0.008, 0.008}}) {
        const double c1 = c0 + 0.006;
        const double l1 = std::min(0.0, c0) - dl, l0 = l1 - w;
        const double h0 = std::max(0.0, c1) + dh, h1 = h0 + w;
        const ExtremesBox box{l0, l1, h0, h1, c0, c1};
        const auto est = box_probability(sample, [&](double l, double h, double c) { return box.contains(l, h, c); });
        const double exact = oracle::integrate(
            [&](double c) {
              return oracle::integrate(
                  [&](double l) {
                    return oracle::integrate([&](double h) { return chlo_pdf(0.0, c, l, h, p); }, h0, h1, 1e-9);
                  },
                  l0, l1, 1e-9);
            },
            c0, c1, 1e-9);
        joint.add(est, exact);
      }
    // single-extreme marginals: 4 close windows x 5 extreme offsets
    for (const double c0 : {-0.03, -0.014, 0.002, 0.018})
      for (const double d : {0.0, 0.006, 0.012, 0.02, 0.03}) {
        const double c1 = c0 + w;
        const double h0 = std::max(0.0, c1) + d, h1 = h0 + w;
        const auto est_max =
            box_probability(sample, [&](double, double h, double c) { return h >= h0 && h < h1 && c >= c0 && c < c1; });
        const double exact_max = oracle::integrate(
            [&](double c) {
              return oracle::integrate(
                  [&](double h) {
                    ChloObservation<double> o;
                    o.close = c;
                    o.high = h;
                    return std::exp(log_density_close_max(o, p));
                  },
                  h0, h1, 1e-10);
            },
            c0, c1, 1e-10);
        cmax.add(est_max, exact_max);

        const double l1 = std::min(0.0, c0) - d, l0 = l1 - w;
        const auto est_min =
            box_probability(sample, [&](double l, double, double c) { return l >= l0 && l < l1 && c >= c0 && c < c1; });
        const double exact_min = oracle::integrate(
            [&](double c) {
              return oracle::integrate(
                  [&](double l) {
                    ChloObservation<double> o;
                    o.close = c;
                    o.low = l;
                    return std::exp(log_density_close_min(o, p));
                  },
                  l0, l1, 1e-10);
            },
            c0, c1, 1e-10);
        cmin.add(est_min, exact_min);
      }
  }
  {
    // the range law is driftless, so its sample is drawn at zero drift
    const auto sample = simulate_extremes(0.0, PeriodParams<double>{0.0, sigma}, paths, steps, 4005, true);
    // 0.7 sigma to 4.2 sigma; below about 0.5 sigma the range has mass < 1e-8, too little for a 3 SE test
    for (int i = 0; i < 20; ++i) {
      const double r0 = 0.014 + 0.0035 * i, r1 = r0 + 0.0035;
      const auto est = box_probability(sample, [&](double l, double h, double) { return h - l >= r0 && h - l < r1; });
      const double exact =
          oracle::integrate([&](double r) { return std::exp(log_density_range(r, sigma).value); }, r0, r1, 1e-12);
      range.add(est, exact);
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = joint.within == 20 && cmax.within == 20 && cmin.within == 20 && range.within == 20 && secs < 900;
  report(4, "Monte Carlo oracle", pass,
         fmt("10^6 paths x 10^4 steps; boxes within 3 SE: joint %d/20, close+max %d/20, close+min %d/20, "
             "range %d/20; %.0f s (< 900 s)",
             joint.within, cmax.within, cmin.within, range.within, secs));
  note(fmt("largest |MC - exact| / SE: joint %.2f, close+max %.2f, close+min %.2f, range %.2f", joint.worst_z,
           cmax.worst_z, cmin.worst_z, range.worst_z));
  note(fmt("smallest expected hit count per family: joint %.0f, close+max %.0f, close+min %.0f, range %.0f",
           joint.min_mass * paths, cmax.min_mass * paths, cmin.min_mass * paths, range.min_mass * paths));
}

// ---------------------------------------------------------------------------
// 5-7. simulation study

void criteria_study() {
  SimConfig sc;
  sc.n_datasets = 20;
  FilterConfig fc;  // N = 30000, discount 0.95
  const auto t0 = Clock::now();
  const auto study = run_study(sc, fc, default_model_pairs());
  const double secs = seconds_since(t0);

  int covered = 0, periods = 0, exsv_wins = 0, drift_wins = 0;
  bool ess_ok = true;
  double min_ess = 1e300;
  for (const auto& ds : study.datasets) {
    const auto& ex = ds.fit(ModelVariant::kExsv);
    covered += ex.covered;
    periods += static_cast<int>(ds.true_sigma.size());
    if (ex.rmsd < ds.fit(ModelVariant::kStsv).rmsd) ++exsv_wins;
    if (std::fabs(ex.final_mu_mean - sc.theta_true.mu) < std::fabs(ds.fit(ModelVariant::kRcsv).final_mu_mean -
                                                                     sc.theta_true.mu))
      ++drift_wins;
    for (const auto& f : ds.fits) {
      ess_ok = ess_ok && f.ess_valid;
      min_ess = std::min(min_ess, f.min_ess);
    }
  }
  const double coverage = static_cast<double>(covered) / periods;
  report(5, "filter coverage", coverage >= 0.80 && coverage <= 0.97 && secs < 20 * 60,
         fmt("EXSV 90%% intervals cover true sigma in %d/%d period-replicates = %.3f (in [0.80, 0.97]); "
             "study with all four models %.0f s (< 1200 s)",
             covered, periods, coverage, secs));

  auto row = [&](ModelVariant a, ModelVariant b) {
    for (const auto& r : study.rows)
      if (r.pair.numerator == a && r.pair.denominator == b) return r;
    return RatioRow{};
  };
  const auto st_ra = row(ModelVariant::kStsv, ModelVariant::kRasv);
  const auto rc_ex = row(ModelVariant::kRcsv, ModelVariant::kExsv);
  const auto ra_ex = row(ModelVariant::kRasv, ModelVariant::kExsv);
  const auto ra_rc = row(ModelVariant::kRasv, ModelVariant::kRcsv);
  const bool table_ok = st_ra.rmsd_median >= 1.1 && st_ra.rmsd_median <= 1.8 && ra_ex.rmsd_median >= 0.95 &&
                        rc_ex.rmsd_median >= 0.90 && secs < 45 * 60;
  report(6, "model comparison ratios", table_ok,
         fmt("median RMSD ratio STSV/RASV %.3f (in [1.1, 1.8]), RASV/EXSV %.3f (>= 0.95), RCSV/EXSV %.3f "
             "(>= 0.90); 4 models x 20 datasets in %.0f s (< 2700 s)",
             st_ra.rmsd_median, ra_ex.rmsd_median, rc_ex.rmsd_median, secs));
  for (const auto& r : {st_ra, ra_rc, rc_ex, ra_ex})
    note(fmt("%-10s RMSD %.3f (%.3f, %.3f)  MAD %.3f (%.3f, %.3f)", pair_label(r.pair).c_str(), r.rmsd_median,
             r.rmsd_q05, r.rmsd_q95, r.mad_median, r.mad_q05, r.mad_q95));
  note(fmt("property: EXSV RMSD below STSV in %d/20 datasets (>= 12 expected)", exsv_wins));
  note(fmt("property: final drift estimate closer to truth for EXSV than RCSV in %d/20 datasets", drift_wins));

  // unit-level ESS identities
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(30000, 1.0 / 30000);
  Eigen::VectorXd degenerate = Eigen::VectorXd::Zero(30000);
  degenerate(123) = 1.0;
  const double e_uniform = ess(uniform), e_degenerate = ess(degenerate);
  const bool unit_ok = e_uniform == 30000.0 && std::fabs(e_degenerate - 1.0) < 1e-9;
  report(7, "effective sample size", ess_ok && unit_ok,
         fmt("every period of all 80 runs has 0 < ESS <= N (min %.1f); uniform cloud ESS = %.1f, degenerate cloud "
             "ESS = %.6f",
             min_ess, e_uniform, e_degenerate));
}

// ---------------------------------------------------------------------------
// 8. EXSV without extremes equals STSV

void criterion_degradation() {
  SimConfig sc;
  auto bars = simulate_dataset(sc, 0).bars;
  for (auto& b : bars) {
    b.low.reset();
    b.high.reset();
  }
  FilterConfig fc;
  fc.variant = ModelVariant::kExsv;
  const auto ex = run_filter(bars, fc);
  fc.variant = ModelVariant::kStsv;
  const auto st = run_filter(bars, fc);
  std::ostringstream a, b;
  const auto dates = weekly_dates(bars.size());
  write_snapshots(a, dates, ex);
  write_snapshots(b, dates, st);
  report(8, "degradation identity", a.str() == b.str(),
         fmt("EXSV with every extreme missing vs STSV, 156 periods, N = 30000: snapshot files %s",
             a.str() == b.str() ? "byte-identical" : "differ"));
}

// ---------------------------------------------------------------------------
// 9-10. CLI

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CHLOSV_CLI) + " " + args;
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void criterion_cli_determinism(const fs::path& dir) {
  struct Job {
    std::string name, args;
  };
  const std::string sim = (dir / "sim.csv").string();
  const std::vector<Job> jobs = {
      {"simulate", "simulate --seed 7 --truth " + (dir / "truth_%.csv").string() + " -o " + (dir / "sim_%.csv").string()},
      {"fit", "fit --input " + sim + " --particles 5000 --seed 3 -o " + (dir / "fit_%.csv").string()},
      {"study", "study --set n_datasets=2 --set n_periods=30 --particles 1000 -o " + (dir / "study_%.csv").string()},
      {"oracle", "oracle --set paths=20000 --set oracle_grid=1000 --set close_min=0 --set close_max=0.01 -o " +
                     (dir / "oracle_%.csv").string()},
  };
  if (run_cli("simulate --seed 7 -o " + sim) != 0) {
    report(9, "CLI determinism", false, "could not create the input dataset");
    return;
  }
  bool all_same = true;
  std::string detail;
  for (const auto& job : jobs) {
    std::string outs[2];
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      std::string args = job.args;
      for (std::size_t pos; (pos = args.find('%')) != std::string::npos;) args.replace(pos, 1, rep ? "b" : "a");
      ok = ok && run_cli(args) == 0;
      std::string key = job.name == "simulate" ? "sim" : job.name;
      outs[rep] = slurp(dir / (key + (rep ? "_b.csv" : "_a.csv")));
    }
    const bool same = ok && !outs[0].empty() && outs[0] == outs[1];
    if (job.name == "simulate") {
      const bool truth_same = slurp(dir / "truth_a.csv") == slurp(dir / "truth_b.csv");
      all_same = all_same && truth_same;
    }
    all_same = all_same && same;
    detail += job.name + (same ? " identical; " : " DIFFERS; ");
  }
  report(9, "CLI determinism", all_same, detail + "each subcommand run twice with the same config and seed");
}

void criterion_ingestion(const fs::path& dir) {
  // 520 weekly bars in the layout of a vendor export: weekend gaps between close and next open, and a few
  // weeks without extremes
  SimConfig sc;
  sc.n_periods = 520;
  const auto ds = simulate_dataset(sc, 77);
  const auto dates = weekly_dates(520, "2000-01-07");
  const fs::path in = dir / "weekly520.csv";
  {
    std::ofstream os(in, std::ios::binary);
    os << "date,open,high,low,close\n";
    CounterRng rng(520);
    double gap = 1.0;
    for (std::size_t t = 0; t < ds.prices.size(); ++t) {
      const auto& p = ds.prices[t];
      const double g = gap;
      os << dates[t] << ',' << format_double(p.open * g) << ',';
      if (t % 37 == 5)
        os << ",";
      else
        os << format_double(p.high * g) << ',' << format_double(p.low * g);
      os << ',' << format_double(p.close * g) << '\n';
      gap *= 1.0 + 0.002 * standard_normal(rng);
      (void)g;
    }
  }
  const fs::path out = dir / "weekly520_fit.csv";
  const int rc = run_cli("fit --input " + in.string() + " --particles 10000 --seed 5 -o " + out.string());
  const std::string body = slurp(out);
  const long rows = std::count(body.begin(), body.end(), '\n') - 1;
  bool ess_ok = rc == 0;
  std::istringstream is(body);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 19) {
      ess_ok = false;
      break;
    }
    const double e = std::stod(f[16]);
    ess_ok = ess_ok && e > 0 && e <= 10000 && std::isfinite(std::stod(f[1]));
  }
  report(10, "empirical results out of scope", rc == 0 && rows == 520 && ess_ok,
         fmt("the empirical S&P 500 / VIX figures need proprietary data and are not reproduced; the ingestion path "
             "is exercised instead: 520-row weekly CSV with weekend gaps and missing extremes -> exit %d, %ld "
             "snapshot rows, ESS valid throughout",
             rc, rows));
}

}  // namespace

int main() {
  const fs::path dir = fs::path(CHLOSV_TMP);
  fs::create_directories(dir);
  const auto t0 = Clock::now();
  const std::vector<std::function<void()>> steps = {
      criterion_series,
      criterion_gaussian_limit,
      criterion_chain,
      criterion_oracle,
      criteria_study,
      criterion_degradation,
      [&] { criterion_cli_determinism(dir); },
      [&] { criterion_ingestion(dir); },
  };
  for (const auto& s : steps) {
    try {
      s();
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] error: %s\n", e.what());
    }
  }
  std::printf("%d criterion failure(s); total %.0f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
