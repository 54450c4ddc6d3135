#include "qhl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "json_fields.hpp"
#include "qhl/errors.hpp"
#include "qhl/parallel.hpp"
#include "qhl/qhawkes.hpp"
#include "qhl/scaling.hpp"

namespace qhl {

namespace {

// Sum whose value is unchanged when x is reversed: mirrored pairs are added
// first (commutative in floating point), then accumulated in a fixed order.
double symmetric_sum(const double* x, long m) {
  double s = 0.0;
  for (long i = 0; i < m / 2; ++i) s += x[i] + x[m - 1 - i];
  if (m % 2) s += x[m / 2];
  return s;
}

double symmetric_sum(const std::vector<double>& x) { return symmetric_sum(x.data(), static_cast<long>(x.size())); }

struct Fit {
  double slope, r2;
};

Fit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return {slope, r2};
}

}  // namespace

// ---------------------------------------------------------------------------
// Hoelder

std::string HolderEstimate::describe() const {
  char buf[64];
  if (smooth) return ">= 1 (smooth)";
  std::snprintf(buf, sizeof buf, "%.4f", H);
  return buf;
}

HolderEstimate holder_estimate_pooled(const std::vector<Eigen::VectorXd>& paths, const HolderOptions& opt) {
  if (paths.empty()) throw InsufficientDataError("holder_estimate: no paths");
  const Eigen::Index points = paths.front().size();
  for (const auto& p : paths) {
    if (p.size() != points) throw ConfigError("path_length", "holder_estimate: pooled paths must share one grid");
  }
  if (points < 256) throw InsufficientDataError("holder_estimate: need at least 256 grid points");
  if (opt.q.empty()) throw ConfigError("q_list", "holder_estimate: q list is empty");
  for (double q : opt.q) {
    if (q != 0.5 && q != 1.0 && q != 2.0) throw ConfigError("q_list", "holder_estimate: q must be 0.5, 1 or 2");
  }
  const int n = static_cast<int>(points - 1);
  const int max_lag = opt.max_lag > 0 ? opt.max_lag : n / 8;
  if (opt.min_lag < 1 || max_lag > n / 8 || opt.min_lag > max_lag) {
    throw ConfigError("lag_range", "holder_estimate: lags must lie within [1, n/8]");
  }

  HolderEstimate out;
  out.q = opt.q;
  out.n_paths = static_cast<int>(paths.size());
  for (int l = opt.min_lag; l <= max_lag; l *= 2) out.lags.push_back(l);
  if (out.lags.size() < 3) throw ConfigError("lag_range", "holder_estimate: need at least 3 dyadic lags");

  std::vector<double> logl;
  for (int l : out.lags) logl.push_back(std::log(static_cast<double>(l)));

  out.r2 = 1.0;
  double sum_exp = 0.0;
  for (double q : opt.q) {
    std::vector<double> logm;
    for (int l : out.lags) {
      double acc = 0.0;
      for (const auto& p : paths) {
        double s = 0.0;
        for (int i = 0; i + l <= n; ++i) {
          const double d = std::abs(p[i + l] - p[i]);
          s += q == 2.0 ? d * d : q == 1.0 ? d : std::sqrt(d);
        }
        acc += s / (n - l + 1);
      }
      acc /= static_cast<double>(paths.size());
      if (!(acc > 0.0) || !std::isfinite(acc)) {
        throw DomainError("holder_estimate: path is constant at lag " + std::to_string(l) +
                          "; the exponent is undefined");
      }
      logm.push_back(std::log(acc));
    }
    const Fit f = least_squares(logl, logm);
    out.slopes.push_back(f.slope);
    out.exponents.push_back(f.slope / q);
    out.r2_per_q.push_back(f.r2);
    out.r2 = std::min(out.r2, f.r2);
    sum_exp += f.slope / q;
  }
  out.H = sum_exp / static_cast<double>(opt.q.size());
  out.smooth = out.H >= 0.99;
  return out;
}

HolderEstimate holder_estimate(const Eigen::VectorXd& path, const HolderOptions& opt) {
  return holder_estimate_pooled(std::vector<Eigen::VectorXd>{path}, opt);
}

// ---------------------------------------------------------------------------
// Weak Zumbach

namespace {

// Per window end: a = r^2 past, b = RV future, c = RV past, d = r^2 future.
struct WindowSeries {
  std::vector<double> a, b, c, d;
  std::size_t size() const { return a.size(); }
};

// Sufficient statistics of one path (or block).
struct Moments {
  double n = 0, sa = 0, sb = 0, sab = 0, sc = 0, sd = 0, scd = 0;
  Moments& operator+=(const Moments& o) {
    n += o.n;
    sa += o.sa;
    sb += o.sb;
    sab += o.sab;
    sc += o.sc;
    sd += o.sd;
    scd += o.scd;
    return *this;
  }
  double statistic() const {
    const double cov1 = sab / n - (sa / n) * (sb / n);
    const double cov2 = scd / n - (sc / n) * (sd / n);
    return cov1 - cov2;
  }
};

void check_zumbach_options(const ZumbachOptions& opt) {
  if (opt.sub_window < 1 || opt.tau < opt.sub_window || opt.tau % opt.sub_window != 0) {
    throw ConfigError("window", "weak_zumbach: tau must be a positive multiple of the sub-window");
  }
  if (!(opt.burn_in >= 0.0 && opt.burn_in < 1.0)) throw ConfigError("burn_in", "weak_zumbach: burn_in in [0, 1)");
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw ConfigError("level", "weak_zumbach: level in (0, 1)");
  if (opt.n_boot < 1) throw ConfigError("n_boot", "weak_zumbach: n_boot must be positive");
}

WindowSeries window_series(const Eigen::VectorXd& P, const Eigen::VectorXd& V, double dt, const ZumbachOptions& opt) {
  const long n = static_cast<long>(P.size()) - 1;
  const int tau = opt.tau, sw = opt.sub_window;
  if (opt.proxy == VolProxy::TrueV && V.size() != P.size()) {
    throw ConfigError("path_length", "weak_zumbach: variance path must match the price grid");
  }
  if (4L * tau >= n) throw ConfigError("window", "weak_zumbach: tau must be below horizon / 4");
  const long start = static_cast<long>(std::floor(opt.burn_in * n));

  std::vector<double> buf(std::max(tau / sw, tau));
  auto rv = [&](long s, long e) {
    if (opt.proxy == VolProxy::Realized) {
      long m = 0;
      for (long u = s; u < e; u += sw) {
        const double r = P[u + sw] - P[u];
        buf[m++] = r * r;
      }
      return symmetric_sum(buf.data(), m);
    }
    long m = 0;
    for (long u = s; u < e; ++u) buf[m++] = 0.5 * (V[u] + V[u + 1]) * dt;
    return symmetric_sum(buf.data(), m);
  };

  WindowSeries w;
  for (long t = start + tau; t + tau <= n; ++t) {
    const double rp = P[t] - P[t - tau], rf = P[t + tau] - P[t];
    w.a.push_back(rp * rp);
    w.b.push_back(rv(t, t + tau));
    w.c.push_back(rv(t - tau, t));
    w.d.push_back(rf * rf);
  }
  return w;
}

Moments moments(const WindowSeries& w) {
  const std::size_t m = w.size();
  std::vector<double> ab(m), cd(m);
  for (std::size_t i = 0; i < m; ++i) {
    ab[i] = w.a[i] * w.b[i];
    cd[i] = w.c[i] * w.d[i];
  }
  Moments s;
  s.n = static_cast<double>(m);
  s.sa = symmetric_sum(w.a);
  s.sb = symmetric_sum(w.b);
  s.sab = symmetric_sum(ab);
  s.sc = symmetric_sum(w.c);
  s.sd = symmetric_sum(w.d);
  s.scd = symmetric_sum(cd);
  return s;
}

void percentile_ci(std::vector<double>& boot, double level, ZumbachResult& out) {
  std::sort(boot.begin(), boot.end());
  const double lo = 0.5 * (1.0 - level), hi = 1.0 - lo;
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(boot.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(pos));
    const double f = pos - static_cast<double>(i);
    return i + 1 < boot.size() ? boot[i] * (1.0 - f) + boot[i + 1] * f : boot[i];
  };
  out.ci_low = q(lo);
  out.ci_high = q(hi);
}

std::size_t draw_index(RandomStream& rng, std::size_t m) {
  return std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(m)), m - 1);
}

}  // namespace

ZumbachResult weak_zumbach(const Eigen::VectorXd& price, const Eigen::VectorXd& variance, double dt,
                           const ZumbachOptions& opt) {
  check_zumbach_options(opt);
  const WindowSeries w = window_series(price, variance, dt, opt);
  const std::size_t m = w.size();
  if (m < 30) throw InsufficientDataError("weak_zumbach: fewer than 30 windows (" + std::to_string(m) + ")");

  ZumbachResult out;
  out.statistic = moments(w).statistic();
  out.level = opt.level;
  out.tau = opt.tau;
  out.tau_time = opt.tau * dt;
  out.n_windows = static_cast<long>(m);
  out.n_paths = 1;
  out.bootstrap = "moving_block";

  // Block sums from prefix sums of the six series.
  const std::size_t L = std::min<std::size_t>(static_cast<std::size_t>(opt.tau), m);
  std::vector<Moments> prefix(m + 1);
  for (std::size_t i = 0; i < m; ++i) {
    Moments one{1.0, w.a[i], w.b[i], w.a[i] * w.b[i], w.c[i], w.d[i], w.c[i] * w.d[i]};
    prefix[i + 1] = prefix[i];
    prefix[i + 1] += one;
  }
  auto block = [&](std::size_t s) {
    Moments r = prefix[s + L];
    r.n -= prefix[s].n;
    r.sa -= prefix[s].sa;
    r.sb -= prefix[s].sb;
    r.sab -= prefix[s].sab;
    r.sc -= prefix[s].sc;
    r.sd -= prefix[s].sd;
    r.scd -= prefix[s].scd;
    return r;
  };
  const std::size_t n_blocks = (m + L - 1) / L, n_starts = m - L + 1;
  RandomStream rng(opt.seed, 0x5a6b);
  std::vector<double> boot(static_cast<std::size_t>(opt.n_boot));
  for (auto& v : boot) {
    Moments acc;
    for (std::size_t b = 0; b < n_blocks; ++b) acc += block(draw_index(rng, n_starts));
    v = acc.statistic();
  }
  percentile_ci(boot, opt.level, out);
  return out;
}

ZumbachResult weak_zumbach_pooled(const std::vector<Eigen::VectorXd>& prices,
                                  const std::vector<Eigen::VectorXd>& variances, double dt,
                                  const ZumbachOptions& opt) {
  check_zumbach_options(opt);
  if (prices.empty()) throw InsufficientDataError("weak_zumbach: no paths");
  if (prices.size() == 1) {
    return weak_zumbach(prices[0], variances.empty() ? Eigen::VectorXd() : variances[0], dt, opt);
  }
  if (opt.proxy == VolProxy::TrueV && variances.size() != prices.size()) {
    throw ConfigError("path_length", "weak_zumbach: one variance path per price path");
  }
  std::vector<Moments> per_path;
  long windows = 0;
  for (std::size_t p = 0; p < prices.size(); ++p) {
    const WindowSeries w =
        window_series(prices[p], opt.proxy == VolProxy::TrueV ? variances[p] : Eigen::VectorXd(), dt, opt);
    windows += static_cast<long>(w.size());
    per_path.push_back(moments(w));
  }
  if (windows < 30) throw InsufficientDataError("weak_zumbach: fewer than 30 windows (" + std::to_string(windows) + ")");

  ZumbachResult out;
  Moments total;
  for (const auto& s : per_path) total += s;
  out.statistic = total.statistic();
  out.level = opt.level;
  out.tau = opt.tau;
  out.tau_time = opt.tau * dt;
  out.n_windows = windows;
  out.n_paths = static_cast<int>(prices.size());
  out.bootstrap = "paths";

  RandomStream rng(opt.seed, 0x5a6b);
  std::vector<double> boot(static_cast<std::size_t>(opt.n_boot));
  for (auto& v : boot) {
    Moments acc;
    for (std::size_t b = 0; b < per_path.size(); ++b) acc += per_path[draw_index(rng, per_path.size())];
    v = acc.statistic();
  }
  percentile_ci(boot, opt.level, out);
  return out;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_distance: both samples must be non-empty");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;  // the alternating series is useless here; P > 0.999999
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsTest ks_test_exp1(std::vector<double> samples) {
  if (samples.empty()) throw DomainError("ks_test_exp1: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = samples[i] > 0.0 ? -std::expm1(-samples[i]) : 0.0;
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d), samples.size()};
}

// ---------------------------------------------------------------------------
// Convergence ladder

std::string functional_name(Functional f) {
  switch (f) {
    case Functional::X1: return "X1";
    case Functional::VProxy: return "V_proxy";
    case Functional::P1: return "P1";
  }
  return "X1";
}

Functional functional_from_name(const std::string& s) {
  if (s == "X1") return Functional::X1;
  if (s == "V_proxy") return Functional::VProxy;
  if (s == "P1") return Functional::P1;
  throw ConfigError("schema", "unknown functional '" + s + "' (expected X1, V_proxy or P1)");
}

namespace {

bool integral_multiple(double x, double of) {
  const double r = x * of;
  return std::abs(r - std::round(r)) < 1e-9 && std::round(r) >= 1.0;
}

struct MicroSetup {
  QHawkesParams params;
  double count_scale;  // X = count_scale * N
  double price_scale;  // Pstar = price_scale * P
  std::vector<std::string> warnings;
};

MicroSetup micro_setup(const LadderSpec& spec, double T) {
  MicroSetup s;
  if (const auto* m = std::get_if<PQModel>(&spec.macro.model)) {
    const double g = spec.micro_gamma > 0.0 ? spec.micro_gamma : m->gamma;
    ScaledKernelPair pair{m->k, KernelSpec::zero(), PurelyQuadratic{g}, T};
    pair.validate();
    s.params = QHawkesParams{m->mu, pair.phi_T(), pair.k_T(), T};
  } else if (const auto* m = std::get_if<SQModel>(&spec.macro.model)) {
    const double g = spec.micro_gamma > 0.0 ? spec.micro_gamma : m->gamma;
    ScaledKernelPair pair{m->k, m->phi, Stable{g, m->beta}, T};
    pair.validate();
    s.params = QHawkesParams{m->mu, pair.phi_T(), pair.k_T(), T};
  } else if (const auto* m = std::get_if<NUModel>(&spec.macro.model)) {
    const auto& tail = std::get<PowerLawTail>(spec.mother_phi.variant());
    const UnstableSchedule sched = make_schedule(m->alpha, m->lambda, m->mu_star, tail.K, spec.T_ladder);
    s.params = unstable_params(sched, T, spec.mother_phi, m->k);
    if (auto w = check_tail_consistency(sched, spec.mother_phi)) s.warnings.push_back(*w);
    const double a = sched.a_T(T), mu = sched.mu_T(T);
    s.count_scale = (1.0 - a) / (T * mu);
    s.price_scale = std::sqrt(s.count_scale);
    s.params.validate();
    return s;
  }
  s.params.validate();
  s.count_scale = 1.0 / T;
  s.price_scale = 1.0 / std::sqrt(T);
  return s;
}

double micro_value(const LadderSpec& spec, const MicroSetup& s, const EventStream& ev, double T) {
  switch (spec.functional) {
    case Functional::X1: return s.count_scale * static_cast<double>(ev.count_at(T));
    case Functional::P1: return s.price_scale * static_cast<double>(ev.price_at(T));
    case Functional::VProxy: {
      const double w = spec.v_window;
      const double dn = static_cast<double>(ev.count_at(T)) - static_cast<double>(ev.count_at((1.0 - w) * T));
      return s.count_scale * dn / w;
    }
  }
  return 0.0;
}

double macro_value(const LadderSpec& spec, const MacroPath& p) {
  const Eigen::Index n = p.grid.size() - 1;
  switch (spec.functional) {
    case Functional::X1: return p.integrated_variance()[n];
    case Functional::P1: return p.P[n];
    case Functional::VProxy: {
      const Eigen::VectorXd X = p.integrated_variance();
      const Eigen::Index back = static_cast<Eigen::Index>(std::llround(spec.v_window * n));
      return (X[n] - X[n - back]) / spec.v_window;
    }
  }
  return 0.0;
}

std::uint64_t micro_stream(std::size_t ladder_index, std::size_t rep) {
  return (static_cast<std::uint64_t>(ladder_index + 1) << 32) + rep;
}

double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

void LadderSpec::validate() const {
  macro.validate();
  if (std::holds_alternative<RoughHestonModel>(macro.model)) {
    throw ConfigError("ladder_model", "convergence ladder: the macro model must be pq, sq or nu");
  }
  if (T_ladder.size() < 3) throw ConfigError("ladder_size", "convergence ladder needs at least 3 values of T");
  for (std::size_t i = 0; i < T_ladder.size(); ++i) {
    if (!(T_ladder[i] > 0.0) || (i > 0 && T_ladder[i] <= T_ladder[i - 1])) {
      throw ConfigError("ladder_order", "T ladder must be positive and strictly increasing");
    }
  }
  if (n_reps < 2) throw ConfigError("n_reps", "convergence ladder needs n_reps >= 2");
  if (macro_reps < 0 || macro_reps == 1) throw ConfigError("n_reps", "macro_reps must be 0 or at least 2");
  if (std::abs(macro.horizon - 1.0) > 1e-12) {
    throw ConfigError("horizon", "convergence ladder compares paths on [0, 1]; macro horizon must be 1");
  }
  if (functional == Functional::VProxy) {
    if (!(v_window > 0.0 && v_window < 1.0) || !integral_multiple(v_window, macro.n_steps)) {
      throw ConfigError("v_window", "v_window must be in (0, 1) and a whole number of macro steps");
    }
  }
  if (const auto* m = std::get_if<NUModel>(&macro.model)) {
    const auto* tail = std::get_if<PowerLawTail>(&mother_phi.variant());
    if (!tail) throw ConfigError("mother_phi", "nu ladder needs a power_law_tail mother phi");
    if (std::abs(tail->alpha - m->alpha) > 1e-12) {
      throw ConfigError("alpha_mismatch", "mother phi tail exponent must equal the macro alpha");
    }
  }
  if (micro_gamma < 0.0) throw ConfigError("micro_gamma", "micro_gamma must be positive when set");
  // Micro side validates through its regime constructors.
  for (double T : T_ladder) micro_setup(*this, T);
}

std::vector<double> macro_functional_samples(const LadderSpec& spec, int threads) {
  LimitModelSpec m = spec.macro;
  m.seed = spec.seed;
  std::vector<double> out(static_cast<std::size_t>(spec.reference_reps()));
  parallel_for(out.size(), threads, [&](std::size_t r) { out[r] = macro_value(spec, simulate_limit(m, r)); });
  return out;
}

std::vector<double> micro_functional_samples(const LadderSpec& spec, double T, int threads) {
  std::size_t idx = 0;
  while (idx < spec.T_ladder.size() && spec.T_ladder[idx] != T) ++idx;
  if (idx == spec.T_ladder.size()) throw ConfigError("ladder_order", "T is not on the ladder");
  const MicroSetup s = micro_setup(spec, T);
  std::vector<double> out(static_cast<std::size_t>(spec.n_reps));
  parallel_for(out.size(), threads, [&](std::size_t r) {
    const EventStream ev = simulate(s.params, spec.seed, micro_stream(idx, r));
    out[r] = micro_value(spec, s, ev, T);
  });
  return out;
}

LadderResult convergence_ladder(const LadderSpec& spec, int threads) {
  spec.validate();
  LadderResult res;
  res.functional = spec.functional;
  const std::vector<double> macro = macro_functional_samples(spec, threads);

  // One flat pool over (T, replication) cells.
  const std::size_t nT = spec.T_ladder.size(), R = static_cast<std::size_t>(spec.n_reps);
  std::vector<MicroSetup> setups;
  for (double T : spec.T_ladder) setups.push_back(micro_setup(spec, T));
  std::vector<double> micro(nT * R);
  parallel_for(nT * R, threads, [&](std::size_t cell) {
    const std::size_t i = cell / R, r = cell % R;
    const EventStream ev = simulate(setups[i].params, spec.seed, micro_stream(i, r));
    micro[cell] = micro_value(spec, setups[i], ev, spec.T_ladder[i]);
  });

  const double m_mean = mean(macro);
  for (std::size_t i = 0; i < nT; ++i) {
    std::vector<double> sample(micro.begin() + static_cast<long>(i * R), micro.begin() + static_cast<long>((i + 1) * R));
    LadderRow row;
    row.T = spec.T_ladder[i];
    row.n_micro = static_cast<int>(R);
    row.n_macro = static_cast<int>(macro.size());
    row.micro_mean = mean(sample);
    row.macro_mean = m_mean;
    row.ks = ks_distance(sample, macro);
    // Standard deviation of the Kolmogorov law is 0.2603.
    row.mc_error = 0.2603 * std::sqrt(1.0 / row.n_micro + 1.0 / row.n_macro);
    row.warnings = setups[i].warnings;
    res.rows.push_back(row);
  }
  return res;
}

bool LadderResult::monotone_within_noise() const {
  int inversions = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double rise = rows[i].ks - rows[i - 1].ks;
    if (rise > 0.0) {
      ++inversions;
      if (rise > 2.0 * rows[i].mc_error) return false;
    }
  }
  return inversions <= 1;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const HolderEstimate& h) {
  return {{"H", h.H},           {"reported", h.describe()}, {"smooth", h.smooth},       {"r2", h.r2},
          {"q", h.q},           {"slopes", h.slopes},       {"exponents", h.exponents}, {"r2_per_q", h.r2_per_q},
          {"lags", h.lags},     {"n_paths", h.n_paths}};
}

nlohmann::json to_json(const ZumbachResult& z) {
  return {{"statistic", z.statistic}, {"ci", {z.ci_low, z.ci_high}}, {"level", z.level},
          {"tau_steps", z.tau},       {"tau", z.tau_time},           {"n_windows", z.n_windows},
          {"n_paths", z.n_paths},     {"bootstrap", z.bootstrap},    {"ci_excludes_zero", z.ci_excludes_zero()}};
}

nlohmann::json to_json(const LadderResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"T", row.T},
                    {"ks", row.ks},
                    {"mc_error", row.mc_error},
                    {"n_micro", row.n_micro},
                    {"n_macro", row.n_macro},
                    {"micro_mean", row.micro_mean},
                    {"macro_mean", row.macro_mean},
                    {"warnings", row.warnings}});
  }
  return {{"functional", functional_name(r.functional)},
          {"rows", rows},
          {"monotone_within_noise", r.monotone_within_noise()}};
}

nlohmann::json to_json(const DiagnosticsReport& r) {
  nlohmann::json j;
  j["holder"] = nlohmann::json::array();
  for (const auto& h : r.holder) j["holder"].push_back(to_json(h));
  j["zumbach"] = nlohmann::json::array();
  for (const auto& z : r.zumbach) j["zumbach"].push_back(to_json(z));
  j["convergence"] = nlohmann::json::array();
  for (const auto& c : r.convergence) j["convergence"].push_back(to_json(c));
  j["metadata"] = r.metadata;
  return j;
}

void write_ladder_csv(std::ostream& os, const LadderResult& r) {
  os << "T,functional,ks,n_reps\n";
  char buf[128];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%d\n", row.T, functional_name(r.functional).c_str(), row.ks,
                  row.n_micro);
    os << buf;
  }
}

nlohmann::json to_json(const LadderSpec& s) {
  nlohmann::json j = {{"macro", to_json(s.macro)},
                      {"T_ladder", s.T_ladder},
                      {"n_reps", s.n_reps},
                      {"macro_reps", s.macro_reps},
                      {"functional", functional_name(s.functional)},
                      {"v_window", s.v_window},
                      {"seed", s.seed}};
  if (!s.mother_phi.is_zero()) j["mother_phi"] = to_json(s.mother_phi);
  if (s.micro_gamma > 0.0) j["micro_gamma"] = s.micro_gamma;
  return j;
}

LadderSpec ladder_spec_from_json(const nlohmann::json& j) {
  using detail::check_fields;
  using detail::get_number;
  check_fields(j, {"macro", "mother_phi", "micro_gamma", "T_ladder", "n_reps", "macro_reps", "functional", "v_window", "seed"},
               "ladder spec");
  if (!j.contains("macro")) throw ConfigError("schema", "ladder spec: missing 'macro'");
  LadderSpec s;
  s.macro = limit_spec_from_json(j.at("macro"));
  if (j.contains("mother_phi")) s.mother_phi = kernel_from_json(j.at("mother_phi"));
  s.micro_gamma = get_number(j, "micro_gamma", "ladder spec", 0.0);
  s.T_ladder = detail::get_numbers(j, "T_ladder", "ladder spec");
  s.n_reps = static_cast<int>(get_number(j, "n_reps", "ladder spec", 100));
  s.macro_reps = static_cast<int>(get_number(j, "macro_reps", "ladder spec", 0));
  if (j.contains("functional")) {
    if (!j.at("functional").is_string()) throw ConfigError("schema", "ladder spec: functional must be a string");
    s.functional = functional_from_name(j.at("functional").get<std::string>());
  }
  s.v_window = get_number(j, "v_window", "ladder spec", 1.0 / 16.0);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("schema", "ladder spec: seed must be a non-negative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  s.validate();
  return s;
}

}  // namespace qhl
