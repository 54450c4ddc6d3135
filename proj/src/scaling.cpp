#include "qhl/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "json_fields.hpp"
#include "qhl/errors.hpp"

namespace qhl {

Eigen::VectorXd unit_grid(int n_grid) {
  if (n_grid < 2) throw ConfigError("grid", "n_grid must be at least 2");
  Eigen::VectorXd g(n_grid);
  for (int j = 0; j < n_grid; ++j) g[j] = static_cast<double>(j) / (n_grid - 1);
  g[n_grid - 1] = 1.0;
  return g;
}

Eigen::VectorXd bracket(const RescaledPath& path) {
  return path.counts.cast<double>() * path.jump_var;
}

namespace {

struct Scaling {
  double jump;         // price / compensated-count jump
  double count_scale;  // X = N * count_scale (== jump^2)
  double z_scale;      // Zstar = Z * z_scale
};

// Walks the events once, filling counts, price, compensator, Z and
// (optionally) the left-limit intensity on the grid points tT.
RescaledPath build(const EventStream& events, const QHawkesParams& params, int n_grid, double T,
                   const Scaling& sc, bool with_intensity, double intensity_scale) {
  events.validate();
  RescaledPath out;
  out.T = T;
  out.grid = unit_grid(n_grid);
  out.jump = sc.jump;
  out.jump_var = sc.count_scale;
  out.X.setZero(n_grid);
  out.Pstar.setZero(n_grid);
  out.Mstar.setZero(n_grid);
  out.Zstar.setZero(n_grid);
  out.Lambda_star.setZero(n_grid);
  out.counts.setZero(n_grid);
  if (with_intensity) out.lambda_star.setZero(n_grid);

  std::vector<double> times(n_grid);
  for (int j = 0; j < n_grid; ++j) times[j] = out.grid[j] * T;
  const auto Lambda = compensator(params, events, times);

  IntensityTracker tracker(params);
  std::size_t i = 0;
  long long price = 0;
  for (int j = 0; j < n_grid; ++j) {
    const double t = times[j];
    // Values at t are left limits for Z and lambda (predictable), and include
    // events at t for N and P.
    while (i < events.size() && events.times[i] < t) {
      tracker.add_event(events.times[i], events.signs[i]);
      price += events.signs[i];
      ++i;
    }
    const double z = tracker.feedback(t);
    const double lam = with_intensity ? tracker.intensity(t) : 0.0;
    std::size_t n = i;
    long long p = price;
    while (n < events.size() && events.times[n] <= t) p += events.signs[n++];

    out.counts[j] = static_cast<int>(n);
    out.X[j] = static_cast<double>(n) * sc.count_scale;
    out.Pstar[j] = static_cast<double>(p) * sc.jump;
    out.Lambda_star[j] = Lambda[j] * sc.count_scale;
    out.Mstar[j] = (static_cast<double>(n) - Lambda[j]) * sc.jump;
    out.Zstar[j] = z * sc.z_scale;
    if (with_intensity) out.lambda_star[j] = lam * intensity_scale;
  }

  // Less than half an event per grid cell on average: the grid carries no
  // extra information.
  const double step = T / (n_grid - 1);
  if (!events.empty() && step * static_cast<double>(events.size()) / T < 0.5) {
    std::ostringstream w;
    w << "grid step " << step << " is finer than half the mean inter-event time";
    out.warnings.push_back(w.str());
  }
  return out;
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)); }

}  // namespace

RescaledPath rescale_stable(const EventStream& events, const QHawkesParams& params, int n_grid,
                            const std::string& regime) {
  const double T = params.horizon;
  if (!(T > 0.0)) throw ConfigError("horizon", "rescale_stable: horizon must be positive");
  if (events.horizon != 0.0 && !close(events.horizon, T, 1e-12)) {
    throw ConfigError("horizon", "rescale_stable: event horizon differs from params horizon");
  }
  Scaling sc;
  sc.jump = 1.0 / std::sqrt(T);
  sc.count_scale = sc.jump * sc.jump;
  sc.z_scale = 1.0;
  auto out = build(events, params, n_grid, T, sc, false, 0.0);
  out.regime = regime;
  return out;
}

// ---------------------------------------------------------------------------

double UnstableSchedule::a_T(double T) const { return 1.0 - lambda_macro * delta * std::pow(T, -alpha); }

double UnstableSchedule::mu_T(double T) const { return mu_star / delta * std::pow(T, alpha - 1.0); }

double UnstableSchedule::min_admissible_T() const { return std::pow(lambda_macro * delta, 1.0 / alpha); }

UnstableSchedule make_schedule(double alpha, double lambda_macro, double mu_star, double K,
                               std::vector<double> T_ladder) {
  if (!(alpha > 0.5 && alpha < 1.0)) throw ConfigError("schedule_alpha", "schedule: alpha must lie in (1/2, 1)");
  if (!(lambda_macro > 0.0) || !(mu_star > 0.0) || !(K > 0.0)) {
    throw ConfigError("schedule_positive", "schedule: lambda, mu_star and K must be positive");
  }
  UnstableSchedule s;
  s.alpha = alpha;
  s.lambda_macro = lambda_macro;
  s.mu_star = mu_star;
  s.K = K;
  s.delta = K * std::tgamma(1.0 - alpha) / alpha;
  const double tmin = s.min_admissible_T();
  for (double T : T_ladder) {
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("schedule_range", "schedule: T must be finite and positive");
    const double a = s.a_T(T);
    if (!(a > 0.0 && a < 1.0)) {
      std::ostringstream msg;
      msg << "schedule: T = " << T << " gives a_T = " << a << " outside (0, 1); minimal admissible T is "
          << std::floor(tmin) + 1.0;
      throw ConfigError("schedule_range", msg.str());
    }
  }
  s.T_ladder = std::move(T_ladder);
  return s;
}

QHawkesParams unstable_params(const UnstableSchedule& s, double T, const KernelSpec& mother_phi,
                              const KernelSpec& mother_k) {
  ScaledKernelPair pair{mother_k, mother_phi, NearlyUnstable{s.a_T(T)}, T};
  pair.validate();
  QHawkesParams p;
  p.mu = s.mu_T(T);
  p.phi = pair.phi_T();
  p.k = pair.k_T();
  p.horizon = T;
  return p;
}

std::optional<std::string> check_tail_consistency(const UnstableSchedule& s, const KernelSpec& phi) {
  double x = 1e4;
  if (const auto* p = std::get_if<PowerLawTail>(&phi.variant())) x *= p->x0;
  const double c = tail_constant(phi, s.alpha, x);
  if (std::abs(c - s.K) <= 0.05 * s.K) return std::nullopt;
  std::ostringstream w;
  w << "tail constant of phi at x = " << x << " is " << c << ", schedule uses K = " << s.K;
  return w.str();
}

RescaledPath rescale_unstable(const EventStream& events, const UnstableSchedule& schedule, double T,
                              const QHawkesParams& params, int n_grid) {
  const double a = schedule.a_T(T);
  const double mu = schedule.mu_T(T);
  if (!(a > 0.0 && a < 1.0)) throw ConfigError("schedule_range", "rescale_unstable: a_T outside (0, 1)");
  if (!close(params.horizon, T, 1e-12) || !close(params.mu, mu, 1e-12)) {
    throw ConfigError("schedule_mismatch", "rescale_unstable: params do not match the schedule at this T");
  }
  if (!close(params.stability(), a, 1e-6)) {
    std::ostringstream msg;
    msg << "rescale_unstable: ||phi_T||_1 + ||k_T||_2^2 = " << params.stability() << " but a_T = " << a;
    throw ConfigError("schedule_mismatch", msg.str());
  }

  Scaling sc;
  sc.jump = std::sqrt((1.0 - a) / (T * mu));
  sc.count_scale = sc.jump * sc.jump;
  sc.z_scale = 1.0 / std::sqrt(mu);
  auto out = build(events, params, n_grid, T, sc, true, (1.0 - a) / mu);
  out.regime = "nearly_unstable";

  if (!params.phi.is_zero() && 2.0 * a - 1.0 > 0.0) {
    if (auto w = check_tail_consistency(schedule, rescaled(params.phi, 1.0 / (2.0 * a - 1.0), 1.0))) {
      out.warnings.push_back(*w);
    }
  }
  return out;
}

Eigen::VectorXd zstar_from_increments(const RescaledPath& path, const KernelSpec& macro_kernel) {
  const Eigen::Index n = path.grid.size();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  if (n < 2) return z;
  const double dt = path.grid[1] - path.grid[0];
  // Cell-averaged kernel: increments over (t_{m-1}, t_m] sit at lags in
  // [t_j - t_m, t_j - t_{m-1}).
  Eigen::VectorXd w(n);
  w[0] = 0.0;
  for (Eigen::Index m = 1; m < n; ++m) {
    w[m] = (macro_kernel.integral(m * dt) - macro_kernel.integral((m - 1) * dt)) / dt;
  }
  for (Eigen::Index j = 1; j < n; ++j) {
    double acc = 0.0;
    for (Eigen::Index m = 1; m <= j; ++m) acc += w[j - m + 1] * (path.Pstar[m] - path.Pstar[m - 1]);
    z[j] = acc;
  }
  return z;
}

void write_rescaled_csv(std::ostream& os, const RescaledPath& path) {
  const bool lam = path.has_intensity();
  os << "t,X,Pstar,Mstar,Zstar" << (lam ? ",lambda_star" : "") << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (Eigen::Index j = 0; j < path.grid.size(); ++j) {
    put(path.grid[j]);
    for (const auto* v : {&path.X, &path.Pstar, &path.Mstar, &path.Zstar}) {
      os << ',';
      put((*v)[j]);
    }
    if (lam) {
      os << ',';
      put(path.lambda_star[j]);
    }
    os << '\n';
  }
}

nlohmann::json to_json(const UnstableSchedule& s) {
  nlohmann::json ladder = nlohmann::json::array();
  for (double T : s.T_ladder) {
    ladder.push_back({{"T", T}, {"a_T", s.a_T(T)}, {"mu_T", s.mu_T(T)}});
  }
  return {{"alpha", s.alpha}, {"lambda", s.lambda_macro}, {"mu_star", s.mu_star},
          {"K", s.K},         {"delta", s.delta},         {"T_ladder", s.T_ladder},
          {"derived", ladder}};
}

UnstableSchedule schedule_from_json(const nlohmann::json& j) {
  const std::string where = "schedule";
  detail::check_fields(j, {"alpha", "lambda", "mu_star", "K", "T_ladder", "delta", "derived"}, where);
  return make_schedule(detail::get_number(j, "alpha", where), detail::get_number(j, "lambda", where),
                       detail::get_number(j, "mu_star", where), detail::get_number(j, "K", where),
                       detail::get_numbers(j, "T_ladder", where));
}

}  // namespace qhl
