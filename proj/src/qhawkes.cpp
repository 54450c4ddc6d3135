#include "qhl/qhawkes.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "qhl/errors.hpp"
#include "qhl/quadrature.hpp"

namespace qhl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTruncationRelLevel = 1e-12;

// Smallest lag L (up to a doubling search) with g(L) < level; +inf if the
// kernel never falls below the level.
double lag_cutoff(const KernelSpec& g, double level) {
  if (g.is_zero()) return 0.0;
  if (const auto* e = std::get_if<Exponential>(&g.variant())) {
    return e->scale <= level ? 0.0 : std::log(e->scale / level) / e->rate;
  }
  double hi = 1.0;
  while (g(hi) >= level) {
    hi *= 2.0;
    if (hi > 1e18) return kInf;
  }
  double lo = 0.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) >= level ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

// ---------------------------------------------------------------------------

double QHawkesParams::stability() const { return kernel_l1(phi) + kernel_l2_sq(k); }

void QHawkesParams::validate() const {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("mu_positive", "baseline intensity mu must be > 0");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon", "horizon must be > 0");
  try {
    phi.validate();
    k.validate();
  } catch (const DomainError& e) {
    throw ConfigError("kernel_domain", e.what());
  }
  double s = 0.0;
  try {
    s = stability();
  } catch (const DivergenceError& e) {
    throw ConfigError("stability", std::string("stability norm diverges: ") + e.what());
  }
  if (!(s < 1.0)) {
    std::ostringstream os;
    os << "stability violated: ||phi||_1 + ||k||_2^2 = " << s << " must be < 1";
    throw ConfigError("stability", os.str());
  }
}

std::size_t EventStream::count_at(double t) const {
  return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
}

long long EventStream::price_at(double t) const {
  const auto n = count_at(t);
  return std::accumulate(signs.begin(), signs.begin() + static_cast<std::ptrdiff_t>(n), 0LL);
}

void EventStream::validate(bool strict) const {
  if (times.size() != signs.size()) throw ConfigError("event_order", "times and signs differ in length");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i])) throw ConfigError("event_order", "non-finite event time");
    if (signs[i] != 1 && signs[i] != -1) throw ConfigError("event_order", "event sign must be +1 or -1");
    if (i > 0 && (strict ? !(times[i] > times[i - 1]) : times[i] < times[i - 1])) {
      throw ConfigError("event_order", "event times are not increasing at index " + std::to_string(i));
    }
  }
}

void EventStream::canonicalize() {
  std::vector<std::size_t> idx(times.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (times[a] != times[b]) return times[a] < times[b];
    return signs[a] > signs[b];
  });
  EventStream out{{}, {}, horizon};
  for (auto i : idx) {
    out.times.push_back(times[i]);
    out.signs.push_back(signs[i]);
  }
  *this = std::move(out);
}

// ---------------------------------------------------------------------------

KernelSum::KernelSum(const KernelSpec& g, double level, SumMode mode) : g_(g), cutoff_(qhl::lag_cutoff(g, level)) {
  if (g.is_zero()) {
    recursive_ = true;
  } else if (const auto* e = std::get_if<Exponential>(&g.variant()); e && mode == SumMode::Auto) {
    recursive_ = true;
    rate_ = e->rate;
    scale_ = e->scale;
  }
}

void KernelSum::add(double t, double w) {
  last_added_ = t;
  if (recursive_) {
    if (scale_ == 0.0) return;
    value_ = value_ * std::exp(-rate_ * (t - last_t_)) + w * scale_;
    last_t_ = t;
    return;
  }
  while (!window_.empty() && t - window_.front().first > cutoff_) window_.pop_front();
  window_.emplace_back(t, w);
}

double KernelSum::at(double t, bool inclusive) const {
  if (recursive_) {
    if (scale_ == 0.0 || value_ == 0.0) return 0.0;
    if (t < last_t_ || (!inclusive && t == last_t_)) {
      // Only reached for crafted queries before the latest event.
      return 0.0;
    }
    return value_ * std::exp(-rate_ * (t - last_t_));
  }
  double sum = 0.0;
  for (const auto& [ti, w] : window_) {
    if (ti > t || (!inclusive && ti == t)) break;
    if (t - ti <= cutoff_) sum += w * g_(t - ti);
  }
  return sum;
}

double KernelSum::at_offset(double a, double x, bool exclude_a) const {
  if (recursive_) return at(a + x, !exclude_a);
  double sum = 0.0;
  for (const auto& [ti, w] : window_) {
    if (ti > a || (exclude_a && ti == a)) break;
    const double lag = (a - ti) + x;
    if (lag <= cutoff_) sum += w * g_(lag);
  }
  return sum;
}

double KernelSum::weight_at(double t) const {
  double sum = 0.0;
  for (auto it = window_.rbegin(); it != window_.rend() && it->first >= t; ++it) {
    if (it->first == t) sum += it->second;
  }
  return sum;
}

double KernelSum::integral(double a, double b) const {
  if (!(b > a)) return 0.0;
  if (recursive_) {
    if (scale_ == 0.0 || value_ == 0.0) return 0.0;
    const double va = value_ * std::exp(-rate_ * (a - last_t_));
    return -va * std::expm1(-rate_ * (b - a)) / rate_;
  }
  double sum = 0.0;
  for (const auto& [ti, w] : window_) sum += w * (g_.integral(b - ti) - g_.integral(a - ti));
  return sum;
}

// ---------------------------------------------------------------------------

namespace {

// k enters squared, so k(L)^2 < level bounds each dropped term of Z^2 but the
// cross term 2 Z k(L) is only O(sqrt(level)). Exponential k gets the tighter
// cutoff |k(L)| < level (it costs a factor 2 in window length) so windowed and
// recursive sums agree to 1e-10.
double z_level(const KernelSpec& k, double level) {
  return std::holds_alternative<Exponential>(k.variant()) ? level : std::sqrt(level);
}

}  // namespace

IntensityTracker::IntensityTracker(const QHawkesParams& params, SumMode mode)
    : p_(&params),
      phi_(params.phi, kTruncationRelLevel * params.mu, mode),
      z_(params.k, z_level(params.k, kTruncationRelLevel * params.mu), mode),
      u_(params.k, z_level(params.k, kTruncationRelLevel * params.mu), mode) {}

void IntensityTracker::add_event(double t, int sign) {
  phi_.add(t, 1.0);
  z_.add(t, static_cast<double>(sign));
  u_.add(t, 1.0);
}

double IntensityTracker::intensity(double t) const {
  const double z = z_.at(t);
  return p_->mu + phi_.at(t) + z * z;
}

double IntensityTracker::majorant(double t) const {
  const double u = u_.at(t);
  return p_->mu + phi_.at(t) + u * u;
}

double IntensityTracker::envelope(double t) const {
  if (z_.recursive()) {
    const double z = z_.at(t, true);
    return p_->mu + phi_.at(t, true) + z * z;
  }
  const double u = u_.at(t, true);
  return p_->mu + phi_.at(t, true) + u * u;
}

namespace {

// k(x) <= c x^{p} near 0 for a kernel singular at 0 (non-increasing kernels
// only). The Mittag-Leffler density satisfies f(x) <= lambda x^{alpha-1} / Gamma(alpha).
bool singular_bound(const KernelSpec& g, double& c, double& p) {
  const auto* m = std::get_if<MittagLeffler>(&g.variant());
  if (!m || m->alpha >= 1.0) return false;
  c = m->scale * m->lambda / std::tgamma(m->alpha);
  p = m->alpha - 1.0;
  return true;
}

}  // namespace

double IntensityTracker::Dominator::operator()(double s) const {
  const double x = s - origin;
  double g = c0;
  for (int j = 0; j < 2; ++j) {
    if (c[j] > 0.0) g += c[j] * std::pow(x, q[j] - 1.0);
  }
  return g;
}

IntensityTracker::Dominator IntensityTracker::dominator(double t) const {
  Dominator d;
  d.origin = t;
  double cphi = 0.0, pphi = 0.0, ck = 0.0, pk = 0.0;
  const bool phi_sing = phi_.last_time() == t && singular_bound(p_->phi, cphi, pphi);
  const bool k_sing = u_.last_time() == t && singular_bound(p_->k, ck, pk);
  if (!phi_sing && !k_sing) {
    d.c0 = envelope(t);
    return d;
  }
  // Split off the latest event (weight 1 in phi_ and u_; a tie at t is
  // excluded from the strict sums and only the latest is dominated, so
  // require strictly increasing event times here).
  double phi_part = phi_sing ? phi_.at(t, false) : phi_.at(t, true);
  double u_old = k_sing ? u_.at(t, false) : u_.at(t, true);
  if (phi_sing) {
    d.c[0] = cphi;
    d.q[0] = pphi + 1.0;
  }
  if (k_sing) {
    // (u_old + k(x))^2 <= 2 u_old^2 + 2 c^2 x^{2p}
    d.c0 = p_->mu + phi_part + 2.0 * u_old * u_old;
    d.c[1] = 2.0 * ck * ck;
    d.q[1] = 2.0 * pk + 1.0;
  } else {
    const double z = z_.recursive() ? z_.at(t, true) : u_old;
    d.c0 = p_->mu + phi_part + z * z;
  }
  return d;
}

double IntensityTracker::integral(double a, double b) const {
  if (!(b > a)) return 0.0;
  double out = p_->mu * (b - a) + phi_.integral(a, b);
  if (z_.recursive()) {
    const auto* e = std::get_if<Exponential>(&p_->k.variant());
    const double za = z_.at(a, true);
    if (e && za != 0.0) out += -za * za * std::expm1(-2.0 * e->rate * (b - a)) / (2.0 * e->rate);
    return out;
  }
  QuadratureOptions opt{1e-10, 0.0, 2000};
  const double len = b - a;
  const auto* m = std::get_if<MittagLeffler>(&p_->k.variant());
  const double w = (m && m->alpha < 1.0) ? z_.weight_at(a) : 0.0;
  if (w == 0.0) {
    auto sq = [this, a](double x) {
      const double z = z_.at_offset(a, x);
      return z * z;
    };
    return out + integrate(sq, 0.0, len, opt).value;
  }
  // Events at a make k singular there: with Z(a + x) = A(x) + w k(x),
  // integrate A^2, 2 w A k and w^2 k^2 separately, each with its own
  // singularity exponent.
  const KernelSpec& k = p_->k;
  auto older = [this, a](double x) { return z_.at_offset(a, x, true); };
  out += integrate([&](double x) { const double v = older(x); return v * v; }, 0.0, len, opt).value;
  out += 2.0 * w * integrate_power_singular([&](double x) { return older(x) * k(x); }, 0.0, len,
                                            m->alpha - 1.0, opt).value;
  out += w * w * integrate_power_singular([&](double x) { const double v = k(x); return v * v; }, 0.0, len,
                                          2.0 * m->alpha - 2.0, opt).value;
  return out;
}

// ---------------------------------------------------------------------------

double intensity_at(const QHawkesParams& params, const EventStream& events, double t) {
  events.validate(false);
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("intensity_at: t must be finite and >= 0");
  IntensityTracker tracker(params);
  for (std::size_t i = 0; i < events.size() && events.times[i] < t; ++i) {
    tracker.add_event(events.times[i], events.signs[i]);
  }
  return tracker.intensity(t);
}

double majorant_at(const QHawkesParams& params, const EventStream& events, double t) {
  events.validate(false);
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("majorant_at: t must be finite and >= 0");
  IntensityTracker tracker(params);
  for (std::size_t i = 0; i < events.size() && events.times[i] < t; ++i) {
    tracker.add_event(events.times[i], events.signs[i]);
  }
  return tracker.majorant(t);
}

EventStream simulate(const QHawkesParams& params, RandomStream& rng, SumMode mode) {
  params.validate();
  IntensityTracker tracker(params, mode);
  EventStream out{{}, {}, params.horizon};
  // Envelope is refreshed after each acceptance, and after a rejection once it
  // is older than this lookahead.
  const double lookahead = 0.1 / params.mu;
  double t = 0.0;
  auto dom = tracker.dominator(0.0);
  using Dominator = IntensityTracker::Dominator;
  bool singular = false;
  while (true) {
    // Next point of the Poisson process with intensity dom after t, by
    // inversion of each term's cumulative intensity c x^q / q.
    const double x = t - dom.origin;
    double next = x + rng.exponential() / dom.c0;
    for (int j = 0; j < 2; ++j) {
      if (dom.c[j] <= 0.0) continue;
      const double q = dom.q[j];
      const double G = dom.c[j] * std::pow(x, q) / q + rng.exponential();
      next = std::min(next, std::pow(q * G / dom.c[j], 1.0 / q));
    }
    t = dom.origin + next;
    if (t > params.horizon) break;
    const double bound = dom(t);
    const double lambda = tracker.intensity(t);
    if (rng.uniform() * bound <= lambda) {
      const int sign = rng.sign();
      if (!out.times.empty() && t <= out.times.back()) {
        throw AccuracyLossError(0.0, "simulate: event times collided in floating point");
      }
      tracker.add_event(t, sign);
      out.times.push_back(t);
      out.signs.push_back(sign);
      if (out.times.size() > params.max_events) {
        throw ExplosionError("event count exceeded the cap of " + std::to_string(params.max_events));
      }
      dom = tracker.dominator(t);
      singular = dom.c[0] > 0.0 || dom.c[1] > 0.0;
    } else if (singular || t - dom.origin > lookahead) {
      // Away from the latest event all kernels are finite and non-increasing.
      dom = Dominator{};
      dom.origin = t;
      dom.c0 = tracker.envelope(t);
      singular = false;
    }
  }
  return out;
}

EventStream simulate(const QHawkesParams& params, std::uint64_t seed, std::uint64_t stream) {
  RandomStream rng(seed, stream);
  return simulate(params, rng);
}

std::vector<double> compensator(const QHawkesParams& params, const EventStream& events,
                                std::span<const double> grid, SumMode mode) {
  events.validate(false);
  IntensityTracker tracker(params, mode);
  std::vector<double> out;
  out.reserve(grid.size());
  double a = 0.0, total = 0.0;
  std::size_t ei = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (g > 0 && grid[g] < grid[g - 1]) throw DomainError("compensator: grid must be non-decreasing");
    const double target = grid[g];
    while (ei < events.size() && events.times[ei] <= target) {
      total += tracker.integral(a, events.times[ei]);
      a = std::max(a, events.times[ei]);
      tracker.add_event(events.times[ei], events.signs[ei]);
      ++ei;
    }
    if (target > a) {
      total += tracker.integral(a, target);
      a = target;
    }
    out.push_back(total);
  }
  return out;
}

std::vector<double> time_change_residuals(const QHawkesParams& params, const EventStream& events) {
  if (events.size() < 2) return {};
  const auto lambda = compensator(params, events, events.times);
  std::vector<double> out(lambda.size() - 1);
  for (std::size_t i = 0; i + 1 < lambda.size(); ++i) out[i] = lambda[i + 1] - lambda[i];
  return out;
}

// ---------------------------------------------------------------------------

void write_events_csv(std::ostream& os, const EventStream& events) {
  os << "time,sign\n";
  char buf[64];
  for (std::size_t i = 0; i < events.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%d\n", events.times[i], events.signs[i]);
    os << buf;
  }
}

EventStream read_events_csv(std::istream& is, double horizon) {
  EventStream out{{}, {}, horizon};
  std::string line;
  if (!std::getline(is, line) || line != "time,sign") throw IoError("events CSV: missing header 'time,sign'");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("events CSV: malformed row '" + line + "'");
    try {
      out.times.push_back(std::stod(line.substr(0, comma)));
      out.signs.push_back(std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw IoError("events CSV: malformed row '" + line + "'");
    }
  }
  out.validate(false);
  return out;
}

nlohmann::json to_json(const QHawkesParams& p) {
  return {{"mu", p.mu},
          {"phi", to_json(p.phi)},
          {"k", to_json(p.k)},
          {"horizon", p.horizon},
          {"max_events", p.max_events}};
}

QHawkesParams qhawkes_params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("schema", "qhawkes params: expected object");
  for (const auto& [key, _] : j.items()) {
    if (key != "mu" && key != "phi" && key != "k" && key != "horizon" && key != "max_events") {
      throw ConfigError("schema", "qhawkes params: unknown field '" + key + "'");
    }
  }
  QHawkesParams p;
  try {
    p.mu = j.at("mu").get<double>();
    p.horizon = j.at("horizon").get<double>();
    p.phi = j.contains("phi") ? kernel_from_json(j.at("phi")) : KernelSpec::zero();
    p.k = j.contains("k") ? kernel_from_json(j.at("k")) : KernelSpec::zero();
    if (j.contains("max_events")) p.max_events = j.at("max_events").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema", std::string("qhawkes params: ") + e.what());
  }
  return p;
}

}  // namespace qhl
