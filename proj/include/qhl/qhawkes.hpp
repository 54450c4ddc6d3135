#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qhl/kernels.hpp"
#include "qhl/random.hpp"

namespace qhl {

// Quadratic Hawkes price model: jumps +-1 at the events of N, whose intensity is
//   lambda_t = mu + sum_{t_i < t} phi(t - t_i) + Z_t^2,
//   Z_t      = sum_{t_i < t} sign_i k(t - t_i).
struct QHawkesParams {
  double mu = 1.0;
  KernelSpec phi;
  KernelSpec k;
  double horizon = 1.0;
  std::size_t max_events = 10'000'000;

  // mu > 0, horizon > 0, kernels valid and ||phi||_1 + ||k||_2^2 < 1.
  // Throws ConfigError naming the violated invariant.
  void validate() const;
  double stability() const;  // ||phi||_1 + ||k||_2^2
};

struct EventStream {
  std::vector<double> times;
  std::vector<int> signs;
  double horizon = 0.0;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  // N_t = #{t_i <= t}
  std::size_t count_at(double t) const;
  // P_t = sum_{t_i <= t} sign_i
  long long price_at(double t) const;
  // Times non-decreasing (strictly increasing if `strict`), signs in {+1,-1},
  // matching lengths. Throws ConfigError("event_order") otherwise.
  void validate(bool strict = false) const;
  // Orders ties by sign, +1 first.
  void canonicalize();
};

// How kernel sums are maintained.
enum class SumMode {
  Auto,     // O(1) recursion for exponential kernels, windowed sums otherwise
  Windowed  // direct summation over the truncated history
};

// Running sum  sum_i w_i g(t - t_i)  over appended events.
class KernelSum {
 public:
  KernelSum(const KernelSpec& g, double truncation_level, SumMode mode);

  void add(double t, double w);
  // Sum over events with t_i < t (or <= t when `inclusive`).
  double at(double t, bool inclusive = false) const;
  // Sum at a + x over events with t_i <= a; lags are formed as (a - t_i) + x so
  // an event at a is seen at lag exactly x.
  double at_offset(double a, double x, bool exclude_a = false) const;
  // Total weight of the events at exactly t.
  double weight_at(double t) const;
  // int_a^b sum_i w_i g(s - t_i) ds over all events added so far (t_i <= a).
  double integral(double a, double b) const;
  bool recursive() const { return recursive_; }
  double lag_cutoff() const { return cutoff_; }
  // Time of the latest added event (-inf before any).
  double last_time() const { return last_added_; }

 private:
  KernelSpec g_;
  bool recursive_ = false;
  double rate_ = 0.0, scale_ = 0.0;
  double last_t_ = 0.0, value_ = 0.0;  // recursive state, value at last_t_
  double cutoff_;
  double last_added_ = -std::numeric_limits<double>::infinity();
  std::deque<std::pair<double, double>> window_;
};

// Incremental intensity state used by the simulator and the compensator.
class IntensityTracker {
 public:
  explicit IntensityTracker(const QHawkesParams& params, SumMode mode = SumMode::Auto);

  void add_event(double t, int sign);
  double intensity(double t) const;
  double majorant(double t) const;
  // A bound on the intensity valid from t until the next event; the exact
  // intensity when k is exponential (then Z^2 decays between events).
  double envelope(double t) const;

  // Dominating intensity g(s) = c0 + c1 x^{q1 - 1} + c2 x^{q2 - 1}, x = s - origin,
  // valid on (origin, next event]. Singular terms appear only when the latest
  // event sits at `origin` and a kernel diverges at 0.
  struct Dominator {
    double origin = 0.0;
    double c0 = 0.0;
    double c[2] = {0.0, 0.0};
    double q[2] = {1.0, 1.0};
    double operator()(double s) const;
  };
  Dominator dominator(double t) const;
  // int_a^b lambda_s ds with no event in (a, b].
  double integral(double a, double b) const;
  double feedback(double t) const { return z_.at(t); }
  bool recursive() const { return phi_.recursive() && z_.recursive(); }

 private:
  const QHawkesParams* p_;
  KernelSum phi_, z_, u_;
};

double intensity_at(const QHawkesParams& params, const EventStream& events, double t);
double majorant_at(const QHawkesParams& params, const EventStream& events, double t);

// Exact sample on [0, horizon] by thinning against a non-increasing envelope.
EventStream simulate(const QHawkesParams& params, RandomStream& rng, SumMode mode = SumMode::Auto);
EventStream simulate(const QHawkesParams& params, std::uint64_t seed, std::uint64_t stream = 0);

// Lambda(t) = int_0^t lambda_s ds at each grid point (grid non-decreasing).
std::vector<double> compensator(const QHawkesParams& params, const EventStream& events,
                                std::span<const double> grid, SumMode mode = SumMode::Auto);

// Lambda(t_{i+1}) - Lambda(t_i); i.i.d. Exp(1) for a correct simulation.
std::vector<double> time_change_residuals(const QHawkesParams& params, const EventStream& events);

// CSV with header "time,sign", times printed with 17 significant digits.
void write_events_csv(std::ostream& os, const EventStream& events);
EventStream read_events_csv(std::istream& is, double horizon);

nlohmann::json to_json(const QHawkesParams& params);
QHawkesParams qhawkes_params_from_json(const nlohmann::json& j);

}  // namespace qhl
