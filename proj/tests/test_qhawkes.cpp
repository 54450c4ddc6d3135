#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qhl/diagnostics.hpp"
#include "qhl/errors.hpp"
#include "qhl/qhawkes.hpp"
#include "support/oracles.hpp"

using namespace qhl;

namespace {

QHawkesParams params(double mu, KernelSpec phi, KernelSpec k, double horizon) {
  QHawkesParams p;
  p.mu = mu;
  p.phi = phi;
  p.k = k;
  p.horizon = horizon;
  return p;
}

EventStream stream(std::vector<double> t, std::vector<int> s, double horizon) {
  EventStream e;
  e.times = std::move(t);
  e.signs = std::move(s);
  e.horizon = horizon;
  return e;
}

}  // namespace

TEST(Intensity, Examples) {
  const auto phi = KernelSpec::exponential(1.0, 1.0);
  const auto k = KernelSpec::exponential(1.0, std::sqrt(2.0));
  const auto p = params(1.3, phi, k, 10.0);
  EXPECT_DOUBLE_EQ(intensity_at(p, stream({}, {}, 10.0), 3.0), 1.3);
  const double one = intensity_at(p, stream({0.0}, {1}, 10.0), 1.0);
  EXPECT_NEAR(one, 1.3 + std::exp(-1.0) + 2.0 * std::exp(-2.0), 1e-14);
  EXPECT_NEAR(one, 1.938550, 1e-6);
  const auto pair = stream({0.0, 0.0}, {1, -1}, 10.0);
  EXPECT_NEAR(intensity_at(p, pair, 1.0), 1.3 + 2.0 * std::exp(-1.0), 1e-14);
}

TEST(Intensity, UsesOnlyStrictlyPriorEvents) {
  const auto p = params(1.0, KernelSpec::exponential(1.0, 0.5), KernelSpec::exponential(1.0, 0.5), 10.0);
  EXPECT_DOUBLE_EQ(intensity_at(p, stream({2.0}, {1}, 10.0), 2.0), 1.0);
  EXPECT_THROW(intensity_at(p, stream({2.0, 1.0}, {1, 1}, 10.0), 3.0), ConfigError);
}

TEST(Majorant, Examples) {
  const auto phi = KernelSpec::exponential(1.0, 1.0);
  const auto k = KernelSpec::exponential(1.0, std::sqrt(2.0));
  const auto p = params(1.3, phi, k, 10.0);
  EXPECT_DOUBLE_EQ(majorant_at(p, stream({}, {}, 10.0), 0.7), 1.3);
  const auto ups = stream({0.1, 0.4, 0.9}, {1, 1, 1}, 10.0);
  EXPECT_NEAR(majorant_at(p, ups, 1.5), intensity_at(p, ups, 1.5), 1e-13);
  const auto pair = stream({0.0, 0.0}, {1, -1}, 10.0);
  const double diff = majorant_at(p, pair, 1.0) - intensity_at(p, pair, 1.0);
  EXPECT_NEAR(diff, 8.0 * std::exp(-2.0), 1e-13);
  EXPECT_NEAR(diff, 1.082682, 1e-6);
}

TEST(Majorant, DominatesAndDecaysBetweenEvents) {
  const std::vector<std::pair<KernelSpec, KernelSpec>> kernels = {
      {KernelSpec::exponential(1.0, 0.4), KernelSpec::exponential(2.0, 1.0)},
      {KernelSpec::mittag_leffler(0.8, 1.0, 0.4), KernelSpec::mittag_leffler(0.9, 2.0, 0.5)},
      {KernelSpec(PowerLawTail{0.6, 0.3, 1.0}), KernelSpec::exponential(1.0, 0.3)}};
  RandomStream rng(77, 0);
  int checked = 0;
  for (const auto& [phi, k] : kernels) {
    const auto p = params(1.0, phi, k, 50.0);
    for (int rep = 0; rep < 20; ++rep) {
      const auto ev = simulate(p, 1000 + rep, 0);
      for (int j = 0; j < 170; ++j) {
        const double t = 50.0 * rng.uniform();
        const double lam = intensity_at(p, ev, t);
        const double maj = majorant_at(p, ev, t);
        ASSERT_GE(lam, p.mu);
        ASSERT_GE(maj, lam * (1 - 1e-12)) << phi.name() << " t=" << t;
        // Within the same inter-event gap the majorant does not increase.
        const double t2 = t + 1e-3;
        if (ev.count_at(t2) == ev.count_at(t) && ev.count_at(t) == ev.count_at(std::nextafter(t, 0.0))) {
          ASSERT_LE(majorant_at(p, ev, t2), maj * (1 + 1e-12));
        }
        ++checked;
      }
    }
  }
  EXPECT_GE(checked, 10000);
}

TEST(Simulate, PoissonRate) {
  const auto p = params(1.0, KernelSpec::zero(), KernelSpec::zero(), 1000.0);
  const auto ev = simulate(p, 5, 0);
  ev.validate(true);
  const double rate = ev.size() / 1000.0;
  EXPECT_GT(rate, 0.905);
  EXPECT_LT(rate, 1.095);
}

TEST(Simulate, LinearHawkesMeanMatchesRenewalOracle) {
  const double T = 1000.0;
  const auto p = params(1.0, KernelSpec::exponential(1.0, 0.5), KernelSpec::zero(), T);
  // E[N_T]/T from the Picard solution of m = mu + phi * m, integrated by the trapezoid rule.
  const double h = 0.05;
  const int n = static_cast<int>(T / h);
  const auto m = oracle::picard_volterra(1.0, [](double t) { return 0.5 * std::exp(-t); }, h, n, 1e-12);
  double integral = 0.5 * (m.front() + m.back());
  for (int i = 1; i < n; ++i) integral += m[i];
  const double expected = integral * h / T;
  EXPECT_NEAR(expected, 1.998, 2e-3);

  const int reps = 200;
  double s = 0, s2 = 0;
  for (int r = 0; r < reps; ++r) {
    const double x = simulate(p, 21, r).size() / T;
    s += x;
    s2 += x * x;
  }
  const double mean = s / reps, se = std::sqrt((s2 / reps - mean * mean) / reps);
  EXPECT_NEAR(mean, expected, 3 * se);
}

TEST(Simulate, FirstMomentBound) {
  // ||phi||_1 + ||k||_2^2 = 0.6 split several ways; E[N_T/T] <= 1 / (1 - 0.6).
  const std::vector<std::pair<double, double>> splits = {{0.6, 0.0}, {0.3, 0.3}, {0.0, 0.6}, {0.1, 0.5}};
  for (const auto& [l1, l2] : splits) {
    const auto phi = l1 > 0 ? KernelSpec::exponential(1.0, l1) : KernelSpec::zero();
    const auto k = l2 > 0 ? KernelSpec::exponential(1.0, std::sqrt(2.0 * l2)) : KernelSpec::zero();
    const auto p = params(1.0, phi, k, 200.0);
    const int reps = 100;
    double s = 0, s2 = 0;
    for (int r = 0; r < reps; ++r) {
      const double x = simulate(p, 8, r).size() / 200.0;
      s += x;
      s2 += x * x;
    }
    const double mean = s / reps, se = std::sqrt((s2 / reps - mean * mean) / reps);
    EXPECT_LE(mean, 2.5 + 3 * se) << l1 << " " << l2;
  }
}

TEST(Simulate, DeterministicAndCapped) {
  const auto p = params(1.0, KernelSpec::exponential(1.0, 0.3), KernelSpec::exponential(1.0, 0.6), 100.0);
  const auto a = simulate(p, 3, 4), b = simulate(p, 3, 4);
  EXPECT_EQ(a.times, b.times);
  EXPECT_EQ(a.signs, b.signs);
  auto capped = p;
  capped.max_events = 10;
  EXPECT_THROW(simulate(capped, 3, 4), ExplosionError);
  auto unstable = p;
  unstable.phi = KernelSpec::exponential(1.0, 0.9);
  try {
    simulate(unstable, 1, 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.invariant(), "stability");
  }
}

TEST(Simulate, BracketEqualsCount) {
  const auto p = params(2.0, KernelSpec::exponential(1.0, 0.3), KernelSpec::exponential(1.0, 0.6), 50.0);
  const auto ev = simulate(p, 9, 0);
  long long bracket = 0;
  for (int s : ev.signs) {
    ASSERT_TRUE(s == 1 || s == -1);
    bracket += static_cast<long long>(s) * s;
  }
  EXPECT_EQ(static_cast<std::size_t>(bracket), ev.count_at(50.0));
}

TEST(Simulate, MartingaleCentering) {
  const auto p = params(1.0, KernelSpec::exponential(1.0, 0.3), KernelSpec::exponential(1.0, 0.6), 100.0);
  const int reps = 600;
  std::vector<double> x(reps);
  double en = 0;
  for (int r = 0; r < reps; ++r) {
    const auto ev = simulate(p, 31, r);
    x[r] = static_cast<double>(ev.price_at(100.0));
    en += ev.size();
  }
  en /= reps;
  double s = 0, s2 = 0;
  for (double v : x) {
    s += v / std::sqrt(en);
    s2 += v * v / en;
  }
  const double mean = s / reps, se = std::sqrt((s2 / reps - mean * mean) / reps);
  EXPECT_LT(std::abs(mean), 4 * se);
}

TEST(Compensator, PoissonAndEmpty) {
  const std::vector<double> grid = {0.0, 0.5, 3.0, 10.0};
  const auto pois = params(1.7, KernelSpec::zero(), KernelSpec::zero(), 10.0);
  const auto ev = simulate(pois, 2, 0);
  const auto L = compensator(pois, ev, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(L[i], 1.7 * grid[i], 1e-12);
  const auto p = params(1.7, KernelSpec::mittag_leffler(0.7, 1.0, 0.3), KernelSpec::exponential(1.0, 0.5), 10.0);
  const auto L0 = compensator(p, stream({}, {}, 10.0), grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(L0[i], 1.7 * grid[i], 1e-12);
}

TEST(Compensator, SingleEventClosedForm) {
  const double mu = 0.8, nu = 1.5, c = 0.6, kap = 0.7, d = 0.9, t1 = 0.4;
  const auto p = params(mu, KernelSpec::exponential(nu, c), KernelSpec::exponential(kap, d), 5.0);
  const std::vector<double> grid = {0.2, 0.4, 1.0, 2.5, 5.0};
  const auto L = compensator(p, stream({t1}, {-1}, 5.0), grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i], x = std::max(0.0, t - t1);
    const double closed = mu * t + c / nu * (1 - std::exp(-nu * x)) + d * d / (2 * kap) * (1 - std::exp(-2 * kap * x));
    EXPECT_NEAR(L[i], closed, 1e-6 * closed) << t;
  }
}

TEST(Compensator, RecursiveAndWindowedAgree) {
  const auto p = params(1.0, KernelSpec::exponential(1.2, 0.4), KernelSpec::exponential(0.8, 0.7), 200.0);
  const auto ev = simulate(p, 12, 0);
  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i) grid.push_back(0.5 * i);
  const auto a = compensator(p, ev, grid, SumMode::Auto);
  const auto b = compensator(p, ev, grid, SumMode::Windowed);
  // The windowed compensator integrates Z^2 by quadrature (relative tolerance 1e-10 per gap).
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9 * std::max(1.0, a[i]));
  for (double t : {1.0, 17.3, 80.0, 150.01, 199.9}) {
    IntensityTracker r(p, SumMode::Auto), w(p, SumMode::Windowed);
    for (std::size_t i = 0; i < ev.size() && ev.times[i] < t; ++i) {
      r.add_event(ev.times[i], ev.signs[i]);
      w.add_event(ev.times[i], ev.signs[i]);
    }
    EXPECT_TRUE(r.recursive());
    EXPECT_NEAR(r.intensity(t), w.intensity(t), 1e-10);
  }
  for (std::size_t i = 1; i < a.size(); ++i) ASSERT_GE(a[i], a[i - 1]);
}

TEST(Residuals, PoissonGapsAndShortStreams) {
  const auto p = params(1.0, KernelSpec::zero(), KernelSpec::zero(), 50.0);
  const auto ev = simulate(p, 1, 0);
  const auto res = time_change_residuals(p, ev);
  ASSERT_EQ(res.size(), ev.size() - 1);
  for (std::size_t i = 0; i < res.size(); ++i) EXPECT_NEAR(res[i], ev.times[i + 1] - ev.times[i], 1e-12);
  EXPECT_TRUE(time_change_residuals(p, stream({1.0}, {1}, 50.0)).empty());
}

TEST(Residuals, ExponentialUnderCorrectModelNotUnderCorruption) {
  const auto p = params(1.0, KernelSpec::exponential(1.0, 0.4), KernelSpec::exponential(1.0, std::sqrt(0.4)), 3000.0);
  const auto ev = simulate(p, 4, 0);
  ASSERT_GT(ev.size(), 3000u);
  EXPECT_GT(ks_test_exp1(time_change_residuals(p, ev)).p_value, 0.01);

  auto bad = ev;
  for (double& t : bad.times) t *= 2;
  bad.horizon *= 2;
  auto pb = p;
  pb.horizon = bad.horizon;
  EXPECT_LT(ks_test_exp1(time_change_residuals(pb, bad)).p_value, 0.01);
}

TEST(Residuals, SingularKernels) {
  const auto p = params(1.0, KernelSpec::mittag_leffler(0.7, 1.0, 0.3), KernelSpec::mittag_leffler(0.8, 2.0, 0.4), 300.0);
  ASSERT_LT(p.stability(), 1.0);
  const auto ev = simulate(p, 6, 0);
  EXPECT_GT(ks_test_exp1(time_change_residuals(p, ev)).p_value, 0.01);
}

TEST(EventsCsv, RoundTrip) {
  const auto p = params(1.0, KernelSpec::exponential(1.0, 0.3), KernelSpec::exponential(1.0, 0.6), 20.0);
  const auto ev = simulate(p, 13, 0);
  std::stringstream ss;
  write_events_csv(ss, ev);
  const auto back = read_events_csv(ss, 20.0);
  EXPECT_EQ(back.times, ev.times);
  EXPECT_EQ(back.signs, ev.signs);
  std::stringstream bad("time,sign\n1.0,2\n");
  EXPECT_THROW(read_events_csv(bad, 20.0), Error);
}

TEST(ParamsJson, RoundTrip) {
  const auto p = params(1.25, KernelSpec::mittag_leffler(0.7, 1.0, 0.3), KernelSpec::exponential(1.0, 0.6), 20.0);
  const auto q = qhawkes_params_from_json(to_json(p));
  EXPECT_EQ(q.mu, p.mu);
  EXPECT_EQ(q.phi, p.phi);
  EXPECT_EQ(q.k, p.k);
  EXPECT_EQ(q.horizon, p.horizon);
}
