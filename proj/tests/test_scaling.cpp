#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qhl/errors.hpp"
#include "qhl/scaling.hpp"

using namespace qhl;

namespace {

QHawkesParams stable_params(double T, double gamma, double beta, double mu = 1.0) {
  ScaledKernelPair pair{KernelSpec::exponential(1.0, std::sqrt(2.0)), KernelSpec::exponential(2.0, 2.0),
                        Stable{gamma, beta}, T};
  pair.validate();
  QHawkesParams p;
  p.mu = mu;
  p.phi = pair.phi_T();
  p.k = pair.k_T();
  p.horizon = T;
  return p;
}

const KernelSpec kUnitK = KernelSpec::exponential(1.0, std::sqrt(2.0));

}  // namespace

TEST(RescaleStable, CountExample) {
  EventStream ev;
  ev.horizon = 100.0;
  for (int i = 0; i < 150; ++i) {
    ev.times.push_back(0.5 + i * 0.6);
    ev.signs.push_back(i % 2 ? -1 : 1);
  }
  QHawkesParams p;
  p.horizon = 100.0;
  const auto r = rescale_stable(ev, p, 65);
  EXPECT_DOUBLE_EQ(r.X[64], 1.5);
  EXPECT_EQ(r.X[0], 0.0);
  EXPECT_EQ(r.Pstar[0], 0.0);
  EXPECT_EQ(r.Mstar[0], 0.0);
}

TEST(RescaleStable, AllUpJumps) {
  auto p = stable_params(200.0, 0.3, 0.4);
  auto ev = simulate(p, 2, 0);
  for (int& s : ev.signs) s = 1;
  const auto r = rescale_stable(ev, p);
  EXPECT_NEAR(r.Pstar[r.grid.size() - 1], r.X[r.grid.size() - 1] * std::sqrt(200.0), 1e-12);
}

TEST(RescaleStable, PoissonLevel) {
  QHawkesParams p;
  p.horizon = 1000.0;
  const auto r = rescale_stable(simulate(p, 3, 0), p);
  const double x1 = r.X[r.grid.size() - 1];
  EXPECT_NEAR(x1, 1.0, 3.0 / std::sqrt(1000.0));
}

TEST(RescaleStable, PathInvariants) {
  const auto p = stable_params(500.0, 0.3, 0.4);
  for (int rep = 0; rep < 5; ++rep) {
    const auto ev = simulate(p, 17, rep);
    const auto r = rescale_stable(ev, p, 257);
    const auto br = bracket(r);
    for (Eigen::Index j = 0; j < r.grid.size(); ++j) {
      if (j > 0) {
        ASSERT_GE(r.X[j], r.X[j - 1]);
      }
      // [P*] = [M*] = X exactly: every jump of either has size 1/sqrt(T).
      ASSERT_EQ(br[j], r.X[j]);
      ASSERT_EQ(r.jump * r.jump, r.jump_var);
    }
  }
}

TEST(RescaleStable, ZstarTwoWaysAgree) {
  const double T = 2000.0, gamma = 0.3;
  const auto p = stable_params(T, gamma, 0.4);
  const auto ev = simulate(p, 5, 0);
  const auto r = rescale_stable(ev, p, 1025);
  const auto macro_k = KernelSpec::exponential(1.0, std::sqrt(2.0 * gamma));
  const auto z2 = zstar_from_increments(r, macro_k);
  double err = 0.0, scale = 0.0;
  for (Eigen::Index j = 0; j < r.grid.size(); ++j) {
    err = std::max(err, std::abs(z2[j] - r.Zstar[j]));
    scale = std::max(scale, std::abs(r.Zstar[j]));
  }
  // O(grid step) agreement; halving the step should roughly halve the gap.
  EXPECT_LT(err, 0.05 * std::max(1.0, scale));
  const auto coarse = rescale_stable(ev, p, 257);
  const auto zc = zstar_from_increments(coarse, macro_k);
  double errc = 0.0;
  for (Eigen::Index j = 0; j < coarse.grid.size(); ++j) errc = std::max(errc, std::abs(zc[j] - coarse.Zstar[j]));
  EXPECT_LT(err, errc);
}

TEST(RescaleStable, CompensatorTracksCountsAtRootTRate) {
  // Mean over replications of max_t |X - Lambda*| times sqrt(T) stays roughly constant.
  std::vector<double> c;
  for (double T : {100.0, 400.0, 1600.0}) {
    const auto p = stable_params(T, 0.3, 0.4);
    double s = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
      const auto path = rescale_stable(simulate(p, 40, r), p, 257);
      s += (path.X - path.Lambda_star).cwiseAbs().maxCoeff();
    }
    c.push_back(s / reps * std::sqrt(T));
  }
  for (double v : c) {
    EXPECT_GT(v, 0.5 * c[0]);
    EXPECT_LT(v, 2.0 * c[0]);
  }
}

TEST(Schedule, Examples) {
  const double alpha = 0.6;
  const double K = alpha / std::tgamma(1.0 - alpha);  // delta = 1
  const auto s = make_schedule(alpha, 1.0, 1.0, K, {100.0});
  EXPECT_NEAR(s.delta, 1.0, 1e-14);
  EXPECT_NEAR(s.a_T(100.0), 1.0 - std::pow(100.0, -0.6), 1e-15);
  EXPECT_NEAR(s.a_T(100.0), 0.936904, 1e-6);
  EXPECT_NEAR(s.mu_T(100.0), 0.158489, 1e-6);
  // alpha = 1/2 itself is outside the admissible range; approach it from above.
  const double a_half = 0.5 + 1e-10;
  EXPECT_NEAR(make_schedule(a_half, 1.0, 1.0, 1.0, {}).delta, 2.0 * std::sqrt(M_PI), 1e-8);
  EXPECT_NEAR(make_schedule(a_half, 1.0, 1.0, 1.0, {}).delta, 3.544908, 1e-6);
  EXPECT_THROW(make_schedule(0.5, 1.0, 1.0, 1.0, {}), ConfigError);
}

TEST(Schedule, ExactByConstruction) {
  const auto s = make_schedule(0.7, 1.3, 0.8, 0.5, {50.0, 500.0, 5000.0});
  for (double T : s.T_ladder) {
    EXPECT_NEAR((1.0 - s.a_T(T)) * std::pow(T, s.alpha), s.lambda_macro * s.delta, 1e-12);
    EXPECT_NEAR(std::pow(T, 1.0 - s.alpha) * s.mu_T(T), s.mu_star / s.delta, 1e-12);
  }
}

TEST(Schedule, MinimalHorizon) {
  const double K = 0.6 / std::tgamma(0.4);
  EXPECT_NO_THROW(make_schedule(0.6, 1.0, 1.0, K, {2.0}));
  EXPECT_NEAR(make_schedule(0.6, 1.0, 1.0, K, {2.0}).a_T(2.0), 0.3402, 1e-4);
  try {
    make_schedule(0.6, 1.0, 1.0, K, {1.0, 10.0});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.invariant(), "schedule_range");
    EXPECT_NE(std::string(e.what()).find("minimal admissible T is 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(make_schedule(0.4, 1.0, 1.0, 1.0, {}), ConfigError);
  EXPECT_THROW(make_schedule(0.7, -1.0, 1.0, 1.0, {}), ConfigError);
}

TEST(RescaleUnstable, EmptyStreamAndMismatch) {
  const auto phi = KernelSpec(PowerLawTail::unit_mass(0.6, 1.0));
  const auto s = make_schedule(0.6, 1.0, 1.0, 0.6, {100.0});
  const auto p = unstable_params(s, 100.0, phi, kUnitK);
  EXPECT_NEAR(p.stability(), s.a_T(100.0), 1e-10);
  EventStream empty;
  empty.horizon = 100.0;
  const auto r = rescale_unstable(empty, s, 100.0, p);
  EXPECT_EQ(r.X.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.Pstar.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(r.has_intensity());

  auto wrong = p;
  wrong.mu *= 1.1;
  try {
    rescale_unstable(empty, s, 100.0, wrong);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.invariant(), "schedule_mismatch");
  }
  auto wrong_k = p;
  wrong_k.k = rescaled(p.k, 0.5, 1.0);
  EXPECT_THROW(rescale_unstable(empty, s, 100.0, wrong_k), ConfigError);
}

TEST(RescaleUnstable, BracketIdentityAndMeanBound) {
  const auto phi = KernelSpec(PowerLawTail::unit_mass(0.6, 1.0));
  const double T = 200.0;
  const auto s = make_schedule(0.6, 1.0, 1.0, 0.6, {T});
  const auto p = unstable_params(s, T, phi, kUnitK);
  const int reps = 60;
  double sum = 0, sum2 = 0;
  for (int r = 0; r < reps; ++r) {
    const auto path = rescale_unstable(simulate(p, 14, r), s, T, p, 129);
    const auto br = bracket(path);
    for (Eigen::Index j = 0; j < path.grid.size(); ++j) ASSERT_EQ(br[j], path.X[j]);
    const double x1 = path.X[path.grid.size() - 1];
    sum += x1;
    sum2 += x1 * x1;
  }
  const double mean = sum / reps, se = std::sqrt((sum2 / reps - mean * mean) / reps);
  EXPECT_LE(mean, 1.0 + 3 * se);
}

TEST(TailConsistency, WarnsOnMismatchedK) {
  const auto phi = KernelSpec(PowerLawTail::unit_mass(0.6, 1.0));
  EXPECT_FALSE(check_tail_consistency(make_schedule(0.6, 1.0, 1.0, 0.6, {}), phi).has_value());
  EXPECT_TRUE(check_tail_consistency(make_schedule(0.6, 1.0, 1.0, 0.7, {}), phi).has_value());
}

TEST(RescaledCsv, Columns) {
  const auto p = stable_params(50.0, 0.3, 0.4);
  const auto r = rescale_stable(simulate(p, 1, 0), p, 9);
  std::ostringstream os;
  write_rescaled_csv(os, r);
  const auto text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,X,Pstar,Mstar,Zstar");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 10);
}

TEST(ScheduleJson, RoundTrip) {
  const auto s = make_schedule(0.7, 1.3, 0.8, 0.5, {50.0, 500.0});
  const auto t = schedule_from_json(to_json(s));
  EXPECT_EQ(t.alpha, s.alpha);
  EXPECT_EQ(t.delta, s.delta);
  EXPECT_EQ(t.T_ladder, s.T_ladder);
}
