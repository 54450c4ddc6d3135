#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qhl/kernels.hpp"
#include "qhl/volterra.hpp"

namespace qhl {

// ---------------------------------------------------------------------------
// Hoelder exponent by structure-function regression:
//   log mean |x_{i+l} - x_i|^q  ~  q H log l,   l in {1, 2, 4, ..., max_lag}.

struct HolderOptions {
  std::vector<double> q = {0.5, 1.0, 2.0};
  int min_lag = 1;
  int max_lag = 0;  // 0: n / 8, n = number of increments
};

struct HolderEstimate {
  double H = 0.0;          // mean over q of slope / q
  double r2 = 0.0;         // smallest R^2 over q
  bool smooth = false;     // H >= 0.99: report as ">= 1 (smooth)"
  std::vector<double> q;
  std::vector<double> slopes;     // raw log-log slopes
  std::vector<double> exponents;  // slope / q
  std::vector<double> r2_per_q;
  std::vector<int> lags;
  int n_paths = 1;

  std::string describe() const;
};

// Throws DomainError for a constant path, ConfigError for bad options and
// InsufficientDataError below 256 points.
HolderEstimate holder_estimate(const Eigen::VectorXd& path, const HolderOptions& opt = {});
// Moments averaged across paths before the regression.
HolderEstimate holder_estimate_pooled(const std::vector<Eigen::VectorXd>& paths, const HolderOptions& opt = {});

// ---------------------------------------------------------------------------
// Weak Zumbach statistic on a uniform grid:
//   C(tau) = Cov(r^2_past, RV_future) - Cov(RV_past, r^2_future),
// averaged over window ends t, with r the price change over the window and RV
// the realized variance (sum of squared returns on sub-windows, or int V).

enum class VolProxy { Realized, TrueV };

struct ZumbachOptions {
  int tau = 64;           // window in grid steps
  int sub_window = 16;    // realized-variance sub-window in grid steps
  double burn_in = 0.0;   // fraction of the grid dropped at the start
  VolProxy proxy = VolProxy::Realized;
  int n_boot = 1000;
  double level = 0.99;
  std::uint64_t seed = 0;
};

struct ZumbachResult {
  double statistic = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  double level = 0.0;
  int tau = 0;
  double tau_time = 0.0;
  long n_windows = 0;
  int n_paths = 0;
  std::string bootstrap;  // "paths" or "moving_block"

  bool ci_excludes_zero() const { return ci_low > 0.0 || ci_high < 0.0; }
};

// `price` and `variance` are grid paths of equal length (variance is read only
// for VolProxy::TrueV and may be empty otherwise). A single path uses a
// moving-block bootstrap with blocks of tau window ends; several paths are
// pooled and resampled whole. Throws InsufficientDataError below 30 windows.
ZumbachResult weak_zumbach(const Eigen::VectorXd& price, const Eigen::VectorXd& variance, double dt,
                           const ZumbachOptions& opt = {});
ZumbachResult weak_zumbach_pooled(const std::vector<Eigen::VectorXd>& prices,
                                  const std::vector<Eigen::VectorXd>& variances, double dt,
                                  const ZumbachOptions& opt = {});

// ---------------------------------------------------------------------------

// Two-sample Kolmogorov-Smirnov statistic. Throws DomainError on empty input.
double ks_distance(std::vector<double> a, std::vector<double> b);

struct KsTest {
  double statistic = 0.0;
  double p_value = 0.0;
  std::size_t n = 0;
};
// One-sample test against Exp(1); p from the asymptotic Kolmogorov law with
// Stephens' finite-n correction.
KsTest ks_test_exp1(std::vector<double> samples);
// P(K > x) for the Kolmogorov distribution.
double kolmogorov_survival(double x);

// ---------------------------------------------------------------------------
// Micro vs macro convergence across a T ladder.

enum class Functional { X1, VProxy, P1 };
std::string functional_name(Functional f);
Functional functional_from_name(const std::string& s);

struct LadderSpec {
  // PQ, SQ or NU. The macro kernels are the mother kernels of the micro model.
  LimitModelSpec macro;
  // NU only: mother phi with a power-law tail (its K drives the schedule).
  KernelSpec mother_phi;
  // Optional micro-side override of gamma (negative control); <= 0 disables.
  double micro_gamma = 0.0;
  std::vector<double> T_ladder;
  int n_reps = 100;
  // Macro reference sample size; 0 means n_reps. A larger reference lowers the
  // null level of the KS distance without more microscopic simulation.
  int macro_reps = 0;
  Functional functional = Functional::X1;
  double v_window = 1.0 / 16.0;  // VProxy: average of V over [1 - w, 1]
  std::uint64_t seed = 0;

  void validate() const;
  int reference_reps() const { return macro_reps > 0 ? macro_reps : n_reps; }
};

struct LadderRow {
  double T = 0.0;
  double ks = 0.0;
  double mc_error = 0.0;  // sd of the null KS statistic at these sample sizes
  int n_micro = 0;
  int n_macro = 0;
  double micro_mean = 0.0, macro_mean = 0.0;
  std::vector<std::string> warnings;
};

struct LadderResult {
  Functional functional = Functional::X1;
  std::vector<LadderRow> rows;
  // Non-increasing up to one inversion no larger than 2 mc_error.
  bool monotone_within_noise() const;
};

// Replications are independent and merged by index, so the result does not
// depend on `threads` (0 = hardware concurrency).
LadderResult convergence_ladder(const LadderSpec& spec, int threads = 1);

// Samples of the functional; exposed for tests and the harness.
std::vector<double> macro_functional_samples(const LadderSpec& spec, int threads = 1);
std::vector<double> micro_functional_samples(const LadderSpec& spec, double T, int threads = 1);

// ---------------------------------------------------------------------------

struct DiagnosticsReport {
  std::vector<HolderEstimate> holder;
  std::vector<ZumbachResult> zumbach;
  std::vector<LadderResult> convergence;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json to_json(const HolderEstimate& h);
nlohmann::json to_json(const ZumbachResult& z);
nlohmann::json to_json(const LadderResult& r);
nlohmann::json to_json(const DiagnosticsReport& r);
// Columns T,functional,ks,n_reps.
void write_ladder_csv(std::ostream& os, const LadderResult& r);

nlohmann::json to_json(const LadderSpec& s);
LadderSpec ladder_spec_from_json(const nlohmann::json& j);

}  // namespace qhl
