#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qhl/kernels.hpp"
#include "qhl/qhawkes.hpp"

namespace qhl {

// Macroscopic observables of one microscopic path, sampled on the uniform grid
// t_j = j / (n_grid - 1) of [0, 1]. Path values at t use events with
// t_i <= t T (cadlag).
struct RescaledPath {
  std::string regime;
  double T = 0.0;
  Eigen::VectorXd grid;
  Eigen::VectorXd X;            // rescaled counts
  Eigen::VectorXd Pstar;        // rescaled price
  Eigen::VectorXd Mstar;        // rescaled compensated counts
  Eigen::VectorXd Zstar;        // rescaled feedback process
  Eigen::VectorXd Lambda_star;  // compensator of X
  Eigen::VectorXd lambda_star;  // rescaled intensity (nearly unstable only)
  Eigen::VectorXi counts;       // N_{tT}
  double jump = 0.0;      // |jump| of Pstar and Mstar at each event
  double jump_var = 0.0;  // jump * jump; X = counts * jump_var
  std::vector<std::string> warnings;

  bool has_intensity() const { return lambda_star.size() > 0; }
};

Eigen::VectorXd unit_grid(int n_grid);

// Bracket [Pstar] (equivalently [Mstar]) on the grid from the jump count.
Eigen::VectorXd bracket(const RescaledPath& path);

// Stable and purely quadratic regimes: X = N_{tT}/T, Pstar = P_{tT}/sqrt(T),
// Mstar = (N - Lambda)_{tT}/sqrt(T), Zstar = Z_{tT}. `params` must hold the
// scaled kernels k_T, phi_T used for the simulation, with horizon T.
RescaledPath rescale_stable(const EventStream& events, const QHawkesParams& params, int n_grid = 512,
                            const std::string& regime = "stable");

// Nearly unstable schedule derived from (alpha, lambda, mu*, K):
//   delta = K Gamma(1 - alpha) / alpha,
//   a_T   = 1 - lambda delta T^{-alpha},
//   mu_T  = mu* delta^{-1} T^{alpha - 1}.
struct UnstableSchedule {
  double alpha = 0.75;
  double lambda_macro = 1.0;
  double mu_star = 1.0;
  double K = 1.0;
  double delta = 1.0;
  std::vector<double> T_ladder;

  double a_T(double T) const;
  double mu_T(double T) const;
  // a_T > 0 iff T exceeds this value.
  double min_admissible_T() const;
};

// Throws ConfigError("schedule_range") if some ladder T gives a_T outside
// (0, 1); the message lists the minimal admissible integer T.
UnstableSchedule make_schedule(double alpha, double lambda_macro, double mu_star, double K,
                               std::vector<double> T_ladder);

// Microscopic parameters for horizon T: phi_T = (2 a_T - 1) phi,
// k_T = k(./T) sqrt((1 - a_T)/T), mu_T from the schedule.
QHawkesParams unstable_params(const UnstableSchedule& s, double T, const KernelSpec& mother_phi,
                              const KernelSpec& mother_k);

// Warning text when the empirical tail constant of phi at 1e3 x0 (or 1e3)
// deviates from the schedule's K by more than 5%.
std::optional<std::string> check_tail_consistency(const UnstableSchedule& s, const KernelSpec& phi);

// X = (1 - a_T) N_{tT} / (T mu_T); Mstar, Pstar scaled by
// sqrt((1 - a_T)/(T mu_T)); Zstar = Z_{tT} / sqrt(mu_T);
// lambda_star = (1 - a_T) lambda_{tT} / mu_T.
RescaledPath rescale_unstable(const EventStream& events, const UnstableSchedule& schedule, double T,
                              const QHawkesParams& params, int n_grid = 512);

// Zstar re-derived from the grid increments of Pstar:
//   Z(t_j) ~ sum_{m <= j} kernel(t_j - t_m) (Pstar(t_m) - Pstar(t_{m-1})),
// with `kernel` the macroscopic kernel (sqrt(T) k_T(T .)).
Eigen::VectorXd zstar_from_increments(const RescaledPath& path, const KernelSpec& macro_kernel);

// CSV columns t,X,Pstar,Mstar,Zstar[,lambda_star].
void write_rescaled_csv(std::ostream& os, const RescaledPath& path);

nlohmann::json to_json(const UnstableSchedule& s);
// Fields alpha, lambda, mu_star, K, T_ladder; goes through make_schedule.
UnstableSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace qhl
