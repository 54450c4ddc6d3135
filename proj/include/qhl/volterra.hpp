#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qhl/kernels.hpp"
#include "qhl/random.hpp"

namespace qhl {

// V = mu + Z^2,  Z_t = sqrt(gamma) int k(t - s) sqrt(V_s) dB_s.
struct PQModel {
  double mu = 1.0;
  double gamma = 0.3;
  KernelSpec k;
};

// V = mu + H + Z^2,  H_t = int beta phi(t - s) V_s ds.
struct SQModel {
  double mu = 1.0;
  double gamma = 0.3;
  double beta = 0.4;
  KernelSpec k;
  KernelSpec phi;
};

// V_t = int 1/2 f^{alpha,lambda}(t - s) [(1 + Z_s^2) ds + (lambda mu*)^{-1/2} sqrt(V_s) dB1_s],
// Z_t = int k(t - s) sqrt(V_s) dB2_s; the price is driven by B2.
struct NUModel {
  double alpha = 0.7;
  double lambda = 1.0;
  double mu_star = 1.0;
  KernelSpec k;
};

// V_t = V0 + 1/Gamma(alpha) int (t - s)^{alpha - 1} [lambda (theta0(s) - V_s) ds + lambda nu sqrt(V_s) dB_s],
// price noise rho dB + sqrt(1 - rho^2) dB_perp.
struct RoughHestonModel {
  double V0 = 0.04;
  double lambda = 1.0;
  double alpha = 0.6;
  // Piecewise constant on the grid cells; a single value means constant.
  std::vector<double> theta0 = {0.04};
  double nu = 0.3;
  double rho = 0.0;
};

using LimitModel = std::variant<PQModel, SQModel, NUModel, RoughHestonModel>;

struct LimitModelSpec {
  LimitModel model;
  int n_steps = 1024;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  // Recursive O(n) convolutions when every kernel is exponential.
  bool fast_path = false;

  // Throws ConfigError naming the violated invariant.
  void validate() const;
  std::string name() const;
};

struct MacroPath {
  std::string model;
  Eigen::VectorXd grid;
  Eigen::VectorXd V;
  Eigen::VectorXd Z;
  Eigen::VectorXd P;
  Eigen::VectorXd M;   // nearly unstable only
  Eigen::VectorXd H;   // stable quadratic only
  Eigen::VectorXd dB;  // Gaussian increments driving Z and P (B2 for NU)
  Eigen::VectorXd dB1; // NU volatility noise; rough Heston orthogonal price noise
  double clip_fraction = 0.0;
  std::vector<std::string> warnings;

  double dt() const { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }
  // int_0^t V ds by the left-point rule, on the grid.
  Eigen::VectorXd integrated_variance() const;
};

// Each path draws from RandomStream(spec.seed, stream).
MacroPath simulate_pq(const PQModel& m, const LimitModelSpec& spec, std::uint64_t stream = 0);
MacroPath simulate_sq(const SQModel& m, const LimitModelSpec& spec, std::uint64_t stream = 0);
MacroPath simulate_nu(const NUModel& m, const LimitModelSpec& spec, std::uint64_t stream = 0);
MacroPath simulate_rough_heston(const RoughHestonModel& m, const LimitModelSpec& spec, std::uint64_t stream = 0);
MacroPath simulate_limit(const LimitModelSpec& spec, std::uint64_t stream = 0);

// Cell weights used by the schemes, lag cell l covering [(l-1) dt, l dt]:
//   l2:   sqrt(int_cell g^2 / dt)   (stochastic convolutions)
//   mass: int_cell g                (drift convolutions)
// Index 0 is unused and zero.
Eigen::VectorXd l2_cell_weights(const KernelSpec& g, int n, double dt);
Eigen::VectorXd mass_cell_weights(const KernelSpec& g, int n, double dt);

// Forward variance split for an SQ path with exponential k and phi:
//   V_{t0+h} = mu + (e^{-nu h} Z_{t0} + Zt_h)^2 + Ht_h + e^{-kappa h} H_{t0},
// where Zt, Ht collect the contributions of the noise after t0.
struct ForwardDecomposition {
  int i0 = 0;                    // grid index of t0
  std::vector<int> h_steps;      // h in grid steps
  std::vector<double> predictable;    // mu + e^{-2 nu h} Z_{t0}^2 + e^{-kappa h} H_{t0}
  std::vector<double> cross;          // 2 e^{-nu h} Z_{t0} Zt_h
  std::vector<double> z_tilde;
  std::vector<double> h_tilde;
  std::vector<double> reconstructed;  // predictable + cross + Zt^2 + Ht
  std::vector<double> direct;         // V on the path
  double max_abs_error = 0.0;
};

ForwardDecomposition forward_decomposition_exp(const MacroPath& path, const SQModel& m, int i0,
                                               const std::vector<int>& h_steps);

// CSV columns t,V,Z,P[,M].
void write_macro_csv(std::ostream& os, const MacroPath& path);

nlohmann::json to_json(const LimitModelSpec& spec);
LimitModelSpec limit_spec_from_json(const nlohmann::json& j);

}  // namespace qhl
