#pragma once

#include <string>
#include <variant>

#include "json.hpp"

namespace qhl {

// c * exp(-rate * t)
struct Exponential {
  double rate = 1.0;
  double scale = 1.0;
};

// scale * f^{alpha,lambda}(t) with the Mittag-Leffler density
// f^{alpha,lambda}(t) = lambda t^{alpha-1} E_{alpha,alpha}(-lambda t^alpha).
struct MittagLeffler {
  double alpha = 1.0;
  double lambda = 1.0;
  double scale = 1.0;
};

// K (x0 + t)^{-(1+alpha)}: alpha x^alpha int_x^inf phi -> K, and
// ||phi||_1 = K x0^{-alpha} / alpha.
struct PowerLawTail {
  double alpha = 0.5;
  double K = 0.5;
  double x0 = 1.0;

  // Unit-mass member of the family for a given cutoff (K = alpha x0^alpha).
  static PowerLawTail unit_mass(double alpha, double x0);
};

struct ZeroKernel {};

// A non-negative kernel on [0, inf), zero on t < 0.
class KernelSpec {
 public:
  using Variant = std::variant<Exponential, MittagLeffler, PowerLawTail, ZeroKernel>;

  KernelSpec() : v_(ZeroKernel{}) {}
  KernelSpec(Exponential e) : v_(e) {}
  KernelSpec(MittagLeffler m) : v_(m) {}
  KernelSpec(PowerLawTail p) : v_(p) {}
  KernelSpec(ZeroKernel z) : v_(z) {}

  static KernelSpec exponential(double rate, double scale) { return Exponential{rate, scale}; }
  static KernelSpec mittag_leffler(double alpha, double lambda, double scale = 1.0) {
    return MittagLeffler{alpha, lambda, scale};
  }
  static KernelSpec zero() { return ZeroKernel{}; }

  // Raw evaluation: 0 for t < 0, +inf at t = 0 for a singular kernel.
  double operator()(double t) const;

  // Integral over [0, t].
  double integral(double t) const;
  // Integral over [x, inf).
  double tail(double x) const;

  const Variant& variant() const { return v_; }
  bool is_zero() const;
  bool is_exponential() const { return std::holds_alternative<Exponential>(v_); }
  // True when the kernel diverges at t = 0.
  bool singular_at_zero() const;
  std::string name() const;

  // Throws DomainError when a parameter is outside its validity domain.
  void validate() const;

  friend bool operator==(const KernelSpec&, const KernelSpec&);

 private:
  Variant v_;
};

bool operator==(const Exponential&, const Exponential&);
bool operator==(const MittagLeffler&, const MittagLeffler&);
bool operator==(const PowerLawTail&, const PowerLawTail&);
inline bool operator==(const ZeroKernel&, const ZeroKernel&) { return true; }

// Kernel value at t >= 0. Throws DomainError for t < 0 or non-finite t.
double eval_kernel(const KernelSpec& spec, double t);

struct KernelNorms {
  double l1;
  double l2_sq;
};

// L1 norm and squared L2 norm over [0, inf). Closed forms where they exist,
// adaptive quadrature (relative error <= 1e-8) otherwise. Throws
// DivergenceError naming the failing norm.
KernelNorms kernel_norms(const KernelSpec& spec);
double kernel_l1(const KernelSpec& spec);
double kernel_l2_sq(const KernelSpec& spec);

// t -> amplitude * spec(t / time_scale), expressed in the same family.
KernelSpec rescaled(const KernelSpec& spec, double amplitude, double time_scale);

// Mittag-Leffler density f^{alpha,lambda}(t); +inf at t = 0 when alpha < 1.
double ml_density(double alpha, double lambda, double t);

// F^{alpha,lambda}(t) = int_0^t f^{alpha,lambda} = 1 - E_{alpha,1}(-lambda t^alpha),
// evaluated as lambda t^alpha E_{alpha,alpha+1}(-lambda t^alpha) to keep
// relative accuracy for small t.
double integrated_ml(double alpha, double lambda, double t);

// alpha x^alpha int_x^inf phi; tends to K for a kernel with the power-law tail
// phi(x) ~ K x^{-(1+alpha)}.
double tail_constant(const KernelSpec& phi, double alpha, double x);

// ---------------------------------------------------------------------------
// T-indexed kernel families used by the rescaling regimes.

struct PurelyQuadratic {
  double gamma;
};
struct Stable {
  double gamma;
  double beta;
};
struct NearlyUnstable {
  double a_T;
};
using Regime = std::variant<PurelyQuadratic, Stable, NearlyUnstable>;

std::string regime_name(const Regime& r);

enum class Which { K, Phi };

struct ScaledKernelPair {
  KernelSpec mother_k;
  KernelSpec mother_phi;
  Regime regime;
  double horizon = 1.0;

  // Throws ConfigError when the regime invariants do not hold.
  void validate() const;

  // k_T and phi_T as concrete kernels.
  KernelSpec k_T() const;
  KernelSpec phi_T() const;
};

double scaled_eval(const ScaledKernelPair& pair, Which which, double t);

// ---------------------------------------------------------------------------
// JSON: {"variant": "exponential", "rate": 1.0, "scale": 1.0},
//       {"variant": "mittag_leffler", "alpha": 0.8, "lambda": 1.0[, "scale": 1.0]},
//       {"variant": "power_law_tail", "alpha": 0.6, "K": 0.6, "x0": 1.0},
//       {"variant": "zero"}.
// Unknown fields are rejected.

nlohmann::json to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Regime& r);
Regime regime_from_json(const nlohmann::json& j);

}  // namespace qhl
