#include "qhl/kernels.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "json_fields.hpp"
#include "qhl/errors.hpp"
#include "qhl/mittag_leffler.hpp"
#include "qhl/quadrature.hpp"

namespace qhl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// int_0^inf (f^{alpha,1})^2, for alpha in (1/2, 1).
double ml_unit_l2_sq(double alpha) {
  auto sq = [alpha](double t) {
    const double f = ml_density(alpha, 1.0, t);
    return f * f;
  };
  QuadratureOptions opt{1e-11, 0.0, 4000};
  const auto head = integrate_power_singular(sq, 0.0, 1.0, 2.0 * alpha - 2.0, opt);
  const auto tail = integrate_to_infinity(sq, 1.0, opt);
  const double value = head.value + tail.value;
  if (!head.converged || !tail.converged) {
    if ((head.error + tail.error) > 1e-8 * value) {
      throw AccuracyLossError((head.error + tail.error) / value,
                              "L2 norm quadrature of Mittag-Leffler kernel did not converge");
    }
  }
  return value;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace

PowerLawTail PowerLawTail::unit_mass(double alpha, double x0) {
  return {alpha, alpha * std::pow(x0, alpha), x0};
}

bool operator==(const Exponential& a, const Exponential& b) {
  return a.rate == b.rate && a.scale == b.scale;
}
bool operator==(const MittagLeffler& a, const MittagLeffler& b) {
  return a.alpha == b.alpha && a.lambda == b.lambda && a.scale == b.scale;
}
bool operator==(const PowerLawTail& a, const PowerLawTail& b) {
  return a.alpha == b.alpha && a.K == b.K && a.x0 == b.x0;
}
bool operator==(const KernelSpec& a, const KernelSpec& b) { return a.v_ == b.v_; }

double ml_density(double alpha, double lambda, double t) {
  if (t < 0.0) return 0.0;
  if (alpha == 1.0) return lambda * std::exp(-lambda * t);
  if (t == 0.0) return alpha < 1.0 ? kInf : 0.0;
  const double ta = std::pow(t, alpha);
  return lambda * ta / t * mittag_leffler_fast(alpha, alpha, -lambda * ta);
}

double integrated_ml(double alpha, double lambda, double t) {
  if (!(alpha > 0.0 && alpha <= 1.0) || !(lambda > 0.0)) {
    throw DomainError("integrated_ml: need alpha in (0,1], lambda > 0");
  }
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("integrated_ml: need finite t >= 0");
  if (t == 0.0) return 0.0;
  if (alpha == 1.0) return -std::expm1(-lambda * t);
  const double x = lambda * std::pow(t, alpha);
  return x * mittag_leffler_fast(alpha, alpha + 1.0, -x);
}

double KernelSpec::operator()(double t) const {
  if (t < 0.0) return 0.0;
  return std::visit(
      Overloaded{
          [t](const Exponential& e) { return e.scale * std::exp(-e.rate * t); },
          [t](const MittagLeffler& m) { return m.scale * ml_density(m.alpha, m.lambda, t); },
          [t](const PowerLawTail& p) { return p.K * std::pow(p.x0 + t, -(1.0 + p.alpha)); },
          [](const ZeroKernel&) { return 0.0; }},
      v_);
}

double KernelSpec::integral(double t) const {
  if (t <= 0.0) return 0.0;
  return std::visit(
      Overloaded{[t](const Exponential& e) { return -e.scale * std::expm1(-e.rate * t) / e.rate; },
                 [t](const MittagLeffler& m) { return m.scale * integrated_ml(m.alpha, m.lambda, t); },
                 [t](const PowerLawTail& p) {
                   return p.K / p.alpha *
                          (std::pow(p.x0, -p.alpha) - std::pow(p.x0 + t, -p.alpha));
                 },
                 [](const ZeroKernel&) { return 0.0; }},
      v_);
}

double KernelSpec::tail(double x) const {
  x = std::max(x, 0.0);
  return std::visit(
      Overloaded{[x](const Exponential& e) { return e.scale * std::exp(-e.rate * x) / e.rate; },
                 [x](const MittagLeffler& m) {
                   if (m.alpha == 1.0) return m.scale * std::exp(-m.lambda * x);
                   return m.scale * mittag_leffler_fast(m.alpha, 1.0, -m.lambda * std::pow(x, m.alpha));
                 },
                 [x](const PowerLawTail& p) { return p.K / p.alpha * std::pow(p.x0 + x, -p.alpha); },
                 [](const ZeroKernel&) { return 0.0; }},
      v_);
}

double tail_constant(const KernelSpec& phi, double alpha, double x) {
  return alpha * std::pow(x, alpha) * phi.tail(x);
}

bool KernelSpec::is_zero() const {
  return std::visit(Overloaded{[](const Exponential& e) { return e.scale == 0.0; },
                               [](const MittagLeffler& m) { return m.scale == 0.0; },
                               [](const PowerLawTail& p) { return p.K == 0.0; },
                               [](const ZeroKernel&) { return true; }},
                    v_);
}

bool KernelSpec::singular_at_zero() const {
  const auto* m = std::get_if<MittagLeffler>(&v_);
  return m != nullptr && m->alpha < 1.0 && m->scale != 0.0;
}

std::string KernelSpec::name() const {
  return std::visit(Overloaded{[](const Exponential&) { return std::string("exponential"); },
                               [](const MittagLeffler&) { return std::string("mittag_leffler"); },
                               [](const PowerLawTail&) { return std::string("power_law_tail"); },
                               [](const ZeroKernel&) { return std::string("zero"); }},
                    v_);
}

void KernelSpec::validate() const {
  std::visit(Overloaded{[](const Exponential& e) {
                          require(e.rate > 0.0 && std::isfinite(e.rate), "exponential: rate must be > 0");
                          require(e.scale >= 0.0 && std::isfinite(e.scale),
                                  "exponential: scale must be >= 0");
                        },
                        [](const MittagLeffler& m) {
                          require(m.alpha > 0.0 && m.alpha <= 1.0,
                                  "mittag_leffler: alpha must lie in (0, 1]");
                          require(m.lambda > 0.0 && std::isfinite(m.lambda),
                                  "mittag_leffler: lambda must be > 0");
                          require(m.scale >= 0.0 && std::isfinite(m.scale),
                                  "mittag_leffler: scale must be >= 0");
                        },
                        [](const PowerLawTail& p) {
                          require(p.alpha > 0.0 && p.alpha < 1.0,
                                  "power_law_tail: alpha must lie in (0, 1)");
                          require(p.K > 0.0 && std::isfinite(p.K), "power_law_tail: K must be > 0");
                          require(p.x0 > 0.0 && std::isfinite(p.x0), "power_law_tail: x0 must be > 0");
                        },
                        [](const ZeroKernel&) {}},
             v_);
}

double eval_kernel(const KernelSpec& spec, double t) {
  if (!std::isfinite(t) || t < 0.0) {
    std::ostringstream os;
    os << "eval_kernel: t must be finite and >= 0, got " << t;
    throw DomainError(os.str());
  }
  spec.validate();
  return spec(t);
}

double kernel_l1(const KernelSpec& spec) {
  spec.validate();
  return std::visit(
      Overloaded{[](const Exponential& e) { return e.scale / e.rate; },
                 [](const MittagLeffler& m) { return m.scale; },
                 [](const PowerLawTail& p) { return p.K * std::pow(p.x0, -p.alpha) / p.alpha; },
                 [](const ZeroKernel&) { return 0.0; }},
      spec.variant());
}

double kernel_l2_sq(const KernelSpec& spec) {
  spec.validate();
  return std::visit(
      Overloaded{[](const Exponential& e) { return e.scale * e.scale / (2.0 * e.rate); },
                 [](const MittagLeffler& m) {
                   if (m.scale == 0.0) return 0.0;
                   if (m.alpha <= 0.5) {
                     throw DivergenceError("l2", "L2 norm of mittag_leffler kernel diverges for alpha <= 1/2");
                   }
                   if (m.alpha == 1.0) return m.scale * m.scale * m.lambda / 2.0;
                   return m.scale * m.scale * std::pow(m.lambda, 1.0 / m.alpha) *
                          ml_unit_l2_sq(m.alpha);
                 },
                 [](const PowerLawTail& p) {
                   return p.K * p.K * std::pow(p.x0, -1.0 - 2.0 * p.alpha) / (1.0 + 2.0 * p.alpha);
                 },
                 [](const ZeroKernel&) { return 0.0; }},
      spec.variant());
}

KernelNorms kernel_norms(const KernelSpec& spec) { return {kernel_l1(spec), kernel_l2_sq(spec)}; }

KernelSpec rescaled(const KernelSpec& spec, double amplitude, double time_scale) {
  if (!(time_scale > 0.0) || !(amplitude >= 0.0)) {
    throw DomainError("rescaled: need amplitude >= 0 and time_scale > 0");
  }
  return std::visit(
      Overloaded{[&](const Exponential& e) -> KernelSpec {
                   return Exponential{e.rate / time_scale, amplitude * e.scale};
                 },
                 [&](const MittagLeffler& m) -> KernelSpec {
                   // f^{a,l}(t/T) = T f^{a, l T^{-a}}(t)
                   return MittagLeffler{m.alpha, m.lambda * std::pow(time_scale, -m.alpha),
                                        amplitude * m.scale * time_scale};
                 },
                 [&](const PowerLawTail& p) -> KernelSpec {
                   return PowerLawTail{p.alpha, amplitude * p.K * std::pow(time_scale, 1.0 + p.alpha),
                                       time_scale * p.x0};
                 },
                 [](const ZeroKernel& z) -> KernelSpec { return z; }},
      spec.variant());
}

// ---------------------------------------------------------------------------

std::string regime_name(const Regime& r) {
  return std::visit(Overloaded{[](const PurelyQuadratic&) { return std::string("purely_quadratic"); },
                               [](const Stable&) { return std::string("stable"); },
                               [](const NearlyUnstable&) { return std::string("nearly_unstable"); }},
                    r);
}

namespace {

void require_config(bool ok, const std::string& invariant, const std::string& what) {
  if (!ok) throw ConfigError(invariant, what);
}

void require_unit(double value, const KernelSpec& k, const std::string& invariant,
                  const std::string& what) {
  if (k.is_zero()) return;  // degenerate zero kernel is allowed
  require_config(std::abs(value - 1.0) <= 1e-8, invariant, what);
}

}  // namespace

void ScaledKernelPair::validate() const {
  mother_k.validate();
  mother_phi.validate();
  require_config(horizon > 0.0 && std::isfinite(horizon), "horizon", "horizon T must be > 0");
  std::visit(
      Overloaded{
          [&](const PurelyQuadratic& r) {
            require_config(r.gamma > 0.0 && r.gamma < 1.0, "stability",
                           "purely quadratic regime needs gamma in (0, 1)");
            require_unit(kernel_l2_sq(mother_k), mother_k, "unit_norm_k", "mother k must have ||k||_2 = 1");
          },
          [&](const Stable& r) {
            require_config(r.gamma >= 0.0 && r.beta >= 0.0, "stability",
                           "stable regime needs gamma, beta >= 0");
            require_config(r.gamma + r.beta > 0.0 && r.gamma + r.beta < 1.0, "stability",
                           "stable regime needs 0 < gamma + beta < 1");
            require_unit(kernel_l2_sq(mother_k), mother_k, "unit_norm_k", "mother k must have ||k||_2 = 1");
            require_unit(kernel_l1(mother_phi), mother_phi, "unit_norm_phi",
                         "mother phi must have ||phi||_1 = 1");
          },
          [&](const NearlyUnstable& r) {
            require_config(r.a_T > 0.0 && r.a_T < 1.0, "stability",
                           "nearly unstable regime needs a_T in (0, 1)");
            require_config(r.a_T >= 0.5, "phi_nonnegative",
                           "nearly unstable regime needs a_T >= 1/2 so that phi_T = (2 a_T - 1) phi >= 0");
            require_unit(kernel_l2_sq(mother_k), mother_k, "unit_norm_k", "mother k must have ||k||_2 = 1");
            require_unit(kernel_l1(mother_phi), mother_phi, "unit_norm_phi",
                         "mother phi must have ||phi||_1 = 1");
          }},
      regime);
}

KernelSpec ScaledKernelPair::k_T() const {
  const double T = horizon;
  return std::visit(
      Overloaded{[&](const PurelyQuadratic& r) { return rescaled(mother_k, std::sqrt(r.gamma / T), T); },
                 [&](const Stable& r) { return rescaled(mother_k, std::sqrt(r.gamma / T), T); },
                 [&](const NearlyUnstable& r) {
                   return rescaled(mother_k, std::sqrt((1.0 - r.a_T) / T), T);
                 }},
      regime);
}

KernelSpec ScaledKernelPair::phi_T() const {
  const double T = horizon;
  return std::visit(
      Overloaded{[&](const PurelyQuadratic&) { return KernelSpec::zero(); },
                 [&](const Stable& r) { return rescaled(mother_phi, r.beta / T, T); },
                 [&](const NearlyUnstable& r) { return rescaled(mother_phi, 2.0 * r.a_T - 1.0, 1.0); }},
      regime);
}

double scaled_eval(const ScaledKernelPair& pair, Which which, double t) {
  pair.validate();
  if (!std::isfinite(t) || t < 0.0) throw DomainError("scaled_eval: t must be finite and >= 0");
  return which == Which::K ? pair.k_T()(t) : pair.phi_T()(t);
}

// ---------------------------------------------------------------------------

using detail::check_fields;
using detail::get_number;

nlohmann::json to_json(const KernelSpec& spec) {
  return std::visit(
      Overloaded{[](const Exponential& e) {
                   return nlohmann::json{{"variant", "exponential"}, {"rate", e.rate}, {"scale", e.scale}};
                 },
                 [](const MittagLeffler& m) {
                   return nlohmann::json{{"variant", "mittag_leffler"},
                                         {"alpha", m.alpha},
                                         {"lambda", m.lambda},
                                         {"scale", m.scale}};
                 },
                 [](const PowerLawTail& p) {
                   return nlohmann::json{{"variant", "power_law_tail"}, {"alpha", p.alpha}, {"K", p.K}, {"x0", p.x0}};
                 },
                 [](const ZeroKernel&) { return nlohmann::json{{"variant", "zero"}}; }},
      spec.variant());
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("variant") || !j.at("variant").is_string()) {
    throw ConfigError("schema", "kernel: missing string field 'variant'");
  }
  const auto variant = j.at("variant").get<std::string>();
  KernelSpec out;
  if (variant == "exponential") {
    check_fields(j, {"variant", "rate", "scale"}, "exponential kernel");
    out = Exponential{get_number(j, "rate", variant), get_number(j, "scale", variant)};
  } else if (variant == "mittag_leffler") {
    check_fields(j, {"variant", "alpha", "lambda", "scale"}, "mittag_leffler kernel");
    const double scale = j.contains("scale") ? get_number(j, "scale", variant) : 1.0;
    out = MittagLeffler{get_number(j, "alpha", variant), get_number(j, "lambda", variant), scale};
  } else if (variant == "power_law_tail") {
    check_fields(j, {"variant", "alpha", "K", "x0"}, "power_law_tail kernel");
    const double alpha = get_number(j, "alpha", variant);
    const double x0 = get_number(j, "x0", variant);
    const double K = j.contains("K") ? get_number(j, "K", variant) : alpha * std::pow(x0, alpha);
    out = PowerLawTail{alpha, K, x0};
  } else if (variant == "zero") {
    check_fields(j, {"variant"}, "zero kernel");
    out = ZeroKernel{};
  } else {
    throw ConfigError("schema", "kernel: unknown variant '" + variant + "'");
  }
  try {
    out.validate();
  } catch (const DomainError& e) {
    throw ConfigError("kernel_domain", e.what());
  }
  return out;
}

nlohmann::json to_json(const Regime& r) {
  return std::visit(
      Overloaded{[](const PurelyQuadratic& q) {
                   return nlohmann::json{{"kind", "purely_quadratic"}, {"gamma", q.gamma}};
                 },
                 [](const Stable& s) {
                   return nlohmann::json{{"kind", "stable"}, {"gamma", s.gamma}, {"beta", s.beta}};
                 },
                 [](const NearlyUnstable& u) {
                   return nlohmann::json{{"kind", "nearly_unstable"}, {"a_T", u.a_T}};
                 }},
      r);
}

Regime regime_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw ConfigError("schema", "regime: missing string field 'kind'");
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "purely_quadratic") {
    check_fields(j, {"kind", "gamma"}, "regime");
    return PurelyQuadratic{get_number(j, "gamma", kind)};
  }
  if (kind == "stable") {
    check_fields(j, {"kind", "gamma", "beta"}, "regime");
    return Stable{get_number(j, "gamma", kind), get_number(j, "beta", kind)};
  }
  if (kind == "nearly_unstable") {
    check_fields(j, {"kind", "a_T"}, "regime");
    return NearlyUnstable{get_number(j, "a_T", kind)};
  }
  throw ConfigError("schema", "regime: unknown kind '" + kind + "'");
}

}  // namespace qhl
