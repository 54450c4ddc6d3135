#include "qhl/volterra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "json_fields.hpp"
#include "qhl/errors.hpp"
#include "qhl/quadrature.hpp"

namespace qhl {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const char* invariant, const std::string& what) {
  if (!ok) throw ConfigError(invariant, what);
}

void require_unit_l2(const KernelSpec& k, const char* model) {
  if (k.is_zero()) return;
  const double l2 = kernel_l2_sq(k);
  require(std::abs(l2 - 1.0) <= 1e-6, "unit_norm_k",
          std::string(model) + ": k must have unit L2 norm (got ||k||_2^2 = " + std::to_string(l2) + ")");
}

// int_a^b g^2 for a kernel that may be singular at 0.
double cell_l2(const KernelSpec& g, double a, double b) {
  return std::visit(
      Overloaded{[&](const Exponential& e) {
                   const double r = 2.0 * e.rate;
                   return e.scale * e.scale * std::exp(-r * a) * -std::expm1(-r * (b - a)) / r;
                 },
                 [&](const PowerLawTail& p) {
                   const double q = 1.0 + 2.0 * p.alpha;
                   return p.K * p.K / q * (std::pow(p.x0 + a, -q) - std::pow(p.x0 + b, -q));
                 },
                 [&](const MittagLeffler& m) {
                   auto sq = [&](double t) {
                     const double v = g(t);
                     return v * v;
                   };
                   QuadratureOptions opt{1e-11, 0.0, 2000};
                   if (a == 0.0 && m.alpha < 1.0) {
                     return integrate_power_singular(sq, 0.0, b, 2.0 * m.alpha - 2.0, opt).value;
                   }
                   return integrate(sq, a, b, opt).value;
                 },
                 [](const ZeroKernel&) { return 0.0; }},
      g.variant());
}

// int_a^b g, through the tail far from 0 to avoid cancellation.
double cell_mass(const KernelSpec& g, double a, double b) {
  if (g.is_zero()) return 0.0;
  if (a >= 1.0) return g.tail(a) - g.tail(b);
  return g.integral(b) - g.integral(a);
}

// Geometric ratio of the cell weights of an exponential kernel.
double decay(const KernelSpec& g, double dt) {
  const auto* e = std::get_if<Exponential>(&g.variant());
  return e ? std::exp(-e->rate * dt) : 0.0;
}

bool fast_ok(const KernelSpec& g) { return g.is_zero() || g.is_exponential(); }

struct Setup {
  int n;
  double dt, sqdt;
  RandomStream rng;
};

Setup setup(const LimitModelSpec& spec, std::uint64_t stream) {
  spec.validate();
  const double dt = spec.horizon / spec.n_steps;
  return {spec.n_steps, dt, std::sqrt(dt), RandomStream(spec.seed, stream)};
}

MacroPath empty_path(const std::string& name, int n, double dt) {
  MacroPath p;
  p.model = name;
  p.grid.resize(n + 1);
  for (int j = 0; j <= n; ++j) p.grid[j] = j * dt;
  p.V.setZero(n + 1);
  p.Z.setZero(n + 1);
  p.P.setZero(n + 1);
  p.dB.setZero(n);
  return p;
}

// sum_{m < j} w[j - m] x[m]
inline double convolve(const Eigen::VectorXd& w, const Eigen::VectorXd& x, int j) {
  double acc = 0.0;
  const double* wp = w.data() + j;
  const double* xp = x.data();
  for (int m = 0; m < j; ++m) acc += wp[-m] * xp[m];
  return acc;
}

// Shared scheme for PQ (beta = 0, phi unused) and SQ.
MacroPath simulate_quadratic(const std::string& name, double mu, double gamma, double beta, const KernelSpec& k,
                             const KernelSpec& phi, const LimitModelSpec& spec, std::uint64_t stream) {
  auto [n, dt, sqdt, rng] = setup(spec, stream);
  MacroPath p = empty_path(name, n, dt);
  const bool with_h = name == "sq";
  if (with_h) p.H.setZero(n + 1);

  const Eigen::VectorXd K = std::sqrt(gamma) * l2_cell_weights(k, n, dt);
  const Eigen::VectorXd Phi = with_h ? Eigen::VectorXd(beta * mass_cell_weights(phi, n, dt)) : Eigen::VectorXd();
  const bool fast = spec.fast_path && fast_ok(k) && (!with_h || fast_ok(phi));
  const double rk = decay(k, dt), rphi = with_h ? decay(phi, dt) : 0.0;

  Eigen::VectorXd xi(n);  // sqrt(V_m) dB_m
  p.V[0] = mu;
  for (int j = 0; j < n; ++j) {
    const double db = sqdt * rng.normal();
    p.dB[j] = db;
    const double sv = std::sqrt(p.V[j]);
    xi[j] = sv * db;
    p.P[j + 1] = p.P[j] + xi[j];
    double z, h = 0.0;
    if (fast) {
      z = rk * p.Z[j] + K[1] * xi[j];
      if (with_h) h = rphi * p.H[j] + Phi[1] * p.V[j];
    } else {
      z = convolve(K, xi, j + 1);
      if (with_h) h = convolve(Phi, p.V, j + 1);
    }
    p.Z[j + 1] = z;
    if (with_h) {
      p.H[j + 1] = h;
      p.V[j + 1] = mu + h + z * z;
    } else {
      p.V[j + 1] = mu + z * z;
    }
  }
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

Eigen::VectorXd l2_cell_weights(const KernelSpec& g, int n, double dt) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n + 1);
  if (g.is_zero()) return w;
  for (int l = 1; l <= n; ++l) w[l] = std::sqrt(cell_l2(g, (l - 1) * dt, l * dt) / dt);
  return w;
}

Eigen::VectorXd mass_cell_weights(const KernelSpec& g, int n, double dt) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n + 1);
  if (g.is_zero()) return w;
  for (int l = 1; l <= n; ++l) w[l] = cell_mass(g, (l - 1) * dt, l * dt);
  return w;
}

Eigen::VectorXd MacroPath::integrated_variance() const {
  const Eigen::Index n = grid.size();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const double h = dt();
  for (Eigen::Index j = 1; j < n; ++j) x[j] = x[j - 1] + std::max(V[j - 1], 0.0) * h;
  return x;
}

void LimitModelSpec::validate() const {
  require(n_steps >= 2 && n_steps <= (1 << 16), "n_steps", "n_steps must lie in [2, 65536]");
  require(horizon > 0.0 && std::isfinite(horizon), "horizon", "horizon must be positive");
  std::visit(
      Overloaded{
          [](const PQModel& m) {
            require(m.mu > 0.0, "mu_positive", "pq: mu must be positive");
            require(m.gamma > 0.0 && m.gamma < 1.0, "stability", "pq: gamma must lie in (0, 1)");
            m.k.validate();
            require_unit_l2(m.k, "pq");
          },
          [](const SQModel& m) {
            require(m.mu > 0.0, "mu_positive", "sq: mu must be positive");
            require(m.gamma >= 0.0 && m.beta >= 0.0 && m.gamma + m.beta > 0.0 && m.gamma + m.beta < 1.0,
                    "stability", "sq: need gamma, beta >= 0 and gamma + beta in (0, 1)");
            m.k.validate();
            m.phi.validate();
            require_unit_l2(m.k, "sq");
            if (!m.phi.is_zero()) {
              require(std::abs(kernel_l1(m.phi) - 1.0) <= 1e-6, "unit_norm_phi", "sq: phi must have unit L1 norm");
            }
          },
          [](const NUModel& m) {
            require(m.alpha > 0.5 && m.alpha < 1.0, "alpha_range", "nu: alpha must lie in (1/2, 1)");
            require(m.lambda > 0.0 && m.mu_star > 0.0, "positive", "nu: lambda and mu_star must be positive");
            m.k.validate();
            require(!m.k.singular_at_zero(), "k_regular", "nu: k must be finite at 0");
          },
          [](const RoughHestonModel& m) {
            require(m.alpha > 0.5 && m.alpha < 1.0, "alpha_range", "rough heston: alpha must lie in (1/2, 1)");
            require(m.V0 >= 0.0 && m.lambda >= 0.0 && m.nu >= 0.0, "positive",
                    "rough heston: V0, lambda, nu must be non-negative");
            require(m.rho >= -1.0 && m.rho <= 1.0, "rho_range", "rough heston: rho must lie in [-1, 1]");
            require(!m.theta0.empty(), "theta0", "rough heston: theta0 must not be empty");
          }},
      model);
  if (const auto* rh = std::get_if<RoughHestonModel>(&model)) {
    require(rh->theta0.size() == 1 || static_cast<int>(rh->theta0.size()) == n_steps, "theta0",
            "rough heston: theta0 needs 1 or n_steps values");
  }
}

std::string LimitModelSpec::name() const {
  return std::visit(Overloaded{[](const PQModel&) { return std::string("pq"); },
                               [](const SQModel&) { return std::string("sq"); },
                               [](const NUModel&) { return std::string("nu"); },
                               [](const RoughHestonModel&) { return std::string("rough_heston"); }},
                    model);
}

MacroPath simulate_pq(const PQModel& m, const LimitModelSpec& spec, std::uint64_t stream) {
  return simulate_quadratic("pq", m.mu, m.gamma, 0.0, m.k, KernelSpec::zero(), spec, stream);
}

MacroPath simulate_sq(const SQModel& m, const LimitModelSpec& spec, std::uint64_t stream) {
  return simulate_quadratic("sq", m.mu, m.gamma, m.beta, m.k, m.phi, spec, stream);
}

MacroPath simulate_nu(const NUModel& m, const LimitModelSpec& spec, std::uint64_t stream) {
  auto [n, dt, sqdt, rng] = setup(spec, stream);
  MacroPath p = empty_path("nu", n, dt);
  p.M.setZero(n + 1);
  p.dB1.setZero(n);
  RandomStream rng1 = rng.substream(1);
  RandomStream rng2 = rng.substream(2);

  // Exact cell masses of 1/2 f^{alpha,lambda}.
  const Eigen::VectorXd W = 0.5 * mass_cell_weights(KernelSpec::mittag_leffler(m.alpha, m.lambda), n, dt);
  const Eigen::VectorXd K = l2_cell_weights(m.k, n, dt);
  const double c = 1.0 / std::sqrt(m.lambda * m.mu_star);
  const bool fast = spec.fast_path && fast_ok(m.k);
  const double rk = decay(m.k, dt);

  // Per cell m: drift (1 + Z_m^2) dt and noise c sqrt(V_m) dB1_m, both weighted
  // by the cell mass / dt.
  Eigen::VectorXd drive(n), xi(n);
  int clipped = 0;
  for (int j = 0; j < n; ++j) {
    const double db1 = sqdt * rng1.normal();
    const double db2 = sqdt * rng2.normal();
    p.dB1[j] = db1;
    p.dB[j] = db2;
    const double sv = std::sqrt(p.V[j]);
    xi[j] = sv * db2;
    drive[j] = (1.0 + p.Z[j] * p.Z[j]) + c * sv * db1 / dt;
    p.P[j + 1] = p.P[j] + xi[j];
    p.M[j + 1] = p.M[j] + sv * db1;
    p.Z[j + 1] = fast ? rk * p.Z[j] + K[1] * xi[j] : convolve(K, xi, j + 1);
    double v = convolve(W, drive, j + 1);
    if (v < 0.0) {
      ++clipped;
      v = 0.0;
    }
    p.V[j + 1] = v;
  }
  p.clip_fraction = static_cast<double>(clipped) / n;
  if (p.clip_fraction > 0.05) {
    std::ostringstream w;
    w << "clipped " << clipped << " of " << n << " variance proposals at 0";
    p.warnings.push_back(w.str());
  }
  return p;
}

MacroPath simulate_rough_heston(const RoughHestonModel& m, const LimitModelSpec& spec, std::uint64_t stream) {
  auto [n, dt, sqdt, rng] = setup(spec, stream);
  MacroPath p = empty_path("rough_heston", n, dt);
  p.dB1.setZero(n);
  RandomStream rng_perp = rng.substream(1);

  // int_cell (t^{alpha-1} / Gamma(alpha)) = ((l dt)^alpha - ((l-1) dt)^alpha) / Gamma(alpha + 1)
  Eigen::VectorXd G = Eigen::VectorXd::Zero(n + 1);
  const double g = 1.0 / std::tgamma(m.alpha + 1.0);
  for (int l = 1; l <= n; ++l) G[l] = g * (std::pow(l * dt, m.alpha) - std::pow((l - 1) * dt, m.alpha));
  const double rho_perp = std::sqrt(std::max(0.0, 1.0 - m.rho * m.rho));

  Eigen::VectorXd drive(n);
  int clipped = 0;
  p.V[0] = m.V0;
  for (int j = 0; j < n; ++j) {
    const double db = sqdt * rng.normal();
    const double dperp = sqdt * rng_perp.normal();
    p.dB[j] = db;
    p.dB1[j] = dperp;
    const double sv = std::sqrt(p.V[j]);
    const double theta = m.theta0.size() == 1 ? m.theta0[0] : m.theta0[j];
    drive[j] = m.lambda * (theta - p.V[j]) + m.lambda * m.nu * sv * db / dt;
    p.P[j + 1] = p.P[j] + sv * (m.rho * db + rho_perp * dperp);
    double v = m.V0 + convolve(G, drive, j + 1);
    if (v < 0.0) {
      ++clipped;
      v = 0.0;
    }
    p.V[j + 1] = v;
  }
  p.clip_fraction = static_cast<double>(clipped) / n;
  if (p.clip_fraction > 0.05) {
    std::ostringstream w;
    w << "clipped " << clipped << " of " << n << " variance proposals at 0";
    p.warnings.push_back(w.str());
  }
  return p;
}

MacroPath simulate_limit(const LimitModelSpec& spec, std::uint64_t stream) {
  return std::visit(Overloaded{[&](const PQModel& m) { return simulate_pq(m, spec, stream); },
                               [&](const SQModel& m) { return simulate_sq(m, spec, stream); },
                               [&](const NUModel& m) { return simulate_nu(m, spec, stream); },
                               [&](const RoughHestonModel& m) { return simulate_rough_heston(m, spec, stream); }},
                    spec.model);
}

// ---------------------------------------------------------------------------

ForwardDecomposition forward_decomposition_exp(const MacroPath& path, const SQModel& m, int i0,
                                               const std::vector<int>& h_steps) {
  const auto* ek = std::get_if<Exponential>(&m.k.variant());
  const auto* ephi = std::get_if<Exponential>(&m.phi.variant());
  if (!ek || !(ephi || m.phi.is_zero())) {
    throw ConfigError("exponential_kernels", "forward decomposition needs exponential k and phi");
  }
  if (path.model != "sq" || path.H.size() != path.V.size()) {
    throw ConfigError("path_model", "forward decomposition needs a path simulated from the SQ model");
  }
  const int n = static_cast<int>(path.grid.size()) - 1;
  if (i0 <= 0 || i0 >= n) throw ConfigError("t0_range", "forward decomposition: t0 must lie inside the grid");
  const double dt = path.dt();
  const double rk = std::exp(-ek->rate * dt);
  const double rphi = ephi ? std::exp(-ephi->rate * dt) : 0.0;
  const double K1 = std::sqrt(m.gamma) * std::sqrt(cell_l2(m.k, 0.0, dt) / dt);
  const double Phi1 = m.phi.is_zero() ? 0.0 : m.beta * cell_mass(m.phi, 0.0, dt);

  int hmax = 0;
  for (int h : h_steps) {
    if (h < 0 || i0 + h > n) throw ConfigError("h_range", "forward decomposition: t0 + h must stay on the grid");
    hmax = std::max(hmax, h);
  }
  // Fresh-noise parts by their O(1) recursions, started at 0 at t0.
  std::vector<double> zt(hmax + 1, 0.0), ht(hmax + 1, 0.0);
  for (int s = 0; s < hmax; ++s) {
    const int i = i0 + s;
    zt[s + 1] = rk * zt[s] + K1 * std::sqrt(path.V[i]) * path.dB[i];
    ht[s + 1] = rphi * ht[s] + Phi1 * path.V[i];
  }

  ForwardDecomposition out;
  out.i0 = i0;
  out.h_steps = h_steps;
  const double z0 = path.Z[i0], h0 = path.H[i0];
  for (int h : h_steps) {
    const double ez = std::pow(rk, h), eh = std::pow(rphi, h);
    const double pred = m.mu + ez * ez * z0 * z0 + eh * h0;
    const double cross = 2.0 * ez * z0 * zt[h];
    const double zf = ez * z0 + zt[h];
    const double rec = m.mu + zf * zf + ht[h] + eh * h0;
    out.predictable.push_back(pred);
    out.cross.push_back(cross);
    out.z_tilde.push_back(zt[h]);
    out.h_tilde.push_back(ht[h]);
    out.reconstructed.push_back(rec);
    out.direct.push_back(path.V[i0 + h]);
    out.max_abs_error = std::max(out.max_abs_error, std::abs(rec - path.V[i0 + h]));
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_macro_csv(std::ostream& os, const MacroPath& path) {
  const bool with_m = path.M.size() > 0;
  os << "t,V,Z,P" << (with_m ? ",M" : "") << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (Eigen::Index j = 0; j < path.grid.size(); ++j) {
    put(path.grid[j]);
    os << ',';
    put(path.V[j]);
    os << ',';
    put(path.Z[j]);
    os << ',';
    put(path.P[j]);
    if (with_m) {
      os << ',';
      put(path.M[j]);
    }
    os << '\n';
  }
}

nlohmann::json to_json(const LimitModelSpec& spec) {
  nlohmann::json model = std::visit(
      Overloaded{[](const PQModel& m) {
                   return nlohmann::json{{"kind", "pq"}, {"mu", m.mu}, {"gamma", m.gamma}, {"k", to_json(m.k)}};
                 },
                 [](const SQModel& m) {
                   return nlohmann::json{{"kind", "sq"},       {"mu", m.mu},         {"gamma", m.gamma},
                                         {"beta", m.beta},     {"k", to_json(m.k)}, {"phi", to_json(m.phi)}};
                 },
                 [](const NUModel& m) {
                   return nlohmann::json{{"kind", "nu"},           {"alpha", m.alpha}, {"lambda", m.lambda},
                                         {"mu_star", m.mu_star},   {"k", to_json(m.k)}};
                 },
                 [](const RoughHestonModel& m) {
                   nlohmann::json theta = m.theta0.size() == 1 ? nlohmann::json(m.theta0[0]) : nlohmann::json(m.theta0);
                   return nlohmann::json{{"kind", "rough_heston"}, {"V0", m.V0},   {"lambda", m.lambda},
                                         {"alpha", m.alpha},       {"theta0", theta}, {"nu", m.nu},
                                         {"rho", m.rho}};
                 }},
      spec.model);
  return {{"model", model},
          {"n_steps", spec.n_steps},
          {"horizon", spec.horizon},
          {"seed", spec.seed},
          {"fast_path", spec.fast_path}};
}

LimitModelSpec limit_spec_from_json(const nlohmann::json& j) {
  using detail::check_fields;
  using detail::get_number;
  check_fields(j, {"model", "n_steps", "horizon", "seed", "fast_path"}, "limit spec");
  if (!j.contains("model")) throw ConfigError("schema", "limit spec: missing 'model'");
  const auto& mj = j.at("model");
  if (!mj.is_object() || !mj.contains("kind") || !mj.at("kind").is_string()) {
    throw ConfigError("schema", "limit spec: model needs a string 'kind'");
  }
  const std::string kind = mj.at("kind").get<std::string>();
  LimitModelSpec spec;
  if (kind == "pq") {
    check_fields(mj, {"kind", "mu", "gamma", "k"}, "pq model");
    spec.model = PQModel{get_number(mj, "mu", "pq"), get_number(mj, "gamma", "pq"),
                         mj.contains("k") ? kernel_from_json(mj.at("k")) : KernelSpec::zero()};
  } else if (kind == "sq") {
    check_fields(mj, {"kind", "mu", "gamma", "beta", "k", "phi"}, "sq model");
    spec.model = SQModel{get_number(mj, "mu", "sq"), get_number(mj, "gamma", "sq"), get_number(mj, "beta", "sq"),
                         mj.contains("k") ? kernel_from_json(mj.at("k")) : KernelSpec::zero(),
                         mj.contains("phi") ? kernel_from_json(mj.at("phi")) : KernelSpec::zero()};
  } else if (kind == "nu") {
    check_fields(mj, {"kind", "alpha", "lambda", "mu_star", "k"}, "nu model");
    spec.model = NUModel{get_number(mj, "alpha", "nu"), get_number(mj, "lambda", "nu"),
                         get_number(mj, "mu_star", "nu"),
                         mj.contains("k") ? kernel_from_json(mj.at("k")) : KernelSpec::zero()};
  } else if (kind == "rough_heston") {
    check_fields(mj, {"kind", "V0", "lambda", "alpha", "theta0", "nu", "rho"}, "rough heston model");
    RoughHestonModel m;
    m.V0 = get_number(mj, "V0", "rough heston");
    m.lambda = get_number(mj, "lambda", "rough heston");
    m.alpha = get_number(mj, "alpha", "rough heston");
    m.nu = get_number(mj, "nu", "rough heston");
    m.rho = get_number(mj, "rho", "rough heston", 0.0);
    if (mj.contains("theta0") && mj.at("theta0").is_number()) {
      m.theta0 = {mj.at("theta0").get<double>()};
    } else if (mj.contains("theta0")) {
      m.theta0 = detail::get_numbers(mj, "theta0", "rough heston");
    } else {
      m.theta0 = {m.V0};
    }
    spec.model = m;
  } else {
    throw ConfigError("schema", "limit spec: unknown model kind '" + kind + "'");
  }
  spec.n_steps = static_cast<int>(get_number(j, "n_steps", "limit spec", 1024));
  spec.horizon = get_number(j, "horizon", "limit spec", 1.0);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("schema", "limit spec: seed must be a non-negative integer");
    spec.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("fast_path")) {
    if (!j.at("fast_path").is_boolean()) throw ConfigError("schema", "limit spec: fast_path must be boolean");
    spec.fast_path = j.at("fast_path").get<bool>();
  }
  spec.validate();
  return spec;
}

}  // namespace qhl
