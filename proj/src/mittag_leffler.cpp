#include "qhl/mittag_leffler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <numbers>
#include <sstream>
#include <utility>
#include <vector>

#include "qhl/errors.hpp"
#include "qhl/quadrature.hpp"

namespace qhl {

namespace {

constexpr double kPi = std::numbers::pi;
// |z|^{1/alpha} thresholds selecting the evaluation route.
constexpr double kSeriesMaxY = 12.0;
constexpr double kAsymptoticMinY = 50.0;
constexpr double kPositiveMaxY = 700.0;

// 1 / Gamma(w) for any real w, exact zeros at non-positive integers.
double reciprocal_gamma(double w) {
  if (w > 0.0) {
    if (w < 170.0) return 1.0 / std::tgamma(w);
    return std::exp(-std::lgamma(w));
  }
  const double r = w - std::nearbyint(w);
  if (r == 0.0) return 0.0;
  // Reflection: 1/Gamma(w) = sin(pi w) Gamma(1 - w) / pi.
  const double s = std::sin(kPi * r) * ((static_cast<long long>(std::nearbyint(w)) & 1) ? -1.0 : 1.0);
  return s * std::exp(std::lgamma(1.0 - w)) / kPi;
}

std::string describe(double alpha, double beta, double z) {
  std::ostringstream os;
  os.precision(17);
  os << "E_{" << alpha << "," << beta << "}(" << z << ")";
  return os.str();
}

MittagLefflerValue series_route(double alpha, double beta, double z) {
  long double mag = 0;
  const long double value = mittag_leffler_series<long double>(alpha, beta, z, mag, 1e-22L);
  const long double eps = std::numeric_limits<long double>::epsilon();
  const double err = static_cast<double>(64 * eps * mag / std::abs(value));
  return {static_cast<double>(value), value == 0 ? std::numeric_limits<double>::infinity() : err,
          MittagLefflerMethod::Series};
}

// E_{alpha,beta}(-x) ~ sum_{k>=1} (-1)^{k+1} x^{-k} / Gamma(beta - alpha k),
// truncated where the envelope x^{-k} Gamma(1 - beta + alpha k) / pi of the
// terms is smallest. Single terms are no guide: 1/Gamma nearly vanishes close
// to the poles.
struct AsymptoticCoefficients {
  static constexpr int kMaxTerms = 400;
  double inv_alpha = 1.0;
  std::vector<double> coef;  // (-1)^{k+1} / Gamma(beta - alpha k), k = 1..
  std::vector<double> env;   // bound on |coef|

  AsymptoticCoefficients(double alpha, double beta) : inv_alpha(1.0 / alpha) {
    for (int k = 1; k <= kMaxTerms; ++k) {
      const double w = beta - alpha * k;
      coef.push_back(((k & 1) ? 1.0 : -1.0) * reciprocal_gamma(w));
      env.push_back(w > 0.0 ? std::abs(coef.back()) : std::exp(std::lgamma(1.0 - w)) / kPi);
    }
  }

  bool sum(double x, MittagLefflerValue& out) const {
    const double inv_x = 1.0 / x;
    double s = 0.0, xpow = 1.0;
    double prev_env = std::numeric_limits<double>::infinity();
    double omitted = 0.0;
    for (int k = 1; k <= kMaxTerms; ++k) {
      xpow *= inv_x;
      const double e = env[k - 1] * xpow;
      if (k > 2 && e > prev_env) {
        omitted = e;
        break;
      }
      s += coef[k - 1] * xpow;
      prev_env = e;
      omitted = e;
      if (k > 2 && e <= 1e-18 * std::abs(s)) break;
    }
    if (s == 0.0) return false;
    // The expansion misses contributions of order exp(-x^{1/alpha}).
    const double expo = std::exp(-std::pow(x, inv_alpha));
    const double err = (omitted + expo) / std::abs(s) + 8e-16;
    out = {s, err, MittagLefflerMethod::Asymptotic};
    return err <= 1e-13;
  }
};

bool asymptotic_route(double alpha, double beta, double x, MittagLefflerValue& out) {
  if (x < 1e-300 || !std::isfinite(1.0 / x)) return false;
  return AsymptoticCoefficients(alpha, beta).sum(x, out);
}

// E_{alpha,beta}(-x) = int_0^inf K(chi) d chi for 0 < alpha < 1,
// 0 < beta < 1 + alpha, with
//   K = chi^{(1-beta)/alpha} e^{-chi^{1/alpha}}
//       [chi sin(pi(1-beta)) + x sin(pi(1-beta+alpha))]
//       / (alpha pi (chi^2 + 2 chi x cos(alpha pi) + x^2)).
MittagLefflerValue integral_route(double alpha, double beta, double x, double rel_tol) {
  const double c = std::cos(alpha * kPi);
  const double s1 = std::sin(kPi * (1.0 - beta));
  const double s2 = std::sin(kPi * (1.0 - beta + alpha));
  const double power = (1.0 - beta) / alpha;
  const double inv_alpha = 1.0 / alpha;
  const double pref = 1.0 / (alpha * kPi);
  auto kernel = [&](double chi) {
    if (chi <= 0.0) return 0.0;
    const double num = chi * s1 + x * s2;
    const double den = chi * chi + 2.0 * chi * x * c + x * x;
    return pref * std::pow(chi, power) * std::exp(-std::pow(chi, inv_alpha)) * num / den;
  };
  const double upper = std::pow(60.0, alpha);
  std::vector<double> pts = {0.0};
  if (c < 0.0) {
    // Denominator minimum (a narrow peak as alpha -> 1).
    const double peak = -x * c;
    const double width = x * std::sin(alpha * kPi);
    for (double p : {peak - 4 * width, peak - width, peak, peak + width, peak + 4 * width})
      if (p > pts.back() && p < upper) pts.push_back(p);
  }
  if (pts.size() == 1) pts.push_back(std::min(1.0, 0.5 * upper));
  pts.push_back(upper);

  QuadratureOptions opt{1e-3 * rel_tol, 0.0, 20000};
  QuadratureResult head;
  if (power < 0.0) {
    head = integrate_power_singular(kernel, 0.0, pts[1], power, opt);
  } else {
    head = integrate(kernel, 0.0, pts[1], opt);
  }
  const auto tail = integrate(kernel, std::span<const double>(pts).subspan(1), opt);
  const double value = head.value + tail.value;
  const double err = (head.error + tail.error) / std::abs(value) + 1e-15;
  return {value, err, MittagLefflerMethod::Integral};
}

MittagLefflerValue negative_argument(double alpha, double beta, double x, double rel_tol) {
  const double y = std::pow(x, 1.0 / alpha);
  MittagLefflerValue best{0.0, std::numeric_limits<double>::infinity(), MittagLefflerMethod::Series};
  if (y <= kSeriesMaxY || alpha > 1.0) {
    best = series_route(alpha, beta, -x);
    if (best.rel_error <= rel_tol) return best;
  }
  if (alpha < 1.0) {
    MittagLefflerValue asym{};
    if (y >= kAsymptoticMinY && asymptotic_route(alpha, beta, x, asym)) return asym;
    if (beta < 1.0 + alpha) {
      auto integ = integral_route(alpha, beta, x, rel_tol);
      if (integ.rel_error <= rel_tol) return integ;
      if (integ.rel_error < best.rel_error) best = integ;
    } else {
      // E_{a,b}(-x) = (E_{a,b-a}(-x) - 1/Gamma(b-a)) / (-x)
      const auto lower = negative_argument(alpha, beta - alpha, x, rel_tol * 1e-2);
      const double r = reciprocal_gamma(beta - alpha);
      const double value = (lower.value - r) / (-x);
      const double err = (std::abs(lower.value) * lower.rel_error + 1e-16 * std::abs(r)) /
                         std::abs(lower.value - r);
      best = {value, err, lower.method};
      if (err <= rel_tol) return best;
    }
  } else if (alpha == 1.0 && y >= kAsymptoticMinY) {
    MittagLefflerValue asym{};
    // For alpha = 1 the missing term is exactly of size e^{-x} x^{1-beta}.
    if (asymptotic_route(alpha, beta, x, asym)) {
      asym.rel_error += std::exp(-x) * std::pow(x, 1.0 - beta) / std::abs(asym.value);
      if (asym.rel_error <= rel_tol) return asym;
    }
  }
  if (best.rel_error > rel_tol) {
    throw AccuracyLossError(best.rel_error, "accuracy loss evaluating " +
                                                describe(alpha, beta, -x) +
                                                ": achieved relative bound " +
                                                std::to_string(best.rel_error));
  }
  return best;
}

}  // namespace

MittagLefflerValue mittag_leffler_eval(double alpha, double beta, double z, double rel_tol) {
  if (!(alpha > 0.0 && alpha <= 2.0) || !(beta > 0.0) || !std::isfinite(beta) ||
      !std::isfinite(z)) {
    throw DomainError("Mittag-Leffler parameters outside domain: " + describe(alpha, beta, z));
  }
  if (z == 0.0) return {reciprocal_gamma(beta), 0.0, MittagLefflerMethod::Closed};
  if (alpha == 1.0) {
    if (beta == 1.0) return {std::exp(z), 1e-16, MittagLefflerMethod::Closed};
    if (beta == 2.0) return {std::expm1(z) / z, 1e-16, MittagLefflerMethod::Closed};
  }
  if (alpha == 2.0 && beta == 1.0) {
    return {z < 0 ? std::cos(std::sqrt(-z)) : std::cosh(std::sqrt(z)), 1e-16,
            MittagLefflerMethod::Closed};
  }
  if (z > 0.0) {
    if (std::pow(z, 1.0 / alpha) > kPositiveMaxY) {
      throw DomainError("Mittag-Leffler overflow for " + describe(alpha, beta, z));
    }
    auto v = series_route(alpha, beta, z);
    if (v.rel_error > rel_tol) {
      throw AccuracyLossError(v.rel_error, "accuracy loss evaluating " + describe(alpha, beta, z));
    }
    return v;
  }
  return negative_argument(alpha, beta, -z, rel_tol);
}

namespace {

// Piecewise Chebyshev interpolant of x -> E_{alpha,beta}(-x) on [0, hi],
// segments uniform in log(1 + x).
class BandTable {
 public:
  static constexpr int kNodes = 16;

  BandTable(double alpha, double beta, double hi) : hi_(std::log1p(hi)), asym_(alpha, beta) {
    for (int segments = 8; segments <= 1024; segments *= 2) {
      if (build(alpha, beta, segments)) {
        ok_ = true;
        return;
      }
    }
  }

  bool ok() const { return ok_; }
  bool covers_log1p(double u) const { return u >= lo_ && u <= hi_; }

  double operator()(double x) const { return at_log1p(std::log1p(x)); }

  double at_log1p(double u) const {
    const int n = static_cast<int>(coef_.size());
    int seg = static_cast<int>((u - lo_) / width_);
    seg = std::clamp(seg, 0, n - 1);
    const double a = lo_ + seg * width_;
    const double s = 2.0 * (u - a) / width_ - 1.0;
    // Clenshaw
    const auto& c = coef_[seg];
    double b1 = 0.0, b2 = 0.0;
    for (int k = kNodes - 1; k >= 1; --k) {
      const double b0 = 2.0 * s * b1 - b2 + c[k];
      b2 = b1;
      b1 = b0;
    }
    return s * b1 - b2 + c[0];
  }

 private:
  bool build(double alpha, double beta, int segments) {
    width_ = (hi_ - lo_) / segments;
    coef_.assign(segments, {});
    auto direct = [&](double u) { return mittag_leffler(alpha, beta, -std::expm1(u)); };
    for (int seg = 0; seg < segments; ++seg) {
      const double a = lo_ + seg * width_;
      std::array<double, kNodes> f{};
      for (int j = 0; j < kNodes; ++j) {
        const double s = std::cos(kPi * (j + 0.5) / kNodes);
        f[j] = direct(a + 0.5 * (s + 1.0) * width_);
      }
      for (int k = 0; k < kNodes; ++k) {
        double acc = 0.0;
        for (int j = 0; j < kNodes; ++j) acc += f[j] * std::cos(kPi * k * (j + 0.5) / kNodes);
        coef_[seg][k] = (k == 0 ? 1.0 : 2.0) * acc / kNodes;
      }
    }
    // Check between nodes.
    for (int seg = 0; seg < segments; ++seg) {
      for (double frac : {0.013, 0.37, 0.71, 0.995}) {
        const double u = lo_ + (seg + frac) * width_;
        const double ref = direct(u);
        if (std::abs((*this)(std::expm1(u)) - ref) > 1e-11 * std::abs(ref)) return false;
      }
    }
    return true;
  }

  double lo_ = 0.0, hi_, width_ = 0.0;
  bool ok_ = false;

 public:
  // Past the table the direct route uses the asymptotic expansion.
  AsymptoticCoefficients asym_;

 private:
  std::vector<std::array<double, kNodes>> coef_;
};

std::shared_mutex table_mutex;
std::map<std::pair<double, double>, std::unique_ptr<BandTable>> tables;

const BandTable& band_table(double alpha, double beta) {
  const auto key = std::make_pair(alpha, beta);
  {
    std::shared_lock lock(table_mutex);
    if (auto it = tables.find(key); it != tables.end()) return *it->second;
  }
  std::unique_lock lock(table_mutex);
  auto& slot = tables[key];
  if (!slot) {
    // Slightly past the asymptotic threshold so boundary points hit the table.
    slot = std::make_unique<BandTable>(alpha, beta, std::pow(kAsymptoticMinY, alpha) * 1.001);
  }
  return *slot;
}

}  // namespace

double mittag_leffler_fast(double alpha, double beta, double z) {
  if (z < 0.0 && alpha > 0.0 && alpha < 1.0 && beta > 0.0 && std::isfinite(beta)) {
    // Kernel sums hit one (alpha, beta) pair many times in a row.
    thread_local double last_alpha = -1.0, last_beta = -1.0;
    thread_local const BandTable* last = nullptr;
    if (alpha != last_alpha || beta != last_beta) {
      last = &band_table(alpha, beta);
      last_alpha = alpha;
      last_beta = beta;
    }
    if (last->ok()) {
      const double u = std::log1p(-z);
      if (last->covers_log1p(u)) return last->at_log1p(u);
      MittagLefflerValue v{};
      if (last->asym_.sum(-z, v)) return v.value;
    }
  }
  return mittag_leffler(alpha, beta, z);
}

}  // namespace qhl
