#pragma once

// Reference computations used only by the tests. Each one takes a different
// route from the library code it checks.

#include <mpfr.h>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// E_{alpha,beta}(z) by its power series in MPFR, with enough bits to absorb the
// cancellation (terms peak near exp(|z|^{1/alpha})).
inline double ml_series_mpfr(double alpha, double beta, double z) {
  const double y = std::pow(std::abs(z), 1.0 / alpha);
  const mpfr_prec_t bits = 160 + static_cast<mpfr_prec_t>(1.5 * y);
  mpfr_t sum, term, zp, arg, g, tmp;
  mpfr_inits2(bits, sum, term, zp, arg, g, tmp, static_cast<mpfr_ptr>(nullptr));
  mpfr_set_zero(sum, 1);
  mpfr_set_ui(zp, 1, MPFR_RNDN);
  for (long n = 0;; ++n) {
    mpfr_set_d(arg, alpha, MPFR_RNDN);
    mpfr_mul_si(arg, arg, n, MPFR_RNDN);
    mpfr_set_d(tmp, beta, MPFR_RNDN);
    mpfr_add(arg, arg, tmp, MPFR_RNDN);
    mpfr_gamma(g, arg, MPFR_RNDN);
    mpfr_div(term, zp, g, MPFR_RNDN);
    mpfr_add(sum, sum, term, MPFR_RNDN);
    if (alpha * n + beta > y + 10.0 && n > 5) {
      mpfr_abs(tmp, term, MPFR_RNDN);
      mpfr_mul_2si(tmp, tmp, 120, MPFR_RNDN);
      mpfr_abs(g, sum, MPFR_RNDN);
      if (mpfr_cmp(tmp, g) < 0 || mpfr_zero_p(zp)) break;
    }
    if (z == 0.0) break;
    mpfr_mul_d(zp, zp, z, MPFR_RNDN);
  }
  const double out = mpfr_get_d(sum, MPFR_RNDN);
  mpfr_clears(sum, term, zp, arg, g, tmp, static_cast<mpfr_ptr>(nullptr));
  return out;
}

// E_{alpha,beta}(-x), x > 0, 0 < alpha < 1, 0 < beta <= 1, from the real-line
// integral representation, by double-exponential quadrature in long double.
inline double ml_integral_boost(double alpha, double beta, double x) {
  using R = long double;
  const R a = alpha, b = beta, X = x, pi = boost::math::constants::pi<R>();
  const R s1 = std::sin(pi * (1 - b)), s2 = std::sin(pi * (1 - b + a)), ca = std::cos(a * pi);
  auto K = [&](R c) -> R {
    if (c <= 0) return 0;
    const R e = std::pow(c, 1 / a);
    if (e > 11000) return 0;  // below the smallest long double
    const R num = std::pow(c, (1 - b) / a) * std::exp(-e) * (c * s1 + X * s2);
    return num / (a * pi * (c * c + 2 * c * X * ca + X * X));
  };
  const R pk = X * std::abs(ca);
  boost::math::quadrature::tanh_sinh<R> ts;
  boost::math::quadrature::exp_sinh<R> es;
  R total = 0;
  if (pk > 0) total += ts.integrate(K, R(0), pk);
  total += ts.integrate(K, pk, pk + 1);
  total += es.integrate(K, pk + 1, std::numeric_limits<R>::infinity());
  return static_cast<double>(total);
}

// Routes between the two above so that neither needs more than ~500 bits.
inline double ml_reference(double alpha, double beta, double z) {
  if (alpha == 1.0 && beta == 1.0) return std::exp(z);
  if (z < 0.0 && alpha < 1.0 && beta <= 1.0 && std::pow(-z, 1.0 / alpha) > 300.0) {
    return ml_integral_boost(alpha, beta, -z);
  }
  return ml_series_mpfr(alpha, beta, z);
}

// Solution of m(t) = c + int_0^t g(t - s) m(s) ds on the grid j h, j <= n, by
// Picard iteration with the trapezoid rule (g may be evaluated at 0).
inline std::vector<double> picard_volterra(double c, const std::function<double(double)>& g, double h, int n,
                                           double tol = 1e-13) {
  std::vector<double> gv(n + 1), m(n + 1, c), next(n + 1);
  for (int i = 0; i <= n; ++i) gv[i] = g(i * h);
  for (int it = 0; it < 500; ++it) {
    double diff = 0.0;
    for (int i = 0; i <= n; ++i) {
      double acc = 0.0;
      if (i > 0) {
        acc = 0.5 * (gv[i] * m[0] + gv[0] * m[i]);
        for (int j = 1; j < i; ++j) acc += gv[i - j] * m[j];
      }
      next[i] = c + h * acc;
      diff = std::max(diff, std::abs(next[i] - m[i]));
    }
    m.swap(next);
    if (diff < tol) break;
  }
  return m;
}

}  // namespace oracle
