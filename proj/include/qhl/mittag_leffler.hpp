#pragma once

#include <cmath>

namespace qhl {

// Which evaluation route produced a Mittag-Leffler value.
enum class MittagLefflerMethod { Closed, Series, Asymptotic, Integral };

struct MittagLefflerValue {
  double value;
  double rel_error;  // a-posteriori relative error bound
  MittagLefflerMethod method;
};

// Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z,
// alpha in (0, 2], beta > 0, to relative accuracy `rel_tol` (default 1e-10).
//
// Negative arguments are the hot path. Routes, by y = |z|^{1/alpha}:
//   * power series accumulated in long double while cancellation is mild;
//   * the algebraic asymptotic expansion once it is exponentially accurate
//     (alpha < 1, y >= 50);
//   * otherwise the real-line integral representation of E_{alpha,beta}(-x)
//     valid for 0 < alpha < 1, 0 < beta < 1 + alpha (larger beta is reduced
//     with E_{a,b}(z) = 1/Gamma(b) + z E_{a,a+b}(z)).
// Throws DomainError for parameters outside the domain and AccuracyLossError
// when no route reaches `rel_tol`.
MittagLefflerValue mittag_leffler_eval(double alpha, double beta, double z, double rel_tol = 1e-10);

inline double mittag_leffler(double alpha, double beta, double z) {
  return mittag_leffler_eval(alpha, beta, z).value;
}

// E_{alpha,beta}(z) for repeated kernel evaluation. Identical to
// mittag_leffler() except for z < 0, alpha < 1 below the asymptotic threshold,
// where values come from a piecewise Chebyshev interpolant built once per
// (alpha, beta) and checked against the direct route to 1e-11 relative when
// built. Thread-safe.
double mittag_leffler_fast(double alpha, double beta, double z);

// Truncated power series in any floating type, together with sum |terms|.
// Stops when the tail is below `tol` relative to the running sum.
template <class Scalar>
Scalar mittag_leffler_series(Scalar alpha, Scalar beta, Scalar z, Scalar& abs_sum, Scalar tol,
                             int max_terms = 100000) {
  using std::abs, std::exp, std::log, std::lgamma;
  Scalar sum = 0, mag = 0;
  if (z == 0) {
    abs_sum = 1 / std::tgamma(beta);
    return abs_sum;
  }
  const Scalar log_abs_z = log(abs(z));
  const Scalar peak = std::pow(abs(z), 1 / alpha) / alpha;
  int small_run = 0;
  for (int n = 0; n < max_terms; ++n) {
    const Scalar arg = alpha * n + beta;
    Scalar term = exp(n * log_abs_z - lgamma(arg));
    if (z < 0 && (n & 1)) term = -term;
    sum += term;
    mag += abs(term);
    if (n > peak && abs(term) <= tol * abs(sum)) {
      if (++small_run >= 3) break;
    } else {
      small_run = 0;
    }
  }
  abs_sum = mag;
  return sum;
}

}  // namespace qhl
