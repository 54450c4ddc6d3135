#pragma once

// Adaptive Gauss-Kronrod (7/15) quadrature with global error control.
//
// Panels are bisected in order of decreasing error estimate until the total
// estimate meets max(abs_tol, rel_tol * |I|). Nodes never touch panel
// endpoints, so integrands may be singular (but integrable) at breakpoints.

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <queue>
#include <span>
#include <vector>

namespace qhl {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int panels = 0;
  bool converged = false;
};

struct QuadratureOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int max_panels = 4000;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gauss_kronrod_15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double sum = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * sum;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * sum;
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

// Integrates f over [points.front(), points.back()], starting from the panels
// delimited by `points` (put known singularities or peaks there).
template <class F>
QuadratureResult integrate(F&& f, std::span<const double> points, QuadratureOptions opt = {}) {
  std::priority_queue<detail::Panel> heap;
  double total = 0.0, total_err = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (!(points[i + 1] > points[i])) continue;
    auto p = detail::gauss_kronrod_15(f, points[i], points[i + 1]);
    total += p.value;
    total_err += p.error;
    heap.push(p);
  }
  int panels = static_cast<int>(heap.size());
  auto done = [&] { return total_err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total)); };
  while (!heap.empty() && !done() && panels < opt.max_panels) {
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // Panel cannot be split further in double precision.
      heap.push({worst.a, worst.b, worst.value, 0.0});
      total_err -= worst.error;
      continue;
    }
    const auto left = detail::gauss_kronrod_15(f, worst.a, mid);
    const auto right = detail::gauss_kronrod_15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++panels;
  }
  // Re-sum to shed the drift of incremental updates.
  double sum = 0.0, err = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  return {sum, err, panels, err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(sum))};
}

template <class F>
QuadratureResult integrate(F&& f, double a, double b, QuadratureOptions opt = {}) {
  const std::array<double, 2> pts = {a, b};
  return integrate(f, std::span<const double>(pts), opt);
}

// Integral over [a, infinity) via t = a + u / (1 - u).
template <class F>
QuadratureResult integrate_to_infinity(F&& f, double a, QuadratureOptions opt = {}) {
  auto g = [&](double u) {
    const double w = 1.0 - u;
    const double v = f(a + u / w);
    return v == 0.0 ? 0.0 : v / (w * w);
  };
  const std::array<double, 4> pts = {0.0, 0.5, 0.9, 1.0};
  return integrate(g, std::span<const double>(pts), opt);
}

// Integral over [a, b] of an integrand behaving like (t - a)^p near a,
// p > -1. The substitution t = a + (b - a) s^q with q = 1 / (1 + p) makes the
// leading singular behaviour constant.
template <class F>
QuadratureResult integrate_power_singular(F&& f, double a, double b, double p,
                                          QuadratureOptions opt = {}) {
  const double q = 1.0 / (1.0 + p);
  const double len = b - a;
  auto g = [&](double s) { return f(a + len * std::pow(s, q)) * len * q * std::pow(s, q - 1.0); };
  return integrate(g, 0.0, 1.0, opt);
}

}  // namespace qhl
