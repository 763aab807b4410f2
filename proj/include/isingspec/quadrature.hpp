#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace isingspec::quad {

struct Options {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int max_intervals = 4000;
};

struct Result {
  double value = 0.0;
  double abs_error = 0.0;
  long evaluations = 0;
  bool converged = true;
};

namespace detail {

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525452998, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
// Gauss weights for the odd-indexed Kronrod abscissae kXgk[1], kXgk[3], ...
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk21(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  std::array<double, 10> lo{}, hi{};
  double kronrod = kWgk[10] * fc;
  double gauss = 0.0;
  double resabs = std::abs(kronrod);
  for (int j = 0; j < 10; ++j) {
    const double dx = half * kXgk[j];
    lo[j] = f(center - dx);
    hi[j] = f(center + dx);
    kronrod += kWgk[j] * (lo[j] + hi[j]);
    resabs += kWgk[j] * (std::abs(lo[j]) + std::abs(hi[j]));
    if (j % 2 == 1) gauss += kWg[j / 2] * (lo[j] + hi[j]);
  }
  // QUADPACK error heuristic: scale the Gauss/Kronrod gap by the spread of
  // the integrand about its mean on the segment.
  const double mean = 0.5 * kronrod;
  double resasc = kWgk[10] * std::abs(fc - mean);
  for (int j = 0; j < 10; ++j) {
    resasc += kWgk[j] * (std::abs(lo[j] - mean) + std::abs(hi[j] - mean));
  }
  const double scale = std::abs(half);
  kronrod *= half;
  gauss *= half;
  resabs *= scale;
  resasc *= scale;
  double err = std::abs(kronrod - gauss);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  const double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) {
    err = std::max(err, 50.0 * eps * resabs);
  }
  return {a, b, kronrod, err};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod (10/21) quadrature on a finite interval.
template <class F>
Result integrate(const F& f, double a, double b, const Options& opt = {}) {
  Result res;
  if (a == b) return res;
  std::priority_queue<detail::Segment> heap;
  auto first = detail::gk21(f, a, b);
  res.evaluations = 21;
  double total = first.value;
  double total_err = first.error;
  heap.push(first);
  int intervals = 1;
  while (total_err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
    if (intervals >= opt.max_intervals) {
      res.converged = false;
      break;
    }
    auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // interval exhausted at machine resolution
      heap.push(worst);
      res.converged = false;
      break;
    }
    auto left = detail::gk21(f, worst.a, mid);
    auto right = detail::gk21(f, mid, worst.b);
    res.evaluations += 42;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++intervals;
  }
  // Re-sum from the leaves to shed accumulated update roundoff.
  double sum = 0.0, err = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  res.value = sum;
  res.abs_error = err;
  return res;
}

// Integral of f over [lo, inf) through the substitution m = lo * e^u.
// The u-axis is consumed in chunks of doubling width; integration stops once
// u >= u_min and a chunk contributes less than the tolerance, or u reaches
// u_cap. The caller supplies u_min past which the integrand is known to decay.
template <class F>
Result integrate_log_tail(const F& f, double lo, const Options& opt = {}, double u_min = 0.0,
                          double u_cap = 200.0) {
  auto g = [&](double u) {
    const double m = lo * std::exp(u);
    const double v = f(m);
    return v == 0.0 ? 0.0 : v * m;
  };
  Result res;
  double u0 = 0.0;
  double width = 1.0;
  int quiet_chunks = 0;
  while (u0 < u_cap) {
    const double u1 = std::min(u0 + width, u_cap);
    Options chunk_opt = opt;
    chunk_opt.abs_tol = opt.abs_tol * 0.25;
    auto part = integrate(g, u0, u1, chunk_opt);
    res.value += part.value;
    res.abs_error += part.abs_error;
    res.evaluations += part.evaluations;
    res.converged = res.converged && part.converged;
    const double threshold = std::max(opt.abs_tol, opt.rel_tol * std::abs(res.value)) * 0.1;
    if (u1 >= u_min && std::abs(part.value) <= threshold) {
      if (++quiet_chunks >= 2) break;
    } else {
      quiet_chunks = 0;
    }
    u0 = u1;
    width = std::min(width * 2.0, 16.0);
  }
  return res;
}

}  // namespace isingspec::quad
