#include "isingspec/bessel.hpp"

#include <cmath>
#include <limits>

#include "isingspec/common.hpp"

namespace isingspec {
namespace {

constexpr double kSeriesLimit = 2.0;

// K0 from its ascending series:
//   K0(z) = -(ln(z/2) + gamma) I0(z) + sum_{k>=1} (z^2/4)^k / (k!)^2 * H_k
double k0_series(double z) {
  const double q = 0.25 * z * z;
  double term = 1.0;  // (z^2/4)^k / (k!)^2
  double i0 = 1.0;
  double harmonic = 0.0;
  double tail = 0.0;
  for (int k = 1; k < 60; ++k) {
    term *= q / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    i0 += term;
    tail += term * harmonic;
    if (term * harmonic < 1e-18 * tail) break;
  }
  return -(std::log(0.5 * z) + kEulerGamma) * i0 + tail;
}

// e^z K0(z) by Steed's evaluation of Temme's continued fraction (z >= 2).
double k0_scaled_cf(double z) {
  double b = 2.0 * (1.0 + z);
  double d = 1.0 / b;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i < 10000; ++i) {
    a -= 2 * i;
    c = -a * c / (i + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < 1e-17) break;
  }
  return std::sqrt(kPi / (2.0 * z)) / s;
}

}  // namespace

K0Value bessel_k0_flagged(double z) {
  if (!(z > 0.0)) throw DomainError("bessel_k0: argument must be positive");
  if (z <= kSeriesLimit) return {k0_series(z), false};
  const double scaled = k0_scaled_cf(z);
  const double value = scaled * std::exp(-z);
  if (value < std::numeric_limits<double>::min()) return {0.0, true};
  return {value, false};
}

double bessel_k0_scaled(double z) {
  if (!(z > 0.0)) throw DomainError("bessel_k0_scaled: argument must be positive");
  if (z <= kSeriesLimit) return k0_series(z) * std::exp(z);
  return k0_scaled_cf(z);
}

}  // namespace isingspec
