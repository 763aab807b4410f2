#pragma once

namespace isingspec {

struct K0Value {
  double value = 0.0;
  bool underflow = false;  // true when K0(z) is below the smallest double
};

// Modified Bessel function of the second kind, order zero. Power series for
// z <= 2, Temme's continued fraction above. Throws DomainError for z <= 0.
K0Value bessel_k0_flagged(double z);

inline double bessel_k0(double z) { return bessel_k0_flagged(z).value; }

// e^z K0(z); never underflows, so it is the form used for large-distance
// ratios.
double bessel_k0_scaled(double z);

}  // namespace isingspec
