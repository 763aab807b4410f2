#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "isingspec/rng.hpp"
#include "isingspec/stats.hpp"

using namespace isingspec;
using doctest::Approx;

TEST_CASE("philox known-answer vectors") {
  using B = Philox::Block;
  CHECK(Philox::round10({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox::round10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox::round10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("generator streams are deterministic and distinct") {
  Philox a(42, 0), b(42, 0), c(42, 1), d(43, 0);
  bool all_equal = true, any_c = false, any_d = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u32();
    all_equal = all_equal && x == b.next_u32();
    any_c = any_c || x != c.next_u32();
    any_d = any_d || x != d.next_u32();
  }
  CHECK(all_equal);
  CHECK(any_c);
  CHECK(any_d);
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
}

TEST_CASE("uniform, integer and normal draws have the right moments") {
  Philox g(7);
  const int n = 200000;
  std::vector<double> u(n), z(n);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < n; ++i) {
    u[i] = g.uniform();
    z[i] = g.normal();
    counts[g.below(10)]++;
    REQUIRE(u[i] >= 0.0);
    REQUIRE(u[i] < 1.0);
  }
  CHECK(std::abs(stats::mean(u) - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(stats::mean(z)) < 4.0 / std::sqrt(n));
  CHECK(std::abs(stats::variance(z) - 1.0) < 4.0 * std::sqrt(2.0 / n));
  const auto mo = stats::shape_moments(z);
  CHECK(std::abs(mo.skewness) < 4.0 * stats::skewness_null_error(n));
  CHECK(std::abs(mo.excess_kurtosis) < 4.0 * stats::kurtosis_null_error(n));
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 10.0) * (c - n / 10.0) / (n / 10.0);
  CHECK(chi2 < 30.0);  // 9 dof, p ~ 4e-4
}

TEST_CASE("blocking recovers the autocorrelation of an AR(1) series") {
  Philox g(3);
  const double phi = 0.9;
  const int n = 1 << 18;
  std::vector<double> x(n);
  double v = g.normal() / std::sqrt(1 - phi * phi);
  for (int i = 0; i < n; ++i) {
    v = phi * v + g.normal();
    x[i] = v;
  }
  const auto b = stats::blocking(x);
  CHECK(b.plateau);
  const double tau = (1 + phi) / (2 * (1 - phi));  // 9.5
  CHECK(b.tau_int == Approx(tau).epsilon(0.2));
  // independent draws: no inflation
  std::vector<double> w(n);
  for (auto& e : w) e = g.normal();
  const auto bw = stats::blocking(w);
  CHECK(bw.tau_int == Approx(0.5).epsilon(0.2));
  CHECK(bw.error == Approx(1.0 / std::sqrt(n)).epsilon(0.2));
}

TEST_CASE("jackknife reproduces the delta method") {
  Philox g(5);
  const int n = 4000;
  std::vector<double> a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = 2.0 + 0.1 * g.normal();
    b[i] = 1.0 + 0.1 * g.normal();
  }
  const auto mean_est = stats::jackknife({a}, n, [](const std::vector<double>& m) { return m[0]; });
  CHECK(mean_est.error == Approx(std::sqrt(stats::variance(a) / n)).epsilon(1e-9));
  const auto ratio = stats::jackknife({a, b}, 50, [](const std::vector<double>& m) { return m[0] / m[1]; });
  const double delta = std::sqrt(0.01 / n * (1.0 + 4.0));  // ratio 2: var(a)/b^2 + a^2 var(b)/b^4
  CHECK(ratio.value == Approx(2.0).epsilon(0.01));
  CHECK(ratio.error == Approx(delta).epsilon(0.35));
  CHECK_THROWS_AS(stats::jackknife({a, std::vector<double>(3)}, 10, [](const auto& m) { return m[0]; }),
                  PreconditionError);
}

TEST_CASE("weighted linear fit") {
  std::vector<double> x = {0, 1, 2, 3, 4}, y, s(5, 0.5);
  for (double v : x) y.push_back(1.5 - 0.25 * v);
  const auto f = stats::linear_fit(x, y, s);
  CHECK(f.slope == Approx(-0.25).epsilon(1e-14));
  CHECK(f.intercept == Approx(1.5).epsilon(1e-14));
  // closed form: var(slope) = 1 / sum w (x - xbar)^2 = 0.25 / 10
  CHECK(f.slope_error == Approx(std::sqrt(0.025)).epsilon(1e-12));
  CHECK(f.chi2 == Approx(0.0).epsilon(1e-20));
  CHECK_THROWS_AS(stats::linear_fit({1, 1}, {0, 1}), PreconditionError);
}

TEST_CASE("shape moments of a skewed distribution") {
  Philox g(9);
  std::vector<double> e(400000);
  for (auto& v : e) v = -std::log(1.0 - g.uniform());
  const auto mo = stats::shape_moments(e);
  CHECK(mo.skewness == Approx(2.0).epsilon(0.05));
  CHECK(mo.excess_kurtosis == Approx(6.0).epsilon(0.15));
}

TEST_CASE("compensated summation") {
  stats::CompensatedSum s;
  for (double v : {1.0, 1e100, 1.0, -1e100}) s.add(v);
  CHECK(s.value() == 2.0);
}
