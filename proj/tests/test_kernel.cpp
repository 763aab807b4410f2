#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "isingspec/bessel.hpp"
#include "isingspec/common.hpp"
#include "isingspec/kernel.hpp"
#include "isingspec/quadrature.hpp"
#include "oracles.hpp"

using namespace isingspec;
using doctest::Approx;

namespace {

MassSpectralMeasure power_rho_tilde() {
  // d rho_tilde = m^{-3/4} dm on [1, inf), i.e. d rho = pi m^{-7/4} dm
  return MassSpectralMeasure({}, {{1.0, INFINITY, 1.0, -0.75}});
}

MassSpectralMeasure power_rho() {
  return MassSpectralMeasure({}, {{1.0, INFINITY, 1.0, -1.75}}, MeasureKind::rho);
}

}  // namespace

TEST_CASE("gauss-kronrod rule integrates polynomials exactly") {
  for (int deg = 0; deg <= 30; ++deg) {
    auto f = [deg](double x) { return std::pow(x, deg); };
    auto seg = quad::detail::gk21(f, -1.0, 1.0);
    const double exact = deg % 2 == 0 ? 2.0 / (deg + 1) : 0.0;
    CHECK(seg.value == Approx(exact).epsilon(1e-14));
  }
}

TEST_CASE("adaptive quadrature handles endpoint singularities and tails") {
  auto r = quad::integrate([](double x) { return std::log(x); }, 0.0, 1.0);
  CHECK(r.value == Approx(-1.0).epsilon(1e-10));
  auto t = quad::integrate_log_tail([](double m) { return std::pow(m, -1.75); }, 1.0);
  CHECK(t.value == Approx(4.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("bessel_k0 against the integral representation") {
  CHECK(bessel_k0(1.0) == Approx(0.421024438240708333).epsilon(1e-13));
  CHECK(bessel_k0(1.0) == Approx(oracle::k0_integral(1.0)).epsilon(1e-12));
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> logz(std::log(1e-6), std::log(700.0));
  for (int i = 0; i < 200; ++i) {
    const double z = std::exp(logz(gen));
    CHECK(bessel_k0_scaled(z) == Approx(oracle::k0_scaled_integral(z)).epsilon(1e-12));
  }
  // both sides of the series / continued-fraction switch
  for (double z : {1.999999, 2.0, 2.000001}) {
    CHECK(bessel_k0(z) == Approx(oracle::k0_integral(z)).epsilon(1e-12));
  }
}

TEST_CASE("bessel_k0 small and large argument limits") {
  for (double z : {1e-6, 1e-8, 1e-10}) {
    const double lead = -std::log(z / 2.0) - kEulerGamma;
    CHECK(bessel_k0(z) / lead == Approx(1.0).epsilon(1e-8));
  }
  const double oz = bessel_k0(20.0) / (std::sqrt(kPi / 40.0) * std::exp(-20.0));
  CHECK(oz == Approx(0.9939172637497558).epsilon(1e-12));
  auto big = bessel_k0_flagged(800.0);
  CHECK(big.underflow);
  CHECK(big.value == 0.0);
  CHECK_FALSE(bessel_k0_flagged(700.0).underflow);
  CHECK_THROWS_AS(bessel_k0(0.0), DomainError);
  CHECK_THROWS_AS(bessel_k0(-1.0), DomainError);
}

TEST_CASE("rho_from_rho_tilde reweights by pi/m") {
  auto a = rho_from_rho_tilde(MassSpectralMeasure::single_atom(1.0, 1.0));
  CHECK(a.atoms()[0].weight == Approx(kPi));
  auto b = rho_from_rho_tilde(MassSpectralMeasure::single_atom(2.0, 3.0));
  CHECK(b.atoms()[0].weight == Approx(3.0 * kPi / 2.0));
  CHECK(b.m1() == 2.0);
  auto c = rho_from_rho_tilde(power_rho_tilde());
  CHECK(c.pieces()[0].amplitude == Approx(kPi));
  CHECK(c.pieces()[0].exponent == Approx(-1.75));
  CHECK(c.kind() == MeasureKind::rho);
  CHECK_THROWS_AS(rho_from_rho_tilde(c), PreconditionError);
}

TEST_CASE("measure invariants are enforced") {
  CHECK_THROWS_AS(MassSpectralMeasure({{-1.0, 1.0}}, {}), PreconditionError);
  CHECK_THROWS_AS(MassSpectralMeasure({{1.0, 0.0}}, {}), PreconditionError);
  CHECK_THROWS_AS(MassSpectralMeasure({{1.0, 1.0}}, {}, MeasureKind::rho_tilde, 0.5),
                  PreconditionError);
  CHECK_THROWS_AS(MassSpectralMeasure({{1.0, 1.0}}, {}, MeasureKind::rho_tilde, 1.5),
                  PreconditionError);
  // rho must be finite: unbounded rho pieces need p < -1
  CHECK_THROWS_AS(MassSpectralMeasure({}, {{1.0, INFINITY, 1.0, -0.5}}, MeasureKind::rho),
                  PreconditionError);
  CHECK_THROWS_AS(MassSpectralMeasure({}, {{1.0, INFINITY, 1.0, 0.5}}), PreconditionError);
  CHECK_NOTHROW(power_rho_tilde());
  try {
    MassSpectralMeasure({{-1.0, 0.0}}, {{2.0, 1.0, 1.0, -3.0}});
    FAIL("expected throw");
  } catch (const PreconditionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("mass must be positive") != std::string::npos);
    CHECK(msg.find("weight must be positive") != std::string::npos);
    CHECK(msg.find("m_hi must exceed m_lo") != std::string::npos);
  }
}

TEST_CASE("measure text round trip") {
  const std::string doc =
      "# test measure\n"
      "m1 1\n"
      "atom 1 1\n"
      "atom 1.618 0.3   # second particle\n"
      "piece 2 inf 0.5 -0.75\n";
  auto m = parse_measure(doc);
  CHECK(m.atoms().size() == 2);
  CHECK(m.pieces()[0].infinite());
  auto again = parse_measure(serialize_measure(m));
  CHECK(serialize_measure(again) == serialize_measure(m));
  CHECK_THROWS_AS(parse_measure("atom 1\n"), PreconditionError);
  CHECK_THROWS_AS(parse_measure("kind rho\npiece 1 inf 1 -0.5\n"), PreconditionError);
}

TEST_CASE("kernel_H for a single atom") {
  KernelContext ctx(MassSpectralMeasure::single_atom(1.0, 1.0));
  const double h01 = kernel_H(ctx, RadialPoint::make(0.0, 1.0));
  CHECK(h01 == Approx(0.421024438240708333).epsilon(1e-12));
  CHECK(kernel_H(ctx, RadialPoint::make(0.6, 0.8)) == Approx(h01).epsilon(1e-14));
  CHECK(h01 == Approx(oracle::h_inner_direct(1.0, 0.6, 0.8)).epsilon(1e-9));
  CHECK_THROWS_AS(kernel_H(ctx, RadialPoint::make(0.0, 0.0)), DivergenceError);
}

TEST_CASE("kernel_H equals direct p-quadrature of the spectral formula") {
  auto measure = MassSpectralMeasure({{1.0, 1.0}, {1.618, 0.3}, {1.989, 0.1}}, {});
  KernelContext ctx(measure);
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> s_dist(0.3, 3.0), y_dist(-3.0, 3.0);
  for (int i = 0; i < 12; ++i) {
    const double s = s_dist(gen), y = y_dist(gen);
    double direct = 0.0;
    for (const auto& a : measure.atoms()) direct += a.weight * oracle::h_inner_direct(a.mass, s, y);
    CHECK(kernel_H(ctx, RadialPoint::make(s, y)) == Approx(direct).epsilon(1e-8));
  }
}

TEST_CASE("kernel_H for the scale-free rho_tilde piece") {
  // Change of variables x = m * lambda gives
  //   lambda^{1/4} H(0, lambda) = int_lambda^inf K0(x) x^{-3/4} dx
  //                             = 2^{-7/4} Gamma(1/8)^2 - int_0^lambda K0(x) x^{-3/4} dx.
  KernelContext ctx(power_rho_tilde());
  const double full = 16.87493102136945519880;
  const double below[] = {7.84127809690465545, 5.33050865805499349};
  const double lambdas[] = {1e-3, 1e-4};
  for (int i = 0; i < 2; ++i) {
    const double scaled = std::pow(lambdas[i], 0.25) * kernel_H(ctx, RadialPoint::make(0.0, lambdas[i]));
    CHECK(scaled == Approx(full - below[i]).epsilon(1e-6));
  }
  // the scaled value tends to the scale-free constant as lambda -> 0
  const double tiny = std::pow(1e-12, 0.25) * kernel_H_hat(ctx, 1e-12);
  CHECK(tiny < full);
  CHECK(tiny > 0.9 * full);
}

TEST_CASE("kernel_K closed forms") {
  KernelContext atom(MassSpectralMeasure::single_atom(1.0, 1.0));
  CHECK(kernel_K(atom, 0.0) == Approx(kPi).epsilon(1e-14));
  CHECK(kernel_K(atom, 1.0) == Approx(kPi / std::exp(1.0)).epsilon(1e-14));
  CHECK(kernel_K(atom, -1.0) == kernel_K(atom, 1.0));
  KernelContext piece(power_rho_tilde());
  CHECK(kernel_K(piece, 0.0) == Approx(4.0 * kPi / 3.0).epsilon(1e-10));
}

TEST_CASE("kernel_K is the transverse integral of kernel_H") {
  for (const auto& measure :
       {MassSpectralMeasure::single_atom(1.0, 1.0), power_rho_tilde(),
        MassSpectralMeasure({{1.0, 1.0}, {1.6, 0.5}}, {{2.0, INFINITY, 0.3, -0.75}})}) {
    KernelContext ctx(measure);
    for (double s : {0.1, 0.5, 1.0, 2.0, 5.0}) {
      CHECK(oracle::transverse_K(ctx, s) == Approx(kernel_K(ctx, s)).epsilon(1e-6));
    }
  }
}

TEST_CASE("short-distance ratio of the scale-free rho") {
  KernelContext ctx(power_rho());
  const double limit = 4.834146544295877749;  // (4/3) Gamma(1/4)
  // oracle: int_0^inf (1 - e^{-x}) x^{-7/4} dx by quadrature
  quad::Options opt;
  opt.rel_tol = 1e-12;
  auto g = [](double x) { return -std::expm1(-x) * std::pow(x, -1.75); };
  const double oracle_limit =
      quad::integrate(g, 0.0, 1.0, opt).value + quad::integrate_log_tail(g, 1.0, opt).value;
  CHECK(oracle_limit == Approx(limit).epsilon(1e-9));
  // Finite eps: the lower cutoff m >= 1 removes int_0^eps (1-e^{-x}) x^{-7/4} dx from the limit,
  // which is 4 eps^{1/4} to leading order.
  for (double eps : {1e-4, 1e-8, 1e-12}) {
    const double cut = quad::integrate(g, 0.0, eps, opt).value;
    const double expected = oracle_limit - cut;
    CHECK(short_distance_ratio(ctx, eps) == Approx(expected).epsilon(1e-8));
    CHECK(cut == Approx(4.0 * std::pow(eps, 0.25)).epsilon(0.01));
  }
  CHECK(short_distance_ratio(ctx, 1e-12) == Approx(limit).epsilon(1e-2));
  // a lone atom keeps K differentiable: the ratio vanishes like eps^{1/4}
  KernelContext atom(MassSpectralMeasure::single_atom(1.0, 1.0, MeasureKind::rho));
  const double eps = 1e-6;
  CHECK(short_distance_ratio(atom, eps) <= 1.0 * std::pow(eps, 0.25));
  CHECK(short_distance_ratio(atom, eps) == Approx(std::pow(eps, 0.25)).epsilon(1e-5));
  CHECK_THROWS_AS(short_distance_ratio(ctx, 0.0), DomainError);
}

TEST_CASE("K(0) - K(eps) log-log slope") {
  KernelContext ctx(power_rho());
  // slope over eps in [1e-4, 1e-2] computed from exact drops; the m >= 1
  // cutoff bends it below 3/4 (oracle: 0.70401 with nine log-spaced points)
  std::vector<double> lx, ly;
  for (int i = 0; i <= 8; ++i) {
    const double eps = std::pow(10.0, -4.0 + 0.25 * i);
    lx.push_back(std::log(eps));
    ly.push_back(std::log(kernel_K_drop(ctx, eps)));
  }
  CHECK(oracle::ls_slope(lx, ly) == Approx(0.70401).epsilon(1e-4));
  // deep in the short-distance regime the exponent is 3/4
  lx.clear();
  ly.clear();
  for (int i = 0; i <= 8; ++i) {
    const double eps = std::pow(10.0, -14.0 + 0.25 * i);
    lx.push_back(std::log(eps));
    ly.push_back(std::log(kernel_K_drop(ctx, eps)));
  }
  CHECK(oracle::ls_slope(lx, ly) == Approx(0.75).epsilon(0.005 / 0.75));
}

TEST_CASE("first moment classifier") {
  auto atoms = MassSpectralMeasure({{1.0, 1.0}, {2.0, 0.5}}, {}, MeasureKind::rho);
  auto fm = first_moment_class(atoms);
  CHECK(fm.finite);
  CHECK(fm.value == Approx(2.0));
  CHECK_FALSE(first_moment_class(power_rho()).finite);
  auto finite_piece = MassSpectralMeasure({}, {{1.0, 2.0, 1.0, -1.75}}, MeasureKind::rho);
  auto fp = first_moment_class(finite_piece);
  REQUIRE(fp.finite);
  const double oracle_value =
      quad::integrate([](double m) { return std::pow(m, -0.75); }, 1.0, 2.0).value;
  CHECK(fp.value == Approx(oracle_value).epsilon(1e-12));
  CHECK(fp.value == Approx(0.7568284600108841).epsilon(1e-12));
  CHECK_THROWS_AS(first_moment_class(power_rho_tilde()), PreconditionError);
}

TEST_CASE("Ornstein-Zernike ratios") {
  KernelContext one(MassSpectralMeasure::single_atom(1.0, 1.0));
  CHECK(oz_H_ratio(one, 40.0) == Approx(std::sqrt(kPi / 2.0)).epsilon(0.01));
  CHECK(oz_H_ratio(one, 40.0) == Approx(oracle::k0_scaled_integral(40.0) * std::sqrt(40.0)).epsilon(1e-11));
  KernelContext two(MassSpectralMeasure({{1.0, 1.0}, {1.6, 1.0}}, {}));
  CHECK(oz_H_ratio(two, 60.0) == Approx(std::sqrt(kPi / 2.0)).epsilon(0.01));
  KernelContext heavy(MassSpectralMeasure::single_atom(2.0, 3.0));
  CHECK(oz_H_ratio(heavy, 40.0) == Approx(3.0 * std::sqrt(kPi / 4.0)).epsilon(0.01));

  CHECK(oz_K_ratio(one, 30.0) == Approx(kPi).epsilon(1e-10));
  KernelContext k2(MassSpectralMeasure({{1.0, 1.0}, {1.5, 2.0}}, {}));
  CHECK(oz_K_ratio(k2, 40.0) == Approx(kPi).epsilon(1e-3));
  KernelContext k3(MassSpectralMeasure::single_atom(2.0, 4.0));
  CHECK(oz_K_ratio(k3, 20.0) == Approx(2.0 * kPi).epsilon(1e-10));

  // limits linked by sqrt(2 pi / m1)
  const double link = oz_K_ratio(one, 60.0) / oz_H_ratio(one, 60.0);
  CHECK(link == Approx(std::sqrt(2.0 * kPi)).epsilon(0.01));
  auto lim = oz_limits(MassSpectralMeasure::single_atom(2.0, 3.0));
  CHECK(lim.k_limit == Approx(kPi * 3.0 / 2.0));

  // gap violations are structural
  KernelContext no_gap(MassSpectralMeasure({{1.0, 1.0}}, {{1.0, INFINITY, 1.0, -0.75}}));
  CHECK_THROWS_AS(oz_H_ratio(no_gap, 10.0), PreconditionError);
  KernelContext no_atom(power_rho_tilde());
  CHECK_THROWS_AS(oz_K_ratio(no_atom, 10.0), PreconditionError);
  KernelContext gapped(MassSpectralMeasure({{1.0, 1.0}}, {{2.0, INFINITY, 1.0, -0.75}}));
  CHECK(oz_K_ratio(gapped, 60.0) == Approx(kPi).epsilon(1e-6));
}

TEST_CASE("ancillary lemma ratios") {
  // oracle values from independent adaptive quadrature of the two integrals
  auto [f1000, s1000] = lemma_anc_ratios(1.0, 1000.0, 0.7, 0.3);
  CHECK(f1000 == Approx(1.253470654948018).epsilon(1e-8));
  CHECK(s1000 == Approx(1.005122540431995).epsilon(1e-8));
  CHECK(f1000 == Approx(std::sqrt(kPi / 2.0)).epsilon(0.02));
  auto [f4, s4] = lemma_anc_ratios(4.0, 1000.0, 0.7, 0.3);
  CHECK(f4 == Approx(0.6266766471032357).epsilon(1e-8));
  CHECK(s4 == Approx(0.3857047625464248).epsilon(1e-8));
  auto [f10, s10] = lemma_anc_ratios(1.0, 10.0, 0.7, 0.3);
  CHECK(f10 == Approx(1.267706928335048).epsilon(1e-8));
  CHECK(s10 == Approx(0.5299872250287132).epsilon(1e-8));
  const double target = std::sqrt(kPi / 2.0);
  CHECK(std::abs(f1000 - target) < std::abs(f10 - target));
  CHECK(std::abs(s1000 - target) < std::abs(s10 - target));
  // the truncated second ratio approaches the limit only like 1 - t^{beta - 1/2}
  auto [fbig, sbig] = lemma_anc_ratios(1.0, 1e12, 0.7, 0.3);
  CHECK(sbig == Approx(target).epsilon(0.02));
  CHECK(fbig == Approx(target).epsilon(1e-6));
  CHECK_THROWS_AS(lemma_anc_ratios(1.0, 100.0, 0.4, 0.3), DomainError);
  CHECK_THROWS_AS(lemma_anc_ratios(1.0, 100.0, 0.7, 0.6), DomainError);
  CHECK_THROWS_AS(lemma_anc_ratios(1.0, 0.5, 0.7, 0.3), DomainError);
}

TEST_CASE("H is radial, positive and decreasing; K is completely monotone") {
  for (const auto& measure :
       {MassSpectralMeasure({{1.0, 1.0}, {1.618, 0.3}}, {}), power_rho_tilde()}) {
    KernelContext ctx(measure);
    double prev = INFINITY;
    for (int i = 1; i <= 60; ++i) {
      const double r = 0.05 * i;
      const double h = kernel_H_hat(ctx, r);
      CHECK(h < prev);
      CHECK(h > 0.0);
      prev = h;
      const double angle = 0.37 * i;
      CHECK(kernel_H(ctx, RadialPoint::make(r * std::cos(angle), r * std::sin(angle))) ==
            Approx(h).epsilon(1e-12));
    }
    std::vector<double> logk;
    for (int i = 0; i <= 60; ++i) logk.push_back(std::log(kernel_K(ctx, 0.05 * i)));
    for (int i = 1; i < 60; ++i) {
      CHECK(logk[i] < logk[i - 1]);
      CHECK(logk[i + 1] - 2.0 * logk[i] + logk[i - 1] >= -1e-9);
    }
  }
}
