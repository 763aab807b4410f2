#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "isingspec/gp.hpp"
#include "isingspec/kernel.hpp"
#include "isingspec/parallel.hpp"
#include "isingspec/stats.hpp"

using namespace isingspec;
using doctest::Approx;

namespace {

MassSpectralMeasure atoms_rho(std::vector<Atom> a) { return MassSpectralMeasure(a, {}, MeasureKind::rho); }

MassSpectralMeasure scale_free_rho() {
  return MassSpectralMeasure({}, {{1.0, std::numeric_limits<double>::infinity(), 1.0, -1.75}}, MeasureKind::rho);
}

// cross-path covariance of X(t_i) and X(t_j), mean known to be zero
Estimate cross_cov(const std::vector<PathSample>& paths, int i, int j) {
  std::vector<double> v;
  for (const auto& p : paths) v.push_back(p.values[i] * p.values[j]);
  return {stats::mean(v), std::sqrt(stats::variance(v) / v.size())};
}

bool within(double x, const Estimate& e, double sigmas = 3.0) { return std::abs(x - e.value) <= sigmas * e.error; }

}  // namespace

TEST_CASE("discretization of a power-law measure") {
  const GPSpec spec(scale_free_rho(), 0.0, 1e-3, 1000, 1);
  const auto d = discretize(spec);
  CHECK(d.converged);
  CHECK(d.max_rel_dev <= 1e-4);
  double total = 0.0;
  for (const auto& c : d.components) total += c.weight;
  CHECK(total == Approx(4.0 / 3.0).epsilon(1e-10));
  for (std::size_t k = 1; k < d.components.size(); ++k) CHECK(d.components[k].mass >= d.components[k - 1].mass);
  // rho_tilde input is converted
  const GPSpec tilde(MassSpectralMeasure::single_atom(2.0, 1.0), 0.0, 0.1, 10);
  CHECK(discretize(tilde).components.at(0).weight == Approx(kPi / 2.0).epsilon(1e-15));
  CHECK_THROWS_AS(GPSpec(scale_free_rho(), 0.0, 0.0, 10), PreconditionError);
  CHECK_THROWS_AS(GPSpec(scale_free_rho(), 0.0, 0.1, 1), PreconditionError);
}

TEST_CASE("single component: lag-one correlation and determinism") {
  const GPSpec spec(atoms_rho({{1.0, 1.0}}), 0.0, 0.5, 5, 11);
  const auto d = discretize(spec);
  const auto paths = sample_paths(spec, d, 10000, 4);
  CHECK(within(std::exp(-1.0), cross_cov(paths, 0, 2)));
  CHECK(within(1.0, cross_cov(paths, 3, 3)));
  const auto again = sample_paths(spec, d, 10000, 1);
  CHECK(again[777].values == paths[777].values);
  CHECK(sample_path(spec).values == paths[0].values);
}

TEST_CASE("two atoms: variance is the total weight") {
  const GPSpec spec(atoms_rho({{1.0, 1.0}, {2.0, 1.0}}), 0.0, 0.1, 20, 3);
  const auto paths = sample_paths(spec, discretize(spec), 10000, 4);
  CHECK(within(2.0, cross_cov(paths, 0, 0)));
  CHECK(within(2.0, cross_cov(paths, 19, 19)));
  CHECK(within(std::exp(-1.0) + std::exp(-2.0), cross_cov(paths, 5, 15)));
}

TEST_CASE("empirical covariance matches the kernel for a power-law measure") {
  GPSpec spec(scale_free_rho(), 0.0, 0.1, 64, 5, 256);
  const auto d = discretize(spec);
  const auto paths = sample_paths(spec, d, 2000, default_threads());
  const KernelContext ctx(spec.rho);
  const auto rows = empirical_cov(paths, {0, 1, 5, 10, 20, -5});
  CHECK(within(kernel_K(ctx, 0.0), {rows[0].K, rows[0].error}));
  for (std::size_t k = 1; k < 5; ++k) CHECK(within(kernel_K(ctx, rows[k].lag), {rows[k].K, rows[k].error}));
  CHECK(rows[5].K == rows[2].K);
  CHECK(rows[5].lag == Approx(-0.5));
  std::vector<PathSample> few(paths.begin(), paths.begin() + 50);
  CHECK_THROWS_AS(empirical_cov(few, {0}), PreconditionError);
}

TEST_CASE("single atom: normalized covariance decays exponentially") {
  const GPSpec spec(atoms_rho({{2.0, 0.7}}), 0.0, 0.05, 400, 8);
  const auto paths = sample_paths(spec, discretize(spec), 1000, 4);
  const auto rows = empirical_cov(paths, {0, 5});
  const double ratio = rows[1].K / rows[0].K;
  // the ratio's error is dominated by the numerator
  CHECK(std::abs(ratio - std::exp(-2.0 * 0.25)) <= 3.0 * rows[1].error / rows[0].K);
}

TEST_CASE("linear functionals are Gaussian") {
  const GPSpec spec(scale_free_rho(), 0.0, 0.05, 40, 21, 64);
  const auto paths = sample_paths(spec, discretize(spec), 20000, default_threads());
  std::vector<double> f;
  for (const auto& p : paths) f.push_back(p.values[0] - 0.5 * p.values[10] + 2.0 * p.values[39]);
  const auto mo = stats::shape_moments(f);
  const double n = f.size();
  CHECK(std::abs(mo.skewness) < 3.0 * stats::skewness_null_error(n));
  CHECK(std::abs(mo.excess_kurtosis) < 3.0 * stats::kurtosis_null_error(n));
}

TEST_CASE("spectral additivity") {
  const auto a = atoms_rho({{1.0, 0.5}});
  const auto b = MassSpectralMeasure({}, {{1.5, 6.0, 0.8, -2.0}}, MeasureKind::rho);
  const auto merged = MassSpectralMeasure({{1.0, 0.5}}, {{1.5, 6.0, 0.8, -2.0}}, MeasureKind::rho);
  const GPSpec sa(a, 0, 0.1, 30, 1), sb(b, 0, 0.1, 30, 2), sm(merged, 0, 0.1, 30, 3);
  const auto pa = sample_paths(sa, discretize(sa), 4000, 4);
  const auto pb = sample_paths(sb, discretize(sb), 4000, 4);
  const auto pm = sample_paths(sm, discretize(sm), 4000, 4);
  std::vector<PathSample> sum = pa;
  for (std::size_t k = 0; k < sum.size(); ++k) {
    for (std::size_t i = 0; i < sum[k].values.size(); ++i) sum[k].values[i] += pb[k].values[i];
  }
  const auto cs = empirical_cov(sum, {0, 3, 10});
  const auto cm = empirical_cov(pm, {0, 3, 10});
  for (int k = 0; k < 3; ++k) CHECK(std::abs(cs[k].K - cm[k].K) <= 3.0 * std::hypot(cs[k].error, cm[k].error));
}

TEST_CASE("roughness exponent") {
  const auto rho = scale_free_rho();
  std::vector<double> deltas;
  for (int k : log_spaced_steps(10, 1000, 9)) deltas.push_back(k * 1e-5);
  // kernel-only regression; frozen value, not 3/8: the range still feels m1
  const double analytic = analytic_roughness(rho, deltas);
  CHECK(analytic == Approx(0.3520).epsilon(2e-3));
  // deep in the short-time regime the exponent does approach 3/8
  CHECK(analytic_roughness(rho, {1e-14, 1e-13, 1e-12}) == Approx(0.375).epsilon(2e-3));

  const GPSpec spec(rho, 0.0, 1e-5, 2048, 13);
  const auto d = discretize(spec);
  REQUIRE(d.converged);
  const auto paths = sample_paths(spec, d, 300, default_threads());
  const auto r = roughness_exponent(paths, log_spaced_steps(10, 1000, 9), rho);
  CHECK(r.flags.empty());
  CHECK(r.error > 0.0);
  CHECK(std::abs(r.exponent - analytic) <= 3.0 * r.error + 1e-3);

  // single atom: Lipschitz covariance, slope/2 = 1/2 for delta << 1/m
  const auto atom = atoms_rho({{1.0, 1.0}});
  CHECK(analytic_roughness(atom, {1e-6, 1e-5, 1e-4}) == Approx(0.5).epsilon(1e-3));
  const GPSpec sa(atom, 0.0, 1e-4, 400, 2);
  const auto pa = sample_paths(sa, discretize(sa), 200, 4);
  const auto ra = roughness_exponent(pa, {1, 3, 10, 30}, atom);
  CHECK(ra.flags.size() == 1);
  CHECK(std::abs(ra.exponent - 0.5) <= 3.0 * ra.error + 0.01);
}

TEST_CASE("path integral") {
  PathSample c{1.0, 0.1, std::vector<double>(11, 2.5)};
  const auto y = integrate_path(c);
  CHECK(y[0] == 0.0);
  for (int i = 0; i < 11; ++i) CHECK(y[i] == Approx(2.5 * (c.t(i) - 1.0)).epsilon(1e-14));

  PathSample a{0.0, 0.01, {}}, b{0.0, 0.01, {}}, mix{0.0, 0.01, {}};
  for (int i = 0; i < 50; ++i) {
    a.values.push_back(std::sin(0.3 * i));
    b.values.push_back(std::exp(-0.1 * i));
    mix.values.push_back(1.7 * a.values.back() - 0.4 * b.values.back());
  }
  const auto ya = integrate_path(a), yb = integrate_path(b), ym = integrate_path(mix);
  for (int i = 1; i < 50; ++i) CHECK(ym[i] == Approx(1.7 * ya[i] - 0.4 * yb[i]).epsilon(1e-12));

  // Var Y(1) = 2 w (e^{-m} - 1 + m) / m^2
  for (auto [m, expected] : {std::pair{1.0, 0.735758882342884643}, std::pair{2.0, 0.567667641618306346}}) {
    CHECK(2.0 * (std::exp(-m) - 1.0 + m) / (m * m) == Approx(expected).epsilon(1e-15));
    const GPSpec spec(atoms_rho({{m, 1.0}}), 0.0, 0.01, 101, 17);
    const auto paths = sample_paths(spec, discretize(spec), 8000, 4);
    std::vector<double> y1;
    for (const auto& p : paths) y1.push_back(integrate_path(p).back());
    const double var = stats::mean([&] {
      std::vector<double> sq;
      for (double v : y1) sq.push_back(v * v);
      return sq;
    }());
    const double err = std::sqrt(2.0 / y1.size()) * var;
    CHECK(std::abs(var - expected) <= 3.0 * err);
  }
}
