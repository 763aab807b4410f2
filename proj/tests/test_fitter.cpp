#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "isingspec/fitter.hpp"
#include "isingspec/kernel.hpp"
#include "isingspec/rng.hpp"

using namespace isingspec;
using doctest::Approx;

namespace {

std::vector<KSample> forward(const MassSpectralMeasure& rho, double t0, double t1, double dt, double noise = 0.0,
                             Philox* rng = nullptr) {
  const KernelContext ctx(rho);
  std::vector<KSample> out;
  const int n = static_cast<int>(std::lround((t1 - t0) / dt));
  for (int k = 0; k <= n; ++k) {
    const double t = t0 + k * dt;
    double K = kernel_K(ctx, t);
    double err = 0.0;
    if (rng) {
      err = noise * K;
      K *= 1.0 + noise * rng->normal();
    }
    out.push_back({t, K, err});
  }
  return out;
}

MassSpectralMeasure rho_atoms(std::vector<Atom> a) { return MassSpectralMeasure(a, {}, MeasureKind::rho); }

const MassSpectralMeasure kThree = rho_atoms({{1.0, 1.0}, {1.618, 0.3}, {1.989, 0.1}});

}  // namespace

TEST_CASE("single exponential") {
  const auto data = forward(rho_atoms({{1.0, 1.0}}), 0.5, 12.0, 0.05);
  const auto fit = fit_exponentials(data, 1, {0.5, 12.0});
  REQUIRE(fit.model.terms.size() == 1);
  CHECK(std::abs(fit.model.terms[0].mass - 1.0) <= 1e-10);
  CHECK(fit.model.terms[0].amplitude == Approx(1.0).epsilon(1e-10));
  CHECK(fit.flags.empty());
}

TEST_CASE("three-term round trip") {
  const auto data = forward(kThree, 0.5, 12.0, 0.05);
  const auto fit = fit_exponentials(data, 3, {0.5, 12.0});
  REQUIRE(fit.model.terms.size() == 3);
  const double m[] = {1.0, 1.618, 1.989}, B[] = {1.0, 0.3, 0.1};
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(fit.model.terms[k].mass / m[k] - 1.0) <= 1e-6);
    CHECK(fit.model.terms[k].amplitude == Approx(B[k]).epsilon(1e-5));
  }
  CHECK_NOTHROW(fit.model.validate());
  CHECK(fit.model.residual_norm == Approx(residual_norm(fit.model, data, {0.5, 12.0})).epsilon(1e-12));
  for (std::size_t k = 1; k < fit.residual_history.size(); ++k) {
    CHECK(fit.residual_history[k] <= fit.residual_history[k - 1]);
  }
  CHECK(fit.covariance.rows() == 6);
  CHECK(gap_check(fit.model).ok);
}

TEST_CASE("four-term round trip") {
  const auto rho = rho_atoms({{0.5, 1.0}, {1.0, 0.8}, {2.0, 0.5}, {4.0, 0.4}});
  const auto data = forward(rho, 0.1, 10.0, 0.05);
  const auto fit = fit_exponentials(data, 4, {0.1, 10.0});
  REQUIRE(fit.model.terms.size() == 4);
  const double m[] = {0.5, 1.0, 2.0, 4.0};
  for (int k = 0; k < 4; ++k) CHECK(std::abs(fit.model.terms[k].mass / m[k] - 1.0) <= 1e-6);
}

TEST_CASE("noisy data: descent, positivity and error bars") {
  Philox rng(4);
  const auto data = forward(rho_atoms({{1.0, 1.0}, {2.5, 0.6}}), 0.2, 8.0, 0.04, 0.01, &rng);
  const auto fit = fit_exponentials(data, 2, {0.2, 8.0});
  for (std::size_t k = 1; k < fit.residual_history.size(); ++k) {
    CHECK(fit.residual_history[k] <= fit.residual_history[k - 1]);
  }
  CHECK_NOTHROW(fit.model.validate());
  CHECK(fit.model.residual_norm == Approx(residual_norm(fit.model, data, {0.2, 8.0})).epsilon(1e-12));
  // m1 is well determined; its error bar should cover the truth
  CHECK(std::abs(fit.model.terms[0].mass - 1.0) <= 4.0 * std::sqrt(fit.covariance(1, 1)));
  CHECK(std::sqrt(fit.covariance(1, 1)) < 0.05);
}

TEST_CASE("one-percent noise hides the third term") {
  Philox rng(4);
  const auto data = forward(kThree, 0.5, 12.0, 0.05, 0.01, &rng);
  try {
    fit_exponentials(data, 3, {0.5, 12.0});
    FAIL("expected ResolvableTermsError");
  } catch (const ResolvableTermsError& e) {
    CHECK(e.resolvable() < 3);
  }
}

TEST_CASE("equivariance under time rescaling") {
  Philox rng(6);
  const auto data = forward(rho_atoms({{1.0, 1.0}, {2.5, 0.6}}), 0.2, 8.0, 0.04, 0.01, &rng);
  const double lambda = 2.0;
  std::vector<KSample> scaled;
  for (const auto& s : data) scaled.push_back({lambda * s.t, s.K, s.error});
  const auto a = fit_exponentials(data, 2, {0.2, 8.0});
  const auto b = fit_exponentials(scaled, 2, {0.4, 16.0});
  REQUIRE(a.model.terms.size() == 2);
  REQUIRE(b.model.terms.size() == 2);
  CHECK(b.model.residual_norm == Approx(a.model.residual_norm).epsilon(1e-10));
  for (int k = 0; k < 2; ++k) {
    CHECK(b.model.terms[k].mass == Approx(a.model.terms[k].mass / lambda).epsilon(1e-10));
    CHECK(b.model.terms[k].amplitude == Approx(a.model.terms[k].amplitude).epsilon(1e-10));
  }
}

TEST_CASE("rank deficiency and preconditions") {
  const auto data = forward(rho_atoms({{1.0, 1.0}}), 0.5, 12.0, 0.05);
  try {
    fit_exponentials(data, 3, {0.5, 12.0});
    FAIL("expected ResolvableTermsError");
  } catch (const ResolvableTermsError& e) {
    CHECK(e.resolvable() == 1);
    CHECK(e.requested() == 3);
  }
  CHECK_THROWS_AS(fit_exponentials(data, 3, {0.5, 1.0}), PreconditionError);  // 11 points < 12
  CHECK_THROWS_AS(fit_exponentials(data, 0, {0.5, 12.0}), PreconditionError);
  auto gap = data;
  gap.erase(gap.begin() + 10);
  CHECK_THROWS_AS(fit_exponentials(gap, 1, {0.5, 12.0}), PreconditionError);
}

TEST_CASE("negative amplitude falls back to fewer terms") {
  // K = e^{-t} - 0.2 e^{-3t}: two exponentials, one with negative amplitude
  std::vector<KSample> data;
  for (int k = 0; k <= 200; ++k) {
    const double t = 0.05 * k;
    data.push_back({t, std::exp(-t) - 0.2 * std::exp(-3 * t), 0.0});
  }
  const auto fit = fit_exponentials(data, 2, {0.0, 10.0});
  CHECK(fit.model.terms.size() == 1);
  REQUIRE(fit.flags.size() == 1);
  CHECK(fit.flags[0].find("refitted") != std::string::npos);
}

TEST_CASE("gap check") {
  CHECK(gap_check({{{1, 1.0}, {0.3, 1.618}, {0.1, 1.989}}, 0}).ok);
  const auto bad = gap_check({{{1, 1.0}, {0.3, 1.618}, {0.1, 2.1}}, 0});
  CHECK(!bad.ok);
  REQUIRE(bad.violations.size() == 1);
  CHECK(bad.violations[0] == "m₃ < 2m₁ fails");
  CHECK(gap_check({{{1, 1.0}}, 0}).ok);
  const auto unordered = gap_check({{{1, 1.0}, {1, 0.9}}, 0});
  CHECK(unordered.violations[0] == "m₁ < m₂ fails");
}

TEST_CASE("m1 from the large-t slope") {
  const auto one = forward(rho_atoms({{1.0, 1.0}}), 10.0, 20.0, 0.1);
  const auto e1 = m1_extraction(one, {10.0, 20.0});
  CHECK(std::abs(e1.m1 - 1.0) <= 1e-8);
  CHECK(e1.flags.empty());

  const auto two = forward(MassSpectralMeasure({{1.0, 1.0}, {1.6, 0.5}}, {}), 15.0, 25.0, 0.1);
  const auto e2 = m1_extraction(two, {15.0, 25.0});
  // contamination bound (0.5/1.6) pi e^{-0.6 * 15} relative to the leading pi term
  const double bound = 0.5 / 1.6 * std::exp(-0.6 * 15.0);
  CHECK(bound < 1e-3);
  CHECK(std::abs(e2.m1 - 1.0) <= 1e-3);
  CHECK(std::abs(e2.m1 - 1.0) <= 0.6 * bound * 2);

  // early window is not asymptotic
  const auto early = forward(rho_atoms({{1.0, 1.0}, {1.5, 3.0}}), 0.0, 4.0, 0.1);
  CHECK(m1_extraction(early, {0.0, 4.0}).flags.size() == 1);
}

TEST_CASE("E8 reference ratios") {
  const auto r = e8_ratios();
  CHECK(r.m2_over_m1 == Approx(1.6180339887498949).epsilon(1e-15));
  CHECK(r.m3_over_m1 == Approx(1.9890437907365466).epsilon(1e-15));
  CHECK(gap_check({{{1, 1.0}, {1, r.m2_over_m1}, {1, r.m3_over_m1}}, 0}).ok);
}
