#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isingspec/common.hpp"
#include "isingspec/lattice.hpp"

namespace isingspec {

// Continuum test functions on the torus [0, N a)^2, with t the first lattice
// axis and y the second. Distances are minimal-image. A TestFunction is a
// finite linear combination of elementary terms.
struct TestTerm {
  enum class Kind { block_indicator, strip_indicator, gaussian_time };
  Kind kind = Kind::block_indicator;
  double coefficient = 1.0;
  double t = 0.0;    // centre in t (block) or time s (strip, gaussian)
  double y = 0.0;    // centre in y (block, strip)
  double eps = 0.0;  // block side, or Gaussian standard deviation in t
  double L = 0.0;    // strip half-width in y
};

class TestFunction {
 public:
  TestFunction() = default;  // f = 0

  // eps^{-2} 1[|t - t0| < eps/2] 1[|y - y0| < eps/2], half-open on the right
  static TestFunction block_indicator(double t0, double y0, double eps);
  // 1[|y - y0| < L] g_eps(t - s), half-open on the right
  static TestFunction strip_indicator(double s, double y0, double L, double eps);
  // g_eps(t - s), constant in y
  static TestFunction gaussian_time(double s, double eps);

  TestFunction operator+(const TestFunction& o) const;
  TestFunction operator*(double c) const;
  TestFunction operator-() const { return *this * -1.0; }

  const std::vector<TestTerm>& terms() const { return terms_; }
  double eval(double t, double y, double torus) const;
  // Throws DomainError if some term does not fit inside a torus of side `torus`.
  void check_support(double torus) const;

 private:
  std::vector<TestTerm> terms_;
};

// Normal density with standard deviation eps.
double gaussian_density(double x, double eps);

// Phi^h(f) = a^{15/8} sum_x f(a x) sigma_x, term by term with compensated sums.
double phi_of_f(const SpinConfiguration& config, const LatticeSpec& spec, const TestFunction& f);

// Number of lattice sites a x inside the block of side eps centred at (t0, y0).
long block_site_count(const LatticeSpec& spec, double t0, double y0, double eps);

struct XLSample {
  double L = 0.0;
  double s = 0.0;
  double eps = 0.0;
  double y0 = 0.0;
  int config_index = 0;
  double value = 0.0;
};

struct XLBatch {
  std::vector<XLSample> samples;
  double raw_mean = 0.0;  // subtracted before the 1/sqrt(2L) normalization
  Flags flags;
};

// X_L(s) = (Phi^h(1_{[-L,L]}(y - y0) g_eps(t - s)) - empirical mean) / sqrt(2L)
// for every configuration and every (s, y0) pair. The mean is taken over the
// whole batch; it is an estimate of the translation-invariant field mean.
XLBatch gaussian_mollifier_pair(const std::vector<SpinConfiguration>& configs, const LatticeSpec& spec,
                                double L, const std::vector<double>& s_list, double eps,
                                const std::vector<double>& y0_list = {0.0});
inline XLBatch gaussian_mollifier_pair(const std::vector<SpinConfiguration>& configs,
                                       const LatticeSpec& spec, double L, double s, double eps) {
  return gaussian_mollifier_pair(configs, spec, L, std::vector<double>{s}, eps);
}

// Gaussian semigroup in variance form: g with variance v convolved with g of
// variance w is g of variance v + w. Returns the convolution at x by quadrature.
double gaussian_convolution(double x, double var1, double var2);

// Empirical L2 distance ||X_{L,eps} - X_{L,eps/2}|| for each eps, computed on
// identical configurations and positions.
struct CauchyStep {
  double eps = 0.0;
  Estimate distance;
};
std::vector<CauchyStep> mollifier_cauchy_check(const std::vector<SpinConfiguration>& configs,
                                               const LatticeSpec& spec, double L,
                                               const std::vector<double>& eps_list,
                                               const std::vector<double>& s_list,
                                               const std::vector<double>& y0_list);

struct HRow {
  double s = 0.0;
  double y = 0.0;
  double H = 0.0;
  double error = 0.0;
};

// Connected covariance of block pairings Phi(block(c)) Phi(block(c + (s, y)))
// averaged over all lattice translations c and over configurations; errors
// from a jackknife over configuration blocks. The block side defaults to 4a.
std::vector<HRow> estimate_H(const std::vector<SpinConfiguration>& configs, const LatticeSpec& spec,
                             const std::vector<std::pair<double, double>>& grid,
                             std::optional<double> block_side = std::nullopt);

struct KRow {
  double s = 0.0;
  double K = 0.0;
  double error = 0.0;
  bool open_tail = false;
  double cutoff = 0.0;  // largest |y| integrated when the tail stays open
};

// Transverse integral 2 int_0^inf H(s, y) dy by the trapezoid rule over the
// table's y >= 0 points (rows at +y and -y are averaged), the tail beyond the
// last point closed by an exponential fitted to the last three points.
// Rows for s and -s share one value.
std::vector<KRow> estimate_K(const std::vector<HRow>& table);

struct Susceptibility {
  double value = 0.0;
  double error = 0.0;  // from the K errors, treated as independent
  Flags flags;
};
// A = sum_j sum_l z_j z_l K(s_l - s_j), K linearly interpolated in |s|.
Susceptibility susceptibility_A(const std::vector<double>& z, const std::vector<double>& s,
                                const std::vector<KRow>& K_table);

struct CLTRow {
  double L = 0.0;
  double skew = 0.0;
  double skew_err = 0.0;
  double kurt = 0.0;
  double kurt_err = 0.0;
  double variance = 0.0;
  double variance_err = 0.0;
  double n_eff = 0.0;
  Flags flags;
};
// Skewness and excess kurtosis per L with blocked-jackknife errors over
// configurations (samples of one configuration stay in one block). The
// effective sample size is n / (2 tau) from blocking of per-config means.
std::vector<CLTRow> clt_diagnostics(const std::vector<XLBatch>& batches, double min_effective = 1000.0);

// Empirical mean of Phi^h(f) over configurations, with blocking error. For a
// unit-mass test function this estimates the field mean B h^{1/15}.
Estimate mean_field_value(const std::vector<SpinConfiguration>& configs, const LatticeSpec& spec,
                          const TestFunction& f);

}  // namespace isingspec
