#pragma once

#include <utility>
#include <vector>

#include "isingspec/quadrature.hpp"
#include "isingspec/spectral_measure.hpp"

namespace isingspec {

// Evaluation settings bound to one spectral measure. Both measure forms are
// kept so that H (rho_tilde) and K (rho) integrate their natural densities.
class KernelContext {
 public:
  explicit KernelContext(const MassSpectralMeasure& measure, double quad_rel_tol = 1e-10,
                         double quad_abs_tol = 1e-14, double tail_cutoff = 120.0);

  const MassSpectralMeasure& rho_tilde() const { return rho_tilde_; }
  const MassSpectralMeasure& rho() const { return rho_; }
  double m1() const { return rho_.m1(); }
  double quad_rel_tol() const { return options_.rel_tol; }
  double quad_abs_tol() const { return options_.abs_tol; }
  // Largest log-mass extent ln(m / m_lo) integrated over an unbounded piece.
  double tail_cutoff() const { return tail_cutoff_; }
  const quad::Options& options() const { return options_; }

 private:
  MassSpectralMeasure rho_tilde_;
  MassSpectralMeasure rho_;
  quad::Options options_;
  double tail_cutoff_;
};

// Euclidean separation (s, y) with its radius r = sqrt(s^2 + y^2).
struct RadialPoint {
  double s = 0.0;
  double y = 0.0;
  double r = 0.0;

  static RadialPoint make(double s, double y);
};

// H(s, y) = int K0(m r) d rho_tilde(m). Throws DivergenceError at r = 0.
double kernel_H(const KernelContext& ctx, const RadialPoint& pt);
// H as a function of the radius alone.
double kernel_H_hat(const KernelContext& ctx, double r);

// K(s) = int e^{-m|s|} d rho(m) = pi int e^{-m|s|}/m d rho_tilde(m).
double kernel_K(const KernelContext& ctx, double s);

// K(0) - K(eps), evaluated as one integral of (1 - e^{-m eps}) against rho.
double kernel_K_drop(const KernelContext& ctx, double eps);

// (K(0) - K(eps)) / eps^{3/4}.
double short_distance_ratio(const KernelContext& ctx, double eps);

struct FirstMoment {
  bool finite = true;
  double value = 0.0;  // meaningful only when finite
};

// int m d rho(m); infinite when an unbounded piece has exponent >= -2.
FirstMoment first_moment_class(const MassSpectralMeasure& measure_rho);

// Throws PreconditionError unless the measure has an atom at m1 and no
// spectral weight in (m1, m1 + eps) for some eps > 0.
void require_upper_gap(const MassSpectralMeasure& measure);

// H_hat(t) / (t^{-1/2} e^{-m1 t}); tends to rho_tilde({m1}) sqrt(pi/(2 m1)).
double oz_H_ratio(const KernelContext& ctx, double t);
// K(t) / e^{-m1 t}; tends to pi rho_tilde({m1}) / m1.
double oz_K_ratio(const KernelContext& ctx, double t);

struct OzLimits {
  double h_limit = 0.0;  // C3
  double k_limit = 0.0;  // C3 sqrt(2 pi / m1)
};
OzLimits oz_limits(const MassSpectralMeasure& measure);

// The two ratios of the ancillary Laplace-type lemma:
//   first  = int_0^inf (u^2+t^2)^{-1/4} e^{-m sqrt(u^2+t^2)} du / e^{-m t}
//   second = int_{t^beta}^{t^alpha} e^{-m sqrt(u^2+t^2)} du / (t^{1/2} e^{-m t})
// both converging to sqrt(pi / (2 m)). Requires 0 < beta < 1/2 < alpha < 3/4.
std::pair<double, double> lemma_anc_ratios(double m, double t, double alpha, double beta);

// Batch evaluations; each grid point is independent of every other.
std::vector<double> kernel_K_grid(const KernelContext& ctx, const std::vector<double>& s);
std::vector<double> kernel_H_grid(const KernelContext& ctx, const std::vector<RadialPoint>& pts);

}  // namespace isingspec
