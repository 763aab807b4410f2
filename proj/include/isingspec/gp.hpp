#pragma once

#include <cstdint>
#include <vector>

#include "isingspec/common.hpp"
#include "isingspec/spectral_measure.hpp"

namespace isingspec {

// Stationary Gaussian process with covariance K(s) = int e^{-m|s|} d rho(m),
// sampled on the grid t_i = t0 + i dt as a sum of independent
// Ornstein-Uhlenbeck components, one per atom of a discretized rho.
struct GPSpec {
  MassSpectralMeasure rho;  // converted to rho form on construction
  int nodes_per_piece = 64;
  double t0 = 0.0;
  double dt = 0.01;
  int n = 100;
  std::uint64_t seed = 0;

  GPSpec(const MassSpectralMeasure& measure, double t0, double dt, int n, std::uint64_t seed = 0,
         int nodes_per_piece = 64);
};

struct Discretization {
  std::vector<Atom> components;  // (mass, weight) in rho form
  int nodes_per_piece = 0;       // after refinement
  double max_rel_dev = 0.0;      // worst relative deviation of K and K(0) - K on the test lags
  bool converged = false;
};

// Density pieces become Gauss-Legendre nodes in u = ln(m / m_lo), 8 per panel
// on equal panels; unbounded pieces are cut where the remaining weight is
// below 1e-13 of the piece. Node weights are rescaled so every piece carries
// its exact mass. The node count doubles (up to 8192) until the discretized
// K(s) and K(0) - K(s) match the continuous ones within 1e-4 relative at
// lags dt * 2^k up to the grid length.
Discretization discretize(const GPSpec& spec);

double discrete_K(const std::vector<Atom>& components, double s);
// K(0) - K(s) without cancellation.
double discrete_K_drop(const std::vector<Atom>& components, double s);

struct PathSample {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> values;

  double t(int i) const { return t0 + i * dt; }
};

// Path number `index` of the spec's seed; independent of any other path.
PathSample sample_path(const GPSpec& spec, const Discretization& d, int index = 0);
PathSample sample_path(const GPSpec& spec);
std::vector<PathSample> sample_paths(const GPSpec& spec, const Discretization& d, int n_paths,
                                     int threads = 1);

struct CovRow {
  double lag = 0.0;
  double K = 0.0;
  double error = 0.0;
};

// For each lag (in grid steps, sign ignored) the per-path average of
// X(t) X(t + lag) over all admissible t, then averaged over paths. The
// process mean is zero, so this is unbiased. Errors are the spread across paths.
std::vector<CovRow> empirical_cov(const std::vector<PathSample>& paths, const std::vector<int>& lags);

struct Roughness {
  double exponent = 0.0;
  double error = 0.0;
  Flags flags;
};

// Half the log-log slope of E|X(t + delta) - X(t)|^2 against delta (deltas in
// grid steps). Jackknife error over path blocks. Flags "smooth regime" unless
// rho has an unbounded piece with exponent in (-2, -1).
Roughness roughness_exponent(const std::vector<PathSample>& paths, const std::vector<int>& delta_steps,
                             const MassSpectralMeasure& rho);

// Same regression on log(2 (K(0) - K(delta))) from the exact kernel.
double analytic_roughness(const MassSpectralMeasure& measure, const std::vector<double>& deltas);

// Cumulative trapezoid integral, Y(t0) = 0.
std::vector<double> integrate_path(const PathSample& path);

// Log-spaced integer lags from lo to hi (inclusive, deduplicated).
std::vector<int> log_spaced_steps(int lo, int hi, int count);

}  // namespace isingspec
