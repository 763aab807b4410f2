#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "isingspec/common.hpp"
#include "isingspec/lattice.hpp"

namespace isingspec {

enum class Dynamics { wolff, metropolis };

struct Displacement {
  int dx = 0;  // along the time axis i
  int dy = 0;  // along the transverse axis j
  bool operator==(const Displacement&) const = default;
};

struct ChainOptions {
  int n_therm = 100;
  int n_samples = 1000;
  int thin = 1;  // sweeps between recorded samples
  // Wolff moves per sweep; 0 calibrates it during thermalization so that a
  // sweep visits about N^2 sites on average, then keeps it fixed
  int wolff_updates = 0;
  std::uint64_t seed = 1;
  Dynamics dynamics = Dynamics::wolff;
  bool hot_start = true;  // cold starts freeze at h > 0: the all-plus cluster always touches the ghost
  std::vector<Displacement> displacements;
  // record the zero-momentum slab correlator for t = 0..N/2
  bool slab = false;
  // called with every recorded configuration (sample index, config)
  std::function<void(int, const SpinConfiguration&)> on_sample;
};

// Per-sample observable series of one chain plus derived summaries.
struct ChainStats {
  LatticeSpec spec;
  ChainOptions options;  // on_sample is not retained
  std::vector<double> magnetization;  // mean spin per sample
  std::vector<double> energy;         // bond sum per site per sample
  std::vector<Displacement> displacements;
  std::vector<std::vector<double>> two_point;  // [displacement][sample], raw, site-averaged
  // slab[t][sample] = (1/N^2) sum_y S(y) S(y+t), averaged over both axes;
  // S(y) is the line sum of spins at coordinate y
  std::vector<std::vector<double>> slab;
  int wolff_updates = 0;      // moves per sweep actually used
  double tau_int = 0.5;       // of the magnetization series, in samples
  bool blocking_plateau = false;
  Flags flags;
};

ChainStats run_chain(const LatticeSpec& spec, const ChainOptions& options);

// Site-averaged raw or connected correlation at displacement x; the stderr
// comes from blocking (raw) or a blocked jackknife (connected). Throws
// DomainError if x is outside the minimal-image range or was not recorded.
Estimate two_point(const ChainStats& stats, Displacement x, bool connected = false);

// Mean spin with blocking error.
Estimate mean_magnetization(const ChainStats& stats);

// Connected slab correlator C(t) = slab(t) - N m^2 with jackknife errors, t = 0..N/2.
struct Correlator {
  std::vector<double> t;
  std::vector<double> value;
  std::vector<double> error;
  // jackknife replicas [block][t], used to propagate errors through fits
  std::vector<std::vector<double>> replicas;
};
Correlator slab_correlator(const ChainStats& stats, int n_blocks = 32);

// Decay rate of a torus correlator from a fit of A (e^{-m t} + e^{-m (N - t)})
// over [t_min, t_max], errors from the jackknife replicas.
struct DecayFit {
  double mass = 0.0;
  double mass_error = 0.0;
  double amplitude = 0.0;
  int t_min = 0;
  int t_max = 0;
  double decay_lengths = 0.0;  // (t_max - t_min) * mass
  Flags flags;
};
DecayFit fit_decay_rate(const Correlator& c, int N, int t_min, int t_max);
// Window chosen self-consistently: t_min ~ 0.5/m, t_max ~ t_min + 3.5/m, capped
// at N/2 and at the last point with signal above twice its error.
DecayFit fit_decay_rate_auto(const Correlator& c, int N);

struct FieldScanPoint {
  double h = 0.0;
  double h_lat = 0.0;
  Estimate magnetization;
  DecayFit decay;
  double xi = 0.0;  // 1 / mass in lattice units
  Flags flags;
};

struct ScanBudget {
  int n_therm = 200;
  int n_samples = 2000;
  int thin = 1;
  int chains = 1;
  int threads = 1;
};

struct ExponentFit {
  double slope = 0.0;
  double slope_error = 0.0;
  double amplitude = 0.0;  // e^{intercept}
  std::vector<FieldScanPoint> points;
  Flags flags;
};

// Runs one chain set per field value (renormalized units, a = 1/N).
std::vector<FieldScanPoint> run_field_scan(int N, const std::vector<double>& h_list,
                                           const ScanBudget& budget, std::uint64_t seed,
                                           bool measure_decay);

// Fit of log <sigma_0> against log h; flags "finite-size contaminated" when
// any point has xi >= N/4.
ExponentFit critical_isotherm_scan(int N, const std::vector<double>& h_list, const ScanBudget& budget,
                                   std::uint64_t seed);
ExponentFit isotherm_fit(int N, std::vector<FieldScanPoint> points);

// Fit of log m1 against log h from slab-correlator decay rates.
ExponentFit mass_gap_scan(int N, const std::vector<double>& h_list, const ScanBudget& budget,
                          std::uint64_t seed);
ExponentFit mass_gap_fit(int N, std::vector<FieldScanPoint> points);

// Pools chains with distinct seeds derived from `seed`, run in parallel over
// `threads` workers and concatenated in seed order.
ChainStats run_chains(const LatticeSpec& spec, const ChainOptions& options, int chains, int threads);

// Seed of chain k out of `chains` as used by run_chains.
std::uint64_t chain_seed(std::uint64_t seed, int chain, int chains);
// Concatenates chains in order; flags are merged and tau_int recomputed.
ChainStats merge_chains(std::vector<ChainStats> parts);

}  // namespace isingspec
