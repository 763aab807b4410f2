#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isingspec/rng.hpp"

namespace isingspec {

// ln(1 + sqrt 2) / 2
double critical_coupling();

// Critical-point Ising model on an N x N torus with spacing a and per-site
// field h_lat = h a^{15/8}. Site (i, j) sits at (t, y) = (a i, a j); i is the
// "time" axis, j the transverse one.
struct LatticeSpec {
  int N = 0;
  double a = 0.0;
  double h = 0.0;
  double beta_J = 0.0;
  double h_lat = 0.0;

  // a defaults to 1/N, beta_J to the critical coupling.
  static LatticeSpec make(int N, double h, std::optional<double> beta_J = std::nullopt,
                          std::optional<double> a = std::nullopt);
  // Spec with a given per-site field, h back-computed from it.
  static LatticeSpec from_lattice_field(int N, double h_lat, std::optional<double> beta_J = std::nullopt);

  void validate() const;
  int sites() const { return N * N; }
};

inline double h_lattice(double h, double a) { return h * std::pow(a, 15.0 / 8.0); }

class SpinConfiguration {
 public:
  SpinConfiguration() = default;
  // All spins +1 (cold) or i.i.d. uniform (hot, drawn from the rng).
  static SpinConfiguration cold(int N, std::uint64_t seed, std::uint64_t stream = 0);
  static SpinConfiguration hot(int N, std::uint64_t seed, std::uint64_t stream = 0);
  static SpinConfiguration from_spins(int N, std::vector<std::int8_t> spins,
                                      std::uint64_t sweep_count = 0);

  int N() const { return N_; }
  int sites() const { return N_ * N_; }
  std::int8_t at(int i, int j) const { return spins_[index(i, j)]; }
  const std::vector<std::int8_t>& spins() const { return spins_; }
  int index(int i, int j) const { return i * N_ + j; }

  // sum over nearest-neighbour bonds of s_x s_y, and sum of spins; both kept
  // incrementally by the updates
  std::int64_t bond_sum() const { return bond_sum_; }
  std::int64_t magnetization() const { return magnetization_; }
  std::int64_t recompute_bond_sum() const;
  std::int64_t recompute_magnetization() const;
  bool bookkeeping_consistent() const;

  std::uint64_t sweep_count() const { return sweep_count_; }
  Philox& rng() { return rng_; }

  void set_spin(int site, std::int8_t s);  // updates bookkeeping

 private:
  friend std::size_t wolff_ghost_update(SpinConfiguration&, const LatticeSpec&);
  friend void metropolis_sweep(SpinConfiguration&, const LatticeSpec&);
  friend std::uint64_t wolff_sweep(SpinConfiguration&, const LatticeSpec&, int);

  void recount();
  int neighbour_sum(int site) const;

  int N_ = 0;
  std::vector<std::int8_t> spins_;
  std::int64_t bond_sum_ = 0;
  std::int64_t magnetization_ = 0;
  std::uint64_t sweep_count_ = 0;
  Philox rng_;
  // scratch for cluster growth
  std::vector<int> stack_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t stamp_value_ = 0;
};

// One ghost-spin Wolff cluster move. A random seed site grows a cluster over
// aligned neighbours with probability 1 - e^{-2 beta J}; each member also
// bonds to the ghost spin (aligned with the field) with probability
// 1 - e^{-2 h_lat}. Clusters linked to the ghost stay put, all others flip.
// Returns the number of sites visited by the growth.
std::size_t wolff_ghost_update(SpinConfiguration& config, const LatticeSpec& spec);

// A fixed number of Wolff moves; returns the number of sites visited. The
// count must not depend on the moves themselves: stopping once N^2 sites
// have been visited would sample the chain at state-dependent times and
// bias every observable.
std::uint64_t wolff_sweep(SpinConfiguration& config, const LatticeSpec& spec, int updates);

// N^2 single-site Metropolis proposals at uniformly random sites.
void metropolis_sweep(SpinConfiguration& config, const LatticeSpec& spec);

// Binary snapshot: 16-byte header (magic "ISNP", uint32 N, uint64
// sweep_count, little endian) then row-major sign bits, 8 spins per byte,
// least significant bit first, bit set for +1.
void write_snapshot(const SpinConfiguration& config, const std::string& path);
SpinConfiguration read_snapshot(const std::string& path);
std::vector<std::uint8_t> encode_snapshot(const SpinConfiguration& config);
SpinConfiguration decode_snapshot(const std::vector<std::uint8_t>& bytes);

}  // namespace isingspec
