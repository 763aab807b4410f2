#include "isingspec/lattice.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "isingspec/common.hpp"

namespace isingspec {

double critical_coupling() { return 0.5 * std::log(1.0 + std::sqrt(2.0)); }

LatticeSpec LatticeSpec::make(int N, double h, std::optional<double> beta_J, std::optional<double> a) {
  LatticeSpec s;
  s.N = N;
  s.a = a.value_or(N > 0 ? 1.0 / N : 0.0);
  s.h = h;
  s.beta_J = beta_J.value_or(critical_coupling());
  s.h_lat = h_lattice(h, s.a);
  s.validate();
  return s;
}

LatticeSpec LatticeSpec::from_lattice_field(int N, double h_lat, std::optional<double> beta_J) {
  LatticeSpec s;
  s.N = N;
  s.a = N > 0 ? 1.0 / N : 0.0;
  s.h = h_lat / std::pow(s.a, 15.0 / 8.0);
  s.beta_J = beta_J.value_or(critical_coupling());
  s.h_lat = h_lat;
  s.validate();
  return s;
}

void LatticeSpec::validate() const {
  std::string err;
  // N >= 3 so that the four neighbours of a site are distinct
  if (N < 3) err += "N must be at least 3; ";
  if (!(a > 0.0)) err += "a must be positive; ";
  if (!(h >= 0.0)) err += "h must be nonnegative; ";
  if (!(beta_J >= 0.0) || !std::isfinite(beta_J)) err += "beta_J must be finite and nonnegative; ";
  if (a > 0.0 && h >= 0.0 && std::abs(h_lattice(h, a) - h_lat) > 1e-12 * std::max(1.0, h_lat)) {
    err += "h_lat inconsistent with h a^{15/8}; ";
  }
  if (!err.empty()) throw PreconditionError("LatticeSpec: " + err.substr(0, err.size() - 2));
}

SpinConfiguration SpinConfiguration::cold(int N, std::uint64_t seed, std::uint64_t stream) {
  SpinConfiguration c = from_spins(N, std::vector<std::int8_t>(static_cast<std::size_t>(N) * N, 1));
  c.rng_.reseed(seed, stream);
  return c;
}

SpinConfiguration SpinConfiguration::hot(int N, std::uint64_t seed, std::uint64_t stream) {
  Philox rng(seed, stream);
  std::vector<std::int8_t> s(static_cast<std::size_t>(N) * N);
  for (auto& v : s) v = (rng.next_u32() & 1u) ? 1 : -1;
  SpinConfiguration c = from_spins(N, std::move(s));
  c.rng_ = rng;
  return c;
}

SpinConfiguration SpinConfiguration::from_spins(int N, std::vector<std::int8_t> spins,
                                                std::uint64_t sweep_count) {
  if (N < 3) throw PreconditionError("SpinConfiguration: N must be at least 3");
  if (spins.size() != static_cast<std::size_t>(N) * N) {
    throw PreconditionError("SpinConfiguration: expected N^2 spins");
  }
  for (auto v : spins) {
    if (v != 1 && v != -1) throw PreconditionError("SpinConfiguration: spins must be +1 or -1");
  }
  SpinConfiguration c;
  c.N_ = N;
  c.spins_ = std::move(spins);
  c.sweep_count_ = sweep_count;
  c.stamp_.assign(c.spins_.size(), 0);
  c.recount();
  return c;
}

int SpinConfiguration::neighbour_sum(int site) const {
  const int i = site / N_, j = site % N_;
  const int ip = i + 1 == N_ ? 0 : i + 1, im = i == 0 ? N_ - 1 : i - 1;
  const int jp = j + 1 == N_ ? 0 : j + 1, jm = j == 0 ? N_ - 1 : j - 1;
  return spins_[ip * N_ + j] + spins_[im * N_ + j] + spins_[i * N_ + jp] + spins_[i * N_ + jm];
}

std::int64_t SpinConfiguration::recompute_bond_sum() const {
  std::int64_t b = 0;
  for (int i = 0; i < N_; ++i) {
    for (int j = 0; j < N_; ++j) {
      const int s = spins_[i * N_ + j];
      b += s * spins_[((i + 1) % N_) * N_ + j] + s * spins_[i * N_ + (j + 1) % N_];
    }
  }
  return b;
}

std::int64_t SpinConfiguration::recompute_magnetization() const {
  std::int64_t m = 0;
  for (auto v : spins_) m += v;
  return m;
}

bool SpinConfiguration::bookkeeping_consistent() const {
  return bond_sum_ == recompute_bond_sum() && magnetization_ == recompute_magnetization();
}

void SpinConfiguration::recount() {
  bond_sum_ = recompute_bond_sum();
  magnetization_ = recompute_magnetization();
}

void SpinConfiguration::set_spin(int site, std::int8_t s) {
  if (s != 1 && s != -1) throw PreconditionError("set_spin: spin must be +1 or -1");
  const std::int8_t old = spins_[site];
  if (old == s) return;
  bond_sum_ += 2 * s * neighbour_sum(site);
  magnetization_ += 2 * s;
  spins_[site] = s;
}

namespace {

std::uint32_t probability_threshold(double p) {
  if (!(p > 0.0)) return 0;
  const double t = std::ldexp(p, 32);
  return t >= 4294967295.0 ? 0xFFFFFFFFu : static_cast<std::uint32_t>(t);
}

}  // namespace

std::size_t wolff_ghost_update(SpinConfiguration& c, const LatticeSpec& spec) {
  if (!(spec.h_lat >= 0.0)) throw PreconditionError("wolff_ghost_update: h_lat must be nonnegative");
  if (spec.N != c.N_) throw PreconditionError("wolff_ghost_update: lattice size mismatch");
  const int N = c.N_;
  const std::uint32_t p_bond = probability_threshold(-std::expm1(-2.0 * spec.beta_J));
  const std::uint32_t p_ghost = probability_threshold(-std::expm1(-2.0 * spec.h_lat));
  auto& rng = c.rng_;
  auto& spins = c.spins_;

  if (++c.stamp_value_ == 0) {
    std::fill(c.stamp_.begin(), c.stamp_.end(), 0);
    c.stamp_value_ = 1;
  }
  const std::uint32_t mark = c.stamp_value_;
  const int seed = static_cast<int>(rng.below(static_cast<std::uint32_t>(N * N)));
  const std::int8_t s = spins[seed];
  // only clusters aligned with the field can bond to the ghost
  const bool may_touch_ghost = s > 0 && p_ghost > 0;

  auto& stack = c.stack_;
  stack.clear();
  std::vector<int>& members = stack;  // stack doubles as the member list
  std::size_t head = 0;
  members.push_back(seed);
  c.stamp_[seed] = mark;
  while (head < members.size()) {
    const int site = members[head++];
    if (may_touch_ghost && rng.next_u32() < p_ghost) {
      // cluster is frozen by the ghost; no flip, nothing else to decide
      return members.size();
    }
    const int i = site / N, j = site % N;
    const int nb[4] = {(i + 1 == N ? 0 : i + 1) * N + j, (i == 0 ? N - 1 : i - 1) * N + j,
                       i * N + (j + 1 == N ? 0 : j + 1), i * N + (j == 0 ? N - 1 : j - 1)};
    for (int k : nb) {
      if (spins[k] == s && c.stamp_[k] != mark && rng.next_u32() < p_bond) {
        c.stamp_[k] = mark;
        members.push_back(k);
      }
    }
  }
  // bonds across the cluster boundary change sign
  std::int64_t boundary = 0;
  for (int site : members) {
    const int i = site / N, j = site % N;
    const int nb[4] = {(i + 1 == N ? 0 : i + 1) * N + j, (i == 0 ? N - 1 : i - 1) * N + j,
                       i * N + (j + 1 == N ? 0 : j + 1), i * N + (j == 0 ? N - 1 : j - 1)};
    for (int k : nb) {
      if (c.stamp_[k] != mark) boundary += s * spins[k];
    }
  }
  for (int site : members) spins[site] = static_cast<std::int8_t>(-s);
  c.bond_sum_ -= 2 * boundary;
  c.magnetization_ -= 2 * s * static_cast<std::int64_t>(members.size());
  return members.size();
}

std::uint64_t wolff_sweep(SpinConfiguration& c, const LatticeSpec& spec, int updates) {
  std::uint64_t visited = 0;
  for (int k = 0; k < updates; ++k) visited += wolff_ghost_update(c, spec);
  ++c.sweep_count_;
  return visited;
}

void metropolis_sweep(SpinConfiguration& c, const LatticeSpec& spec) {
  if (spec.N != c.N_) throw PreconditionError("metropolis_sweep: lattice size mismatch");
  // acceptance for dE = 2 s (beta_J * nsum + h_lat), indexed by spin and nsum
  std::array<double, 10> accept{};
  for (int si = 0; si < 2; ++si) {
    for (int k = 0; k < 5; ++k) {
      const double dE = 2.0 * (2 * si - 1) * (spec.beta_J * (2 * k - 4) + spec.h_lat);
      accept[si * 5 + k] = dE <= 0.0 ? 1.0 : std::exp(-dE);
    }
  }
  const int n = c.sites();
  auto& rng = c.rng_;
  for (int step = 0; step < n; ++step) {
    const int site = static_cast<int>(rng.below(static_cast<std::uint32_t>(n)));
    const int s = c.spins_[site];
    const int nsum = c.neighbour_sum(site);
    const double p = accept[(s + 1) / 2 * 5 + (nsum + 4) / 2];
    if (p >= 1.0 || rng.uniform() < p) {
      c.spins_[site] = static_cast<std::int8_t>(-s);
      c.bond_sum_ -= 2 * s * nsum;
      c.magnetization_ -= 2 * s;
    }
  }
  ++c.sweep_count_;
}

std::vector<std::uint8_t> encode_snapshot(const SpinConfiguration& c) {
  const std::size_t n = c.spins().size();
  std::vector<std::uint8_t> out(16 + (n + 7) / 8, 0);
  std::memcpy(out.data(), "ISNP", 4);
  const auto N = static_cast<std::uint32_t>(c.N());
  const std::uint64_t sweeps = c.sweep_count();
  for (int b = 0; b < 4; ++b) out[4 + b] = static_cast<std::uint8_t>(N >> (8 * b));
  for (int b = 0; b < 8; ++b) out[8 + b] = static_cast<std::uint8_t>(sweeps >> (8 * b));
  for (std::size_t k = 0; k < n; ++k) {
    if (c.spins()[k] > 0) out[16 + k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
  }
  return out;
}

SpinConfiguration decode_snapshot(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "ISNP", 4) != 0) {
    throw IoError("snapshot: bad header");
  }
  std::uint32_t N = 0;
  std::uint64_t sweeps = 0;
  for (int b = 0; b < 4; ++b) N |= std::uint32_t{bytes[4 + b]} << (8 * b);
  for (int b = 0; b < 8; ++b) sweeps |= std::uint64_t{bytes[8 + b]} << (8 * b);
  const std::size_t n = static_cast<std::size_t>(N) * N;
  if (N < 3 || N > 65535 || bytes.size() != 16 + (n + 7) / 8) throw IoError("snapshot: bad size");
  std::vector<std::int8_t> spins(n);
  for (std::size_t k = 0; k < n; ++k) spins[k] = (bytes[16 + k / 8] >> (k % 8)) & 1u ? 1 : -1;
  return SpinConfiguration::from_spins(static_cast<int>(N), std::move(spins), sweeps);
}

void write_snapshot(const SpinConfiguration& c, const std::string& path) {
  const auto bytes = encode_snapshot(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

SpinConfiguration read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace isingspec
