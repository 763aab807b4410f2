#include "isingspec/gp.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>

#include "isingspec/kernel.hpp"
#include "isingspec/parallel.hpp"
#include "isingspec/rng.hpp"
#include "isingspec/stats.hpp"

namespace isingspec {

GPSpec::GPSpec(const MassSpectralMeasure& measure, double t0_, double dt_, int n_, std::uint64_t seed_,
               int nodes)
    : rho(as_kind(measure, MeasureKind::rho)), nodes_per_piece(nodes), t0(t0_), dt(dt_), n(n_), seed(seed_) {
  if (!(dt > 0.0)) throw PreconditionError("GPSpec: dt must be positive");
  if (n < 2) throw PreconditionError("GPSpec: need n >= 2 grid points");
  if (nodes_per_piece < 8) throw PreconditionError("GPSpec: need at least 8 nodes per piece");
}

namespace {

constexpr int kPanel = 8;
constexpr int kMaxNodes = 8192;

double piece_mass(const PowerPiece& p) {
  return MassSpectralMeasure({}, {p}, MeasureKind::rho, p.m_lo).total_mass();
}

void discretize_piece(const PowerPiece& p, int nodes, std::vector<Atom>& out) {
  const double q = p.exponent + 1.0;
  // u-extent; for an unbounded piece stop where the remaining weight is 1e-13
  const double U = p.infinite() ? std::log(1e13) / -q : std::log(p.m_hi / p.m_lo);
  const int panels = std::max(1, nodes / kPanel);
  const double h = U / panels;
  using GL = boost::math::quadrature::gauss<double, kPanel>;
  const auto& x = GL::abscissa();
  const auto& w = GL::weights();
  const std::size_t first = out.size();
  double total = 0.0;
  auto push = [&](double u, double wt) {
    const double m = p.m_lo * std::exp(u);
    // dm = m du
    const double weight = wt * p.amplitude * std::pow(m, q);
    out.push_back({m, weight});
    total += weight;
  };
  for (int k = 0; k < panels; ++k) {
    const double c = (k + 0.5) * h, r = 0.5 * h;
    // boost stores the non-negative half of the symmetric rule
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == 0.0) {
        push(c, r * w[i]);
      } else {
        push(c - r * x[i], r * w[i]);
        push(c + r * x[i], r * w[i]);
      }
    }
  }
  const double scale = piece_mass(p) / total;
  for (std::size_t k = first; k < out.size(); ++k) out[k].weight *= scale;
}

std::vector<Atom> discretize_with(const MassSpectralMeasure& rho, int nodes) {
  std::vector<Atom> out = rho.atoms();
  for (const auto& p : rho.pieces()) discretize_piece(p, nodes, out);
  std::sort(out.begin(), out.end(), [](const Atom& a, const Atom& b) { return a.mass < b.mass; });
  return out;
}

}  // namespace

double discrete_K(const std::vector<Atom>& components, double s) {
  stats::CompensatedSum acc;
  for (const auto& c : components) acc.add(c.weight * std::exp(-c.mass * std::abs(s)));
  return acc.value();
}

double discrete_K_drop(const std::vector<Atom>& components, double s) {
  stats::CompensatedSum acc;
  for (const auto& c : components) acc.add(-c.weight * std::expm1(-c.mass * std::abs(s)));
  return acc.value();
}

Discretization discretize(const GPSpec& spec) {
  Discretization d;
  if (spec.rho.pieces().empty()) {
    d.components = spec.rho.atoms();
    d.nodes_per_piece = 0;
    d.converged = true;
    return d;
  }
  const KernelContext ctx(spec.rho);
  std::vector<double> lags = {0.0};
  for (double s = spec.dt; s <= spec.dt * (spec.n - 1) * (1 + 1e-12); s *= 2) lags.push_back(s);
  std::vector<double> K, drop;
  for (double s : lags) {
    K.push_back(kernel_K(ctx, s));
    drop.push_back(s > 0 ? kernel_K_drop(ctx, s) : 0.0);
  }
  for (int nodes = spec.nodes_per_piece; nodes <= kMaxNodes; nodes *= 2) {
    d.components = discretize_with(spec.rho, nodes);
    d.nodes_per_piece = nodes;
    d.max_rel_dev = 0.0;
    for (std::size_t k = 0; k < lags.size(); ++k) {
      d.max_rel_dev = std::max(d.max_rel_dev, std::abs(discrete_K(d.components, lags[k]) / K[k] - 1.0));
      if (lags[k] > 0) {
        d.max_rel_dev =
            std::max(d.max_rel_dev, std::abs(discrete_K_drop(d.components, lags[k]) / drop[k] - 1.0));
      }
    }
    if (d.max_rel_dev <= 1e-4) {
      d.converged = true;
      break;
    }
  }
  return d;
}

PathSample sample_path(const GPSpec& spec, const Discretization& d, int index) {
  PathSample p{spec.t0, spec.dt, std::vector<double>(spec.n, 0.0)};
  Philox rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index)));
  for (const auto& c : d.components) {
    const double rho1 = std::exp(-c.mass * spec.dt);
    const double innov = std::sqrt(-std::expm1(-2.0 * c.mass * spec.dt));
    const double amp = std::sqrt(c.weight);
    double u = rng.normal();
    p.values[0] += amp * u;
    for (int i = 1; i < spec.n; ++i) {
      u = rho1 * u + innov * rng.normal();
      p.values[i] += amp * u;
    }
  }
  return p;
}

PathSample sample_path(const GPSpec& spec) { return sample_path(spec, discretize(spec), 0); }

std::vector<PathSample> sample_paths(const GPSpec& spec, const Discretization& d, int n_paths, int threads) {
  std::vector<PathSample> out(n_paths);
  parallel_for(n_paths, threads, [&](int k) { out[k] = sample_path(spec, d, k); });
  return out;
}

std::vector<CovRow> empirical_cov(const std::vector<PathSample>& paths, const std::vector<int>& lags) {
  if (paths.size() < 100) throw PreconditionError("empirical_cov: need at least 100 paths");
  std::vector<CovRow> out;
  for (int lag : lags) {
    const int k = std::abs(lag);
    std::vector<double> per_path;
    for (const auto& p : paths) {
      const int n = static_cast<int>(p.values.size());
      if (k >= n) throw DomainError("empirical_cov: lag exceeds the path length");
      stats::CompensatedSum acc;
      for (int i = 0; i + k < n; ++i) acc.add(p.values[i] * p.values[i + k]);
      per_path.push_back(acc.value() / (n - k));
    }
    out.push_back({lag * paths.front().dt, stats::mean(per_path),
                   std::sqrt(stats::variance(per_path) / static_cast<double>(per_path.size()))});
  }
  return out;
}

namespace {

bool has_scale_free_tail(const MassSpectralMeasure& measure) {
  const auto rho = as_kind(measure, MeasureKind::rho);
  for (const auto& p : rho.pieces()) {
    if (p.infinite() && p.exponent > -2.0 && p.exponent < -1.0) return true;
  }
  return false;
}

double half_slope(const std::vector<double>& deltas, const std::vector<double>& values) {
  std::vector<double> x, y;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    x.push_back(std::log(deltas[k]));
    y.push_back(std::log(values[k]));
  }
  return 0.5 * stats::linear_fit(x, y).slope;
}

}  // namespace

Roughness roughness_exponent(const std::vector<PathSample>& paths, const std::vector<int>& delta_steps,
                             const MassSpectralMeasure& rho) {
  if (paths.size() < 2) throw PreconditionError("roughness_exponent: need at least two paths");
  if (delta_steps.size() < 2) throw PreconditionError("roughness_exponent: need at least two deltas");
  const double dt = paths.front().dt;
  std::vector<double> deltas;
  for (int k : delta_steps) {
    if (k < 1) throw PreconditionError("roughness_exponent: deltas must be positive grid steps");
    deltas.push_back(k * dt);
  }
  // columns: structure function per delta, per path
  std::vector<std::vector<double>> cols(delta_steps.size(), std::vector<double>(paths.size()));
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto& v = paths[p].values;
    const int n = static_cast<int>(v.size());
    for (std::size_t d = 0; d < delta_steps.size(); ++d) {
      const int k = delta_steps[d];
      if (k >= n) throw DomainError("roughness_exponent: delta exceeds the path length");
      stats::CompensatedSum acc;
      for (int i = 0; i + k < n; ++i) acc.add((v[i + k] - v[i]) * (v[i + k] - v[i]));
      cols[d][p] = acc.value() / (n - k);
    }
  }
  const int blocks = static_cast<int>(std::min<std::size_t>(50, paths.size()));
  const auto est = stats::jackknife(cols, blocks, [&](const std::vector<double>& m) { return half_slope(deltas, m); });
  Roughness r{est.value, est.error, {}};
  if (!has_scale_free_tail(rho)) r.flags.push_back("smooth regime: no scale-free spectral tail");
  return r;
}

double analytic_roughness(const MassSpectralMeasure& measure, const std::vector<double>& deltas) {
  const KernelContext ctx(measure);
  std::vector<double> v;
  for (double d : deltas) v.push_back(2.0 * kernel_K_drop(ctx, d));
  return half_slope(deltas, v);
}

std::vector<double> integrate_path(const PathSample& path) {
  std::vector<double> y(path.values.size(), 0.0);
  for (std::size_t i = 1; i < y.size(); ++i) {
    y[i] = y[i - 1] + 0.5 * path.dt * (path.values[i - 1] + path.values[i]);
  }
  return y;
}

std::vector<int> log_spaced_steps(int lo, int hi, int count) {
  if (lo < 1 || hi < lo || count < 2) throw PreconditionError("log_spaced_steps: need 1 <= lo <= hi, count >= 2");
  std::vector<int> out;
  for (int k = 0; k < count; ++k) {
    const int v = static_cast<int>(std::lround(lo * std::pow(double(hi) / lo, double(k) / (count - 1))));
    if (out.empty() || v != out.back()) out.push_back(v);
  }
  return out;
}

}  // namespace isingspec
