#include "isingspec/chain.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>

#include "isingspec/parallel.hpp"
#include "isingspec/stats.hpp"
#include "isingspec/text_util.hpp"

namespace isingspec {
namespace {

std::uint64_t update(SpinConfiguration& c, const LatticeSpec& spec, Dynamics d, int wolff_updates) {
  if (d == Dynamics::wolff) return wolff_sweep(c, spec, wolff_updates);
  metropolis_sweep(c, spec);
  return static_cast<std::uint64_t>(c.sites());
}

double site_correlation(const SpinConfiguration& c, Displacement d) {
  const int N = c.N();
  const auto& s = c.spins();
  std::int64_t sum = 0;
  for (int i = 0; i < N; ++i) {
    const int i2 = ((i + d.dx) % N + N) % N;
    const std::int8_t* row = &s[static_cast<std::size_t>(i) * N];
    const std::int8_t* row2 = &s[static_cast<std::size_t>(i2) * N];
    for (int j = 0; j < N; ++j) {
      const int j2 = ((j + d.dy) % N + N) % N;
      sum += row[j] * row2[j2];
    }
  }
  return static_cast<double>(sum) / (static_cast<double>(N) * N);
}

void slab_sample(const SpinConfiguration& c, std::vector<std::vector<double>>& slab) {
  const int N = c.N();
  std::vector<std::int64_t> rows(N, 0), cols(N, 0);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      const int v = c.at(i, j);
      rows[i] += v;
      cols[j] += v;
    }
  }
  const double norm = 2.0 * static_cast<double>(N) * N;
  for (int t = 0; t <= N / 2; ++t) {
    std::int64_t acc = 0;
    for (int y = 0; y < N; ++y) {
      const int y2 = (y + t) % N;
      acc += rows[y] * rows[y2] + cols[y] * cols[y2];
    }
    slab[t].push_back(static_cast<double>(acc) / norm);
  }
}

int default_blocks(std::size_t n) { return static_cast<int>(std::min<std::size_t>(32, n)); }

}  // namespace

ChainStats run_chain(const LatticeSpec& spec, const ChainOptions& opt) {
  spec.validate();
  if (opt.n_therm < 1 || opt.n_samples < 1) {
    throw PreconditionError("run_chain: n_therm and n_samples must be at least 1");
  }
  if (opt.thin < 1) throw PreconditionError("run_chain: thin must be at least 1");
  for (const auto& d : opt.displacements) {
    if (std::abs(d.dx) > spec.N / 2 || std::abs(d.dy) > spec.N / 2) {
      throw DomainError("run_chain: displacement beyond N/2");
    }
  }
  ChainStats st;
  st.spec = spec;
  st.options = opt;
  st.options.on_sample = nullptr;
  st.displacements = opt.displacements;
  st.two_point.assign(opt.displacements.size(), {});
  if (opt.slab) st.slab.assign(spec.N / 2 + 1, {});

  auto config = opt.hot_start ? SpinConfiguration::hot(spec.N, opt.seed) : SpinConfiguration::cold(spec.N, opt.seed);
  int per_sweep = opt.wolff_updates > 0 ? opt.wolff_updates : 1;
  std::uint64_t visited = 0, moves = 0;
  for (int k = 0; k < opt.n_therm; ++k) {
    if (opt.dynamics == Dynamics::wolff && opt.wolff_updates == 0) {
      // calibrate on the moves made so far; frozen once thermalization ends
      visited += update(config, spec, opt.dynamics, per_sweep);
      moves += per_sweep;
      const double mean_size = static_cast<double>(visited) / static_cast<double>(moves);
      per_sweep = std::max(1, static_cast<int>(std::lround(spec.sites() / mean_size)));
    } else {
      update(config, spec, opt.dynamics, per_sweep);
    }
  }
  st.wolff_updates = opt.dynamics == Dynamics::wolff ? per_sweep : 0;
  const double sites = spec.sites();
  st.magnetization.reserve(opt.n_samples);
  for (int n = 0; n < opt.n_samples; ++n) {
    for (int k = 0; k < opt.thin; ++k) update(config, spec, opt.dynamics, per_sweep);
    st.magnetization.push_back(static_cast<double>(config.magnetization()) / sites);
    st.energy.push_back(static_cast<double>(config.bond_sum()) / sites);
    for (std::size_t d = 0; d < opt.displacements.size(); ++d) {
      st.two_point[d].push_back(site_correlation(config, opt.displacements[d]));
    }
    if (opt.slab) slab_sample(config, st.slab);
    if (opt.on_sample) opt.on_sample(n, config);
  }
  const auto b = stats::blocking(st.magnetization);
  st.tau_int = b.tau_int;
  st.blocking_plateau = b.plateau;
  if (!b.plateau) st.flags.push_back("blocking did not plateau; error bars widened");
  return st;
}

ChainStats merge_chains(std::vector<ChainStats> parts) {
  if (parts.empty()) throw PreconditionError("merge_chains: no chains");
  ChainStats out = std::move(parts[0]);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    auto& p = parts[k];
    out.magnetization.insert(out.magnetization.end(), p.magnetization.begin(), p.magnetization.end());
    out.energy.insert(out.energy.end(), p.energy.begin(), p.energy.end());
    for (std::size_t d = 0; d < out.two_point.size(); ++d) {
      out.two_point[d].insert(out.two_point[d].end(), p.two_point[d].begin(), p.two_point[d].end());
    }
    for (std::size_t t = 0; t < out.slab.size(); ++t) {
      out.slab[t].insert(out.slab[t].end(), p.slab[t].begin(), p.slab[t].end());
    }
    for (auto& f : p.flags) {
      if (std::find(out.flags.begin(), out.flags.end(), f) == out.flags.end()) out.flags.push_back(f);
    }
  }
  if (parts.size() > 1) {
    const auto b = stats::blocking(out.magnetization);
    out.tau_int = b.tau_int;
    out.blocking_plateau = b.plateau;
  }
  return out;
}

std::uint64_t chain_seed(std::uint64_t seed, int chain, int chains) {
  return chains == 1 ? seed : derive_seed(seed, static_cast<std::uint64_t>(chain));
}

ChainStats run_chains(const LatticeSpec& spec, const ChainOptions& options, int chains, int threads) {
  if (chains < 1) throw PreconditionError("run_chains: need at least one chain");
  std::vector<ChainStats> parts(chains);
  parallel_for(chains, threads, [&](int k) {
    ChainOptions o = options;
    o.seed = chain_seed(options.seed, k, chains);
    parts[k] = run_chain(spec, o);
  });
  return merge_chains(std::move(parts));
}

Estimate two_point(const ChainStats& stats, Displacement x, bool connected) {
  const int N = stats.spec.N;
  if (std::abs(x.dx) > N / 2 || std::abs(x.dy) > N / 2) {
    throw DomainError("two_point: displacement outside the minimal-image range");
  }
  if (x.dx == 0 && x.dy == 0 && !connected) return {1.0, 0.0};
  const auto it = std::find(stats.displacements.begin(), stats.displacements.end(), x);
  if (it == stats.displacements.end()) {
    throw DomainError("two_point: displacement (" + std::to_string(x.dx) + "," + std::to_string(x.dy) +
                      ") was not recorded");
  }
  const auto& series = stats.two_point[it - stats.displacements.begin()];
  if (!connected) {
    const auto b = stats::blocking(series);
    return {b.mean, b.error};
  }
  return stats::jackknife({series, stats.magnetization}, default_blocks(series.size()),
                          [](const std::vector<double>& m) { return m[0] - m[1] * m[1]; });
}

Estimate mean_magnetization(const ChainStats& stats) {
  const auto b = stats::blocking(stats.magnetization);
  return {b.mean, b.error};
}

Correlator slab_correlator(const ChainStats& stats, int n_blocks) {
  if (stats.slab.empty()) throw PreconditionError("slab_correlator: chain did not record slabs");
  const int N = stats.spec.N;
  const int T = static_cast<int>(stats.slab.size());
  std::vector<std::vector<double>> cols(stats.slab.begin(), stats.slab.end());
  cols.push_back(stats.magnetization);
  auto conn = [N, T](const std::vector<double>& m) {
    std::vector<double> c(T);
    for (int t = 0; t < T; ++t) c[t] = m[t] - N * m[T] * m[T];
    return c;
  };
  std::vector<double> full(cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) full[k] = stats::mean(cols[k]);
  Correlator out;
  out.value = conn(full);
  const auto reps = stats::jackknife_means(cols, std::min<int>(n_blocks, static_cast<int>(cols[0].size())));
  for (const auto& r : reps) out.replicas.push_back(conn(r));
  out.error.resize(T);
  for (int t = 0; t < T; ++t) {
    std::vector<double> v(reps.size());
    for (std::size_t b = 0; b < reps.size(); ++b) v[b] = out.replicas[b][t];
    out.error[t] = stats::jackknife_error(v);
    out.t.push_back(t);
  }
  return out;
}

namespace {

struct CoshFit {
  double mass;
  double amplitude;
};

CoshFit fit_cosh(const std::vector<double>& y, const std::vector<double>& err, int N, int t_min,
                 int t_max) {
  auto basis = [N](double m, int t) { return std::exp(-m * t) + std::exp(-m * (N - t)); };
  auto amplitude = [&](double m) {
    double num = 0, den = 0;
    for (int t = t_min; t <= t_max; ++t) {
      const double w = 1.0 / (err[t] * err[t]);
      const double f = basis(m, t);
      num += w * f * y[t];
      den += w * f * f;
    }
    return num / den;
  };
  auto chi2 = [&](double logm) {
    const double m = std::exp(logm);
    const double A = amplitude(m);
    double c = 0;
    for (int t = t_min; t <= t_max; ++t) {
      const double r = (y[t] - A * basis(m, t)) / err[t];
      c += r * r;
    }
    return c;
  };
  // coarse scan in log m, then Brent refinement around the best node
  const double lo = std::log(1e-4), hi = std::log(20.0);
  const int nodes = 200;
  int best = 0;
  double best_val = INFINITY;
  for (int k = 0; k <= nodes; ++k) {
    const double v = chi2(lo + (hi - lo) * k / nodes);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  const double step = (hi - lo) / nodes;
  const double a = lo + step * std::max(0, best - 1);
  const double b = lo + step * std::min(nodes, best + 1);
  const auto r = boost::math::tools::brent_find_minima(chi2, a, b, 52);
  const double m = std::exp(r.first);
  return {m, amplitude(m)};
}

}  // namespace

DecayFit fit_decay_rate(const Correlator& c, int N, int t_min, int t_max) {
  const int T = static_cast<int>(c.value.size());
  if (t_min < 0 || t_max >= T || t_max - t_min < 2) {
    throw DomainError("fit_decay_rate: window must hold at least three points inside [0, N/2]");
  }
  std::vector<double> err = c.error;
  for (auto& e : err) {
    if (!(e > 0.0)) e = 1e-300;
  }
  DecayFit out;
  const auto full = fit_cosh(c.value, err, N, t_min, t_max);
  out.mass = full.mass;
  out.amplitude = full.amplitude;
  std::vector<double> reps;
  for (const auto& r : c.replicas) reps.push_back(fit_cosh(r, err, N, t_min, t_max).mass);
  out.mass_error = reps.size() >= 2 ? stats::jackknife_error(reps) : INFINITY;
  out.t_min = t_min;
  out.t_max = t_max;
  out.decay_lengths = (t_max - t_min) * out.mass;
  if (out.decay_lengths < 3.0) {
    out.flags.push_back("unreliable: decay window spans " + format_double(std::round(out.decay_lengths * 100) / 100) +
                        " < 3 decay lengths");
  }
  return out;
}

DecayFit fit_decay_rate_auto(const Correlator& c, int N) {
  const int T = static_cast<int>(c.value.size());
  int t_signal = 0;
  while (t_signal + 1 < T && c.value[t_signal + 1] > 2.0 * c.error[t_signal + 1]) ++t_signal;
  if (t_signal < 3) {
    DecayFit bad;
    bad.mass = NAN;
    bad.mass_error = INFINITY;
    bad.flags.push_back("unreliable: correlator lost in noise before t = 3");
    return bad;
  }
  int t_min = 1, t_max = t_signal;
  DecayFit fit = fit_decay_rate(c, N, t_min, t_max);
  for (int iter = 0; iter < 8; ++iter) {
    const double m = fit.mass;
    int new_min = std::max(1, static_cast<int>(std::lround(0.5 / m)));
    int new_max = std::min({T - 1, t_signal, new_min + static_cast<int>(std::ceil(3.5 / m))});
    if (new_max - new_min < 2) {
      new_min = std::max(0, new_max - 2);
    }
    if (new_min == t_min && new_max == t_max) break;
    t_min = new_min;
    t_max = new_max;
    fit = fit_decay_rate(c, N, t_min, t_max);
  }
  return fit;
}

std::vector<FieldScanPoint> run_field_scan(int N, const std::vector<double>& h_list,
                                           const ScanBudget& budget, std::uint64_t seed,
                                           bool measure_decay) {
  std::vector<FieldScanPoint> points(h_list.size());
  for (std::size_t k = 0; k < h_list.size(); ++k) {
    const auto spec = LatticeSpec::make(N, h_list[k]);
    ChainOptions opt;
    opt.n_therm = budget.n_therm;
    opt.n_samples = budget.n_samples;
    opt.thin = budget.thin;
    opt.seed = derive_seed(seed, k);
    opt.slab = measure_decay;
    const auto st = run_chains(spec, opt, budget.chains, budget.threads);
    auto& p = points[k];
    p.h = spec.h;
    p.h_lat = spec.h_lat;
    p.magnetization = mean_magnetization(st);
    p.flags = st.flags;
    if (measure_decay) {
      p.decay = fit_decay_rate_auto(slab_correlator(st), N);
      p.xi = 1.0 / p.decay.mass;
      for (const auto& f : p.decay.flags) p.flags.push_back(f);
      if (!(p.xi < N / 4.0)) p.flags.push_back("finite-size contaminated: xi >= N/4");
    }
  }
  return points;
}

namespace {

void tag(Flags& flags, const FieldScanPoint& p) {
  for (const auto& f : p.flags) flags.push_back("h=" + format_double(p.h) + ": " + f);
}

void require_decade(const std::vector<double>& h_list) {
  if (h_list.size() < 2) throw PreconditionError("field scan: need at least two field values");
  const auto [lo, hi] = std::minmax_element(h_list.begin(), h_list.end());
  if (!(*lo > 0.0) || *hi / *lo < 10.0 * (1.0 - 1e-12)) {
    throw PreconditionError("field scan: h_list must be positive and span at least one decade");
  }
}

}  // namespace

ExponentFit isotherm_fit(int N, std::vector<FieldScanPoint> points) {
  ExponentFit out;
  std::vector<double> x, y, s;
  for (const auto& p : points) {
    x.push_back(std::log(p.h));
    y.push_back(std::log(p.magnetization.value));
    s.push_back(p.magnetization.error / p.magnetization.value);
    tag(out.flags, p);
    if (p.xi > 0.0 && !(p.xi < N / 4.0)) out.flags.push_back("finite-size contaminated");
  }
  const auto fit = stats::linear_fit(x, y, s);
  out.slope = fit.slope;
  out.slope_error = fit.slope_error;
  out.amplitude = std::exp(fit.intercept);
  out.points = std::move(points);
  return out;
}

ExponentFit critical_isotherm_scan(int N, const std::vector<double>& h_list, const ScanBudget& budget,
                                   std::uint64_t seed) {
  require_decade(h_list);
  return isotherm_fit(N, run_field_scan(N, h_list, budget, seed, true));
}

ExponentFit mass_gap_fit(int N, std::vector<FieldScanPoint> points) {
  ExponentFit out;
  std::vector<double> x, y, s;
  for (const auto& p : points) {
    tag(out.flags, p);
    if (!(p.decay.mass > 0.0) || !std::isfinite(p.decay.mass_error)) {
      out.flags.push_back("h=" + format_double(p.h) + ": no usable decay rate");
      continue;
    }
    x.push_back(std::log(p.h));
    y.push_back(std::log(p.decay.mass));
    s.push_back(p.decay.mass_error / p.decay.mass);
  }
  for (std::size_t k = 1; k < points.size(); ++k) {
    if (points[k].h > points[k - 1].h && !(points[k].decay.mass > points[k - 1].decay.mass)) {
      out.flags.push_back("fitted m1 not increasing in h");
    }
  }
  (void)N;
  if (x.size() < 2) {
    out.slope = NAN;
    out.slope_error = INFINITY;
    out.flags.push_back("unreliable: fewer than two usable field values");
  } else {
    const auto fit = stats::linear_fit(x, y, s);
    out.slope = fit.slope;
    out.slope_error = fit.slope_error;
    out.amplitude = std::exp(fit.intercept);
  }
  out.points = std::move(points);
  return out;
}

ExponentFit mass_gap_scan(int N, const std::vector<double>& h_list, const ScanBudget& budget,
                          std::uint64_t seed) {
  require_decade(h_list);
  return mass_gap_fit(N, run_field_scan(N, h_list, budget, seed, true));
}

}  // namespace isingspec
