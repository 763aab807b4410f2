#include "isingspec/field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "isingspec/quadrature.hpp"
#include "isingspec/stats.hpp"
#include "isingspec/text_util.hpp"

namespace isingspec {
namespace {

double min_image(double d, double torus) { return d - torus * std::round(d / torus); }

// site coordinates closer than this to an interval end count as on it
constexpr double kEdge = 1e-9;

bool in_half_open(double d, double half, double a) {
  return d >= -half - kEdge * a && d < half - kEdge * a;
}

double renorm(const LatticeSpec& spec) { return std::pow(spec.a, 15.0 / 8.0); }

int jk_blocks(std::size_t n) { return static_cast<int>(std::min<std::size_t>(32, n)); }

}  // namespace

double gaussian_density(double x, double eps) {
  return std::exp(-0.5 * (x / eps) * (x / eps)) / (eps * std::sqrt(2.0 * kPi));
}

TestFunction TestFunction::block_indicator(double t0, double y0, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("block_indicator: eps must be positive");
  TestFunction f;
  f.terms_.push_back({TestTerm::Kind::block_indicator, 1.0, t0, y0, eps, 0.0});
  return f;
}

TestFunction TestFunction::strip_indicator(double s, double y0, double L, double eps) {
  if (!(eps > 0.0) || !(L > 0.0)) throw PreconditionError("strip_indicator: L and eps must be positive");
  TestFunction f;
  f.terms_.push_back({TestTerm::Kind::strip_indicator, 1.0, s, y0, eps, L});
  return f;
}

TestFunction TestFunction::gaussian_time(double s, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("gaussian_time: eps must be positive");
  TestFunction f;
  f.terms_.push_back({TestTerm::Kind::gaussian_time, 1.0, s, 0.0, eps, 0.0});
  return f;
}

TestFunction TestFunction::operator+(const TestFunction& o) const {
  TestFunction f = *this;
  f.terms_.insert(f.terms_.end(), o.terms_.begin(), o.terms_.end());
  return f;
}

TestFunction TestFunction::operator*(double c) const {
  TestFunction f = *this;
  for (auto& t : f.terms_) t.coefficient *= c;
  return f;
}

double TestFunction::eval(double t, double y, double torus) const {
  double v = 0.0;
  for (const auto& term : terms_) {
    const double dt = min_image(t - term.t, torus);
    const double dy = min_image(y - term.y, torus);
    switch (term.kind) {
      case TestTerm::Kind::block_indicator:
        if (dt >= -term.eps / 2 && dt < term.eps / 2 && dy >= -term.eps / 2 && dy < term.eps / 2) {
          v += term.coefficient / (term.eps * term.eps);
        }
        break;
      case TestTerm::Kind::strip_indicator:
        if (dy >= -term.L && dy < term.L) v += term.coefficient * gaussian_density(dt, term.eps);
        break;
      case TestTerm::Kind::gaussian_time:
        v += term.coefficient * gaussian_density(dt, term.eps);
        break;
    }
  }
  return v;
}

void TestFunction::check_support(double torus) const {
  for (const auto& term : terms_) {
    bool ok = true;
    switch (term.kind) {
      case TestTerm::Kind::block_indicator:
        ok = term.eps <= torus;
        break;
      case TestTerm::Kind::strip_indicator:
        ok = 2.0 * term.L <= torus * (1 + 1e-12) && 12.0 * term.eps <= torus;
        break;
      case TestTerm::Kind::gaussian_time:
        // +-6 standard deviations must fit; the weight beyond is 2e-9
        ok = 12.0 * term.eps <= torus;
        break;
    }
    if (!ok) throw DomainError("test function support exceeds the torus of side " + format_double(torus));
  }
}

namespace {

// a^{15/8} sum f_term(a x) sigma_x without the coefficient
double term_sum(const SpinConfiguration& c, const LatticeSpec& spec, const TestTerm& term) {
  const int N = spec.N;
  const double a = spec.a, torus = N * a;
  stats::CompensatedSum acc;
  switch (term.kind) {
    case TestTerm::Kind::block_indicator: {
      long count = 0;
      for (int i = 0; i < N; ++i) {
        if (!in_half_open(min_image(a * i - term.t, torus), term.eps / 2, a)) continue;
        for (int j = 0; j < N; ++j) {
          if (in_half_open(min_image(a * j - term.y, torus), term.eps / 2, a)) count += c.at(i, j);
        }
      }
      acc.add(static_cast<double>(count) / (term.eps * term.eps));
      break;
    }
    case TestTerm::Kind::strip_indicator:
    case TestTerm::Kind::gaussian_time: {
      for (int i = 0; i < N; ++i) {
        const double w = gaussian_density(min_image(a * i - term.t, torus), term.eps);
        long row = 0;
        for (int j = 0; j < N; ++j) {
          if (term.kind == TestTerm::Kind::gaussian_time ||
              in_half_open(min_image(a * j - term.y, torus), term.L, a)) {
            row += c.at(i, j);
          }
        }
        acc.add(w * static_cast<double>(row));
      }
      break;
    }
  }
  return renorm(spec) * acc.value();
}

}  // namespace

double phi_of_f(const SpinConfiguration& config, const LatticeSpec& spec, const TestFunction& f) {
  if (config.N() != spec.N) throw PreconditionError("phi_of_f: lattice size mismatch");
  f.check_support(spec.N * spec.a);
  stats::CompensatedSum acc;
  for (const auto& term : f.terms()) acc.add(term.coefficient * term_sum(config, spec, term));
  return acc.value();
}

long block_site_count(const LatticeSpec& spec, double t0, double y0, double eps) {
  const double torus = spec.N * spec.a;
  long ni = 0, nj = 0;
  for (int i = 0; i < spec.N; ++i) {
    if (in_half_open(min_image(spec.a * i - t0, torus), eps / 2, spec.a)) ++ni;
    if (in_half_open(min_image(spec.a * i - y0, torus), eps / 2, spec.a)) ++nj;
  }
  return ni * nj;
}

namespace {

// Raw strip pairings for one configuration at every (s, y0), in that order.
std::vector<double> strip_pairings(const SpinConfiguration& c, const LatticeSpec& spec, double L,
                                   const std::vector<std::vector<double>>& weights,
                                   const std::vector<double>& y0_list) {
  const int N = spec.N;
  const double a = spec.a, torus = N * a;
  // transverse window of each y0 as a list of columns
  std::vector<std::vector<int>> cols(y0_list.size());
  for (std::size_t k = 0; k < y0_list.size(); ++k) {
    for (int j = 0; j < N; ++j) {
      if (in_half_open(min_image(a * j - y0_list[k], torus), L, a)) cols[k].push_back(j);
    }
  }
  std::vector<double> out;
  out.reserve(weights.size() * y0_list.size());
  std::vector<std::vector<long>> rows(y0_list.size(), std::vector<long>(N, 0));
  for (std::size_t k = 0; k < y0_list.size(); ++k) {
    for (int i = 0; i < N; ++i) {
      long r = 0;
      for (int j : cols[k]) r += c.at(i, j);
      rows[k][i] = r;
    }
  }
  const double z = renorm(spec);
  for (const auto& w : weights) {
    for (std::size_t k = 0; k < y0_list.size(); ++k) {
      stats::CompensatedSum acc;
      for (int i = 0; i < N; ++i) acc.add(w[i] * static_cast<double>(rows[k][i]));
      out.push_back(z * acc.value());
    }
  }
  return out;
}

}  // namespace

XLBatch gaussian_mollifier_pair(const std::vector<SpinConfiguration>& configs, const LatticeSpec& spec,
                                double L, const std::vector<double>& s_list, double eps,
                                const std::vector<double>& y0_list) {
  if (configs.empty()) throw PreconditionError("gaussian_mollifier_pair: no configurations");
  if (s_list.empty() || y0_list.empty()) throw PreconditionError("gaussian_mollifier_pair: empty positions");
  const double torus = spec.N * spec.a;
  TestFunction::strip_indicator(0.0, 0.0, L, eps).check_support(torus);
  XLBatch batch;
  if (eps < spec.a * (1 - 1e-12)) {
    batch.flags.push_back("under-resolved: eps = " + format_double(eps / spec.a) +
                          " a is below the lattice spacing");
  }
  std::vector<std::vector<double>> weights(s_list.size(), std::vector<double>(spec.N));
  for (std::size_t k = 0; k < s_list.size(); ++k) {
    for (int i = 0; i < spec.N; ++i) {
      weights[k][i] = gaussian_density(min_image(spec.a * i - s_list[k], torus), eps);
    }
  }
  std::vector<double> raw;
  for (std::size_t n = 0; n < configs.size(); ++n) {
    if (configs[n].N() != spec.N) throw PreconditionError("gaussian_mollifier_pair: lattice size mismatch");
    const auto vals = strip_pairings(configs[n], spec, L, weights, y0_list);
    std::size_t idx = 0;
    for (double s : s_list) {
      for (double y0 : y0_list) {
        batch.samples.push_back({L, s, eps, y0, static_cast<int>(n), vals[idx++]});
        raw.push_back(batch.samples.back().value);
      }
    }
  }
  batch.raw_mean = stats::mean(raw);
  const double norm = 1.0 / std::sqrt(2.0 * L);
  for (auto& x : batch.samples) x.value = (x.value - batch.raw_mean) * norm;
  return batch;
}

double gaussian_convolution(double x, double var1, double var2) {
  const double e1 = std::sqrt(var1), e2 = std::sqrt(var2);
  auto f = [&](double u) { return gaussian_density(u, e1) * gaussian_density(x - u, e2); };
  quad::Options opt;
  opt.rel_tol = 1e-13;
  opt.abs_tol = 1e-300;
  const double c = x * var1 / (var1 + var2);  // peak of the integrand
  const double w = 12.0 * std::sqrt(var1 * var2 / (var1 + var2));
  return quad::integrate(f, c - w, c, opt).value + quad::integrate(f, c, c + w, opt).value;
}

std::vector<CauchyStep> mollifier_cauchy_check(const std::vector<SpinConfiguration>& configs,
                                               const LatticeSpec& spec, double L,
                                               const std::vector<double>& eps_list,
                                               const std::vector<double>& s_list,
                                               const std::vector<double>& y0_list) {
  std::vector<CauchyStep> out;
  for (double eps : eps_list) {
    const auto coarse = gaussian_mollifier_pair(configs, spec, L, s_list, eps, y0_list);
    const auto fine = gaussian_mollifier_pair(configs, spec, L, s_list, eps / 2, y0_list);
    // per-configuration mean squared difference
    std::vector<double> per_config(configs.size(), 0.0);
    const std::size_t per = s_list.size() * y0_list.size();
    for (std::size_t k = 0; k < coarse.samples.size(); ++k) {
      const double d = coarse.samples[k].value - fine.samples[k].value;
      per_config[coarse.samples[k].config_index] += d * d / static_cast<double>(per);
    }
    const auto msd = stats::jackknife({per_config}, jk_blocks(per_config.size()),
                                      [](const std::vector<double>& m) { return std::sqrt(m[0]); });
    out.push_back({eps, msd});
  }
  return out;
}

namespace {

// Block pairings B(c) for every lattice position c (block anchored so that it
// covers offsets [-w/2, w/2) around c), as a row-major N x N array.
std::vector<double> block_field(const SpinConfiguration& c, const LatticeSpec& spec, int w) {
  const int N = spec.N;
  const int lo = -(w / 2);
  std::vector<long> horiz(static_cast<std::size_t>(N) * N, 0);
  for (int i = 0; i < N; ++i) {
    long acc = 0;
    for (int d = 0; d < w; ++d) acc += c.at(i, ((lo + d) % N + N) % N);
    for (int j = 0; j < N; ++j) {
      horiz[i * N + j] = acc;
      acc += c.at(i, ((j + lo + w) % N + N) % N) - c.at(i, ((j + lo) % N + N) % N);
    }
  }
  std::vector<double> out(static_cast<std::size_t>(N) * N);
  const double scale = renorm(spec) / (w * spec.a * w * spec.a);
  for (int j = 0; j < N; ++j) {
    long acc = 0;
    for (int d = 0; d < w; ++d) acc += horiz[((lo + d) % N + N) % N * N + j];
    for (int i = 0; i < N; ++i) {
      out[i * N + j] = scale * static_cast<double>(acc);
      acc += horiz[((i + lo + w) % N + N) % N * N + j] - horiz[((i + lo) % N + N) % N * N + j];
    }
  }
  return out;
}

int lattice_steps(double x, double a, const char* what) {
  const double k = x / a;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-6) {
    throw PreconditionError(std::string("estimate_H: ") + what + " = " + format_double(x) +
                            " is not a multiple of the lattice spacing");
  }
  return static_cast<int>(r);
}

}  // namespace

std::vector<HRow> estimate_H(const std::vector<SpinConfiguration>& configs, const LatticeSpec& spec,
                             const std::vector<std::pair<double, double>>& grid,
                             std::optional<double> block_side) {
  if (configs.size() < 2) throw PreconditionError("estimate_H: need at least two configurations");
  const double b = block_side.value_or(4.0 * spec.a);
  const int w = lattice_steps(b, spec.a, "block side");
  if (w < 1 || w > spec.N) throw DomainError("estimate_H: block side outside [a, N a]");
  const int N = spec.N;
  std::vector<std::pair<int, int>> steps;
  for (const auto& [s, y] : grid) {
    const int di = lattice_steps(s, spec.a, "s"), dj = lattice_steps(y, spec.a, "y");
    if (std::max(std::abs(di), std::abs(dj)) < w) {
      throw PreconditionError("estimate_H: grid point (" + format_double(s) + ", " + format_double(y) +
                              ") is closer than one block width");
    }
    if (std::abs(di) > N / 2 || std::abs(dj) > N / 2) {
      throw DomainError("estimate_H: separation beyond half the torus");
    }
    steps.emplace_back(di, dj);
  }
  // columns: [0] per-config mean block value, [1 + g] per-config mean product
  std::vector<std::vector<double>> cols(1 + grid.size(), std::vector<double>(configs.size()));
  for (std::size_t n = 0; n < configs.size(); ++n) {
    const auto B = block_field(configs[n], spec, w);
    stats::CompensatedSum m;
    for (double v : B) m.add(v);
    cols[0][n] = m.value() / (static_cast<double>(N) * N);
    for (std::size_t g = 0; g < steps.size(); ++g) {
      const auto [di, dj] = steps[g];
      stats::CompensatedSum acc;
      for (int i = 0; i < N; ++i) {
        const int i2 = ((i + di) % N + N) % N;
        for (int j = 0; j < N; ++j) acc.add(B[i * N + j] * B[i2 * N + ((j + dj) % N + N) % N]);
      }
      cols[1 + g][n] = acc.value() / (static_cast<double>(N) * N);
    }
  }
  std::vector<HRow> out;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto e = stats::jackknife({cols[1 + g], cols[0]}, jk_blocks(configs.size()),
                                    [](const std::vector<double>& m) { return m[0] - m[1] * m[1]; });
    out.push_back({grid[g].first, grid[g].second, e.value, e.error});
  }
  return out;
}

std::vector<KRow> estimate_K(const std::vector<HRow>& table) {
  // group by |s|, average duplicate |y|
  auto key = [](double v) { return std::round(std::abs(v) * 1e9) / 1e9; };
  std::map<double, std::map<double, std::pair<double, double>>> groups;  // |s| -> |y| -> (sum H, sum err^2)
  std::map<double, std::map<double, int>> counts;
  for (const auto& r : table) {
    auto& cell = groups[key(r.s)][key(r.y)];
    cell.first += r.H;
    cell.second += r.error * r.error;
    counts[key(r.s)][key(r.y)]++;
  }
  std::map<double, KRow> by_s;
  for (auto& [s, ys] : groups) {
    std::vector<double> y, H, E;
    for (auto& [yy, cell] : ys) {
      const int n = counts[s][yy];
      y.push_back(yy);
      H.push_back(cell.first / n);
      E.push_back(std::sqrt(cell.second) / n);
    }
    if (y.front() != 0.0) throw PreconditionError("estimate_K: H table must include y = 0 for every s");
    if (y.size() < 2) throw PreconditionError("estimate_K: need at least two y values per s");
    KRow row;
    row.s = s;
    // last index with H above twice its error, counted contiguously from y = 0
    std::size_t last = 0;
    while (last + 1 < y.size() && H[last + 1] > 2.0 * E[last + 1]) ++last;
    bool closed = false;
    double tail = 0.0, tail_var = 0.0;
    if (last >= 2) {
      std::vector<double> ty, lh;
      for (std::size_t k = last - 2; k <= last; ++k) {
        ty.push_back(y[k]);
        lh.push_back(std::log(H[k]));
      }
      const double rate = -stats::linear_fit(ty, lh).slope;
      double body = 0.0;
      for (std::size_t k = 0; k < last; ++k) body += 0.5 * (y[k + 1] - y[k]) * (H[k] + H[k + 1]);
      // an extrapolated tail larger than the measured part is not a closure
      if (rate > 0.0 && std::isfinite(rate) && H[last] / rate <= body) {
        closed = true;
        tail = H[last] / rate;
        tail_var = (E[last] / rate) * (E[last] / rate);
      }
    }
    const std::size_t end = closed ? last : y.size() - 1;
    double sum = 0.0, var = 0.0;
    for (std::size_t k = 0; k < end; ++k) {
      const double h = y[k + 1] - y[k];
      sum += 0.5 * h * (H[k] + H[k + 1]);
    }
    for (std::size_t k = 0; k <= end; ++k) {
      const double wl = k > 0 ? 0.5 * (y[k] - y[k - 1]) : 0.0;
      const double wr = k < end ? 0.5 * (y[k + 1] - y[k]) : 0.0;
      var += (wl + wr) * (wl + wr) * E[k] * E[k];
    }
    row.K = 2.0 * (sum + tail);
    row.error = 2.0 * std::sqrt(var + tail_var);
    row.open_tail = !closed;
    row.cutoff = y[end];
    by_s[s] = row;
  }
  std::vector<KRow> out;
  std::vector<double> seen;
  for (const auto& r : table) {
    if (std::find(seen.begin(), seen.end(), r.s) != seen.end()) continue;
    seen.push_back(r.s);
    KRow k = by_s[key(r.s)];
    k.s = r.s;
    out.push_back(k);
  }
  std::sort(out.begin(), out.end(), [](const KRow& a, const KRow& b) { return a.s < b.s; });
  return out;
}

Susceptibility susceptibility_A(const std::vector<double>& z, const std::vector<double>& s,
                                const std::vector<KRow>& K_table) {
  if (z.size() != s.size()) throw PreconditionError("susceptibility_A: z and s differ in length");
  if (z.empty()) throw PreconditionError("susceptibility_A: empty input");
  std::vector<KRow> rows;
  for (const auto& r : K_table) {
    KRow c = r;
    c.s = std::abs(r.s);
    rows.push_back(c);
  }
  std::sort(rows.begin(), rows.end(), [](const KRow& a, const KRow& b) { return a.s < b.s; });
  Susceptibility out;
  auto lookup = [&](double lag, double& err) {
    lag = std::abs(lag);
    const auto it = std::lower_bound(rows.begin(), rows.end(), lag - 1e-12,
                                     [](const KRow& r, double v) { return r.s < v; });
    if (it == rows.end()) throw DomainError("susceptibility_A: lag " + format_double(lag) + " beyond the K table");
    const KRow* hit = nullptr;
    double value = 0.0;
    if (std::abs(it->s - lag) <= 1e-12 * std::max(1.0, lag)) {
      hit = &*it;
      value = it->K;
      err = it->error;
    } else {
      if (it == rows.begin()) throw DomainError("susceptibility_A: lag below the K table");
      const KRow& lo = *(it - 1);
      const double f = (lag - lo.s) / (it->s - lo.s);
      value = (1 - f) * lo.K + f * it->K;
      err = (1 - f) * lo.error + f * it->error;
      if (lo.open_tail) out.flags.push_back("open tail at s = " + format_double(lo.s));
      hit = &*it;
    }
    if (hit->open_tail) out.flags.push_back("open tail at s = " + format_double(hit->s));
    return value;
  };
  double var = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    for (std::size_t l = 0; l < z.size(); ++l) {
      double err = 0.0;
      const double k = lookup(s[l] - s[j], err);
      out.value += z[j] * z[l] * k;
      var += (z[j] * z[l] * err) * (z[j] * z[l] * err);
    }
  }
  out.error = std::sqrt(var);
  std::sort(out.flags.begin(), out.flags.end());
  out.flags.erase(std::unique(out.flags.begin(), out.flags.end()), out.flags.end());
  return out;
}

std::vector<CLTRow> clt_diagnostics(const std::vector<XLBatch>& batches, double min_effective) {
  std::vector<CLTRow> out;
  for (const auto& batch : batches) {
    if (batch.samples.empty()) throw PreconditionError("clt_diagnostics: empty batch");
    CLTRow row;
    row.L = batch.samples.front().L;
    int n_cfg = 0;
    for (const auto& x : batch.samples) n_cfg = std::max(n_cfg, x.config_index + 1);
    // per-configuration power sums so that jackknife blocks respect configurations
    std::vector<std::vector<double>> cols(5, std::vector<double>(n_cfg, 0.0));
    for (const auto& x : batch.samples) {
      const double v = x.value;
      cols[0][x.config_index] += 1.0;
      cols[1][x.config_index] += v;
      cols[2][x.config_index] += v * v;
      cols[3][x.config_index] += v * v * v;
      cols[4][x.config_index] += v * v * v * v;
    }
    auto central = [](const std::vector<double>& m) {
      const double n = m[0];
      const double mu = m[1] / n;
      const double m2 = m[2] / n - mu * mu;
      const double m3 = m[3] / n - 3 * mu * m[2] / n + 2 * mu * mu * mu;
      const double m4 = m[4] / n - 4 * mu * m[3] / n + 6 * mu * mu * m[2] / n - 3 * mu * mu * mu * mu;
      return std::array<double, 3>{m2, m3, m4};
    };
    const int nb = static_cast<int>(std::min(50, n_cfg));
    if (nb < 2) throw PreconditionError("clt_diagnostics: need samples from at least two configurations");
    const auto skew = stats::jackknife(cols, nb, [&](const std::vector<double>& m) {
      const auto c = central(m);
      return c[1] / std::pow(c[0], 1.5);
    });
    const auto kurt = stats::jackknife(cols, nb, [&](const std::vector<double>& m) {
      const auto c = central(m);
      return c[2] / (c[0] * c[0]) - 3.0;
    });
    const auto var = stats::jackknife(cols, nb, [&](const std::vector<double>& m) { return central(m)[0]; });
    const auto mu = stats::jackknife(cols, nb, [](const std::vector<double>& m) { return m[1] / m[0]; });
    row.skew = skew.value;
    row.skew_err = skew.error;
    row.kurt = kurt.value;
    row.kurt_err = kurt.error;
    row.variance = var.value;
    row.variance_err = var.error;
    row.n_eff = mu.error > 0.0 ? var.value / (mu.error * mu.error) : static_cast<double>(batch.samples.size());
    row.n_eff = std::min(row.n_eff, static_cast<double>(batch.samples.size()));
    if (row.n_eff < min_effective) {
      row.flags.push_back("effective sample size " + format_double(std::round(row.n_eff)) + " below " +
                          format_double(min_effective));
    }
    for (const auto& f : batch.flags) row.flags.push_back(f);
    out.push_back(row);
  }
  return out;
}

Estimate mean_field_value(const std::vector<SpinConfiguration>& configs, const LatticeSpec& spec,
                          const TestFunction& f) {
  std::vector<double> v;
  for (const auto& c : configs) v.push_back(phi_of_f(c, spec, f));
  const auto b = stats::blocking(v);
  return {b.mean, b.error};
}

}  // namespace isingspec
