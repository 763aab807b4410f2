#include "isingspec/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "isingspec/chain.hpp"
#include "isingspec/config.hpp"
#include "isingspec/field.hpp"
#include "isingspec/fitter.hpp"
#include "isingspec/gp.hpp"
#include "isingspec/kernel.hpp"
#include "isingspec/parallel.hpp"
#include "isingspec/text_util.hpp"

namespace isingspec::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path resolve_out(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    if (const char* root = std::getenv("ISINGSPEC_OUT_ROOT"); root && *root) p = fs::path(root) / p;
  }
  return p;
}

void ensure_dir(const fs::path& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw IoError("cannot create directory " + d.string() + ": " + ec.message());
}

int thread_count(const RunConfig& c) {
  return c.get("threads") == "auto" ? default_threads() : static_cast<int>(c.integer("threads"));
}

// The manifest is the normalized configuration plus the code version; its
// hash tags every output so that files can be matched to the run.
struct Manifest {
  std::string text;
  std::string hash;

  explicit Manifest(const RunConfig& c) {
    const std::string body = serialize_config(c);
    // threads and output location do not change results, so they stay out of the hash
    std::string hashed;
    std::istringstream in(body);
    for (std::string line; std::getline(in, line);) {
      if (line.rfind("threads =", 0) != 0 && line.rfind("out =", 0) != 0) hashed += line + "\n";
    }
    hash = fnv1a_hex(std::string("isingspec ") + ISINGSPEC_VERSION + "\n" + hashed);
    text = std::string("# isingspec ") + ISINGSPEC_VERSION + "\n# manifest: " + hash + "\n" + body;
  }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  f << content;
  if (!f) throw IoError("write failed: " + p.string());
}

class Csv {
 public:
  Csv(const fs::path& p, const Manifest& m, const std::string& header) : path_(p) {
    body_ = "# manifest: " + m.hash + "\n" + header + "\n";
  }
  template <class... T>
  void row(const T&... v) {
    std::string line;
    ((line += (line.empty() ? "" : ",") + cell(v)), ...);
    body_ += line + "\n";
  }
  ~Csv() noexcept(false) {
    if (std::uncaught_exceptions() == 0) write_file(path_, body_);
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  fs::path path_;
  std::string body_;
};

std::string join_flags(const Flags& f) {
  std::string s;
  for (const auto& x : f) s += (s.empty() ? "" : "; ") + x;
  return s;
}

MassSpectralMeasure load_measure(const RunConfig& c) {
  if (auto m = c.inline_measure()) return *m;
  return read_measure_file(c.get("measure"));
}

std::vector<double> range_values(const RunConfig& c, const std::string& key) {
  const auto r = c.reals(key);
  std::vector<double> v;
  const long n = std::lround(std::floor((r[2] - r[0]) / r[1] * (1 + 1e-12)));
  for (long k = 0; k <= n; ++k) v.push_back(r[0] + k * r[1]);
  return v;
}

// ---- simulate -------------------------------------------------------------

struct SimOutput {
  LatticeSpec spec;
  ChainStats stats;
  std::vector<SpinConfiguration> snapshots;
};

SimOutput simulate(const RunConfig& c, const fs::path& dir, const Manifest& m, std::ostream& out) {
  ensure_dir(dir);
  const int N = static_cast<int>(c.integer("n"));
  SimOutput res{LatticeSpec::make(N, c.real("h"), c.real("beta_J")), {}, {}};
  ChainOptions opt;
  opt.n_therm = static_cast<int>(c.integer("therm"));
  opt.n_samples = static_cast<int>(c.integer("samples"));
  opt.thin = static_cast<int>(c.integer("thin"));
  opt.dynamics = c.get("dynamics") == "metropolis" ? Dynamics::metropolis : Dynamics::wolff;
  const int max_dist = std::min<int>(static_cast<int>(c.integer("max_dist")), N / 2);
  for (int k = 1; k <= max_dist; ++k) {
    opt.displacements.push_back({k, 0});
    opt.displacements.push_back({0, k});
  }
  const int chains = static_cast<int>(c.integer("chains"));
  const int n_snap = std::min<int>(static_cast<int>(c.integer("snapshots")), opt.n_samples);
  const int stride = n_snap > 0 ? opt.n_samples / n_snap : 0;
  std::vector<ChainStats> parts(chains);
  std::vector<std::vector<SpinConfiguration>> snaps(chains);
  parallel_for(chains, thread_count(c), [&](int k) {
    ChainOptions o = opt;
    o.seed = chain_seed(c.seed(), k, chains);
    if (n_snap > 0) {
      o.on_sample = [&, k](int i, const SpinConfiguration& s) {
        if (i % stride == 0 && static_cast<int>(snaps[k].size()) < n_snap) snaps[k].push_back(s);
      };
    }
    parts[k] = run_chain(res.spec, o);
  });
  for (int k = 0; k < chains; ++k) {
    Csv csv(dir / ("chain_" + std::to_string(k) + ".csv"), m, "sample,magnetization,energy");
    for (std::size_t i = 0; i < parts[k].magnetization.size(); ++i) {
      csv.row(i, parts[k].magnetization[i], parts[k].energy[i]);
    }
  }
  if (n_snap > 0) {
    ensure_dir(dir / "snapshots");
    for (int k = 0; k < chains; ++k) {
      for (std::size_t i = 0; i < snaps[k].size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "c%03d_s%05zu.isnp", k, i);
        write_snapshot(snaps[k][i], (dir / "snapshots" / name).string());
        res.snapshots.push_back(snaps[k][i]);
      }
    }
  }
  res.stats = merge_chains(std::move(parts));
  {
    Csv csv(dir / "two_point.csv", m, "dx,dy,estimate,stderr");
    for (const auto& d : res.stats.displacements) {
      const auto e = two_point(res.stats, d);
      csv.row(d.dx, d.dy, e.value, e.error);
    }
  }
  const auto mag = mean_magnetization(res.stats);
  {
    Csv csv(dir / "summary.csv", m, "quantity,value");
    csv.row("magnetization", mag.value);
    csv.row("magnetization_stderr", mag.error);
    csv.row("tau_int", res.stats.tau_int);
    csv.row("wolff_updates_per_sweep", res.stats.wolff_updates);
    csv.row("samples", res.stats.magnetization.size());
    csv.row("flags", "\"" + join_flags(res.stats.flags) + "\"");
  }
  write_file(dir / "manifest.txt", m.text);
  out << "simulate: N=" << N << " h=" << format_double(c.real("h")) << " <sigma>=" << format_double(mag.value)
      << " +- " << format_double(mag.error) << "\n";
  return res;
}

// ---- estimate -------------------------------------------------------------

std::vector<std::pair<double, double>> auto_grid(const LatticeSpec& spec, int eps, int s_max) {
  std::vector<std::pair<double, double>> g;
  for (int s = eps; s <= s_max; s += 1) {
    for (int y = 0; y <= spec.N / 2; ++y) g.emplace_back(s * spec.a, y * spec.a);
  }
  return g;
}

struct EstimateOutput {
  std::vector<KRow> K;
  Flags flags;
};

EstimateOutput estimate(const RunConfig& c, const std::vector<SpinConfiguration>& configs, const LatticeSpec& spec,
                        const std::vector<std::pair<double, double>>& grid, const fs::path& dir, const Manifest& m) {
  ensure_dir(dir);
  EstimateOutput res;
  const int eps = static_cast<int>(c.integer("eps"));
  const auto H = estimate_H(configs, spec, grid, eps * spec.a);
  {
    Csv csv(dir / "H.csv", m, "s,y,H,stderr");
    for (const auto& r : H) csv.row(r.s, r.y, r.H, r.error);
  }
  res.K = estimate_K(H);
  {
    Csv csv(dir / "K.csv", m, "s,K,stderr,tail_flag");
    for (const auto& r : res.K) {
      csv.row(r.s, r.K, r.error, std::string(r.open_tail ? "open" : "closed"));
      if (r.open_tail) res.flags.push_back("open tail at s = " + format_double(r.s));
    }
  }
  const int P = static_cast<int>(c.integer("clt_positions"));
  const double torus = spec.N * spec.a;
  std::vector<double> s_list, y0_list;
  for (int k = 0; k < P; ++k) {
    s_list.push_back(std::round(k * spec.N / double(P)) * spec.a);
    y0_list.push_back(std::round((k + 0.5) * spec.N / double(P)) * spec.a);
  }
  std::vector<XLBatch> batches;
  for (double Lb : c.reals("clt_L")) {
    const double L = Lb * eps * spec.a;
    if (2.0 * L > torus) {
      res.flags.push_back("clt: L = " + format_double(Lb) + " blocks does not fit on the torus; skipped");
      continue;
    }
    batches.push_back(gaussian_mollifier_pair(configs, spec, L, s_list, c.real("clt_eps") * spec.a, y0_list));
  }
  Csv csv(dir / "clt.csv", m, "L,skew,skew_err,kurt,kurt_err,n_eff");
  for (const auto& r : clt_diagnostics(batches)) {
    csv.row(r.L, r.skew, r.skew_err, r.kurt, r.kurt_err, r.n_eff);
    for (const auto& f : r.flags) res.flags.push_back("clt L = " + format_double(r.L) + ": " + f);
  }
  return res;
}

// ---- fit ------------------------------------------------------------------

std::vector<KSample> read_K_csv(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::string line;
  std::vector<std::string> header;
  std::vector<KSample> out;
  int it = -1, iK = -1, ie = -1;
  while (std::getline(in, line)) {
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto cells = split(body, ',');
    if (header.empty()) {
      header = cells;
      for (std::size_t k = 0; k < header.size(); ++k) {
        const std::string h(trim(header[k]));
        if (h == "s" || h == "t") it = static_cast<int>(k);
        if (h == "K") iK = static_cast<int>(k);
        if (h == "stderr") ie = static_cast<int>(k);
      }
      if (it < 0 || iK < 0) throw IoError(p.string() + ": header needs columns s (or t) and K");
      continue;
    }
    auto num = [&](int k) {
      const auto v = k < static_cast<int>(cells.size()) ? parse_double(cells[k]) : std::nullopt;
      if (!v) throw IoError(p.string() + ": malformed row '" + line + "'");
      return *v;
    };
    out.push_back({num(it), num(iK), ie >= 0 ? num(ie) : 0.0});
  }
  return out;
}

bool fit_and_write(const std::vector<KSample>& samples, int terms, FitWindow window, const RunConfig& c,
                   const Manifest& m, const fs::path& path, std::ostream& out) {
  const auto res = fit_exponentials(samples, terms, window);
  const auto gap = gap_check(res.model);
  const auto e8 = e8_ratios();
  json j;
  j["manifest"] = m.hash;
  json cfg = json::object();
  for (const auto& [k, v] : c.params) {
    if (k != "threads" && k != "out") cfg[k] = v;
  }
  j["config"] = cfg;
  j["window"] = {res.window.t_min, res.window.t_max};
  j["points"] = res.points;
  json terms_j = json::array();
  for (std::size_t k = 0; k < res.model.terms.size(); ++k) {
    terms_j.push_back({{"amplitude", res.model.terms[k].amplitude},
                       {"amplitude_stderr", std::sqrt(res.covariance(2 * k, 2 * k))},
                       {"mass", res.model.terms[k].mass},
                       {"mass_stderr", std::sqrt(res.covariance(2 * k + 1, 2 * k + 1))}});
  }
  j["terms"] = terms_j;
  j["residual_norm"] = res.model.residual_norm;
  json cov = json::array();
  for (Eigen::Index r = 0; r < res.covariance.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index q = 0; q < res.covariance.cols(); ++q) row.push_back(res.covariance(r, q));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  j["diagnostics"] = {{"condition_number", res.condition_number},
                      {"iterations", res.iterations},
                      {"gradient_norm", res.gradient_norm}};
  j["gap_check"] = {{"ok", gap.ok}, {"violations", gap.violations}};
  json ratios = json::object();
  if (res.model.terms.size() >= 2) ratios["m2_over_m1"] = res.model.terms[1].mass / res.model.terms[0].mass;
  if (res.model.terms.size() >= 3) ratios["m3_over_m1"] = res.model.terms[2].mass / res.model.terms[0].mass;
  j["mass_ratios"] = ratios;
  j["e8_reference"] = {{"m2_over_m1", e8.m2_over_m1}, {"m3_over_m1", e8.m3_over_m1}};
  j["flags"] = res.flags;
  ensure_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  write_file(path, j.dump(2) + "\n");
  out << "fit: " << res.model.terms.size() << " term(s), m1 = " << format_double(res.model.terms[0].mass)
      << ", gap check " << (gap.ok ? "ok" : "violated") << "\n";
  return !res.flags.empty();
}

// ---- commands -------------------------------------------------------------

bool cmd_simulate(const RunConfig& c, const Manifest& m, std::ostream& out) {
  const auto r = simulate(c, resolve_out(c.get("out")), m, out);
  return !r.stats.flags.empty();
}

bool cmd_estimate(const RunConfig& c, const Manifest& m, std::ostream& out) {
  const fs::path run_dir(c.get("run"));
  const auto run_cfg = validate_config(read_text(run_dir / "manifest.txt"));
  if (!run_cfg.config) throw IoError("run manifest in " + run_dir.string() + " is not a valid configuration");
  const auto& rc = *run_cfg.config;
  const auto spec = LatticeSpec::make(static_cast<int>(rc.integer("n")), rc.real("h"), rc.real("beta_J"));
  std::vector<fs::path> files;
  if (fs::is_directory(run_dir / "snapshots")) {
    for (const auto& e : fs::directory_iterator(run_dir / "snapshots")) {
      if (e.path().extension() == ".isnp") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.size() < 2) throw IoError(run_dir.string() + ": need at least two spin snapshots (simulate snapshots = k)");
  std::vector<SpinConfiguration> configs;
  for (const auto& f : files) configs.push_back(read_snapshot(f.string()));
  const int eps = static_cast<int>(c.integer("eps"));
  std::vector<std::pair<double, double>> grid;
  if (c.get("grid") == "auto") {
    grid = auto_grid(spec, eps, spec.N / 4);
  } else {
    std::istringstream in(read_text(c.get("grid")));
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
      ++no;
      const auto f = split_ws(strip_comment(line));
      if (f.empty()) continue;
      const auto dx = f.size() == 2 ? parse_int(f[0]) : std::nullopt;
      const auto dy = f.size() == 2 ? parse_int(f[1]) : std::nullopt;
      if (!dx || !dy) throw IoError(c.get("grid") + ":" + std::to_string(no) + ": expected 'dx dy' in lattice units");
      grid.emplace_back(*dx * spec.a, *dy * spec.a);
    }
  }
  const fs::path dir = resolve_out(c.get("out"));
  const auto r = estimate(c, configs, spec, grid, dir, m);
  write_file(dir / "manifest.txt", m.text);
  out << "estimate: " << configs.size() << " configurations, " << r.K.size() << " K rows\n";
  for (const auto& f : r.flags) out << "  flag: " << f << "\n";
  return !r.flags.empty();
}

bool cmd_spectral(const RunConfig& c, const Manifest& m, std::ostream& out) {
  const KernelContext ctx(load_measure(c));
  const fs::path dir = resolve_out(c.get("out"));
  ensure_dir(dir);
  const auto s = range_values(c, "K_grid");
  const auto K = kernel_K_grid(ctx, s);
  {
    Csv csv(dir / "K.csv", m, "s,K");
    for (std::size_t k = 0; k < s.size(); ++k) csv.row(s[k], K[k]);
  }
  if (c.has("H_grid")) {
    std::vector<RadialPoint> pts;
    for (double v : range_values(c, "H_grid")) pts.push_back(RadialPoint::make(v, c.real("H_y")));
    const auto H = kernel_H_grid(ctx, pts);
    Csv csv(dir / "H.csv", m, "s,y,H");
    for (std::size_t k = 0; k < pts.size(); ++k) csv.row(pts[k].s, pts[k].y, H[k]);
  }
  write_file(dir / "manifest.txt", m.text);
  out << "spectral: K(" << format_double(s.front()) << ") = " << format_double(K.front()) << "\n";
  return false;
}

bool cmd_gp(const RunConfig& c, const Manifest& m, std::ostream& out) {
  const auto g = c.reals("grid");
  const GPSpec spec(load_measure(c), g[0], g[1], static_cast<int>(g[2]), c.seed(), static_cast<int>(c.integer("nodes")));
  const auto d = discretize(spec);
  Flags flags;
  if (!d.converged) {
    flags.push_back("discretization did not reach 1e-4 (max deviation " + format_double(d.max_rel_dev) + ")");
  }
  const auto paths = sample_paths(spec, d, static_cast<int>(c.integer("paths")), thread_count(c));
  const fs::path dir = resolve_out(c.get("out"));
  ensure_dir(dir);
  const int keep = std::min<int>(static_cast<int>(c.integer("keep_paths")), static_cast<int>(paths.size()));
  if (c.get("wide") == "true") {
    std::string header = "t";
    for (int p = 0; p < keep; ++p) header += ",X" + std::to_string(p);
    Csv csv(dir / "paths.csv", m, header);
    for (int i = 0; i < spec.n; ++i) {
      std::string line = format_double(spec.t0 + i * spec.dt);
      for (int p = 0; p < keep; ++p) line += "," + format_double(paths[p].values[i]);
      csv.row(line);
    }
  } else {
    Csv csv(dir / "paths.csv", m, "path,t,X");
    for (int p = 0; p < keep; ++p) {
      for (int i = 0; i < spec.n; ++i) csv.row(p, paths[p].t(i), paths[p].values[i]);
    }
  }
  const KernelContext ctx(spec.rho);
  std::vector<int> lags;
  for (int k = 0; k <= std::min<int>(static_cast<int>(c.integer("cov_lags")), spec.n - 1); ++k) lags.push_back(k);
  {
    Csv csv(dir / "cov.csv", m, "lag,K,stderr,K_exact");
    for (const auto& r : empirical_cov(paths, lags)) csv.row(r.lag, r.K, r.error, kernel_K(ctx, r.lag));
  }
  std::vector<int> steps;
  if (c.has("rough")) {
    const auto r = c.reals("rough");
    steps = log_spaced_steps(static_cast<int>(r[0]), static_cast<int>(r[2]), static_cast<int>(r[1]));
  } else {
    steps = log_spaced_steps(1, std::max(2, (spec.n - 1) / 2), 8);
  }
  const auto rough = roughness_exponent(paths, steps, spec.rho);
  std::vector<double> deltas;
  for (int k : steps) deltas.push_back(k * spec.dt);
  {
    Csv csv(dir / "roughness.csv", m, "exponent,stderr,analytic,flags");
    csv.row(rough.exponent, rough.error, analytic_roughness(spec.rho, deltas), "\"" + join_flags(rough.flags) + "\"");
  }
  for (const auto& f : rough.flags) flags.push_back(f);
  write_file(dir / "manifest.txt", m.text);
  out << "gp-sample: " << paths.size() << " paths, " << d.components.size() << " components, roughness "
      << format_double(rough.exponent) << " +- " << format_double(rough.error) << "\n";
  for (const auto& f : flags) out << "  flag: " << f << "\n";
  return !flags.empty();
}

bool cmd_fit(const RunConfig& c, const Manifest& m, std::ostream& out) {
  const auto samples = read_K_csv(c.get("in"));
  const auto w = c.reals("window");
  return fit_and_write(samples, static_cast<int>(c.integer("terms")), {w[0], w[1]}, c, m, resolve_out(c.get("out")),
                       out);
}

bool cmd_asymptotics(const RunConfig& c, const Manifest& m, std::ostream& out) {
  const auto measure = load_measure(c);
  require_upper_gap(measure);
  const KernelContext ctx(measure);
  const auto lim = oz_limits(measure);
  const double alpha = c.real("alpha"), beta = c.real("beta");
  const fs::path dir = resolve_out(c.get("out"));
  ensure_dir(dir);
  const double m1 = ctx.m1();
  {
    Csv csv(dir / "asymptotics.csv", m, "t,oz_H_ratio,oz_K_ratio,h_limit,k_limit,lemma_first,lemma_second,lemma_limit");
    for (double t : c.reals("t")) {
      const auto [l1, l2] = lemma_anc_ratios(m1, t, alpha, beta);
      csv.row(t, oz_H_ratio(ctx, t), oz_K_ratio(ctx, t), lim.h_limit, lim.k_limit, l1, l2,
              std::sqrt(kPi / (2.0 * m1)));
      out << "asymptotics: t=" << format_double(t) << " oz_H_ratio=" << format_double(oz_H_ratio(ctx, t))
          << " (limit " << format_double(lim.h_limit) << ")\n";
    }
  }
  write_file(dir / "manifest.txt", m.text);
  return false;
}

bool cmd_pipeline(const RunConfig& c, const Manifest& m, std::ostream& out) {
  const fs::path dir = resolve_out(c.get("out"));
  ensure_dir(dir);
  write_file(dir / "manifest.txt", m.text);
  const auto sim = simulate(c, dir / "simulate", m, out);
  Flags flags = sim.stats.flags;
  if (sim.snapshots.size() < 2) throw PreconditionError("pipeline: need snapshots >= 2 to estimate H");
  const int eps = static_cast<int>(c.integer("eps"));
  const int s_max = c.has("s_max") ? static_cast<int>(c.integer("s_max")) : sim.spec.N / 4;
  if (s_max < eps + 3) throw PreconditionError("pipeline: s_max must exceed eps by at least 3 lattice spacings");
  const auto est = estimate(c, sim.snapshots, sim.spec, auto_grid(sim.spec, eps, s_max), dir / "estimate", m);
  for (const auto& f : est.flags) flags.push_back(f);
  std::vector<KSample> samples;
  for (const auto& r : est.K) samples.push_back({r.s, r.K, r.error});
  FitWindow w{eps * sim.spec.a, s_max * sim.spec.a};
  if (c.get("window") != "auto") {
    const auto v = c.reals("window");
    w = {v[0], v[1]};
  }
  if (fit_and_write(samples, static_cast<int>(c.integer("terms")), w, c, m, dir / "fit.json", out)) {
    flags.push_back("fit flagged");
  }
  for (const auto& f : flags) out << "  flag: " << f << "\n";
  return !flags.empty();
}

}  // namespace

int run_config(const std::string& text, std::ostream& out, std::ostream& err) {
  const auto v = validate_config(text);
  if (!v.config) {
    for (const auto& e : v.errors) err << "config error: " << e << "\n";
    return usage;
  }
  const RunConfig& c = *v.config;
  const Manifest m(c);
  try {
    bool flagged_run = false;
    if (c.command == "simulate") flagged_run = cmd_simulate(c, m, out);
    else if (c.command == "estimate") flagged_run = cmd_estimate(c, m, out);
    else if (c.command == "spectral") flagged_run = cmd_spectral(c, m, out);
    else if (c.command == "gp-sample") flagged_run = cmd_gp(c, m, out);
    else if (c.command == "fit") flagged_run = cmd_fit(c, m, out);
    else if (c.command == "asymptotics") flagged_run = cmd_asymptotics(c, m, out);
    else if (c.command == "pipeline") flagged_run = cmd_pipeline(c, m, out);
    return flagged_run ? flagged : ok;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return io;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return domain;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral analysis of the near-critical planar Ising magnetization field", "isingspec"};
  app.require_subcommand(1);
  // "-h" would clash with the field option --h
  app.set_help_flag("--help", "print this help and exit");
  app.set_version_flag("--version", std::string(ISINGSPEC_VERSION));
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::string> config_files;
  std::map<std::string, std::vector<std::string>> atoms, pieces;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : config_commands()) {
    static const std::map<std::string, std::string> about = {
        {"simulate", "Monte Carlo chains of the 2D Ising model in a field"},
        {"estimate", "H, K and CLT diagnostics from simulation snapshots"},
        {"spectral", "H and K evaluated from a spectral measure"},
        {"gp-sample", "Gaussian process paths with the kernel K as covariance"},
        {"fit", "sum-of-exponentials fit of K(s) data"},
        {"asymptotics", "large-distance ratios of H and K"},
        {"pipeline", "simulate, estimate and fit in one run"}};
    auto* sub = app.add_subcommand(cmd, about.count(cmd) ? about.at(cmd) : "");
    sub->set_help_flag("--help", "print this help and exit");
    subs[cmd] = sub;
    sub->add_option("--config", config_files[cmd], "configuration file (flags override its keys)");
    for (const auto& k : config_keys(cmd)) {
      std::string help = k.help;
      if (k.required) help += " (required)";
      else if (!k.default_value.empty()) help += " [" + k.default_value + "]";
      sub->add_option("--" + dashed(k.key), values[cmd][k.key], help);
      if (k.key == "measure") {
        sub->add_option("--atom", atoms[cmd], "inline atom 'm w' (repeatable)");
        sub->add_option("--piece", pieces[cmd], "inline density piece 'm_lo m_hi A p' (repeatable)");
      }
    }
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage;
  }
  std::string cmd;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) cmd = name;
  }
  std::string text;
  std::vector<std::string> given;
  for (const auto& k : config_keys(cmd)) {
    if (subs[cmd]->count("--" + dashed(k.key)) > 0) given.push_back(k.key);
  }
  bool has_command = false;
  if (!config_files[cmd].empty()) {
    try {
      std::istringstream in(read_text(config_files[cmd]));
      std::string line;
      while (std::getline(in, line)) {
        const auto body = trim(strip_comment(line));
        const auto eq = body.find('=');
        const std::string key = eq == std::string_view::npos ? "" : std::string(trim(body.substr(0, eq)));
        if (key == "command") has_command = true;
        // overridden keys are blanked so that line numbers still match the file
        text += (std::find(given.begin(), given.end(), key) != given.end() ? "" : line) + "\n";
      }
    } catch (const IoError& e) {
      err << "I/O error: " << e.what() << "\n";
      return io;
    }
  }
  if (!has_command) text = "command = " + cmd + "\n" + text;
  for (const auto& k : given) text += k + " = " + values[cmd][k] + "\n";
  for (const auto& a : atoms[cmd]) text += "atom = " + a + "\n";
  for (const auto& p : pieces[cmd]) text += "piece = " + p + "\n";
  const auto v = validate_config(text);
  if (v.config && v.config->command != cmd) {
    err << "config error: configuration is for '" << v.config->command << "', not '" << cmd << "'\n";
    return usage;
  }
  return run_config(text, out, err);
}

}  // namespace isingspec::cli
