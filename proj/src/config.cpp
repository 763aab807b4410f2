#include "isingspec/config.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "isingspec/common.hpp"
#include "isingspec/lattice.hpp"
#include "isingspec/text_util.hpp"

namespace isingspec {
namespace {

enum class Type { integer, real, choice, text, range, window, reals, integers, grid3, boolean, auto_int, auto_window };

struct Key {
  std::string key;
  Type type = Type::text;
  std::string def;  // default; empty = none
  bool required = false;
  double min = -std::numeric_limits<double>::infinity();
  bool strict = false;  // value must exceed min
  std::vector<std::string> choices;
  std::string help;
};

Key K_int(std::string k, double min, std::string def, std::string help, bool req = false) {
  return {std::move(k), Type::integer, std::move(def), req, min, false, {}, std::move(help)};
}
Key K_real(std::string k, double min, bool strict, std::string def, std::string help, bool req = false) {
  return {std::move(k), Type::real, std::move(def), req, min, strict, {}, std::move(help)};
}
Key K_of(std::string k, Type t, std::string def, std::string help, bool req = false) {
  return {std::move(k), t, std::move(def), req, -std::numeric_limits<double>::infinity(), false, {}, std::move(help)};
}
Key K_choice(std::string k, std::vector<std::string> c, std::string def, std::string help) {
  return {std::move(k), Type::choice, std::move(def), false, 0, false, std::move(c), std::move(help)};
}

std::vector<Key> measure_keys() {
  return {K_of("measure", Type::text, "", "measure file (or inline atom/piece lines)"),
          K_choice("kind", {"rho_tilde", "rho"}, "rho_tilde", "form of inline atom/piece lines"),
          K_real("m1", 0, true, "", "support infimum of the inline measure")};
}

std::vector<Key> simulate_keys() {
  return {K_int("n", 8, "", "lattice side N", true),
          K_real("h", 0, false, "", "continuum field h", true),
          K_real("beta_J", 0, false, format_double(critical_coupling()), "coupling (default critical)"),
          K_int("chains", 1, "1", "independent chains"),
          K_int("samples", 1, "1000", "samples per chain"),
          K_int("thin", 1, "1", "sweeps between samples"),
          K_int("therm", 0, "200", "thermalization sweeps"),
          K_choice("dynamics", {"wolff", "metropolis"}, "wolff", "update dynamics"),
          K_int("max_dist", 1, "16", "largest two-point separation along each axis"),
          K_int("snapshots", 0, "0", "spin snapshots saved per chain")};
}

std::vector<Key> estimate_keys(bool standalone) {
  std::vector<Key> k;
  if (standalone) {
    k.push_back(K_of("run", Type::text, "", "simulate output directory", true));
    k.push_back(K_of("grid", Type::text, "auto", "file of 'dx dy' lattice displacements, or auto"));
  }
  k.push_back(K_int("eps", 1, "4", "block side in lattice spacings"));
  k.push_back(K_of("clt_L", Type::integers, "4,32", "strip half-widths in blocks"));
  k.push_back(K_real("clt_eps", 0, true, "2", "Gaussian mollifier width in lattice spacings"));
  k.push_back(K_int("clt_positions", 1, "8", "time and transverse offsets per configuration"));
  return k;
}

const std::map<std::string, std::vector<Key>>& schemas() {
  static const std::map<std::string, std::vector<Key>> s = [] {
    std::map<std::string, std::vector<Key>> m;
    m["simulate"] = simulate_keys();
    m["estimate"] = estimate_keys(true);
    auto sp = measure_keys();
    sp.push_back(K_of("K_grid", Type::range, "0:0.1:10", "s values start:step:end"));
    sp.push_back(K_of("H_grid", Type::range, "", "s values for H, start:step:end"));
    sp.push_back(K_real("H_y", -std::numeric_limits<double>::infinity(), false, "0", "y for the H grid"));
    m["spectral"] = sp;
    auto gp = measure_keys();
    gp.push_back(K_of("grid", Type::grid3, "", "t0,dt,n", true));
    gp.push_back(K_int("paths", 100, "1000", "number of paths"));
    gp.push_back(K_int("nodes", 8, "64", "quadrature nodes per density piece"));
    gp.push_back(K_int("cov_lags", 0, "20", "largest covariance lag in grid steps"));
    gp.push_back(K_of("rough", Type::range, "", "roughness deltas lo:hi:count in grid steps"));
    gp.push_back(K_of("wide", Type::boolean, "false", "paths.csv one column per path"));
    gp.push_back(K_int("keep_paths", 0, "10", "paths written to paths.csv"));
    m["gp-sample"] = gp;
    m["fit"] = {K_of("in", Type::text, "", "CSV with columns s,K[,stderr]", true),
                K_int("terms", 1, "3", "number of exponentials"),
                K_of("window", Type::window, "", "t_min:t_max", true)};
    auto as = measure_keys();
    as.push_back(K_of("t", Type::reals, "40", "separations"));
    as.push_back(K_real("alpha", 0, true, "0.7", "upper exponent of the lemma window"));
    as.push_back(K_real("beta", 0, true, "0.3", "lower exponent of the lemma window"));
    m["asymptotics"] = as;
    auto pl = simulate_keys();
    for (auto& k : pl) {
      if (k.key == "snapshots") k.def = "100";
    }
    for (auto& k : estimate_keys(false)) pl.push_back(k);
    pl.push_back(K_int("s_max", 1, "", "largest K separation in lattice spacings (default N/4)"));
    pl.push_back(K_int("terms", 1, "1", "exponentials fitted to K"));
    pl.push_back(K_of("window", Type::auto_window, "auto", "fit window t_min:t_max, or auto"));
    m["pipeline"] = pl;
    for (auto& [name, keys] : m) {
      keys.push_back(K_int("seed", 0, "0", "master seed"));
      keys.push_back(K_of("threads", Type::auto_int, "auto", "worker threads"));
      keys.push_back(K_of("out", Type::text, name == "fit" ? "out/fit.json" : "out/" + name, "output location"));
    }
    return m;
  }();
  return s;
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? sep : "") + v[k];
  return s;
}

// Normalizes a value, or returns an error message.
std::optional<std::string> normalize_value(const Key& k, const std::string& raw, std::string& out) {
  auto real_ok = [&](double v) {
    if (!std::isfinite(v)) return false;
    return k.strict ? v > k.min : v >= k.min;
  };
  auto bound = [&] { return std::string(k.strict ? " > " : " >= ") + format_double(k.min); };
  switch (k.type) {
    case Type::integer: {
      const auto v = parse_int(raw);
      if (!v) return "expected an integer, got '" + raw + "'";
      if (*v < k.min) return "must be >= " + format_double(k.min);
      out = std::to_string(*v);
      return std::nullopt;
    }
    case Type::auto_int: {
      if (raw == "auto") {
        out = raw;
        return std::nullopt;
      }
      const auto v = parse_int(raw);
      if (!v || *v < 1) return "expected 'auto' or a positive integer, got '" + raw + "'";
      out = std::to_string(*v);
      return std::nullopt;
    }
    case Type::real: {
      const auto v = parse_double(raw);
      if (!v) return "expected a number, got '" + raw + "'";
      if (!real_ok(*v)) return "must be" + bound();
      out = format_double(*v);
      return std::nullopt;
    }
    case Type::choice:
      if (std::find(k.choices.begin(), k.choices.end(), raw) == k.choices.end()) {
        return "expected one of " + join(k.choices, ", ") + ", got '" + raw + "'";
      }
      out = raw;
      return std::nullopt;
    case Type::text:
      if (raw.empty()) return "empty value";
      out = raw;
      return std::nullopt;
    case Type::boolean:
      if (raw != "true" && raw != "false") return "expected true or false, got '" + raw + "'";
      out = raw;
      return std::nullopt;
    case Type::range: {
      const auto parts = split(raw, ':');
      std::vector<double> v;
      for (const auto& p : parts) {
        const auto d = parse_double(p);
        if (!d) return "expected start:step:end, got '" + raw + "'";
        v.push_back(*d);
      }
      if (v.size() != 3) return "expected start:step:end, got '" + raw + "'";
      if (!(v[1] > 0.0) || v[2] < v[0]) return "needs step > 0 and end >= start";
      out = format_double(v[0]) + ":" + format_double(v[1]) + ":" + format_double(v[2]);
      return std::nullopt;
    }
    case Type::auto_window:
      if (raw == "auto") {
        out = raw;
        return std::nullopt;
      }
      [[fallthrough]];
    case Type::window: {
      const auto parts = split(raw, ':');
      if (parts.size() != 2) return "expected t_min:t_max, got '" + raw + "'";
      const auto a = parse_double(parts[0]), b = parse_double(parts[1]);
      if (!a || !b) return "expected t_min:t_max, got '" + raw + "'";
      if (!(*b > *a)) return "needs t_max > t_min";
      out = format_double(*a) + ":" + format_double(*b);
      return std::nullopt;
    }
    case Type::reals:
    case Type::integers: {
      std::vector<std::string> norm;
      for (const auto& p : split(raw, ',')) {
        if (k.type == Type::integers) {
          const auto v = parse_int(p);
          if (!v || *v < 1) return "expected a list of positive integers, got '" + raw + "'";
          norm.push_back(std::to_string(*v));
        } else {
          const auto v = parse_double(p);
          if (!v || !std::isfinite(*v)) return "expected a list of numbers, got '" + raw + "'";
          norm.push_back(format_double(*v));
        }
      }
      if (norm.empty()) return "empty list";
      out = join(norm, ",");
      return std::nullopt;
    }
    case Type::grid3: {
      const auto parts = split(raw, ',');
      if (parts.size() != 3) return "expected t0,dt,n, got '" + raw + "'";
      const auto t0 = parse_double(parts[0]), dt = parse_double(parts[1]);
      const auto n = parse_int(parts[2]);
      if (!t0 || !dt || !n) return "expected t0,dt,n, got '" + raw + "'";
      if (!(*dt > 0.0) || *n < 2) return "needs dt > 0 and n >= 2";
      out = format_double(*t0) + "," + format_double(*dt) + "," + std::to_string(*n);
      return std::nullopt;
    }
  }
  return "unsupported value";
}

bool takes_measure(const std::string& command) {
  return command == "spectral" || command == "gp-sample" || command == "asymptotics";
}

}  // namespace

const std::vector<std::string>& config_commands() {
  static const std::vector<std::string> c = [] {
    std::vector<std::string> v;
    for (const auto& [name, keys] : schemas()) v.push_back(name);
    return v;
  }();
  return c;
}

std::vector<KeyInfo> config_keys(const std::string& command) {
  std::vector<KeyInfo> out;
  const auto it = schemas().find(command);
  if (it == schemas().end()) throw PreconditionError("unknown command '" + command + "'");
  for (const auto& k : it->second) out.push_back({k.key, k.def, k.required, k.help});
  return out;
}

bool RunConfig::has(const std::string& key) const {
  return std::any_of(params.begin(), params.end(), [&](const auto& p) { return p.first == key; });
}

const std::string& RunConfig::get(const std::string& key) const {
  for (const auto& p : params) {
    if (p.first == key) return p.second;
  }
  throw PreconditionError("config has no value for '" + key + "'");
}

double RunConfig::real(const std::string& key) const { return *parse_double(get(key)); }
std::int64_t RunConfig::integer(const std::string& key) const { return *parse_int(get(key)); }

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  std::string v = get(key);
  std::replace(v.begin(), v.end(), ':', ',');
  for (const auto& p : split(v, ',')) out.push_back(*parse_double(p));
  return out;
}

namespace {

std::optional<Atom> parse_atom(const std::string& v) {
  const auto f = split_ws(v);
  if (f.size() != 2) return std::nullopt;
  const auto m = parse_double(f[0]), w = parse_double(f[1]);
  if (!m || !w) return std::nullopt;
  return Atom{*m, *w};
}

std::optional<PowerPiece> parse_piece(const std::string& v) {
  const auto f = split_ws(v);
  if (f.size() != 4) return std::nullopt;
  const auto lo = parse_double(f[0]), hi = parse_double(f[1]), A = parse_double(f[2]), p = parse_double(f[3]);
  if (!lo || !hi || !A || !p) return std::nullopt;
  return PowerPiece{*lo, *hi, *A, *p};
}

// "piece 1: message" -> "message"
std::string after_tag(const std::string& v) {
  const auto c = v.find(": ");
  return c == std::string::npos ? v : v.substr(c + 2);
}

MeasureKind kind_of(const std::string& s) { return s == "rho" ? MeasureKind::rho : MeasureKind::rho_tilde; }

}  // namespace

std::optional<MassSpectralMeasure> RunConfig::inline_measure() const {
  if (atom_lines.empty() && piece_lines.empty()) return std::nullopt;
  std::vector<Atom> atoms;
  std::vector<PowerPiece> pieces;
  for (const auto& a : atom_lines) atoms.push_back(*parse_atom(a));
  for (const auto& p : piece_lines) pieces.push_back(*parse_piece(p));
  std::optional<double> m1;
  if (has("m1")) m1 = real("m1");
  return MassSpectralMeasure(atoms, pieces, kind_of(get("kind")), m1);
}

ConfigValidation validate_config(const std::string& text) {
  ConfigValidation res;
  auto& errs = res.errors;
  struct Entry {
    std::string key, value;
    int line;
  };
  std::vector<Entry> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string raw = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto body = trim(strip_comment(raw));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      errs.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    if (key.empty()) {
      errs.push_back("line " + std::to_string(line_no) + ": missing key");
      continue;
    }
    entries.push_back({key, value, line_no});
  }
  const Entry* cmd = nullptr;
  for (const auto& e : entries) {
    if (e.key != "command") continue;
    if (cmd) {
      errs.push_back("line " + std::to_string(e.line) + ": duplicate key 'command' (first at line " +
                     std::to_string(cmd->line) + ")");
    } else {
      cmd = &e;
    }
  }
  if (!cmd) {
    errs.insert(errs.begin(), "no command");
    return res;
  }
  const auto schema_it = schemas().find(cmd->value);
  if (schema_it == schemas().end()) {
    errs.push_back("line " + std::to_string(cmd->line) + ": unknown command '" + cmd->value + "' (expected " +
                   join(config_commands(), ", ") + ")");
    return res;
  }
  const auto& schema = schema_it->second;
  RunConfig cfg;
  cfg.command = cmd->value;
  std::map<std::string, const Entry*> seen;
  std::map<std::string, std::string> values;
  std::vector<std::pair<Atom, int>> atoms;
  std::vector<std::pair<PowerPiece, int>> pieces;
  for (const auto& e : entries) {
    const std::string at = "line " + std::to_string(e.line) + ": ";
    if (&e == cmd) continue;
    if (e.key == "atom" || e.key == "piece") {
      if (!takes_measure(cfg.command)) {
        errs.push_back(at + "'" + e.key + "' is not accepted by " + cfg.command);
        continue;
      }
      if (e.key == "atom") {
        if (const auto a = parse_atom(e.value)) {
          atoms.push_back({*a, e.line});
          cfg.atom_lines.push_back(format_double(a->mass) + " " + format_double(a->weight));
        } else {
          errs.push_back(at + "atom needs 'm w', got '" + e.value + "'");
        }
      } else {
        if (const auto p = parse_piece(e.value)) {
          pieces.push_back({*p, e.line});
          cfg.piece_lines.push_back(format_double(p->m_lo) + " " + format_double(p->m_hi) + " " +
                                    format_double(p->amplitude) + " " + format_double(p->exponent));
        } else {
          errs.push_back(at + "piece needs 'm_lo m_hi A p', got '" + e.value + "'");
        }
      }
      continue;
    }
    const auto k = std::find_if(schema.begin(), schema.end(), [&](const Key& s) { return s.key == e.key; });
    if (k == schema.end()) {
      errs.push_back(at + "unknown key '" + e.key + "' for command " + cfg.command);
      continue;
    }
    if (const auto it = seen.find(e.key); it != seen.end()) {
      errs.push_back(at + "duplicate key '" + e.key + "' (first at line " + std::to_string(it->second->line) + ")");
      continue;
    }
    seen[e.key] = &e;
    std::string norm;
    if (const auto err = normalize_value(*k, e.value, norm)) {
      errs.push_back(at + e.key + ": " + *err);
      continue;
    }
    values[e.key] = norm;
  }
  for (const auto& k : schema) {
    if (values.count(k.key)) {
      cfg.params.emplace_back(k.key, values[k.key]);
    } else if (!k.def.empty()) {
      cfg.params.emplace_back(k.key, k.def);
    } else if (k.required && !seen.count(k.key)) {
      errs.push_back("missing required key '" + k.key + "' for command " + cfg.command);
    }
  }
  if (takes_measure(cfg.command)) {
    const bool inline_m = !atoms.empty() || !pieces.empty();
    if (inline_m && seen.count("measure")) {
      errs.push_back("line " + std::to_string(seen["measure"]->line) +
                     ": give either 'measure' or inline atom/piece lines, not both");
    } else if (!inline_m && !seen.count("measure")) {
      errs.push_back("missing spectral measure: set 'measure' or add atom/piece lines");
    }
    if (inline_m) {
      const MeasureKind kind = kind_of(values.count("kind") ? values["kind"] : "rho_tilde");
      for (const auto& [a, line] : atoms) {
        for (const auto& v : MassSpectralMeasure::violations({a}, {}, kind, std::nullopt)) {
          errs.push_back("line " + std::to_string(line) + ": " + after_tag(v));
        }
      }
      for (const auto& [p, line] : pieces) {
        for (const auto& v : MassSpectralMeasure::violations({}, {p}, kind, std::nullopt)) {
          errs.push_back("line " + std::to_string(line) + ": " + after_tag(v));
        }
      }
      if (values.count("m1")) {
        std::vector<Atom> av;
        std::vector<PowerPiece> pv;
        for (const auto& a : atoms) av.push_back(a.first);
        for (const auto& p : pieces) pv.push_back(p.first);
        for (const auto& v : MassSpectralMeasure::violations(av, pv, kind, parse_double(values["m1"]))) {
          if (v.find("m1") != std::string::npos) {
            errs.push_back("line " + std::to_string(seen["m1"]->line) + ": " + v);
          }
        }
      }
    }
  }
  if (cfg.command == "asymptotics" && values.count("alpha") + values.count("beta") > 0) {
    const double a = *parse_double(cfg.get("alpha")), b = *parse_double(cfg.get("beta"));
    if (!(0 < b && b < 0.5 && 0.5 < a && a < 0.75)) {
      errs.push_back("line " + std::to_string((seen.count("alpha") ? seen["alpha"] : seen["beta"])->line) +
                     ": need 0 < beta < 1/2 < alpha < 3/4");
    }
  }
  if (errs.empty()) res.config = std::move(cfg);
  return res;
}

std::string serialize_config(const RunConfig& c) {
  std::string s = "command = " + c.command + "\n";
  for (const auto& [k, v] : c.params) s += k + " = " + v + "\n";
  for (const auto& a : c.atom_lines) s += "atom = " + a + "\n";
  for (const auto& p : c.piece_lines) s += "piece = " + p + "\n";
  return s;
}

std::string normalize_config(const std::string& text) {
  const auto v = validate_config(text);
  if (!v.config) {
    std::string msg = "invalid configuration:";
    for (const auto& e : v.errors) msg += "\n  " + e;
    throw PreconditionError(msg);
  }
  return serialize_config(*v.config);
}

}  // namespace isingspec
