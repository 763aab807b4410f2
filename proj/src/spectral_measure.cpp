#include "isingspec/spectral_measure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "isingspec/common.hpp"
#include "isingspec/text_util.hpp"

namespace isingspec {

std::string to_string(MeasureKind kind) {
  return kind == MeasureKind::rho ? "rho" : "rho_tilde";
}

std::vector<std::string> MassSpectralMeasure::violations(const std::vector<Atom>& atoms,
                                                         const std::vector<PowerPiece>& pieces,
                                                         MeasureKind kind,
                                                         std::optional<double> m1) {
  std::vector<std::string> errs;
  if (atoms.empty() && pieces.empty()) errs.emplace_back("measure has no atoms and no pieces");
  double inf_support = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto& a = atoms[i];
    const std::string tag = "atom " + std::to_string(i + 1) + ": ";
    if (!(a.mass > 0.0) || !std::isfinite(a.mass)) errs.push_back(tag + "mass must be positive");
    if (!(a.weight > 0.0) || !std::isfinite(a.weight)) errs.push_back(tag + "weight must be positive");
    inf_support = std::min(inf_support, a.mass);
  }
  const double tail_limit = kind == MeasureKind::rho ? -1.0 : 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto& p = pieces[i];
    const std::string tag = "piece " + std::to_string(i + 1) + ": ";
    if (!(p.m_lo > 0.0) || !std::isfinite(p.m_lo)) errs.push_back(tag + "m_lo must be positive");
    if (!(p.m_hi > p.m_lo)) errs.push_back(tag + "m_hi must exceed m_lo");
    if (!(p.amplitude > 0.0) || !std::isfinite(p.amplitude))
      errs.push_back(tag + "amplitude must be positive");
    if (!std::isfinite(p.exponent)) errs.push_back(tag + "exponent must be finite");
    if (p.infinite() && !(p.exponent < tail_limit)) {
      if (kind == MeasureKind::rho) {
        errs.push_back(tag + "unbounded piece needs p < -1 so that rho is finite");
      } else {
        errs.push_back(tag + "unbounded piece needs p < 0 (p - 1 < -1 in rho form) so that rho is finite");
      }
    }
    inf_support = std::min(inf_support, p.m_lo);
  }
  if (m1) {
    if (!(*m1 > 0.0)) errs.emplace_back("m1 must be positive");
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (atoms[i].mass < *m1) errs.push_back("atom " + std::to_string(i + 1) + ": mass below m1");
    }
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (pieces[i].m_lo < *m1) errs.push_back("piece " + std::to_string(i + 1) + ": m_lo below m1");
    }
    if (std::isfinite(inf_support) && inf_support > *m1) {
      errs.emplace_back("no atom or piece touches m1 (support infimum must be attained)");
    }
  }
  return errs;
}

MassSpectralMeasure::MassSpectralMeasure(std::vector<Atom> atoms, std::vector<PowerPiece> pieces,
                                         MeasureKind kind, std::optional<double> m1)
    : atoms_(std::move(atoms)), pieces_(std::move(pieces)), kind_(kind), m1_(0.0) {
  auto errs = violations(atoms_, pieces_, kind_, m1);
  if (!errs.empty()) {
    std::string msg = "invalid mass spectral measure:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw PreconditionError(msg);
  }
  std::sort(atoms_.begin(), atoms_.end(),
            [](const Atom& a, const Atom& b) { return a.mass < b.mass; });
  std::sort(pieces_.begin(), pieces_.end(),
            [](const PowerPiece& a, const PowerPiece& b) { return a.m_lo < b.m_lo; });
  double inf_support = std::numeric_limits<double>::infinity();
  for (const auto& a : atoms_) inf_support = std::min(inf_support, a.mass);
  for (const auto& p : pieces_) inf_support = std::min(inf_support, p.m_lo);
  m1_ = m1.value_or(inf_support);
}

MassSpectralMeasure MassSpectralMeasure::single_atom(double mass, double weight, MeasureKind kind) {
  return MassSpectralMeasure({{mass, weight}}, {}, kind);
}

double MassSpectralMeasure::total_mass() const {
  double total = 0.0;
  for (const auto& a : atoms_) total += a.weight;
  for (const auto& p : pieces_) {
    const double q = p.exponent + 1.0;
    if (p.infinite()) {
      if (q >= 0.0) return std::numeric_limits<double>::infinity();
      total += p.amplitude * -std::pow(p.m_lo, q) / q;
    } else if (std::abs(q) < 1e-15) {
      total += p.amplitude * std::log(p.m_hi / p.m_lo);
    } else {
      total += p.amplitude * (std::pow(p.m_hi, q) - std::pow(p.m_lo, q)) / q;
    }
  }
  return total;
}

double MassSpectralMeasure::atom_weight_at_m1() const {
  double w = 0.0;
  for (const auto& a : atoms_) {
    if (a.mass == m1_) w += a.weight;
  }
  return w;
}

MassSpectralMeasure rho_from_rho_tilde(const MassSpectralMeasure& measure) {
  if (measure.kind() != MeasureKind::rho_tilde) {
    throw PreconditionError("rho_from_rho_tilde: measure is already in rho form");
  }
  std::vector<Atom> atoms;
  for (const auto& a : measure.atoms()) atoms.push_back({a.mass, a.weight * kPi / a.mass});
  std::vector<PowerPiece> pieces;
  for (const auto& p : measure.pieces()) {
    pieces.push_back({p.m_lo, p.m_hi, p.amplitude * kPi, p.exponent - 1.0});
  }
  return MassSpectralMeasure(std::move(atoms), std::move(pieces), MeasureKind::rho, measure.m1());
}

MassSpectralMeasure rho_tilde_from_rho(const MassSpectralMeasure& measure) {
  if (measure.kind() != MeasureKind::rho) {
    throw PreconditionError("rho_tilde_from_rho: measure is already in rho_tilde form");
  }
  std::vector<Atom> atoms;
  for (const auto& a : measure.atoms()) atoms.push_back({a.mass, a.weight * a.mass / kPi});
  std::vector<PowerPiece> pieces;
  for (const auto& p : measure.pieces()) {
    pieces.push_back({p.m_lo, p.m_hi, p.amplitude / kPi, p.exponent + 1.0});
  }
  return MassSpectralMeasure(std::move(atoms), std::move(pieces), MeasureKind::rho_tilde,
                             measure.m1());
}

MassSpectralMeasure as_kind(const MassSpectralMeasure& measure, MeasureKind kind) {
  if (measure.kind() == kind) return measure;
  return kind == MeasureKind::rho ? rho_from_rho_tilde(measure) : rho_tilde_from_rho(measure);
}

MassSpectralMeasure parse_measure(const std::string& text) {
  std::vector<Atom> atoms;
  std::vector<PowerPiece> pieces;
  std::optional<double> m1;
  MeasureKind kind = MeasureKind::rho_tilde;
  std::vector<std::string> errs;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tokens = split_ws(strip_comment(line));
    if (tokens.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    const auto& key = tokens[0];
    auto num = [&](std::size_t i) -> std::optional<double> {
      auto v = parse_double(tokens[i]);
      if (!v) errs.push_back(where + "cannot parse number '" + tokens[i] + "'");
      return v;
    };
    if (key == "kind") {
      if (tokens.size() != 2 || (tokens[1] != "rho" && tokens[1] != "rho_tilde")) {
        errs.push_back(where + "expected 'kind rho' or 'kind rho_tilde'");
      } else {
        kind = tokens[1] == "rho" ? MeasureKind::rho : MeasureKind::rho_tilde;
      }
    } else if (key == "m1") {
      if (tokens.size() != 2) {
        errs.push_back(where + "expected 'm1 <value>'");
      } else if (auto v = num(1)) {
        m1 = *v;
      }
    } else if (key == "atom") {
      if (tokens.size() != 3) {
        errs.push_back(where + "expected 'atom <m> <w>'");
        continue;
      }
      auto m = num(1);
      auto w = num(2);
      if (m && w) atoms.push_back({*m, *w});
    } else if (key == "piece") {
      if (tokens.size() != 5) {
        errs.push_back(where + "expected 'piece <m_lo> <m_hi> <A> <p>'");
        continue;
      }
      auto lo = num(1);
      auto hi = num(2);
      auto amp = num(3);
      auto p = num(4);
      if (lo && hi && amp && p) pieces.push_back({*lo, *hi, *amp, *p});
    } else {
      errs.push_back(where + "unknown record '" + key + "'");
    }
  }
  if (errs.empty()) {
    for (auto& e : MassSpectralMeasure::violations(atoms, pieces, kind, m1)) errs.push_back(e);
  }
  if (!errs.empty()) {
    std::string msg = "invalid measure document:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw PreconditionError(msg);
  }
  return MassSpectralMeasure(std::move(atoms), std::move(pieces), kind, m1);
}

MassSpectralMeasure read_measure_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open measure file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_measure(buf.str());
}

std::string serialize_measure(const MassSpectralMeasure& measure) {
  std::ostringstream out;
  out << "kind " << to_string(measure.kind()) << "\n";
  out << "m1 " << format_double(measure.m1()) << "\n";
  for (const auto& a : measure.atoms()) {
    out << "atom " << format_double(a.mass) << " " << format_double(a.weight) << "\n";
  }
  for (const auto& p : measure.pieces()) {
    out << "piece " << format_double(p.m_lo) << " " << format_double(p.m_hi) << " "
        << format_double(p.amplitude) << " " << format_double(p.exponent) << "\n";
  }
  return out.str();
}

}  // namespace isingspec
