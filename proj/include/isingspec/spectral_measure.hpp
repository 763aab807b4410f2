#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace isingspec {

// Which of the two equivalent spectral measures a MassSpectralMeasure holds.
// rho_tilde enters the two-point function H through K0(m r); rho is the
// reweighting d rho = (pi/m) d rho_tilde whose Laplace transform is K.
enum class MeasureKind { rho_tilde, rho };

struct Atom {
  double mass = 0.0;
  double weight = 0.0;
};

// d mu = amplitude * m^exponent dm on [m_lo, m_hi); m_hi may be +inf.
struct PowerPiece {
  double m_lo = 0.0;
  double m_hi = std::numeric_limits<double>::infinity();
  double amplitude = 0.0;
  double exponent = 0.0;

  bool infinite() const { return m_hi == std::numeric_limits<double>::infinity(); }
};

// Atoms plus power-law density pieces on [m1, inf).
//
// Construction validates the invariants and throws PreconditionError listing
// every violation:
//  - masses, weights and amplitudes strictly positive, m_lo < m_hi;
//  - every atom mass and piece m_lo at least m1, and at least one of them
//    equal to m1;
//  - the associated rho is finite: an unbounded piece needs exponent < -1
//    in rho form, equivalently < 0 in rho_tilde form.
class MassSpectralMeasure {
 public:
  MassSpectralMeasure(std::vector<Atom> atoms, std::vector<PowerPiece> pieces,
                      MeasureKind kind = MeasureKind::rho_tilde,
                      std::optional<double> m1 = std::nullopt);

  static MassSpectralMeasure single_atom(double mass, double weight,
                                         MeasureKind kind = MeasureKind::rho_tilde);

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<PowerPiece>& pieces() const { return pieces_; }
  MeasureKind kind() const { return kind_; }
  double m1() const { return m1_; }

  // Total mass of the measure as stored; +inf if any piece is non-integrable.
  double total_mass() const;

  // Weight of the atom sitting exactly at m1 (0 if none).
  double atom_weight_at_m1() const;

  // Every invariant violation for the given data (empty when valid).
  static std::vector<std::string> violations(const std::vector<Atom>& atoms,
                                             const std::vector<PowerPiece>& pieces,
                                             MeasureKind kind, std::optional<double> m1);

 private:
  std::vector<Atom> atoms_;
  std::vector<PowerPiece> pieces_;
  MeasureKind kind_;
  double m1_;
};

// d rho / d rho_tilde = pi / m.
MassSpectralMeasure rho_from_rho_tilde(const MassSpectralMeasure& measure);
MassSpectralMeasure rho_tilde_from_rho(const MassSpectralMeasure& measure);

// Returns the measure in the requested form, converting if needed.
MassSpectralMeasure as_kind(const MassSpectralMeasure& measure, MeasureKind kind);

std::string to_string(MeasureKind kind);

// Plain-text measure document:
//   # comment
//   kind rho_tilde|rho        (optional, default rho_tilde)
//   m1 <value>
//   atom <m> <w>
//   piece <m_lo> <m_hi|inf> <A> <p>
MassSpectralMeasure parse_measure(const std::string& text);
MassSpectralMeasure read_measure_file(const std::string& path);
std::string serialize_measure(const MassSpectralMeasure& measure);

}  // namespace isingspec
