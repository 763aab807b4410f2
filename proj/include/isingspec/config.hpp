#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isingspec/spectral_measure.hpp"

namespace isingspec {

// Plain-text run configuration: one `key = value` per line, `#` comments.
// `command` selects the schema; `atom` and `piece` may repeat and describe an
// inline spectral measure. Every other key appears at most once.
struct RunConfig {
  std::string command;
  // every schema key in schema order, defaults filled in, values normalized
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<std::string> atom_lines;
  std::vector<std::string> piece_lines;

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // throws PreconditionError if absent
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;  // comma or colon separated
  std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("seed")); }
  // Inline measure, if the config has atom or piece lines.
  std::optional<MassSpectralMeasure> inline_measure() const;
};

struct ConfigValidation {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;  // every problem found, each anchored to its line
};

ConfigValidation validate_config(const std::string& text);

// Canonical text: command first, schema order, defaults filled in, numbers in
// shortest round-trip form, no comments. serialize(parse(x)) == normalize(x).
std::string serialize_config(const RunConfig& config);
std::string normalize_config(const std::string& text);  // throws PreconditionError on invalid text

const std::vector<std::string>& config_commands();

struct KeyInfo {
  std::string key;
  std::string default_value;  // empty when required or optional without default
  bool required = false;
  std::string help;
};
// Keys accepted by a command, excluding the repeatable atom/piece lines.
std::vector<KeyInfo> config_keys(const std::string& command);

}  // namespace isingspec
