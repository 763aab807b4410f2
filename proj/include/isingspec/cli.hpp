#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace isingspec::cli {

enum ExitCode : int { ok = 0, usage = 2, flagged = 3, domain = 4, io = 5 };

// Entry point of the command-line tool; args excludes the program name.
// Results go to files; `out` gets a short summary, `err` diagnostics.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Runs an already validated configuration (text form).
int run_config(const std::string& config_text, std::ostream& out, std::ostream& err);

}  // namespace isingspec::cli
