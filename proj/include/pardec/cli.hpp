#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pardec {

// Entry point of the pardec tool. Subcommands: make-corpus, collect,
// train-filter, decode, bench, analyze. Returns the process exit code; normal
// output goes to out, diagnostics to err.
int run_cli(int argc, const char * const * argv, std::ostream & out, std::ostream & err);

// Convenience overload; args excludes the program name.
int run_cli(const std::vector<std::string> & args, std::ostream & out, std::ostream & err);

}  // namespace pardec
