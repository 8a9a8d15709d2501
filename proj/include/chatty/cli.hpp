#pragma once

#include <string>
#include <vector>

namespace chatty {

// Entry point for the command-line tool. `args` holds the arguments after the
// program name, in order. Returns the process exit code:
//   0  success (or all verification checks passed)
//   1  verification failure or an unexpected internal error
//   2  bad command line, unreadable/invalid config, or inconsistent inputs
//   3  training aborted on a non-finite loss term
int run_cli(std::vector<std::string> args);

}  // namespace chatty
