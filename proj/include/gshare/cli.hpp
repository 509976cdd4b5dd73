#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gshare {

/// Entry point of the `gshare` command line. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload for tests: args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Human-readable sharing pattern of one word from a checkpoint.
std::string render_sharing(const std::string& checkpoint, const std::string& word);

}  // namespace gshare
