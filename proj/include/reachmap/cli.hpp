#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace reachmap {

// Runs one command (args exclude the program name) and returns the exit code:
// 0 success, 1 domain error, 2 usage error. Domain errors are reported on
// `err` as a single line "error:<code>: <message>".
//
// Subcommands: sample, train, eval, plan, heatmap, replay. Every command that
// writes a file also writes <out>.manifest.json with the argv, the resolved
// configuration, the seed and FNV-1a hashes of its inputs and outputs.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a of a file's bytes as 16 lowercase hex digits.
std::string file_fnv1a(const std::string& path);
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace reachmap
