#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tot::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // unexpected I/O or internal failure
inline constexpr int kExitUsage = 2;    // bad flags, config, data or sample id
inline constexpr int kExitDiverged = 3; // training loss left the finite range

// Runs one command. `args` excludes the program name, e.g.
// {"train", "--data", "synth/dataset.json", "--out", "run"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tot::cli
