#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lida::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kCorrupt = 4,
    kNumerical = 5,
};

// Default registry path when --db is not given.
inline constexpr char kDbEnv[] = "LIDA_DB";

// args[0] is the program name. Results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace lida::cli
