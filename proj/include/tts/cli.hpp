#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tts::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

// Names accepted by `analyze --analysis`.
const std::vector<std::string>& analysis_names();

}  // namespace tts::cli
