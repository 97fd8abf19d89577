#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tts/cli.hpp"
#include "tts/json_io.hpp"

namespace pipeline {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

inline Result invoke(const std::filesystem::path& runs, std::vector<std::string> args) {
  args.insert(args.begin(), {"--runs-dir", runs.string()});
  std::ostringstream out, err;
  Result r;
  r.code = tts::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// simulate -> revise -> aggregate -> every analysis. Returns the analysis
// outputs by file name, or an empty map if a command failed.
inline std::map<std::string, std::string> full_run(const std::filesystem::path& runs, std::int64_t seed) {
  const std::string s = std::to_string(seed);
  std::vector<std::vector<std::string>> commands{
      {"simulate", "--questions", "40", "--k", "4", "--steps", "6", "--seed", s, "--out-run", "det"},
      {"revise", "--run", "det", "--steps", "6"},
      {"aggregate", "--run", "det", "--solutions", "2"},
      {"aggregate", "--run", "det", "--token-budget", "20000", "--method", "mv", "--method", "smv"},
      {"aggregate", "--run", "det", "--method", "last", "--solutions", "4"}};
  for (const auto& name : tts::cli::analysis_names())
    commands.push_back({"analyze", "--run", "det", "--analysis", name});
  for (const auto& c : commands)
    if (invoke(runs, c).code != 0) return {};
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(runs / "det" / "analysis"))
    files[e.path().filename().string()] = tts::read_file(e.path());
  return files;
}

}  // namespace pipeline
