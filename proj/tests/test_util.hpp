#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "tts/core.hpp"

namespace testutil {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "tts-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Questions q000, q001, ... whose gold answer is their index.
inline std::vector<tts::Question> questions(int n, std::string tag = "toy") {
  std::vector<tts::Question> out;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "q%03d", i);
    tts::Question q;
    q.id = id;
    q.prompt_text = "What is " + std::to_string(i) + "?";
    q.gold_answer = std::to_string(i);
    q.source_tag = tag;
    out.push_back(q);
  }
  return out;
}

}  // namespace testutil
