#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tts/core.hpp"
#include "tts/json_io.hpp"

// Run directory layout:
//   <root>/<run_id>/manifest.json
//                   questions.jsonl
//                   records.jsonl      one GenerationRecord per line
//                   chains.jsonl       one revision step per line (step 0 refers
//                                      to the matching record)
//                   failures.jsonl
//                   replay/chains.jsonl  recorded continuations (simulator runs)
//                   analysis/*.csv
namespace tts::store {

namespace fs = std::filesystem;

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FailureRecord {
  std::string question_id;
  std::int64_t sample_index = 0;
  std::int64_t step = 0;
  std::string kind;
  std::string message;
};

struct ChainStepLine {
  std::string question_id;
  std::int64_t sample_index = 0;
  RevisionStep step;
  std::int64_t completion_tokens = 0;
  bool chain_truncated = false;  // the chain stopped at the ceiling after this step
};

struct Manifest {
  std::string run_id;
  std::string source = "live";  // live | replay | simulator
  std::string mode;             // parallel | sequential | both
  RunConfig config;
  std::string dataset_digest;
  bool sealed = false;
  std::int64_t record_count = 0;
  std::int64_t chain_step_count = 0;
  std::string records_digest;
  std::string chains_digest;
  json failure_summary = json::object();
  json metadata = json::object();
};

json manifest_body(const Manifest& m);
Manifest manifest_from_json(const json& j);

struct RecordKey {
  std::string question_id;
  std::int64_t sample_index = 0;
  std::int64_t step = 0;
  auto operator<=>(const RecordKey&) const = default;
};

class RunStore {
 public:
  // Fails if the run already exists.
  static RunStore create(const fs::path& root, const std::string& run_id, Manifest manifest,
                         const std::vector<Question>& questions);
  // Fails if the run does not exist. A torn trailing line left by a crash is
  // truncated away and reported through warnings().
  static RunStore open(const fs::path& root, const std::string& run_id);
  static bool exists(const fs::path& root, const std::string& run_id);

  RunStore(RunStore&&) noexcept;
  RunStore& operator=(RunStore&&) noexcept;
  ~RunStore();

  const fs::path& dir() const;
  Manifest manifest() const;
  void update_manifest(const std::function<void(Manifest&)>& edit);
  const std::vector<std::string>& warnings() const;

  // Thread-safe. Duplicate keys and appends to a sealed run throw.
  void append_record(const GenerationRecord& record);
  void append_chain_step(const ChainStepLine& line);
  void append_failure(const FailureRecord& failure);

  bool has_record(const std::string& question_id, std::int64_t sample_index) const;
  bool has_step(const std::string& question_id, std::int64_t sample_index, std::int64_t step) const;
  std::size_t record_count() const;
  std::size_t step_count() const;
  // fsync after every append (default on). Bulk writers that seal at the end may turn it off.
  void set_sync(bool sync);

  // Rewrites the logs in key order, records digests and the failure summary,
  // and forbids further appends.
  void seal();
  void reopen();
  bool sealed() const;

 private:
  struct Impl;
  explicit RunStore(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

struct LoadedRun {
  Manifest manifest;
  fs::path dir;
  std::vector<Question> questions;
  std::vector<GenerationRecord> records;  // key order
  std::vector<RevisionChain> chains;      // key order
  std::vector<FailureRecord> failures;
  std::vector<std::string> warnings;
};

// Throws StoreError for a missing run or a manifest/digest mismatch.
LoadedRun load_run(const fs::path& root, const std::string& run_id);

// Parses a chains.jsonl-format file into lines (steps in file order).
std::vector<ChainStepLine> read_chain_lines(const fs::path& path, std::vector<std::string>* warnings);
std::vector<GenerationRecord> read_record_lines(const fs::path& path,
                                                std::vector<std::string>* warnings);

fs::path analysis_dir(const fs::path& run_dir);

// Advisory lock file guarding a run directory against concurrent CLI use.
class RunLock {
 public:
  explicit RunLock(const fs::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

std::string file_digest(const fs::path& path);

}  // namespace tts::store
