#include "tts/store.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>

namespace tts::store {

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kQuestions = "questions.jsonl";
constexpr const char* kRecords = "records.jsonl";
constexpr const char* kChains = "chains.jsonl";
constexpr const char* kFailures = "failures.jsonl";

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Splits a JSONL file into complete lines. A trailing fragment without a
// newline, or an unparsable final line, is reported as torn.
struct JsonlScan {
  std::vector<std::string> lines;
  std::size_t valid_bytes = 0;
  bool torn = false;
};

JsonlScan scan_jsonl(const fs::path& path) {
  JsonlScan scan;
  if (!fs::exists(path)) return scan;
  const std::string content = read_file(path);
  std::size_t start = 0;
  while (start < content.size()) {
    const auto nl = content.find('\n', start);
    if (nl == std::string::npos) {
      scan.torn = true;
      break;
    }
    std::string line = content.substr(start, nl - start);
    if (!line.empty()) scan.lines.push_back(std::move(line));
    start = nl + 1;
    scan.valid_bytes = start;
  }
  if (!scan.lines.empty()) {
    // Only the last complete line may be a torn write; earlier damage is fatal.
    if (!json::accept(scan.lines.back())) {
      const std::size_t drop = scan.lines.back().size() + 1;
      scan.lines.pop_back();
      scan.valid_bytes -= drop;
      scan.torn = true;
    }
  }
  return scan;
}

json parse_line(const std::string& line, const fs::path& path) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw StoreError("corrupt line in " + path.string() + ": " + e.what());
  }
}

RecordKey record_key(const json& j) {
  return {j.at("question_id").get<std::string>(), j.at("sample_index").get<std::int64_t>(),
          j.value("step", std::int64_t{0})};
}

std::string manifest_checksum(const json& body) { return hex64(fnv1a64(body.dump())); }

void write_manifest(const fs::path& dir, const Manifest& m) {
  json body = manifest_body(m);
  json out = body;
  out["checksum"] = manifest_checksum(body);
  write_file_atomic(dir / kManifest, out.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& dir) {
  const auto path = dir / kManifest;
  if (!fs::exists(path)) throw StoreError("missing manifest: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw StoreError("unreadable manifest " + path.string() + ": " + e.what());
  }
  if (!j.contains("checksum")) throw StoreError("manifest has no checksum: " + path.string());
  const auto stored = j["checksum"].get<std::string>();
  j.erase("checksum");
  if (manifest_checksum(j) != stored) throw StoreError("checksum mismatch on manifest " + path.string());
  return manifest_from_json(j);
}

json failure_to_json(const FailureRecord& f) {
  return json{{"question_id", f.question_id}, {"sample_index", f.sample_index}, {"step", f.step},
              {"kind", f.kind},               {"message", f.message}};
}

FailureRecord failure_from_json(const json& j) {
  return {j.at("question_id").get<std::string>(), j.at("sample_index").get<std::int64_t>(),
          j.at("step").get<std::int64_t>(), j.at("kind").get<std::string>(),
          j.at("message").get<std::string>()};
}

ChainStepLine chain_line_from_json(const json& j) {
  ChainStepLine line;
  line.question_id = j.at("question_id").get<std::string>();
  line.sample_index = j.at("sample_index").get<std::int64_t>();
  line.step.step_index = j.at("step").get<std::int64_t>();
  line.step.appended_text = j.value("appended_text", std::string());
  line.step.chosen_prompt = j.value("chosen_prompt", std::string());
  line.step.prompt_fallback = j.value("prompt_fallback", false);
  line.step.cumulative_token_count = j.at("cumulative_token_count").get<std::int64_t>();
  if (j.contains("answer_after_step") && !j["answer_after_step"].is_null())
    line.step.answer_after_step = j["answer_after_step"].get<NormalizedAnswer>();
  line.step.grade_after_step = grade_from_string(j.at("grade_after_step").get<std::string>());
  line.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  line.chain_truncated = j.value("chain_truncated", false);
  return line;
}

json chain_line_to_json(const ChainStepLine& line) {
  json j = step_to_json(line.question_id, line.sample_index, line.step, line.completion_tokens);
  if (line.chain_truncated) j["chain_truncated"] = true;
  return j;
}

// Rewrites a JSONL log with its lines sorted by key.
void canonicalize(const fs::path& path) {
  if (!fs::exists(path)) {
    write_file_atomic(path, "");
    return;
  }
  const auto scan = scan_jsonl(path);
  std::vector<std::pair<RecordKey, std::string>> keyed;
  keyed.reserve(scan.lines.size());
  for (const auto& line : scan.lines) keyed.emplace_back(record_key(parse_line(line, path)), line);
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string content;
  for (const auto& [key, line] : keyed) content += line + "\n";
  write_file_atomic(path, content);
}

}  // namespace

json manifest_body(const Manifest& m) {
  return json{{"run_id", m.run_id},
              {"source", m.source},
              {"mode", m.mode},
              {"config", m.config},
              {"dataset_digest", m.dataset_digest},
              {"sealed", m.sealed},
              {"record_count", m.record_count},
              {"chain_step_count", m.chain_step_count},
              {"records_digest", m.records_digest},
              {"chains_digest", m.chains_digest},
              {"failure_summary", m.failure_summary},
              {"metadata", m.metadata}};
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.source = j.value("source", std::string("live"));
  m.mode = j.value("mode", std::string());
  m.config = j.at("config").get<RunConfig>();
  m.dataset_digest = j.value("dataset_digest", std::string());
  m.sealed = j.value("sealed", false);
  m.record_count = j.value("record_count", std::int64_t{0});
  m.chain_step_count = j.value("chain_step_count", std::int64_t{0});
  m.records_digest = j.value("records_digest", std::string());
  m.chains_digest = j.value("chains_digest", std::string());
  m.failure_summary = j.value("failure_summary", json::object());
  m.metadata = j.value("metadata", json::object());
  return m;
}

std::string file_digest(const fs::path& path) {
  return fs::exists(path) ? hex64(fnv1a64(read_file(path))) : hex64(fnv1a64(""));
}

fs::path analysis_dir(const fs::path& run_dir) { return run_dir / "analysis"; }

struct RunStore::Impl {
  fs::path dir;
  mutable std::mutex mu;
  Manifest manifest;
  std::set<RecordKey> record_keys;
  std::set<RecordKey> step_keys;
  std::vector<std::string> warnings;
  FilePtr records;
  FilePtr chains;
  FilePtr failures;
  bool sync = true;

  void open_logs() {
    records.reset(std::fopen((dir / kRecords).c_str(), "ab"));
    chains.reset(std::fopen((dir / kChains).c_str(), "ab"));
    failures.reset(std::fopen((dir / kFailures).c_str(), "ab"));
    if (!records || !chains || !failures) throw StoreError("cannot open logs in " + dir.string());
  }

  void close_logs() {
    records.reset();
    chains.reset();
    failures.reset();
  }

  void write_line(std::FILE* f, const std::string& line) {
    const std::string out = line + "\n";
    if (std::fwrite(out.data(), 1, out.size(), f) != out.size() || std::fflush(f) != 0)
      throw StoreError("append failed in " + dir.string());
    if (sync) ::fsync(::fileno(f));
  }

  void require_open() const {
    if (manifest.sealed) throw StoreError("run " + manifest.run_id + " is sealed");
  }
};

RunStore::RunStore(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
RunStore::RunStore(RunStore&&) noexcept = default;
RunStore& RunStore::operator=(RunStore&&) noexcept = default;
RunStore::~RunStore() = default;

bool RunStore::exists(const fs::path& root, const std::string& run_id) {
  return fs::exists(root / run_id / kManifest);
}

RunStore RunStore::create(const fs::path& root, const std::string& run_id, Manifest manifest,
                          const std::vector<Question>& questions) {
  if (run_id.empty() || run_id.find('/') != std::string::npos)
    throw StoreError("invalid run id: '" + run_id + "'");
  const auto dir = root / run_id;
  if (exists(root, run_id)) throw StoreError("run already exists: " + run_id);
  fs::create_directories(dir);
  write_dataset(dir / kQuestions, questions);
  manifest.run_id = run_id;
  manifest.sealed = false;
  auto impl = std::make_unique<Impl>();
  impl->dir = dir;
  impl->manifest = std::move(manifest);
  write_manifest(dir, impl->manifest);
  impl->open_logs();
  return RunStore(std::move(impl));
}

RunStore RunStore::open(const fs::path& root, const std::string& run_id) {
  const auto dir = root / run_id;
  if (!exists(root, run_id)) throw StoreError("no such run: " + run_id);
  auto impl = std::make_unique<Impl>();
  impl->dir = dir;
  impl->manifest = read_manifest(dir);
  for (const char* name : {kRecords, kChains, kFailures}) {
    const auto path = dir / name;
    const auto scan = scan_jsonl(path);
    if (scan.torn) {
      impl->warnings.push_back("truncated torn trailing line in " + path.string());
      if (!impl->manifest.sealed) fs::resize_file(path, scan.valid_bytes);
    }
    if (name == std::string(kFailures)) continue;
    auto& keys = name == std::string(kRecords) ? impl->record_keys : impl->step_keys;
    for (const auto& line : scan.lines) keys.insert(record_key(parse_line(line, path)));
  }
  if (!impl->manifest.sealed) impl->open_logs();
  return RunStore(std::move(impl));
}

const fs::path& RunStore::dir() const { return impl_->dir; }

Manifest RunStore::manifest() const {
  std::lock_guard lock(impl_->mu);
  return impl_->manifest;
}

void RunStore::update_manifest(const std::function<void(Manifest&)>& edit) {
  std::lock_guard lock(impl_->mu);
  edit(impl_->manifest);
  write_manifest(impl_->dir, impl_->manifest);
}

const std::vector<std::string>& RunStore::warnings() const { return impl_->warnings; }

void RunStore::append_record(const GenerationRecord& record) {
  record.check_invariants();
  std::lock_guard lock(impl_->mu);
  impl_->require_open();
  RecordKey key{record.question_id, record.sample_index, 0};
  if (impl_->record_keys.contains(key))
    throw StoreError("duplicate key " + record.question_id + "#" +
                     std::to_string(record.sample_index));
  impl_->write_line(impl_->records.get(), json(record).dump());
  impl_->record_keys.insert(std::move(key));
}

void RunStore::append_chain_step(const ChainStepLine& line) {
  std::lock_guard lock(impl_->mu);
  impl_->require_open();
  RecordKey key{line.question_id, line.sample_index, line.step.step_index};
  if (impl_->step_keys.contains(key))
    throw StoreError("duplicate key " + line.question_id + "#" + std::to_string(line.sample_index) +
                     "@" + std::to_string(line.step.step_index));
  impl_->write_line(impl_->chains.get(), chain_line_to_json(line).dump());
  impl_->step_keys.insert(std::move(key));
}

void RunStore::append_failure(const FailureRecord& failure) {
  std::lock_guard lock(impl_->mu);
  impl_->require_open();
  impl_->write_line(impl_->failures.get(), failure_to_json(failure).dump());
}

bool RunStore::has_record(const std::string& question_id, std::int64_t sample_index) const {
  std::lock_guard lock(impl_->mu);
  return impl_->record_keys.contains(RecordKey{question_id, sample_index, 0});
}

bool RunStore::has_step(const std::string& question_id, std::int64_t sample_index,
                        std::int64_t step) const {
  std::lock_guard lock(impl_->mu);
  return impl_->step_keys.contains(RecordKey{question_id, sample_index, step});
}

std::size_t RunStore::record_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->record_keys.size();
}

std::size_t RunStore::step_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->step_keys.size();
}

void RunStore::set_sync(bool sync) {
  std::lock_guard lock(impl_->mu);
  impl_->sync = sync;
}

void RunStore::seal() {
  std::lock_guard lock(impl_->mu);
  if (impl_->manifest.sealed) return;
  impl_->close_logs();
  const auto& dir = impl_->dir;
  for (const char* name : {kRecords, kChains, kFailures}) canonicalize(dir / name);

  // Failures whose key later succeeded are resolved.
  json unresolved = json::array();
  std::map<std::string, std::int64_t> by_kind;
  std::set<std::string> seen;
  for (const auto& line : scan_jsonl(dir / kFailures).lines) {
    const auto f = failure_from_json(parse_line(line, dir / kFailures));
    const RecordKey key{f.question_id, f.sample_index, f.step};
    const bool resolved = f.step == 0 ? impl_->record_keys.contains(key) : impl_->step_keys.contains(key);
    const std::string id = f.question_id + "#" + std::to_string(f.sample_index) + "@" + std::to_string(f.step);
    if (resolved || !seen.insert(id).second) continue;
    ++by_kind[f.kind];
    unresolved.push_back(failure_to_json(f));
  }

  auto& m = impl_->manifest;
  m.sealed = true;
  m.record_count = static_cast<std::int64_t>(impl_->record_keys.size());
  m.chain_step_count = static_cast<std::int64_t>(impl_->step_keys.size());
  m.records_digest = file_digest(dir / kRecords);
  m.chains_digest = file_digest(dir / kChains);
  m.failure_summary = json{{"unresolved", static_cast<std::int64_t>(unresolved.size())},
                           {"by_kind", by_kind},
                           {"failures", unresolved}};
  write_manifest(dir, m);
}

void RunStore::reopen() {
  std::lock_guard lock(impl_->mu);
  if (!impl_->manifest.sealed) return;
  impl_->manifest.sealed = false;
  write_manifest(impl_->dir, impl_->manifest);
  impl_->open_logs();
}

bool RunStore::sealed() const {
  std::lock_guard lock(impl_->mu);
  return impl_->manifest.sealed;
}

std::vector<ChainStepLine> read_chain_lines(const fs::path& path, std::vector<std::string>* warnings) {
  const auto scan = scan_jsonl(path);
  if (scan.torn && warnings) warnings->push_back("ignored torn trailing line in " + path.string());
  std::vector<ChainStepLine> out;
  out.reserve(scan.lines.size());
  for (const auto& line : scan.lines) out.push_back(chain_line_from_json(parse_line(line, path)));
  return out;
}

std::vector<GenerationRecord> read_record_lines(const fs::path& path,
                                                std::vector<std::string>* warnings) {
  const auto scan = scan_jsonl(path);
  if (scan.torn && warnings) warnings->push_back("ignored torn trailing line in " + path.string());
  std::vector<GenerationRecord> out;
  out.reserve(scan.lines.size());
  for (const auto& line : scan.lines) {
    try {
      out.push_back(parse_line(line, path).get<GenerationRecord>());
    } catch (const json::exception& e) {
      throw StoreError("malformed record in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

LoadedRun load_run(const fs::path& root, const std::string& run_id) {
  const auto dir = root / run_id;
  if (!RunStore::exists(root, run_id)) throw StoreError("no such run: " + run_id);
  LoadedRun run;
  run.dir = dir;
  run.manifest = read_manifest(dir);
  if (run.manifest.sealed) {
    if (file_digest(dir / kRecords) != run.manifest.records_digest ||
        file_digest(dir / kChains) != run.manifest.chains_digest)
      throw StoreError("checksum mismatch between manifest and logs of run " + run_id);
  }
  run.questions = load_dataset(dir / kQuestions);
  run.records = read_record_lines(dir / kRecords, &run.warnings);
  std::stable_sort(run.records.begin(), run.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.question_id, a.sample_index) < std::tie(b.question_id, b.sample_index);
  });

  std::map<std::pair<std::string, std::int64_t>, const GenerationRecord*> by_key;
  for (const auto& r : run.records) by_key[{r.question_id, r.sample_index}] = &r;

  std::map<std::pair<std::string, std::int64_t>, std::vector<ChainStepLine>> grouped;
  for (auto& line : read_chain_lines(dir / kChains, &run.warnings))
    grouped[{line.question_id, line.sample_index}].push_back(std::move(line));
  for (auto& [key, lines] : grouped) {
    std::sort(lines.begin(), lines.end(),
              [](const auto& a, const auto& b) { return a.step.step_index < b.step.step_index; });
    RevisionChain chain;
    chain.question_id = key.first;
    chain.sample_index = key.second;
    for (auto& line : lines) {
      if (line.step.step_index == 0) {
        const auto it = by_key.find(key);
        if (it == by_key.end())
          throw StoreError("chain " + key.first + "#" + std::to_string(key.second) +
                           " has no initial record");
        line.step.appended_text = it->second->text;
      }
      chain.truncated = chain.truncated || line.chain_truncated;
      chain.steps.push_back(std::move(line.step));
    }
    // A crash mid-chain leaves a valid prefix; keep only contiguous steps.
    std::size_t contiguous = 0;
    while (contiguous < chain.steps.size() &&
           chain.steps[contiguous].step_index == static_cast<std::int64_t>(contiguous))
      ++contiguous;
    chain.steps.resize(contiguous);
    if (!chain.steps.empty()) run.chains.push_back(std::move(chain));
  }

  const auto fscan = scan_jsonl(dir / kFailures);
  for (const auto& line : fscan.lines)
    run.failures.push_back(failure_from_json(parse_line(line, dir / kFailures)));
  return run;
}

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
  fs::create_directories(run_dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      return;
    }
    if (errno != EEXIST) throw StoreError("cannot create lock " + path_.string());
    long holder = 0;
    {
      std::ifstream in(path_);
      in >> holder;
    }
    const bool stale = holder <= 0 || (::kill(static_cast<pid_t>(holder), 0) != 0 && errno == ESRCH);
    if (!stale) throw StoreError("run is locked by process " + std::to_string(holder));
    fs::remove(path_);
  }
  throw StoreError("cannot acquire lock " + path_.string());
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace tts::store
