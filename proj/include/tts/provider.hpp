#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tts/core.hpp"

namespace tts::provider {

struct Message {
  std::string role;  // system | user | assistant
  std::string content;
};

// Identifies the unit of work a request belongs to. Replay looks completions
// up by it; the live client only uses it in error reports.
struct RequestKey {
  std::string question_id;
  std::int64_t sample_index = 0;
  std::int64_t step = 0;
};

struct CompletionParams {
  double temperature = 0.7;
  std::int64_t max_tokens = 32768;
  std::int64_t seed = 0;
};

enum class FinishReason { stop, length };

struct Completion {
  std::string text;
  std::int64_t completion_tokens = 0;
  bool tokens_reported = true;
  FinishReason finish_reason = FinishReason::stop;
  std::optional<std::map<std::string, double>> top_logprobs_first_token;
};

enum class ErrorKind {
  unreachable,
  malformed_response,
  authentication,
  no_recorded_generation,
  unsupported_capability,
  request_rejected,
};

const char* to_string(ErrorKind kind);

class ProviderError : public std::runtime_error {
 public:
  ProviderError(ErrorKind kind, std::string question_id, const std::string& message);
  ErrorKind kind() const { return kind_; }
  const std::string& question_id() const { return question_id_; }

 private:
  ErrorKind kind_;
  std::string question_id_;
};

inline constexpr double kNoLogprob = -std::numeric_limits<double>::infinity();

// Maps each candidate to the best log-probability among top tokens that are a
// prefix of it (leading whitespace ignored). Missing candidates get -inf.
std::map<std::string, double> match_candidates(const std::map<std::string, double>& top_logprobs,
                                               std::span<const std::string> candidates);

class Provider {
 public:
  virtual ~Provider() = default;
  virtual Completion complete(const RequestKey& key, std::span<const Message> messages,
                              const CompletionParams& params) = 0;
  // Log-probability that the next token starts each candidate. Throws
  // ProviderError(unsupported_capability) when the backend cannot tell.
  virtual std::map<std::string, double> next_token_logprobs(const RequestKey& key,
                                                            std::span<const Message> context,
                                                            std::span<const std::string> candidates) = 0;
};

// Serves generations recorded in a run directory: step 0 from records.jsonl,
// later steps from replay/chains.jsonl (or chains.jsonl when absent).
class ReplayProvider final : public Provider {
 public:
  explicit ReplayProvider(const std::filesystem::path& run_dir);

  Completion complete(const RequestKey& key, std::span<const Message> messages,
                      const CompletionParams& params) override;
  std::map<std::string, double> next_token_logprobs(const RequestKey& key,
                                                    std::span<const Message> context,
                                                    std::span<const std::string> candidates) override;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string text;
    std::int64_t completion_tokens = 0;
    bool tokens_reported = true;
    bool truncated = false;
    std::optional<std::map<std::string, double>> logprobs;
  };
  std::map<std::tuple<std::string, std::int64_t, std::int64_t>, Entry> entries_;
};

struct RetryPolicy {
  // Waits between attempts; the number of retries is backoff.size().
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds(1), std::chrono::seconds(4),
                                                 std::chrono::seconds(16)};
};

struct HttpOptions {
  std::string endpoint;  // base URL, e.g. http://localhost:30000/v1
  std::string model;
  std::string api_key;   // defaults to $TTS_API_KEY
  RetryPolicy retry;
  std::chrono::seconds timeout{600};
  std::int64_t concurrency_limit = 4;
  int top_logprobs = 20;
  // Test hook replacing std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleeper;
};

// OpenAI-compatible chat completions client. Shareable across threads; the
// number of in-flight requests is capped by concurrency_limit.
class HttpChatProvider final : public Provider {
 public:
  explicit HttpChatProvider(HttpOptions options);
  ~HttpChatProvider() override;

  Completion complete(const RequestKey& key, std::span<const Message> messages,
                      const CompletionParams& params) override;
  std::map<std::string, double> next_token_logprobs(const RequestKey& key,
                                                    std::span<const Message> context,
                                                    std::span<const std::string> candidates) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Parses a chat-completions response body. Exposed for tests.
Completion parse_chat_response(const std::string& body, const std::string& question_id,
                               std::int64_t max_tokens);

// "replay:self" resolves to `run_dir`; "replay:<path>" to that directory;
// anything else is an HTTP endpoint.
std::unique_ptr<Provider> make_provider(const RunConfig& config, const std::filesystem::path& run_dir);

}  // namespace tts::provider
