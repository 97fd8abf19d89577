#include "tts/provider.hpp"

#include <algorithm>
#include <cctype>

#include "tts/json_io.hpp"

namespace tts::provider {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::unreachable: return "unreachable";
    case ErrorKind::malformed_response: return "malformed_response";
    case ErrorKind::authentication: return "authentication";
    case ErrorKind::no_recorded_generation: return "no_recorded_generation";
    case ErrorKind::unsupported_capability: return "unsupported_capability";
    case ErrorKind::request_rejected: return "request_rejected";
  }
  return "unknown";
}

ProviderError::ProviderError(ErrorKind kind, std::string question_id, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " [" + question_id + "]: " + message),
      kind_(kind),
      question_id_(std::move(question_id)) {}

std::map<std::string, double> match_candidates(const std::map<std::string, double>& top_logprobs,
                                               std::span<const std::string> candidates) {
  std::map<std::string, double> out;
  for (const auto& candidate : candidates) {
    double best = kNoLogprob;
    for (const auto& [token, logprob] : top_logprobs) {
      std::string_view t = token;
      while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
      if (!t.empty() && std::string_view(candidate).starts_with(t)) best = std::max(best, logprob);
    }
    out[candidate] = best;
  }
  return out;
}

namespace {

void load_jsonl(const std::filesystem::path& path, const std::function<void(const json&)>& fn) {
  if (!std::filesystem::exists(path)) return;
  const std::string content = read_file(path);
  std::size_t start = 0;
  while (start < content.size()) {
    const auto nl = content.find('\n', start);
    if (nl == std::string::npos) break;  // torn trailing fragment
    const std::string line = content.substr(start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      if (start >= content.size()) break;
      throw std::runtime_error("corrupt replay line in " + path.string());
    }
    fn(j);
  }
}

}  // namespace

ReplayProvider::ReplayProvider(const std::filesystem::path& run_dir) {
  if (!std::filesystem::exists(run_dir / "records.jsonl"))
    throw std::runtime_error("replay source has no records.jsonl: " + run_dir.string());
  load_jsonl(run_dir / "records.jsonl", [&](const json& j) {
    Entry e;
    e.text = j.at("text").get<std::string>();
    e.completion_tokens = j.at("token_count").get<std::int64_t>();
    e.tokens_reported = !j.value("token_count_approximated", false);
    e.truncated = j.value("truncated", false);
    entries_[{j.at("question_id").get<std::string>(), j.at("sample_index").get<std::int64_t>(), 0}] =
        std::move(e);
  });
  const auto recorded = run_dir / "replay" / "chains.jsonl";
  const auto chains = std::filesystem::exists(recorded) ? recorded : run_dir / "chains.jsonl";
  load_jsonl(chains, [&](const json& j) {
    const auto step = j.at("step").get<std::int64_t>();
    if (step == 0) return;
    Entry e;
    e.text = j.value("appended_text", std::string());
    e.completion_tokens = j.value("completion_tokens", std::int64_t{0});
    if (j.contains("logprobs") && j["logprobs"].is_object())
      e.logprobs = j["logprobs"].get<std::map<std::string, double>>();
    entries_[{j.at("question_id").get<std::string>(), j.at("sample_index").get<std::int64_t>(),
              step}] = std::move(e);
  });
}

Completion ReplayProvider::complete(const RequestKey& key, std::span<const Message>,
                                    const CompletionParams&) {
  const auto it = entries_.find({key.question_id, key.sample_index, key.step});
  if (it == entries_.end())
    throw ProviderError(ErrorKind::no_recorded_generation, key.question_id,
                        "no recorded generation for sample " + std::to_string(key.sample_index) +
                            " step " + std::to_string(key.step));
  Completion c;
  c.text = it->second.text;
  c.completion_tokens = it->second.completion_tokens;
  c.tokens_reported = it->second.tokens_reported;
  c.finish_reason = it->second.truncated ? FinishReason::length : FinishReason::stop;
  return c;
}

std::map<std::string, double> ReplayProvider::next_token_logprobs(
    const RequestKey& key, std::span<const Message>, std::span<const std::string> candidates) {
  const auto it = entries_.find({key.question_id, key.sample_index, key.step});
  if (it == entries_.end() || !it->second.logprobs)
    throw ProviderError(ErrorKind::unsupported_capability, key.question_id,
                        "replay source has no recorded next-token log-probabilities");
  return match_candidates(*it->second.logprobs, candidates);
}

std::unique_ptr<Provider> make_provider(const RunConfig& config, const std::filesystem::path& run_dir) {
  const std::string& endpoint = config.provider_endpoint;
  if (endpoint.starts_with("replay:")) {
    const std::string target = endpoint.substr(7);
    return std::make_unique<ReplayProvider>(target == "self" ? run_dir
                                                             : std::filesystem::path(target));
  }
  HttpOptions options;
  options.endpoint = endpoint;
  options.model = config.model_name;
  options.concurrency_limit = config.concurrency_limit;
  return std::make_unique<HttpChatProvider>(std::move(options));
}

}  // namespace tts::provider
