#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "tts/json_io.hpp"
#include "tts/provider.hpp"

namespace tts::provider {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // request path of the chat completions route
};

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument("provider_endpoint must be an http(s) URL or replay:<dir>: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  std::string base = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!base.empty() && base.back() == '/') base.pop_back();
  e.path = base.ends_with("/chat/completions") ? base : base + "/chat/completions";
  return e;
}

json messages_json(std::span<const Message> messages) {
  json arr = json::array();
  for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

// Releases its slot on destruction.
class GateSlot {
 public:
  explicit GateSlot(std::counting_semaphore<>& gate) : gate_(gate) { gate_.acquire(); }
  ~GateSlot() { gate_.release(); }
  GateSlot(const GateSlot&) = delete;
  GateSlot& operator=(const GateSlot&) = delete;

 private:
  std::counting_semaphore<>& gate_;
};

}  // namespace

Completion parse_chat_response(const std::string& body, const std::string& question_id,
                               std::int64_t max_tokens) {
  auto malformed = [&](const std::string& why) {
    return ProviderError(ErrorKind::malformed_response, question_id, why);
  };
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw malformed("response is not a JSON object");
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw malformed("response has no choices");
  const json& choice = j["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object())
    throw malformed("choice has no message");
  const json& content = choice["message"].value("content", json());
  if (!content.is_string() && !content.is_null()) throw malformed("message content is not a string");

  Completion c;
  c.text = content.is_string() ? content.get<std::string>() : std::string();
  const std::string finish = choice.value("finish_reason", json()).is_string()
                                 ? choice["finish_reason"].get<std::string>()
                                 : std::string("stop");
  c.finish_reason = finish == "length" ? FinishReason::length : FinishReason::stop;

  const json usage = j.value("usage", json());
  if (usage.is_object() && usage.contains("completion_tokens") &&
      usage["completion_tokens"].is_number_integer()) {
    c.completion_tokens = usage["completion_tokens"].get<std::int64_t>();
    if (c.completion_tokens < 0) throw malformed("negative completion_tokens");
  } else if (c.finish_reason == FinishReason::length) {
    c.completion_tokens = max_tokens;
  } else {
    c.completion_tokens = approximate_token_count(utf8_length(c.text));
    c.tokens_reported = false;
  }

  const json logprobs = choice.value("logprobs", json());
  if (logprobs.is_object() && logprobs.contains("content") && logprobs["content"].is_array() &&
      !logprobs["content"].empty()) {
    const json& first = logprobs["content"][0];
    std::map<std::string, double> top;
    for (const auto& entry : first.value("top_logprobs", json::array())) {
      if (!entry.contains("token") || !entry.contains("logprob") || !entry["logprob"].is_number())
        throw malformed("top_logprobs entry lacks token/logprob");
      const double lp = entry["logprob"].get<double>();
      if (lp > 0.0) throw malformed("positive log-probability");
      top[entry["token"].get<std::string>()] = lp;
    }
    c.top_logprobs_first_token = std::move(top);
  }
  return c;
}

struct HttpChatProvider::Impl {
  HttpOptions options;
  Endpoint endpoint;
  std::counting_semaphore<> gate;

  explicit Impl(HttpOptions o)
      : options(std::move(o)),
        endpoint(parse_endpoint(options.endpoint)),
        gate(static_cast<std::ptrdiff_t>(std::max<std::int64_t>(1, options.concurrency_limit))) {
    if (options.api_key.empty()) {
      if (const char* key = std::getenv("TTS_API_KEY")) options.api_key = key;
    }
    if (!options.sleeper)
      options.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  // Sends one request with retries on transport and 5xx failures.
  std::string post(const json& request, const std::string& question_id, bool capability_probe) {
    const std::string body = request.dump();
    std::string last_error;
    const std::size_t attempts = options.retry.backoff.size() + 1;
    for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0) options.sleeper(options.retry.backoff[attempt - 1]);
      httplib::Result res{nullptr, httplib::Error::Unknown};
      {
        GateSlot slot(gate);
        httplib::Client client(endpoint.origin);
        client.set_connection_timeout(std::chrono::seconds(30));
        client.set_read_timeout(options.timeout);
        client.set_write_timeout(options.timeout);
        httplib::Headers headers;
        if (!options.api_key.empty())
          headers.emplace("Authorization", "Bearer " + options.api_key);
        res = client.Post(endpoint.path, headers, body, "application/json");
      }
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      const int status = res->status;
      if (status >= 500) {
        last_error = "server error " + std::to_string(status);
        continue;
      }
      if (status == 401 || status == 403)
        throw ProviderError(ErrorKind::authentication, question_id,
                            "endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
      if (status >= 400)
        throw ProviderError(capability_probe ? ErrorKind::unsupported_capability
                                             : ErrorKind::request_rejected,
                            question_id, "HTTP " + std::to_string(status) + ": " + res->body);
      return res->body;
    }
    throw ProviderError(ErrorKind::unreachable, question_id,
                        "gave up after " + std::to_string(attempts) + " attempts: " + last_error);
  }
};

HttpChatProvider::HttpChatProvider(HttpOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

HttpChatProvider::~HttpChatProvider() = default;

Completion HttpChatProvider::complete(const RequestKey& key, std::span<const Message> messages,
                                      const CompletionParams& params) {
  if (messages.empty()) throw std::invalid_argument("complete() needs at least one message");
  json request{{"model", impl_->options.model},
               {"messages", messages_json(messages)},
               {"temperature", params.temperature},
               {"max_tokens", params.max_tokens},
               {"seed", params.seed}};
  const auto body = impl_->post(request, key.question_id, false);
  return parse_chat_response(body, key.question_id, params.max_tokens);
}

std::map<std::string, double> HttpChatProvider::next_token_logprobs(
    const RequestKey& key, std::span<const Message> context, std::span<const std::string> candidates) {
  if (candidates.empty()) throw std::invalid_argument("next_token_logprobs() needs candidates");
  json request{{"model", impl_->options.model},
               {"messages", messages_json(context)},
               {"temperature", 0.0},
               {"max_tokens", 1},
               {"logprobs", true},
               {"top_logprobs", impl_->options.top_logprobs}};
  const auto body = impl_->post(request, key.question_id, true);
  const auto completion = parse_chat_response(body, key.question_id, 1);
  if (!completion.top_logprobs_first_token)
    throw ProviderError(ErrorKind::unsupported_capability, key.question_id,
                        "endpoint returned no logprobs");
  return match_candidates(*completion.top_logprobs_first_token, candidates);
}

}  // namespace tts::provider
