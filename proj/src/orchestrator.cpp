#include "tts/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "tts/answer.hpp"

namespace tts::orchestrator {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::parallel: return "parallel";
    case Mode::sequential: return "sequential";
    case Mode::both: return "both";
  }
  return "parallel";
}

Mode mode_from_string(std::string_view s) {
  if (s == "parallel") return Mode::parallel;
  if (s == "sequential") return Mode::sequential;
  if (s == "both") return Mode::both;
  throw std::invalid_argument("unknown mode: " + std::string(s));
}

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Start of the sentence containing `pos`: just after the nearest preceding
// newline or [.!?] followed by whitespace.
std::size_t sentence_start(std::string_view text, std::size_t pos) {
  for (std::size_t i = pos; i > 0; --i) {
    const char c = text[i - 1];
    if (c == '\n') return i;
    if ((c == '.' || c == '!' || c == '?') && std::isspace(static_cast<unsigned char>(text[i])))
      return i + 1;
  }
  return 0;
}

std::size_t last_balanced_box(std::string_view text) {
  constexpr std::string_view kBoxed = "\\boxed{";
  std::size_t end = text.size();
  while (end > 0) {
    const auto pos = text.rfind(kBoxed, end - 1);
    if (pos == std::string_view::npos) break;
    int depth = 1;
    for (std::size_t i = pos + kBoxed.size(); i < text.size(); ++i) {
      if (text[i] == '\\' && i + 1 < text.size() && (text[i + 1] == '{' || text[i + 1] == '}')) {
        ++i;
      } else if (text[i] == '{') {
        ++depth;
      } else if (text[i] == '}' && --depth == 0) {
        return pos;
      }
    }
    if (pos == 0) break;
    end = pos;
  }
  return std::string_view::npos;
}

store::FailureRecord failure_from(const provider::ProviderError& e, const std::string& question_id,
                                  std::int64_t sample, std::int64_t step) {
  return {question_id, sample, step, provider::to_string(e.kind()), e.what()};
}

std::int64_t step_seed(std::int64_t sample_seed, std::int64_t step) {
  return static_cast<std::int64_t>(
      splitmix64(static_cast<std::uint64_t>(sample_seed) ^ static_cast<std::uint64_t>(step)) >> 1);
}

}  // namespace

std::string strip_final_answer(std::string_view text) {
  std::size_t cut = std::string_view::npos;
  const std::string lower = lowercase(text);
  if (const auto p = lower.rfind("final answer"); p != std::string::npos) cut = p;
  if (const auto p = text.find("</think>"); p != std::string_view::npos) cut = std::min(cut, p);
  if (const auto p = last_balanced_box(text); p != std::string_view::npos)
    cut = std::min(cut, sentence_start(text, p));
  if (cut == std::string_view::npos) return std::string(text);
  return std::string(text.substr(0, cut));
}

std::vector<provider::Message> build_messages(const Question& question, const RunConfig& config) {
  std::string user = question.prompt_text;
  if (question.kind == QuestionKind::multiple_choice) {
    for (std::size_t i = 0; i < question.choices.size(); ++i)
      user += std::string("\n(") + Question::choice_label(i) + ") " + question.choices[i];
    user += "\n\n" + config.choice_instruction;
  } else {
    user += "\n\n" + config.instruction;
  }
  std::vector<provider::Message> out;
  if (!config.system_prompt.empty()) out.push_back({"system", config.system_prompt});
  out.push_back({"user", std::move(user)});
  return out;
}

PromptChoice choose_revision_prompt(provider::Provider& provider, const provider::RequestKey& key,
                                    std::span<const provider::Message> context,
                                    const RunConfig& config) {
  const auto& candidates = config.revision_candidates;
  PromptChoice fallback{candidates.front(), true};
  std::map<std::string, double> logprobs;
  try {
    logprobs = provider.next_token_logprobs(key, context, candidates);
  } catch (const provider::ProviderError& e) {
    if (e.kind() == provider::ErrorKind::unsupported_capability) return fallback;
    throw;
  }
  std::size_t best = 0;
  bool tie = false;
  auto value = [&](std::size_t i) {
    const auto it = logprobs.find(candidates[i]);
    return it == logprobs.end() ? provider::kNoLogprob : it->second;
  };
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (value(i) > value(best)) {
      best = i;
      tie = false;
    } else if (value(i) == value(best)) {
      tie = true;
    }
  }
  if (value(best) == provider::kNoLogprob) return fallback;
  if (tie) return {candidates.front(), false};
  return {candidates[best], false};
}

void parallel_for(std::size_t n, std::int64_t workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max<std::int64_t>(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

Orchestrator::Orchestrator(provider::Provider& provider, store::RunStore& store, RunConfig config)
    : provider_(provider), store_(store), config_(std::move(config)) {
  const auto violations = validate_config(config_);
  if (!violations.empty()) throw std::invalid_argument("invalid config: " + violations.front());
}

std::int64_t Orchestrator::provider_calls() const { return calls_.load(); }

std::optional<GenerationRecord> Orchestrator::sample_one(const Question& question,
                                                         std::int64_t sample_index,
                                                         std::vector<store::FailureRecord>& failures) {
  const std::int64_t seed = derive_sample_seed(config_.seed, question.id, sample_index);
  const auto messages = build_messages(question, config_);
  provider::CompletionParams params{config_.temperature, config_.max_tokens, seed};
  try {
    ++calls_;
    const auto completion = provider_.complete({question.id, sample_index, 0}, messages, params);
    auto graded = answer::grade(completion.text, question);
    auto record = GenerationRecord::make(
        question.id, sample_index, completion.text,
        completion.tokens_reported ? std::optional<std::int64_t>(completion.completion_tokens)
                                   : std::nullopt,
        std::move(graded.answer), graded.grade,
        completion.finish_reason == provider::FinishReason::length, seed);
    store_.append_record(record);
    return record;
  } catch (const provider::ProviderError& e) {
    auto failure = failure_from(e, question.id, sample_index, 0);
    store_.append_failure(failure);
    failures.push_back(std::move(failure));
    return std::nullopt;
  }
}

SampleOutcome Orchestrator::sample_parallel(const Question& question) {
  SampleOutcome out;
  std::map<std::int64_t, GenerationRecord> existing;
  for (auto& r : store::read_record_lines(store_.dir() / "records.jsonl", nullptr))
    if (r.question_id == question.id) existing.emplace(r.sample_index, std::move(r));
  for (std::int64_t i = 0; i < config_.samples_per_question; ++i) {
    if (auto it = existing.find(i); it != existing.end()) {
      out.records.push_back(it->second);
      continue;
    }
    if (auto record = sample_one(question, i, out.failures)) out.records.push_back(std::move(*record));
  }
  out.partial = !out.failures.empty();
  return out;
}

ReviseOutcome Orchestrator::revise(const Question& question, const GenerationRecord& initial,
                                   std::int64_t steps) {
  if (steps < 0) throw std::invalid_argument("revision steps must be non-negative");
  ReviseOutcome out;
  auto& chain = out.chain;
  chain.question_id = initial.question_id;
  chain.sample_index = initial.sample_index;

  RevisionStep first;
  first.step_index = 0;
  first.appended_text = initial.text;
  first.cumulative_token_count = initial.token_count;
  first.answer_after_step = initial.extracted_answer;
  first.grade_after_step = initial.grade;
  chain.steps.push_back(first);
  if (!store_.has_step(initial.question_id, initial.sample_index, 0)) {
    store::ChainStepLine line{initial.question_id, initial.sample_index, first, initial.token_count};
    line.step.appended_text.clear();  // the record holds the text
    store_.append_chain_step(line);
  }

  // Replay steps already persisted by an earlier, interrupted run.
  std::map<std::int64_t, store::ChainStepLine> persisted;
  if (store_.has_step(initial.question_id, initial.sample_index, 1)) {
    for (auto& line : store::read_chain_lines(store_.dir() / "chains.jsonl", nullptr))
      if (line.question_id == initial.question_id && line.sample_index == initial.sample_index &&
          line.step.step_index > 0)
        persisted.emplace(line.step.step_index, std::move(line));
  }

  std::string accumulated = initial.text;
  const std::int64_t ceiling = config_.effective_chain_ceiling();
  const std::int64_t sample_seed = derive_sample_seed(config_.seed, question.id, initial.sample_index);

  for (std::int64_t s = 1; s <= steps; ++s) {
    const std::string stripped = strip_final_answer(accumulated);
    if (auto it = persisted.find(s); it != persisted.end()) {
      accumulated = stripped + it->second.step.chosen_prompt + it->second.step.appended_text;
      chain.steps.push_back(it->second.step);
      if (it->second.chain_truncated) {
        chain.truncated = true;
        break;
      }
      continue;
    }

    const std::int64_t cumulative = chain.steps.back().cumulative_token_count;
    const std::int64_t budget = std::min(config_.max_tokens, ceiling - cumulative);
    if (budget <= 0) {
      chain.truncated = true;
      break;
    }
    const provider::RequestKey key{question.id, initial.sample_index, s};
    auto messages = build_messages(question, config_);
    messages.push_back({"assistant", stripped});
    try {
      ++calls_;
      const auto choice = choose_revision_prompt(provider_, key, messages, config_);
      messages.back().content = stripped + choice.prompt;
      ++calls_;
      const auto completion = provider_.complete(
          key, messages, {config_.temperature, budget, step_seed(sample_seed, s)});

      RevisionStep step;
      step.step_index = s;
      step.appended_text = completion.text;
      step.chosen_prompt = choice.prompt;
      step.prompt_fallback = choice.fallback;
      step.cumulative_token_count = cumulative + completion.completion_tokens;
      accumulated = stripped + choice.prompt + completion.text;
      auto graded = answer::grade(accumulated, question);
      step.answer_after_step = std::move(graded.answer);
      step.grade_after_step = graded.grade;

      const bool hit_ceiling = step.cumulative_token_count >= ceiling;
      store::ChainStepLine line{question.id, initial.sample_index, step, completion.completion_tokens,
                                hit_ceiling};
      store_.append_chain_step(line);
      chain.steps.push_back(std::move(step));
      if (hit_ceiling) {
        chain.truncated = true;
        break;
      }
    } catch (const provider::ProviderError& e) {
      auto failure = failure_from(e, question.id, initial.sample_index, s);
      store_.append_failure(failure);
      out.failures.push_back(std::move(failure));
      out.complete = false;
      break;
    }
  }
  chain.check_invariants();
  return out;
}

RunSummary Orchestrator::run_benchmark(std::span<const Question> dataset, Mode mode) {
  if (dataset.empty()) throw std::invalid_argument("dataset is empty");
  RunSummary summary;
  summary.run_id = store_.manifest().run_id;
  const std::int64_t calls_before = calls_.load();
  const std::size_t records_before = store_.record_count();

  const std::int64_t k = mode == Mode::sequential ? 1 : config_.samples_per_question;
  std::map<std::pair<std::string, std::int64_t>, GenerationRecord> records;
  for (auto& r : store::read_record_lines(store_.dir() / "records.jsonl", nullptr))
    records.emplace(std::make_pair(r.question_id, r.sample_index), std::move(r));

  struct Unit {
    std::size_t question;
    std::int64_t sample;
  };
  std::vector<Unit> units;
  for (std::size_t q = 0; q < dataset.size(); ++q)
    for (std::int64_t i = 0; i < k; ++i)
      if (!records.contains({dataset[q].id, i})) units.push_back({q, i});

  std::mutex mu;
  std::int64_t failures = 0;
  parallel_for(units.size(), config_.concurrency_limit, [&](std::size_t u) {
    std::vector<store::FailureRecord> local;
    auto record = sample_one(dataset[units[u].question], units[u].sample, local);
    std::lock_guard lock(mu);
    failures += static_cast<std::int64_t>(local.size());
    if (record) records.emplace(std::make_pair(record->question_id, record->sample_index), *record);
  });

  const std::size_t steps_before = store_.step_count();
  if (mode != Mode::parallel) {
    std::vector<const GenerationRecord*> initials;
    std::map<std::string, const Question*> by_id;
    for (const auto& q : dataset) by_id[q.id] = &q;
    for (const auto& [key, r] : records)
      if (by_id.contains(key.first) && key.second < k) initials.push_back(&r);
    parallel_for(initials.size(), config_.concurrency_limit, [&](std::size_t i) {
      const auto& r = *initials[i];
      auto outcome = revise(*by_id.at(r.question_id), r, config_.revision_steps);
      std::lock_guard lock(mu);
      failures += static_cast<std::int64_t>(outcome.failures.size());
    });
  }

  summary.provider_calls = calls_.load() - calls_before;
  summary.new_records = static_cast<std::int64_t>(store_.record_count() - records_before);
  summary.new_chain_steps = static_cast<std::int64_t>(store_.step_count() - steps_before);
  summary.failures = failures;
  return summary;
}

}  // namespace tts::orchestrator
