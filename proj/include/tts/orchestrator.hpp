#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tts/core.hpp"
#include "tts/provider.hpp"
#include "tts/store.hpp"

namespace tts::orchestrator {

enum class Mode { parallel, sequential, both };
const char* to_string(Mode m);
Mode mode_from_string(std::string_view s);

// Cuts the final-answer portion: the earliest of the last "final answer"
// phrase (case-insensitive), the first "</think>", and the start of the
// sentence enclosing the last \boxed{...}. Unchanged when none is present.
std::string strip_final_answer(std::string_view text);

// System prompt plus one user turn holding the question and the instruction
// that matches the question kind.
std::vector<provider::Message> build_messages(const Question& question, const RunConfig& config);

struct PromptChoice {
  std::string prompt;
  bool fallback = false;  // logprobs unavailable or uninformative
};

// Argmax of next-token log-probability over the configured candidates; ties,
// all -inf, or a capability error select the first candidate.
PromptChoice choose_revision_prompt(provider::Provider& provider, const provider::RequestKey& key,
                                    std::span<const provider::Message> context,
                                    const RunConfig& config);

struct SampleOutcome {
  std::vector<GenerationRecord> records;  // includes records resumed from the store
  std::vector<store::FailureRecord> failures;
  bool partial = false;
};

struct ReviseOutcome {
  RevisionChain chain;
  std::vector<store::FailureRecord> failures;
  bool complete = true;
};

struct RunSummary {
  std::string run_id;
  std::int64_t provider_calls = 0;
  std::int64_t new_records = 0;
  std::int64_t new_chain_steps = 0;
  std::int64_t failures = 0;
};

class Orchestrator {
 public:
  Orchestrator(provider::Provider& provider, store::RunStore& store, RunConfig config);

  // k samples with derived seeds; each is graded and persisted before return.
  // Samples already in the store are reused, not re-requested.
  SampleOutcome sample_parallel(const Question& question);

  // Builds (or resumes) the revision chain for one initial sample.
  ReviseOutcome revise(const Question& question, const GenerationRecord& initial, std::int64_t steps);

  // Runs the mode over the dataset with up to concurrency_limit units in flight.
  RunSummary run_benchmark(std::span<const Question> dataset, Mode mode);

  std::int64_t provider_calls() const;

 private:
  provider::Provider& provider_;
  store::RunStore& store_;
  RunConfig config_;
  std::atomic<std::int64_t> calls_{0};

  std::optional<GenerationRecord> sample_one(const Question& question, std::int64_t sample_index,
                                             std::vector<store::FailureRecord>& failures);
};

// Parallel for over [0, n) with at most `workers` threads.
void parallel_for(std::size_t n, std::int64_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace tts::orchestrator
