#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tts/core.hpp"
#include "tts/json_io.hpp"

// Two-state (correct / incorrect) Markov model of sampling and self-revision.
// Produces corpora in the run-store format so every analysis can be checked
// against known generating parameters.
namespace tts::simulator {

struct SimParams {
  double p_initial_correct = 0.45;
  double p_wrong_to_correct = 0.05;  // per non-stick step
  double p_correct_to_wrong = 0.10;  // per non-stick step
  double stick_bias = 0.0;           // chance a step repeats the previous answer verbatim
  double length_mean_correct = 4000.0;
  double length_mean_incorrect = 8000.0;
  double length_dispersion = 0.25;   // sigma of log-length
  double step_length_increment_mean = 300.0;
  std::int64_t answer_alphabet_size = 4;
  double marker_rate = 1.0 / 300.0;  // markers per token
};

void to_json(json& j, const SimParams& p);
void from_json(const json& j, SimParams& p);

std::vector<std::string> validate(const SimParams& p);

enum class TextMode {
  full,     // about four characters per token, markers spread through filler
  compact,  // markers and the final box only; token counts are carried as reported
};

TextMode text_mode_from_string(std::string_view s);
const char* to_string(TextMode m);

struct SimCorpus {
  std::vector<Question> questions;
  std::vector<GenerationRecord> records;  // question-major, k per question
};

SimCorpus simulate_corpus(const SimParams& params, std::int64_t n_questions, std::int64_t k,
                          std::int64_t seed, TextMode mode = TextMode::full);

struct SimulatedChain {
  RevisionChain chain;
  std::vector<std::int64_t> completion_tokens;  // per step; [0] is the initial sample's
};

SimulatedChain simulate_chain(const SimParams& params, std::int64_t steps,
                              const GenerationRecord& initial, const Question& question,
                              std::int64_t seed, TextMode mode = TextMode::full);

// Expected accuracy after `steps` revisions:
//   a_s = pi + (a_0 - pi) * (1 - (1 - b)(p_wc + p_cw))^s,  pi = p_wc / (p_wc + p_cw)
// with b the stick bias; a_0 when p_wc + p_cw = 0.
double analytic_accuracy(const SimParams& params, std::int64_t steps);
double analytic_accuracy(double a0, double p_wc, double p_cw, double stick_bias, std::int64_t steps);

struct SimulatedRunOptions {
  std::int64_t n_questions = 100;
  std::int64_t k = 5;
  std::int64_t steps = 0;
  std::int64_t seed = 1;
  TextMode mode = TextMode::full;
};

// Writes a sealed run whose provider is "replay:self": records.jsonl holds the
// initial samples and replay/chains.jsonl the recorded continuations.
void write_simulated_run(const std::filesystem::path& root, const std::string& run_id,
                         const SimParams& params, const SimulatedRunOptions& options);

// Seed of the chain simulated for one initial sample in write_simulated_run.
std::int64_t chain_seed(std::int64_t run_seed, const std::string& question_id,
                        std::int64_t sample_index);

}  // namespace tts::simulator
