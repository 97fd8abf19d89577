#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tts/normalized_answer.hpp"

namespace tts {

inline constexpr std::string_view kDefaultSystemPrompt =
    "You are a helpful and harmless assistant. You should think step-by-step.";
inline constexpr std::string_view kDefaultMathInstruction =
    "Answer the question and enclose the final answer in boxed{}";
inline constexpr std::string_view kDefaultChoiceInstruction =
    "Select the best answer from the following options. Output only the letter "
    "corresponding to the correct answer, enclosed in boxed{}.";

enum class Grade { correct, incorrect, no_answer };

const char* to_string(Grade g);
Grade grade_from_string(std::string_view s);
const char* to_string(QuestionKind k);
QuestionKind question_kind_from_string(std::string_view s);

struct Question {
  std::string id;
  std::string prompt_text;
  std::string gold_answer;
  QuestionKind kind = QuestionKind::math_freeform;
  // Option texts; the label of choices[i] is the letter 'A' + i.
  std::vector<std::string> choices;
  std::string source_tag;

  // Throws std::invalid_argument when the multiple-choice invariants fail.
  void validate() const;
  static char choice_label(std::size_t index) { return static_cast<char>('A' + index); }
};

struct RunConfig {
  double temperature = 0.7;
  std::int64_t max_tokens = 32768;
  std::int64_t samples_per_question = 5;
  std::int64_t revision_steps = 0;
  std::int64_t seed = 0;
  std::string provider_endpoint;
  std::string model_name;
  std::string system_prompt{kDefaultSystemPrompt};
  std::string instruction{kDefaultMathInstruction};
  std::string choice_instruction{kDefaultChoiceInstruction};
  std::vector<std::string> revision_candidates{"Wait", "Alternatively"};
  std::int64_t concurrency_limit = 4;
  // 0 selects the default of 4 * max_tokens.
  std::int64_t chain_token_ceiling = 0;

  std::int64_t effective_chain_ceiling() const {
    return chain_token_ceiling > 0 ? chain_token_ceiling : 4 * max_tokens;
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Empty iff every RunConfig invariant holds. Each message names its field.
std::vector<std::string> validate_config(const RunConfig& config);

struct GenerationRecord {
  std::string question_id;
  std::int64_t sample_index = 0;
  std::string text;
  std::int64_t token_count = 0;
  bool token_count_approximated = false;
  std::int64_t char_count = 0;
  std::optional<NormalizedAnswer> extracted_answer;
  Grade grade = Grade::no_answer;
  bool truncated = false;
  std::int64_t rng_seed = 0;

  // Builds a record and checks its invariants. A missing token count is
  // replaced by the ceil(chars / 4) approximation.
  static GenerationRecord make(std::string question_id, std::int64_t sample_index,
                               std::string text, std::optional<std::int64_t> reported_tokens,
                               std::optional<NormalizedAnswer> answer, Grade grade,
                               bool truncated, std::int64_t rng_seed);

  // Throws std::invalid_argument on violation.
  void check_invariants() const;
};

struct RevisionStep {
  std::int64_t step_index = 0;
  std::string appended_text;
  std::string chosen_prompt;
  std::int64_t cumulative_token_count = 0;
  std::optional<NormalizedAnswer> answer_after_step;
  Grade grade_after_step = Grade::no_answer;
  bool prompt_fallback = false;
};

struct RevisionChain {
  std::string question_id;
  std::int64_t sample_index = 0;
  std::vector<RevisionStep> steps;
  bool truncated = false;  // stopped at the token ceiling

  void check_invariants() const;
};

// Number of Unicode code points in a UTF-8 string.
std::int64_t utf8_length(std::string_view text);
// Byte offset of the code point with the given index (clamped to size()).
std::size_t utf8_offset(std::string_view text, std::int64_t code_points);
// ceil(char_count / 4).
std::int64_t approximate_token_count(std::int64_t char_count);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);
std::uint64_t splitmix64(std::uint64_t x);
// Per-sample seed derived from the run seed, question id and sample index.
std::int64_t derive_sample_seed(std::int64_t run_seed, std::string_view question_id,
                                std::int64_t sample_index);

}  // namespace tts
