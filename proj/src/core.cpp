#include "tts/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace tts {

const char* to_string(Grade g) {
  switch (g) {
    case Grade::correct: return "correct";
    case Grade::incorrect: return "incorrect";
    case Grade::no_answer: return "no_answer";
  }
  return "no_answer";
}

Grade grade_from_string(std::string_view s) {
  if (s == "correct") return Grade::correct;
  if (s == "incorrect") return Grade::incorrect;
  if (s == "no_answer") return Grade::no_answer;
  throw std::invalid_argument("unknown grade: " + std::string(s));
}

const char* to_string(QuestionKind k) {
  return k == QuestionKind::multiple_choice ? "multiple_choice" : "math_freeform";
}

QuestionKind question_kind_from_string(std::string_view s) {
  if (s == "math_freeform") return QuestionKind::math_freeform;
  if (s == "multiple_choice") return QuestionKind::multiple_choice;
  throw std::invalid_argument("unknown question kind: " + std::string(s));
}

void Question::validate() const {
  if (id.empty()) throw std::invalid_argument("question id must be non-empty");
  if (kind != QuestionKind::multiple_choice) return;
  if (choices.empty())
    throw std::invalid_argument("question " + id + ": multiple_choice requires choices");
  if (choices.size() > 26)
    throw std::invalid_argument("question " + id + ": at most 26 choices are supported");
  const bool gold_is_label = gold_answer.size() == 1 && gold_answer[0] >= 'A' &&
                             gold_answer[0] < choice_label(choices.size());
  if (!gold_is_label)
    throw std::invalid_argument("question " + id + ": gold_answer must be a choice label");
}

std::vector<std::string> validate_config(const RunConfig& c) {
  std::vector<std::string> out;
  if (!(c.temperature >= 0.0 && c.temperature <= 2.0))
    out.emplace_back("temperature must be in [0, 2]");
  if (c.max_tokens < 1) out.emplace_back("max_tokens must be ≥ 1");
  if (c.samples_per_question < 1) out.emplace_back("samples_per_question must be ≥ 1");
  if (c.revision_steps < 0) out.emplace_back("revision_steps must be ≥ 0");
  if (c.concurrency_limit < 1) out.emplace_back("concurrency_limit must be ≥ 1");
  if (c.revision_candidates.empty()) out.emplace_back("revision_candidates must be non-empty");
  if (std::any_of(c.revision_candidates.begin(), c.revision_candidates.end(),
                  [](const std::string& s) { return s.empty(); }))
    out.emplace_back("revision_candidates must not contain empty strings");
  if (c.chain_token_ceiling < 0) out.emplace_back("chain_token_ceiling must be ≥ 0");
  return out;
}

GenerationRecord GenerationRecord::make(std::string question_id, std::int64_t sample_index,
                                        std::string text,
                                        std::optional<std::int64_t> reported_tokens,
                                        std::optional<NormalizedAnswer> answer, Grade grade,
                                        bool truncated, std::int64_t rng_seed) {
  GenerationRecord r;
  r.question_id = std::move(question_id);
  r.sample_index = sample_index;
  r.text = std::move(text);
  r.char_count = utf8_length(r.text);
  if (reported_tokens) {
    r.token_count = *reported_tokens;
  } else {
    r.token_count = approximate_token_count(r.char_count);
    r.token_count_approximated = true;
  }
  r.extracted_answer = std::move(answer);
  r.grade = grade;
  r.truncated = truncated;
  r.rng_seed = rng_seed;
  r.check_invariants();
  return r;
}

void GenerationRecord::check_invariants() const {
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("record " + question_id + "#" + std::to_string(sample_index) +
                                ": " + what);
  };
  if (sample_index < 0) fail("sample_index must be non-negative");
  if (token_count < 0) fail("token_count must be non-negative");
  if (char_count != utf8_length(text)) fail("char_count does not match text length");
  if ((grade == Grade::no_answer) != !extracted_answer.has_value())
    fail("grade no_answer must coincide with a missing extracted answer");
}

void RevisionChain::check_invariants() const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].step_index != static_cast<std::int64_t>(i))
      throw std::invalid_argument("chain " + question_id + ": step indices must be contiguous from 0");
    if (i > 0 && steps[i].cumulative_token_count < steps[i - 1].cumulative_token_count)
      throw std::invalid_argument("chain " + question_id + ": cumulative tokens decreased");
    if ((steps[i].grade_after_step == Grade::no_answer) != !steps[i].answer_after_step)
      throw std::invalid_argument("chain " + question_id + ": grade/answer mismatch");
  }
}

std::int64_t utf8_length(std::string_view text) {
  std::int64_t n = 0;
  for (unsigned char c : text)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

std::size_t utf8_offset(std::string_view text, std::int64_t code_points) {
  if (code_points <= 0) return 0;
  std::int64_t seen = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      if (seen == code_points) return i;
      ++seen;
    }
  }
  return text.size();
}

std::int64_t approximate_token_count(std::int64_t char_count) {
  return char_count <= 0 ? 0 : (char_count + 3) / 4;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::int64_t derive_sample_seed(std::int64_t run_seed, std::string_view question_id,
                                std::int64_t sample_index) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(run_seed));
  h = splitmix64(h ^ fnv1a64(question_id));
  h = splitmix64(h ^ static_cast<std::uint64_t>(sample_index));
  // Keep seeds in the positive int63 range; some endpoints reject negatives.
  return static_cast<std::int64_t>(h >> 1);
}

}  // namespace tts
