#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tts/core.hpp"
#include "tts/normalized_answer.hpp"

namespace tts::answer {

// Raised by normalize() when nothing usable remains after cleaning.
class UnusableAnswer : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Content of the last balanced `\boxed{...}` in `text`. Nested braces are
// allowed; `\{` and `\}` are literals and do not affect the balance.
std::optional<std::string> extract_boxed(std::string_view text);

// Whitespace-insensitive cleaning applied before parsing. Idempotent.
std::string clean(std::string_view raw);

NormalizedAnswer normalize(std::string_view raw, QuestionKind kind);
std::optional<NormalizedAnswer> try_normalize(std::string_view raw, QuestionKind kind);

// Checker 1: canonical forms are identical.
bool strict_equivalent(const NormalizedAnswer& a, const NormalizedAnswer& b);
// Checker 2: both are numbers and equal; a decimal is compared against an
// exact rational at the decimal's stated number of places.
bool numeric_equivalent(const NormalizedAnswer& a, const NormalizedAnswer& b);
// Accepted when either checker accepts.
bool equivalent(const NormalizedAnswer& a, const NormalizedAnswer& b);

struct GradeResult {
  Grade grade = Grade::no_answer;
  std::optional<NormalizedAnswer> answer;
};

GradeResult grade(std::string_view text, const Question& question);

// Grades an already extracted answer against the question's gold.
Grade grade_answer(const std::optional<NormalizedAnswer>& answer, const Question& question);

}  // namespace tts::answer
