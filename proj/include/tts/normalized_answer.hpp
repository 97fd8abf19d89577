#pragma once

#include <cstdint>
#include <string>
#include <variant>

namespace tts {

enum class QuestionKind { math_freeform, multiple_choice };

// Exact integer answer.
struct IntegerAnswer {
  std::int64_t value = 0;
  friend bool operator==(const IntegerAnswer&, const IntegerAnswer&) = default;
};

// Always in lowest terms, denominator > 1, sign carried on the numerator.
struct RationalAnswer {
  std::int64_t numerator = 0;
  std::int64_t denominator = 1;
  friend bool operator==(const RationalAnswer&, const RationalAnswer&) = default;
};

// A decimal as written: value = mantissa / 10^places. The precision it was
// stated at matters for numeric comparison against exact rationals.
struct DecimalAnswer {
  std::int64_t mantissa = 0;
  int places = 0;
  int significant_digits = 1;
  friend bool operator==(const DecimalAnswer&, const DecimalAnswer&) = default;
};

// Single uppercase letter.
struct ChoiceAnswer {
  char letter = 'A';
  friend bool operator==(const ChoiceAnswer&, const ChoiceAnswer&) = default;
};

// Whitespace-insensitive cleaned LaTeX; never empty.
struct SymbolicAnswer {
  std::string text;
  friend bool operator==(const SymbolicAnswer&, const SymbolicAnswer&) = default;
};

using CanonicalAnswer = std::variant<IntegerAnswer, RationalAnswer, DecimalAnswer,
                                     ChoiceAnswer, SymbolicAnswer>;

struct NormalizedAnswer {
  std::string raw;  // exact extracted content
  CanonicalAnswer canonical;
};

// Canonical rendering; normalizing it again yields the same canonical value.
std::string render(const CanonicalAnswer& canonical);
inline std::string render(const NormalizedAnswer& a) { return render(a.canonical); }

const char* canonical_type_name(const CanonicalAnswer& canonical);

}  // namespace tts
