#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tts/core.hpp"

namespace tts::aggregate {

// Lengths below this are clamped so that log(l) > 0.
inline constexpr double kMinCategoryLength = 2.0;

struct AnswerCategory {
  NormalizedAnswer answer;  // representative (first member's answer)
  std::int64_t count = 0;
  double mean_length = kMinCategoryLength;  // clamped below at 2
  double raw_mean_length = 0.0;             // unclamped, used for tie-breaks
  std::vector<std::int64_t> member_indices;  // sample indices
  double score = 0.0;
};

struct CategoryPartition {
  std::vector<AnswerCategory> categories;  // ordered by first appearance
  std::vector<std::int64_t> no_answer_indices;
};

class NoVotableAnswers : public std::runtime_error {
 public:
  NoVotableAnswers() : std::runtime_error("no votable answers") {}
};

// Groups records with an extracted answer into equivalence classes. A record
// joins the first category all of whose members it is equivalent to.
CategoryPartition build_categories(std::span<const GenerationRecord> records);

// c / log_base(l). The default natural log matches the selection rule; any
// base > 1 yields the same argmax.
double smv_score(std::int64_t count, double length, double log_base = std::numbers::e);

enum class MajorityTieBreak {
  first_appearance,  // default
  shorter_category,  // prefer smaller mean length, then first appearance
};

std::size_t majority_vote_index(std::span<const AnswerCategory> categories,
                                MajorityTieBreak tie_break = MajorityTieBreak::first_appearance);
NormalizedAnswer majority_vote(std::span<const AnswerCategory> categories,
                               MajorityTieBreak tie_break = MajorityTieBreak::first_appearance);

// Answer of the shortest record that has one; ties by sample index.
NormalizedAnswer shortest(std::span<const GenerationRecord> records);

// Fills `score` on every category and returns the winner's index. Ties go to
// the larger count, then the smaller mean length, then first appearance.
std::size_t shortest_majority_vote_index(std::span<AnswerCategory> categories,
                                         double log_base = std::numbers::e);
NormalizedAnswer shortest_majority_vote(std::span<const AnswerCategory> categories,
                                        double log_base = std::numbers::e);

// Answer after the highest step that produced one.
std::optional<NormalizedAnswer> last_answer(const RevisionChain& chain);

enum class Method { majority_vote, shortest, shortest_majority_vote, last_revision };

const char* method_name(Method m);  // mv, shortest, smv, last
std::optional<Method> method_from_name(std::string_view name);

// Applies a parallel aggregator to one question's samples. Returns nullopt
// when no record carries an answer. `last_revision` is not a parallel method.
std::optional<NormalizedAnswer> select(Method method, std::span<const GenerationRecord> records,
                                       MajorityTieBreak tie_break = MajorityTieBreak::first_appearance);

}  // namespace tts::aggregate
