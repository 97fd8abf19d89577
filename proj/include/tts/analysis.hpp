#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tts/aggregate.hpp"
#include "tts/core.hpp"

// Analyses over stored records and chains. All functions are pure; no_answer
// counts as incorrect everywhere.
namespace tts::analysis {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::int64_t kUnlimited = std::numeric_limits<std::int64_t>::max();

// One question's records in sample-index order (a view into the input).
struct QuestionGroup {
  std::string question_id;
  std::span<const GenerationRecord> records;
};

// Input must be sorted by (question id, sample index), as load_run returns it
// and simulate_corpus produces it.
std::vector<QuestionGroup> group_by_question(std::span<const GenerationRecord> records);

class QuestionIndex {
 public:
  explicit QuestionIndex(std::span<const Question> questions);
  const Question& at(const std::string& id) const;

 private:
  std::unordered_map<std::string, const Question*> by_id_;
};

bool is_correct(Grade g);

// ---- length ranks -------------------------------------------------------

struct RankGroupStats {
  std::int64_t rank = 0;  // 1 = shortest
  double mean_length = 0.0;
  double accuracy = 0.0;
  std::int64_t n_questions = 0;
  std::int64_t correct_solution_count = 0;
  double correct_token_share = 0.0;
};

struct RankGroups {
  std::vector<RankGroupStats> groups;
  std::vector<std::string> excluded;  // questions with fewer than k records
};

// Stable sort of each question's first k records by token count; the i-th
// ranked records across questions form group i.
RankGroups rank_groups(std::span<const QuestionGroup> questions, std::int64_t k);

struct TokenShare {
  std::int64_t rank = 0;
  std::int64_t correct_solution_count = 0;
  double correct_token_share = 0.0;
};

std::vector<TokenShare> token_distribution(std::span<const RankGroupStats> groups);

// Rank (1-based) of every (question, sample) under the same stable sort.
std::unordered_map<std::string, std::vector<std::int64_t>> sample_ranks(
    std::span<const QuestionGroup> questions);

// ---- correct vs incorrect lengths ---------------------------------------

struct LengthComparison {
  double mean_correct = 0.0;
  double mean_incorrect = 0.0;
  std::int64_t n_questions = 0;
};

// Two-stage mean over questions that have both correct and incorrect records.
LengthComparison correct_incorrect_lengths(std::span<const QuestionGroup> questions);

// ---- truncation ---------------------------------------------------------

// First `limit` tokens of the record's text: a proportional cut at
// char_count * limit / token_count code points.
std::string truncate_to_tokens(const GenerationRecord& record, std::int64_t limit);

struct TruncationPoint {
  std::int64_t limit = 0;
  double accuracy = 0.0;
  std::int64_t n_records = 0;
};

std::vector<TruncationPoint> truncation_sweep(std::span<const GenerationRecord> records,
                                              const QuestionIndex& questions,
                                              std::span<const std::int64_t> limits);

// ---- markers ------------------------------------------------------------

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double pearson_r = 0.0;
};

struct MarkerCounts {
  std::vector<std::int64_t> counts;  // per record, input order
  std::optional<LinearFit> fit;      // count against token_count
};

// Case-insensitive substring count; with whole_word the match must not touch
// ASCII letters or digits on either side.
std::int64_t count_marker(std::string_view text, std::string_view marker, bool whole_word = false);

MarkerCounts marker_counts(std::span<const GenerationRecord> records, std::string_view marker,
                           bool whole_word = false);

// Ordinary least squares. nullopt with fewer than two points or constant x.
std::optional<LinearFit> least_squares(std::span<const double> x, std::span<const double> y);

// ---- coverage -----------------------------------------------------------

// Fraction of questions whose first k samples include a correct one.
double coverage_parallel(std::span<const QuestionGroup> questions, std::int64_t k);

struct BudgetPoint {
  std::int64_t budget = 0;
  double value = 0.0;
  std::int64_t n_questions = 0;
};

// Per question (lowest sample index with a chain): a correct step among those
// with cumulative tokens <= budget.
std::vector<BudgetPoint> coverage_sequential(std::span<const RevisionChain> chains,
                                             std::span<const std::int64_t> budgets);

// ---- transitions --------------------------------------------------------

struct TransitionStats {
  std::int64_t step = 0;
  double rate_wrong_to_correct = 0.0;
  double rate_correct_to_wrong = 0.0;
  double rate_stick_wrong = 0.0;
  double rate_stick_correct = 0.0;
  std::int64_t n_chains = 0;
  std::int64_t n_wrong = 0;    // stratum sizes (initial grade, or previous step's)
  std::int64_t n_correct = 0;
};

struct TransitionReport {
  std::vector<TransitionStats> cumulative;  // relative to step 0
  std::vector<TransitionStats> per_step;    // relative to step s - 1
  double pooled_wrong_to_correct = 0.0;     // per-step estimates over all steps
  double pooled_correct_to_wrong = 0.0;
  // Initially wrong chains whose final answer equals the original one.
  double stick_rate = 0.0;
  std::int64_t n_initially_wrong = 0;
};

TransitionReport transition_rates(std::span<const RevisionChain> chains);

struct StepAccuracy {
  std::int64_t step = 0;
  double accuracy = 0.0;
  std::int64_t n_chains = 0;
};

// Accuracy at each step over the chains that reached it.
std::vector<StepAccuracy> accuracy_by_step(std::span<const RevisionChain> chains);

// ---- budgets and aggregators -------------------------------------------

struct CurvePoint {
  std::int64_t x = 0;  // token budget or number of solutions
  double accuracy = 0.0;
  double mean_samples = 0.0;
  std::int64_t n_questions = 0;
};

// Admits samples in index order while cumulative tokens stay within the
// budget. Throws when no question admits a sample.
std::vector<CurvePoint> accuracy_vs_budget(std::span<const QuestionGroup> questions,
                                           const QuestionIndex& index, aggregate::Method method,
                                           std::span<const std::int64_t> budgets,
                                           aggregate::MajorityTieBreak tie_break = {});

// First n samples of every question. Throws when n exceeds a question's records.
std::vector<CurvePoint> accuracy_vs_solutions(std::span<const QuestionGroup> questions,
                                              const QuestionIndex& index, aggregate::Method method,
                                              std::span<const std::int64_t> solutions,
                                              aggregate::MajorityTieBreak tie_break = {});

// Accuracy of the final answer of each question's lowest-sample chain, using
// steps 0..n-1 (by count) or steps within a token budget.
double last_revision_accuracy(std::span<const RevisionChain> chains, const QuestionIndex& index,
                              std::optional<std::int64_t> solutions,
                              std::optional<std::int64_t> token_budget);

// ---- rank-filtered revision --------------------------------------------

enum class RankFilter { shortest, longest };

struct RankRevisionPoint {
  std::int64_t step = 0;
  double accuracy = 0.0;
  double rate_wrong_to_correct = 0.0;
  double rate_correct_to_wrong = 0.0;
  std::int64_t n_chains = 0;
};

// Curves over chains whose initial sample was its question's shortest (rank 1)
// or longest (last rank).
std::vector<RankRevisionPoint> rank_filtered_revision(std::span<const RevisionChain> chains,
                                                      std::span<const QuestionGroup> questions,
                                                      RankFilter filter);

}  // namespace tts::analysis
