#include "tts/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "tts/answer.hpp"

namespace tts::aggregate {

CategoryPartition build_categories(std::span<const GenerationRecord> records) {
  CategoryPartition out;
  std::vector<std::vector<const GenerationRecord*>> members;
  for (const auto& r : records) {
    if (!r.extracted_answer) {
      out.no_answer_indices.push_back(r.sample_index);
      continue;
    }
    bool placed = false;
    for (std::size_t c = 0; c < members.size() && !placed; ++c) {
      const bool fits = std::all_of(members[c].begin(), members[c].end(), [&](const auto* m) {
        return answer::equivalent(*m->extracted_answer, *r.extracted_answer);
      });
      if (fits) {
        members[c].push_back(&r);
        placed = true;
      }
    }
    if (!placed) members.push_back({&r});
  }
  if (members.empty()) throw NoVotableAnswers();

  out.categories.reserve(members.size());
  for (const auto& group : members) {
    AnswerCategory cat;
    cat.answer = *group.front()->extracted_answer;
    cat.count = static_cast<std::int64_t>(group.size());
    double total = 0.0;
    for (const auto* m : group) {
      cat.member_indices.push_back(m->sample_index);
      total += static_cast<double>(m->token_count);
    }
    cat.raw_mean_length = total / static_cast<double>(group.size());
    cat.mean_length = std::max(cat.raw_mean_length, kMinCategoryLength);
    cat.score = smv_score(cat.count, cat.mean_length);
    out.categories.push_back(std::move(cat));
  }
  return out;
}

double smv_score(std::int64_t count, double length, double log_base) {
  const double l = std::max(length, kMinCategoryLength);
  return static_cast<double>(count) / (std::log(l) / std::log(log_base));
}

std::size_t majority_vote_index(std::span<const AnswerCategory> categories,
                                MajorityTieBreak tie_break) {
  if (categories.empty()) throw NoVotableAnswers();
  std::size_t best = 0;
  for (std::size_t i = 1; i < categories.size(); ++i) {
    const auto& c = categories[i];
    const auto& b = categories[best];
    if (c.count > b.count ||
        (c.count == b.count && tie_break == MajorityTieBreak::shorter_category &&
         c.raw_mean_length < b.raw_mean_length))
      best = i;
  }
  return best;
}

NormalizedAnswer majority_vote(std::span<const AnswerCategory> categories,
                               MajorityTieBreak tie_break) {
  return categories[majority_vote_index(categories, tie_break)].answer;
}

NormalizedAnswer shortest(std::span<const GenerationRecord> records) {
  const GenerationRecord* best = nullptr;
  for (const auto& r : records) {
    if (!r.extracted_answer) continue;
    if (!best || r.token_count < best->token_count ||
        (r.token_count == best->token_count && r.sample_index < best->sample_index))
      best = &r;
  }
  if (!best) throw NoVotableAnswers();
  return *best->extracted_answer;
}

namespace {

// c / ln(l): the argmax of c / log_b(l) for every base b > 1.
double selection_key(const AnswerCategory& c) {
  return static_cast<double>(c.count) / std::log(std::max(c.mean_length, kMinCategoryLength));
}

// Scores within rounding of each other are ties (1 / ln 4 and 2 / ln 16).
bool same_score(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); }

}  // namespace

std::size_t shortest_majority_vote_index(std::span<AnswerCategory> categories, double log_base) {
  if (categories.empty()) throw NoVotableAnswers();
  std::vector<double> keys;
  keys.reserve(categories.size());
  for (auto& c : categories) {
    c.score = smv_score(c.count, c.mean_length, log_base);
    keys.push_back(selection_key(c));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < categories.size(); ++i) {
    const auto& c = categories[i];
    const auto& b = categories[best];
    if (same_score(keys[i], keys[best])) {
      if (c.count > b.count || (c.count == b.count && c.raw_mean_length < b.raw_mean_length)) best = i;
    } else if (keys[i] > keys[best]) {
      best = i;
    }
  }
  return best;
}

NormalizedAnswer shortest_majority_vote(std::span<const AnswerCategory> categories,
                                        double log_base) {
  std::vector<AnswerCategory> scored(categories.begin(), categories.end());
  return scored[shortest_majority_vote_index(scored, log_base)].answer;
}

std::optional<NormalizedAnswer> last_answer(const RevisionChain& chain) {
  for (auto it = chain.steps.rbegin(); it != chain.steps.rend(); ++it)
    if (it->answer_after_step) return it->answer_after_step;
  return std::nullopt;
}

const char* method_name(Method m) {
  switch (m) {
    case Method::majority_vote: return "mv";
    case Method::shortest: return "shortest";
    case Method::shortest_majority_vote: return "smv";
    case Method::last_revision: return "last";
  }
  return "mv";
}

std::optional<Method> method_from_name(std::string_view name) {
  if (name == "mv") return Method::majority_vote;
  if (name == "shortest") return Method::shortest;
  if (name == "smv") return Method::shortest_majority_vote;
  if (name == "last") return Method::last_revision;
  return std::nullopt;
}

std::optional<NormalizedAnswer> select(Method method, std::span<const GenerationRecord> records,
                                       MajorityTieBreak tie_break) {
  try {
    switch (method) {
      case Method::shortest:
        return shortest(records);
      case Method::majority_vote: {
        const auto partition = build_categories(records);
        return majority_vote(partition.categories, tie_break);
      }
      case Method::shortest_majority_vote: {
        auto partition = build_categories(records);
        return partition.categories[shortest_majority_vote_index(partition.categories)].answer;
      }
      case Method::last_revision:
        throw std::invalid_argument("last_revision aggregates revision chains, not samples");
    }
  } catch (const NoVotableAnswers&) {
  }
  return std::nullopt;
}

}  // namespace tts::aggregate
