#pragma once

// Reference implementations written independently of the library, used as
// ground truth by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tts/core.hpp"

namespace oracle {

// Forward scan: every "\boxed{" start is matched on its own; the balanced one
// with the greatest start wins. "\{" and "\}" are literals.
inline std::optional<std::string> last_boxed(std::string_view text) {
  const std::string_view open = "\\boxed{";
  std::optional<std::string> found;
  for (std::size_t start = 0; start + open.size() <= text.size(); ++start) {
    if (text.compare(start, open.size(), open) != 0) continue;
    int depth = 1;
    std::size_t i = start + open.size();
    while (i < text.size()) {
      if (text[i] == '\\' && i + 1 < text.size() && (text[i + 1] == '{' || text[i + 1] == '}')) {
        i += 2;
        continue;
      }
      if (text[i] == '{') ++depth;
      if (text[i] == '}' && --depth == 0) break;
      ++i;
    }
    if (i < text.size()) found = std::string(text.substr(start + open.size(), i - start - open.size()));
  }
  return found;
}

inline std::string random_brace_text(std::mt19937_64& rng, int max_tokens = 24) {
  static const std::vector<std::string> tokens{"\\boxed{", "{", "}", "x", "7", " ", "\\{", "\\}",
                                               "\\", "\\frac", "ab", "\\boxed"};
  std::uniform_int_distribution<int> len(0, max_tokens);
  std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1);
  std::string out;
  for (int n = len(rng); n > 0; --n) out += tokens[pick(rng)];
  return out;
}

// Aggregators over integer-answer samples, straight from their definitions.
struct Sample {
  std::optional<std::int64_t> answer;
  std::int64_t tokens = 0;
};

struct Category {
  std::int64_t answer = 0;
  std::int64_t count = 0;
  std::int64_t token_sum = 0;
  std::size_t first = 0;  // position of the first member
};

inline std::vector<Category> categories(const std::vector<Sample>& samples) {
  std::map<std::int64_t, Category> by_answer;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].answer) continue;
    auto [it, fresh] = by_answer.try_emplace(*samples[i].answer);
    if (fresh) {
      it->second.answer = *samples[i].answer;
      it->second.first = i;
    }
    ++it->second.count;
    it->second.token_sum += samples[i].tokens;
  }
  std::vector<Category> out;
  for (const auto& [a, c] : by_answer) out.push_back(c);
  std::sort(out.begin(), out.end(), [](const Category& a, const Category& b) { return a.first < b.first; });
  return out;
}

inline std::optional<std::int64_t> majority_vote(const std::vector<Sample>& samples) {
  const auto cats = categories(samples);
  std::optional<std::int64_t> best;
  std::int64_t best_count = -1;
  std::size_t best_first = 0;
  for (const auto& c : cats) {
    if (c.count > best_count || (c.count == best_count && c.first < best_first)) {
      best = c.answer;
      best_count = c.count;
      best_first = c.first;
    }
  }
  return best;
}

inline std::optional<std::int64_t> shortest(const std::vector<Sample>& samples) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].answer) continue;
    if (!best || samples[i].tokens < samples[*best].tokens) best = i;
  }
  if (!best) return std::nullopt;
  return samples[*best].answer;
}

inline __int128 ipow(__int128 b, std::int64_t e) {
  __int128 r = 1;
  while (e-- > 0) r *= b;
  return r;
}

// Sign of c_a / ln(l_a) - c_b / ln(l_b) with l = max(2, sum / n), exact:
// compares l_b^c_a with l_a^c_b as integer fractions.
inline int compare_scores(const Category& a, const Category& b) {
  auto clamp = [](const Category& c) {
    return c.token_sum < 2 * c.count ? std::pair<__int128, __int128>{2, 1}
                                     : std::pair<__int128, __int128>{c.token_sum, c.count};
  };
  const auto [sa, na] = clamp(a);
  const auto [sb, nb] = clamp(b);
  // (sb/nb)^ca vs (sa/na)^cb
  const __int128 lhs = ipow(sb, a.count) * ipow(na, b.count);
  const __int128 rhs = ipow(sa, b.count) * ipow(nb, a.count);
  return lhs > rhs ? 1 : (lhs < rhs ? -1 : 0);
}

inline std::optional<std::int64_t> shortest_majority_vote(const std::vector<Sample>& samples) {
  const auto cats = categories(samples);
  if (cats.empty()) return std::nullopt;
  const Category* best = &cats.front();
  for (const auto& c : cats) {
    if (&c == best) continue;
    const int cmp = compare_scores(c, *best);
    bool better = cmp > 0;
    if (cmp == 0) {
      // larger count, then smaller mean (cross-multiplied), then earlier
      if (c.count != best->count) better = c.count > best->count;
      else if (c.token_sum * best->count != best->token_sum * c.count)
        better = c.token_sum * best->count < best->token_sum * c.count;
      else better = c.first < best->first;
    }
    if (better) best = &c;
  }
  return best->answer;
}

struct AnswerPair {
  std::string kind;
  std::string a;
  std::string b;
  bool equivalent = false;
};

inline std::vector<AnswerPair> load_answer_pairs(const std::string& path) {
  std::ifstream in(path);
  std::vector<AnswerPair> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    if (cells.size() != 4) continue;
    out.push_back({cells[0], cells[1], cells[2], cells[3] == "1"});
  }
  return out;
}

// Two-sided normal check helpers.
inline double standard_error(double p, double n) { return std::sqrt(std::max(p * (1 - p), 1e-12) / n); }

}  // namespace oracle
