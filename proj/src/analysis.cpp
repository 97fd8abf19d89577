#include "tts/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "tts/answer.hpp"

namespace tts::analysis {

std::vector<QuestionGroup> group_by_question(std::span<const GenerationRecord> records) {
  std::vector<QuestionGroup> out;
  std::set<std::string> seen;
  std::size_t begin = 0;
  while (begin < records.size()) {
    std::size_t end = begin + 1;
    while (end < records.size() && records[end].question_id == records[begin].question_id) {
      if (records[end].sample_index <= records[end - 1].sample_index)
        throw AnalysisError("records of " + records[begin].question_id +
                            " are not in sample-index order");
      ++end;
    }
    if (!seen.insert(records[begin].question_id).second)
      throw AnalysisError("records of " + records[begin].question_id + " are not contiguous");
    out.push_back({records[begin].question_id, records.subspan(begin, end - begin)});
    begin = end;
  }
  return out;
}

QuestionIndex::QuestionIndex(std::span<const Question> questions) {
  for (const auto& q : questions) by_id_[q.id] = &q;
}

const Question& QuestionIndex::at(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) throw AnalysisError("unknown question id: " + id);
  return *it->second;
}

bool is_correct(Grade g) { return g == Grade::correct; }

namespace {

std::vector<std::size_t> length_order(std::span<const GenerationRecord> records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].token_count < records[b].token_count;
  });
  return order;
}

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Lowest-sample chain of every question, in question-id order.
std::vector<const RevisionChain*> first_chain_per_question(std::span<const RevisionChain> chains) {
  std::map<std::string, const RevisionChain*> best;
  for (const auto& c : chains) {
    if (c.steps.empty()) continue;
    auto [it, inserted] = best.try_emplace(c.question_id, &c);
    if (!inserted && c.sample_index < it->second->sample_index) it->second = &c;
  }
  std::vector<const RevisionChain*> out;
  out.reserve(best.size());
  for (const auto& [id, c] : best) out.push_back(c);
  return out;
}

bool same_answer(const std::optional<NormalizedAnswer>& a, const std::optional<NormalizedAnswer>& b) {
  if (!a || !b) return !a && !b;
  return answer::equivalent(*a, *b);
}

}  // namespace

RankGroups rank_groups(std::span<const QuestionGroup> questions, std::int64_t k) {
  if (k < 1) throw AnalysisError("k must be ≥ 1");
  RankGroups out;
  const auto ku = static_cast<std::size_t>(k);
  std::vector<double> length_sum(ku, 0.0);
  std::vector<std::int64_t> correct(ku, 0);
  std::vector<double> correct_tokens(ku, 0.0);
  std::int64_t used = 0;
  for (const auto& q : questions) {
    if (q.records.size() < ku) {
      out.excluded.push_back(q.question_id);
      continue;
    }
    const auto first = q.records.first(ku);
    const auto order = length_order(first);
    for (std::size_t r = 0; r < ku; ++r) {
      const auto& rec = first[order[r]];
      length_sum[r] += static_cast<double>(rec.token_count);
      if (is_correct(rec.grade)) {
        ++correct[r];
        correct_tokens[r] += static_cast<double>(rec.token_count);
      }
    }
    ++used;
  }
  if (used == 0) throw AnalysisError("no question has " + std::to_string(k) + " records");
  const double total_correct_tokens = std::accumulate(correct_tokens.begin(), correct_tokens.end(), 0.0);
  for (std::size_t r = 0; r < ku; ++r) {
    RankGroupStats g;
    g.rank = static_cast<std::int64_t>(r + 1);
    g.mean_length = length_sum[r] / static_cast<double>(used);
    g.accuracy = ratio(correct[r], used);
    g.n_questions = used;
    g.correct_solution_count = correct[r];
    g.correct_token_share = total_correct_tokens > 0 ? correct_tokens[r] / total_correct_tokens : 0.0;
    out.groups.push_back(g);
  }
  return out;
}

std::vector<TokenShare> token_distribution(std::span<const RankGroupStats> groups) {
  std::vector<TokenShare> out;
  for (const auto& g : groups) out.push_back({g.rank, g.correct_solution_count, g.correct_token_share});
  return out;
}

std::unordered_map<std::string, std::vector<std::int64_t>> sample_ranks(
    std::span<const QuestionGroup> questions) {
  std::unordered_map<std::string, std::vector<std::int64_t>> out;
  for (const auto& q : questions) {
    const auto order = length_order(q.records);
    // ranks[i] is the rank of q.records[i]; looked up by sample index below.
    std::int64_t max_index = 0;
    for (const auto& r : q.records) max_index = std::max(max_index, r.sample_index);
    std::vector<std::int64_t> ranks(static_cast<std::size_t>(max_index + 1), 0);
    for (std::size_t r = 0; r < order.size(); ++r)
      ranks[static_cast<std::size_t>(q.records[order[r]].sample_index)] = static_cast<std::int64_t>(r + 1);
    out.emplace(q.question_id, std::move(ranks));
  }
  return out;
}

LengthComparison correct_incorrect_lengths(std::span<const QuestionGroup> questions) {
  LengthComparison out;
  double sum_correct = 0.0;
  double sum_incorrect = 0.0;
  for (const auto& q : questions) {
    double c = 0.0, w = 0.0;
    std::int64_t nc = 0, nw = 0;
    for (const auto& r : q.records) {
      if (is_correct(r.grade)) {
        c += static_cast<double>(r.token_count);
        ++nc;
      } else {
        w += static_cast<double>(r.token_count);
        ++nw;
      }
    }
    if (nc == 0 || nw == 0) continue;
    sum_correct += c / static_cast<double>(nc);
    sum_incorrect += w / static_cast<double>(nw);
    ++out.n_questions;
  }
  if (out.n_questions == 0)
    throw AnalysisError("no question has both correct and incorrect records");
  out.mean_correct = sum_correct / static_cast<double>(out.n_questions);
  out.mean_incorrect = sum_incorrect / static_cast<double>(out.n_questions);
  return out;
}

std::string truncate_to_tokens(const GenerationRecord& record, std::int64_t limit) {
  if (limit >= record.token_count) return record.text;
  if (limit <= 0) return {};
  const auto cut = static_cast<std::int64_t>(static_cast<__int128>(record.char_count) * limit /
                                             record.token_count);
  return record.text.substr(0, utf8_offset(record.text, cut));
}

std::vector<TruncationPoint> truncation_sweep(std::span<const GenerationRecord> records,
                                              const QuestionIndex& questions,
                                              std::span<const std::int64_t> limits) {
  std::vector<TruncationPoint> out;
  for (const auto limit : limits) {
    std::int64_t correct = 0;
    for (const auto& r : records) {
      if (limit >= r.token_count) {
        correct += is_correct(r.grade);
        continue;
      }
      const auto g = answer::grade(truncate_to_tokens(r, limit), questions.at(r.question_id));
      correct += is_correct(g.grade);
    }
    out.push_back({limit, ratio(correct, static_cast<std::int64_t>(records.size())),
                   static_cast<std::int64_t>(records.size())});
  }
  return out;
}

std::int64_t count_marker(std::string_view text, std::string_view marker, bool whole_word) {
  if (marker.empty() || marker.size() > text.size()) return 0;
  auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
  auto word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  std::int64_t n = 0;
  for (std::size_t i = 0; i + marker.size() <= text.size();) {
    bool match = true;
    for (std::size_t j = 0; j < marker.size(); ++j) {
      if (lower(text[i + j]) != lower(marker[j])) {
        match = false;
        break;
      }
    }
    if (match && whole_word) {
      if (i > 0 && word(text[i - 1])) match = false;
      const std::size_t after = i + marker.size();
      if (after < text.size() && word(text[after])) match = false;
    }
    if (match) {
      ++n;
      i += marker.size();
    } else {
      ++i;
    }
  }
  return n;
}

std::optional<LinearFit> least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw AnalysisError("least_squares: size mismatch");
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return std::nullopt;
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.pearson_r = syy == 0.0 ? 0.0 : sxy / std::sqrt(sxx * syy);
  return fit;
}

MarkerCounts marker_counts(std::span<const GenerationRecord> records, std::string_view marker,
                           bool whole_word) {
  MarkerCounts out;
  std::vector<double> x, y;
  for (const auto& r : records) {
    out.counts.push_back(count_marker(r.text, marker, whole_word));
    x.push_back(static_cast<double>(r.token_count));
    y.push_back(static_cast<double>(out.counts.back()));
  }
  out.fit = least_squares(x, y);
  return out;
}

double coverage_parallel(std::span<const QuestionGroup> questions, std::int64_t k) {
  if (k < 1) throw AnalysisError("k must be ≥ 1");
  if (questions.empty()) return 0.0;
  std::int64_t covered = 0;
  for (const auto& q : questions) {
    if (q.records.size() < static_cast<std::size_t>(k))
      throw AnalysisError("question " + q.question_id + " has fewer than " + std::to_string(k) +
                          " records");
    const auto first = q.records.first(static_cast<std::size_t>(k));
    covered += std::any_of(first.begin(), first.end(),
                           [](const GenerationRecord& r) { return is_correct(r.grade); });
  }
  return ratio(covered, static_cast<std::int64_t>(questions.size()));
}

std::vector<BudgetPoint> coverage_sequential(std::span<const RevisionChain> chains,
                                             std::span<const std::int64_t> budgets) {
  const auto firsts = first_chain_per_question(chains);
  std::vector<BudgetPoint> out;
  for (const auto budget : budgets) {
    std::int64_t covered = 0;
    for (const auto* c : firsts) {
      for (const auto& s : c->steps) {
        if (s.cumulative_token_count > budget) break;
        if (is_correct(s.grade_after_step)) {
          ++covered;
          break;
        }
      }
    }
    const auto n = static_cast<std::int64_t>(firsts.size());
    out.push_back({budget, ratio(covered, n), n});
  }
  return out;
}

TransitionReport transition_rates(std::span<const RevisionChain> chains) {
  TransitionReport out;
  std::size_t max_steps = 0;
  for (const auto& c : chains) max_steps = std::max(max_steps, c.steps.size());
  std::int64_t pooled_wc = 0, pooled_w = 0, pooled_cw = 0, pooled_c = 0;
  for (std::size_t s = 1; s < max_steps; ++s) {
    TransitionStats cum, step;
    cum.step = step.step = static_cast<std::int64_t>(s);
    std::int64_t cum_wc = 0, cum_cw = 0, step_wc = 0, step_cw = 0;
    for (const auto& c : chains) {
      if (c.steps.size() <= s) continue;
      ++cum.n_chains;
      const bool initial = is_correct(c.steps[0].grade_after_step);
      const bool previous = is_correct(c.steps[s - 1].grade_after_step);
      const bool now = is_correct(c.steps[s].grade_after_step);
      if (initial) {
        ++cum.n_correct;
        cum_cw += !now;
      } else {
        ++cum.n_wrong;
        cum_wc += now;
      }
      if (previous) {
        ++step.n_correct;
        step_cw += !now;
      } else {
        ++step.n_wrong;
        step_wc += now;
      }
    }
    step.n_chains = cum.n_chains;
    cum.rate_wrong_to_correct = ratio(cum_wc, cum.n_wrong);
    cum.rate_correct_to_wrong = ratio(cum_cw, cum.n_correct);
    cum.rate_stick_wrong = cum.n_wrong ? 1.0 - cum.rate_wrong_to_correct : 0.0;
    cum.rate_stick_correct = cum.n_correct ? 1.0 - cum.rate_correct_to_wrong : 0.0;
    step.rate_wrong_to_correct = ratio(step_wc, step.n_wrong);
    step.rate_correct_to_wrong = ratio(step_cw, step.n_correct);
    step.rate_stick_wrong = step.n_wrong ? 1.0 - step.rate_wrong_to_correct : 0.0;
    step.rate_stick_correct = step.n_correct ? 1.0 - step.rate_correct_to_wrong : 0.0;
    pooled_wc += step_wc;
    pooled_w += step.n_wrong;
    pooled_cw += step_cw;
    pooled_c += step.n_correct;
    out.cumulative.push_back(cum);
    out.per_step.push_back(step);
  }
  out.pooled_wrong_to_correct = ratio(pooled_wc, pooled_w);
  out.pooled_correct_to_wrong = ratio(pooled_cw, pooled_c);

  std::int64_t stuck = 0;
  for (const auto& c : chains) {
    if (c.steps.size() < 2 || is_correct(c.steps[0].grade_after_step)) continue;
    ++out.n_initially_wrong;
    stuck += same_answer(c.steps.front().answer_after_step, c.steps.back().answer_after_step);
  }
  out.stick_rate = ratio(stuck, out.n_initially_wrong);
  return out;
}

std::vector<StepAccuracy> accuracy_by_step(std::span<const RevisionChain> chains) {
  std::size_t max_steps = 0;
  for (const auto& c : chains) max_steps = std::max(max_steps, c.steps.size());
  std::vector<StepAccuracy> out;
  for (std::size_t s = 0; s < max_steps; ++s) {
    std::int64_t n = 0, correct = 0;
    for (const auto& c : chains) {
      if (c.steps.size() <= s) continue;
      ++n;
      correct += is_correct(c.steps[s].grade_after_step);
    }
    out.push_back({static_cast<std::int64_t>(s), ratio(correct, n), n});
  }
  return out;
}

namespace {

bool aggregate_correct(std::span<const GenerationRecord> admitted, const Question& question,
                       aggregate::Method method, aggregate::MajorityTieBreak tie_break) {
  const auto selected = aggregate::select(method, admitted, tie_break);
  return answer::grade_answer(selected, question) == Grade::correct;
}

}  // namespace

std::vector<CurvePoint> accuracy_vs_budget(std::span<const QuestionGroup> questions,
                                           const QuestionIndex& index, aggregate::Method method,
                                           std::span<const std::int64_t> budgets,
                                           aggregate::MajorityTieBreak tie_break) {
  if (method == aggregate::Method::last_revision)
    throw AnalysisError("accuracy_vs_budget needs a parallel aggregator");
  std::vector<CurvePoint> out;
  for (const auto budget : budgets) {
    CurvePoint p;
    p.x = budget;
    std::int64_t correct = 0, admitted_total = 0, admitting = 0;
    for (const auto& q : questions) {
      std::size_t n = 0;
      std::int64_t used = 0;
      while (n < q.records.size() && used + q.records[n].token_count <= budget)
        used += q.records[n++].token_count;
      admitted_total += static_cast<std::int64_t>(n);
      if (n == 0) continue;
      ++admitting;
      correct += aggregate_correct(q.records.first(n), index.at(q.question_id), method, tie_break);
    }
    if (admitting == 0)
      throw AnalysisError("budget " + std::to_string(budget) + " admits no sample for any question");
    p.n_questions = static_cast<std::int64_t>(questions.size());
    p.accuracy = ratio(correct, p.n_questions);
    p.mean_samples = static_cast<double>(admitted_total) / static_cast<double>(p.n_questions);
    out.push_back(p);
  }
  return out;
}

std::vector<CurvePoint> accuracy_vs_solutions(std::span<const QuestionGroup> questions,
                                              const QuestionIndex& index, aggregate::Method method,
                                              std::span<const std::int64_t> solutions,
                                              aggregate::MajorityTieBreak tie_break) {
  if (method == aggregate::Method::last_revision)
    throw AnalysisError("accuracy_vs_solutions needs a parallel aggregator");
  std::vector<CurvePoint> out;
  for (const auto n : solutions) {
    if (n < 1) throw AnalysisError("number of solutions must be ≥ 1");
    CurvePoint p;
    p.x = n;
    std::int64_t correct = 0;
    for (const auto& q : questions) {
      if (q.records.size() < static_cast<std::size_t>(n))
        throw AnalysisError(std::to_string(n) + " solutions exceed the " +
                            std::to_string(q.records.size()) + " stored for " + q.question_id);
      correct += aggregate_correct(q.records.first(static_cast<std::size_t>(n)),
                                   index.at(q.question_id), method, tie_break);
    }
    p.n_questions = static_cast<std::int64_t>(questions.size());
    p.accuracy = ratio(correct, p.n_questions);
    p.mean_samples = static_cast<double>(n);
    out.push_back(p);
  }
  return out;
}

double last_revision_accuracy(std::span<const RevisionChain> chains, const QuestionIndex& index,
                              std::optional<std::int64_t> solutions,
                              std::optional<std::int64_t> token_budget) {
  const auto firsts = first_chain_per_question(chains);
  if (firsts.empty()) throw AnalysisError("run has no revision chains");
  std::int64_t correct = 0;
  for (const auto* c : firsts) {
    RevisionChain view;
    view.question_id = c->question_id;
    view.sample_index = c->sample_index;
    for (const auto& s : c->steps) {
      if (solutions && static_cast<std::int64_t>(view.steps.size()) >= *solutions) break;
      if (token_budget && s.cumulative_token_count > *token_budget) break;
      view.steps.push_back(s);
    }
    correct += answer::grade_answer(aggregate::last_answer(view), index.at(c->question_id)) ==
               Grade::correct;
  }
  return ratio(correct, static_cast<std::int64_t>(firsts.size()));
}

std::vector<RankRevisionPoint> rank_filtered_revision(std::span<const RevisionChain> chains,
                                                      std::span<const QuestionGroup> questions,
                                                      RankFilter filter) {
  const auto ranks = sample_ranks(questions);
  std::unordered_map<std::string, std::int64_t> group_size;
  for (const auto& q : questions) group_size[q.question_id] = static_cast<std::int64_t>(q.records.size());

  std::vector<RevisionChain> selected;
  for (const auto& c : chains) {
    const auto it = ranks.find(c.question_id);
    if (it == ranks.end() || c.sample_index < 0 ||
        c.sample_index >= static_cast<std::int64_t>(it->second.size()))
      continue;
    const auto rank = it->second[static_cast<std::size_t>(c.sample_index)];
    if (rank == 0) continue;
    const bool keep = filter == RankFilter::shortest ? rank == 1 : rank == group_size[c.question_id];
    if (keep) selected.push_back(c);
  }

  const auto accuracy = accuracy_by_step(selected);
  const auto transitions = transition_rates(selected);
  std::vector<RankRevisionPoint> out;
  for (const auto& a : accuracy) {
    RankRevisionPoint p;
    p.step = a.step;
    p.accuracy = a.accuracy;
    p.n_chains = a.n_chains;
    if (a.step >= 1) {
      const auto& t = transitions.cumulative[static_cast<std::size_t>(a.step - 1)];
      p.rate_wrong_to_correct = t.rate_wrong_to_correct;
      p.rate_correct_to_wrong = t.rate_correct_to_wrong;
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace tts::analysis
