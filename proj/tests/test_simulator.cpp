#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tts/analysis.hpp"
#include "tts/answer.hpp"
#include "tts/provider.hpp"
#include "tts/simulator.hpp"
#include "tts/store.hpp"

using namespace tts;
using namespace tts::simulator;

TEST(Simulator, Deterministic) {
  const SimParams p;
  const auto a = simulate_corpus(p, 30, 4, 11);
  const auto b = simulate_corpus(p, 30, 4, 11);
  const auto c = simulate_corpus(p, 30, 4, 12);
  ASSERT_EQ(a.records.size(), 120u);
  bool differs = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].text, b.records[i].text);
    EXPECT_EQ(a.records[i].token_count, b.records[i].token_count);
    differs |= a.records[i].text != c.records[i].text;
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.questions[7].id, "sim-000007");
}

TEST(Simulator, AllCorrectAndAllWrong) {
  SimParams p;
  p.p_initial_correct = 1.0;
  for (const auto& r : simulate_corpus(p, 50, 3, 1).records) EXPECT_EQ(r.grade, Grade::correct);
  p.p_initial_correct = 0.0;
  p.answer_alphabet_size = 3;
  const auto corpus = simulate_corpus(p, 50, 3, 1);
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& r = corpus.records[i];
    EXPECT_EQ(r.grade, Grade::incorrect);
    const auto v = std::get<IntegerAnswer>(r.extracted_answer->canonical).value;
    EXPECT_GE(v, 1);
    EXPECT_LE(v, 3);
    EXPECT_NE(std::to_string(v), corpus.questions[i / 3].gold_answer);
  }
}

TEST(Simulator, TextsGradeToTheirAnswers) {
  const auto corpus = simulate_corpus(SimParams{}, 20, 3, 4);
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& r = corpus.records[i];
    const auto g = answer::grade(r.text, corpus.questions[i / 3]);
    EXPECT_EQ(g.grade, r.grade);
    // About four characters per token.
    EXPECT_NEAR(static_cast<double>(r.char_count), 4.0 * r.token_count, 0.05 * 4.0 * r.token_count + 60.0);
  }
}

TEST(Simulator, LengthMeans) {
  SimParams p;
  p.p_initial_correct = 0.5;
  const auto corpus = simulate_corpus(p, 2000, 4, 3, TextMode::compact);
  double sum[2] = {0, 0};
  int n[2] = {0, 0};
  for (const auto& r : corpus.records) {
    const int c = r.grade == Grade::correct;
    sum[c] += static_cast<double>(r.token_count);
    ++n[c];
  }
  EXPECT_NEAR(sum[1] / n[1], p.length_mean_correct, 0.02 * p.length_mean_correct);
  EXPECT_NEAR(sum[0] / n[0], p.length_mean_incorrect, 0.02 * p.length_mean_incorrect);
}

TEST(Simulator, MarkerSlope) {
  SimParams p;
  p.marker_rate = 1.0 / 250.0;
  for (auto mode : {TextMode::full, TextMode::compact}) {
    const auto corpus = simulate_corpus(p, 200, 4, 8, mode);
    const auto m = analysis::marker_counts(corpus.records, "wait");
    ASSERT_TRUE(m.fit.has_value());
    EXPECT_NEAR(m.fit->slope, p.marker_rate, 0.05 * p.marker_rate);
    EXPECT_GT(m.fit->pearson_r, 0.99);
  }
}

TEST(Simulator, AnalyticExamples) {
  EXPECT_NEAR(analytic_accuracy(0.45, 0.05, 0.10, 0.0, 1), 1.0 / 3 + (0.45 - 1.0 / 3) * 0.85, 1e-12);
  EXPECT_NEAR(analytic_accuracy(0.45, 0.05, 0.10, 0.0, 200), 1.0 / 3, 1e-9);
  EXPECT_DOUBLE_EQ(analytic_accuracy(0.45, 0.0, 0.0, 0.0, 7), 0.45);
  EXPECT_DOUBLE_EQ(analytic_accuracy(0.45, 0.3, 0.2, 1.0, 7), 0.45);
  EXPECT_NEAR(analytic_accuracy(0.2, 0.08, 0.02, 0.5, 3), 0.8 + (0.2 - 0.8) * std::pow(0.95, 3), 1e-12);
}

TEST(Simulator, ChainsFollowAnalyticCurve) {
  SimParams p;
  p.p_initial_correct = 0.3;
  p.p_wrong_to_correct = 0.08;
  p.p_correct_to_wrong = 0.02;
  p.stick_bias = 0.3;
  const int n = 4000;
  const auto corpus = simulate_corpus(p, n, 1, 5, TextMode::compact);
  std::vector<int> correct(9, 0);
  for (int i = 0; i < n; ++i) {
    const auto sim = simulate_chain(p, 8, corpus.records[i], corpus.questions[i], 1000 + i, TextMode::compact);
    ASSERT_EQ(sim.chain.steps.size(), 9u);
    for (int s = 0; s <= 8; ++s) correct[s] += sim.chain.steps[s].grade_after_step == Grade::correct;
  }
  for (int s = 0; s <= 8; ++s) {
    const double expected = analytic_accuracy(p, s);
    EXPECT_NEAR(correct[s] / double(n), expected, 4 * oracle::standard_error(expected, n)) << s;
  }
}

TEST(Simulator, ChainStructure) {
  const SimParams p;
  const auto corpus = simulate_corpus(p, 1, 1, 2);
  const auto sim = simulate_chain(p, 5, corpus.records[0], corpus.questions[0], 9);
  sim.chain.check_invariants();
  EXPECT_EQ(sim.completion_tokens.size(), 6u);
  for (std::size_t s = 1; s < sim.chain.steps.size(); ++s) {
    const auto& step = sim.chain.steps[s];
    EXPECT_EQ(step.cumulative_token_count,
              sim.chain.steps[s - 1].cumulative_token_count + sim.completion_tokens[s]);
    EXPECT_EQ(step.chosen_prompt, "Wait");
    EXPECT_EQ(answer::grade(step.appended_text, corpus.questions[0]).grade, step.grade_after_step);
  }
}

TEST(Simulator, ParamsValidation) {
  SimParams p;
  EXPECT_TRUE(validate(p).empty());
  p.p_initial_correct = 1.5;
  p.answer_alphabet_size = 1;
  EXPECT_EQ(validate(p).size(), 2u);
  EXPECT_THROW(simulate_corpus(p, 1, 1, 1), std::invalid_argument);
  EXPECT_THROW(json({{"p_initial", 0.4}}).get<SimParams>(), std::invalid_argument);
  const auto round = json(SimParams{}).get<SimParams>();
  EXPECT_EQ(json(round), json(SimParams{}));
  EXPECT_EQ(json({{"stick_bias", 0.2}}).get<SimParams>().stick_bias, 0.2);
}

TEST(Simulator, WrittenRunReplays) {
  testutil::TempDir tmp;
  SimulatedRunOptions o;
  o.n_questions = 5;
  o.k = 2;
  o.steps = 3;
  write_simulated_run(tmp.path(), "sim", SimParams{}, o);
  const auto loaded = store::load_run(tmp.path(), "sim");
  EXPECT_TRUE(loaded.manifest.sealed);
  EXPECT_EQ(loaded.manifest.source, "simulator");
  EXPECT_EQ(loaded.records.size(), 10u);
  EXPECT_TRUE(loaded.chains.empty());  // continuations live under replay/ until revised
  provider::ReplayProvider replay(loaded.dir);
  EXPECT_EQ(replay.size(), 10u + 30u);
  const auto c = replay.complete({"sim-000001", 1, 2}, {}, {});
  EXPECT_NE(c.text.find("\\boxed{"), std::string::npos);
  EXPECT_THROW(replay.complete({"sim-000001", 1, 4}, {}, {}), provider::ProviderError);
}
