#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tts/answer.hpp"

using namespace tts;
using tts::answer::equivalent;
using tts::answer::extract_boxed;
using tts::answer::normalize;

namespace {

NormalizedAnswer math(std::string_view s) { return normalize(s, QuestionKind::math_freeform); }
NormalizedAnswer mc(std::string_view s) { return normalize(s, QuestionKind::multiple_choice); }

Question math_question(std::string gold) {
  Question q;
  q.id = "q";
  q.prompt_text = "?";
  q.gold_answer = std::move(gold);
  return q;
}

}  // namespace

TEST(ExtractBoxed, LastOccurrence) {
  EXPECT_EQ(extract_boxed("so is the answer 756? final answer \\boxed{756}"), "756");
  EXPECT_EQ(extract_boxed("no box here"), std::nullopt);
  EXPECT_EQ(extract_boxed("\\boxed{\\frac{1}{2}} then \\boxed{3}"), "3");
}

TEST(ExtractBoxed, NestedAndUnbalanced) {
  EXPECT_EQ(extract_boxed("\\boxed{\\frac{1}{2}}"), "\\frac{1}{2}");
  EXPECT_EQ(extract_boxed("\\boxed{1} and \\boxed{2"), "1");
  EXPECT_EQ(extract_boxed("\\boxed{"), std::nullopt);
  EXPECT_EQ(extract_boxed("\\boxed{\\{1\\}}"), "\\{1\\}");
  EXPECT_EQ(extract_boxed("\\boxed{}"), "");
}

TEST(ExtractBoxed, MatchesScanningOracle) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 5000; ++i) {
    const auto text = oracle::random_brace_text(rng);
    ASSERT_EQ(extract_boxed(text), oracle::last_boxed(text)) << text;
  }
}

TEST(Normalize, Kinds) {
  EXPECT_EQ(math("\\frac{1}{2}").canonical, CanonicalAnswer(RationalAnswer{1, 2}));
  EXPECT_EQ(mc(" (C) ").canonical, CanonicalAnswer(ChoiceAnswer{'C'}));
  EXPECT_EQ(math("756").canonical, CanonicalAnswer(IntegerAnswer{756}));
  EXPECT_EQ(math("4/6").canonical, CanonicalAnswer(RationalAnswer{2, 3}));
  EXPECT_EQ(math("\\frac{3}{-6}").canonical, CanonicalAnswer(RationalAnswer{-1, 2}));
  EXPECT_EQ(math("$\\left( x \\right)$").canonical, CanonicalAnswer(SymbolicAnswer{"(x)"}));
  EXPECT_EQ(math("756.").canonical, CanonicalAnswer(IntegerAnswer{756}));
  EXPECT_EQ(math("0.50").canonical, CanonicalAnswer(DecimalAnswer{50, 2, 2}));
  EXPECT_EQ(math("x").raw, "x");
}

TEST(Normalize, EmptyIsUnusable) {
  EXPECT_THROW(math("  $ $ "), answer::UnusableAnswer);
  EXPECT_THROW(math("."), answer::UnusableAnswer);
  EXPECT_FALSE(answer::try_normalize("{}", QuestionKind::math_freeform).has_value());
}

TEST(Normalize, Idempotent) {
  for (const char* raw : {"\\frac{6}{4}", "-0.250", "1,000", "\\text{(B)}", "x^{2} + 1", "3.",
                          "\\dfrac{\\pi}{2}", "-7", "$$\\{1, 2\\}$$"}) {
    const auto once = math(raw);
    const auto twice = math(render(once.canonical));
    EXPECT_EQ(once.canonical, twice.canonical) << raw;
    EXPECT_EQ(answer::clean(answer::clean(raw)), answer::clean(raw)) << raw;
  }
}

TEST(Equivalent, SpecExamples) {
  EXPECT_TRUE(equivalent(math("1/2"), math("0.5")));
  EXPECT_TRUE(equivalent(math("756"), math("756")));
  EXPECT_FALSE(equivalent(math("x+1"), math("1+x")));
  EXPECT_TRUE(equivalent(math("0.333"), math("1/3")));
  EXPECT_FALSE(equivalent(math("0.333"), math("0.3333")));
}

TEST(Equivalent, ReflexiveAndSymmetric) {
  std::vector<NormalizedAnswer> all;
  for (const char* raw : {"1/2", "0.5", "0.50", "\\frac{2}{4}", "3", "3.0", "-3", "x", "1/3",
                          "0.33", "0.333", "2/3", "0.67", "0"})
    all.push_back(math(raw));
  for (const auto& a : all) {
    EXPECT_TRUE(equivalent(a, a)) << a.raw;
    for (const auto& b : all) EXPECT_EQ(equivalent(a, b), equivalent(b, a)) << a.raw << " " << b.raw;
  }
}

TEST(Equivalent, RandomFractionForms) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> num(-5000, 5000), den(1, 400);
  for (int i = 0; i < 2000; ++i) {
    const std::int64_t a = num(rng);
    std::int64_t b = den(rng);
    if (rng() % 2) b = -b;
    const auto slash = math(std::to_string(a) + "/" + std::to_string(b));
    const auto frac = math("\\frac{" + std::to_string(a) + "}{" + std::to_string(b) + "}");
    ASSERT_TRUE(equivalent(slash, frac)) << a << "/" << b;
    // Terminating decimal within 12 places: denominator of the reduced form is 2^x 5^y.
    std::int64_t d = std::abs(b) / std::gcd(std::abs(a), std::abs(b));
    int twos = 0, fives = 0;
    while (d % 2 == 0) d /= 2, ++twos;
    while (d % 5 == 0) d /= 5, ++fives;
    const int places = std::max(twos, fives);
    if (d != 1 || places > 12) continue;
    // Exact decimal by long division.
    const bool negative = (a < 0) != (b < 0) && a != 0;
    std::int64_t n = std::abs(a), m = std::abs(b);
    std::string text = (negative ? "-" : "") + std::to_string(n / m);
    n %= m;
    if (places > 0) {
      text += ".";
      for (int p = 0; p < places; ++p) {
        n *= 10;
        text += static_cast<char>('0' + n / m);
        n %= m;
      }
    }
    ASSERT_TRUE(equivalent(math(text), slash)) << text << " vs " << a << "/" << b;
  }
}

TEST(Equivalent, CuratedPairs) {
  const auto pairs = oracle::load_answer_pairs(TTS_TEST_DATA "/answer_pairs.tsv");
  ASSERT_GE(pairs.size(), 200u);
  for (const auto& p : pairs) {
    const auto kind = question_kind_from_string(p.kind);
    const auto a = answer::try_normalize(p.a, kind);
    const auto b = answer::try_normalize(p.b, kind);
    ASSERT_TRUE(a && b) << p.a << " | " << p.b;
    EXPECT_EQ(equivalent(*a, *b), p.equivalent) << p.kind << ": " << p.a << " | " << p.b;
  }
}

TEST(Grade, Examples) {
  const auto q = math_question("756");
  auto g = answer::grade("thus \\boxed{756}", q);
  EXPECT_EQ(g.grade, Grade::correct);
  EXPECT_EQ(g.answer->canonical, CanonicalAnswer(IntegerAnswer{756}));
  g = answer::grade("no box", q);
  EXPECT_EQ(g.grade, Grade::no_answer);
  EXPECT_FALSE(g.answer.has_value());
  g = answer::grade("\\boxed{755}", q);
  EXPECT_EQ(g.grade, Grade::incorrect);
  EXPECT_EQ(answer::grade("\\boxed{ }", q).grade, Grade::no_answer);
}

TEST(Grade, MultipleChoice) {
  Question q;
  q.id = "g1";
  q.prompt_text = "Pick";
  q.kind = QuestionKind::multiple_choice;
  q.choices = {"one", "two", "three", "four"};
  q.gold_answer = "C";
  EXPECT_EQ(answer::grade("\\boxed{(C)}", q).grade, Grade::correct);
  EXPECT_EQ(answer::grade("\\boxed{c}", q).grade, Grade::correct);
  EXPECT_EQ(answer::grade("\\boxed{B}", q).grade, Grade::incorrect);
}
