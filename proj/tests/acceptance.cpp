// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>

#include "oracles.hpp"
#include "pipeline.hpp"
#include "test_util.hpp"
#include "tts/aggregate.hpp"
#include "tts/analysis.hpp"
#include "tts/answer.hpp"
#include "tts/simulator.hpp"
#include "tts/store.hpp"

using namespace tts;
namespace sim = tts::simulator;
namespace an = tts::analysis;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

GenerationRecord sample_record(std::int64_t index, std::optional<std::int64_t> value, std::int64_t tokens) {
  std::optional<NormalizedAnswer> a;
  if (value) a = NormalizedAnswer{std::to_string(*value), IntegerAnswer{*value}};
  return GenerationRecord::make("q", index, "t", tokens, a, a ? Grade::incorrect : Grade::no_answer, false, 0);
}

std::string label(const std::optional<NormalizedAnswer>& a) { return a ? render(a->canonical) : "-"; }
std::string label(const std::optional<std::int64_t>& a) { return a ? std::to_string(*a) : "-"; }

// ---- 1 --------------------------------------------------------------------

Outcome aggregator_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(1, 6), alphabet(1, 3);
  std::uniform_int_distribution<std::int64_t> len(2, 32768), narrow(2, 16);
  int mismatches = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const int n = size(rng);
    std::vector<GenerationRecord> records;
    std::vector<oracle::Sample> samples;
    for (int i = 0; i < n; ++i) {
      const std::int64_t a = alphabet(rng);
      // A quarter of the trials use a narrow length range so ties occur.
      const std::int64_t tokens = t % 4 == 0 ? narrow(rng) : len(rng);
      records.push_back(sample_record(i, a, tokens));
      samples.push_back({a, tokens});
    }
    mismatches += label(aggregate::select(aggregate::Method::majority_vote, records)) !=
                  label(oracle::majority_vote(samples));
    mismatches += label(aggregate::select(aggregate::Method::shortest, records)) != label(oracle::shortest(samples));
    mismatches += label(aggregate::select(aggregate::Method::shortest_majority_vote, records)) !=
                  label(oracle::shortest_majority_vote(samples));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {mismatches == 0 && secs < 60,
          format("%d trials x 3 aggregators, %d mismatches, %.1f s", trials, mismatches, secs)};
}

// ---- 2 --------------------------------------------------------------------

Outcome base_invariance() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::int64_t> count(1, 16), len(1, 40000), cats(1, 8);
  int differ = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<aggregate::AnswerCategory> c(static_cast<std::size_t>(cats(rng)));
    for (auto& x : c) {
      x.count = count(rng);
      // Integer means make exact score ties frequent.
      x.raw_mean_length = static_cast<double>(t % 2 ? len(rng) : std::int64_t{1} << (1 + rng() % 14));
      x.mean_length = std::max(x.raw_mean_length, aggregate::kMinCategoryLength);
    }
    const auto e = aggregate::shortest_majority_vote_index(c);
    differ += aggregate::shortest_majority_vote_index(c, 2.0) != e;
    differ += aggregate::shortest_majority_vote_index(c, 10.0) != e;
  }
  return {differ == 0, format("1000 category sets, bases 2/e/10, %d differing selections", differ)};
}

// ---- 3 --------------------------------------------------------------------

Outcome shortest_equals_smv() {
  int checked = 0, differ = 0;
  for (std::int64_t seed = 1; seed <= 4; ++seed) {
    for (double dispersion : {0.03, 0.25, 0.6}) {
      sim::SimParams p;
      p.length_dispersion = dispersion;
      p.answer_alphabet_size = 2 + seed % 3;
      const auto corpus = sim::simulate_corpus(p, 500, 16, seed, sim::TextMode::compact);
      const an::QuestionIndex index(corpus.questions);
      const auto groups = an::group_by_question(corpus.records);
      const std::vector<std::int64_t> two{2};
      const double a = an::accuracy_vs_solutions(groups, index, aggregate::Method::shortest, two)[0].accuracy;
      const double b =
          an::accuracy_vs_solutions(groups, index, aggregate::Method::shortest_majority_vote, two)[0].accuracy;
      ++checked;
      differ += a != b;
    }
  }
  // Through the command line as well.
  testutil::TempDir tmp;
  bool cli_ok = pipeline::invoke(tmp.path(), {"simulate", "--questions", "300", "--k", "16", "--out-run", "sv",
                                              "--text-mode", "compact"})
                    .code == 0 &&
                pipeline::invoke(tmp.path(), {"aggregate", "--run", "sv", "--solutions", "2", "--method",
                                              "shortest", "--method", "smv"})
                        .code == 0;
  if (cli_ok) {
    const auto csv = read_file(tmp.path() / "sv" / "analysis" / "sv_aggregate_solutions-2.csv");
    std::vector<std::string> acc;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) acc.push_back(line.substr(line.rfind(',') + 1));
    cli_ok = acc.size() == 2 && acc[0] == acc[1];
  }
  std::string detail = format("%d simulator corpora, %d differing; CLI columns %s", checked, differ,
                              cli_ok ? "identical" : "DIFFER");
  bool pass = differ == 0 && cli_ok;

  // Numeric comparison needs recorded generations: TTS_REF_RUN=<runs dir>:<run id>
  // and TTS_REF_SMV_AT_2=<accuracy in percent at 2 solutions>.
  const char* run = std::getenv("TTS_REF_RUN");
  const char* expected = std::getenv("TTS_REF_SMV_AT_2");
  if (run && expected) {
    const std::string where(run);
    const auto colon = where.rfind(':');
    const auto loaded = store::load_run(where.substr(0, colon), where.substr(colon + 1));
    const an::QuestionIndex index(loaded.questions);
    const std::vector<std::int64_t> two{2};
    const double acc = 100 * an::accuracy_vs_solutions(an::group_by_question(loaded.records), index,
                                                       aggregate::Method::shortest_majority_vote, two)[0]
                                 .accuracy;
    const bool close = std::abs(acc - std::atof(expected)) <= 0.01;
    pass = pass && close;
    detail += format("; recorded run %.2f vs %s", acc, expected);
  } else {
    detail += "; numeric check skipped (no recorded generations supplied)";
  }
  return {pass, detail};
}

// ---- 4 and 10 -------------------------------------------------------------

// Criterion-4 corpus. The dispersion and alphabet are not fixed by the
// criterion; see README.
sim::SimParams smv_params() {
  sim::SimParams p;
  p.p_initial_correct = 0.45;
  p.length_mean_correct = 4000;
  p.length_mean_incorrect = 8000;
  p.length_dispersion = 0.03;
  p.answer_alphabet_size = 3;
  return p;
}

Outcome smv_advantage() {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = true;
  for (std::int64_t seed = 1; seed <= 5; ++seed) {
    const auto corpus = sim::simulate_corpus(smv_params(), 2000, 16, seed, sim::TextMode::compact);
    const an::QuestionIndex index(corpus.questions);
    const auto groups = an::group_by_question(corpus.records);
    const std::vector<std::int64_t> k{16};
    const double mv = an::accuracy_vs_solutions(groups, index, aggregate::Method::majority_vote, k)[0].accuracy;
    const double smv =
        an::accuracy_vs_solutions(groups, index, aggregate::Method::shortest_majority_vote, k)[0].accuracy;
    const double gain = 100 * (smv - mv);
    pass = pass && gain >= 1.0;
    detail += format("%sseed %lld: mv %.2f smv %.2f (+%.2f)", seed == 1 ? "" : "; ",
                     static_cast<long long>(seed), 100 * mv, 100 * smv, gain);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {pass && secs < 120, detail + format("; %.1f s", secs)};
}

Outcome fig1_pipeline() {
  const auto corpus = sim::simulate_corpus(smv_params(), 2000, 16, 1, sim::TextMode::compact);
  const auto groups = an::group_by_question(corpus.records);
  const auto lengths = an::correct_incorrect_lengths(groups);
  const auto ranks = an::rank_groups(groups, 16);
  bool monotone = true;
  for (std::size_t i = 1; i < ranks.groups.size(); ++i)
    monotone = monotone && ranks.groups[i].mean_length >= ranks.groups[i - 1].mean_length;
  const double ratio = ranks.groups.back().mean_length / ranks.groups.front().mean_length;
  const bool pass = lengths.mean_correct < lengths.mean_incorrect && monotone && std::abs(ratio - 2.0) <= 0.3;
  return {pass, format("correct %.0f < incorrect %.0f over %lld questions; rank means %s; longest/shortest %.3f",
                       lengths.mean_correct, lengths.mean_incorrect, static_cast<long long>(lengths.n_questions),
                       monotone ? "non-decreasing" : "NOT monotone", ratio)};
}

// ---- 5 and 6 --------------------------------------------------------------

struct ChainSet {
  std::vector<RevisionChain> chains;
};

ChainSet simulate_chains(const sim::SimParams& p, int n, std::int64_t steps, std::int64_t seed) {
  const auto corpus = sim::simulate_corpus(p, n, 1, seed, sim::TextMode::compact);
  ChainSet out;
  out.chains.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.chains.push_back(sim::simulate_chain(p, steps, corpus.records[static_cast<std::size_t>(i)],
                                             corpus.questions[static_cast<std::size_t>(i)],
                                             sim::chain_seed(seed, corpus.questions[static_cast<std::size_t>(i)].id, 0),
                                             sim::TextMode::compact)
                             .chain);
  return out;
}

Outcome markov_oracle() {
  const int n = 10000;
  const std::int64_t steps = 40;
  bool pass = true;
  std::string detail;
  const std::vector<std::pair<double, double>> sets{{0.05, 0.10}, {0.08, 0.02}, {0.0, 0.0}};
  for (std::size_t i = 0; i < sets.size(); ++i) {
    sim::SimParams p;
    p.p_wrong_to_correct = sets[i].first;
    p.p_correct_to_wrong = sets[i].second;
    const auto acc = an::accuracy_by_step(simulate_chains(p, n, steps, 500 + static_cast<std::int64_t>(i)).chains);
    double worst = 0;
    for (const auto& a : acc) {
      const double expected = sim::analytic_accuracy(p, a.step);
      const double se = std::sqrt(std::max(expected * (1 - expected), 1e-12) / n);
      worst = std::max(worst, std::abs(a.accuracy - expected) / se);
    }
    bool shape = true;
    std::string shape_name = "flat";
    const double se0 = oracle::standard_error(acc[0].accuracy, n);
    if (i == 0) {
      // Decay: never rises beyond noise, ends clearly lower.
      for (std::size_t s = 1; s < acc.size(); ++s)
        shape = shape && acc[s].accuracy <= acc[s - 1].accuracy + 3 * se0;
      shape = shape && acc.back().accuracy < acc.front().accuracy - 5 * se0;
      shape_name = "monotone decay";
    } else if (i == 1) {
      // Rise over the first half, then the last quarter stays within noise.
      shape = acc[steps / 2].accuracy > acc[0].accuracy + 10 * se0;
      double lo = 1, hi = 0;
      for (std::size_t s = 3 * steps / 4; s < acc.size(); ++s) {
        lo = std::min(lo, acc[s].accuracy);
        hi = std::max(hi, acc[s].accuracy);
      }
      shape = shape && hi - lo < 6 * oracle::standard_error(hi, n);
      shape_name = "rise then plateau";
    }
    pass = pass && worst <= 3.0 && shape;
    detail += format("%s(%.2f, %.2f): max |z| %.2f over %lld steps, %s%s", i ? "; " : "", sets[i].first,
                     sets[i].second, worst, static_cast<long long>(steps), shape_name.c_str(), shape ? "" : " NOT seen");
  }
  return {pass, detail};
}

Outcome transition_recovery() {
  bool pass = true;
  std::string detail;
  const std::vector<std::pair<double, double>> sets{{0.05, 0.10}, {0.08, 0.02}};
  for (std::size_t i = 0; i < sets.size(); ++i) {
    sim::SimParams p;
    p.p_wrong_to_correct = sets[i].first;
    p.p_correct_to_wrong = sets[i].second;
    const auto report = an::transition_rates(simulate_chains(p, 10000, 10, 600 + static_cast<std::int64_t>(i)).chains);
    const bool ok = std::abs(report.pooled_wrong_to_correct - p.p_wrong_to_correct) <= 0.02 &&
                    std::abs(report.pooled_correct_to_wrong - p.p_correct_to_wrong) <= 0.02;
    pass = pass && ok;
    detail += format("%strue (%.2f, %.2f) estimated (%.4f, %.4f)", i ? "; " : "", p.p_wrong_to_correct,
                     p.p_correct_to_wrong, report.pooled_wrong_to_correct, report.pooled_correct_to_wrong);
  }
  return {pass, detail};
}

// ---- 7 --------------------------------------------------------------------

Outcome coverage_properties() {
  bool pass = true;
  std::string detail;
  {
    const auto corpus = sim::simulate_corpus(sim::SimParams{}, 1000, 16, 70, sim::TextMode::compact);
    const an::QuestionIndex index(corpus.questions);
    const auto groups = an::group_by_question(corpus.records);
    bool monotone = true, bounded = true;
    double previous = 0;
    for (std::int64_t k = 1; k <= 16; ++k) {
      const double cov = an::coverage_parallel(groups, k);
      monotone = monotone && cov >= previous;
      previous = cov;
      const std::vector<std::int64_t> n{k};
      for (auto m : {aggregate::Method::majority_vote, aggregate::Method::shortest,
                     aggregate::Method::shortest_majority_vote})
        bounded = bounded && an::accuracy_vs_solutions(groups, index, m, n)[0].accuracy <= cov;
    }
    pass = monotone && bounded;
    detail = format("coverage %s in k, %s aggregator accuracy", monotone ? "non-decreasing" : "NOT monotone",
                    bounded ? ">=" : "NOT >=");
  }
  sim::SimParams p;
  p.p_initial_correct = 0.3;
  const int n = 4000;
  const auto corpus = sim::simulate_corpus(p, n, 10, 71, sim::TextMode::compact);
  const auto groups = an::group_by_question(corpus.records);
  for (std::int64_t k : {1, 2, 5, 10}) {
    const double expected = 1 - std::pow(1 - p.p_initial_correct, static_cast<double>(k));
    const double cov = an::coverage_parallel(groups, k);
    const double z = (cov - expected) / oracle::standard_error(expected, n);
    pass = pass && std::abs(z) <= 2.0;
    detail += format("; k=%lld %.4f vs %.4f (z %.2f)", static_cast<long long>(k), cov, expected, z);
  }
  return {pass, detail};
}

// ---- 8 --------------------------------------------------------------------

Outcome determinism() {
  testutil::TempDir a, b;
  const auto fa = pipeline::full_run(a.path(), 8);
  const auto fb = pipeline::full_run(b.path(), 8);
  const bool pass = !fa.empty() && fa == fb;
  std::size_t bytes = 0;
  for (const auto& [name, content] : fa) bytes += content.size();
  return {pass, format("%zu output files (%zu bytes) %s across two runs", fa.size(), bytes,
                       pass ? "byte-identical" : "DIFFER")};
}

// ---- 9 --------------------------------------------------------------------

Outcome answer_suite() {
  const auto pairs = oracle::load_answer_pairs(TTS_TEST_DATA "/answer_pairs.tsv");
  int wrong = 0;
  for (const auto& p : pairs) {
    const auto kind = question_kind_from_string(p.kind);
    const auto a = answer::try_normalize(p.a, kind);
    const auto b = answer::try_normalize(p.b, kind);
    const bool eq = a && b && answer::equivalent(*a, *b);
    wrong += eq != p.equivalent;
  }
  std::mt19937_64 rng(909);
  int extract_mismatch = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto text = oracle::random_brace_text(rng, 32);
    extract_mismatch += answer::extract_boxed(text) != oracle::last_boxed(text);
  }
  return {pairs.size() >= 200 && wrong == 0 && extract_mismatch == 0,
          format("%zu curated pairs, %d misgraded; 10000 random strings, %d extraction mismatches", pairs.size(),
                 wrong, extract_mismatch)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"aggregator oracle equivalence", aggregator_oracle},
      {"score log-base invariance", base_invariance},
      {"shortest == smv at 2 solutions", shortest_equals_smv},
      {"smv beats mv at desk scale", smv_advantage},
      {"revision Markov oracle", markov_oracle},
      {"transition rate recovery", transition_recovery},
      {"coverage properties", coverage_properties},
      {"pipeline determinism", determinism},
      {"answer equivalence suite", answer_suite},
      {"length pipeline check", fig1_pipeline},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
