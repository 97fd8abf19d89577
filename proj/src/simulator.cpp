#include "tts/simulator.hpp"

#include <cmath>
#include <random>

#include "tts/answer.hpp"
#include "tts/store.hpp"

namespace tts::simulator {

void to_json(json& j, const SimParams& p) {
  j = json{{"p_initial_correct", p.p_initial_correct},
           {"p_wrong_to_correct", p.p_wrong_to_correct},
           {"p_correct_to_wrong", p.p_correct_to_wrong},
           {"stick_bias", p.stick_bias},
           {"length_mean_correct", p.length_mean_correct},
           {"length_mean_incorrect", p.length_mean_incorrect},
           {"length_dispersion", p.length_dispersion},
           {"step_length_increment_mean", p.step_length_increment_mean},
           {"answer_alphabet_size", p.answer_alphabet_size},
           {"marker_rate", p.marker_rate}};
}

void from_json(const json& j, SimParams& p) {
  const SimParams d;
  for (const auto& [key, value] : j.items()) {
    if (!json(d).contains(key)) throw std::invalid_argument("unknown simulator parameter: " + key);
  }
  p.p_initial_correct = j.value("p_initial_correct", d.p_initial_correct);
  p.p_wrong_to_correct = j.value("p_wrong_to_correct", d.p_wrong_to_correct);
  p.p_correct_to_wrong = j.value("p_correct_to_wrong", d.p_correct_to_wrong);
  p.stick_bias = j.value("stick_bias", d.stick_bias);
  p.length_mean_correct = j.value("length_mean_correct", d.length_mean_correct);
  p.length_mean_incorrect = j.value("length_mean_incorrect", d.length_mean_incorrect);
  p.length_dispersion = j.value("length_dispersion", d.length_dispersion);
  p.step_length_increment_mean = j.value("step_length_increment_mean", d.step_length_increment_mean);
  p.answer_alphabet_size = j.value("answer_alphabet_size", d.answer_alphabet_size);
  p.marker_rate = j.value("marker_rate", d.marker_rate);
}

std::vector<std::string> validate(const SimParams& p) {
  std::vector<std::string> out;
  auto prob = [&](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) out.push_back(std::string(name) + " must be in [0, 1]");
  };
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0)) out.push_back(std::string(name) + " must be positive");
  };
  prob(p.p_initial_correct, "p_initial_correct");
  prob(p.p_wrong_to_correct, "p_wrong_to_correct");
  prob(p.p_correct_to_wrong, "p_correct_to_wrong");
  prob(p.stick_bias, "stick_bias");
  positive(p.length_mean_correct, "length_mean_correct");
  positive(p.length_mean_incorrect, "length_mean_incorrect");
  positive(p.length_dispersion, "length_dispersion");
  positive(p.step_length_increment_mean, "step_length_increment_mean");
  if (p.answer_alphabet_size < 2) out.emplace_back("answer_alphabet_size must be ≥ 2");
  if (!(p.marker_rate >= 0.0)) out.emplace_back("marker_rate must be ≥ 0");
  return out;
}

TextMode text_mode_from_string(std::string_view s) {
  if (s == "full") return TextMode::full;
  if (s == "compact") return TextMode::compact;
  throw std::invalid_argument("unknown text mode: " + std::string(s));
}

const char* to_string(TextMode m) { return m == TextMode::full ? "full" : "compact"; }

namespace {

constexpr std::string_view kOpening = "Let me work through this problem step by step.\n";
constexpr std::string_view kFiller = "We continue the calculation carefully. ";
constexpr std::string_view kMarker = "Wait, let me verify that again. ";
constexpr std::string_view kContinuation = ", let me re-examine the previous steps. ";

std::mt19937_64 make_rng(std::int64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::int64_t lognormal_tokens(std::mt19937_64& rng, double mean, double sigma) {
  std::lognormal_distribution<double> dist(std::log(mean) - 0.5 * sigma * sigma, sigma);
  return std::max<std::int64_t>(1, std::llround(dist(rng)));
}

std::int64_t draw_wrong(std::mt19937_64& rng, std::int64_t gold, std::int64_t alphabet) {
  std::uniform_int_distribution<std::int64_t> dist(1, alphabet - 1);
  const std::int64_t v = dist(rng);
  return v >= gold ? v + 1 : v;
}

std::string final_line(std::int64_t answer) {
  return "\nFinal answer: \\boxed{" + std::to_string(answer) + "}";
}

// Body of about 4 * tokens characters with `markers` evenly spaced markers.
std::string body_text(std::string_view opening, std::int64_t tokens, std::int64_t markers,
                      TextMode mode) {
  std::string out(opening);
  if (mode == TextMode::compact) {
    for (std::int64_t m = 0; m < markers; ++m) out += kMarker;
    return out;
  }
  const std::int64_t target = 4 * tokens;
  out.reserve(static_cast<std::size_t>(target) + 64);
  const std::int64_t units = std::max<std::int64_t>(
      markers, (target - static_cast<std::int64_t>(opening.size())) /
                   static_cast<std::int64_t>(kFiller.size()));
  // Bresenham-style spread of markers over the units.
  std::int64_t placed = 0;
  for (std::int64_t u = 0; u < units; ++u) {
    const std::int64_t due = units == 0 ? 0 : ((u + 1) * markers) / units;
    if (due > placed) {
      out += kMarker;
      ++placed;
    } else {
      out += kFiller;
    }
  }
  return out;
}

std::int64_t marker_count(double rate, std::int64_t tokens) {
  return std::llround(rate * static_cast<double>(tokens));
}

NormalizedAnswer integer_answer(std::int64_t v) {
  return NormalizedAnswer{std::to_string(v), IntegerAnswer{v}};
}

}  // namespace

SimCorpus simulate_corpus(const SimParams& params, std::int64_t n_questions, std::int64_t k,
                          std::int64_t seed, TextMode mode) {
  if (const auto errors = validate(params); !errors.empty())
    throw std::invalid_argument("invalid simulator parameters: " + errors.front());
  if (n_questions < 1 || k < 1) throw std::invalid_argument("n_questions and k must be ≥ 1");
  SimCorpus corpus;
  corpus.questions.reserve(static_cast<std::size_t>(n_questions));
  corpus.records.reserve(static_cast<std::size_t>(n_questions * k));
  const std::size_t width = std::max<std::size_t>(6, std::to_string(n_questions).size());
  for (std::int64_t q = 0; q < n_questions; ++q) {
    const std::string digits = std::to_string(q);
    Question question;
    question.id = "sim-" + std::string(width - std::min(width, digits.size()), '0') + digits;
    question.source_tag = "simulated";
    auto qrng = make_rng(derive_sample_seed(seed, question.id, -1));
    const std::int64_t gold =
        std::uniform_int_distribution<std::int64_t>(1, params.answer_alphabet_size)(qrng);
    question.gold_answer = std::to_string(gold);
    question.prompt_text = "Simulated question " + question.id + ".";
    for (std::int64_t i = 0; i < k; ++i) {
      const std::int64_t sample_seed = derive_sample_seed(seed, question.id, i);
      auto rng = make_rng(sample_seed);
      const bool correct = uniform(rng) < params.p_initial_correct;
      const std::int64_t value = correct ? gold : draw_wrong(rng, gold, params.answer_alphabet_size);
      const std::int64_t tokens = lognormal_tokens(
          rng, correct ? params.length_mean_correct : params.length_mean_incorrect,
          params.length_dispersion);
      std::string text = body_text(kOpening, tokens, marker_count(params.marker_rate, tokens), mode) +
                         final_line(value);
      corpus.records.push_back(GenerationRecord::make(question.id, i, std::move(text), tokens,
                                                      integer_answer(value),
                                                      correct ? Grade::correct : Grade::incorrect,
                                                      false, sample_seed));
    }
    corpus.questions.push_back(std::move(question));
  }
  return corpus;
}

SimulatedChain simulate_chain(const SimParams& params, std::int64_t steps,
                              const GenerationRecord& initial, const Question& question,
                              std::int64_t seed, TextMode mode) {
  if (steps < 0) throw std::invalid_argument("steps must be non-negative");
  const auto gold = answer::normalize(question.gold_answer, question.kind);
  const auto* gold_int = std::get_if<IntegerAnswer>(&gold.canonical);
  if (!gold_int) throw std::invalid_argument("simulated questions need integer gold answers");

  SimulatedChain out;
  out.chain.question_id = initial.question_id;
  out.chain.sample_index = initial.sample_index;
  RevisionStep first;
  first.appended_text = initial.text;
  first.cumulative_token_count = initial.token_count;
  first.answer_after_step = initial.extracted_answer;
  first.grade_after_step = initial.grade;
  out.chain.steps.push_back(first);
  out.completion_tokens.push_back(initial.token_count);

  auto rng = make_rng(seed);
  bool correct = initial.grade == Grade::correct;
  std::int64_t value = 0;
  if (initial.extracted_answer) {
    if (const auto* v = std::get_if<IntegerAnswer>(&initial.extracted_answer->canonical))
      value = v->value;
  }
  if (!correct && value == gold_int->value) value = 0;

  for (std::int64_t s = 1; s <= steps; ++s) {
    const double u_stick = uniform(rng);
    const double u_flip = uniform(rng);
    if (u_stick >= params.stick_bias) {
      if (correct && u_flip < params.p_correct_to_wrong) {
        correct = false;
        value = draw_wrong(rng, gold_int->value, params.answer_alphabet_size);
      } else if (!correct && u_flip < params.p_wrong_to_correct) {
        correct = true;
      }
    }
    if (correct) value = gold_int->value;
    const std::int64_t tokens =
        lognormal_tokens(rng, params.step_length_increment_mean, params.length_dispersion);
    RevisionStep step;
    step.step_index = s;
    step.chosen_prompt = "Wait";
    step.prompt_fallback = true;
    step.appended_text =
        body_text(kContinuation, tokens, marker_count(params.marker_rate, tokens), mode) +
        final_line(value);
    step.cumulative_token_count = out.chain.steps.back().cumulative_token_count + tokens;
    step.answer_after_step = integer_answer(value);
    step.grade_after_step = correct ? Grade::correct : Grade::incorrect;
    out.chain.steps.push_back(std::move(step));
    out.completion_tokens.push_back(tokens);
  }
  return out;
}

double analytic_accuracy(double a0, double p_wc, double p_cw, double stick_bias, std::int64_t steps) {
  const double total = p_wc + p_cw;
  if (total == 0.0) return a0;
  const double stationary = p_wc / total;
  const double contraction = 1.0 - (1.0 - stick_bias) * total;
  return stationary + (a0 - stationary) * std::pow(contraction, static_cast<double>(steps));
}

double analytic_accuracy(const SimParams& p, std::int64_t steps) {
  return analytic_accuracy(p.p_initial_correct, p.p_wrong_to_correct, p.p_correct_to_wrong,
                           p.stick_bias, steps);
}

std::int64_t chain_seed(std::int64_t run_seed, const std::string& question_id,
                        std::int64_t sample_index) {
  return derive_sample_seed(static_cast<std::int64_t>(splitmix64(static_cast<std::uint64_t>(run_seed)) >> 1),
                            question_id, sample_index);
}

void write_simulated_run(const std::filesystem::path& root, const std::string& run_id,
                         const SimParams& params, const SimulatedRunOptions& options) {
  const auto corpus = simulate_corpus(params, options.n_questions, options.k, options.seed, options.mode);

  store::Manifest manifest;
  manifest.source = "simulator";
  manifest.mode = options.steps > 0 ? "both" : "parallel";
  manifest.config.provider_endpoint = "replay:self";
  manifest.config.model_name = "simulator";
  manifest.config.samples_per_question = options.k;
  manifest.config.revision_steps = options.steps;
  manifest.config.seed = options.seed;
  manifest.config.concurrency_limit = 1;
  // Leave room for every recorded continuation.
  manifest.config.chain_token_ceiling = 0;
  std::string dataset;
  for (const auto& q : corpus.questions) dataset += json(q).dump() + "\n";
  manifest.dataset_digest = hex64(fnv1a64(dataset));
  manifest.metadata = json{{"params", params},
                           {"n_questions", options.n_questions},
                           {"k", options.k},
                           {"steps", options.steps},
                           {"seed", options.seed},
                           {"text_mode", to_string(options.mode)}};

  auto run = store::RunStore::create(root, run_id, manifest, corpus.questions);
  run.set_sync(false);
  for (const auto& r : corpus.records) run.append_record(r);

  if (options.steps > 0) {
    std::filesystem::create_directories(run.dir() / "replay");
    std::string lines;
    std::size_t q = 0;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
      const auto& r = corpus.records[i];
      while (corpus.questions[q].id != r.question_id) ++q;
      const auto sim = simulate_chain(params, options.steps, r, corpus.questions[q],
                                      chain_seed(options.seed, r.question_id, r.sample_index),
                                      options.mode);
      for (std::size_t s = 1; s < sim.chain.steps.size(); ++s)
        lines += step_to_json(r.question_id, r.sample_index, sim.chain.steps[s],
                              sim.completion_tokens[s])
                     .dump() +
                 "\n";
    }
    write_file_atomic(run.dir() / "replay" / "chains.jsonl", lines);
  }
  run.seal();
}

}  // namespace tts::simulator
