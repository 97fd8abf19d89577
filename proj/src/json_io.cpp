#include "tts/json_io.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tts {

void to_json(json& j, const NormalizedAnswer& a) {
  j = json::object();
  j["raw"] = a.raw;
  j["type"] = canonical_type_name(a.canonical);
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, IntegerAnswer>) {
          j["value"] = c.value;
        } else if constexpr (std::is_same_v<T, RationalAnswer>) {
          j["numerator"] = c.numerator;
          j["denominator"] = c.denominator;
        } else if constexpr (std::is_same_v<T, DecimalAnswer>) {
          j["mantissa"] = c.mantissa;
          j["places"] = c.places;
          j["significant_digits"] = c.significant_digits;
        } else if constexpr (std::is_same_v<T, ChoiceAnswer>) {
          j["letter"] = std::string(1, c.letter);
        } else {
          j["text"] = c.text;
        }
      },
      a.canonical);
}

void from_json(const json& j, NormalizedAnswer& a) {
  a.raw = j.at("raw").get<std::string>();
  const auto type = j.at("type").get<std::string>();
  if (type == "integer") {
    a.canonical = IntegerAnswer{j.at("value").get<std::int64_t>()};
  } else if (type == "rational") {
    RationalAnswer r{j.at("numerator").get<std::int64_t>(), j.at("denominator").get<std::int64_t>()};
    if (r.denominator <= 1) throw std::invalid_argument("rational answer needs denominator > 1");
    a.canonical = r;
  } else if (type == "decimal") {
    a.canonical = DecimalAnswer{j.at("mantissa").get<std::int64_t>(), j.at("places").get<int>(),
                                j.at("significant_digits").get<int>()};
  } else if (type == "choice") {
    const auto letter = j.at("letter").get<std::string>();
    if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'Z')
      throw std::invalid_argument("choice answer must be one uppercase letter");
    a.canonical = ChoiceAnswer{letter[0]};
  } else if (type == "symbolic") {
    auto text = j.at("text").get<std::string>();
    if (text.empty()) throw std::invalid_argument("symbolic answer must be non-empty");
    a.canonical = SymbolicAnswer{std::move(text)};
  } else {
    throw std::invalid_argument("unknown answer type: " + type);
  }
}

void to_json(json& j, const Question& q) {
  j = json{{"id", q.id},
           {"prompt_text", q.prompt_text},
           {"gold_answer", q.gold_answer},
           {"kind", to_string(q.kind)},
           {"source_tag", q.source_tag}};
  if (q.kind == QuestionKind::multiple_choice || !q.choices.empty()) j["choices"] = q.choices;
}

void from_json(const json& j, Question& q) {
  q.id = j.at("id").get<std::string>();
  q.prompt_text = j.at("prompt_text").get<std::string>();
  q.gold_answer = j.at("gold_answer").get<std::string>();
  q.kind = question_kind_from_string(j.value("kind", std::string("math_freeform")));
  q.choices = j.contains("choices") && !j["choices"].is_null()
                  ? j["choices"].get<std::vector<std::string>>()
                  : std::vector<std::string>{};
  q.source_tag = j.value("source_tag", std::string());
}

std::vector<std::string> run_config_keys() {
  return {"temperature",      "max_tokens",         "samples_per_question", "revision_steps",
          "seed",             "provider_endpoint",  "model_name",           "system_prompt",
          "instruction",      "choice_instruction", "revision_candidates",  "concurrency_limit",
          "chain_token_ceiling"};
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"temperature", c.temperature},
           {"max_tokens", c.max_tokens},
           {"samples_per_question", c.samples_per_question},
           {"revision_steps", c.revision_steps},
           {"seed", c.seed},
           {"provider_endpoint", c.provider_endpoint},
           {"model_name", c.model_name},
           {"system_prompt", c.system_prompt},
           {"instruction", c.instruction},
           {"choice_instruction", c.choice_instruction},
           {"revision_candidates", c.revision_candidates},
           {"concurrency_limit", c.concurrency_limit},
           {"chain_token_ceiling", c.chain_token_ceiling}};
}

void from_json(const json& j, RunConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  const auto keys = run_config_keys();
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown config key: " + key);
  }
  RunConfig d;
  c.temperature = j.value("temperature", d.temperature);
  c.max_tokens = j.value("max_tokens", d.max_tokens);
  c.samples_per_question = j.value("samples_per_question", d.samples_per_question);
  c.revision_steps = j.value("revision_steps", d.revision_steps);
  c.seed = j.value("seed", d.seed);
  c.provider_endpoint = j.value("provider_endpoint", d.provider_endpoint);
  c.model_name = j.value("model_name", d.model_name);
  c.system_prompt = j.value("system_prompt", d.system_prompt);
  c.instruction = j.value("instruction", d.instruction);
  c.choice_instruction = j.value("choice_instruction", d.choice_instruction);
  c.revision_candidates = j.value("revision_candidates", d.revision_candidates);
  c.concurrency_limit = j.value("concurrency_limit", d.concurrency_limit);
  c.chain_token_ceiling = j.value("chain_token_ceiling", d.chain_token_ceiling);
}

void to_json(json& j, const GenerationRecord& r) {
  j = json{{"question_id", r.question_id},
           {"sample_index", r.sample_index},
           {"text", r.text},
           {"token_count", r.token_count},
           {"token_count_approximated", r.token_count_approximated},
           {"char_count", r.char_count},
           {"extracted_answer", nullptr},
           {"grade", to_string(r.grade)},
           {"truncated", r.truncated},
           {"rng_seed", r.rng_seed}};
  if (r.extracted_answer) j["extracted_answer"] = *r.extracted_answer;
}

void from_json(const json& j, GenerationRecord& r) {
  r.question_id = j.at("question_id").get<std::string>();
  r.sample_index = j.at("sample_index").get<std::int64_t>();
  r.text = j.at("text").get<std::string>();
  r.token_count = j.at("token_count").get<std::int64_t>();
  r.token_count_approximated = j.value("token_count_approximated", false);
  r.char_count = j.at("char_count").get<std::int64_t>();
  r.extracted_answer.reset();
  if (j.contains("extracted_answer") && !j["extracted_answer"].is_null())
    r.extracted_answer = j["extracted_answer"].get<NormalizedAnswer>();
  r.grade = grade_from_string(j.at("grade").get<std::string>());
  r.truncated = j.value("truncated", false);
  r.rng_seed = j.value("rng_seed", std::int64_t{0});
  r.check_invariants();
}

json step_to_json(const std::string& question_id, std::int64_t sample_index,
                  const RevisionStep& step, std::int64_t completion_tokens) {
  json j{{"question_id", question_id},
         {"sample_index", sample_index},
         {"step", step.step_index},
         {"appended_text", step.appended_text},
         {"chosen_prompt", step.chosen_prompt},
         {"prompt_fallback", step.prompt_fallback},
         {"completion_tokens", completion_tokens},
         {"cumulative_token_count", step.cumulative_token_count},
         {"answer_after_step", nullptr},
         {"grade_after_step", to_string(step.grade_after_step)}};
  if (step.answer_after_step) j["answer_after_step"] = *step.answer_after_step;
  return j;
}

std::vector<Question> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
  std::vector<Question> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Question q;
    try {
      q = json::parse(line).get<Question>();
      q.validate();
    } catch (const std::exception& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(q.id).second)
      throw std::invalid_argument(path.string() + ": duplicate question id " + q.id);
    out.push_back(std::move(q));
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<Question>& questions) {
  std::string content;
  for (const auto& q : questions) content += json(q).dump() + "\n";
  write_file_atomic(path, content);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return json::parse(read_file(path)).get<RunConfig>();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace tts
