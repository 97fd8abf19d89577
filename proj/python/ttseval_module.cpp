#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "tts/aggregate.hpp"
#include "tts/answer.hpp"
#include "tts/cli.hpp"
#include "tts/json_io.hpp"
#include "tts/simulator.hpp"
#include "tts/store.hpp"

namespace py = pybind11;
using namespace tts;

namespace {

QuestionKind kind_of(const std::string& kind) { return question_kind_from_string(kind); }

// Round-trips through the json module so callers get plain dicts and lists.
py::object to_python(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_python(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::optional<std::string> aggregate_answers(const std::string& method,
                                             const std::vector<std::optional<std::string>>& answers,
                                             const std::vector<std::int64_t>& tokens, const std::string& kind,
                                             const std::string& tie_break) {
  if (answers.size() != tokens.size()) throw std::invalid_argument("answers and tokens differ in length");
  const auto m = aggregate::method_from_name(method);
  if (!m || *m == aggregate::Method::last_revision)
    throw std::invalid_argument("method must be mv, shortest or smv");
  std::vector<GenerationRecord> records;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    std::optional<NormalizedAnswer> a;
    if (answers[i]) a = answer::try_normalize(*answers[i], kind_of(kind));
    records.push_back(GenerationRecord::make("q", static_cast<std::int64_t>(i), "", tokens[i], a,
                                             a ? Grade::incorrect : Grade::no_answer, false, 0));
  }
  const auto tb = tie_break == "shorter" ? aggregate::MajorityTieBreak::shorter_category
                                         : aggregate::MajorityTieBreak::first_appearance;
  const auto chosen = aggregate::select(*m, records, tb);
  if (!chosen) return std::nullopt;
  return render(*chosen);
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(ttseval, m) {
  m.doc() = "Answer grading, aggregation, simulation and run access for test-time scaling evaluation";

  m.def("extract_boxed", &answer::extract_boxed, py::arg("text"),
        "Content of the last balanced \\boxed{...}, or None.");
  m.def(
      "normalize",
      [](const std::string& raw, const std::string& kind) -> std::optional<py::tuple> {
        const auto a = answer::try_normalize(raw, kind_of(kind));
        if (!a) return std::nullopt;
        return py::make_tuple(canonical_type_name(a->canonical), render(*a));
      },
      py::arg("raw"), py::arg("kind") = "math_freeform",
      "(type, canonical rendering) of an answer string, or None when unusable.");
  m.def(
      "equivalent",
      [](const std::string& a, const std::string& b, const std::string& kind) {
        const auto na = answer::try_normalize(a, kind_of(kind));
        const auto nb = answer::try_normalize(b, kind_of(kind));
        return na && nb && answer::equivalent(*na, *nb);
      },
      py::arg("a"), py::arg("b"), py::arg("kind") = "math_freeform");
  m.def(
      "grade",
      [](const std::string& text, const std::string& gold, const std::string& kind,
         const std::vector<std::string>& choices) {
        Question q;
        q.id = "q";
        q.gold_answer = gold;
        q.kind = kind_of(kind);
        q.choices = choices;
        return std::string(to_string(answer::grade(text, q).grade));
      },
      py::arg("text"), py::arg("gold"), py::arg("kind") = "math_freeform",
      py::arg("choices") = std::vector<std::string>{}, "correct, incorrect or no_answer.");

  m.def("smv_score", &aggregate::smv_score, py::arg("count"), py::arg("length"),
        py::arg("log_base") = std::numbers::e);
  m.def("aggregate", &aggregate_answers, py::arg("method"), py::arg("answers"), py::arg("tokens"),
        py::arg("kind") = "math_freeform", py::arg("tie_break") = "first",
        "Answer chosen by mv, shortest or smv; None when no sample has an answer.");

  m.def(
      "analytic_accuracy",
      [](double a0, double p_wc, double p_cw, double stick_bias, std::int64_t steps) {
        return simulator::analytic_accuracy(a0, p_wc, p_cw, stick_bias, steps);
      },
      py::arg("a0"), py::arg("p_wrong_to_correct"), py::arg("p_correct_to_wrong"),
      py::arg("stick_bias") = 0.0, py::arg("steps"));
  m.def(
      "simulate_run",
      [](const std::filesystem::path& root, const std::string& run_id, const py::dict& params,
         std::int64_t n_questions, std::int64_t k, std::int64_t steps, std::int64_t seed,
         const std::string& text_mode) {
        const auto p = from_python(params).get<simulator::SimParams>();
        simulator::SimulatedRunOptions o{n_questions, k, steps, seed, simulator::text_mode_from_string(text_mode)};
        py::gil_scoped_release release;
        simulator::write_simulated_run(root, run_id, p, o);
      },
      py::arg("root"), py::arg("run_id"), py::arg("params") = py::dict(), py::arg("n_questions") = 100,
      py::arg("k") = 5, py::arg("steps") = 0, py::arg("seed") = 1, py::arg("text_mode") = "full");
  m.def(
      "load_run",
      [](const std::filesystem::path& root, const std::string& run_id) {
        const auto run = store::load_run(root, run_id);
        json records = json::array();
        for (const auto& r : run.records) records.push_back(r);
        json questions = json::array();
        for (const auto& q : run.questions) questions.push_back(q);
        return to_python(json{{"manifest", store::manifest_body(run.manifest)},
                              {"questions", questions},
                              {"records", records},
                              {"warnings", run.warnings}});
      },
      py::arg("root"), py::arg("run_id"), "Manifest, questions and records of a stored run.");
  m.def("cli", &run_cli, py::arg("args"), "Runs the command line; returns (exit code, stdout, stderr).");
}
