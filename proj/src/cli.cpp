#include "tts/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "tts/aggregate.hpp"
#include "tts/analysis.hpp"
#include "tts/answer.hpp"
#include "tts/json_io.hpp"
#include "tts/orchestrator.hpp"
#include "tts/provider.hpp"
#include "tts/report.hpp"
#include "tts/simulator.hpp"
#include "tts/store.hpp"

namespace tts::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Values given on the command line that override the config file.
struct ConfigOverrides {
  std::optional<double> temperature;
  std::optional<std::int64_t> max_tokens;
  std::optional<std::int64_t> k;
  std::optional<std::int64_t> steps;
  std::optional<std::int64_t> seed;
  std::optional<std::string> endpoint;
  std::optional<std::string> model;
  std::optional<std::int64_t> concurrency;

  void attach(CLI::App* app, bool with_k) {
    app->add_option("--temperature", temperature, "Sampling temperature");
    app->add_option("--max-tokens", max_tokens, "Per-call completion token limit");
    if (with_k) app->add_option("--k", k, "Samples per question");
    app->add_option("--seed", seed, "Run seed");
    app->add_option("--endpoint", endpoint, "Provider endpoint (URL or replay:<run dir>)");
    app->add_option("--model", model, "Model name");
    app->add_option("--concurrency", concurrency, "Requests in flight");
  }

  void apply(RunConfig& c) const {
    if (temperature) c.temperature = *temperature;
    if (max_tokens) c.max_tokens = *max_tokens;
    if (k) c.samples_per_question = *k;
    if (steps) c.revision_steps = *steps;
    if (seed) c.seed = *seed;
    if (endpoint) c.provider_endpoint = *endpoint;
    if (model) c.model_name = *model;
    if (concurrency) c.concurrency_limit = *concurrency;
  }
};

RunConfig checked(RunConfig config) {
  const auto errors = validate_config(config);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw UsageError(msg);
  }
  return config;
}

RunConfig read_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  if (!fs::exists(path)) throw UsageError("config not found: " + path);
  try {
    return load_run_config(path);
  } catch (const json::exception& e) {
    throw UsageError("cannot read config " + path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError("cannot read config " + path + ": " + e.what());
  }
}

std::string dataset_tag(const Question& q) { return q.source_tag.empty() ? "dataset" : q.source_tag; }

store::LoadedRun load_sealed(const fs::path& root, const std::string& run_id) {
  auto run = store::load_run(root, run_id);
  if (!run.manifest.sealed) throw std::runtime_error("run " + run_id + " is not sealed");
  return run;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

// ---- sample -------------------------------------------------------------

struct SampleArgs {
  std::string dataset;
  std::string config;
  std::string out_run;
  std::string mode = "parallel";
  ConfigOverrides overrides;
};

int cmd_sample(const fs::path& root, const SampleArgs& a, std::ostream& out, std::ostream& err) {
  if (!fs::exists(a.dataset)) throw UsageError("dataset not found: " + a.dataset);
  std::vector<Question> dataset;
  try {
    dataset = load_dataset(a.dataset);
  } catch (const std::exception& e) {
    throw UsageError("cannot read dataset " + a.dataset + ": " + e.what());
  }
  const auto mode = orchestrator::mode_from_string(a.mode);
  RunConfig config = read_config(a.config);
  a.overrides.apply(config);
  config = checked(config);

  std::optional<store::RunStore> run;
  if (store::RunStore::exists(root, a.out_run)) {
    run.emplace(store::RunStore::open(root, a.out_run));
    print_warnings(run->warnings(), err);
    if (!(run->manifest().config == config))
      throw UsageError("run " + a.out_run + " exists with a different configuration");
    if (run->sealed()) run->reopen();
  } else {
    store::Manifest manifest;
    manifest.source = config.provider_endpoint.starts_with("replay:") ? "replay" : "live";
    manifest.mode = orchestrator::to_string(mode);
    manifest.config = config;
    manifest.dataset_digest = hex64(fnv1a64(read_file(a.dataset)));
    run.emplace(store::RunStore::create(root, a.out_run, manifest, dataset));
  }
  store::RunLock lock(run->dir());
  auto provider = provider::make_provider(config, run->dir());
  orchestrator::Orchestrator orch(*provider, *run, config);
  const auto summary = orch.run_benchmark(dataset, mode);
  run->seal();

  const auto loaded = store::load_run(root, a.out_run);
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> by_tag;  // correct, total
  std::map<std::string, std::int64_t> questions_by_tag;
  analysis::QuestionIndex index(loaded.questions);
  for (const auto& q : loaded.questions) ++questions_by_tag[dataset_tag(q)];
  for (const auto& r : loaded.records) {
    auto& [correct, total] = by_tag[dataset_tag(index.at(r.question_id))];
    correct += r.grade == Grade::correct;
    ++total;
  }
  report::Table table({"dataset", "questions", "samples", "accuracy"});
  for (const auto& [tag, n] : questions_by_tag) {
    const auto [correct, total] = by_tag[tag];
    table.add_row({tag, report::fmt(n), report::fmt(total),
                   report::fmt(total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0)});
  }
  out << "run " << summary.run_id << ": " << summary.new_records << " new records, "
      << summary.new_chain_steps << " new chain steps, " << summary.provider_calls
      << " provider calls, " << summary.failures << " failures\n"
      << table.to_text();
  if (loaded.records.empty() && summary.failures > 0) {
    err << "error: every request failed\n";
    return kExitFailure;
  }
  return kExitOk;
}

// ---- revise -------------------------------------------------------------

struct ReviseArgs {
  std::string run_id;
  std::int64_t steps = 0;
  std::string config;
};

int cmd_revise(const fs::path& root, const ReviseArgs& a, std::ostream& out, std::ostream& err) {
  if (a.steps < 0) throw UsageError("--steps must be ≥ 0");
  auto run = store::RunStore::open(root, a.run_id);
  print_warnings(run.warnings(), err);
  store::RunLock lock(run.dir());
  RunConfig config = run.manifest().config;
  if (!a.config.empty()) {
    // The file may change prompts and provider settings; sampling identity stays.
    RunConfig file = read_config(a.config);
    file.samples_per_question = config.samples_per_question;
    file.seed = config.seed;
    config = file;
  }
  config.revision_steps = a.steps;
  config = checked(config);
  if (run.sealed()) run.reopen();
  run.update_manifest([&](store::Manifest& m) {
    m.config.revision_steps = std::max(m.config.revision_steps, a.steps);
    if (m.mode == "parallel" && a.steps > 0) m.mode = "both";
  });

  const auto records = store::read_record_lines(run.dir() / "records.jsonl", nullptr);
  const auto questions = load_dataset(run.dir() / "questions.jsonl");
  analysis::QuestionIndex index(questions);
  auto provider = provider::make_provider(config, run.dir());
  orchestrator::Orchestrator orch(*provider, run, config);

  std::int64_t failures = 0;
  std::mutex mu;
  orchestrator::parallel_for(records.size(), config.concurrency_limit, [&](std::size_t i) {
    const auto outcome = orch.revise(index.at(records[i].question_id), records[i], a.steps);
    std::lock_guard g(mu);
    failures += static_cast<std::int64_t>(outcome.failures.size());
  });
  run.seal();

  const auto loaded = store::load_run(root, a.run_id);
  std::vector<RevisionChain> chains;
  for (const auto& c : loaded.chains) {
    RevisionChain view = c;
    if (static_cast<std::int64_t>(view.steps.size()) > a.steps + 1)
      view.steps.resize(static_cast<std::size_t>(a.steps + 1));
    chains.push_back(std::move(view));
  }
  report::Table table({"step", "accuracy", "n_chains"});
  for (const auto& s : analysis::accuracy_by_step(chains))
    table.add_row({report::fmt(s.step), report::fmt(s.accuracy), report::fmt(s.n_chains)});
  report::write_csv(loaded.dir, a.run_id, "revision-accuracy", table);
  out << "run " << a.run_id << ": " << chains.size() << " chains, " << orch.provider_calls()
      << " provider calls, " << failures << " failures\n"
      << table.to_text();
  if (failures > 0 && orch.provider_calls() > 0 && chains.empty()) return kExitFailure;
  return kExitOk;
}

// ---- aggregate ----------------------------------------------------------

struct AggregateArgs {
  std::string run_id;
  std::vector<std::string> methods;
  std::optional<std::int64_t> solutions;
  std::optional<std::int64_t> token_budget;
  std::string tie_break = "first";
};

int cmd_aggregate(const fs::path& root, const AggregateArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<aggregate::Method> methods;
  for (const auto& name : a.methods.empty() ? std::vector<std::string>{"mv", "shortest", "smv"}
                                            : a.methods) {
    const auto m = aggregate::method_from_name(name);
    if (!m) throw UsageError("unknown method '" + name + "' (expected mv, shortest, smv, last)");
    methods.push_back(*m);
  }
  const auto tie_break = a.tie_break == "shorter" ? aggregate::MajorityTieBreak::shorter_category
                                                  : aggregate::MajorityTieBreak::first_appearance;
  const auto run = load_sealed(root, a.run_id);
  print_warnings(run.warnings, err);
  const std::int64_t k = run.manifest.config.samples_per_question;
  if (a.solutions && (*a.solutions < 1 || *a.solutions > k))
    throw UsageError("--solutions " + std::to_string(*a.solutions) + " outside [1, " +
                     std::to_string(k) + "]");
  const bool by_budget = a.token_budget.has_value();
  const std::int64_t x = by_budget ? *a.token_budget : a.solutions.value_or(k);

  analysis::QuestionIndex index(run.questions);
  // Split questions by dataset tag, keeping key order.
  std::map<std::string, std::vector<GenerationRecord>> records_by_tag;
  std::map<std::string, std::vector<RevisionChain>> chains_by_tag;
  for (const auto& r : run.records) records_by_tag[dataset_tag(index.at(r.question_id))].push_back(r);
  for (const auto& c : run.chains) chains_by_tag[dataset_tag(index.at(c.question_id))].push_back(c);

  report::Table table({"dataset", by_budget ? "token_budget" : "solutions", "method", "accuracy"});
  json summary = json::object();
  for (const auto& [tag, records] : records_by_tag) {
    const auto groups = analysis::group_by_question(records);
    for (const auto m : methods) {
      double acc = 0.0;
      if (m == aggregate::Method::last_revision) {
        acc = analysis::last_revision_accuracy(
            chains_by_tag[tag], index, by_budget ? std::nullopt : std::optional<std::int64_t>(x),
            by_budget ? std::optional<std::int64_t>(x) : std::nullopt);
      } else {
        const std::vector<std::int64_t> xs{x};
        const auto curve = by_budget ? analysis::accuracy_vs_budget(groups, index, m, xs, tie_break)
                                     : analysis::accuracy_vs_solutions(groups, index, m, xs, tie_break);
        acc = curve.front().accuracy;
      }
      table.add_row({tag, report::fmt(x), aggregate::method_name(m), report::fmt(acc)});
      summary[tag][aggregate::method_name(m)] = acc;
    }
  }
  const std::string name =
      std::string("aggregate_") + (by_budget ? "budget-" : "solutions-") + std::to_string(x);
  report::write_csv(run.dir, a.run_id, name, table);
  report::merge_summary(run.dir, a.run_id, name, summary);
  out << table.to_text();
  return kExitOk;
}

// ---- analyze ------------------------------------------------------------

struct AnalyzeArgs {
  std::string run_id;
  std::string analysis;
  std::optional<std::int64_t> k;
  std::vector<std::int64_t> limits;
  std::vector<std::int64_t> budgets;
  std::string marker = "wait";
  bool whole_word = false;
  std::vector<std::string> methods;
  std::string filter = "both";
};

std::vector<std::int64_t> default_limits(const store::LoadedRun& run) {
  std::int64_t longest = 1;
  for (const auto& r : run.records) longest = std::max(longest, r.token_count);
  std::vector<std::int64_t> out;
  for (std::int64_t l = 256; l < longest; l *= 2) out.push_back(l);
  out.push_back(longest);
  return out;
}

std::vector<std::int64_t> default_budgets(const store::LoadedRun& run, std::int64_t k) {
  double total = 0.0;
  for (const auto& r : run.records) total += static_cast<double>(r.token_count);
  const double mean = run.records.empty() ? 1.0 : total / static_cast<double>(run.records.size());
  std::vector<std::int64_t> out;
  for (std::int64_t j = 1; j <= k; ++j) out.push_back(std::llround(mean * static_cast<double>(j)));
  return out;
}

std::int64_t default_chain_budget_max(const store::LoadedRun& run) {
  std::int64_t longest = 1;
  for (const auto& c : run.chains)
    if (!c.steps.empty()) longest = std::max(longest, c.steps.back().cumulative_token_count);
  return longest;
}

int cmd_analyze(const fs::path& root, const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  const auto& names = analysis_names();
  if (std::find(names.begin(), names.end(), a.analysis) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw UsageError("unknown analysis '" + a.analysis + "'; valid analyses: " + list);
  }
  const auto run = load_sealed(root, a.run_id);
  print_warnings(run.warnings, err);
  const auto groups = analysis::group_by_question(run.records);
  analysis::QuestionIndex index(run.questions);
  const std::int64_t k = a.k.value_or(run.manifest.config.samples_per_question);
  json summary = json::object();
  std::optional<report::Table> table;

  if (a.analysis == "rank-groups" || a.analysis == "token-dist") {
    const auto ranks = analysis::rank_groups(groups, k);
    if (a.analysis == "rank-groups") {
      table.emplace(std::vector<std::string>{"rank", "mean_length", "accuracy", "n_questions",
                                             "correct_solution_count", "correct_token_share"});
      for (const auto& g : ranks.groups)
        table->add_row({report::fmt(g.rank), report::fmt(g.mean_length), report::fmt(g.accuracy),
                        report::fmt(g.n_questions), report::fmt(g.correct_solution_count),
                        report::fmt(g.correct_token_share)});
      summary["longest_to_shortest_ratio"] =
          ranks.groups.front().mean_length > 0
              ? ranks.groups.back().mean_length / ranks.groups.front().mean_length
              : 0.0;
      summary["excluded_questions"] = ranks.excluded.size();
    } else {
      table.emplace(std::vector<std::string>{"rank", "correct_solution_count", "correct_token_share"});
      for (const auto& t : analysis::token_distribution(ranks.groups))
        table->add_row({report::fmt(t.rank), report::fmt(t.correct_solution_count),
                        report::fmt(t.correct_token_share)});
    }
  } else if (a.analysis == "correct-vs-incorrect") {
    const auto c = analysis::correct_incorrect_lengths(groups);
    table.emplace(std::vector<std::string>{"mean_correct_length", "mean_incorrect_length", "n_questions"});
    table->add_row({report::fmt(c.mean_correct), report::fmt(c.mean_incorrect), report::fmt(c.n_questions)});
    summary["mean_correct_length"] = c.mean_correct;
    summary["mean_incorrect_length"] = c.mean_incorrect;
    summary["n_questions"] = c.n_questions;
  } else if (a.analysis == "truncation") {
    const auto limits = a.limits.empty() ? default_limits(run) : a.limits;
    table.emplace(std::vector<std::string>{"limit", "accuracy", "n_records"});
    for (const auto& p : analysis::truncation_sweep(run.records, index, limits))
      table->add_row({report::fmt(p.limit), report::fmt(p.accuracy), report::fmt(p.n_records)});
  } else if (a.analysis == "markers") {
    const auto m = analysis::marker_counts(run.records, a.marker, a.whole_word);
    table.emplace(std::vector<std::string>{"question_id", "sample_index", "token_count", "marker_count"});
    for (std::size_t i = 0; i < run.records.size(); ++i)
      table->add_row({run.records[i].question_id, report::fmt(run.records[i].sample_index),
                      report::fmt(run.records[i].token_count), report::fmt(m.counts[i])});
    summary["marker"] = a.marker;
    summary["whole_word"] = a.whole_word;
    if (m.fit) {
      summary["slope"] = m.fit->slope;
      summary["intercept"] = m.fit->intercept;
      summary["pearson_r"] = m.fit->pearson_r;
    } else {
      summary["fit"] = "unavailable";
    }
  } else if (a.analysis == "coverage") {
    table.emplace(std::vector<std::string>{"kind", "x", "coverage", "n_questions"});
    for (std::int64_t j = 1; j <= k; ++j)
      table->add_row({"parallel", report::fmt(j), report::fmt(analysis::coverage_parallel(groups, j)),
                      report::fmt(groups.size())});
    if (!run.chains.empty()) {
      auto budgets = a.budgets;
      if (budgets.empty()) {
        const auto top = default_chain_budget_max(run);
        for (std::int64_t j = 1; j <= 10; ++j) budgets.push_back((top * j + 9) / 10);
      }
      for (const auto& p : analysis::coverage_sequential(run.chains, budgets))
        table->add_row({"sequential", report::fmt(p.budget), report::fmt(p.value),
                        report::fmt(p.n_questions)});
    }
  } else if (a.analysis == "transitions") {
    const auto t = analysis::transition_rates(run.chains);
    table.emplace(std::vector<std::string>{"kind", "step", "rate_wrong_to_correct", "rate_correct_to_wrong",
                                           "rate_stick_wrong", "rate_stick_correct", "n_chains",
                                           "n_wrong", "n_correct"});
    for (const auto* series : {&t.cumulative, &t.per_step})
      for (const auto& s : *series)
        table->add_row({series == &t.cumulative ? "cumulative" : "per_step", report::fmt(s.step),
                        report::fmt(s.rate_wrong_to_correct), report::fmt(s.rate_correct_to_wrong),
                        report::fmt(s.rate_stick_wrong), report::fmt(s.rate_stick_correct),
                        report::fmt(s.n_chains), report::fmt(s.n_wrong), report::fmt(s.n_correct)});
    summary["stick_rate"] = t.stick_rate;
    summary["n_initially_wrong"] = t.n_initially_wrong;
    summary["pooled_wrong_to_correct"] = t.pooled_wrong_to_correct;
    summary["pooled_correct_to_wrong"] = t.pooled_correct_to_wrong;
  } else if (a.analysis == "budget-curves") {
    const auto budgets = a.budgets.empty() ? default_budgets(run, k) : a.budgets;
    table.emplace(std::vector<std::string>{"method", "token_budget", "accuracy", "mean_samples", "n_questions"});
    for (const auto& name : a.methods.empty() ? std::vector<std::string>{"mv", "shortest", "smv"}
                                              : a.methods) {
      const auto m = aggregate::method_from_name(name);
      if (!m || *m == aggregate::Method::last_revision)
        throw UsageError("budget-curves method must be mv, shortest or smv");
      for (const auto& p : analysis::accuracy_vs_budget(groups, index, *m, budgets))
        table->add_row({name, report::fmt(p.x), report::fmt(p.accuracy), report::fmt(p.mean_samples),
                        report::fmt(p.n_questions)});
    }
  } else if (a.analysis == "rank-revision") {
    table.emplace(std::vector<std::string>{"filter", "step", "accuracy", "rate_wrong_to_correct",
                                           "rate_correct_to_wrong", "n_chains"});
    std::vector<std::pair<std::string, analysis::RankFilter>> filters;
    if (a.filter != "longest") filters.emplace_back("shortest", analysis::RankFilter::shortest);
    if (a.filter != "shortest") filters.emplace_back("longest", analysis::RankFilter::longest);
    for (const auto& [name, f] : filters)
      for (const auto& p : analysis::rank_filtered_revision(run.chains, groups, f))
        table->add_row({name, report::fmt(p.step), report::fmt(p.accuracy),
                        report::fmt(p.rate_wrong_to_correct), report::fmt(p.rate_correct_to_wrong),
                        report::fmt(p.n_chains)});
  }

  const auto path = report::write_csv(run.dir, a.run_id, a.analysis, *table);
  summary["csv"] = path.filename().string();
  summary["rows"] = table->rows().size();
  report::merge_summary(run.dir, a.run_id, a.analysis, summary);
  if (table->rows().size() <= 64) out << table->to_text();
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

// ---- simulate -----------------------------------------------------------

struct SimulateArgs {
  std::string params;
  std::int64_t questions = 100;
  std::int64_t k = 5;
  std::int64_t steps = 0;
  std::int64_t seed = 1;
  std::string out_run;
  std::string text_mode = "full";
};

int cmd_simulate(const fs::path& root, const SimulateArgs& a, std::ostream& out, std::ostream&) {
  simulator::SimParams params;
  if (!a.params.empty()) {
    if (!fs::exists(a.params)) throw UsageError("params file not found: " + a.params);
    try {
      params = json::parse(read_file(a.params)).get<simulator::SimParams>();
    } catch (const std::exception& e) {
      throw UsageError("cannot read params " + a.params + ": " + e.what());
    }
  }
  if (const auto errors = simulator::validate(params); !errors.empty()) {
    std::string msg = "invalid simulator parameters:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw UsageError(msg);
  }
  if (a.questions < 1 || a.k < 1 || a.steps < 0)
    throw UsageError("--questions and --k must be ≥ 1, --steps ≥ 0");
  if (store::RunStore::exists(root, a.out_run)) throw UsageError("run already exists: " + a.out_run);
  simulator::SimulatedRunOptions options;
  options.n_questions = a.questions;
  options.k = a.k;
  options.steps = a.steps;
  options.seed = a.seed;
  options.mode = simulator::text_mode_from_string(a.text_mode);
  simulator::write_simulated_run(root, a.out_run, params, options);
  const auto m = store::load_run(root, a.out_run).manifest;
  out << "run " << a.out_run << ": " << m.record_count << " records, records digest "
      << m.records_digest << "\n";
  return kExitOk;
}

}  // namespace

const std::vector<std::string>& analysis_names() {
  static const std::vector<std::string> names{"rank-groups", "correct-vs-incorrect", "truncation",
                                              "markers",     "coverage",             "transitions",
                                              "token-dist",  "budget-curves",        "rank-revision"};
  return names;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Test-time scaling evaluation toolkit", "tts"};
  app.require_subcommand(1);
  std::string runs_dir = "runs";
  app.add_option("--runs-dir", runs_dir, "Directory holding runs")->capture_default_str();

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "Sample k solutions per question");
  sample_cmd->add_option("--dataset", sample.dataset, "Question JSONL")->required();
  sample_cmd->add_option("--config", sample.config, "Run config JSON");
  sample_cmd->add_option("--out-run", sample.out_run, "Run id")->required();
  sample_cmd->add_option("--mode", sample.mode, "parallel, sequential or both")
      ->check(CLI::IsMember({"parallel", "sequential", "both"}));
  sample_cmd->add_option("--steps", sample.overrides.steps, "Revision steps (sequential/both)");
  sample.overrides.attach(sample_cmd, true);

  ReviseArgs revise;
  auto* revise_cmd = app.add_subcommand("revise", "Extend stored samples with revision steps");
  revise_cmd->add_option("--run", revise.run_id, "Run id")->required();
  revise_cmd->add_option("--steps", revise.steps, "Revision steps")->required();
  revise_cmd->add_option("--config", revise.config, "Run config JSON");

  AggregateArgs agg;
  auto* agg_cmd = app.add_subcommand("aggregate", "Aggregator accuracy per dataset");
  agg_cmd->add_option("--run", agg.run_id, "Run id")->required();
  agg_cmd->add_option("--method", agg.methods, "mv, shortest, smv or last (repeatable)");
  auto* sol = agg_cmd->add_option("--solutions", agg.solutions, "Use the first N samples");
  auto* bud = agg_cmd->add_option("--token-budget", agg.token_budget, "Admit samples within B tokens");
  sol->excludes(bud);
  agg_cmd->add_option("--tie-break", agg.tie_break, "Majority-vote tie-break: first or shorter")
      ->check(CLI::IsMember({"first", "shorter"}));

  AnalyzeArgs an;
  auto* an_cmd = app.add_subcommand("analyze", "Run one analysis and write its CSV");
  an_cmd->add_option("--run", an.run_id, "Run id")->required();
  an_cmd->add_option("--analysis", an.analysis, "Analysis name")->required();
  an_cmd->add_option("--k", an.k, "Samples per question considered");
  an_cmd->add_option("--limits", an.limits, "Token limits for truncation")->delimiter(',');
  an_cmd->add_option("--budgets", an.budgets, "Token budgets")->delimiter(',');
  an_cmd->add_option("--marker", an.marker, "Marker counted by markers")->capture_default_str();
  an_cmd->add_flag("--whole-word", an.whole_word, "Count whole-word marker matches only");
  an_cmd->add_option("--method", an.methods, "Aggregators for budget-curves");
  an_cmd->add_option("--filter", an.filter, "rank-revision group: shortest, longest or both")
      ->check(CLI::IsMember({"shortest", "longest", "both"}));

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a simulated run");
  sim_cmd->add_option("--params", sim.params, "Simulator parameter JSON");
  sim_cmd->add_option("--questions", sim.questions, "Number of questions")->capture_default_str();
  sim_cmd->add_option("--k", sim.k, "Samples per question")->capture_default_str();
  sim_cmd->add_option("--steps", sim.steps, "Recorded revision steps")->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "Seed")->capture_default_str();
  sim_cmd->add_option("--out-run", sim.out_run, "Run id")->required();
  sim_cmd->add_option("--text-mode", sim.text_mode, "full or compact")
      ->check(CLI::IsMember({"full", "compact"}));

  std::vector<const char*> argv{"tts"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const fs::path root = runs_dir;
  try {
    if (*sample_cmd) return cmd_sample(root, sample, out, err);
    if (*revise_cmd) return cmd_revise(root, revise, out, err);
    if (*agg_cmd) return cmd_aggregate(root, agg, out, err);
    if (*an_cmd) return cmd_analyze(root, an, out, err);
    if (*sim_cmd) return cmd_simulate(root, sim, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace tts::cli
