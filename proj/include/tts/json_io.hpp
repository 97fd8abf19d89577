#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tts/core.hpp"

namespace tts {

using json = nlohmann::json;

void to_json(json& j, const NormalizedAnswer& a);
void from_json(const json& j, NormalizedAnswer& a);

void to_json(json& j, const Question& q);
void from_json(const json& j, Question& q);

// Flat key-value document; unknown keys are rejected.
void to_json(json& j, const RunConfig& c);
void from_json(const json& j, RunConfig& c);

void to_json(json& j, const GenerationRecord& r);
void from_json(const json& j, GenerationRecord& r);

json step_to_json(const std::string& question_id, std::int64_t sample_index,
                  const RevisionStep& step, std::int64_t completion_tokens);

std::vector<std::string> run_config_keys();

// One Question per line; blank lines are skipped. Validates each question and
// rejects duplicate ids.
std::vector<Question> load_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<Question>& questions);

RunConfig load_run_config(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace tts
