#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tts/json_io.hpp"

// Tidy CSV tables and the per-run JSON summary under <run>/analysis/.
namespace tts::report {

class Table {
 public:
  explicit Table(std::vector<std::string> header);

  void add_row(std::vector<std::string> row);
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string to_csv() const;
  // Space-aligned columns for the terminal.
  std::string to_text() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Fixed six decimals so reruns are byte-identical.
std::string fmt(double v);
std::string fmt(std::int64_t v);
inline std::string fmt(int v) { return fmt(static_cast<std::int64_t>(v)); }
inline std::string fmt(std::size_t v) { return fmt(static_cast<std::int64_t>(v)); }

std::filesystem::path csv_path(const std::filesystem::path& run_dir, const std::string& run_id,
                               const std::string& analysis);
std::filesystem::path summary_path(const std::filesystem::path& run_dir, const std::string& run_id);

std::filesystem::path write_csv(const std::filesystem::path& run_dir, const std::string& run_id,
                                const std::string& analysis, const Table& table);

// Sets summary[key] = value, keeping the other keys.
void merge_summary(const std::filesystem::path& run_dir, const std::string& run_id,
                   const std::string& key, const json& value);

}  // namespace tts::report
