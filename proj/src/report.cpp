#include "tts/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tts/store.hpp"

namespace tts::report {

Table::Table(std::vector<std::string> header) : header_(std::move(header)) {}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size())
    throw std::invalid_argument("row has " + std::to_string(row.size()) + " cells, header has " +
                                std::to_string(header_.size()));
  rows_.push_back(std::move(row));
}

namespace {

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void append_csv_line(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += csv_cell(cells[i]);
  }
  out += '\n';
}

}  // namespace

std::string Table::to_csv() const {
  std::string out;
  append_csv_line(out, header_);
  for (const auto& r : rows_) append_csv_line(out, r);
  return out;
}

std::string Table::to_text() const {
  std::vector<std::size_t> width(header_.size());
  for (std::size_t i = 0; i < header_.size(); ++i) width[i] = header_[i].size();
  for (const auto& r : rows_)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += "  ";
      out += cells[i];
      if (i + 1 < cells.size()) out.append(width[i] - cells[i].size(), ' ');
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string fmt(std::int64_t v) { return std::to_string(v); }

std::filesystem::path csv_path(const std::filesystem::path& run_dir, const std::string& run_id,
                               const std::string& analysis) {
  return store::analysis_dir(run_dir) / (run_id + "_" + analysis + ".csv");
}

std::filesystem::path summary_path(const std::filesystem::path& run_dir, const std::string& run_id) {
  return store::analysis_dir(run_dir) / (run_id + "_summary.json");
}

std::filesystem::path write_csv(const std::filesystem::path& run_dir, const std::string& run_id,
                                const std::string& analysis, const Table& table) {
  const auto path = csv_path(run_dir, run_id, analysis);
  std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, table.to_csv());
  return path;
}

void merge_summary(const std::filesystem::path& run_dir, const std::string& run_id,
                   const std::string& key, const json& value) {
  const auto path = summary_path(run_dir, run_id);
  std::filesystem::create_directories(path.parent_path());
  json summary = json::object();
  if (std::filesystem::exists(path)) summary = json::parse(read_file(path));
  summary[key] = value;
  write_file_atomic(path, summary.dump(2) + "\n");
}

}  // namespace tts::report
