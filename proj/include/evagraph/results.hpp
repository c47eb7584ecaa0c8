#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "evagraph/attacks.hpp"

namespace evagraph {

/// One run as a JSON document; `config` is echoed verbatim.
nlohmann::json result_to_json(const AttackResult& res, const nlohmann::json& config);

void write_result(const std::filesystem::path& path, const nlohmann::json& doc);

struct ReportRow {
  std::string dataset;
  std::string model;
  std::string objective;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double clean = 0.0;
  double attacked = 0.0;
};

/// Files matching a shell glob, sorted. No match is an error.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

/// A row per run file; a malformed file raises FormatError naming it.
std::vector<ReportRow> load_rows(const std::vector<std::filesystem::path>& files);

std::string rows_to_csv(const std::vector<ReportRow>& rows);

/// {objective: [{epsilon, clean_mean, attacked_mean, attacked_std, runs}]} sorted by epsilon.
nlohmann::json plot_series(const std::vector<ReportRow>& rows);

}  // namespace evagraph
