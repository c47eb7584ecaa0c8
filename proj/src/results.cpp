#include "evagraph/results.hpp"

#include <glob.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace evagraph {

namespace {

nlohmann::json number(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

nlohmann::json metrics_json(const std::map<std::string, double>& m) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [k, v] : m) out[k] = number(v);
  return out;
}

nlohmann::json telemetry_json(const std::vector<GenerationRecord>& records) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : records) {
    out.push_back({{"generation", r.generation},
                   {"best_fitness", number(r.best_fitness)},
                   {"mean_fitness", number(r.mean_fitness)},
                   {"violations", r.violations}});
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

nlohmann::json result_to_json(const AttackResult& res, const nlohmann::json& config) {
  nlohmann::json doc;
  doc["config"] = config;
  doc["seed"] = res.seed;
  doc["mode"] = res.mode;
  doc["objective"] = to_string(res.objective);
  doc["primary_metric"] = primary_metric(res.objective);
  doc["delta"] = res.delta;
  doc["best_fitness"] = number(res.best_fitness);
  doc["clean_metrics"] = metrics_json(res.clean_metrics);
  doc["attacked_metrics"] = metrics_json(res.attacked_metrics);
  doc["flips"] = nlohmann::json::array();
  for (const auto& f : res.flips) doc["flips"].push_back({{"r", f.r}, {"c", f.c}, {"op", f.add ? "add" : "remove"}});
  doc["telemetry"] = telemetry_json(res.telemetry);
  if (!res.chunks.empty()) {
    doc["chunks"] = nlohmann::json::array();
    for (const auto& c : res.chunks) {
      doc["chunks"].push_back({{"nodes", c.nodes.size()},
                               {"delta", c.delta},
                               {"steps", c.steps},
                               {"flips", c.flips},
                               {"best_fitness", number(c.best_fitness)},
                               {"telemetry", telemetry_json(c.telemetry)}});
    }
  }
  if (res.target) {
    doc["target"] = *res.target;
    doc["minimal_budget"] = res.minimal_budget ? nlohmann::json(*res.minimal_budget) : nlohmann::json("NA");
  }
  doc["evaluations"] = res.evaluations;
  doc["wall_seconds"] = res.wall_seconds;
  doc["warnings"] = res.warnings;
  return doc;
}

void write_result(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::filesystem::path> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  if (out.empty()) throw IoError("no result files match '" + pattern + "'");
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ReportRow> load_rows(const std::vector<std::filesystem::path>& files) {
  if (files.empty()) throw IoError("no result files given");
  std::vector<ReportRow> rows;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
      const auto doc = nlohmann::json::parse(in);
      const auto& cfg = doc.at("config");
      const auto metric = doc.at("primary_metric").get<std::string>();
      ReportRow row;
      row.dataset = cfg.value("dataset", std::string{});
      row.model = cfg.value("model", std::string{});
      row.objective = doc.at("objective").get<std::string>();
      row.epsilon = cfg.value("epsilon", 0.0);
      row.seed = doc.at("seed").get<std::uint64_t>();
      const auto& clean = doc.at("clean_metrics").at(metric);
      const auto& attacked = doc.at("attacked_metrics").at(metric);
      row.clean = clean.is_null() ? std::nan("") : clean.get<double>();
      row.attacked = attacked.is_null() ? std::nan("") : attacked.get<double>();
      rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed result file " + path.string() + ": " + e.what());
    }
  }
  return rows;
}

std::string rows_to_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "dataset,model,objective,epsilon,seed,clean,attacked\n";
  for (const auto& r : rows) {
    out << csv_field(r.dataset) << ',' << csv_field(r.model) << ',' << csv_field(r.objective) << ',' << r.epsilon
        << ',' << r.seed << ',' << r.clean << ',' << r.attacked << '\n';
  }
  return out.str();
}

nlohmann::json plot_series(const std::vector<ReportRow>& rows) {
  std::map<std::string, std::map<double, std::vector<const ReportRow*>>> groups;
  for (const auto& r : rows) groups[r.objective][r.epsilon].push_back(&r);
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [objective, by_eps] : groups) {
    auto& series = out[objective] = nlohmann::json::array();
    for (const auto& [eps, runs] : by_eps) {
      double clean = 0.0;
      double attacked = 0.0;
      for (const auto* r : runs) {
        clean += r->clean;
        attacked += r->attacked;
      }
      const auto k = static_cast<double>(runs.size());
      clean /= k;
      attacked /= k;
      double var = 0.0;
      for (const auto* r : runs) var += (r->attacked - attacked) * (r->attacked - attacked);
      series.push_back({{"epsilon", eps},
                        {"clean_mean", number(clean)},
                        {"attacked_mean", number(attacked)},
                        {"attacked_std", number(runs.size() > 1 ? std::sqrt(var / (k - 1.0)) : 0.0)},
                        {"runs", runs.size()}});
    }
  }
  return out;
}

}  // namespace evagraph
