#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "evagraph/attacks.hpp"
#include "evagraph/synth.hpp"

namespace evagraph::cli {

/// Entry point shared by the executable and the tests. Returns the exit code:
/// 0 success, 2 usage or configuration error, 1 anything else.
int run(const std::vector<std::string>& args);

/// Attack config with every default spelled out.
nlohmann::json default_attack_config();

/// Reads a config file. A result document is accepted and its config echo used.
nlohmann::json load_config(const std::filesystem::path& path);

/// `patch` wins over `base`, recursively for objects.
nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& patch);

GAConfig ga_from_json(const nlohmann::json& cfg);
FitnessSpec fitness_from_json(const nlohmann::json& cfg);
SbmParams sbm_from_json(const nlohmann::json& cfg);

/// Runs one attack as described by a fully merged config.
nlohmann::json run_attack_config(const nlohmann::json& cfg);

/// Default results root: $EVAGRAPH_RESULTS_DIR or ./results.
std::filesystem::path results_root();

}  // namespace evagraph::cli
