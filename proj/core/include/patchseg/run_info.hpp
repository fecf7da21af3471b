#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

namespace patchseg {

/// Library version and build details.
nlohmann::json build_info();

/// Writes <dir>/run.json: {command, config, seeds, build, started, finished, status}.
void write_run_json(const std::filesystem::path& dir, const std::string& command, const nlohmann::json& config,
                    const nlohmann::json& seeds, const std::string& status = "ok");

}  // namespace patchseg
