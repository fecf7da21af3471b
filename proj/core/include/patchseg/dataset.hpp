#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "patchseg/stack.hpp"

namespace patchseg {

struct ManifestEntry {
    std::string stack_id;
    int label = 0;
};

/// Contents of a dataset's manifest.json: {params, stacks: [{stack_id, label}]}.
struct Manifest {
    nlohmann::json params;
    std::vector<ManifestEntry> stacks;

    std::vector<std::string> stack_ids() const;
    int label_of(const std::string& stack_id) const;
};

void save_manifest(const Manifest& manifest, const std::filesystem::path& dataset_dir);
Manifest load_manifest(const std::filesystem::path& dataset_dir);

/// Load the named stacks (all of them when ids is empty) from
/// <dataset_dir>/<stack_id>/.
std::vector<CtStack> load_stacks(const std::filesystem::path& dataset_dir,
                                 std::span<const std::string> ids = {});

}  // namespace patchseg
