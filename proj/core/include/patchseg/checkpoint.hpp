#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "patchseg/reference_net.hpp"

namespace patchseg {

// Checkpoint directory:
//   manifest.json  {architecture: {name, preset, width, stride},
//                   tensors: [{name, shape, kind, file}], training_config}
//   <tensor name>.bin  raw float32 little-endian values
void save_checkpoint(const ReferenceNet<float>& net, const std::filesystem::path& dir,
                     const nlohmann::json& training_config = nlohmann::json::object());

/// Throws FormatError on a missing/garbled manifest and CorruptionError when
/// a blob disagrees with the declared shape.
ReferenceNet<float> load_checkpoint(const std::filesystem::path& dir);

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir);

}  // namespace patchseg
