#pragma once

#include <filesystem>

#include "patchseg/stack.hpp"

namespace patchseg {

// Stack directory layout:
//   header.json  {stack_id, D, H, W, hu_dtype: "int16-le", has_mask}
//   frames.bin   D*H*W little-endian int16, frame-major row-major
//   mask.bin     D*H*W uint8 (only when has_mask)
// Score volumes use the same scheme with score_dtype "float32-le" and
// scores.bin.

void save_stack(const CtStack& stack, const std::filesystem::path& dir);
CtStack load_stack(const std::filesystem::path& dir);

void save_scores(const ScoreVolume& scores, const std::filesystem::path& dir);
ScoreVolume load_scores(const std::filesystem::path& dir);

}  // namespace patchseg
