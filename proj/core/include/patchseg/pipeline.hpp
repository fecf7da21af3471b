#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "patchseg/inference.hpp"
#include "patchseg/metrics.hpp"
#include "patchseg/trainer.hpp"

namespace patchseg {

struct InferenceOptions {
    InferenceMode mode = InferenceMode::sliding;
    double beta = 3.0;
    double p = 256.0;
    int crop = 0;  // sliding window size; 0 means "use the training crop"
};

std::vector<PreparedStack> prepare_all(std::vector<CtStack> stacks);

std::vector<ScoreVolume> infer_all(std::span<const PreparedStack> stacks, ModelSet models, const InferenceOptions& options);

EvalReport evaluate_prepared(std::span<const ScoreVolume> predictions, std::span<const PreparedStack> stacks,
                             const EvalOptions& options = {});

/// Train on `train`, infer on `test` with every requested mode, evaluate.
struct TrainEvalResult {
    TrainResult training;
    std::vector<std::pair<InferenceMode, EvalReport>> reports;
};

TrainEvalResult train_and_evaluate(std::span<const PreparedStack> train_set, std::span<const PreparedStack> test_set,
                                   const TrainConfig& cfg, std::span<const InferenceMode> modes,
                                   const InferenceOptions& options,
                                   const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Evaluate an already trained network on `test` with every requested mode.
std::vector<std::pair<InferenceMode, EvalReport>> evaluate_modes(ReferenceNet<float>& net,
                                                                 std::span<const PreparedStack> test_set,
                                                                 std::span<const InferenceMode> modes,
                                                                 const InferenceOptions& options, int train_crop);

/// Subset of `stacks` whose ids are listed, in list order.
std::vector<PreparedStack> select_stacks(std::span<const PreparedStack> stacks, std::span<const std::string> ids);

}  // namespace patchseg
