#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchseg/pipeline.hpp"

namespace patchseg {

/// Which variables a grid holds fixed across its cells.
enum class GridControl {
    pixel_budget,    // B * C^2 and step count constant (patch-size sweep)
    batch_and_crop,  // B and C constant, N * K = B (batch-diversity sweep)
    batch_and_steps, // B and step count constant, C varies (context sweep)
    none,
};

std::string to_string(GridControl control);
GridControl grid_control_from_string(const std::string& name);

struct GridCell {
    std::string label;
    BatchSpec batch;
    int total_steps = 0;
    double epochs = 0.0;       // filled in from the training-frame count
    double exact_batch = 0.0;  // unrounded B from budget equalization
    std::uint64_t seed = 0;
    std::vector<InferenceMode> modes;
};

struct ExperimentConfig {
    std::string name;
    GridControl control = GridControl::none;
    TrainConfig base;
    std::vector<GridCell> cells;
    double beta = 3.0;
    double p = 256.0;
    int folds = 4;
    int test_fold = 0;
    std::uint64_t split_seed = 0;
    /// Directory of an earlier grid whose cells/<label>/checkpoint is reused
    /// when its training config matches.
    std::optional<std::filesystem::path> reuse_checkpoints;
};

nlohmann::json to_json(const ExperimentConfig& config);

/// Desk-scale mapping of the reference protocol: crop sizes are rescaled by
/// frame_size / 512 and every cell trains for `steps` gradient steps.
struct DeskScale {
    int frame_size = 128;
    int steps = 400;
    int reference_batch = 16;
    std::uint64_t seed = 0;
    std::string preset = "small";
    TrainConfig base;  // lr, momentum, alpha; batch and steps are overridden per cell
};

/// Reference crop size scaled to the desk frame size.
int desk_crop(int reference_crop, int frame_size);

ExperimentConfig table1_grid(const DeskScale& desk);  // patch-size sweep, budget equalized
ExperimentConfig table2_grid(const DeskScale& desk);  // (N,K) in {(16,1),(8,2),(4,4),(2,8)}
ExperimentConfig table3_grid(const DeskScale& desk);  // context sweep at fixed B and steps
ExperimentConfig table4_grid(const DeskScale& desk);  // sliding vs fully convolutional
ExperimentConfig named_grid(const std::string& name, const DeskScale& desk);

/// Custom grid: {name, control, beta, p, folds, test_fold, split_seed,
/// train: TrainConfig, cells: [{label?, C, N, K, B?, steps, modes?, seed?}]}.
ExperimentConfig grid_from_json(const nlohmann::json& j, const DeskScale& desk);

/// Throws ContractError when a grid violates its control rule.
void audit_controls(const ExperimentConfig& config);

struct CellResult {
    GridCell cell;
    std::vector<std::pair<InferenceMode, EvalReport>> reports;
    bool ok = false;
    bool reused_checkpoint = false;
    std::string error;
    double seconds = 0.0;
};

struct GridResults {
    ExperimentConfig config;
    std::vector<CellResult> cells;

    bool all_ok() const;
    nlohmann::json to_json() const;
    /// Trend summary: sliding minus fully-convolutional gaps per cell and
    /// whether metrics decline with batch diversity.
    nlohmann::json trends() const;
};

/// Train and evaluate every cell. Failures are recorded per cell and the
/// grid continues. Writes cells/<label>/ under out_dir when given.
GridResults run_grid(const ExperimentConfig& config, std::span<const PreparedStack> train_set,
                     std::span<const PreparedStack> test_set,
                     const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Markdown table with the reference layout for the grid's control type.
std::string format_table(const GridResults& results);

}  // namespace patchseg
