#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchseg/loss.hpp"
#include "patchseg/reference_net.hpp"
#include "patchseg/sampler.hpp"

namespace patchseg {

struct TrainConfig {
    double lr0 = 0.005;
    double momentum = 0.9;
    double weight_decay = 0.0;
    int total_steps = 0;
    /// Passes over the training frames, where one epoch is frames / N batches.
    /// Informational: total_steps drives the loop.
    double epochs = 0.0;
    BatchSpec batch;
    LossConfig loss;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // 0 disables intermediate checkpoints
    std::string preset = "small";

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const BatchSpec& b);
void from_json(const nlohmann::json& j, BatchSpec& b);

/// Step schedule: lr0 before floor(0.4 T), lr0/10 before floor(0.8 T),
/// lr0/100 afterwards. Throws ArgumentError for step outside [0, T).
double lr_at(int step, int total_steps, double lr0);
inline double lr_at(int step, const TrainConfig& cfg) { return lr_at(step, cfg.total_steps, cfg.lr0); }

/// Batches per epoch for a given training-frame count (frames / N).
double batches_per_epoch(std::size_t frames, const BatchSpec& spec);

/// SGD with heavy-ball momentum: v <- m v + (g + wd p); p <- p - lr v.
template <typename T>
class SgdMomentum {
public:
    SgdMomentum(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(const std::vector<Parameter<T>*>& params, double lr) {
        if (velocity_.size() != params.size()) {
            velocity_.clear();
            for (const auto* p : params) velocity_.emplace_back(p->value.size(), T{});
        }
        const T m = static_cast<T>(momentum_), wd = static_cast<T>(weight_decay_), rate = static_cast<T>(lr);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = *params[i];
            auto& v = velocity_[i];
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                v[k] = m * v[k] + (p.grad[k] + wd * p.value[k]);
                p.value[k] -= rate * v[k];
            }
        }
    }

private:
    double momentum_;
    double weight_decay_;
    std::vector<std::vector<T>> velocity_;
};

struct TrainLogRecord {
    int step = 0;
    double lr = 0.0;
    double loss = 0.0;
    double wallclock = 0.0;  // seconds since the start of training
};

struct TrainResult {
    ReferenceNet<float> net;
    std::vector<TrainLogRecord> log;
};

/// Run cfg.total_steps SGD steps on batches from the sampler. When out_dir
/// is given, writes train_log.ndjson, checkpoints/step_<n>/ at the
/// configured cadence and checkpoint/ at the end. Throws DivergenceError on
/// a non-finite loss (after writing divergence.json when out_dir is set).
TrainResult train(std::span<const PreparedStack> data, const TrainConfig& cfg,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                  const std::function<void(const TrainLogRecord&)>& on_step = {});

/// Reference point for budget equalization across crop sizes.
struct BudgetReference {
    int crop = 240;
    int batch = 16;
    double epochs = 400.0;
};

struct Budget {
    int crop = 0;
    int batch = 0;
    double epochs = 0.0;
    double exact_batch = 0.0;  // batch * (crop_ref / crop)^2 before rounding
    bool rounded = false;
};

/// Hold input pixels per batch (B C^2) and the gradient-step count fixed
/// across crop sizes: B(C) = B_ref (C_ref / C)^2 rounded to the nearest
/// integer >= 1, epochs scaled by B(C) / B_ref.
std::vector<Budget> equalize_budget(std::span<const int> crops, const BudgetReference& ref = {});

}  // namespace patchseg
