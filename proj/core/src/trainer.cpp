#include "patchseg/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>

#include "patchseg/backbone.hpp"
#include "patchseg/checkpoint.hpp"
#include "patchseg/error.hpp"

namespace patchseg {
namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
    if (!(lr0 > 0.0)) throw ArgumentError("lr0 must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ArgumentError("momentum must lie in [0,1)");
    if (weight_decay < 0.0) throw ArgumentError("weight_decay must be non-negative");
    if (total_steps <= 0) throw ArgumentError("total_steps must be positive");
    if (checkpoint_every < 0) throw ArgumentError("checkpoint_every must be non-negative");
    loss.validate();
    net_preset(preset);
}

void to_json(json& j, const BatchSpec& b) {
    j = json{{"C", b.crop}, {"N", b.images_per_batch}, {"K", b.patches_per_image}, {"B", b.batch_size}};
}

void from_json(const json& j, BatchSpec& b) {
    b.crop = j.at("C").get<int>();
    b.images_per_batch = j.at("N").get<int>();
    b.patches_per_image = j.value("K", 1);
    b.batch_size = j.value("B", b.images_per_batch * b.patches_per_image);
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"lr0", c.lr0},
             {"momentum", c.momentum},
             {"weight_decay", c.weight_decay},
             {"total_steps", c.total_steps},
             {"epochs", c.epochs},
             {"spec", c.batch},
             {"loss", {{"alpha", c.loss.alpha}}},
             {"seed", c.seed},
             {"checkpoint_every", c.checkpoint_every},
             {"preset", c.preset}};
}

void from_json(const json& j, TrainConfig& c) {
    const TrainConfig d;
    c.lr0 = j.value("lr0", d.lr0);
    c.momentum = j.value("momentum", d.momentum);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.total_steps = j.value("total_steps", d.total_steps);
    c.epochs = j.value("epochs", d.epochs);
    c.batch = j.contains("spec") ? j.at("spec").get<BatchSpec>() : d.batch;
    c.loss.alpha = j.contains("loss") ? j.at("loss").value("alpha", d.loss.alpha) : d.loss.alpha;
    c.seed = j.value("seed", d.seed);
    c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
    c.preset = j.value("preset", d.preset);
}

double lr_at(int step, int total_steps, double lr0) {
    if (total_steps <= 0 || step < 0 || step >= total_steps)
        throw ArgumentError("step " + std::to_string(step) + " outside [0," + std::to_string(total_steps) + ")");
    const int first_drop = static_cast<int>(std::floor(0.4 * total_steps));
    const int second_drop = static_cast<int>(std::floor(0.8 * total_steps));
    if (step < first_drop) return lr0;
    if (step < second_drop) return lr0 / 10.0;
    return lr0 / 100.0;
}

double batches_per_epoch(std::size_t frames, const BatchSpec& spec) {
    return static_cast<double>(frames) / spec.images_per_batch;
}

namespace {

// splitmix64 finalizer; derives independent seeds for init and sampling.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

void write_divergence(const fs::path& dir, const TrainConfig& cfg, int step, double lr, double loss,
                      ReferenceNet<float>& net) {
    json params = json::array();
    for (const auto* p : net.parameters()) {
        double sq = 0.0;
        std::size_t non_finite = 0;
        for (float v : p->value) {
            if (!std::isfinite(v)) ++non_finite;
            else sq += static_cast<double>(v) * v;
        }
        params.push_back({{"name", p->name}, {"l2", std::sqrt(sq)}, {"non_finite", non_finite}});
    }
    std::ofstream out(dir / "divergence.json", std::ios::trunc);
    out << json{{"step", step}, {"lr", lr}, {"loss", std::isfinite(loss) ? json(loss) : json(std::to_string(loss))},
                {"config", cfg}, {"parameters", params}}
               .dump(2)
        << '\n';
}

}  // namespace

TrainResult train(std::span<const PreparedStack> data, const TrainConfig& cfg, const std::optional<fs::path>& out_dir,
                  const std::function<void(const TrainLogRecord&)>& on_step) {
    cfg.validate();
    if (data.empty()) throw ArgumentError("training set is empty");
    PatchSampler sampler(data);
    cfg.batch.validate(sampler.frame_size());
    if (static_cast<std::size_t>(cfg.batch.images_per_batch) > sampler.frame_count())
        throw ArgumentError("N exceeds the number of training frames");

    TrainResult result{ReferenceNet<float>(net_preset(cfg.preset), derive_seed(cfg.seed, 0)), {}};
    ReferenceNet<float>& net = result.net;
    std::mt19937_64 rng(derive_seed(cfg.seed, 1));
    SgdMomentum<float> sgd(cfg.momentum, cfg.weight_decay);
    const auto params = net.parameters();

    std::ofstream log_file;
    if (out_dir) {
        fs::create_directories(*out_dir);
        log_file.open(*out_dir / "train_log.ndjson", std::ios::trunc);
        if (!log_file) throw IoError("cannot write training log in " + out_dir->string());
    }

    const int crop = cfg.batch.crop;
    const std::size_t plane = static_cast<std::size_t>(crop) * crop;
    Tensor<float> input(cfg.batch.batch_size, 3, crop, crop);
    std::vector<std::uint8_t> targets(cfg.batch.batch_size * plane);
    Tensor<float> grad(cfg.batch.batch_size, 1, crop, crop);
    const auto start = std::chrono::steady_clock::now();

    for (int step = 0; step < cfg.total_steps; ++step) {
        const double lr = lr_at(step, cfg);
        const auto batch = sampler.make_batch(cfg.batch, rng);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            std::copy(batch[i].input.begin(), batch[i].input.end(), input.sample(static_cast<int>(i)));
            std::copy(batch[i].target.begin(), batch[i].target.end(), targets.begin() + i * plane);
        }
        net.set_training(true);
        net.zero_grad();
        const Tensor<float> logits = forward_any_size<float>(net, input);
        const double loss = weighted_bce<float>(logits.data, targets, cfg.loss, grad.data);
        if (!std::isfinite(loss)) {
            if (out_dir) write_divergence(*out_dir, cfg, step, lr, loss, net);
            throw DivergenceError("non-finite loss at step " + std::to_string(step) + " (lr " + json(lr).dump() +
                                  ")" + (out_dir ? "; state written to " + (*out_dir / "divergence.json").string() : ""));
        }
        backward_any_size<float>(net, grad, false);
        sgd.step(params, lr);

        const TrainLogRecord record{step, lr, loss,
                                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
        result.log.push_back(record);
        if (log_file) {
            log_file << json{{"step", record.step}, {"lr", record.lr}, {"loss", record.loss},
                             {"wallclock", record.wallclock}}
                            .dump()
                     << '\n';
        }
        if (on_step) on_step(record);
        if (out_dir && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 &&
            step + 1 < cfg.total_steps) {
            char name[32];
            std::snprintf(name, sizeof(name), "step_%06d", step + 1);
            save_checkpoint(net, *out_dir / "checkpoints" / name, cfg);
        }
    }
    net.set_training(false);
    net.mark_trained();
    if (out_dir) save_checkpoint(net, *out_dir / "checkpoint", cfg);
    return result;
}

std::vector<Budget> equalize_budget(std::span<const int> crops, const BudgetReference& ref) {
    if (ref.crop <= 0 || ref.batch <= 0 || !(ref.epochs > 0.0)) throw ArgumentError("invalid budget reference");
    std::vector<Budget> out;
    for (int crop : crops) {
        if (crop <= 0) throw ArgumentError("crop sizes must be positive");
        Budget b;
        b.crop = crop;
        const double ratio = static_cast<double>(ref.crop) / crop;
        b.exact_batch = ref.batch * ratio * ratio;
        b.batch = std::max(1, static_cast<int>(std::lround(b.exact_batch)));
        b.rounded = static_cast<double>(b.batch) != b.exact_batch;
        b.epochs = ref.epochs * b.batch / ref.batch;
        out.push_back(b);
    }
    return out;
}

}  // namespace patchseg
