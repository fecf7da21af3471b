#include "patchseg/pipeline.hpp"

#include <map>

#include "patchseg/error.hpp"

namespace patchseg {

std::vector<PreparedStack> prepare_all(std::vector<CtStack> stacks) {
    std::vector<PreparedStack> out;
    out.reserve(stacks.size());
    for (auto& s : stacks) out.push_back(prepare(std::move(s)));
    return out;
}

std::vector<ScoreVolume> infer_all(std::span<const PreparedStack> stacks, ModelSet models, const InferenceOptions& options) {
    std::vector<ScoreVolume> out;
    out.reserve(stacks.size());
    for (const auto& s : stacks) out.push_back(infer(s, models, options.mode, options.crop, options.beta));
    return out;
}

EvalReport evaluate_prepared(std::span<const ScoreVolume> predictions, std::span<const PreparedStack> stacks,
                             const EvalOptions& options) {
    std::vector<CtStack> gt;
    gt.reserve(stacks.size());
    for (const auto& s : stacks) gt.push_back(s.stack);
    return evaluate(predictions, gt, options);
}

std::vector<std::pair<InferenceMode, EvalReport>> evaluate_modes(ReferenceNet<float>& net,
                                                                 std::span<const PreparedStack> test_set,
                                                                 std::span<const InferenceMode> modes,
                                                                 const InferenceOptions& options, int train_crop) {
    Backbone<float>* models[] = {&net};
    std::vector<std::pair<InferenceMode, EvalReport>> reports;
    for (const InferenceMode mode : modes) {
        InferenceOptions o = options;
        o.mode = mode;
        if (o.crop == 0) o.crop = train_crop;
        const auto predictions = infer_all(test_set, models, o);
        reports.emplace_back(mode, evaluate_prepared(predictions, test_set, {.threshold = 0.5, .p = o.p}));
    }
    return reports;
}

TrainEvalResult train_and_evaluate(std::span<const PreparedStack> train_set, std::span<const PreparedStack> test_set,
                                   const TrainConfig& cfg, std::span<const InferenceMode> modes,
                                   const InferenceOptions& options, const std::optional<std::filesystem::path>& out_dir) {
    TrainEvalResult result{train(train_set, cfg, out_dir), {}};
    result.reports = evaluate_modes(result.training.net, test_set, modes, options, cfg.batch.crop);
    return result;
}

std::vector<PreparedStack> select_stacks(std::span<const PreparedStack> stacks, std::span<const std::string> ids) {
    std::map<std::string, const PreparedStack*> by_id;
    for (const auto& s : stacks) by_id[s.stack.stack_id] = &s;
    std::vector<PreparedStack> out;
    for (const auto& id : ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw ArgumentError("unknown stack id '" + id + "'");
        out.push_back(*it->second);
    }
    return out;
}

}  // namespace patchseg
