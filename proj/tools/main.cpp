// patchseg command line: synthetic data, training, inference, evaluation,
// cross-validation, ablation grids, saliency maps and overlays.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "patchseg/checkpoint.hpp"
#include "patchseg/cross_validation.hpp"
#include "patchseg/dataset.hpp"
#include "patchseg/error.hpp"
#include "patchseg/folds.hpp"
#include "patchseg/grid.hpp"
#include "patchseg/overlay.hpp"
#include "patchseg/pipeline.hpp"
#include "patchseg/run_info.hpp"
#include "patchseg/saliency.hpp"
#include "patchseg/stack_io.hpp"
#include "patchseg/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace patchseg;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// Stack selection by fold: all stacks when folds <= 1.
struct SplitOptions {
    int folds = 1;
    int fold = 0;
    std::uint64_t seed = 0;

    void add(CLI::App& app) {
        app.add_option("--folds", folds, "Number of folds for the split (1 = no split)")->check(CLI::PositiveNumber);
        app.add_option("--fold", fold, "Held-out fold index");
        app.add_option("--split-seed", seed, "Seed of the fold split");
    }

    /// Test ids (held-out fold) or training ids (its complement).
    std::vector<std::string> select(const Manifest& manifest, bool test) const {
        const auto ids = manifest.stack_ids();
        if (folds <= 1) return ids;
        const FoldSplit split = split_folds(ids, folds, seed);
        if (fold < 0 || fold >= folds) throw ArgumentError("fold index out of range");
        return test ? split.members(fold) : split.complement(fold);
    }

    json to_json() const { return {{"folds", folds}, {"fold", fold}, {"split_seed", seed}}; }
};

std::vector<PreparedStack> load_prepared(const fs::path& data, std::span<const std::string> ids) {
    return prepare_all(load_stacks(data, ids));
}

TrainConfig load_train_config(const std::string& path) {
    TrainConfig cfg;
    if (!path.empty()) cfg = read_json(path).get<TrainConfig>();
    return cfg;
}

void apply_overrides(TrainConfig& cfg, int steps, const std::string& preset, std::optional<std::uint64_t> seed) {
    if (steps > 0) cfg.total_steps = steps;
    if (!preset.empty()) cfg.preset = preset;
    if (seed) cfg.seed = *seed;
    cfg.validate();
}

std::vector<ScoreVolume> load_score_dir(const fs::path& dir, std::span<const std::string> ids) {
    std::vector<ScoreVolume> out;
    for (const auto& id : ids) out.push_back(load_scores(dir / id));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Patch-trained fully convolutional segmentation of CT stacks"};
    app.require_subcommand(1);
    std::string command_line;
    for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic phantom corpus");
    std::string synth_out, synth_config;
    int synth_stacks = 40;
    std::optional<std::uint64_t> synth_seed;
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--config", synth_config, "PhantomParams JSON");
    synth->add_option("--stacks", synth_stacks, "Number of stacks")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "Generator seed");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the reference network");
    std::string train_data, train_out, train_config, train_preset;
    int train_steps = 0;
    std::optional<std::uint64_t> train_seed;
    SplitOptions train_split;
    train_cmd->add_option("--data", train_data, "Dataset directory")->required();
    train_cmd->add_option("--out", train_out, "Run directory")->required();
    train_cmd->add_option("--config", train_config, "TrainConfig JSON");
    train_cmd->add_option("--steps", train_steps, "Override total_steps");
    train_cmd->add_option("--preset", train_preset, "Override network preset (tiny|small|base)");
    train_cmd->add_option("--seed", train_seed, "Override training seed");
    train_split.add(*train_cmd);

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "Score stacks with one checkpoint or an ensemble");
    std::string infer_data, infer_out, infer_mode = "sliding";
    std::vector<std::string> infer_ckpts;
    double infer_beta = 3.0, infer_p = 256.0;
    int infer_crop = 0;
    SplitOptions infer_split;
    infer_cmd->add_option("--data", infer_data, "Dataset directory")->required();
    infer_cmd->add_option("--out", infer_out, "Score output directory")->required();
    infer_cmd->add_option("--ensemble,--checkpoint", infer_ckpts, "Checkpoint directories")->required();
    infer_cmd->add_option("--mode", infer_mode, "sliding|fullconv")->check(CLI::IsMember({"sliding", "fullconv"}));
    infer_cmd->add_option("--beta", infer_beta, "Sliding-window overlap factor");
    infer_cmd->add_option("--crop", infer_crop, "Window size (default: training crop)");
    infer_cmd->add_option("--p", infer_p, "L^p pooling exponent for the per-stack summary")->check(CLI::PositiveNumber);
    infer_split.add(*infer_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate score volumes against ground truth");
    std::string eval_data, eval_scores, eval_out;
    double eval_threshold = 0.5, eval_p = 256.0;
    SplitOptions eval_split;
    eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
    eval_cmd->add_option("--scores", eval_scores, "Score directory written by infer")->required();
    eval_cmd->add_option("--out", eval_out, "Report directory")->required();
    eval_cmd->add_option("--threshold", eval_threshold, "Dice/Jaccard threshold");
    eval_cmd->add_option("--p", eval_p, "L^p pooling exponent");
    eval_split.add(*eval_cmd);

    // cv
    auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
    std::string cv_data, cv_out, cv_config, cv_preset, cv_mode = "sliding";
    int cv_folds = 4, cv_steps = 0;
    std::uint64_t cv_split_seed = 0;
    double cv_beta = 3.0;
    cv_cmd->add_option("--data", cv_data, "Dataset directory")->required();
    cv_cmd->add_option("--out", cv_out, "Run directory")->required();
    cv_cmd->add_option("--config", cv_config, "TrainConfig JSON");
    cv_cmd->add_option("--folds", cv_folds, "Number of folds")->check(CLI::Range(2, 1000));
    cv_cmd->add_option("--split-seed", cv_split_seed, "Seed of the fold split");
    cv_cmd->add_option("--steps", cv_steps, "Override total_steps");
    cv_cmd->add_option("--preset", cv_preset, "Override network preset");
    cv_cmd->add_option("--mode", cv_mode, "sliding|fullconv")->check(CLI::IsMember({"sliding", "fullconv"}));
    cv_cmd->add_option("--beta", cv_beta, "Sliding-window overlap factor");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
    std::string ablate_data, ablate_out, ablate_grid, ablate_preset = "small", ablate_reuse, ablate_config;
    int ablate_steps = 400, ablate_folds = 4, ablate_fold = 0;
    std::uint64_t ablate_seed = 0;
    bool ablate_audit_only = false;
    ablate->add_option("--data", ablate_data, "Dataset directory");
    ablate->add_option("--out", ablate_out, "Run directory")->required();
    ablate->add_option("--grid", ablate_grid, "table1|table2|table3|table4 or a custom grid JSON")->required();
    ablate->add_option("--config", ablate_config, "Base TrainConfig JSON (lr0, momentum, alpha)");
    ablate->add_option("--steps", ablate_steps, "Gradient steps per cell")->check(CLI::PositiveNumber);
    ablate->add_option("--preset", ablate_preset, "Network preset");
    ablate->add_option("--seed", ablate_seed, "Base seed");
    ablate->add_option("--folds", ablate_folds, "Folds of the train/test split");
    ablate->add_option("--fold", ablate_fold, "Held-out fold");
    ablate->add_option("--reuse", ablate_reuse, "Earlier grid directory whose matching checkpoints are reused");
    ablate->add_flag("--audit-only", ablate_audit_only, "Check the control rules and write the grid without training");

    // saliency
    auto* sal = app.add_subcommand("saliency", "Input-gradient maps of ground-truth regions");
    std::string sal_data, sal_ckpt, sal_stack, sal_out;
    int sal_component = -1;
    sal->add_option("--data", sal_data, "Dataset directory")->required();
    sal->add_option("--checkpoint", sal_ckpt, "Checkpoint directory")->required();
    sal->add_option("--stack", sal_stack, "Stack id")->required();
    sal->add_option("--out", sal_out, "Output directory")->required();
    sal->add_option("--component", sal_component, "Component index (default: all)");

    // overlay
    auto* ovl = app.add_subcommand("overlay", "Side-by-side prediction / ground-truth PNGs");
    std::string ovl_data, ovl_scores, ovl_out;
    OverlayOptions ovl_options;
    SplitOptions ovl_split;
    ovl->add_option("--data", ovl_data, "Dataset directory")->required();
    ovl->add_option("--scores", ovl_scores, "Score directory written by infer")->required();
    ovl->add_option("--out", ovl_out, "Image directory")->required();
    ovl->add_option("--threshold", ovl_options.threshold, "Prediction colouring threshold");
    ovl->add_option("--random-frames", ovl_options.random_frames, "Frames per stack to render (0 = all)");
    ovl->add_option("--seed", ovl_options.seed, "Frame selection seed");
    ovl_split.add(*ovl);

    CLI11_PARSE(app, argc, argv);

    fs::path run_dir;
    json config_echo, seeds;
    try {
        if (synth->parsed()) {
            PhantomParams params;
            if (!synth_config.empty()) params = read_json(synth_config).get<PhantomParams>();
            if (synth_seed) params.seed = *synth_seed;
            run_dir = synth_out;
            config_echo = {{"params", params}, {"stacks", synth_stacks}};
            seeds = {{"generator", params.seed}};
            const Manifest m = generate_dataset(params, synth_stacks, synth_out);
            std::cout << "wrote " << m.stacks.size() << " stacks to " << synth_out << '\n';
        } else if (train_cmd->parsed()) {
            TrainConfig cfg = load_train_config(train_config);
            apply_overrides(cfg, train_steps, train_preset, train_seed);
            run_dir = train_out;
            const Manifest manifest = load_manifest(train_data);
            const auto ids = train_split.select(manifest, false);
            config_echo = {{"train", cfg}, {"split", train_split.to_json()}, {"data", train_data}, {"stacks", ids}};
            seeds = {{"train", cfg.seed}, {"split", train_split.seed}};
            const auto data = load_prepared(train_data, ids);
            const auto result = train(data, cfg, run_dir, [&](const TrainLogRecord& r) {
                if (r.step % 50 == 0 || r.step + 1 == cfg.total_steps)
                    std::printf("step %5d  lr %.5g  loss %.5f  %.1fs\n", r.step, r.lr, r.loss, r.wallclock);
            });
            std::cout << "checkpoint: " << (run_dir / "checkpoint").string() << '\n';
        } else if (infer_cmd->parsed()) {
            run_dir = infer_out;
            std::vector<ReferenceNet<float>> nets;
            int train_crop = 0;
            for (const auto& c : infer_ckpts) {
                nets.push_back(load_checkpoint(c));
                const json tc = read_checkpoint_manifest(c).value("training_config", json::object());
                if (tc.contains("spec")) train_crop = tc.at("spec").at("C").get<int>();
            }
            InferenceOptions options;
            options.mode = inference_mode_from_string(infer_mode);
            options.beta = infer_beta;
            options.p = infer_p;
            options.crop = infer_crop > 0 ? infer_crop : train_crop;
            if (options.mode == InferenceMode::sliding && options.crop <= 0)
                throw ArgumentError("--crop is required when the checkpoint records no training crop");
            const Manifest manifest = load_manifest(infer_data);
            const auto ids = infer_split.select(manifest, true);
            config_echo = {{"checkpoints", infer_ckpts}, {"mode", infer_mode}, {"beta", infer_beta},
                           {"p", infer_p}, {"crop", options.crop}, {"split", infer_split.to_json()}, {"stacks", ids}};
            seeds = {{"split", infer_split.seed}};
            std::vector<Backbone<float>*> models;
            for (auto& n : nets) models.push_back(&n);
            const auto data = load_prepared(infer_data, ids);
            for (const auto& s : infer_all(data, models, options)) {
                save_scores(s, run_dir / s.stack_id);
                const ScoreSummary summary = summarize(s, options.p);
                std::ofstream(run_dir / s.stack_id / "summary.json", std::ios::trunc)
                    << json{{"stack_id", s.stack_id}, {"frame_avg", summary.frame_avg}, {"frame_lp", summary.frame_lp},
                            {"stack_score", summary.stack_score}, {"p", summary.p}, {"beta", options.beta},
                            {"crop", options.crop}, {"mode", infer_mode}, {"ensemble_size", nets.size()}}
                           .dump(2)
                    << '\n';
            }
            std::cout << "scored " << ids.size() << " stacks with " << nets.size() << " model(s)\n";
        } else if (eval_cmd->parsed()) {
            run_dir = eval_out;
            const Manifest manifest = load_manifest(eval_data);
            const auto ids = eval_split.select(manifest, true);
            config_echo = {{"scores", eval_scores}, {"threshold", eval_threshold}, {"p", eval_p},
                           {"split", eval_split.to_json()}};
            seeds = {{"split", eval_split.seed}};
            const auto gt = load_stacks(eval_data, ids);
            const auto scores = load_score_dir(eval_scores, ids);
            EvalOptions options{eval_threshold, eval_p, &manifest};
            const EvalReport report = evaluate(scores, gt, options);
            write_json(run_dir / "report.json", report.to_json());
            write_curves_csv(scores, gt, run_dir / "roc.csv", run_dir / "pr.csv", options);
            std::cout << report.to_json().dump(2) << '\n';
        } else if (cv_cmd->parsed()) {
            TrainConfig cfg = load_train_config(cv_config);
            apply_overrides(cfg, cv_steps, cv_preset, std::nullopt);
            run_dir = cv_out;
            InferenceOptions options;
            options.mode = inference_mode_from_string(cv_mode);
            options.beta = cv_beta;
            config_echo = {{"train", cfg}, {"folds", cv_folds}, {"split_seed", cv_split_seed}, {"mode", cv_mode},
                           {"beta", cv_beta}};
            seeds = {{"train", cfg.seed}, {"split", cv_split_seed}};
            const Manifest manifest = load_manifest(cv_data);
            const auto all = load_prepared(cv_data, {});
            const auto ids = manifest.stack_ids();
            const auto report = cross_validate(ids, cv_folds, cv_split_seed,
                                               [&](int fold, std::span<const std::string> train_ids,
                                                   std::span<const std::string> test_ids) {
                                                   const auto tr = select_stacks(all, train_ids);
                                                   const auto te = select_stacks(all, test_ids);
                                                   const InferenceMode modes[] = {options.mode};
                                                   const auto r = train_and_evaluate(
                                                       tr, te, cfg, modes, options,
                                                       run_dir / ("fold_" + std::to_string(fold)));
                                                   std::cout << "fold " << fold << " done\n";
                                                   return r.reports.front().second;
                                               });
            write_json(run_dir / "cv.json", report.to_json());
            std::cout << report.to_json().at("summary").dump(2) << '\n';
        } else if (ablate->parsed()) {
            DeskScale desk;
            desk.steps = ablate_steps;
            desk.preset = ablate_preset;
            desk.seed = ablate_seed;
            if (!ablate_config.empty()) desk.base = read_json(ablate_config).get<TrainConfig>();
            run_dir = ablate_out;
            ExperimentConfig grid = ablate_grid.ends_with(".json")
                                        ? grid_from_json(read_json(ablate_grid), desk)
                                        : named_grid(ablate_grid, desk);
            if (!ablate_grid.ends_with(".json")) {
                grid.folds = ablate_folds;
                grid.test_fold = ablate_fold;
            }
            if (!ablate_reuse.empty()) grid.reuse_checkpoints = ablate_reuse;
            audit_controls(grid);
            config_echo = to_json(grid);
            seeds = {{"base", grid.base.seed}, {"split", grid.split_seed}};
            if (ablate_audit_only) {
                write_json(run_dir / "grid.json", config_echo);
                std::cout << "grid '" << grid.name << "' passes its " << to_string(grid.control) << " audit\n";
            } else {
                if (ablate_data.empty()) throw ArgumentError("--data is required unless --audit-only");
                const Manifest manifest = load_manifest(ablate_data);
                const FoldSplit split = split_folds(manifest.stack_ids(), grid.folds, grid.split_seed);
                const auto tr = load_prepared(ablate_data, split.complement(grid.test_fold));
                const auto te = load_prepared(ablate_data, split.members(grid.test_fold));
                const GridResults results = run_grid(grid, tr, te, run_dir);
                std::cout << format_table(results);
                if (!results.all_ok()) {
                    write_run_json(run_dir, command_line, config_echo, seeds, "failed cells");
                    return 1;
                }
            }
        } else if (sal->parsed()) {
            run_dir = sal_out;
            fs::create_directories(run_dir);
            config_echo = {{"checkpoint", sal_ckpt}, {"stack", sal_stack}, {"component", sal_component}};
            seeds = json::object();
            const ReferenceNet<float> net = load_checkpoint(sal_ckpt);
            const PreparedStack stack = prepare(load_stack(fs::path(sal_data) / sal_stack));
            const auto regions = gt_components(stack.stack);
            if (regions.empty()) throw ArgumentError("stack " + sal_stack + " has no ground-truth region");
            if (sal_component >= static_cast<int>(regions.size())) throw ArgumentError("component index out of range");
            json index = json::array();
            for (int i = 0; i < static_cast<int>(regions.size()); ++i) {
                if (sal_component >= 0 && i != sal_component) continue;
                const SaliencyMap map = saliency(net, stack, regions[i]);
                char name[64];
                std::snprintf(name, sizeof(name), "component_%03d", i);
                write_png(run_dir / (std::string(name) + ".png"),
                          compose_heatmap(stack.windowed, map.frame, map.magnitude));
                std::ofstream raw(run_dir / (std::string(name) + "_magnitude.f64"), std::ios::binary | std::ios::trunc);
                raw.write(reinterpret_cast<const char*>(map.magnitude.data()),
                          static_cast<std::streamsize>(map.magnitude.size() * sizeof(double)));
                index.push_back({{"component", i}, {"frame", map.frame}, {"pixels", regions[i].pixels.size()},
                                 {"objective", map.objective}, {"image", std::string(name) + ".png"}});
            }
            write_json(run_dir / "saliency.json", index);
            std::cout << "wrote " << index.size() << " saliency map(s)\n";
        } else if (ovl->parsed()) {
            run_dir = ovl_out;
            const Manifest manifest = load_manifest(ovl_data);
            const auto ids = ovl_split.select(manifest, true);
            config_echo = {{"scores", ovl_scores}, {"threshold", ovl_options.threshold},
                           {"random_frames", ovl_options.random_frames}, {"split", ovl_split.to_json()}};
            seeds = {{"frames", ovl_options.seed}, {"split", ovl_split.seed}};
            std::size_t count = 0;
            for (const auto& id : ids) {
                const PreparedStack stack = prepare(load_stack(fs::path(ovl_data) / id));
                count += render_overlay(stack, load_scores(fs::path(ovl_scores) / id), run_dir, ovl_options).size();
            }
            std::cout << "wrote " << count << " overlay image(s)\n";
        }
        write_run_json(run_dir, command_line, config_echo, seeds);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (!run_dir.empty()) {
            try {
                write_run_json(run_dir, command_line, config_echo, seeds, std::string("error: ") + e.what());
            } catch (const std::exception&) {
            }
        }
        return 1;
    }
}
