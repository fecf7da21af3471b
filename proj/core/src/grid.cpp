#include "patchseg/grid.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "patchseg/checkpoint.hpp"
#include "patchseg/error.hpp"

namespace patchseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kReferenceFrame = 512;
constexpr int kReferenceCrop = 240;

std::uint64_t cell_seed(std::uint64_t base, const std::string& label) {
    std::uint64_t h = 1469598103934665603ull ^ base;  // FNV-1a over the label
    for (char c : label) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
    return h;
}

std::string make_label(const BatchSpec& b) {
    return "C" + std::to_string(b.crop) + "_N" + std::to_string(b.images_per_batch) + "_K" +
           std::to_string(b.patches_per_image);
}

GridCell make_cell(const BatchSpec& batch, int steps, std::uint64_t seed, std::vector<InferenceMode> modes,
                   double exact_batch = 0.0) {
    GridCell c;
    c.batch = batch;
    c.label = make_label(batch);
    c.total_steps = steps;
    c.seed = cell_seed(seed, c.label);
    c.modes = std::move(modes);
    c.exact_batch = exact_batch > 0.0 ? exact_batch : batch.batch_size;
    return c;
}

ExperimentConfig base_config(const std::string& name, GridControl control, const DeskScale& desk) {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.control = control;
    cfg.base = desk.base;
    cfg.base.preset = desk.preset;
    cfg.base.seed = desk.seed;
    cfg.base.total_steps = desk.steps;
    cfg.split_seed = desk.seed;
    return cfg;
}

ExperimentConfig budget_grid(const std::string& name, std::span<const int> reference_crops,
                             std::vector<InferenceMode> modes, const DeskScale& desk) {
    ExperimentConfig cfg = base_config(name, GridControl::pixel_budget, desk);
    std::vector<int> crops;
    for (int c : reference_crops) crops.push_back(desk_crop(c, desk.frame_size));
    const BudgetReference ref{desk_crop(kReferenceCrop, desk.frame_size), desk.reference_batch, 1.0};
    for (const auto& b : equalize_budget(crops, ref))
        cfg.cells.push_back(make_cell(BatchSpec::of(b.crop, b.batch, 1), desk.steps, desk.seed, modes, b.exact_batch));
    return cfg;
}

}  // namespace

std::string to_string(GridControl control) {
    switch (control) {
        case GridControl::pixel_budget: return "pixel_budget";
        case GridControl::batch_and_crop: return "batch_and_crop";
        case GridControl::batch_and_steps: return "batch_and_steps";
        case GridControl::none: return "none";
    }
    return "none";
}

GridControl grid_control_from_string(const std::string& name) {
    for (auto c : {GridControl::pixel_budget, GridControl::batch_and_crop, GridControl::batch_and_steps, GridControl::none})
        if (to_string(c) == name) return c;
    throw ArgumentError("unknown grid control '" + name + "'");
}

int desk_crop(int reference_crop, int frame_size) {
    return std::max(1, static_cast<int>(std::lround(static_cast<double>(reference_crop) * frame_size / kReferenceFrame)));
}

ExperimentConfig table1_grid(const DeskScale& desk) {
    static constexpr int crops[] = {80, 120, 160, 240, 480};
    return budget_grid("table1", crops, {InferenceMode::sliding}, desk);
}

ExperimentConfig table2_grid(const DeskScale& desk) {
    ExperimentConfig cfg = base_config("table2", GridControl::batch_and_crop, desk);
    const int crop = desk_crop(kReferenceCrop, desk.frame_size);
    for (const auto& [n, k] : {std::pair{16, 1}, {8, 2}, {4, 4}, {2, 8}})
        cfg.cells.push_back(make_cell(BatchSpec::of(crop, n, k), desk.steps, desk.seed, {InferenceMode::sliding}));
    return cfg;
}

ExperimentConfig table3_grid(const DeskScale& desk) {
    ExperimentConfig cfg = base_config("table3", GridControl::batch_and_steps, desk);
    for (int c : {64, 120, 240, 360, 480})
        cfg.cells.push_back(make_cell(BatchSpec::of(desk_crop(c, desk.frame_size), desk.reference_batch, 1), desk.steps,
                                      desk.seed, {InferenceMode::sliding}));
    return cfg;
}

ExperimentConfig table4_grid(const DeskScale& desk) {
    static constexpr int crops[] = {80, 120, 240};
    return budget_grid("table4", crops, {InferenceMode::sliding, InferenceMode::fullconv}, desk);
}

ExperimentConfig named_grid(const std::string& name, const DeskScale& desk) {
    if (name == "table1") return table1_grid(desk);
    if (name == "table2") return table2_grid(desk);
    if (name == "table3") return table3_grid(desk);
    if (name == "table4") return table4_grid(desk);
    throw ArgumentError("unknown grid '" + name + "'");
}

ExperimentConfig grid_from_json(const json& j, const DeskScale& desk) {
    try {
        ExperimentConfig cfg = base_config(j.value("name", std::string("custom")),
                                           grid_control_from_string(j.value("control", std::string("none"))), desk);
        if (j.contains("train")) cfg.base = j.at("train").get<TrainConfig>();
        cfg.beta = j.value("beta", cfg.beta);
        cfg.p = j.value("p", cfg.p);
        cfg.folds = j.value("folds", cfg.folds);
        cfg.test_fold = j.value("test_fold", cfg.test_fold);
        cfg.split_seed = j.value("split_seed", cfg.split_seed);
        for (const auto& c : j.at("cells")) {
            const BatchSpec batch = c.get<BatchSpec>();
            std::vector<InferenceMode> modes;
            for (const auto& m : c.value("modes", std::vector<std::string>{"sliding"}))
                modes.push_back(inference_mode_from_string(m));
            GridCell cell = make_cell(batch, c.value("steps", cfg.base.total_steps > 0 ? cfg.base.total_steps : desk.steps),
                                      cfg.base.seed, modes);
            if (c.contains("label")) cell.label = c.at("label").get<std::string>();
            if (c.contains("seed")) cell.seed = c.at("seed").get<std::uint64_t>();
            cfg.cells.push_back(cell);
        }
        return cfg;
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("invalid grid specification: ") + e.what());
    }
}

json to_json(const ExperimentConfig& config) {
    json cells = json::array();
    for (const auto& c : config.cells) {
        std::vector<std::string> modes;
        for (auto m : c.modes) modes.push_back(to_string(m));
        cells.push_back({{"label", c.label},
                         {"spec", c.batch},
                         {"steps", c.total_steps},
                         {"epochs", c.epochs},
                         {"exact_batch", c.exact_batch},
                         {"seed", c.seed},
                         {"modes", modes}});
    }
    return json{{"name", config.name},
                {"control", to_string(config.control)},
                {"train", config.base},
                {"beta", config.beta},
                {"p", config.p},
                {"folds", config.folds},
                {"test_fold", config.test_fold},
                {"split_seed", config.split_seed},
                {"cells", cells}};
}

void audit_controls(const ExperimentConfig& config) {
    if (config.cells.empty()) throw ContractError("grid '" + config.name + "' has no cells");
    std::set<std::string> labels;
    for (const auto& c : config.cells) {
        if (c.batch.batch_size != c.batch.images_per_batch * c.batch.patches_per_image)
            throw ContractError("cell " + c.label + ": B != N x K");
        if (!labels.insert(c.label).second) throw ContractError("duplicate cell label " + c.label);
        if (c.modes.empty()) throw ContractError("cell " + c.label + " has no inference mode");
    }
    const GridCell& first = config.cells.front();
    auto fail = [&](const GridCell& c, const std::string& what) {
        throw ContractError("grid '" + config.name + "' (" + to_string(config.control) + ") cell " + c.label + ": " + what);
    };
    for (const auto& c : config.cells) {
        switch (config.control) {
            case GridControl::pixel_budget: {
                const double pixels = c.exact_batch * c.batch.crop * c.batch.crop;
                const double ref = first.exact_batch * first.batch.crop * first.batch.crop;
                if (std::abs(pixels - ref) > 1e-9 * ref) fail(c, "input pixels per batch differ");
                if (!c.batch.crop || c.batch.patches_per_image != 1) fail(c, "budget sweep expects K = 1");
                if (c.total_steps != first.total_steps) fail(c, "step count differs");
                break;
            }
            case GridControl::batch_and_crop:
                if (c.batch.batch_size != first.batch.batch_size) fail(c, "batch size differs");
                if (c.batch.crop != first.batch.crop) fail(c, "crop size differs");
                if (c.total_steps != first.total_steps) fail(c, "step count differs");
                break;
            case GridControl::batch_and_steps:
                if (c.batch.batch_size != first.batch.batch_size) fail(c, "batch size differs");
                if (c.total_steps != first.total_steps) fail(c, "step count differs");
                break;
            case GridControl::none: break;
        }
    }
}

bool GridResults::all_ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
}

namespace {

const EvalReport* report_for(const CellResult& c, InferenceMode mode) {
    for (const auto& [m, r] : c.reports)
        if (m == mode) return &r;
    return nullptr;
}

std::string pct(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * *v);
    return buf;
}

std::string pct(double v) { return pct(std::optional<double>(v)); }

std::string gap(const std::optional<double>& full, const std::optional<double>& slide) {
    if (!full || !slide) return pct(full);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.1f (%+.1f)", 100.0 * *full, 100.0 * (*full - *slide));
    return buf;
}

std::string fmt_epochs(double e) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", e);
    return buf;
}

}  // namespace

json GridResults::to_json() const {
    json out = json::object();
    out["config"] = patchseg::to_json(config);
    json cell_list = json::array();
    for (const auto& c : cells) {
        json reports = json::object();
        for (const auto& [mode, r] : c.reports) reports[to_string(mode)] = r.to_json();
        cell_list.push_back({{"label", c.cell.label},
                             {"spec", c.cell.batch},
                             {"steps", c.cell.total_steps},
                             {"epochs", c.cell.epochs},
                             {"seed", c.cell.seed},
                             {"ok", c.ok},
                             {"error", c.error},
                             {"reused_checkpoint", c.reused_checkpoint},
                             {"seconds", c.seconds},
                             {"reports", reports}});
    }
    out["cells"] = cell_list;
    out["trends"] = trends();
    out["all_ok"] = all_ok();
    return out;
}

json GridResults::trends() const {
    json t = json::object();
    json gaps = json::array();
    int sliding_wins = 0, comparisons = 0;
    for (const auto& c : cells) {
        const EvalReport* s = report_for(c, InferenceMode::sliding);
        const EvalReport* f = report_for(c, InferenceMode::fullconv);
        if (!c.ok || !s || !f) continue;
        json g{{"label", c.cell.label}, {"seed", c.cell.seed}};
        auto add = [&](const char* name, std::optional<double> fv, std::optional<double> sv) {
            if (!fv || !sv) return;
            g[name] = *fv - *sv;
            ++comparisons;
            if (*sv >= *fv) ++sliding_wins;
        };
        add("dice", f->dice, s->dice);
        add("jaccard", f->jaccard, s->jaccard);
        add("pixel_ap", f->pixel_ap, s->pixel_ap);
        add("frame_ap", f->frame_ap, s->frame_ap);
        gaps.push_back(g);
    }
    if (!gaps.empty())
        t["fullconv_minus_sliding"] = {{"cells", gaps}, {"sliding_at_least_fullconv", sliding_wins},
                                       {"comparisons", comparisons}};
    if (config.control == GridControl::batch_and_crop) {
        json rows = json::array();
        std::vector<std::pair<int, double>> by_n;
        for (const auto& c : cells) {
            const EvalReport* s = report_for(c, InferenceMode::sliding);
            if (!c.ok || !s) continue;
            rows.push_back({{"N", c.cell.batch.images_per_batch}, {"seed", c.cell.seed}, {"dice", s->dice},
                            {"pixel_ap", s->pixel_ap ? json(*s->pixel_ap) : json(nullptr)}});
            if (s->pixel_ap) by_n.emplace_back(c.cell.batch.images_per_batch, *s->pixel_ap);
        }
        std::sort(by_n.begin(), by_n.end());
        bool monotone = true;
        for (std::size_t i = 1; i < by_n.size(); ++i) monotone = monotone && by_n[i].second >= by_n[i - 1].second;
        t["batch_diversity"] = {{"cells", rows}, {"pixel_ap_non_decreasing_in_N", monotone}};
    }
    return t;
}

std::string format_table(const GridResults& results) {
    std::ostringstream out;
    const auto& cells = results.cells;
    out << "### " << results.config.name << " (" << to_string(results.config.control) << ")\n\n";
    const bool has_fullconv = std::any_of(cells.begin(), cells.end(), [](const CellResult& c) {
        return std::find(c.cell.modes.begin(), c.cell.modes.end(), InferenceMode::fullconv) != c.cell.modes.end();
    });
    if (has_fullconv) {
        out << "| C | B | Epoch | Dice | Jaccard | PixelAP | FrameAP |\n|---|---|---|---|---|---|---|\n";
        for (const auto& c : cells) {
            out << "| " << c.cell.batch.crop << " | " << c.cell.batch.batch_size << " | " << fmt_epochs(c.cell.epochs) << " | ";
            const EvalReport* s = report_for(c, InferenceMode::sliding);
            const EvalReport* f = report_for(c, InferenceMode::fullconv);
            if (!c.ok || !f) {
                out << "failed | | | |\n";
                continue;
            }
            auto sv = [&](auto member) { return s ? std::optional<double>((*s).*member) : std::nullopt; };
            out << gap(f->dice, sv(&EvalReport::dice)) << " | " << gap(f->jaccard, sv(&EvalReport::jaccard)) << " | "
                << gap(f->pixel_ap, s ? s->pixel_ap : std::nullopt) << " | "
                << gap(f->frame_ap, s ? s->frame_ap : std::nullopt) << " |\n";
        }
        out << "\nFully convolutional values; parentheses give the gap to sliding-window inference.\n";
    } else if (results.config.control == GridControl::pixel_budget) {
        out << "| Crop Size |";
        for (const auto& c : cells) out << ' ' << c.cell.batch.crop << " |";
        out << "\n|---|";
        for (std::size_t i = 0; i < cells.size(); ++i) out << "---|";
        auto row = [&](const char* name, auto&& value) {
            out << "\n| " << name << " |";
            for (const auto& c : cells) out << ' ' << value(c) << " |";
        };
        row("Batch Size", [](const CellResult& c) { return std::to_string(c.cell.batch.batch_size); });
        row("Epoch", [](const CellResult& c) { return fmt_epochs(c.cell.epochs); });
        auto metric = [](auto get) {
            return [get](const CellResult& c) {
                const EvalReport* r = report_for(c, InferenceMode::sliding);
                return c.ok && r ? pct(get(*r)) : std::string("failed");
            };
        };
        row("Dice", metric([](const EvalReport& r) { return std::optional<double>(r.dice); }));
        row("Jaccard", metric([](const EvalReport& r) { return std::optional<double>(r.jaccard); }));
        row("Pixel AP", metric([](const EvalReport& r) { return r.pixel_ap; }));
        row("Frame AP", metric([](const EvalReport& r) { return r.frame_ap; }));
        out << '\n';
    } else {
        out << "| N | K | B | C | Epoch | Dice | Jaccard | PixelAP | FrameAP |\n|---|---|---|---|---|---|---|---|---|\n";
        for (const auto& c : cells) {
            const EvalReport* r = report_for(c, InferenceMode::sliding);
            out << "| " << c.cell.batch.images_per_batch << " | " << c.cell.batch.patches_per_image << " | "
                << c.cell.batch.batch_size << " | " << c.cell.batch.crop << " | " << fmt_epochs(c.cell.epochs) << " | ";
            if (!c.ok || !r) {
                out << "failed | | | |\n";
                continue;
            }
            out << pct(r->dice) << " | " << pct(r->jaccard) << " | " << pct(r->pixel_ap) << " | " << pct(r->frame_ap)
                << " |\n";
        }
    }
    std::size_t failed = std::count_if(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok; });
    if (failed) {
        out << "\nFailed cells:\n";
        for (const auto& c : cells)
            if (!c.ok) out << "- " << c.cell.label << ": " << c.error << '\n';
    }
    return out.str();
}

GridResults run_grid(const ExperimentConfig& config, std::span<const PreparedStack> train_set,
                     std::span<const PreparedStack> test_set, const std::optional<fs::path>& out_dir) {
    audit_controls(config);
    std::size_t frames = 0;
    for (const auto& s : train_set) frames += static_cast<std::size_t>(s.stack.depth());

    GridResults results{config, {}};
    for (auto& cell : results.config.cells)
        cell.epochs = frames ? static_cast<double>(cell.total_steps) * cell.batch.images_per_batch / frames : 0.0;

    for (const auto& cell : results.config.cells) {
        CellResult r;
        r.cell = cell;
        const auto start = std::chrono::steady_clock::now();
        try {
            TrainConfig cfg = config.base;
            cfg.batch = cell.batch;
            cfg.total_steps = cell.total_steps;
            cfg.epochs = cell.epochs;
            cfg.seed = cell.seed;
            std::optional<fs::path> cell_dir;
            if (out_dir) cell_dir = *out_dir / "cells" / cell.label;

            std::optional<ReferenceNet<float>> net;
            if (config.reuse_checkpoints) {
                const fs::path ckpt = *config.reuse_checkpoints / "cells" / cell.label / "checkpoint";
                if (fs::exists(ckpt / "manifest.json")) {
                    TrainConfig stored = read_checkpoint_manifest(ckpt).at("training_config").get<TrainConfig>();
                    stored.epochs = cfg.epochs;
                    if (json(stored) == json(cfg)) {
                        net = load_checkpoint(ckpt);
                        r.reused_checkpoint = true;
                    }
                }
            }
            if (!net) net = train(train_set, cfg, cell_dir).net;

            InferenceOptions options;
            options.beta = config.beta;
            options.p = config.p;
            r.reports = evaluate_modes(*net, test_set, cell.modes, options, cell.batch.crop);
            r.ok = true;
            if (cell_dir) {
                fs::create_directories(*cell_dir);
                for (const auto& [mode, report] : r.reports) {
                    std::ofstream f(*cell_dir / ("report_" + to_string(mode) + ".json"), std::ios::trunc);
                    f << report.to_json().dump(2) << '\n';
                }
            }
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results.cells.push_back(std::move(r));
    }
    if (out_dir) {
        fs::create_directories(*out_dir);
        std::ofstream(*out_dir / "results.json", std::ios::trunc) << results.to_json().dump(2) << '\n';
        std::ofstream(*out_dir / "table.md", std::ios::trunc) << format_table(results);
    }
    return results;
}

}  // namespace patchseg
