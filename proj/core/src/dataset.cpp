#include "patchseg/dataset.hpp"

#include <fstream>

#include "patchseg/error.hpp"
#include "patchseg/stack_io.hpp"

namespace patchseg {
using nlohmann::json;

std::vector<std::string> Manifest::stack_ids() const {
    std::vector<std::string> ids;
    ids.reserve(stacks.size());
    for (const auto& e : stacks) ids.push_back(e.stack_id);
    return ids;
}

int Manifest::label_of(const std::string& stack_id) const {
    for (const auto& e : stacks)
        if (e.stack_id == stack_id) return e.label;
    throw ArgumentError("stack '" + stack_id + "' not in manifest");
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& dataset_dir) {
    json stacks = json::array();
    for (const auto& e : manifest.stacks) stacks.push_back({{"stack_id", e.stack_id}, {"label", e.label}});
    std::ofstream out(dataset_dir / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + dataset_dir.string());
    out << json{{"params", manifest.params}, {"stacks", stacks}}.dump(2) << '\n';
}

Manifest load_manifest(const std::filesystem::path& dataset_dir) {
    std::ifstream in(dataset_dir / "manifest.json");
    if (!in) throw FormatError("no manifest.json in " + dataset_dir.string());
    try {
        const json j = json::parse(in);
        Manifest m;
        m.params = j.value("params", json::object());
        for (const auto& e : j.at("stacks"))
            m.stacks.push_back({e.at("stack_id").get<std::string>(), e.at("label").get<int>()});
        return m;
    } catch (const json::exception& e) {
        throw FormatError("bad manifest in " + dataset_dir.string() + ": " + e.what());
    }
}

std::vector<CtStack> load_stacks(const std::filesystem::path& dataset_dir, std::span<const std::string> ids) {
    std::vector<std::string> wanted(ids.begin(), ids.end());
    if (wanted.empty()) wanted = load_manifest(dataset_dir).stack_ids();
    std::vector<CtStack> stacks;
    stacks.reserve(wanted.size());
    for (const auto& id : wanted) stacks.push_back(load_stack(dataset_dir / id));
    return stacks;
}

}  // namespace patchseg
