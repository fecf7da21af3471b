#include "patchseg/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "patchseg/error.hpp"

namespace patchseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_blob(const fs::path& path, const std::vector<float>& values) {
    std::vector<char> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void read_blob(const fs::path& path, std::vector<float>& values) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptionError("missing tensor blob " + path.string());
    if (fs::file_size(path) != values.size() * 4)
        throw CorruptionError("tensor blob " + path.string() + " has the wrong size");
    std::vector<unsigned char> bytes(values.size() * 4);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
        values[i] = std::bit_cast<float>(bits);
    }
}

}  // namespace

void save_checkpoint(const ReferenceNet<float>& net, const fs::path& dir, const json& training_config) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    json tensors = json::array();
    for (const auto* p : net.state()) {
        const std::string file = p->name + ".bin";
        tensors.push_back({{"name", p->name},
                           {"shape", p->shape},
                           {"kind", p->grad.empty() ? "buffer" : "parameter"},
                           {"file", file}});
        write_blob(dir / file, p->value);
    }
    const json manifest{{"architecture",
                         {{"name", "reference_fcn"},
                          {"preset", net.preset().name},
                          {"width", net.preset().width},
                          {"stride", net.stride()}}},
                        {"tensors", tensors},
                        {"training_config", training_config}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

json read_checkpoint_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw FormatError("no checkpoint manifest in " + dir.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("garbled checkpoint manifest in " + dir.string() + ": " + e.what());
    }
}

ReferenceNet<float> load_checkpoint(const fs::path& dir) {
    const json manifest = read_checkpoint_manifest(dir);
    try {
        const auto& arch = manifest.at("architecture");
        if (arch.at("name").get<std::string>() != "reference_fcn")
            throw FormatError("unsupported architecture in " + dir.string());
        NetPreset preset{arch.at("preset").get<std::string>(), arch.at("width").get<int>()};
        ReferenceNet<float> net(preset);
        auto state = net.state();
        const auto& tensors = manifest.at("tensors");
        if (tensors.size() != state.size())
            throw CorruptionError("checkpoint in " + dir.string() + " lists " + std::to_string(tensors.size()) +
                                  " tensors, architecture has " + std::to_string(state.size()));
        for (std::size_t i = 0; i < state.size(); ++i) {
            const auto& t = tensors[i];
            if (t.at("name").get<std::string>() != state[i]->name ||
                t.at("shape").get<std::vector<int>>() != state[i]->shape)
                throw CorruptionError("tensor " + t.at("name").get<std::string>() + " does not match architecture");
            read_blob(dir / t.at("file").get<std::string>(), state[i]->value);
        }
        net.mark_trained();
        return net;
    } catch (const json::exception& e) {
        throw FormatError("incomplete checkpoint manifest in " + dir.string() + ": " + e.what());
    }
}

}  // namespace patchseg
