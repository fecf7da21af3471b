#include "patchseg/stack_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "patchseg/error.hpp"

namespace patchseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
void write_le(const fs::path& path, std::span<const T> values) {
    std::vector<char> bytes(values.size() * sizeof(T));
    for (std::size_t i = 0; i < values.size(); ++i) {
        T v = values[i];
        char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        std::memcpy(bytes.data() + i * sizeof(T), raw, sizeof(T));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

template <typename T>
void read_le(const fs::path& path, std::span<T> values) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptionError("missing payload " + path.string());
    const auto expected = values.size() * sizeof(T);
    const auto actual = fs::file_size(path);
    if (actual != expected)
        throw CorruptionError(path.string() + " holds " + std::to_string(actual) +
                              " bytes, header implies " + std::to_string(expected));
    std::vector<char> bytes(expected);
    in.read(bytes.data(), static_cast<std::streamsize>(expected));
    if (!in) throw CorruptionError("short read on " + path.string());
    for (std::size_t i = 0; i < values.size(); ++i) {
        char raw[sizeof(T)];
        std::memcpy(raw, bytes.data() + i * sizeof(T), sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        std::memcpy(&values[i], raw, sizeof(T));
    }
}

void write_header(const fs::path& dir, const json& header) {
    std::ofstream out(dir / "header.json", std::ios::trunc);
    if (!out) throw IoError("cannot write header in " + dir.string());
    out << header.dump(2) << '\n';
}

json read_header(const fs::path& dir) {
    const auto path = dir / "header.json";
    std::ifstream in(path);
    if (!in) throw FormatError("no header.json in " + dir.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("garbled header " + path.string() + ": " + e.what());
    }
}

struct Shape {
    int depth, height, width;
};

Shape read_shape(const json& header, const fs::path& dir) {
    try {
        Shape s{header.at("D").get<int>(), header.at("H").get<int>(), header.at("W").get<int>()};
        if (s.depth < 1 || s.height < 1 || s.width < 1)
            throw FormatError("non-positive extent in " + dir.string());
        return s;
    } catch (const json::exception& e) {
        throw FormatError("header in " + dir.string() + " lacks shape: " + e.what());
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

void save_stack(const CtStack& stack, const fs::path& dir) {
    stack.validate();
    ensure_dir(dir);
    write_header(dir, json{{"stack_id", stack.stack_id},
                           {"D", stack.frames.depth()},
                           {"H", stack.frames.height()},
                           {"W", stack.frames.width()},
                           {"hu_dtype", "int16-le"},
                           {"has_mask", stack.has_mask()}});
    write_le(dir / "frames.bin", stack.frames.values());
    if (stack.mask) write_le(dir / "mask.bin", stack.mask->values());
}

CtStack load_stack(const fs::path& dir) {
    const json header = read_header(dir);
    const Shape shape = read_shape(header, dir);
    CtStack stack;
    try {
        stack.stack_id = header.at("stack_id").get<std::string>();
        if (header.at("hu_dtype").get<std::string>() != "int16-le")
            throw FormatError("unsupported hu_dtype in " + dir.string());
        stack.frames = Volume<std::int16_t>(shape.depth, shape.height, shape.width);
        read_le(dir / "frames.bin", stack.frames.values());
        if (header.at("has_mask").get<bool>()) {
            stack.mask.emplace(shape.depth, shape.height, shape.width);
            read_le(dir / "mask.bin", stack.mask->values());
        }
    } catch (const json::exception& e) {
        throw FormatError("header in " + dir.string() + " is incomplete: " + e.what());
    }
    try {
        stack.validate();
    } catch (const ArgumentError& e) {
        throw CorruptionError(e.what());
    }
    return stack;
}

void save_scores(const ScoreVolume& scores, const fs::path& dir) {
    ensure_dir(dir);
    write_header(dir, json{{"stack_id", scores.stack_id},
                           {"D", scores.scores.depth()},
                           {"H", scores.scores.height()},
                           {"W", scores.scores.width()},
                           {"score_dtype", "float32-le"}});
    write_le(dir / "scores.bin", scores.scores.values());
}

ScoreVolume load_scores(const fs::path& dir) {
    const json header = read_header(dir);
    const Shape shape = read_shape(header, dir);
    ScoreVolume out;
    try {
        out.stack_id = header.at("stack_id").get<std::string>();
        if (header.at("score_dtype").get<std::string>() != "float32-le")
            throw FormatError("unsupported score_dtype in " + dir.string());
    } catch (const json::exception& e) {
        throw FormatError("header in " + dir.string() + " is incomplete: " + e.what());
    }
    out.scores = Volume<float>(shape.depth, shape.height, shape.width);
    read_le(dir / "scores.bin", out.scores.values());
    return out;
}

}  // namespace patchseg
