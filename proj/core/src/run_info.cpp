#include "patchseg/run_info.hpp"

#include <Eigen/Core>
#include <chrono>
#include <ctime>
#include <fstream>
#include <png.h>

#include "patchseg/error.hpp"

#ifndef PATCHSEG_VERSION
#define PATCHSEG_VERSION "unknown"
#endif

namespace patchseg {

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string compiler() {
#if defined(__clang__)
    return "clang " __clang_version__;
#elif defined(__GNUC__)
    return "gcc " __VERSION__;
#else
    return "unknown";
#endif
}

}  // namespace

nlohmann::json build_info() {
    return {{"patchseg", PATCHSEG_VERSION},
            {"compiler", compiler()},
            {"cxx_standard", __cplusplus},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"libpng", PNG_LIBPNG_VER_STRING}};
}

void write_run_json(const std::filesystem::path& dir, const std::string& command, const nlohmann::json& config,
                    const nlohmann::json& seeds, const std::string& status) {
    std::filesystem::create_directories(dir);
    const nlohmann::json run{{"command", command}, {"config", config}, {"seeds", seeds},
                             {"build", build_info()}, {"written", utc_now()}, {"status", status}};
    std::ofstream out(dir / "run.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "run.json").string());
    out << run.dump(2) << '\n';
}

}  // namespace patchseg
