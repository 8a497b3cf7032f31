#include "quesco/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "quesco/types.hpp"

using nlohmann::json;

namespace quesco {

std::uint64_t file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open input for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<std::uint8_t>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    return h;
}

namespace {

std::uint64_t string_digest(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

RunManifest RunManifest::make(const std::string& command, std::uint64_t seed,
                              const std::vector<std::string>& input_paths,
                              const std::string& config_repr) {
    RunManifest m;
    m.command = command;
    m.seed = seed;
    m.config_hash = string_digest(config_repr);
    for (const auto& p : input_paths) m.inputs.emplace_back(p, file_digest(p));
    m.timestamp = utc_now();
    return m;
}

void RunManifest::write(const std::string& path) const {
    json j;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    json in = json::array();
    for (const auto& [p, d] : inputs) in.push_back({{"path", p}, {"digest", d}});
    j["inputs"] = in;
    j["tool_version"] = tool_version;
    j["timestamp"] = timestamp;

    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw ParseError("cannot write manifest: " + path);
        out << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace quesco
