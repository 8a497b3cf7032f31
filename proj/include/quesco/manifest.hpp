#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace quesco {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a over file bytes; stable across platforms.
std::uint64_t file_digest(const std::string& path);

struct RunManifest {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::uint64_t>> inputs;  // (path, digest)
    std::string tool_version = kToolVersion;
    std::string timestamp;  // ISO-8601 UTC

    static RunManifest make(const std::string& command, std::uint64_t seed,
                            const std::vector<std::string>& input_paths,
                            const std::string& config_repr);
    // Atomic write (temp file + rename).
    void write(const std::string& path) const;
};

}  // namespace quesco
