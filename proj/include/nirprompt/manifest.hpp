#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace nirprompt {

// Per-command run record. Holds everything needed to re-execute the run
// bit-identically: the resolved config, seeds, and input fingerprints.
// The timestamp lives only here, never in reports or checkpoints.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::vector<uint64_t> seeds;
    std::vector<std::pair<std::string, std::string>> inputs;  // (path, fingerprint hex)
    std::vector<std::string> checkpoint_ids;
    std::string timestamp;

    void add_input(const std::string& path);
    void write(const std::string& dir) const;  // <dir>/manifest.json
    static RunManifest read(const std::string& path);
};

std::string file_fingerprint_hex(const std::string& path);
std::string utc_timestamp();

}  // namespace nirprompt
