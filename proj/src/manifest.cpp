#include "nirprompt/manifest.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nirprompt/errors.hpp"
#include "nirprompt/vocab.hpp"

namespace nirprompt {

std::string file_fingerprint_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io", "cannot fingerprint missing file " + path);
    uint64_t h = 1469598103934665603ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void RunManifest::add_input(const std::string& path) {
    inputs.emplace_back(path, file_fingerprint_hex(path));
}

void RunManifest::write(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json j = {
        {"command", command},  {"config", config},
        {"seeds", seeds},      {"checkpoint_ids", checkpoint_ids},
        {"timestamp", timestamp.empty() ? utc_timestamp() : timestamp},
    };
    nlohmann::json jin = nlohmann::json::array();
    for (const auto& [path, fp] : inputs) jin.push_back({{"path", path}, {"fingerprint", fp}});
    j["inputs"] = jin;
    std::ofstream out(std::filesystem::path(dir) / "manifest.json", std::ios::binary);
    require(out.good(), "io", "cannot write run manifest in " + dir);
    out << j.dump(2) << "\n";
}

RunManifest RunManifest::read(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "io", "cannot read manifest " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    RunManifest m;
    m.command = j.at("command");
    m.config = j.at("config");
    m.seeds = j.value("seeds", std::vector<uint64_t>{});
    m.checkpoint_ids = j.value("checkpoint_ids", std::vector<std::string>{});
    m.timestamp = j.value("timestamp", "");
    for (const auto& item : j.value("inputs", nlohmann::json::array()))
        m.inputs.emplace_back(item.at("path"), item.at("fingerprint"));
    return m;
}

}  // namespace nirprompt
