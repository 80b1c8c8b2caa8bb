#include "nirprompt/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "nirprompt/errors.hpp"

namespace nirprompt::checkpoint {

namespace fs = std::filesystem;

namespace {
constexpr char kMagic[4] = {'N', 'I', 'R', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(in.gcount() == sizeof(T), "parse", "tensor file truncated");
    return v;
}
}  // namespace

std::string compute_id(const std::vector<ParameterGroup>& groups) {
    uint64_t h = 1469598103934665603ULL;
    for (const ParameterGroup& g : groups) {
        h = fnv1a64(g.tag.data(), g.tag.size(), h);
        for (const Parameter* p : g.params) {
            h = fnv1a64(p->name.data(), p->name.size(), h);
            h = fnv1a64(p->value.data(), sizeof(double) * static_cast<size_t>(p->value.size()), h);
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string group_file_name(const std::string& tag) {
    std::string name = tag;
    for (char& c : name)
        if (c == ':' || c == '.' || c == '/') c = '_';
    return name + ".bin";
}

void write_group(const std::string& dir, const ParameterGroup& group) {
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / group_file_name(group.tag), std::ios::binary);
    require(out.good(), "io", "cannot write tensor file for group " + group.tag);
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, static_cast<uint64_t>(group.params.size()));
    for (const Parameter* p : group.params) {
        write_pod(out, static_cast<uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod(out, static_cast<uint64_t>(p->value.rows()));
        write_pod(out, static_cast<uint64_t>(p->value.cols()));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(double) *
                                               static_cast<size_t>(p->value.size())));
    }
}

void read_group(const std::string& dir, ParameterGroup& group) {
    std::ifstream in(fs::path(dir) / group_file_name(group.tag), std::ios::binary);
    require(in.good(), "io", "missing tensor file for group " + group.tag + " in " + dir);
    char magic[4];
    in.read(magic, 4);
    require(in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0, "parse",
            "bad tensor file magic for group " + group.tag);
    require(read_pod<uint32_t>(in) == kVersion, "parse", "unsupported tensor format version");
    uint64_t count = read_pod<uint64_t>(in);
    require(count == group.params.size(), "compatibility",
            "group " + group.tag + " holds " + std::to_string(count) + " tensors, expected " +
                std::to_string(group.params.size()));
    for (Parameter* p : group.params) {
        uint32_t name_len = read_pod<uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        require(name == p->name, "compatibility",
                "tensor '" + name + "' does not match expected '" + p->name + "'");
        uint64_t rows = read_pod<uint64_t>(in);
        uint64_t cols = read_pod<uint64_t>(in);
        require(rows == static_cast<uint64_t>(p->value.rows()) &&
                    cols == static_cast<uint64_t>(p->value.cols()),
                "compatibility", "tensor '" + name + "' shape mismatch against the model config");
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(sizeof(double) * rows * cols));
        require(in.gcount() ==
                    static_cast<std::streamsize>(sizeof(double) * rows * cols),
                "parse", "tensor file truncated in group " + group.tag);
    }
}

void write_manifest(const std::string& dir, const nlohmann::json& manifest) {
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    require(out.good(), "io", "cannot write checkpoint manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

nlohmann::json read_manifest(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    require(in.good(), "io", "missing checkpoint manifest in " + dir);
    return nlohmann::json::parse(in);
}

}  // namespace nirprompt::checkpoint
