#include "ldp/archive.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ldp/errors.hpp"

namespace ldp {

namespace {
constexpr char kMagic[8] = {'L', 'D', 'P', 'A', 'R', 'C', 'H', '1'};

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw LoadError("archive '" + path + "': " + why);
}
}  // namespace

void write_archive(const std::string& path, const std::vector<std::pair<std::string, Tensor>>& arrays,
                   const std::map<std::string, std::string>& meta) {
    nlohmann::json manifest;
    manifest["arrays"] = nlohmann::json::array();
    uint64_t offset    = 0;
    for (const auto& [name, tensor] : arrays) {
        const uint64_t nbytes = static_cast<uint64_t>(tensor.size()) * sizeof(double);
        manifest["arrays"].push_back({{"name", name},
                                      {"shape", tensor.shape()},
                                      {"dtype", "f64"},
                                      {"offset", offset},
                                      {"nbytes", nbytes}});
        offset += nbytes;
    }
    manifest["meta"] = meta;

    const std::string manifest_text = manifest.dump();
    const uint64_t manifest_size    = manifest_text.size();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("archive '" + path + "': cannot open for writing");
    out.write(kMagic, sizeof(kMagic));
    char size_bytes[8];
    for (int i = 0; i < 8; ++i) size_bytes[i] = static_cast<char>((manifest_size >> (8 * i)) & 0xff);
    out.write(size_bytes, 8);
    out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
    for (const auto& [name, tensor] : arrays) {
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    if (!out) throw LoadError("archive '" + path + "': write failed");
}

Archive read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "not found or unreadable");

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) fail(path, "bad magic");

    char size_bytes[8];
    in.read(size_bytes, 8);
    if (!in) fail(path, "truncated header");
    uint64_t manifest_size = 0;
    for (int i = 7; i >= 0; --i) {
        manifest_size = (manifest_size << 8) | static_cast<unsigned char>(size_bytes[i]);
    }
    if (manifest_size > (1ull << 30)) fail(path, "implausible manifest size");

    std::string manifest_text(manifest_size, '\0');
    in.read(manifest_text.data(), static_cast<std::streamsize>(manifest_size));
    if (!in) fail(path, "truncated manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_text);
    } catch (const std::exception& e) {
        fail(path, std::string("manifest parse error: ") + e.what());
    }

    const std::streampos data_start = in.tellg();
    Archive archive;
    if (manifest.contains("meta")) {
        for (auto& [k, v] : manifest["meta"].items()) archive.meta[k] = v.get<std::string>();
    }
    if (!manifest.contains("arrays") || !manifest["arrays"].is_array()) fail(path, "missing arrays list");
    for (const auto& entry : manifest["arrays"]) {
        const std::string name  = entry.at("name").get<std::string>();
        const std::string dtype = entry.at("dtype").get<std::string>();
        if (dtype != "f64") fail(path, "array '" + name + "' has unsupported dtype '" + dtype + "'");
        const auto shape      = entry.at("shape").get<std::vector<int>>();
        const uint64_t offset = entry.at("offset").get<uint64_t>();
        const uint64_t nbytes = entry.at("nbytes").get<uint64_t>();

        Tensor tensor(shape);
        if (nbytes != static_cast<uint64_t>(tensor.size()) * sizeof(double)) {
            fail(path, "array '" + name + "' size mismatch with shape " + shape_str(shape));
        }
        in.seekg(data_start + static_cast<std::streamoff>(offset));
        in.read(reinterpret_cast<char*>(tensor.data()), static_cast<std::streamsize>(nbytes));
        if (!in) fail(path, "array '" + name + "' data truncated");
        archive.arrays.emplace(name, std::move(tensor));
    }
    return archive;
}

}  // namespace ldp
