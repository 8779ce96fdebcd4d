#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "handmesh/error.hpp"
#include "handmesh/params.hpp"

namespace handmesh {

// Manifest-plus-buffer container: a JSON manifest listing named entries
// (name, shape, dtype, byte offset) and a sidecar file of raw little-endian
// scalars. Round-trips are bit-exact. Used for checkpoints and dataset blobs.

struct BufferEntry {
    std::string name;
    Shape shape;
    std::string dtype; // "f32" | "f64" | "u8"
    std::uint64_t offset = 0;
    std::uint64_t nbytes = 0;
};

class BufferWriter {
public:
    template <typename T>
    void add(const std::string& name, const Shape& shape, const std::vector<T>& data) {
        BufferEntry e;
        e.name = name;
        e.shape = shape;
        e.dtype = dtype_of<T>();
        e.offset = bytes_.size();
        e.nbytes = data.size() * sizeof(T);
        if (shape_numel(shape) != data.size())
            throw ShapeError("buffer entry " + name + ": shape/data mismatch");
        const auto* raw = reinterpret_cast<const char*>(data.data());
        bytes_.insert(bytes_.end(), raw, raw + e.nbytes);
        entries_.push_back(std::move(e));
    }

    const std::vector<BufferEntry>& entries() const { return entries_; }
    const std::vector<char>& bytes() const { return bytes_; }

    template <typename T>
    static const char* dtype_of() {
        if constexpr (sizeof(T) == 4 && std::is_floating_point_v<T>) return "f32";
        else if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) return "f64";
        else return "u8";
    }

private:
    std::vector<BufferEntry> entries_;
    std::vector<char> bytes_;
};

class BufferReader {
public:
    BufferReader(std::vector<BufferEntry> entries, std::vector<char> bytes)
        : entries_(std::move(entries)), bytes_(std::move(bytes)) {}

    const std::vector<BufferEntry>& entries() const { return entries_; }

    const BufferEntry& find(const std::string& name) const {
        for (const auto& e : entries_)
            if (e.name == name) return e;
        throw IoError("buffer entry not found: " + name);
    }

    template <typename T>
    std::vector<T> read(const BufferEntry& e) const {
        if (e.dtype != BufferWriter::dtype_of<T>())
            throw IoError("buffer entry " + e.name + ": dtype is " + e.dtype);
        if (e.offset + e.nbytes > bytes_.size()) throw IoError("buffer entry " + e.name + ": out of range");
        std::vector<T> out(e.nbytes / sizeof(T));
        std::memcpy(out.data(), bytes_.data() + e.offset, e.nbytes);
        return out;
    }

    template <typename T>
    std::vector<T> read(const std::string& name) const { return read<T>(find(name)); }

private:
    std::vector<BufferEntry> entries_;
    std::vector<char> bytes_;
};

namespace detail {

inline nlohmann::json entries_to_json(const std::vector<BufferEntry>& entries) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json j;
        j["name"] = e.name;
        j["shape"] = e.shape;
        j["dtype"] = e.dtype;
        j["offset"] = e.offset;
        j["nbytes"] = e.nbytes;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline std::vector<BufferEntry> entries_from_json(const nlohmann::json& arr) {
    std::vector<BufferEntry> out;
    for (const auto& j : arr) {
        BufferEntry e;
        e.name = j.at("name").get<std::string>();
        e.shape = j.at("shape").get<Shape>();
        e.dtype = j.at("dtype").get<std::string>();
        e.offset = j.at("offset").get<std::uint64_t>();
        e.nbytes = j.at("nbytes").get<std::uint64_t>();
        out.push_back(std::move(e));
    }
    return out;
}

inline void write_file(const std::string& path, const char* data, std::size_t n) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(data, static_cast<std::streamsize>(n));
    if (!f) throw IoError("write failed: " + path);
}

inline std::vector<char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    f.seekg(0, std::ios::end);
    const auto n = f.tellg();
    f.seekg(0);
    std::vector<char> out(static_cast<std::size_t>(n));
    f.read(out.data(), n);
    if (!f) throw IoError("read failed: " + path);
    return out;
}

inline std::string base_name(const std::string& path) {
    const auto pos = path.find_last_of("/\\");
    return pos == std::string::npos ? path : path.substr(pos + 1);
}

} // namespace detail

// Writes <stem>.json and <stem>.bin.
inline void save_manifest(const std::string& stem, const BufferWriter& buffers,
                          const nlohmann::json& meta) {
    nlohmann::json manifest;
    manifest["format"] = "handmesh-buffers";
    manifest["version"] = 1;
    manifest["buffer_file"] = detail::base_name(stem) + ".bin";
    manifest["meta"] = meta;
    manifest["entries"] = detail::entries_to_json(buffers.entries());
    const std::string text = manifest.dump(2) + "\n";
    detail::write_file(stem + ".json", text.data(), text.size());
    detail::write_file(stem + ".bin", buffers.bytes().data(), buffers.bytes().size());
}

struct LoadedManifest {
    nlohmann::json meta;
    BufferReader buffers;
};

inline LoadedManifest load_manifest(const std::string& stem) {
    const auto text = detail::read_file(stem + ".json");
    nlohmann::json manifest = nlohmann::json::parse(text.begin(), text.end());
    if (manifest.value("format", "") != "handmesh-buffers")
        throw IoError("not a manifest file: " + stem + ".json");
    const std::string dir = stem.find_last_of("/\\") == std::string::npos
                                ? ""
                                : stem.substr(0, stem.find_last_of("/\\") + 1);
    auto bytes = detail::read_file(dir + manifest.at("buffer_file").get<std::string>());
    return LoadedManifest{manifest.at("meta"),
                          BufferReader(detail::entries_from_json(manifest.at("entries")), std::move(bytes))};
}

// --- parameter checkpoints ----------------------------------------------------

template <typename T>
void save_checkpoint(const std::string& stem, const ParamSet<T>& params, nlohmann::json meta) {
    BufferWriter buffers;
    for (const auto& [name, t] : params.entries()) buffers.add(name, t.shape(), t.values());
    meta["kind"] = "checkpoint";
    meta["dtype"] = BufferWriter::dtype_of<T>();
    save_manifest(stem, buffers, meta);
}

// Fills an already-constructed ParamSet; every parameter must be present with
// a matching shape.
template <typename T>
nlohmann::json load_checkpoint(const std::string& stem, ParamSet<T>& params) {
    auto loaded = load_manifest(stem);
    if (loaded.meta.value("kind", "") != "checkpoint")
        throw IoError("manifest is not a checkpoint: " + stem);
    for (auto& [name, t] : params.entries()) {
        const auto& e = loaded.buffers.find(name);
        if (e.shape != t.shape())
            throw IoError("checkpoint shape mismatch for " + name + ": file has " +
                          shape_str(e.shape) + ", model expects " + shape_str(t.shape()));
        t.values() = loaded.buffers.template read<T>(e);
    }
    return loaded.meta;
}

} // namespace handmesh
