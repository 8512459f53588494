#include "io_util.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common.hpp"

namespace gebc {

namespace {

void rename_over(const std::string& tmp, const std::string& path) {
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw DataError("cannot move temp file onto '" + path + "': " + ec.message());
    }
}

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("truncated file '" + path + "'");
    return v;
}

}  // namespace

void atomic_write_bytes(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + tmp + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("write failed for '" + tmp + "'");
    }
    rename_over(tmp, path);
}

void atomic_write_text(const std::string& path, const std::string& content) {
    atomic_write_bytes(path, content);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const NamedArray* ArrayFile::find(const std::string& name) const {
    for (const NamedArray& a : arrays)
        if (a.name == name) return &a;
    return nullptr;
}

const NamedArray& ArrayFile::require(const std::string& name,
                                     const std::string& path_for_error) const {
    const NamedArray* a = find(name);
    if (!a) throw DataError("file '" + path_for_error + "' is missing array '" + name + "'");
    return *a;
}

void write_array_file(const std::string& path, const ArrayFile& file) {
    std::ostringstream out(std::ios::binary);
    out.write("GEBT", 4);
    write_pod<uint32_t>(out, kArrayFileVersion);
    write_pod<uint32_t>(out, file.flags);
    write_pod<uint32_t>(out, static_cast<uint32_t>(file.meta.size()));
    out.write(file.meta.data(), static_cast<std::streamsize>(file.meta.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(file.arrays.size()));
    for (const NamedArray& a : file.arrays) {
        write_pod<uint32_t>(out, static_cast<uint32_t>(a.name.size()));
        out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
        write_pod<uint8_t>(out, a.store_f32 ? 1 : 2);
        write_pod<uint64_t>(out, static_cast<uint64_t>(a.data.rows));
        write_pod<uint64_t>(out, static_cast<uint64_t>(a.data.cols));
        if (a.store_f32) {
            for (double v : a.data.data) write_pod<float>(out, static_cast<float>(v));
        } else {
            for (double v : a.data.data) write_pod<double>(out, v);
        }
    }
    atomic_write_bytes(path, out.str());
}

ArrayFile read_array_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "GEBT", 4) != 0)
        throw DataError("file '" + path + "' is not a GEBT array container");
    uint32_t version = read_pod<uint32_t>(in, path);
    if (version != kArrayFileVersion)
        throw DataError("file '" + path + "': unsupported container version " +
                        std::to_string(version));
    ArrayFile file;
    file.flags = read_pod<uint32_t>(in, path);
    uint32_t meta_len = read_pod<uint32_t>(in, path);
    if (meta_len > (1u << 24)) throw DataError("file '" + path + "': corrupt meta length");
    file.meta.resize(meta_len);
    if (meta_len) {
        in.read(file.meta.data(), meta_len);
        if (!in) throw DataError("truncated file '" + path + "'");
    }
    uint32_t count = read_pod<uint32_t>(in, path);
    file.arrays.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        uint32_t name_len = read_pod<uint32_t>(in, path);
        if (name_len > 4096) throw DataError("file '" + path + "': corrupt array name length");
        a.name.resize(name_len);
        in.read(a.name.data(), name_len);
        if (!in) throw DataError("truncated file '" + path + "'");
        uint8_t dtype = read_pod<uint8_t>(in, path);
        if (dtype != 1 && dtype != 2)
            throw DataError("file '" + path + "': unknown dtype " + std::to_string(dtype));
        a.store_f32 = dtype == 1;
        auto rows = read_pod<uint64_t>(in, path);
        auto cols = read_pod<uint64_t>(in, path);
        if (rows > (1u << 26) || cols > (1u << 26))
            throw DataError("file '" + path + "': implausible array shape");
        a.data = Tensor(static_cast<int>(rows), static_cast<int>(cols));
        for (double& v : a.data.data)
            v = a.store_f32 ? static_cast<double>(read_pod<float>(in, path))
                            : read_pod<double>(in, path);
        file.arrays.push_back(std::move(a));
    }
    return file;
}

}  // namespace gebc
