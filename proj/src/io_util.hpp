#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace gebc {

// Writes content to path via a temp file + rename so readers never observe a
// partially written file.
void atomic_write_text(const std::string& path, const std::string& content);
void atomic_write_bytes(const std::string& path, const std::string& bytes);

std::string read_text_file(const std::string& path);  // throws DataError

// Minimal named-array container used by feature files and checkpoints.
// Layout (little-endian): magic "GEBT", u32 version, u32 flags, u32 meta
// length, meta bytes (UTF-8, typically JSON), u32 array count, then per
// array: u32 name length, name bytes, u8 dtype (1=f32, 2=f64), u64 rows,
// u64 cols, payload. See README for the full description.
struct NamedArray {
    std::string name;
    Tensor data;
    bool store_f32 = false;  // serialize as float32 instead of float64
};

struct ArrayFile {
    uint32_t flags = 0;
    std::string meta;
    std::vector<NamedArray> arrays;

    const NamedArray* find(const std::string& name) const;
    const NamedArray& require(const std::string& name, const std::string& path_for_error) const;
};

inline constexpr uint32_t kArrayFileVersion = 1;

void write_array_file(const std::string& path, const ArrayFile& file);
ArrayFile read_array_file(const std::string& path);  // throws DataError

}  // namespace gebc
