#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hcl/matrix.hpp"

namespace hcl {

// Binary feature file: 16-byte little-endian header
//   u32 magic "HCLF" | u64 row count | u32 dim
// followed by row-major float32 values.
inline constexpr std::uint32_t kFeatureMagic = 0x464C4348u;

void write_feature_binary(const std::filesystem::path& path, const Matrix& rows);
Matrix read_feature_binary(const std::filesystem::path& path);

// CSV feature file: one row per image, `id,v0,v1,...`, no header.
struct FeatureTable {
    std::vector<std::string> ids;
    Matrix values;
};

void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable read_feature_csv(const std::filesystem::path& path);

}  // namespace hcl
