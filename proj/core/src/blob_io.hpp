// SPDX-License-Identifier: Apache-2.0
//
// Little-endian 32-bit blobs and JSON manifests shared by the dataset and
// checkpoint formats. Internal to the library.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "crpl/embedding.hpp"

namespace crpl::detail {

/// Row-major float32 payload of `m`.
void write_f32(const std::filesystem::path& path, const Matrix& m);
/// Reads a row-major float32 blob with `cols` columns. Throws TruncatedBlob
/// unless the payload holds exactly `rows` rows (or any whole number of rows
/// when rows < 0).
Matrix read_f32(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols);

void write_u32(const std::filesystem::path& path, const std::vector<std::size_t>& values);
std::vector<std::size_t> read_u32(const std::filesystem::path& path, std::size_t count);

std::vector<unsigned char> read_bytes(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

/// Fetch a required manifest field, mapping absence or type errors to
/// SchemaMismatch.
template <typename T>
T field(const nlohmann::json& doc, const char* key);

void ensure_directory(const std::filesystem::path& dir);

}  // namespace crpl::detail
