// SPDX-License-Identifier: Apache-2.0
#include "blob_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "crpl/error.hpp"

namespace crpl::detail {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoFailure, "failed writing " + path.string());
}

}  // namespace

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_f32(const std::filesystem::path& path, const Matrix& m) {
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
  write_bytes(path, bytes);
}

Matrix read_f32(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols) {
  const auto bytes = read_bytes(path);
  const auto row_bytes = static_cast<std::size_t>(cols) * 4;
  if (rows >= 0) {
    if (bytes.size() != static_cast<std::size_t>(rows) * row_bytes)
      fail(ErrorCode::TruncatedBlob, path.string() + " has " + std::to_string(bytes.size()) +
                                         " bytes, expected " +
                                         std::to_string(static_cast<std::size_t>(rows) * row_bytes));
  } else {
    if (row_bytes == 0 || bytes.size() % row_bytes != 0)
      fail(ErrorCode::TruncatedBlob, path.string() + " is not a whole number of rows");
    rows = static_cast<Eigen::Index>(bytes.size() / row_bytes);
  }
  Matrix m(rows, cols);
  const unsigned char* p = bytes.data();
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c, p += 4)
      m(r, c) = static_cast<double>(std::bit_cast<float>(get_u32(p)));
  return m;
}

void write_u32(const std::filesystem::path& path, const std::vector<std::size_t>& values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 4);
  for (auto v : values) put_u32(bytes, static_cast<std::uint32_t>(v));
  write_bytes(path, bytes);
}

std::vector<std::size_t> read_u32(const std::filesystem::path& path, std::size_t count) {
  const auto bytes = read_bytes(path);
  if (bytes.size() != count * 4)
    fail(ErrorCode::TruncatedBlob, path.string() + " does not hold " + std::to_string(count) +
                                       " labels");
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = get_u32(bytes.data() + 4 * i);
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorCode::IoFailure, "failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaMismatch, path.string() + ": " + e.what());
  }
}

template <typename T>
T field(const nlohmann::json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key))
    fail(ErrorCode::SchemaMismatch, std::string("manifest is missing '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::SchemaMismatch, std::string("manifest field '") + key + "' has the wrong type");
  }
}

template std::size_t field<std::size_t>(const nlohmann::json&, const char*);
template int field<int>(const nlohmann::json&, const char*);
template bool field<bool>(const nlohmann::json&, const char*);
template std::string field<std::string>(const nlohmann::json&, const char*);
template nlohmann::json field<nlohmann::json>(const nlohmann::json&, const char*);

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    fail(ErrorCode::IoFailure, "cannot create directory " + dir.string());
}

}  // namespace crpl::detail
