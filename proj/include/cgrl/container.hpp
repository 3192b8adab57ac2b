#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cgrl {

using Json = nlohmann::ordered_json;

// Binary archive layout (all integers and floats little-endian):
//   8-byte magic | u64 header length | UTF-8 JSON header | u64 value count | f64 values
struct Container {
  Json header;
  std::vector<double> payload;
};

void write_container(const std::filesystem::path& path, std::string_view magic, const Json& header,
                     std::span<const double> payload);
Container read_container(const std::filesystem::path& path, std::string_view magic);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace cgrl
