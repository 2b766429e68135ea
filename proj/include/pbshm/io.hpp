#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace pbshm::io {

using nlohmann::json;

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written artifact.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
void write_atomic_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::string read_text(const std::filesystem::path& path);

/// Parses a JSON document; malformed input raises an invalid-input error
/// carrying the file name and byte offset.
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Little-endian 64-bit float encoding, independent of host byte order.
std::vector<std::uint8_t> encode_f64_le(std::span<const double> values);
std::vector<double> decode_f64_le(std::span<const std::uint8_t> bytes);

/// Fixed "%.17g" formatting so CSV round-trips bit-exactly.
std::string format_double(double value);

}  // namespace pbshm::io
