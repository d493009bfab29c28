#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace protobias {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of a file's full contents; throws IoError if unreadable.
std::string sha256_file(const std::filesystem::path &path);

std::string base64_encode(std::string_view bytes);

/// Decodes standard base64 (padding required, whitespace tolerated).
/// Throws ParseError on malformed input.
std::string base64_decode(std::string_view text);

/// Stable 64-bit value derived from a seed and a tag; used to give every work
/// item its own reproducible random stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

} // namespace protobias
