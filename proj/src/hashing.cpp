#include "protobias/hashing.hpp"

#include "protobias/error.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <array>
#include <fstream>
#include <iterator>
#include <vector>

namespace protobias {

namespace {

std::string to_hex(const unsigned char *data, std::size_t size) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(size * 2);
    for (std::size_t i = 0; i < size; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0F]);
    }
    return out;
}

} // namespace

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
    SHA256(reinterpret_cast<const unsigned char *>(bytes.data()), bytes.size(), digest.data());
    return to_hex(digest.data(), digest.size());
}

std::string sha256_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot read " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

std::string base64_encode(std::string_view bytes) {
    if (bytes.empty()) {
        return {};
    }
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()),
                                        reinterpret_cast<const unsigned char *>(bytes.data()),
                                        static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(written));
    return out;
}

std::string base64_decode(std::string_view text) {
    std::string compact;
    compact.reserve(text.size());
    for (char c : text) {
        if (c != '\n' && c != '\r' && c != ' ' && c != '\t') {
            compact.push_back(c);
        }
    }
    if (compact.empty()) {
        return {};
    }
    if (compact.size() % 4 != 0) {
        fail(ErrorCode::ParseError, "base64 length is not a multiple of 4");
    }
    std::string out(3 * compact.size() / 4, '\0');
    const int written = EVP_DecodeBlock(reinterpret_cast<unsigned char *>(out.data()),
                                        reinterpret_cast<const unsigned char *>(compact.data()),
                                        static_cast<int>(compact.size()));
    if (written < 0) {
        fail(ErrorCode::ParseError, "malformed base64 payload");
    }
    // EVP_DecodeBlock does not account for padding.
    std::size_t size = static_cast<std::size_t>(written);
    if (compact.back() == '=') {
        --size;
        if (compact[compact.size() - 2] == '=') {
            --size;
        }
    }
    out.resize(size);
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::string material = std::to_string(seed);
    material.push_back('\x1f');
    material.append(tag);
    std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
    SHA256(reinterpret_cast<const unsigned char *>(material.data()), material.size(), digest.data());
    std::uint64_t value = 0;
    for (int i = 0; i < 8; ++i) {
        value = (value << 8) | digest[static_cast<std::size_t>(i)];
    }
    return value;
}

} // namespace protobias
