#include "protobias/blob_store.hpp"

#include "protobias/error.hpp"
#include "protobias/hashing.hpp"
#include "protobias/jsonl.hpp"

#include <atomic>
#include <fstream>
#include <thread>

namespace protobias {

namespace fs = std::filesystem;

bool is_valid_digest(std::string_view digest) noexcept {
    if (digest.size() != 64) {
        return false;
    }
    for (char c : digest) {
        const bool hex = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        if (!hex) {
            return false;
        }
    }
    return true;
}

BlobStore::BlobStore(fs::path root) : m_root(std::move(root)) {
    fs::create_directories(m_root);
}

fs::path BlobStore::path_for(const std::string &digest) const {
    if (!is_valid_digest(digest)) {
        fail(ErrorCode::InvalidArgument, "not a sha256 digest: " + digest);
    }
    return m_root / digest.substr(0, 2) / digest;
}

std::string BlobStore::put(std::string_view bytes) const {
    const std::string digest = sha256_hex(bytes);
    const fs::path target = path_for(digest);
    if (fs::exists(target)) {
        return digest;
    }
    fs::create_directories(target.parent_path());
    // Unique temp name per writer so concurrent puts of the same bytes never
    // interleave; rename() is atomic and both writers carry identical content.
    static std::atomic<unsigned long> counter{0};
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(counter.fetch_add(1)) + "-" +
           std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            fail(ErrorCode::IoError, "cannot write blob " + tmp.string());
        }
    }
    fs::rename(tmp, target);
    return digest;
}

std::optional<std::string> BlobStore::get(const std::string &digest) const {
    if (!is_valid_digest(digest)) {
        return std::nullopt;
    }
    const fs::path target = path_for(digest);
    if (!fs::exists(target)) {
        return std::nullopt;
    }
    std::string bytes = read_file(target);
    if (sha256_hex(bytes) != digest) {
        return std::nullopt;
    }
    return bytes;
}

bool BlobStore::contains(const std::string &digest) const {
    return is_valid_digest(digest) && fs::exists(path_for(digest));
}

} // namespace protobias
