#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace protobias {

// Content-addressed image store: <root>/<first two hex chars>/<sha256>.
// put() is idempotent and atomic (temp file + rename); get() re-hashes the
// bytes and refuses to return corrupted content.
class BlobStore {
public:
    explicit BlobStore(std::filesystem::path root);

    std::string put(std::string_view bytes) const;
    std::optional<std::string> get(const std::string &digest) const;
    bool contains(const std::string &digest) const;
    std::filesystem::path path_for(const std::string &digest) const;

    const std::filesystem::path &root() const noexcept { return m_root; }

private:
    std::filesystem::path m_root;
};

bool is_valid_digest(std::string_view digest) noexcept;

} // namespace protobias
