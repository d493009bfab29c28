#include "protobias/assets.hpp"

#include "protobias/error.hpp"
#include "protobias/hashing.hpp"
#include "protobias/text.hpp"

#include <cctype>
#include <cstdlib>

#ifndef PROTOBIAS_ASSET_DIR
#define PROTOBIAS_ASSET_DIR "assets"
#endif

namespace protobias {

namespace fs = std::filesystem;

AssetLibrary AssetLibrary::load(const fs::path &dir) {
    const fs::path index = dir / "assets.json";
    Json doc;
    try {
        doc = Json::parse(read_file(index));
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, index.string() + ": " + e.what());
    }
    if (doc.value("schema_version", 0) != kSchemaVersion || !doc.contains("assets") ||
        !doc["assets"].is_object()) {
        fail(ErrorCode::SchemaError, index.string() + ": expected schema_version 1 and an assets map");
    }
    AssetLibrary lib;
    for (const auto &[name, entry] : doc["assets"].items()) {
        if (!entry.contains("file") || !entry.contains("version")) {
            fail(ErrorCode::SchemaError, index.string() + ": asset '" + name + "' needs file and version");
        }
        Asset asset;
        asset.name = name;
        asset.version = entry["version"].get<std::string>();
        asset.text = read_file(dir / entry["file"].get<std::string>());
        asset.sha256 = sha256_hex(asset.text);
        lib.put(std::move(asset));
    }
    return lib;
}

fs::path AssetLibrary::bundled_dir() {
    if (const char *env = std::getenv("PROTOBIAS_ASSET_DIR")) {
        return env;
    }
    return PROTOBIAS_ASSET_DIR;
}

AssetLibrary AssetLibrary::bundled() { return load(bundled_dir()); }

const Asset &AssetLibrary::get(const std::string &name) const {
    auto it = m_assets.find(name);
    if (it == m_assets.end()) {
        fail(ErrorCode::ConfigError, "asset '" + name + "' is not in the asset library");
    }
    return it->second;
}

void AssetLibrary::put(Asset asset) {
    if (asset.sha256.empty()) {
        asset.sha256 = sha256_hex(asset.text);
    }
    const std::string key = asset.name;
    m_assets[key] = std::move(asset);
}

namespace {

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Length of a {identifier} token starting at s[i], or 0.
std::size_t placeholder_at(const std::string &s, std::size_t i) {
    if (s[i] != '{') {
        return 0;
    }
    std::size_t j = i + 1;
    while (j < s.size() && is_ident_char(s[j])) {
        ++j;
    }
    if (j == i + 1 || j >= s.size() || s[j] != '}') {
        return 0;
    }
    return j - i + 1;
}

} // namespace

std::string fill_placeholders(const std::string &tmpl, const std::map<std::string, std::string> &values) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    for (std::size_t i = 0; i < tmpl.size();) {
        const std::size_t len = placeholder_at(tmpl, i);
        if (len == 0) {
            out.push_back(tmpl[i++]);
            continue;
        }
        const std::string name = tmpl.substr(i + 1, len - 2);
        auto it = values.find(name);
        if (it == values.end() || text::trim(it->second).empty()) {
            fail(ErrorCode::MissingPlaceholderError, "no value for placeholder {" + name + "}");
        }
        out += it->second;
        i += len;
    }
    return out;
}

std::vector<std::string> unresolved_placeholders(const std::string &s) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (const std::size_t len = placeholder_at(s, i)) {
            out.push_back(s.substr(i, len));
            i += len - 1;
        }
    }
    return out;
}

} // namespace protobias
