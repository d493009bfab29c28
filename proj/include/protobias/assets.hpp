#pragma once

#include "protobias/jsonl.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace protobias {

// A versioned prompt or rubric. `sha256` covers the exact text, so every
// output that used the asset can record which wording produced it.
struct Asset {
    std::string name;
    std::string version;
    std::string text;
    std::string sha256;

    Json provenance() const { return {{"name", name}, {"version", version}, {"sha256", sha256}}; }
};

class AssetLibrary {
public:
    /// Loads <dir>/assets.json and every file it lists.
    static AssetLibrary load(const std::filesystem::path &dir);
    static AssetLibrary bundled();
    static std::filesystem::path bundled_dir();

    const Asset &get(const std::string &name) const;
    void put(Asset asset);

private:
    std::map<std::string, Asset> m_assets;
};

/// Replaces every {name} placeholder from `values`. Throws
/// MissingPlaceholderError when a placeholder has no value or an empty one.
std::string fill_placeholders(const std::string &tmpl, const std::map<std::string, std::string> &values);

/// Placeholders ({identifier}) still present in `s`.
std::vector<std::string> unresolved_placeholders(const std::string &s);

} // namespace protobias
