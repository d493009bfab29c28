#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace protobias {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Line-delimited record files. Line 1 is a header object
//   {"kind":"header","schema_version":1,"stage":...,"seed":...,"sources":{...},"params":{...}}
// and every following line is one record. Object keys serialize sorted, so the
// bytes of a file are a pure function of its header and record sequence.

struct JsonlDocument {
    Json header;
    std::vector<Json> records;
};

Json make_header(const std::string &stage, std::optional<std::uint64_t> seed,
                 Json sources = Json::object(), Json params = Json::object());

std::string dump_line(const Json &value);

/// Reads a record file. A torn (unterminated) final line is ignored.
/// Throws MissingManifestError when the file is absent and SchemaError when
/// the header is missing or carries an unsupported schema_version.
JsonlDocument read_jsonl(const std::filesystem::path &path);

// Append-only single writer. Opening an existing file resumes it: the stored
// header must equal the requested one, and a torn final line is truncated so
// the next append starts on a clean boundary.
class JsonlWriter {
public:
    JsonlWriter(const std::filesystem::path &path, const Json &header);

    JsonlWriter(const JsonlWriter &) = delete;
    JsonlWriter &operator=(const JsonlWriter &) = delete;

    void append(const Json &record);

    const std::vector<Json> &existing_records() const noexcept { return m_existing; }
    const std::filesystem::path &path() const noexcept { return m_path; }

private:
    std::filesystem::path m_path;
    std::ofstream m_out;
    std::mutex m_mutex;
    std::vector<Json> m_existing;
    std::size_t m_appended = 0;
    std::optional<std::size_t> m_crash_after;
};

/// Writes a whole file atomically (temp file + rename).
void write_file_atomic(const std::filesystem::path &path, const std::string &contents);

std::string read_file(const std::filesystem::path &path);

} // namespace protobias
