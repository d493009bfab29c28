#include "protobias/jsonl.hpp"

#include "protobias/error.hpp"

#include <cstdlib>
#include <iterator>
#include <sstream>

namespace protobias {

namespace fs = std::filesystem;

Json make_header(const std::string &stage, std::optional<std::uint64_t> seed, Json sources,
                 Json params) {
    Json header = Json::object();
    header["kind"] = "header";
    header["schema_version"] = kSchemaVersion;
    header["stage"] = stage;
    header["seed"] = seed ? Json(*seed) : Json(nullptr);
    header["sources"] = std::move(sources);
    header["params"] = std::move(params);
    return header;
}

std::string dump_line(const Json &value) {
    return value.dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot read " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

namespace {

// Complete lines only; the byte offset just past the last newline is returned
// through `clean_size`.
std::vector<std::string> complete_lines(const std::string &contents, std::size_t &clean_size) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    clean_size = 0;
    while (true) {
        const auto nl = contents.find('\n', start);
        if (nl == std::string::npos) {
            break;
        }
        lines.emplace_back(contents.substr(start, nl - start));
        start = nl + 1;
        clean_size = start;
    }
    return lines;
}

JsonlDocument parse_document(const fs::path &path, const std::string &contents,
                             std::size_t &clean_size) {
    auto lines = complete_lines(contents, clean_size);
    JsonlDocument doc;
    if (lines.empty()) {
        fail(ErrorCode::SchemaError, path.string() + ": missing header line");
    }
    try {
        doc.header = Json::parse(lines.front());
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, path.string() + ": malformed header: " + e.what());
    }
    if (!doc.header.is_object() || doc.header.value("kind", "") != "header" ||
        !doc.header.contains("schema_version")) {
        fail(ErrorCode::SchemaError, path.string() + ": first line is not a header record");
    }
    if (doc.header["schema_version"] != kSchemaVersion) {
        fail(ErrorCode::SchemaError, path.string() + ": unsupported schema_version " +
                                         doc.header["schema_version"].dump());
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        try {
            doc.records.push_back(Json::parse(lines[i]));
        } catch (const Json::exception &e) {
            fail(ErrorCode::SchemaError,
                 path.string() + ":" + std::to_string(i + 1) + ": malformed record: " + e.what());
        }
    }
    return doc;
}

} // namespace

JsonlDocument read_jsonl(const fs::path &path) {
    if (!fs::exists(path)) {
        fail(ErrorCode::MissingManifestError, "missing manifest " + path.string());
    }
    std::size_t clean_size = 0;
    return parse_document(path, read_file(path), clean_size);
}

JsonlWriter::JsonlWriter(const fs::path &path, const Json &header) : m_path(path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    if (fs::exists(path) && fs::file_size(path) > 0) {
        const std::string contents = read_file(path);
        std::size_t clean_size = 0;
        auto doc = parse_document(path, contents, clean_size);
        if (doc.header != header) {
            fail(ErrorCode::ConfigError,
                 path.string() + " was written with a different configuration; "
                                 "use a fresh output root or restore the original settings");
        }
        if (clean_size != contents.size()) {
            fs::resize_file(path, clean_size);
        }
        m_existing = std::move(doc.records);
        m_out.open(path, std::ios::binary | std::ios::app);
    } else {
        m_out.open(path, std::ios::binary | std::ios::trunc);
        if (m_out) {
            m_out << dump_line(header) << '\n';
            m_out.flush();
        }
    }
    if (!m_out) {
        fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    }
    // Fault-injection hook for crash/resume testing.
    if (const char *crash = std::getenv("PROTOBIAS_CRASH_AFTER_RECORDS")) {
        m_crash_after = static_cast<std::size_t>(std::strtoull(crash, nullptr, 10));
    }
}

void JsonlWriter::append(const Json &record) {
    std::lock_guard lock(m_mutex);
    const std::string line = dump_line(record);
    if (m_crash_after && m_appended == *m_crash_after) {
        // Simulate a kill in the middle of a write: half a line, no newline.
        m_out << line.substr(0, line.size() / 2);
        m_out.flush();
        std::_Exit(86);
    }
    m_out << line << '\n';
    m_out.flush();
    if (!m_out) {
        fail(ErrorCode::IoError, "write failed on " + m_path.string());
    }
    ++m_appended;
}

void write_file_atomic(const fs::path &path, const std::string &contents) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << contents;
        if (!out) {
            fail(ErrorCode::IoError, "cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

} // namespace protobias
