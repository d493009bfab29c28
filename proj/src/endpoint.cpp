#include "protobias/endpoint.hpp"

#include "protobias/error.hpp"
#include "protobias/hashing.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace protobias {

const std::vector<Role> &all_roles() {
    static const std::vector<Role> roles{Role::TextGen, Role::ImageGen, Role::FilterVlm, Role::Embed,
                                         Role::Preference, Role::Vqa, Role::Judge, Role::Scorer};
    return roles;
}

std::string_view to_string(Role role) noexcept {
    switch (role) {
    case Role::TextGen: return "text_gen";
    case Role::ImageGen: return "image_gen";
    case Role::FilterVlm: return "filter_vlm";
    case Role::Embed: return "embed";
    case Role::Preference: return "preference";
    case Role::Vqa: return "vqa";
    case Role::Judge: return "judge";
    case Role::Scorer: return "scorer";
    }
    return "unknown";
}

std::string env_prefix(Role role) {
    std::string s = "PROTOBIAS_";
    for (char c : to_string(role)) {
        s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return s;
}

Role parse_role(std::string_view name) {
    for (Role r : all_roles()) {
        if (to_string(r) == name) {
            return r;
        }
    }
    fail(ErrorCode::ConfigError, "unknown endpoint role '" + std::string(name) + "'");
}

Json EndpointConfig::to_json() const {
    Json j = {{"role", to_string(role)}, {"url", url}, {"model", model}};
    if (role == Role::ImageGen) {
        j["image_wire"] = image_wire == ImageWire::Raw ? "raw" : "base64";
    }
    return j;
}

namespace {

std::optional<std::string> env(const std::string &name) {
    const char *v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') {
        return std::nullopt;
    }
    return std::string(v);
}

template <class T>
void take(const Json &entry, const char *key, T &out, Role role) {
    if (!entry.contains(key)) {
        return;
    }
    try {
        out = entry[key].get<T>();
    } catch (const Json::exception &) {
        fail(ErrorCode::ConfigError,
             "endpoint '" + std::string(to_string(role)) + "': bad value for '" + key + "'");
    }
}

} // namespace

EndpointConfig resolve_endpoint(Role role, const Json &entry) {
    EndpointConfig cfg;
    cfg.role = role;
    if (!entry.is_null()) {
        if (!entry.is_object()) {
            fail(ErrorCode::ConfigError, "endpoint '" + std::string(to_string(role)) + "' must be an object");
        }
        for (const char *secret : {"key", "api_key", "token"}) {
            if (entry.contains(secret)) {
                fail(ErrorCode::ConfigError, "endpoint '" + std::string(to_string(role)) +
                                                 "': keys belong in " + env_prefix(role) + "_KEY, not the config file");
            }
        }
        take(entry, "url", cfg.url, role);
        take(entry, "model", cfg.model, role);
        take(entry, "timeout_s", cfg.timeout_s, role);
        take(entry, "max_attempts", cfg.max_attempts, role);
        take(entry, "backoff_initial_s", cfg.backoff_initial_s, role);
        take(entry, "backoff_max_s", cfg.backoff_max_s, role);
        take(entry, "rate_per_s", cfg.rate_per_s, role);
        take(entry, "image_field", cfg.image_field, role);
        std::string wire = "base64";
        take(entry, "image_wire", wire, role);
        if (wire == "raw") {
            cfg.image_wire = ImageWire::Raw;
        } else if (wire != "base64") {
            fail(ErrorCode::ConfigError, "image_wire must be 'raw' or 'base64'");
        }
    }
    const std::string p = env_prefix(role);
    if (auto v = env(p + "_URL")) cfg.url = *v;
    if (auto v = env(p + "_MODEL")) cfg.model = *v;
    if (auto v = env(p + "_KEY")) cfg.api_key = *v;
    if (cfg.max_attempts < 1 || cfg.timeout_s <= 0 || cfg.rate_per_s < 0) {
        fail(ErrorCode::ConfigError, "endpoint '" + std::string(to_string(role)) + "': invalid retry/timeout/rate");
    }
    return cfg;
}

HttpEndpoint::HttpEndpoint(EndpointConfig config) : m_config(std::move(config)) {
    const std::string &url = m_config.url;
    const auto scheme_end = url.find("://");
    if (url.empty() || scheme_end == std::string::npos) {
        fail(ErrorCode::ConfigError,
             "endpoint '" + std::string(to_string(m_config.role)) + "' has no usable URL (set " +
                 env_prefix(m_config.role) + "_URL)");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    m_host = url.substr(0, path_start);
    m_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!m_prefix.empty() && m_prefix.back() == '/') {
        m_prefix.pop_back();
    }
}

void HttpEndpoint::throttle() {
    if (m_config.rate_per_s <= 0) {
        return;
    }
    const auto spacing = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / m_config.rate_per_s));
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(m_rate_mutex);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(now, m_next_slot);
        m_next_slot = slot + spacing;
    }
    std::this_thread::sleep_until(slot);
}

HttpEndpoint::Response HttpEndpoint::post(const std::string &path, const std::string &body,
                                          const std::string &content_type) {
    const std::string full = m_prefix + path;
    const std::string request_id = sha256_hex(full + '\n' + body).substr(0, 32);
    httplib::Headers headers{{"X-Request-Id", request_id}};
    if (!m_config.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + m_config.api_key);
    }
    const auto secs = static_cast<time_t>(m_config.timeout_s);
    const auto usecs = static_cast<time_t>((m_config.timeout_s - static_cast<double>(secs)) * 1e6);

    std::string last_error;
    for (int attempt = 1; attempt <= m_config.max_attempts; ++attempt) {
        if (attempt > 1) {
            const double wait = std::min(m_config.backoff_max_s,
                                         m_config.backoff_initial_s * std::pow(2.0, attempt - 2));
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
        throttle();
        httplib::Client client(m_host);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        auto res = client.Post(full, headers, body, content_type);
        if (!res) {
            last_error = "transport: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            return {res->status, res->get_header_value("Content-Type"), res->body};
        }
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
        if (res->status != 429 && res->status < 500) {
            break;
        }
    }
    fail(ErrorCode::EndpointError, std::string(to_string(m_config.role)) + " " + m_host + full + " failed: " +
                                       last_error);
}

Json HttpEndpoint::post_json(const std::string &path, const Json &body) {
    const auto res = post(path, body.dump(), "application/json");
    Json parsed = Json::parse(res.body, nullptr, false);
    if (parsed.is_discarded()) {
        fail(ErrorCode::EndpointError,
             std::string(to_string(m_config.role)) + " returned a non-JSON body for " + path);
    }
    return parsed;
}

std::string sniff_image_mime(std::string_view b) {
    if (b.size() >= 8 && b.substr(0, 8) == std::string_view("\x89PNG\r\n\x1a\n", 8)) return "image/png";
    if (b.size() >= 3 && b.substr(0, 3) == "\xff\xd8\xff") return "image/jpeg";
    if (b.size() >= 12 && b.substr(0, 4) == "RIFF" && b.substr(8, 4) == "WEBP") return "image/webp";
    if (b.size() >= 2 && b[0] == 'P' && (b[1] == '6' || b[1] == '3')) return "image/x-portable-pixmap";
    return "application/octet-stream";
}

std::string image_data_url(std::string_view bytes) {
    return "data:" + sniff_image_mime(bytes) + ";base64," + base64_encode(bytes);
}

Json chat_message(const std::string &text, const std::vector<std::string> &images) {
    if (images.empty()) {
        return {{"role", "user"}, {"content", text}};
    }
    Json parts = Json::array();
    parts.push_back({{"type", "text"}, {"text", text}});
    for (const auto &img : images) {
        parts.push_back({{"type", "image_url"}, {"image_url", {{"url", image_data_url(img)}}}});
    }
    return {{"role", "user"}, {"content", parts}};
}

Json chat_request(const EndpointConfig &cfg, const Json &message, const Json &extra) {
    Json req = {{"model", cfg.model}, {"messages", Json::array({message})}, {"temperature", 0}};
    for (const auto &[k, v] : extra.items()) {
        req[k] = v;
    }
    return req;
}

std::string chat_content(const Json &response) {
    try {
        const Json &content = response.at("choices").at(0).at("message").at("content");
        if (content.is_string()) {
            return content.get<std::string>();
        }
    } catch (const Json::exception &) {
    }
    fail(ErrorCode::EndpointError, "chat response has no choices[0].message.content string");
}

} // namespace protobias
