#pragma once

#include "protobias/jsonl.hpp"

#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace protobias {

enum class Role { TextGen, ImageGen, FilterVlm, Embed, Preference, Vqa, Judge, Scorer };

const std::vector<Role> &all_roles();
std::string_view to_string(Role role) noexcept; // "text_gen", ...
std::string env_prefix(Role role);              // "PROTOBIAS_TEXT_GEN"
Role parse_role(std::string_view name);

enum class ImageWire { Base64, Raw };

struct EndpointConfig {
    Role role = Role::TextGen;
    std::string url; // base URL; the role's request path is appended
    std::string model;
    std::string api_key; // environment only, never serialized
    double timeout_s = 120.0;
    int max_attempts = 4;
    double backoff_initial_s = 0.5;
    double backoff_max_s = 8.0;
    double rate_per_s = 0.0; // 0 = unlimited
    ImageWire image_wire = ImageWire::Base64;
    std::string image_field = "image";

    bool configured() const noexcept { return !url.empty(); }
    Json to_json() const; // provenance: no key
};

/// Applies a config-file entry, then PROTOBIAS_<ROLE>_URL/_MODEL/_KEY from the
/// environment (environment wins). A key inside the file is a ConfigError.
EndpointConfig resolve_endpoint(Role role, const Json &file_entry = Json());

// JSON-over-HTTP client for one role. Thread-safe: each request opens its own
// connection; the rate limiter is shared. 429, 5xx and transport failures are
// retried with exponential backoff under a fixed request id; other statuses
// fail immediately. Everything surfaces as EndpointError.
class HttpEndpoint {
public:
    explicit HttpEndpoint(EndpointConfig config);

    const EndpointConfig &config() const noexcept { return m_config; }

    struct Response {
        int status = 0;
        std::string content_type;
        std::string body;
    };

    Response post(const std::string &path, const std::string &body, const std::string &content_type);
    Json post_json(const std::string &path, const Json &body);

private:
    void throttle();

    EndpointConfig m_config;
    std::string m_host;   // scheme://host:port
    std::string m_prefix; // path part of the base URL, no trailing slash
    std::mutex m_rate_mutex;
    std::chrono::steady_clock::time_point m_next_slot{};
};

/// "data:<mime>;base64,..." for an image attachment.
std::string image_data_url(std::string_view bytes);
std::string sniff_image_mime(std::string_view bytes);

// Chat-completions helpers shared by the text and VLM roles.
Json chat_message(const std::string &text, const std::vector<std::string> &images = {});
Json chat_request(const EndpointConfig &cfg, const Json &message, const Json &extra = Json::object());
std::string chat_content(const Json &response);

} // namespace protobias
