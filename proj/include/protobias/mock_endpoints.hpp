#pragma once

#include "protobias/endpoint.hpp"

#include <memory>
#include <string>

namespace protobias {

// Deterministic stand-ins for every endpoint role on one HTTP server, each
// role under its own path prefix (/text_gen, /image_gen, ...). Responses are
// pure functions of the request, so whole pipeline runs are reproducible.
//   text_gen    reads the Inputs block of a triplet prompt and writes a
//               template-conforming triplet
//   image_gen   returns a small PPM whose header comments carry the prompt
//               (base64 JSON at /image_gen, raw bytes at /image_gen_raw)
//   filter_vlm  rates 7..10 when the image was made from the rated prompt
//   scorers     score by token overlap between the text and the prompt baked
//               into the image, plus hash noise
class MockEndpoints {
public:
    MockEndpoints();
    ~MockEndpoints();

    int start(const std::string &host, int port); // returns the bound port
    void stop();
    void wait();

    /// Base URL for a role on a running server.
    std::string url(Role role) const;

    /// Request counter, for tests that check resume skips work.
    std::size_t requests() const;

private:
    struct Impl;
    std::unique_ptr<Impl> m_impl;
};

/// Endpoint config pointing a role at a mock server base ("http://host:port").
EndpointConfig mock_endpoint_config(Role role, const std::string &base);

// Exposed for tests.
std::string mock_triplet_reply(const std::string &prompt);
std::string mock_image(const std::string &prompt, int steps, std::uint64_t seed);
/// Prompt embedded in a mock image, empty for any other bytes.
std::string mock_image_prompt(const std::string &bytes);

} // namespace protobias
