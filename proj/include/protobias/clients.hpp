#pragma once

#include "protobias/assets.hpp"
#include "protobias/endpoint.hpp"
#include "protobias/media_pipeline.hpp"
#include "protobias/metrics.hpp"
#include "protobias/prompt_forge.hpp"

#include <memory>

namespace protobias {

// HTTP implementations of the role interfaces. Request paths appended to the
// role's base URL:
//   chat roles (text_gen, filter_vlm, vqa, judge, scorer)  /v1/chat/completions
//   image_gen   /generate   {prompt, steps, seed, model} -> bytes or {"<image_field>": base64}
//   embed       /embed      {model, text, image_b64} -> {text_embedding, image_embedding}
//   preference  /score      {model, text, image_b64} -> {logit}

class ChatTextGenerator : public TextGenerator {
public:
    explicit ChatTextGenerator(HttpEndpoint &endpoint) : m_endpoint(endpoint) {}
    std::string complete(const std::string &prompt) override;
    std::string model() const override { return m_endpoint.config().model; }

private:
    HttpEndpoint &m_endpoint;
};

class HttpImageGenerator : public ImageGenerator {
public:
    explicit HttpImageGenerator(HttpEndpoint &endpoint) : m_endpoint(endpoint) {}
    std::string generate(const std::string &prompt, int steps, std::uint64_t seed) override;
    std::string model() const override { return m_endpoint.config().model; }

private:
    HttpEndpoint &m_endpoint;
};

class ChatAlignmentRater : public AlignmentRater {
public:
    explicit ChatAlignmentRater(HttpEndpoint &endpoint) : m_endpoint(endpoint) {}
    std::string rate(const std::string &rubric_prompt, const std::string &image_bytes) override;
    std::string model() const override { return m_endpoint.config().model; }

private:
    HttpEndpoint &m_endpoint;
};

/// Endpoint role a metric talks to.
Role role_for(MetricId id);

std::unique_ptr<Metric> make_metric(MetricId id, HttpEndpoint &endpoint, const AssetLibrary &assets);

/// P(yes) from a chat-completions reply carrying logprobs for the first
/// generated token. Throws ProbabilityUnavailableError without logprobs.
double vqa_yes_probability(const Json &chat_response);

} // namespace protobias
