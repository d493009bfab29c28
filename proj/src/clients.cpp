#include "protobias/clients.hpp"

#include "protobias/error.hpp"
#include "protobias/hashing.hpp"
#include "protobias/text.hpp"

#include <cmath>

namespace protobias {

namespace {

const std::string kChatPath = "/v1/chat/completions";

std::string image_reply(HttpEndpoint &endpoint, const std::string &prompt, const std::string &image) {
    const auto &cfg = endpoint.config();
    return chat_content(endpoint.post_json(kChatPath, chat_request(cfg, chat_message(prompt, {image}))));
}

std::vector<double> vec(const Json &j, const char *key) {
    if (!j.contains(key) || !j[key].is_array()) {
        fail(ErrorCode::EndpointError, std::string("embedding response lacks '") + key + "'");
    }
    try {
        return j[key].get<std::vector<double>>();
    } catch (const Json::exception &) {
        fail(ErrorCode::EndpointError, std::string("embedding '") + key + "' is not numeric");
    }
}

class ClipMetric : public Metric {
public:
    explicit ClipMetric(HttpEndpoint &e) : m_e(e) {}
    MetricId id() const override { return MetricId::ClipScore; }
    std::string model() const override { return m_e.config().model; }
    RawScore score(const std::string &text, const std::string &image) override {
        const Json res = m_e.post_json(
            "/embed", {{"model", model()}, {"text", text}, {"image_b64", base64_encode(image)}});
        const double c = cosine(vec(res, "text_embedding"), vec(res, "image_embedding"));
        return {c, normalize_clip(c)};
    }

private:
    HttpEndpoint &m_e;
};

class PickMetric : public Metric {
public:
    explicit PickMetric(HttpEndpoint &e) : m_e(e) {}
    MetricId id() const override { return MetricId::PickScore; }
    std::string model() const override { return m_e.config().model; }
    RawScore score(const std::string &text, const std::string &image) override {
        const Json res = m_e.post_json(
            "/score", {{"model", model()}, {"text", text}, {"image_b64", base64_encode(image)}});
        if (!res.contains("logit") || !res["logit"].is_number()) {
            fail(ErrorCode::EndpointError, "preference response lacks numeric 'logit'");
        }
        const double logit = res["logit"].get<double>();
        return {logit, normalize_pick(logit)};
    }

private:
    HttpEndpoint &m_e;
};

class VqaMetric : public Metric {
public:
    VqaMetric(HttpEndpoint &e, const AssetLibrary &assets) : m_e(e), m_question(assets.get("prompt.vqa_question")) {}
    MetricId id() const override { return MetricId::VqaScore; }
    std::string model() const override { return m_e.config().model; }
    Json assets() const override { return {{"question", m_question.provenance()}}; }
    RawScore score(const std::string &text, const std::string &image) override {
        const std::string q = fill_placeholders(m_question.text, {{"text", text}});
        const Json req = chat_request(m_e.config(), chat_message(q, {image}),
                                      {{"logprobs", true}, {"top_logprobs", 20}, {"max_tokens", 1}});
        const double p = vqa_yes_probability(m_e.post_json(kChatPath, req));
        return {p, p};
    }

private:
    HttpEndpoint &m_e;
    const Asset &m_question;
};

class JudgeMetric : public Metric {
public:
    JudgeMetric(HttpEndpoint &e, const AssetLibrary &assets) : m_e(e), m_rubric(assets.get("rubric.llm_judge")) {}
    MetricId id() const override { return MetricId::LlmJudge; }
    std::string model() const override { return m_e.config().model; }
    Json assets() const override { return {{"rubric", m_rubric.provenance()}}; }
    RawScore score(const std::string &text, const std::string &image) override {
        const int k = parse_judge_rating(image_reply(m_e, fill_placeholders(m_rubric.text, {{"text", text}}), image));
        return {static_cast<double>(k), normalize_judge(k)};
    }

private:
    HttpEndpoint &m_e;
    const Asset &m_rubric;
};

class ProtoMetric : public Metric {
public:
    ProtoMetric(HttpEndpoint &e, const AssetLibrary &assets) : m_e(e), m_prompt(assets.get("prompt.protoscore")) {}
    MetricId id() const override { return MetricId::ProtoScore; }
    std::string model() const override { return m_e.config().model; }
    Json assets() const override { return {{"prompt", m_prompt.provenance()}}; }
    RawScore score(const std::string &text, const std::string &image) override {
        const double v = parse_decimal_score(image_reply(m_e, fill_placeholders(m_prompt.text, {{"text", text}}), image));
        return {v, normalize_proto(v)};
    }

private:
    HttpEndpoint &m_e;
    const Asset &m_prompt;
};

std::string answer_word(const std::string &token) {
    const auto w = text::words(token);
    return w.size() == 1 ? text::to_lower(w.front()) : std::string();
}

} // namespace

std::string ChatTextGenerator::complete(const std::string &prompt) {
    const auto &cfg = m_endpoint.config();
    return chat_content(m_endpoint.post_json(kChatPath, chat_request(cfg, chat_message(prompt))));
}

std::string HttpImageGenerator::generate(const std::string &prompt, int steps, std::uint64_t seed) {
    const auto &cfg = m_endpoint.config();
    const Json body = {{"prompt", prompt}, {"steps", steps}, {"seed", seed}, {"model", cfg.model}};
    const auto res = m_endpoint.post("/generate", body.dump(), "application/json");
    if (cfg.image_wire == ImageWire::Raw) {
        if (res.body.empty()) {
            fail(ErrorCode::EndpointError, "image endpoint returned no bytes");
        }
        return res.body;
    }
    const Json j = Json::parse(res.body, nullptr, false);
    if (j.is_discarded() || !j.contains(cfg.image_field) || !j[cfg.image_field].is_string()) {
        fail(ErrorCode::EndpointError, "image response lacks base64 field '" + cfg.image_field + "'");
    }
    return base64_decode(j[cfg.image_field].get<std::string>());
}

std::string ChatAlignmentRater::rate(const std::string &rubric_prompt, const std::string &image_bytes) {
    return image_reply(m_endpoint, rubric_prompt, image_bytes);
}

Role role_for(MetricId id) {
    switch (id) {
    case MetricId::ClipScore: return Role::Embed;
    case MetricId::PickScore: return Role::Preference;
    case MetricId::VqaScore: return Role::Vqa;
    case MetricId::LlmJudge: return Role::Judge;
    case MetricId::ProtoScore: return Role::Scorer;
    }
    return Role::Judge;
}

std::unique_ptr<Metric> make_metric(MetricId id, HttpEndpoint &endpoint, const AssetLibrary &assets) {
    switch (id) {
    case MetricId::ClipScore: return std::make_unique<ClipMetric>(endpoint);
    case MetricId::PickScore: return std::make_unique<PickMetric>(endpoint);
    case MetricId::VqaScore: return std::make_unique<VqaMetric>(endpoint, assets);
    case MetricId::LlmJudge: return std::make_unique<JudgeMetric>(endpoint, assets);
    case MetricId::ProtoScore: return std::make_unique<ProtoMetric>(endpoint, assets);
    }
    fail(ErrorCode::InvalidArgument, "unknown metric");
}

double vqa_yes_probability(const Json &response) {
    const Json *top = nullptr;
    try {
        const Json &lp = response.at("choices").at(0).at("logprobs");
        top = &lp.at("content").at(0).at("top_logprobs");
    } catch (const Json::exception &) {
        fail(ErrorCode::ProbabilityUnavailableError, "endpoint returned no token logprobs");
    }
    if (!top->is_array()) {
        fail(ErrorCode::ProbabilityUnavailableError, "top_logprobs is not a list");
    }
    double yes = 0, no = 0;
    for (const auto &entry : *top) {
        if (!entry.contains("token") || !entry.contains("logprob") || !entry["logprob"].is_number()) {
            continue;
        }
        const std::string w = answer_word(entry["token"].get<std::string>());
        const double p = std::exp(entry["logprob"].get<double>());
        if (w == "yes") {
            yes += p;
        } else if (w == "no") {
            no += p;
        }
    }
    return yes_probability(yes, no);
}

} // namespace protobias
