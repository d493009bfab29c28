#include "protobias/mock_endpoints.hpp"

#include "protobias/error.hpp"
#include "protobias/hashing.hpp"
#include "protobias/text.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace protobias {

namespace {

double unit_noise(const std::string &tag) {
    // uniform in [0, 1) from a hash
    const std::uint64_t v = derive_seed(0x6d6f636bULL, tag);
    return static_cast<double>(v >> 11) * 0x1.0p-53;
}

std::map<std::string, std::string> parse_inputs(const std::string &prompt) {
    std::map<std::string, std::string> out;
    std::istringstream in(prompt);
    std::string line;
    bool inside = false;
    while (std::getline(in, line)) {
        if (!inside) {
            inside = line.rfind("Inputs", 0) == 0;
            continue;
        }
        if (text::trim(line).empty()) {
            break;
        }
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) {
            continue;
        }
        std::string value = line.substr(eq + 3);
        if (const auto hint = value.find("  ("); hint != std::string::npos) {
            value = value.substr(0, hint);
        }
        out[text::trim(line.substr(0, eq))] = text::trim(value);
    }
    return out;
}

std::string with_article(const std::string &noun) {
    const auto w = text::words(noun);
    return std::string(text::indefinite_article(w.empty() ? noun : w.front())) + " " + noun;
}

std::string capitalize(std::string s) {
    if (!s.empty()) {
        s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    }
    return s;
}

struct KnobPhrase {
    std::string text;
    std::string adversarial;
};

KnobPhrase knob_phrase(const std::string &knob, const std::string &extra) {
    if (knob == "count") {
        const std::string pl = text::pluralize(extra);
        return {"with exactly two " + pl + " nearby", "with exactly three " + pl + " nearby"};
    }
    if (knob == "color" || knob == "color_tone") {
        return {"beside a blue " + extra, "beside a red " + extra};
    }
    if (knob == "layout_relation") {
        return {"with " + with_article(extra) + " to the left of it", "with " + with_article(extra) + " to the right of it"};
    }
    if (knob == "spatial") {
        return {"with " + with_article(extra) + " in the background", "with " + with_article(extra) + " in the foreground"};
    }
    return {"next to a small " + extra, "next to a large " + extra};
}

std::string chat_reply(const std::string &model, const std::string &content, const Json &logprobs = Json()) {
    Json choice = {{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", "stop"}};
    if (!logprobs.is_null()) {
        choice["logprobs"] = logprobs;
    }
    return Json{{"id", "mock-" + sha256_hex(content).substr(0, 12)},
                {"object", "chat.completion"},
                {"model", model},
                {"choices", Json::array({choice})}}
        .dump();
}

struct ChatInput {
    std::string model;
    std::string text;
    std::vector<std::string> images;
};

ChatInput parse_chat(const std::string &body) {
    const Json j = Json::parse(body);
    ChatInput in;
    in.model = j.value("model", "mock");
    const Json &content = j.at("messages").at(0).at("content");
    if (content.is_string()) {
        in.text = content.get<std::string>();
        return in;
    }
    for (const auto &part : content) {
        const std::string type = part.value("type", "");
        if (type == "text") {
            in.text += part.at("text").get<std::string>();
        } else if (type == "image_url") {
            const std::string url = part.at("image_url").at("url").get<std::string>();
            const auto comma = url.find(',');
            in.images.push_back(base64_decode(comma == std::string::npos ? url : url.substr(comma + 1)));
        }
    }
    return in;
}

std::string between(const std::string &s, const std::string &open, const std::string &close) {
    const auto a = s.rfind(open);
    if (a == std::string::npos) {
        return {};
    }
    const auto start = a + open.size();
    const auto b = close.empty() ? std::string::npos : s.find(close, start);
    return text::trim(s.substr(start, b == std::string::npos ? std::string::npos : b - start));
}

// Token-overlap similarity in [0,1] with deterministic noise.
double similarity(const std::string &role, const std::string &text, const std::string &image_prompt) {
    const auto a = text::comparison_tokens(text);
    const auto b = text::comparison_tokens(image_prompt);
    const std::set<std::string> sa(a.begin(), a.end());
    const std::set<std::string> sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (const auto &t : sa) {
        inter += sb.count(t);
    }
    const std::size_t uni = sa.size() + sb.size() - inter;
    const double jaccard = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    const double noise = 0.4 * (unit_noise(role + '\x1f' + text + '\x1f' + image_prompt) - 0.5);
    return std::clamp(jaccard + noise, 0.0, 1.0);
}

void json_error(httplib::Response &res, int status, const std::string &msg) {
    res.status = status;
    res.set_content(Json{{"error", msg}}.dump(), "application/json");
}

} // namespace

std::string mock_triplet_reply(const std::string &prompt) {
    const auto in = parse_inputs(prompt);
    auto get = [&](const char *k) {
        auto it = in.find(k);
        if (it == in.end() || it->second.empty()) {
            fail(ErrorCode::ParseError, std::string("mock text_gen: prompt lacks input '") + k + "'");
        }
        return it->second;
    };
    std::string subject, correct, adversarial, extra, env, verb;
    const std::string knob = get("knob");
    if (in.count("attr_token") != 0) {
        const std::string attr = get("attr_token");
        const bool positive = get("pole") == "positive";
        const std::string np = positive ? get("disadvantaged_desc") : get("advantaged_desc");
        const std::string pr = positive ? get("advantaged_desc") : get("disadvantaged_desc");
        const std::string art(text::indefinite_article(attr));
        subject = art + " " + attr + " person";
        correct = art + " " + attr + " " + np;
        adversarial = art + " " + attr + " " + pr;
        extra = get("extra_element");
        env = get("environment_hint");
        verb = "stands in";
    } else {
        const std::string hyp = in.count("subcategory") != 0 ? get("subcategory") : get("hypernym");
        subject = with_article(hyp);
        correct = with_article(get("non_proto"));
        adversarial = with_article(get("proto"));
        extra = get("extra_object");
        env = get("environment_hint");
        verb = in.count("subcategory") != 0 ? "is pictured in" : "stands in";
    }
    const KnobPhrase k = knob_phrase(knob, extra);
    auto sentence = [&](const std::string &s, const std::string &tail) {
        return capitalize(s) + " " + verb + " " + env + " " + tail + ".";
    };
    const Json triplet = {{"text", sentence(subject, k.text)},
                          {"correct", sentence(correct, k.text)},
                          {"adversarial", sentence(adversarial, k.adversarial)}};
    return "Here is the triplet:\n```json\n" + triplet.dump(2) + "\n```\n";
}

std::string mock_image(const std::string &prompt, int steps, std::uint64_t seed) {
    std::string flat = prompt;
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    std::string out = "P6\n# prompt: " + flat + "\n# seed: " + std::to_string(seed) + "\n# steps: " +
                      std::to_string(steps) + "\n16 16\n255\n";
    std::string pixels;
    std::string block = prompt + '\x1f' + std::to_string(seed) + '\x1f' + std::to_string(steps);
    while (pixels.size() < 16 * 16 * 3) {
        block = sha256_hex(block);
        for (std::size_t i = 0; i + 1 < block.size() && pixels.size() < 16 * 16 * 3; i += 2) {
            pixels.push_back(static_cast<char>(std::stoi(block.substr(i, 2), nullptr, 16)));
        }
    }
    return out + pixels;
}

std::string mock_image_prompt(const std::string &bytes) {
    if (bytes.rfind("P6\n# prompt: ", 0) != 0) {
        return {};
    }
    const auto start = std::strlen("P6\n# prompt: ");
    const auto end = bytes.find('\n', start);
    return end == std::string::npos ? std::string() : bytes.substr(start, end - start);
}

EndpointConfig mock_endpoint_config(Role role, const std::string &base) {
    EndpointConfig cfg;
    cfg.role = role;
    cfg.url = base + "/" + std::string(to_string(role));
    cfg.model = "mock-" + std::string(to_string(role));
    cfg.timeout_s = 30;
    cfg.max_attempts = 3;
    cfg.backoff_initial_s = 0.05;
    return cfg;
}

struct MockEndpoints::Impl {
    httplib::Server server;
    std::thread thread;
    std::string base;
    std::atomic<std::size_t> requests{0};
};

MockEndpoints::MockEndpoints() : m_impl(std::make_unique<Impl>()) {
    auto &srv = m_impl->server;
    auto *counter = &m_impl->requests;

    auto chat_route = [&srv, counter](const std::string &role, auto answer) {
        srv.Post("/" + role + "/v1/chat/completions",
                 [counter, answer, role](const httplib::Request &req, httplib::Response &res) {
                     ++*counter;
                     try {
                         const ChatInput in = parse_chat(req.body);
                         res.set_content(answer(in), "application/json");
                     } catch (const std::exception &e) {
                         json_error(res, 400, role + ": " + e.what());
                     }
                 });
    };

    chat_route("text_gen", [](const ChatInput &in) { return chat_reply(in.model, mock_triplet_reply(in.text)); });

    chat_route("filter_vlm", [](const ChatInput &in) {
        if (in.images.empty()) {
            throw std::runtime_error("no image attached");
        }
        const std::string wanted = between(in.text, "Generation prompt: ", "\n");
        const std::string shown = mock_image_prompt(in.images.front());
        const int score = shown == wanted ? 7 + static_cast<int>(unit_noise("filter\x1f" + wanted + in.images.front()) * 4.0)
                                          : 2;
        return chat_reply(in.model, std::to_string(score));
    });

    chat_route("vqa", [](const ChatInput &in) {
        if (in.images.empty()) {
            throw std::runtime_error("no image attached");
        }
        const std::string text = between(in.text, "Does this figure show \"", "\"?");
        const double p = std::clamp(similarity("vqa", text, mock_image_prompt(in.images.front())), 0.01, 0.99);
        // deliberately unnormalized: the two answers carry 0.9 of the mass
        const Json top = Json::array({{{"token", "Yes"}, {"logprob", std::log(0.9 * p)}},
                                      {{"token", "No"}, {"logprob", std::log(0.9 * (1 - p))}}});
        const Json lp = {{"content", Json::array({{{"token", p >= 0.5 ? "Yes" : "No"}, {"top_logprobs", top}}})}};
        return chat_reply(in.model, p >= 0.5 ? "Yes" : "No", lp);
    });

    chat_route("judge", [](const ChatInput &in) {
        if (in.images.empty()) {
            throw std::runtime_error("no image attached");
        }
        const std::string text = between(in.text, "Text prompt: ", "");
        const double s = similarity("judge", text, mock_image_prompt(in.images.front()));
        const int k = std::clamp(1 + static_cast<int>(std::lround(3.0 * s)), 1, 4);
        return chat_reply(in.model, "{\n  \"score\": " + std::to_string(k) + "\n}");
    });

    chat_route("scorer", [](const ChatInput &in) {
        if (in.images.empty()) {
            throw std::runtime_error("no image attached");
        }
        const std::string text = between(in.text, "Text: ", "\n");
        const double s = similarity("scorer", text, mock_image_prompt(in.images.front()));
        char buf[32];
        std::snprintf(buf, sizeof buf, "score: %.3f", s);
        return chat_reply(in.model, buf);
    });

    auto image_route = [&srv, counter](const std::string &path, bool raw) {
        srv.Post(path, [counter, raw](const httplib::Request &req, httplib::Response &res) {
            ++*counter;
            const Json j = Json::parse(req.body, nullptr, false);
            if (j.is_discarded() || !j.contains("prompt") || !j["prompt"].is_string()) {
                json_error(res, 400, "image_gen: body must carry a prompt");
                return;
            }
            const std::string img = mock_image(j["prompt"].get<std::string>(), j.value("steps", 5),
                                               j.value("seed", std::uint64_t{0}));
            if (raw) {
                res.set_content(img, "image/x-portable-pixmap");
            } else {
                res.set_content(Json{{"image", base64_encode(img)}}.dump(), "application/json");
            }
        });
    };
    image_route("/image_gen/generate", false);
    image_route("/image_gen_raw/generate", true);

    auto score_body = [](const httplib::Request &req, std::string &text, std::string &prompt) {
        const Json j = Json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.contains("text") || !j.contains("image_b64")) {
            return false;
        }
        text = j["text"].get<std::string>();
        prompt = mock_image_prompt(base64_decode(j["image_b64"].get<std::string>()));
        return true;
    };

    srv.Post("/embed/embed", [counter, score_body](const httplib::Request &req, httplib::Response &res) {
        ++*counter;
        std::string text, prompt;
        if (!score_body(req, text, prompt)) {
            json_error(res, 400, "embed: body must carry text and image_b64");
            return;
        }
        // two orthonormal directions; the image leans toward the text by the
        // similarity, scaled into the cosine range CLIP models produce
        const double c = 0.1 + 0.3 * similarity("embed", text, prompt);
        const double s = std::sqrt(1.0 - c * c);
        const Json t = Json::array({1.0, 0.0, 0.0, 0.0});
        const Json i = Json::array({c, s, 0.0, 0.0});
        res.set_content(Json{{"text_embedding", t}, {"image_embedding", i}}.dump(), "application/json");
    });

    srv.Post("/preference/score", [counter, score_body](const httplib::Request &req, httplib::Response &res) {
        ++*counter;
        std::string text, prompt;
        if (!score_body(req, text, prompt)) {
            json_error(res, 400, "preference: body must carry text and image_b64");
            return;
        }
        res.set_content(Json{{"logit", 8.0 * (similarity("preference", text, prompt) - 0.5)}}.dump(),
                        "application/json");
    });
}

MockEndpoints::~MockEndpoints() { stop(); }

int MockEndpoints::start(const std::string &host, int port) {
    auto &srv = m_impl->server;
    int bound = port;
    if (port == 0) {
        bound = srv.bind_to_any_port(host);
    } else if (!srv.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) {
        fail(ErrorCode::IoError, "mock endpoints cannot bind " + host + ":" + std::to_string(port));
    }
    m_impl->base = "http://" + host + ":" + std::to_string(bound);
    m_impl->thread = std::thread([&srv] { srv.listen_after_bind(); });
    return bound;
}

void MockEndpoints::stop() {
    if (!m_impl) {
        return;
    }
    m_impl->server.stop();
    if (m_impl->thread.joinable()) {
        m_impl->thread.join();
    }
}

void MockEndpoints::wait() {
    if (m_impl->thread.joinable()) {
        m_impl->thread.join();
    }
}

std::string MockEndpoints::url(Role role) const { return m_impl->base + "/" + std::string(to_string(role)); }

std::size_t MockEndpoints::requests() const { return m_impl->requests.load(); }

} // namespace protobias
