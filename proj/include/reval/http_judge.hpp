#pragma once

// Live judge adapter speaking the chat-completion wire protocol:
// POST {base_url}/chat/completions with role-tagged messages, temperature
// and max tokens; the reply text is choices[0].message.content.
//
// Kept out of judge.hpp so test binaries that only need the scripted mock
// do not pull in the HTTP client. Define CPPHTTPLIB_OPENSSL_SUPPORT before
// including this header to reach https endpoints.

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "reval/judge.hpp"

namespace reval {

class HttpJudgeProvider : public JudgeProvider {
public:
    struct Options {
        std::string base_url;  // e.g. https://api.example.com/v1
        std::string api_key;
        int timeout_seconds = 120;
    };

    explicit HttpJudgeProvider(Options options) : options_(std::move(options)) {
        if (options_.base_url.empty())
            throw ConfigError("HttpJudgeProvider: base_url is required");
    }

    std::string complete(const JudgeRequest& request) override {
        nlohmann::json body;
        body["model"] = request.model_name;
        body["messages"] = nlohmann::json::array({
            nlohmann::json{{"role", "system"}, {"content", request.system_role}},
            nlohmann::json{{"role", "user"}, {"content", request.user_prompt}},
        });
        body["temperature"] = request.temperature;
        body["max_tokens"] = request.max_output_tokens;

        httplib::Client client(options_.base_url);
        client.set_connection_timeout(options_.timeout_seconds);
        client.set_read_timeout(options_.timeout_seconds);
        httplib::Headers headers;
        if (!options_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + options_.api_key);

        auto result = client.Post("/chat/completions", headers, body.dump(),
                                  "application/json");
        if (!result)
            throw TransportError("judge transport failure: " + httplib::to_string(result.error()));
        if (result->status == 429 || result->status >= 500)
            throw TransportError("judge returned HTTP " + std::to_string(result->status));
        if (result->status != 200)
            throw ConfigError("judge rejected request with HTTP " +
                              std::to_string(result->status) + ": " + result->body);

        nlohmann::json doc = nlohmann::json::parse(result->body, nullptr, false);
        if (doc.is_discarded())
            throw TransportError("judge returned malformed completion body");
        try {
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("unexpected completion shape: ") + e.what());
        }
    }

    std::string name() const override { return "http:" + options_.base_url; }

private:
    Options options_;
};

}  // namespace reval
