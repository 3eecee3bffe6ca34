#pragma once

// Judge access layer. Every pipeline talks to its judge model through
// JudgeGateway, which adds content-addressed response caching, bounded
// retries with exponential backoff, a global in-flight limit and optional
// per-provider pacing. Providers are pluggable: a chat-completion HTTP
// adapter for live models and a scripted mock for deterministic runs.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "reval/core.hpp"

namespace reval {

struct ConfigError : Error {
    using Error::Error;
};

// Transient transport failure; the gateway retries these.
struct TransportError : Error {
    using Error::Error;
};

// Raised after the retry budget is exhausted.
struct JudgeUnavailable : Error {
    using Error::Error;
};

// Raised when no structured payload can be recovered from judge output.
// Carries the raw text so it can be audited.
struct ParseFailure : Error {
    std::string raw_text;
    ParseFailure(const std::string& msg, std::string raw)
        : Error(msg), raw_text(std::move(raw)) {}
};

// ---------------------------------------------------------------------------
// Requests and responses

struct JudgeRequest {
    std::string system_role;
    std::string user_prompt;
    std::string model_name;
    double temperature = 0.0;
    int max_output_tokens = 8192;
    // Distinguishes otherwise-identical requests that must not share a cache
    // entry (weight-generation trials, parse re-asks).
    std::string variant;

    std::string cache_key() const;

    JudgeRequest with_variant_suffix(const std::string& suffix) const {
        JudgeRequest copy = *this;
        copy.variant += suffix;
        return copy;
    }
};

struct JudgeResponse {
    std::string raw_text;
    std::optional<nlohmann::json> parsed_payload;
    int attempt_count = 0;
    bool from_cache = false;
};

namespace detail {

// 64-bit FNV-1a over a length-prefixed field encoding.
inline std::uint64_t fnv1a64(const std::string& data, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline std::string canonical_request_encoding(const JudgeRequest& r) {
    std::ostringstream oss;
    auto field = [&oss](const std::string& s) { oss << s.size() << ':' << s << '\n'; };
    field(r.model_name);
    {
        std::ostringstream t;
        t.precision(17);
        t << r.temperature;
        field(t.str());
    }
    field(std::to_string(r.max_output_tokens));
    field(r.system_role);
    field(r.user_prompt);
    field(r.variant);
    return oss.str();
}

}  // namespace detail

inline std::string JudgeRequest::cache_key() const {
    const std::string enc = detail::canonical_request_encoding(*this);
    // Two passes with different seeds give a 128-bit key.
    std::uint64_t a = detail::fnv1a64(enc);
    std::uint64_t b = detail::fnv1a64(enc, 0x84222325cbf29ce4ull);
    return detail::hex64(a) + detail::hex64(b);
}

// ---------------------------------------------------------------------------
// Providers

class JudgeProvider {
public:
    virtual ~JudgeProvider() = default;
    // Returns the provider's raw text for the request. Throws TransportError
    // for failures worth retrying, ConfigError for permanent ones.
    virtual std::string complete(const JudgeRequest& request) = 0;
    virtual std::string name() const = 0;
};

// Deterministic mock driven by a fixture file. Entries are checked in order;
// the first match answers. An entry matches on any combination of request
// digest, model name, exact variant tag and prompt substrings. `fail_times`
// makes the first N hits raise a transport error, for retry tests.
//
// Fixture format:
//   {"entries": [
//     {"match": {"digest": "<cache key>"}, "reply": "OK"},
//     {"match": {"model": "judge-x", "prompt_contains": ["<task>", "weights"],
//                "variant": "trial-1"},
//      "reply_json": {...}, "fail_times": 2, "delay_ms": 5}
//   ]}
class ScriptedJudgeProvider : public JudgeProvider {
public:
    struct Entry {
        std::optional<std::string> digest;
        std::optional<std::string> model;
        std::optional<std::string> variant;
        std::vector<std::string> prompt_contains;
        std::string reply;
        int fail_times = 0;
        int delay_ms = 0;
        std::shared_ptr<std::atomic<int>> failures_served =
            std::make_shared<std::atomic<int>>(0);
    };

    ScriptedJudgeProvider() = default;

    static ScriptedJudgeProvider from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open mock script: " + path.string());
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("malformed mock script " + path.string() + ": " + e.what());
        }
        ScriptedJudgeProvider provider;
        for (const auto& item : doc.at("entries")) {
            Entry entry;
            if (item.contains("match")) {
                const auto& m = item["match"];
                if (m.contains("digest")) entry.digest = m["digest"].get<std::string>();
                if (m.contains("model")) entry.model = m["model"].get<std::string>();
                if (m.contains("variant")) entry.variant = m["variant"].get<std::string>();
                if (m.contains("prompt_contains")) {
                    if (m["prompt_contains"].is_array()) {
                        for (const auto& s : m["prompt_contains"])
                            entry.prompt_contains.push_back(s.get<std::string>());
                    } else {
                        entry.prompt_contains.push_back(m["prompt_contains"].get<std::string>());
                    }
                }
            }
            if (item.contains("reply_json")) {
                entry.reply = item["reply_json"].dump(2);
            } else {
                entry.reply = item.value("reply", "");
            }
            entry.fail_times = item.value("fail_times", 0);
            entry.delay_ms = item.value("delay_ms", 0);
            provider.entries_.push_back(std::move(entry));
        }
        return provider;
    }

    void add_entry(Entry entry) { entries_.push_back(std::move(entry)); }

    void add_digest_reply(const std::string& digest, const std::string& reply,
                          int fail_times = 0) {
        Entry e;
        e.digest = digest;
        e.reply = reply;
        e.fail_times = fail_times;
        entries_.push_back(std::move(e));
    }

    std::string complete(const JudgeRequest& request) override {
        const std::string digest = request.cache_key();
        for (const auto& entry : entries_) {
            if (!matches(entry, request, digest)) continue;
            if (entry.delay_ms > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(entry.delay_ms));
            int served = entry.failures_served->load();
            while (served < entry.fail_times) {
                if (entry.failures_served->compare_exchange_weak(served, served + 1))
                    throw TransportError("scripted transport failure");
            }
            return entry.reply;
        }
        throw ConfigError("no scripted response for model=" + request.model_name +
                          " variant=" + request.variant + " digest=" + digest);
    }

    std::string name() const override { return "scripted-mock"; }

private:
    static bool matches(const Entry& entry, const JudgeRequest& request,
                        const std::string& digest) {
        if (entry.digest && *entry.digest != digest) return false;
        if (entry.model && *entry.model != request.model_name) return false;
        if (entry.variant && *entry.variant != request.variant) return false;
        for (const auto& needle : entry.prompt_contains) {
            if (request.user_prompt.find(needle) == std::string::npos &&
                request.system_role.find(needle) == std::string::npos)
                return false;
        }
        return true;
    }

    std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Gateway

struct GatewayConfig {
    std::filesystem::path cache_dir;  // empty disables the on-disk cache
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{1000};
    double backoff_factor = 2.0;
    int max_concurrency = 8;
    std::chrono::milliseconds min_request_interval{0};
};

class JudgeGateway {
public:
    explicit JudgeGateway(GatewayConfig config) : config_(std::move(config)) {
        if (config_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
        if (config_.max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
        if (!config_.cache_dir.empty()) std::filesystem::create_directories(config_.cache_dir);
    }

    // Routes every model name to `provider` unless a specific route exists.
    void set_default_provider(std::shared_ptr<JudgeProvider> provider) {
        std::lock_guard<std::mutex> lock(mutex_);
        default_provider_ = std::move(provider);
    }

    void route_model(const std::string& model_name, std::shared_ptr<JudgeProvider> provider) {
        std::lock_guard<std::mutex> lock(mutex_);
        routes_[model_name] = std::move(provider);
    }

    JudgeResponse submit(const JudgeRequest& request) {
        const std::string key = request.cache_key();
        if (auto cached = read_cache(key)) return *cached;

        std::shared_ptr<JudgeProvider> provider = resolve_provider(request.model_name);

        Slot slot(*this);
        pace(provider.get());

        int attempt = 0;
        std::chrono::milliseconds delay = config_.backoff_base;
        for (;;) {
            ++attempt;
            try {
                std::string text = provider->complete(request);
                JudgeResponse response;
                response.raw_text = std::move(text);
                response.attempt_count = attempt;
                response.from_cache = false;
                write_cache(key, response);
                calls_made_.fetch_add(1);
                return response;
            } catch (const TransportError& e) {
                if (attempt >= config_.max_attempts)
                    throw JudgeUnavailable("judge unavailable after " +
                                           std::to_string(attempt) + " attempts: " + e.what());
                std::this_thread::sleep_for(delay);
                delay = std::chrono::milliseconds(static_cast<long long>(
                    static_cast<double>(delay.count()) * config_.backoff_factor));
            }
        }
    }

    long long calls_made() const { return calls_made_.load(); }
    int in_flight() const { return in_flight_.load(); }
    int peak_in_flight() const { return peak_in_flight_.load(); }
    const GatewayConfig& config() const { return config_; }

private:
    // RAII guard over the bounded in-flight pool.
    struct Slot {
        JudgeGateway& gw;
        explicit Slot(JudgeGateway& g) : gw(g) {
            std::unique_lock<std::mutex> lock(gw.pool_mutex_);
            gw.pool_cv_.wait(lock, [&] { return gw.active_ < gw.config_.max_concurrency; });
            ++gw.active_;
            int now = gw.in_flight_.fetch_add(1) + 1;
            int peak = gw.peak_in_flight_.load();
            while (now > peak && !gw.peak_in_flight_.compare_exchange_weak(peak, now)) {
            }
        }
        ~Slot() {
            {
                std::lock_guard<std::mutex> lock(gw.pool_mutex_);
                --gw.active_;
            }
            gw.in_flight_.fetch_sub(1);
            gw.pool_cv_.notify_one();
        }
    };

    std::shared_ptr<JudgeProvider> resolve_provider(const std::string& model_name) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = routes_.find(model_name);
        if (it != routes_.end()) return it->second;
        if (default_provider_) return default_provider_;
        throw ConfigError("no judge provider configured for model: " + model_name);
    }

    // Per-provider pacing: consecutive requests to one provider keep at least
    // min_request_interval between their start times.
    void pace(const JudgeProvider* provider) {
        if (config_.min_request_interval.count() <= 0) return;
        std::unique_lock<std::mutex> lock(pace_mutex_);
        for (;;) {
            auto now = std::chrono::steady_clock::now();
            auto it = last_start_.find(provider);
            if (it == last_start_.end() || now >= it->second + config_.min_request_interval) {
                last_start_[provider] = now;
                return;
            }
            auto earliest = it->second + config_.min_request_interval;
            lock.unlock();
            std::this_thread::sleep_until(earliest);
            lock.lock();
        }
    }

    std::filesystem::path cache_path(const std::string& key) const {
        return config_.cache_dir / (key + ".json");
    }

    std::optional<JudgeResponse> read_cache(const std::string& key) {
        if (config_.cache_dir.empty()) return std::nullopt;
        std::ifstream in(cache_path(key));
        if (!in) return std::nullopt;
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception&) {
            emit_warning("discarding unreadable cache entry " + key);
            return std::nullopt;
        }
        JudgeResponse response;
        response.raw_text = doc.value("raw_text", "");
        response.attempt_count = doc.value("attempt_count", 1);
        response.from_cache = true;
        return response;
    }

    void write_cache(const std::string& key, const JudgeResponse& response) {
        if (config_.cache_dir.empty()) return;
        nlohmann::json doc;
        doc["raw_text"] = response.raw_text;
        doc["attempt_count"] = response.attempt_count;
        const auto path = cache_path(key);
        const auto tmp = path.string() + ".tmp." +
                         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream out(tmp, std::ios::trunc);
            out << doc.dump(2) << '\n';
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) {
            std::filesystem::remove(tmp, ec);
            emit_warning("failed to store cache entry " + key);
        }
    }

    GatewayConfig config_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<JudgeProvider>> routes_;
    std::shared_ptr<JudgeProvider> default_provider_;

    std::mutex pool_mutex_;
    std::condition_variable pool_cv_;
    int active_ = 0;

    std::mutex pace_mutex_;
    std::map<const JudgeProvider*, std::chrono::steady_clock::time_point> last_start_;

    std::atomic<long long> calls_made_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_in_flight_{0};
};

// ---------------------------------------------------------------------------
// Structured payload extraction

struct PayloadShape {
    enum class Kind { any, object, array };
    Kind kind = Kind::any;
    std::vector<std::string> required_keys;  // for objects

    static PayloadShape any() { return {}; }
    static PayloadShape object(std::vector<std::string> keys = {}) {
        return {Kind::object, std::move(keys)};
    }
    static PayloadShape array() { return {Kind::array, {}}; }
};

namespace detail {

// Finds the end of a balanced JSON value starting at `start`, respecting
// string literals and escapes. Returns npos when unbalanced.
inline size_t balanced_end(const std::string& text, size_t start) {
    int depth = 0;
    bool in_string = false;
    for (size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{' || c == '[') {
            ++depth;
        } else if (c == '}' || c == ']') {
            --depth;
            if (depth == 0) return i;
        }
    }
    return std::string::npos;
}

// One bounded repair pass: drop trailing commas and escape raw newlines that
// appear inside string literals.
inline std::string repair_json_candidate(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_string = false;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\' && i + 1 < text.size()) {
                out.push_back(c);
                out.push_back(text[++i]);
                continue;
            }
            if (c == '"') {
                in_string = false;
                out.push_back(c);
                continue;
            }
            if (c == '\n') {
                out += "\\n";
                continue;
            }
            if (c == '\r') {
                out += "\\r";
                continue;
            }
            if (c == '\t') {
                out += "\\t";
                continue;
            }
            out.push_back(c);
            continue;
        }
        if (c == '"') {
            in_string = true;
            out.push_back(c);
            continue;
        }
        if (c == ',') {
            size_t j = i + 1;
            while (j < text.size() && (text[j] == ' ' || text[j] == '\n' || text[j] == '\r' ||
                                       text[j] == '\t'))
                ++j;
            if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;  // trailing comma
        }
        out.push_back(c);
    }
    return out;
}

inline bool shape_matches(const nlohmann::json& doc, const PayloadShape& shape) {
    switch (shape.kind) {
        case PayloadShape::Kind::any:
            break;
        case PayloadShape::Kind::object:
            if (!doc.is_object()) return false;
            for (const auto& key : shape.required_keys)
                if (!doc.contains(key)) return false;
            break;
        case PayloadShape::Kind::array:
            if (!doc.is_array()) return false;
            break;
    }
    return true;
}

inline std::optional<nlohmann::json> try_parse_candidate(const std::string& candidate,
                                                         const PayloadShape& shape) {
    auto doc = nlohmann::json::parse(candidate, nullptr, false);
    if (!doc.is_discarded() && shape_matches(doc, shape)) return doc;
    auto repaired = nlohmann::json::parse(repair_json_candidate(candidate), nullptr, false);
    if (!repaired.is_discarded() && shape_matches(repaired, shape)) return repaired;
    return std::nullopt;
}

}  // namespace detail

// Locates the first well-formed JSON document in free-form judge output,
// tolerating surrounding prose and fenced code blocks, with one bounded
// repair pass before giving up.
inline nlohmann::json extract_structured_payload(const std::string& raw,
                                                 const PayloadShape& shape = PayloadShape::any()) {
    if (raw.empty()) throw ParseFailure("empty judge output", raw);

    // Fenced blocks first: their contents are the strongest candidates.
    size_t fence = 0;
    while ((fence = raw.find("```", fence)) != std::string::npos) {
        size_t body_start = raw.find('\n', fence);
        if (body_start == std::string::npos) break;
        size_t fence_end = raw.find("```", body_start);
        if (fence_end == std::string::npos) break;
        std::string body = raw.substr(body_start + 1, fence_end - body_start - 1);
        size_t first = body.find_first_of("{[");
        if (first != std::string::npos) {
            size_t last = detail::balanced_end(body, first);
            std::string candidate =
                (last == std::string::npos) ? body.substr(first) : body.substr(first, last - first + 1);
            if (auto doc = detail::try_parse_candidate(candidate, shape)) return *doc;
        }
        fence = fence_end + 3;
    }

    for (size_t start = raw.find_first_of("{["); start != std::string::npos;
         start = raw.find_first_of("{[", start + 1)) {
        size_t end = detail::balanced_end(raw, start);
        if (end == std::string::npos) continue;
        if (auto doc = detail::try_parse_candidate(raw.substr(start, end - start + 1), shape))
            return *doc;
    }
    throw ParseFailure("no structured payload found in judge output", raw);
}

// Submits the request and extracts a structured payload, re-asking once with
// a fresh cache identity when the first reply does not parse.
inline std::pair<JudgeResponse, nlohmann::json> ask_for_payload(
    JudgeGateway& gateway, const JudgeRequest& request,
    const PayloadShape& shape = PayloadShape::any()) {
    JudgeResponse response = gateway.submit(request);
    try {
        nlohmann::json payload = extract_structured_payload(response.raw_text, shape);
        response.parsed_payload = payload;
        return {response, payload};
    } catch (const ParseFailure&) {
        JudgeRequest retry = request.with_variant_suffix("#r1");
        JudgeResponse second = gateway.submit(retry);
        nlohmann::json payload = extract_structured_payload(second.raw_text, shape);
        second.parsed_payload = payload;
        return {second, payload};
    }
}

}  // namespace reval
