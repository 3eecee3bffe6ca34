#pragma once

// Benchmark construction utilities: judge-based screening of raw queries for
// deep-research fit, classification into a configurable topic taxonomy, and
// proportional compression of the observed distribution into a task quota.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "reval/core.hpp"
#include "reval/judge.hpp"
#include "reval/prompts.hpp"

namespace reval {

struct ScreeningError : Error {
    using Error::Error;
};

struct ClassificationError : Error {
    using Error::Error;
};

struct TopicDistribution {
    std::map<std::string, int> counts;
    int total = 0;

    void add(const std::string& topic) {
        ++counts[topic];
        ++total;
    }
};

enum class ScreenDecision { keep, drop };

struct CurationConfig {
    std::string judge_model = "curation-judge";
    double temperature = 0.0;
    int max_output_tokens = 1024;
};

// ---------------------------------------------------------------------------
// Screening

inline ScreenDecision screen_deep_research_query(JudgeGateway& gateway,
                                                 const CurationConfig& cfg,
                                                 const std::string& query) {
    if (query.empty() || query.find_first_not_of(" \t\r\n") == std::string::npos)
        throw std::invalid_argument("screen_deep_research_query: empty query");

    const auto& tpl = prompts::deep_research_screen();
    JudgeRequest request;
    request.system_role = tpl.system_role;
    request.user_prompt = render_prompt(tpl.user_template, {{"query", query}});
    request.model_name = cfg.judge_model;
    request.temperature = cfg.temperature;
    request.max_output_tokens = cfg.max_output_tokens;

    try {
        auto [response, payload] =
            ask_for_payload(gateway, request, PayloadShape::object({"decision"}));
        const std::string decision = payload["decision"].get<std::string>();
        if (decision == "keep") return ScreenDecision::keep;
        if (decision == "drop") return ScreenDecision::drop;
        throw ScreeningError("screening judge returned unknown decision: " + decision);
    } catch (const ParseFailure& e) {
        throw ScreeningError(std::string("screening judge output unparseable: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Topic classification

struct TopicDecision {
    std::string topic;
    int attempt_count = 0;
};

inline TopicDecision classify_topic(JudgeGateway& gateway, const CurationConfig& cfg,
                                    const std::string& query,
                                    const std::vector<std::string>& taxonomy) {
    if (taxonomy.empty()) throw ConfigError("classify_topic: empty taxonomy");
    if (query.empty()) throw std::invalid_argument("classify_topic: empty query");

    std::string topic_list;
    for (const auto& label : taxonomy) topic_list += "- " + label + "\n";

    const auto& tpl = prompts::topic_classification();
    JudgeRequest request;
    request.system_role = tpl.system_role;
    request.user_prompt =
        render_prompt(tpl.user_template, {{"topics", topic_list}, {"query", query}});
    request.model_name = cfg.judge_model;
    request.temperature = cfg.temperature;
    request.max_output_tokens = cfg.max_output_tokens;

    TopicDecision decision;
    std::string last_label;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ++decision.attempt_count;
        try {
            auto [response, payload] =
                ask_for_payload(gateway, request, PayloadShape::object({"topic"}));
            last_label = payload["topic"].get<std::string>();
            if (std::find(taxonomy.begin(), taxonomy.end(), last_label) != taxonomy.end()) {
                decision.topic = last_label;
                return decision;
            }
        } catch (const ParseFailure&) {
            last_label = "<unparseable>";
        }
        request = request.with_variant_suffix("#reask");
    }
    throw ClassificationError("judge label outside taxonomy after re-ask: " + last_label);
}

// ---------------------------------------------------------------------------
// Quota allocation (largest remainder)

// Hamilton apportionment: floor each proportional share, then hand leftover
// seats to the largest fractional remainders. Ties go to the larger raw
// share, then to the earlier label.
inline std::map<std::string, int> allocate_task_quota(const TopicDistribution& distribution,
                                                      int total_tasks) {
    if (total_tasks < 1) throw std::invalid_argument("allocate_task_quota: total_tasks < 1");
    if (distribution.total < 1 || distribution.counts.empty())
        throw std::invalid_argument("allocate_task_quota: empty distribution");
    {
        int sum = 0;
        for (const auto& [topic, count] : distribution.counts) {
            if (count < 0) throw std::invalid_argument("allocate_task_quota: negative count");
            sum += count;
        }
        if (sum != distribution.total)
            throw std::invalid_argument("allocate_task_quota: total does not match counts");
    }

    struct Share {
        std::string topic;
        double raw = 0.0;
        int floor = 0;
        double remainder = 0.0;
    };
    std::vector<Share> shares;
    int allocated = 0;
    for (const auto& [topic, count] : distribution.counts) {
        Share s;
        s.topic = topic;
        s.raw = static_cast<double>(count) / static_cast<double>(distribution.total) *
                static_cast<double>(total_tasks);
        s.floor = static_cast<int>(std::floor(s.raw));
        s.remainder = s.raw - static_cast<double>(s.floor);
        allocated += s.floor;
        shares.push_back(std::move(s));
    }

    int leftover = total_tasks - allocated;
    std::vector<size_t> order(shares.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (shares[a].remainder != shares[b].remainder)
            return shares[a].remainder > shares[b].remainder;
        if (shares[a].raw != shares[b].raw) return shares[a].raw > shares[b].raw;
        return shares[a].topic < shares[b].topic;
    });
    size_t cursor = 0;
    while (leftover > 0) {
        shares[order[cursor]].floor += 1;
        --leftover;
        cursor = (cursor + 1) % order.size();
    }

    std::map<std::string, int> quota;
    for (const auto& s : shares) quota[s.topic] = s.floor;
    return quota;
}

// ---------------------------------------------------------------------------
// File interfaces

// Taxonomy asset: one label per line; blank lines and #-comments ignored.
inline std::vector<std::string> load_taxonomy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open taxonomy file: " + path.string());
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        size_t e = line.find_last_not_of(" \t\r");
        std::string label = line.substr(b, e - b + 1);
        if (label.empty() || label[0] == '#') continue;
        labels.push_back(std::move(label));
    }
    return labels;
}

// Query file: plain text (one query per line) or JSONL records with a
// "query" field.
inline std::vector<std::string> load_queries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open query file: " + path.string());
    std::vector<std::string> queries;
    std::string line;
    while (std::getline(in, line)) {
        size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        if (line[b] == '{') {
            nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
            if (doc.is_object() && doc.contains("query")) {
                queries.push_back(doc["query"].get<std::string>());
                continue;
            }
        }
        size_t e = line.find_last_not_of(" \t\r");
        queries.push_back(line.substr(b, e - b + 1));
    }
    return queries;
}

inline void write_distribution_csv(const TopicDistribution& distribution,
                                   const std::map<std::string, int>& quota,
                                   std::ostream& out) {
    out << "topic,count,share,quota\n";
    for (const auto& [topic, count] : distribution.counts) {
        const double share =
            distribution.total > 0
                ? static_cast<double>(count) / static_cast<double>(distribution.total)
                : 0.0;
        char share_buf[32];
        std::snprintf(share_buf, sizeof(share_buf), "%.6f", share);
        std::string quoted = topic;
        if (quoted.find(',') != std::string::npos || quoted.find('"') != std::string::npos) {
            std::string escaped = "\"";
            for (char c : quoted) {
                if (c == '"') escaped += "\"\"";
                else escaped.push_back(c);
            }
            escaped += "\"";
            quoted = escaped;
        }
        auto it = quota.find(topic);
        out << quoted << ',' << count << ',' << share_buf << ','
            << (it == quota.end() ? std::string("") : std::to_string(it->second)) << '\n';
    }
}

}  // namespace reval
