#pragma once

// Citation trustworthiness pipeline: statement-URL extraction from reports
// that retain their citation markers, semantic deduplication, source
// retrieval through a reader-style endpoint, binary support judgment, and
// the citation metrics.

#include <chrono>
#include <cmath>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "reval/core.hpp"
#include "reval/judge.hpp"
#include "reval/prompts.hpp"
#include "reval/race.hpp"

namespace reval {

struct ExtractionError : Error {
    using Error::Error;
};

struct UrlError : Error {
    using Error::Error;
};

struct JudgmentError : Error {
    using Error::Error;
};

struct MetricsError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Fetching

enum class FetchStatus { ok, http_error, timeout, blocked };

inline std::string to_string(FetchStatus s) {
    switch (s) {
        case FetchStatus::ok: return "ok";
        case FetchStatus::http_error: return "http_error";
        case FetchStatus::timeout: return "timeout";
        case FetchStatus::blocked: return "blocked";
    }
    throw Error("invalid fetch status");
}

struct FetchResult {
    std::string url;
    FetchStatus status = FetchStatus::timeout;
    std::optional<std::string> page_text;  // present iff status == ok
    std::chrono::system_clock::time_point fetched_at{};
};

struct ParsedUrl {
    std::string scheme;
    std::string host;  // host[:port]
    std::string path;  // leading '/', possibly with query
};

inline std::optional<ParsedUrl> parse_url(const std::string& url) {
    size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return std::nullopt;
    ParsedUrl parsed;
    parsed.scheme = url.substr(0, scheme_end);
    if (parsed.scheme != "http" && parsed.scheme != "https") return std::nullopt;
    size_t host_start = scheme_end + 3;
    size_t path_start = url.find('/', host_start);
    parsed.host = url.substr(host_start, path_start == std::string::npos
                                             ? std::string::npos
                                             : path_start - host_start);
    if (parsed.host.empty()) return std::nullopt;
    parsed.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    return parsed;
}

inline bool is_well_formed_url(const std::string& url) { return parse_url(url).has_value(); }

struct FetcherConfig {
    // Reader-style extraction endpoint; the target URL is appended to this
    // prefix. Empty means fetch the URL directly.
    std::string reader_endpoint;
    int timeout_seconds = 10;
    int attempts = 2;
    size_t max_text_bytes = 1 << 20;
};

// Retrieves page text, classifies failures, and memoizes by URL so repeated
// lookups inside one run are identical (and concurrent callers share one
// in-flight fetch).
class SourceFetcher {
public:
    explicit SourceFetcher(FetcherConfig config) : config_(std::move(config)) {}

    FetchResult fetch(const std::string& url) {
        if (!is_well_formed_url(url)) throw UrlError("malformed url: " + url);

        std::shared_future<FetchResult> future;
        bool owner = false;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(url);
            if (it == cache_.end()) {
                std::promise<FetchResult> promise;
                future = promise.get_future().share();
                cache_.emplace(url, future);
                pending_.emplace(url, std::move(promise));
                owner = true;
            } else {
                future = it->second;
            }
        }
        if (owner) {
            FetchResult result = fetch_uncached(url);
            std::lock_guard<std::mutex> lock(mutex_);
            pending_.at(url).set_value(result);
            pending_.erase(url);
        }
        return future.get();
    }

    size_t fetch_count() const { return fetches_performed_.load(); }

private:
    FetchResult fetch_uncached(const std::string& url) {
        fetches_performed_.fetch_add(1);
        FetchResult result;
        result.url = url;
        result.fetched_at = std::chrono::system_clock::now();

        std::string base;
        std::string path;
        if (!config_.reader_endpoint.empty()) {
            auto endpoint = parse_url(config_.reader_endpoint);
            if (!endpoint) throw ConfigError("malformed reader endpoint: " + config_.reader_endpoint);
            base = endpoint->scheme + "://" + endpoint->host;
            path = endpoint->path;
            if (path.empty() || path.back() != '/') path += '/';
            path += url;
        } else {
            auto target = parse_url(url);
            base = target->scheme + "://" + target->host;
            path = target->path;
        }

        for (int attempt = 0; attempt < config_.attempts; ++attempt) {
            httplib::Client client(base);
            client.set_connection_timeout(config_.timeout_seconds);
            client.set_read_timeout(config_.timeout_seconds);
            auto response = client.Get(path);
            if (!response) {
                result.status = FetchStatus::timeout;
                continue;  // transient transport failure, retry
            }
            if (response->status == 200) {
                result.status = FetchStatus::ok;
                std::string text = response->body;
                if (text.size() > config_.max_text_bytes) text.resize(config_.max_text_bytes);
                result.page_text = std::move(text);
            } else if (response->status == 401 || response->status == 403 ||
                       response->status == 429 || response->status == 451) {
                result.status = FetchStatus::blocked;
            } else {
                result.status = FetchStatus::http_error;
            }
            return result;
        }
        return result;
    }

    FetcherConfig config_;
    std::mutex mutex_;
    std::map<std::string, std::shared_future<FetchResult>> cache_;
    std::map<std::string, std::promise<FetchResult>> pending_;
    std::atomic<size_t> fetches_performed_{0};
};

// ---------------------------------------------------------------------------
// Pipeline configuration

enum class FetchFailurePolicy {
    count_as_not_support,  // conservative default; cannot inflate accuracy
    exclude_from_audit,
};

struct FactConfig {
    std::string judge_model = "support-judge";
    double temperature = 0.0;
    int max_output_tokens = 8192;
    bool judge_extraction = true;   // refine parser candidates with the judge
    bool judge_dedup = true;        // same-fact grouping per URL
    size_t min_page_chars = 10;     // shorter pages fail without a judge call
    FetchFailurePolicy failure_policy = FetchFailurePolicy::count_as_not_support;
};

// ---------------------------------------------------------------------------
// Reference list parsing

// Index -> URL from the trailing references section.
inline std::map<int, std::string> parse_reference_list(const std::string& section) {
    static const std::regex url_re(R"(https?://[^\s\)\]>"'`]+)");
    static const std::regex index_re(R"(^\s*(?:\[(\d+)\]|(\d+)[.)])\s*)");
    std::map<int, std::string> refs;
    std::istringstream stream(section);
    std::string line;
    while (std::getline(stream, line)) {
        std::smatch index_match;
        if (!std::regex_search(line, index_match, index_re)) continue;
        const int index = std::stoi(index_match[1].matched ? index_match[1].str()
                                                           : index_match[2].str());
        std::smatch url_match;
        if (!std::regex_search(line, url_match, url_re)) continue;
        std::string url = url_match[0].str();
        while (!url.empty() && (url.back() == '.' || url.back() == ',')) url.pop_back();
        refs.emplace(index, url);  // first entry per index wins
    }
    return refs;
}

namespace detail {

inline bool sentence_terminator(const std::string& text, size_t i, size_t& advance) {
    const char c = text[i];
    advance = 1;
    if (c == '.' || c == '!' || c == '?' || c == '\n') return true;
    // CJK full stop / exclamation / question mark (3-byte UTF-8 sequences)
    if (i + 2 < text.size()) {
        const std::string three = text.substr(i, 3);
        if (three == "\xE3\x80\x82" || three == "\xEF\xBC\x81" || three == "\xEF\xBC\x9F") {
            advance = 3;
            return true;
        }
    }
    return false;
}

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

// Deterministic candidate extraction: every sentence carrying [n] markers
// yields one (statement, url) candidate per resolvable marker.
inline std::vector<StatementCitation> extract_candidate_pairs(const std::string& raw_text) {
    auto [body, refs_section] = split_reference_section(raw_text);
    static const std::regex marker_re(R"(\[(\d+)\])");

    const bool body_has_markers =
        std::regex_search(body, marker_re);
    if (!body_has_markers) return {};
    if (refs_section.empty())
        throw ExtractionError("no_reference_list: report cites sources but has no references section");

    const auto refs = parse_reference_list(refs_section);
    std::vector<StatementCitation> candidates;

    size_t start = 0;
    size_t i = 0;
    while (i <= body.size()) {
        size_t advance = 1;
        const bool at_end = (i == body.size());
        if (at_end || detail::sentence_terminator(body, i, advance)) {
            const size_t end = at_end ? i : i + advance;
            std::string sentence = body.substr(start, end - start);
            if (at_end && sentence.empty()) break;
            std::set<int> indices;
            for (std::sregex_iterator it(sentence.begin(), sentence.end(), marker_re), last;
                 it != last; ++it)
                indices.insert(std::stoi((*it)[1].str()));
            if (!indices.empty()) {
                std::string statement = detail::trim(clean_report_text(sentence));
                if (!statement.empty()) {
                    for (int index : indices) {
                        auto ref = refs.find(index);
                        if (ref == refs.end()) {
                            emit_warning("citation marker [" + std::to_string(index) +
                                         "] has no references entry");
                            continue;
                        }
                        if (!is_well_formed_url(ref->second)) {
                            emit_warning("reference [" + std::to_string(index) +
                                         "] is not a URL: " + ref->second);
                            continue;
                        }
                        StatementCitation pair;
                        pair.statement = statement;
                        pair.url = ref->second;
                        candidates.push_back(std::move(pair));
                    }
                }
            }
            start = end;
            i = end;
            if (at_end) break;
            continue;
        }
        i += advance;
    }
    return candidates;
}

// Full extraction: deterministic candidates, then a judge pass that confirms
// and segments the statements.
inline std::vector<StatementCitation> extract_statement_citations(
    JudgeGateway& gateway, const FactConfig& cfg, const Report& report) {
    auto candidates = extract_candidate_pairs(report.raw_text);
    if (candidates.empty() || !cfg.judge_extraction) return candidates;

    nlohmann::json listing = nlohmann::json::array();
    for (const auto& pair : candidates)
        listing.push_back({{"statement", pair.statement}, {"url", pair.url}});

    const auto& tpl = prompts::citation_extraction();
    JudgeRequest request;
    request.system_role = tpl.system_role;
    request.user_prompt =
        render_prompt(tpl.user_template, {{"candidate_pairs", listing.dump(2)}});
    request.model_name = cfg.judge_model;
    request.temperature = cfg.temperature;
    request.max_output_tokens = cfg.max_output_tokens;
    request.variant = "extract-" + report.task_id + "-" + report.model_name;

    nlohmann::json payload;
    try {
        auto [response, parsed] = ask_for_payload(gateway, request, PayloadShape::array());
        payload = parsed;
    } catch (const ParseFailure& e) {
        throw ExtractionError("extraction judge output unparseable for task " +
                              report.task_id + ": " + e.what());
    }

    std::vector<StatementCitation> pairs;
    for (const auto& item : payload) {
        if (!item.is_object() || !item.contains("statement") || !item.contains("url")) continue;
        StatementCitation pair;
        pair.statement = item["statement"].get<std::string>();
        pair.url = item["url"].get<std::string>();
        if (pair.statement.empty()) continue;
        if (!is_well_formed_url(pair.url)) {
            emit_warning("extraction judge produced a malformed url: " + pair.url);
            continue;
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Deduplication

// Exact duplicates collapse first; then, per URL, the judge groups statements
// describing the same fact and only the first of each group survives. Judge
// trouble degrades to exact-only deduplication.
inline std::vector<StatementCitation> deduplicate_citations(
    JudgeGateway& gateway, const FactConfig& cfg, const std::vector<StatementCitation>& pairs) {
    std::vector<StatementCitation> exact;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& pair : pairs) {
        if (seen.emplace(pair.statement, pair.url).second) exact.push_back(pair);
    }
    if (!cfg.judge_dedup) return exact;

    std::map<std::string, std::vector<size_t>> by_url;
    for (size_t i = 0; i < exact.size(); ++i) by_url[exact[i].url].push_back(i);

    std::set<size_t> dropped;
    for (const auto& [url, indices] : by_url) {
        if (indices.size() < 2) continue;
        nlohmann::json listing = nlohmann::json::array();
        for (size_t local = 0; local < indices.size(); ++local)
            listing.push_back(std::to_string(local) + ": " + exact[indices[local]].statement);

        const auto& tpl = prompts::citation_dedup();
        JudgeRequest request;
        request.system_role = tpl.system_role;
        request.user_prompt = render_prompt(
            tpl.user_template, {{"url", url}, {"statements", listing.dump(2)}});
        request.model_name = cfg.judge_model;
        request.temperature = cfg.temperature;
        request.max_output_tokens = cfg.max_output_tokens;

        try {
            auto [response, payload] =
                ask_for_payload(gateway, request, PayloadShape::object({"groups"}));
            for (const auto& group : payload["groups"]) {
                if (!group.is_array() || group.size() < 2) continue;
                // Keep the earliest statement of the group.
                size_t keep = indices.size();
                std::vector<size_t> members;
                for (const auto& raw : group) {
                    if (!raw.is_number_integer()) continue;
                    auto local = raw.get<long long>();
                    if (local < 0 || static_cast<size_t>(local) >= indices.size()) continue;
                    members.push_back(static_cast<size_t>(local));
                    keep = std::min(keep, static_cast<size_t>(local));
                }
                for (size_t member : members)
                    if (member != keep) dropped.insert(indices[member]);
            }
        } catch (const Error& e) {
            emit_warning("same-fact dedup judge failed for " + url +
                         ", keeping exact dedup only: " + e.what());
        }
    }

    std::vector<StatementCitation> out;
    for (size_t i = 0; i < exact.size(); ++i)
        if (!dropped.count(i)) out.push_back(exact[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Support judgment

inline std::pair<Verdict, std::string> judge_support(JudgeGateway& gateway,
                                                     const FactConfig& cfg,
                                                     const std::string& statement,
                                                     const std::string& page_text) {
    if (page_text.empty())
        throw std::invalid_argument("judge_support: empty page text");

    const auto& tpl = prompts::support_judgment();
    JudgeRequest request;
    request.system_role = tpl.system_role;
    request.user_prompt = render_prompt(
        tpl.user_template, {{"statement", statement}, {"page_text", page_text}});
    request.model_name = cfg.judge_model;
    request.temperature = cfg.temperature;
    request.max_output_tokens = cfg.max_output_tokens;

    try {
        auto [response, payload] =
            ask_for_payload(gateway, request, PayloadShape::object({"verdict"}));
        auto verdict = verdict_from_string(payload["verdict"].get<std::string>());
        if (!verdict || *verdict == Verdict::unverified)
            throw JudgmentError("support judge returned an unusable verdict");
        return {*verdict, payload.value("evidence", "")};
    } catch (const ParseFailure& e) {
        throw JudgmentError(std::string("support judge output unparseable: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Per-report audit

struct PairEvidence {
    StatementCitation pair;
    FetchStatus fetch_status = FetchStatus::timeout;
    bool excluded = false;
};

struct AuditOutcome {
    CitationAudit audit;
    std::vector<PairEvidence> evidence;  // one per pair, includes excluded pairs
};

// Runs extraction, dedup, retrieval, and support judgments for one report.
inline AuditOutcome audit_report(JudgeGateway& gateway, SourceFetcher& fetcher,
                                 const FactConfig& cfg, const Report& report) {
    AuditOutcome outcome;
    outcome.audit.task_id = report.task_id;
    outcome.audit.model_name = report.model_name;

    std::vector<StatementCitation> pairs;
    try {
        pairs = extract_statement_citations(gateway, cfg, report);
        pairs = deduplicate_citations(gateway, cfg, pairs);
    } catch (const ExtractionError& e) {
        emit_warning("extraction failed for task " + report.task_id + ", model " +
                     report.model_name + ": " + e.what());
        finalize_audit(outcome.audit);
        return outcome;
    }

    // Fetch every distinct URL first; the fetcher deduplicates in-flight work.
    std::set<std::string> urls;
    for (const auto& pair : pairs) urls.insert(pair.url);
    {
        std::vector<std::future<void>> fetches;
        for (const auto& url : urls)
            fetches.push_back(std::async(std::launch::async,
                                         [&fetcher, url] { (void)fetcher.fetch(url); }));
        for (auto& f : fetches) f.get();
    }

    std::vector<PairEvidence> evidence(pairs.size());
    std::vector<std::future<void>> judgments;
    for (size_t i = 0; i < pairs.size(); ++i) {
        judgments.push_back(std::async(std::launch::async, [&, i] {
            PairEvidence& ev = evidence[i];
            ev.pair = pairs[i];
            FetchResult fetched = fetcher.fetch(ev.pair.url);
            ev.fetch_status = fetched.status;
            const bool usable = fetched.status == FetchStatus::ok && fetched.page_text &&
                                fetched.page_text->size() >= cfg.min_page_chars;
            if (!usable) {
                if (fetched.status != FetchStatus::ok &&
                    cfg.failure_policy == FetchFailurePolicy::exclude_from_audit) {
                    ev.excluded = true;
                    ev.pair.verdict = Verdict::unverified;
                    ev.pair.evidence_note = "excluded: fetch " + to_string(fetched.status);
                } else {
                    ev.pair.verdict = Verdict::not_support;
                    ev.pair.evidence_note =
                        fetched.status == FetchStatus::ok
                            ? "page text shorter than " + std::to_string(cfg.min_page_chars) +
                                  " characters"
                            : "fetch failed: " + to_string(fetched.status);
                }
                return;
            }
            try {
                auto [verdict, note] =
                    judge_support(gateway, cfg, ev.pair.statement, *fetched.page_text);
                ev.pair.verdict = verdict;
                ev.pair.evidence_note = note;
            } catch (const JudgmentError& e) {
                ev.pair.verdict = Verdict::unverified;
                ev.pair.evidence_note = std::string("judgment failed: ") + e.what();
            }
        }));
    }
    for (auto& f : judgments) f.get();

    for (auto& ev : evidence) {
        if (!ev.excluded) outcome.audit.unique_pairs.push_back(ev.pair);
    }
    outcome.evidence = std::move(evidence);
    finalize_audit(outcome.audit);
    return outcome;
}

// ---------------------------------------------------------------------------
// Metrics

struct FactRunSummary {
    std::vector<CitationAudit> per_task;
    double citation_accuracy = 0.0;   // mean of per-task accuracies
    double effective_citations = 0.0; // supported pairs per task
    int task_count = 0;
};

inline FactRunSummary compute_citation_metrics(const std::vector<CitationAudit>& audits) {
    if (audits.empty()) throw MetricsError("compute_citation_metrics: no audits");
    FactRunSummary summary;
    summary.per_task = audits;
    summary.task_count = static_cast<int>(audits.size());
    double accuracy_sum = 0.0;
    long long supported_total = 0;
    for (const auto& audit : audits) {
        if (audit.supported_count > static_cast<int>(audit.unique_pairs.size()))
            throw MetricsError("audit for task " + audit.task_id +
                               " counts more supported pairs than pairs");
        accuracy_sum += audit.task_accuracy;
        supported_total += audit.supported_count;
    }
    summary.citation_accuracy = accuracy_sum / static_cast<double>(audits.size());
    summary.effective_citations =
        static_cast<double>(supported_total) / static_cast<double>(audits.size());
    return summary;
}

}  // namespace reval
