#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>
#include <random>

#include "fixture_server.hpp"
#include "helpers.hpp"
#include "reval/fact.hpp"

using namespace reval;
using nlohmann::json;

namespace {

GatewayConfig fast_config() {
    GatewayConfig cfg;
    cfg.backoff_base = std::chrono::milliseconds(1);
    return cfg;
}

Report report_of(const std::string& text, const std::string& task = "t1",
                 const std::string& model = "model-a") {
    Report r;
    r.task_id = task;
    r.model_name = model;
    r.raw_text = text;
    return r;
}

// Echo-style extraction judge: confirms whatever candidates it is shown.
void script_extraction_echo(ScriptedJudgeProvider& mock,
                            const std::vector<std::pair<std::string, std::string>>& pairs) {
    json arr = json::array();
    for (const auto& [statement, url] : pairs)
        arr.push_back({{"statement", statement}, {"url", url}});
    ScriptedJudgeProvider::Entry entry;
    entry.prompt_contains = {"<candidate_pairs>"};
    entry.reply = arr.dump(2);
    mock.add_entry(entry);
}

void script_support(ScriptedJudgeProvider& mock, const std::string& statement_needle,
                    const std::string& verdict, const std::string& evidence = "noted") {
    ScriptedJudgeProvider::Entry entry;
    entry.prompt_contains = {"<webpage_content>", statement_needle};
    entry.reply = json{{"verdict", verdict}, {"evidence", evidence}}.dump();
    mock.add_entry(entry);
}

CitationAudit audit_of(const std::string& task, int supported, int not_supported) {
    CitationAudit audit;
    audit.task_id = task;
    audit.model_name = "m";
    for (int i = 0; i < supported; ++i)
        audit.unique_pairs.push_back(
            {"s" + std::to_string(i), "http://u.test/" + std::to_string(i), Verdict::support,
             std::nullopt});
    for (int i = 0; i < not_supported; ++i)
        audit.unique_pairs.push_back({"n" + std::to_string(i),
                                      "http://u.test/n" + std::to_string(i),
                                      Verdict::not_support, std::nullopt});
    finalize_audit(audit);
    return audit;
}

}  // namespace

// ---------------------------------------------------------------------------
// Reference parsing and candidate extraction

TEST_CASE("reference lists parse bracketed and numbered entries") {
    const std::string section =
        "# References\n"
        "[1] Solar outlook - https://energy.test/solar\n"
        "2. https://energy.test/wind, accessed often\n"
        "[3] no url in this line\n"
        "[4] <https://energy.test/coal>\n";
    auto refs = parse_reference_list(section);
    CHECK(refs.at(1) == "https://energy.test/solar");
    CHECK(refs.at(2) == "https://energy.test/wind");
    CHECK(refs.count(3) == 0);
    CHECK(refs.at(4) == "https://energy.test/coal");
}

TEST_CASE("candidate extraction maps markers to reference URLs") {
    const std::string text =
        "X grew 20% [1]. Y fell [1][2]. No citation here.\n"
        "\n"
        "References\n"
        "[1] https://a.test/one\n"
        "[2] https://a.test/two\n";
    auto pairs = extract_candidate_pairs(text);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].statement == "X grew 20%.");
    CHECK(pairs[0].url == "https://a.test/one");
    CHECK(pairs[1].statement == "Y fell.");
    CHECK(pairs[1].url == "https://a.test/one");
    CHECK(pairs[2].statement == "Y fell.");
    CHECK(pairs[2].url == "https://a.test/two");
}

TEST_CASE("candidate extraction handles CJK sentence boundaries") {
    const std::string simple =
        "Growth was strong [1]\xE3\x80\x82"
        "Second claim [2]\xE3\x80\x82\n"
        "References\n[1] https://a.test/zh1\n[2] https://a.test/zh2\n";
    auto pairs = extract_candidate_pairs(simple);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].url == "https://a.test/zh1");
    CHECK(pairs[1].url == "https://a.test/zh2");
}

TEST_CASE("marker-free reports yield no candidates") {
    CHECK(extract_candidate_pairs("Nothing cited anywhere.").empty());
}

TEST_CASE("markers without a references section raise ExtractionError") {
    CHECK_THROWS_AS(extract_candidate_pairs("Claim [1]."), ExtractionError);
    try {
        extract_candidate_pairs("Claim [1].");
    } catch (const ExtractionError& e) {
        CHECK(std::string(e.what()).find("no_reference_list") != std::string::npos);
    }
}

TEST_CASE("judge extraction confirms and segments candidates") {
    auto mock = std::make_shared<ScriptedJudgeProvider>();
    // The judge splits the bundled sentence into two discrete statements.
    script_extraction_echo(*mock, {{"Solar grew 20% in 2024", "https://a.test/one"},
                                   {"Wind grew 10% in 2024", "https://a.test/one"}});
    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    FactConfig cfg;

    auto report = report_of(
        "Solar grew 20% and wind grew 10% in 2024 [1].\nReferences\n[1] https://a.test/one\n");
    auto pairs = extract_statement_citations(gateway, cfg, report);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].statement == "Solar grew 20% in 2024");
    CHECK(pairs[1].statement == "Wind grew 10% in 2024");
}

// ---------------------------------------------------------------------------
// Deduplication

TEST_CASE("exact duplicates collapse without a judge") {
    JudgeGateway gateway(fast_config());  // no provider: judge path must not be hit
    FactConfig cfg;
    cfg.judge_dedup = false;
    std::vector<StatementCitation> pairs = {
        {"same", "http://u.test/a", Verdict::unverified, std::nullopt},
        {"same", "http://u.test/a", Verdict::unverified, std::nullopt},
        {"other", "http://u.test/a", Verdict::unverified, std::nullopt},
    };
    auto out = deduplicate_citations(gateway, cfg, pairs);
    REQUIRE(out.size() == 2);
    CHECK(out[0].statement == "same");
    CHECK(out[1].statement == "other");
}

TEST_CASE("judge dedup keeps the first of each same-fact group") {
    auto mock = std::make_shared<ScriptedJudgeProvider>();
    ScriptedJudgeProvider::Entry entry;
    entry.prompt_contains = {"http://u.test/a", "Group the statement indices"};
    entry.reply = json{{"groups", json::array({json::array({0, 1}), json::array({2})})}}.dump();
    mock->add_entry(entry);

    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    FactConfig cfg;
    std::vector<StatementCitation> pairs = {
        {"Sales doubled in Q3", "http://u.test/a", Verdict::unverified, std::nullopt},
        {"Q3 sales were twice as high", "http://u.test/a", Verdict::unverified, std::nullopt},
        {"Margins shrank", "http://u.test/a", Verdict::unverified, std::nullopt},
    };
    auto out = deduplicate_citations(gateway, cfg, pairs);
    REQUIRE(out.size() == 2);
    CHECK(out[0].statement == "Sales doubled in Q3");
    CHECK(out[1].statement == "Margins shrank");

    // Distinct facts under one URL survive untouched.
    ScriptedJudgeProvider::Entry distinct;
    distinct.prompt_contains = {"http://u.test/b"};
    distinct.reply = json{{"groups", json::array({json::array({0}), json::array({1})})}}.dump();
    mock->add_entry(distinct);
    std::vector<StatementCitation> separate = {
        {"Fact one", "http://u.test/b", Verdict::unverified, std::nullopt},
        {"Fact two", "http://u.test/b", Verdict::unverified, std::nullopt},
    };
    CHECK(deduplicate_citations(gateway, cfg, separate).size() == 2);
}

TEST_CASE("dedup falls back to exact-only when the judge fails") {
    JudgeGateway gateway(fast_config());  // no provider configured at all
    FactConfig cfg;
    std::vector<StatementCitation> pairs = {
        {"alpha", "http://u.test/a", Verdict::unverified, std::nullopt},
        {"beta", "http://u.test/a", Verdict::unverified, std::nullopt},
    };
    testutil::WarningCapture warnings;
    auto out = deduplicate_citations(gateway, cfg, pairs);
    CHECK(out.size() == 2);
    CHECK(warnings.contains("keeping exact dedup only"));
}

TEST_CASE("dedup is idempotent", "[property]") {
    auto mock = std::make_shared<ScriptedJudgeProvider>();
    ScriptedJudgeProvider::Entry entry;
    entry.prompt_contains = {"Group the statement indices"};
    entry.reply = json{{"groups", json::array({json::array({0, 1})})}}.dump();
    mock->add_entry(entry);
    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    FactConfig cfg;

    std::vector<StatementCitation> pairs = {
        {"dup one", "http://u.test/a", Verdict::unverified, std::nullopt},
        {"dup two", "http://u.test/a", Verdict::unverified, std::nullopt},
        {"dup one", "http://u.test/a", Verdict::unverified, std::nullopt},
        {"solo", "http://u.test/b", Verdict::unverified, std::nullopt},
    };
    testutil::WarningCapture warnings;
    auto once = deduplicate_citations(gateway, cfg, pairs);
    auto twice = deduplicate_citations(gateway, cfg, once);
    REQUIRE(once.size() == twice.size());
    for (size_t i = 0; i < once.size(); ++i) {
        CHECK(once[i].statement == twice[i].statement);
        CHECK(once[i].url == twice[i].url);
    }
}

// ---------------------------------------------------------------------------
// Fetching

TEST_CASE("fetcher resolves pages through the reader endpoint") {
    testutil::FixtureServer server;
    server.add_page("http://energy.test/solar", "Solar capacity grew 20% in 2024.");
    FetcherConfig cfg;
    cfg.reader_endpoint = server.reader_endpoint();
    SourceFetcher fetcher(cfg);

    auto ok = fetcher.fetch("http://energy.test/solar");
    CHECK(ok.status == FetchStatus::ok);
    REQUIRE(ok.page_text.has_value());
    CHECK(*ok.page_text == "Solar capacity grew 20% in 2024.");

    auto missing = fetcher.fetch("http://energy.test/not-there");
    CHECK(missing.status == FetchStatus::http_error);
    CHECK_FALSE(missing.page_text.has_value());
}

TEST_CASE("fetcher classifies blocked and timed-out retrievals") {
    testutil::FixtureServer server;
    server.add_page("http://energy.test/private", "forbidden", 403);
    FetcherConfig cfg;
    cfg.reader_endpoint = server.reader_endpoint();
    SourceFetcher fetcher(cfg);
    CHECK(fetcher.fetch("http://energy.test/private").status == FetchStatus::blocked);

    FetcherConfig direct;
    direct.timeout_seconds = 1;
    SourceFetcher unreachable(direct);
    CHECK(unreachable.fetch("http://127.0.0.1:1/nope").status == FetchStatus::timeout);
}

TEST_CASE("fetcher rejects malformed urls before any network activity") {
    SourceFetcher fetcher(FetcherConfig{});
    CHECK_THROWS_AS(fetcher.fetch("not a url"), UrlError);
    CHECK_THROWS_AS(fetcher.fetch("ftp://files.test/x"), UrlError);
    CHECK(fetcher.fetch_count() == 0);
}

TEST_CASE("fetch results are cached by url") {
    testutil::FixtureServer server;
    server.add_page("http://energy.test/page", "cached body");
    FetcherConfig cfg;
    cfg.reader_endpoint = server.reader_endpoint();
    SourceFetcher fetcher(cfg);

    auto first = fetcher.fetch("http://energy.test/page");
    auto second = fetcher.fetch("http://energy.test/page");
    CHECK(fetcher.fetch_count() == 1);
    CHECK(first.status == second.status);
    CHECK(*first.page_text == *second.page_text);
    CHECK(first.fetched_at == second.fetched_at);
}

TEST_CASE("fetcher truncates oversized pages") {
    testutil::FixtureServer server;
    server.add_page("http://energy.test/big", std::string(4096, 'x'));
    FetcherConfig cfg;
    cfg.reader_endpoint = server.reader_endpoint();
    cfg.max_text_bytes = 1000;
    SourceFetcher fetcher(cfg);
    auto result = fetcher.fetch("http://energy.test/big");
    REQUIRE(result.page_text.has_value());
    CHECK(result.page_text->size() == 1000);
}

// ---------------------------------------------------------------------------
// Support judgment

TEST_CASE("judge_support returns verdicts with evidence notes") {
    auto mock = std::make_shared<ScriptedJudgeProvider>();
    script_support(*mock, "Solar capacity grew", "support", "the page repeats the figure");
    script_support(*mock, "Prices doubled", "not_support", "page says prices fell");

    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    FactConfig cfg;

    auto [support, note] =
        judge_support(gateway, cfg, "Solar capacity grew 20%", "Solar capacity grew 20% in 2024.");
    CHECK(support == Verdict::support);
    CHECK(note == "the page repeats the figure");

    auto [refuted, note2] =
        judge_support(gateway, cfg, "Prices doubled", "Actually, prices fell by half.");
    CHECK(refuted == Verdict::not_support);
}

TEST_CASE("judge_support raises JudgmentError on unusable output") {
    auto mock = std::make_shared<ScriptedJudgeProvider>();
    ScriptedJudgeProvider::Entry entry;
    entry.reply = "no json at all";
    mock->add_entry(entry);
    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    FactConfig cfg;
    CHECK_THROWS_AS(judge_support(gateway, cfg, "claim", "page text"), JudgmentError);
    CHECK_THROWS_AS(judge_support(gateway, cfg, "claim", ""), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// End-to-end audit

TEST_CASE("audit_report verifies, fails, and shortcuts pages as configured") {
    testutil::FixtureServer server;
    server.add_page("http://energy.test/solar", "Solar capacity grew 20% in 2024, says the IEA.");
    server.add_page("http://energy.test/coal", "Coal demand actually rose slightly in 2024.");
    server.add_page("http://energy.test/stub", "tiny");  // below the 10-char floor

    auto mock = std::make_shared<ScriptedJudgeProvider>();
    script_extraction_echo(*mock, {{"Solar capacity grew 20% in 2024", "http://energy.test/solar"},
                                   {"Coal demand fell 40% in 2024", "http://energy.test/coal"},
                                   {"Stub claim", "http://energy.test/stub"},
                                   {"Gone claim", "http://energy.test/missing"}});
    script_support(*mock, "Solar capacity grew", "support", "figure matches");
    script_support(*mock, "Coal demand fell", "not_support", "page says demand rose");

    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    FactConfig cfg;
    FetcherConfig fetch_cfg;
    fetch_cfg.reader_endpoint = server.reader_endpoint();
    SourceFetcher fetcher(fetch_cfg);

    auto report = report_of(
        "Solar capacity grew 20% in 2024 [1]. Coal demand fell 40% in 2024 [2]. "
        "Stub claim [3]. Gone claim [4].\n"
        "References\n"
        "[1] http://energy.test/solar\n"
        "[2] http://energy.test/coal\n"
        "[3] http://energy.test/stub\n"
        "[4] http://energy.test/missing\n");

    auto outcome = audit_report(gateway, fetcher, cfg, report);
    REQUIRE(outcome.audit.unique_pairs.size() == 4);
    CHECK(outcome.audit.unique_pairs[0].verdict == Verdict::support);
    CHECK(outcome.audit.unique_pairs[1].verdict == Verdict::not_support);
    CHECK(outcome.audit.unique_pairs[2].verdict == Verdict::not_support);  // short page
    CHECK(outcome.audit.unique_pairs[3].verdict == Verdict::not_support);  // fetch failure
    CHECK(outcome.audit.supported_count == 1);
    CHECK(outcome.audit.task_accuracy == Catch::Approx(0.25));

    bool stub_shortcut = false;
    for (const auto& ev : outcome.evidence)
        if (ev.pair.statement == "Stub claim" && ev.pair.evidence_note &&
            ev.pair.evidence_note->find("shorter") != std::string::npos)
            stub_shortcut = true;
    CHECK(stub_shortcut);
}

TEST_CASE("audit_report can exclude failed fetches instead") {
    testutil::FixtureServer server;
    auto mock = std::make_shared<ScriptedJudgeProvider>();
    script_extraction_echo(*mock, {{"Gone claim", "http://energy.test/missing"}});
    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    FactConfig cfg;
    cfg.failure_policy = FetchFailurePolicy::exclude_from_audit;
    FetcherConfig fetch_cfg;
    fetch_cfg.reader_endpoint = server.reader_endpoint();
    SourceFetcher fetcher(fetch_cfg);

    auto report = report_of("Gone claim [1].\nReferences\n[1] http://energy.test/missing\n");
    auto outcome = audit_report(gateway, fetcher, cfg, report);
    CHECK(outcome.audit.unique_pairs.empty());
    CHECK(outcome.audit.task_accuracy == 0.0);
    REQUIRE(outcome.evidence.size() == 1);
    CHECK(outcome.evidence[0].excluded);
}

TEST_CASE("audit_report hands back an empty audit for citation-free reports") {
    JudgeGateway gateway(fast_config());
    FactConfig cfg;
    SourceFetcher fetcher(FetcherConfig{});
    auto outcome = audit_report(gateway, fetcher, cfg, report_of("No citations at all."));
    CHECK(outcome.audit.unique_pairs.empty());
    CHECK(outcome.audit.task_accuracy == 0.0);
}

// ---------------------------------------------------------------------------
// Metrics

TEST_CASE("citation metrics follow the per-task averaging convention") {
    auto summary = compute_citation_metrics({audit_of("t1", 3, 1), audit_of("t2", 0, 0)});
    CHECK(summary.citation_accuracy == Catch::Approx(0.375));
    CHECK(summary.effective_citations == Catch::Approx(1.5));
    CHECK(summary.task_count == 2);

    auto all_supported = compute_citation_metrics({audit_of("t1", 2, 0)});
    CHECK(all_supported.citation_accuracy == Catch::Approx(1.0));
    CHECK(all_supported.effective_citations == Catch::Approx(2.0));

    auto empty_task = compute_citation_metrics({audit_of("t1", 0, 0)});
    CHECK(empty_task.citation_accuracy == 0.0);
    CHECK(empty_task.effective_citations == 0.0);

    CHECK_THROWS_AS(compute_citation_metrics({}), MetricsError);
}

TEST_CASE("citation metrics equal a brute-force tally", "[property]") {
    std::mt19937 rng(5150);
    for (int round = 0; round < 150; ++round) {
        const int tasks = 1 + static_cast<int>(rng() % 6);
        std::vector<CitationAudit> audits;
        for (int t = 0; t < tasks; ++t)
            audits.push_back(audit_of("t" + std::to_string(t), static_cast<int>(rng() % 5),
                                      static_cast<int>(rng() % 5)));

        auto summary = compute_citation_metrics(audits);

        // Brute force from the raw verdict lists.
        double accuracy_sum = 0.0;
        long long supported = 0;
        for (const auto& audit : audits) {
            long long task_supported = 0;
            long long task_pairs = 0;
            for (const auto& pair : audit.unique_pairs) {
                ++task_pairs;
                if (pair.verdict == Verdict::support) ++task_supported;
            }
            accuracy_sum += task_pairs == 0 ? 0.0
                                            : static_cast<double>(task_supported) /
                                                  static_cast<double>(task_pairs);
            supported += task_supported;
        }
        const double expected_acc = accuracy_sum / static_cast<double>(tasks);
        const double expected_cit =
            static_cast<double>(supported) / static_cast<double>(tasks);
        CHECK(summary.citation_accuracy == expected_acc);  // exact
        CHECK(summary.effective_citations == expected_cit);
        CHECK(summary.citation_accuracy >= 0.0);
        CHECK(summary.citation_accuracy <= 1.0);
    }
}

TEST_CASE("task accuracy is monotone under verdict edits", "[property]") {
    std::mt19937 rng(31337);
    for (int round = 0; round < 100; ++round) {
        auto audit = audit_of("t", 1 + static_cast<int>(rng() % 4),
                              1 + static_cast<int>(rng() % 4));
        const double base = audit.task_accuracy;

        // Removing a not_support pair never decreases accuracy.
        auto fewer = audit;
        for (size_t i = 0; i < fewer.unique_pairs.size(); ++i) {
            if (fewer.unique_pairs[i].verdict == Verdict::not_support) {
                fewer.unique_pairs.erase(fewer.unique_pairs.begin() + static_cast<long>(i));
                break;
            }
        }
        finalize_audit(fewer);
        CHECK(fewer.task_accuracy >= base);

        // Adding a supported pair never decreases accuracy.
        auto more = audit;
        more.unique_pairs.push_back({"extra", "http://u.test/extra", Verdict::support,
                                     std::nullopt});
        finalize_audit(more);
        CHECK(more.task_accuracy >= base);
    }
}
