#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>
#include <random>

#include "helpers.hpp"
#include "reval/curation.hpp"

using namespace reval;
using nlohmann::json;

namespace {

GatewayConfig fast_config() {
    GatewayConfig cfg;
    cfg.backoff_base = std::chrono::milliseconds(1);
    return cfg;
}

void script_decision(ScriptedJudgeProvider& mock, const std::string& query_needle,
                     const std::string& decision) {
    ScriptedJudgeProvider::Entry entry;
    entry.prompt_contains = {query_needle, "deep research task"};
    entry.reply = json{{"decision", decision}}.dump();
    mock.add_entry(entry);
}

TopicDistribution distribution_of(const std::map<std::string, int>& counts) {
    TopicDistribution d;
    for (const auto& [topic, count] : counts)
        for (int i = 0; i < count; ++i) d.add(topic);
    return d;
}

}  // namespace

TEST_CASE("screening keeps and drops queries per the judge decision") {
    auto mock = std::make_shared<ScriptedJudgeProvider>();
    script_decision(*mock, "EV charging infrastructure", "keep");
    script_decision(*mock, "what time is it", "drop");

    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    CurationConfig cfg;

    CHECK(screen_deep_research_query(
              gateway, cfg,
              "Analyze the feasibility of investing in EV charging infrastructure") ==
          ScreenDecision::keep);
    CHECK(screen_deep_research_query(gateway, cfg, "what time is it") ==
          ScreenDecision::drop);
}

TEST_CASE("screening rejects empty queries before any judge call") {
    JudgeGateway gateway(fast_config());
    CurationConfig cfg;
    CHECK_THROWS_AS(screen_deep_research_query(gateway, cfg, ""), std::invalid_argument);
    CHECK_THROWS_AS(screen_deep_research_query(gateway, cfg, "   \t"), std::invalid_argument);
    CHECK(gateway.calls_made() == 0);
}

TEST_CASE("screening raises ScreeningError on bad judge output") {
    auto mock = std::make_shared<ScriptedJudgeProvider>();
    ScriptedJudgeProvider::Entry entry;
    entry.reply = json{{"decision", "maybe"}}.dump();
    mock->add_entry(entry);
    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    CurationConfig cfg;
    CHECK_THROWS_AS(screen_deep_research_query(gateway, cfg, "ambiguous"), ScreeningError);
}

TEST_CASE("topic classification returns a taxonomy label") {
    auto mock = std::make_shared<ScriptedJudgeProvider>();
    ScriptedJudgeProvider::Entry entry;
    entry.prompt_contains = {"high-speed rail"};
    entry.reply = json{{"topic", "Transportation"}}.dump();
    mock->add_entry(entry);

    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    CurationConfig cfg;
    const std::vector<std::string> taxonomy = {"Finance & Business", "Transportation", "Health"};

    auto decision = classify_topic(
        gateway, cfg, "Evaluate regional high-speed rail expansion policy", taxonomy);
    CHECK(decision.topic == "Transportation");
    CHECK(decision.attempt_count == 1);
}

TEST_CASE("an out-of-taxonomy label is re-asked once") {
    auto mock = std::make_shared<ScriptedJudgeProvider>();
    {
        ScriptedJudgeProvider::Entry bad;
        bad.variant = "";
        bad.reply = json{{"topic", "Gadgets"}}.dump();
        mock->add_entry(bad);
        ScriptedJudgeProvider::Entry good;
        good.variant = "#reask";
        good.reply = json{{"topic", "Health"}}.dump();
        mock->add_entry(good);
    }
    JudgeGateway gateway(fast_config());
    gateway.set_default_provider(mock);
    CurationConfig cfg;
    const std::vector<std::string> taxonomy = {"Health", "Transportation"};

    auto decision = classify_topic(gateway, cfg, "sleep science roundup", taxonomy);
    CHECK(decision.topic == "Health");
    CHECK(decision.attempt_count == 2);

    // A judge that never lands in the taxonomy fails after the re-ask.
    auto stubborn = std::make_shared<ScriptedJudgeProvider>();
    ScriptedJudgeProvider::Entry entry;
    entry.reply = json{{"topic", "Gadgets"}}.dump();
    stubborn->add_entry(entry);
    JudgeGateway gateway2(fast_config());
    gateway2.set_default_provider(stubborn);
    CHECK_THROWS_AS(classify_topic(gateway2, cfg, "sleep science roundup", taxonomy),
                    ClassificationError);
}

TEST_CASE("classification with an empty taxonomy is a configuration error") {
    JudgeGateway gateway(fast_config());
    CurationConfig cfg;
    CHECK_THROWS_AS(classify_topic(gateway, cfg, "anything", {}), ConfigError);
}

// ---------------------------------------------------------------------------
// Quota allocation

TEST_CASE("exact proportional shares allocate without remainders") {
    auto quota = allocate_task_quota(distribution_of({{"a", 50}, {"b", 30}, {"c", 20}}), 10);
    CHECK(quota.at("a") == 5);
    CHECK(quota.at("b") == 3);
    CHECK(quota.at("c") == 2);
}

TEST_CASE("remainder ties fall to the larger raw share") {
    auto quota = allocate_task_quota(distribution_of({{"a", 55}, {"b", 45}}), 10);
    CHECK(quota.at("a") == 6);
    CHECK(quota.at("b") == 4);
}

TEST_CASE("uniform distributions allocate symmetrically") {
    auto quota =
        allocate_task_quota(distribution_of({{"a", 7}, {"b", 7}, {"c", 7}, {"d", 7}}), 8);
    for (const auto& [topic, count] : quota) CHECK(count == 2);
}

TEST_CASE("quota always sums to the requested total", "[property]") {
    std::mt19937 rng(271828);
    for (int round = 0; round < 1000; ++round) {
        TopicDistribution d;
        const int topics = 1 + static_cast<int>(rng() % 22);
        for (int t = 0; t < topics; ++t) {
            const int count = static_cast<int>(rng() % 400);
            for (int i = 0; i < count; ++i) d.add("topic-" + std::to_string(t));
        }
        if (d.total == 0) d.add("topic-0");
        const int total_tasks = 1 + static_cast<int>(rng() % 150);
        auto quota = allocate_task_quota(d, total_tasks);
        int sum = 0;
        for (const auto& [topic, count] : quota) {
            CHECK(count >= 0);
            sum += count;
        }
        CHECK(sum == total_tasks);
    }
}

TEST_CASE("quota is monotone in a topic's raw count", "[property]") {
    std::mt19937 rng(1618);
    for (int round = 0; round < 200; ++round) {
        std::map<std::string, int> counts = {
            {"a", 1 + static_cast<int>(rng() % 100)},
            {"b", 1 + static_cast<int>(rng() % 100)},
            {"c", 1 + static_cast<int>(rng() % 100)},
        };
        const int total_tasks = 5 + static_cast<int>(rng() % 50);
        auto before = allocate_task_quota(distribution_of(counts), total_tasks);
        counts["b"] += 1 + static_cast<int>(rng() % 20);
        auto after = allocate_task_quota(distribution_of(counts), total_tasks);
        CHECK(after.at("b") >= before.at("b"));
    }
}

TEST_CASE("quota allocation validates its preconditions") {
    CHECK_THROWS_AS(allocate_task_quota(TopicDistribution{}, 10), std::invalid_argument);
    CHECK_THROWS_AS(allocate_task_quota(distribution_of({{"a", 3}}), 0), std::invalid_argument);
    TopicDistribution broken;
    broken.counts["a"] = 5;
    broken.total = 3;  // lies about the sum
    CHECK_THROWS_AS(allocate_task_quota(broken, 10), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// File interfaces

TEST_CASE("taxonomy and query files load with comments ignored") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.path() / "topics.txt",
                         "# taxonomy\nTransportation\nHealth\n\n  Finance & Business  \n");
    auto taxonomy = load_taxonomy(tmp.path() / "topics.txt");
    REQUIRE(taxonomy.size() == 3);
    CHECK(taxonomy[0] == "Transportation");
    CHECK(taxonomy[2] == "Finance & Business");

    testutil::write_file(tmp.path() / "queries.jsonl",
                         "plain text query\n{\"query\": \"structured query\"}\n");
    auto queries = load_queries(tmp.path() / "queries.jsonl");
    REQUIRE(queries.size() == 2);
    CHECK(queries[0] == "plain text query");
    CHECK(queries[1] == "structured query");
}

TEST_CASE("the shipped taxonomy asset carries 22 domains") {
    auto taxonomy = load_taxonomy(testutil::asset_dir() / "topics.txt");
    CHECK(taxonomy.size() == 22);
    CHECK(std::find(taxonomy.begin(), taxonomy.end(), "Transportation") != taxonomy.end());
}

TEST_CASE("distribution reports render as csv") {
    auto d = distribution_of({{"a", 3}, {"b", 1}});
    auto quota = allocate_task_quota(d, 4);
    std::ostringstream oss;
    write_distribution_csv(d, quota, oss);
    CHECK(oss.str() ==
          "topic,count,share,quota\n"
          "a,3,0.750000,3\n"
          "b,1,0.250000,1\n");
}
