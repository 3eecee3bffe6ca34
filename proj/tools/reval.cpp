// Command-line front end: batch RACE/FACT evaluation runs, consistency
// statistics against human annotations, leaderboard emission, and task
// curation utilities.
//
// Exit codes: 0 complete, 2 partial results, 1 configuration or input error.

#include <CLI11.hpp>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "reval/curation.hpp"
#include "reval/fact.hpp"
#include "reval/harness.hpp"
#include "reval/http_judge.hpp"
#include "reval/judge.hpp"
#include "reval/race.hpp"
#include "reval/stats.hpp"

namespace fs = std::filesystem;
using namespace reval;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* value = std::getenv(name);
    return value ? value : fallback;
}

std::string default_run_id(const std::string& kind) {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return kind + "-" + buf;
}

struct GatewayOptions {
    std::string mock_script;
    std::string cache_dir;
    int concurrency = 4;
};

std::unique_ptr<JudgeGateway> make_gateway(const GatewayOptions& options) {
    GatewayConfig cfg;
    std::string cache = options.cache_dir.empty() ? env_or("REVAL_CACHE_DIR", "")
                                                  : options.cache_dir;
    if (!cache.empty()) cfg.cache_dir = cache;
    cfg.max_concurrency = options.concurrency;
    auto gateway = std::make_unique<JudgeGateway>(cfg);
    if (!options.mock_script.empty()) {
        gateway->set_default_provider(std::make_shared<ScriptedJudgeProvider>(
            ScriptedJudgeProvider::from_file(options.mock_script)));
    } else {
        HttpJudgeProvider::Options http;
        http.base_url = env_or("REVAL_JUDGE_BASE_URL", "");
        http.api_key = env_or("REVAL_JUDGE_API_KEY", "");
        if (http.base_url.empty())
            throw ConfigError(
                "no judge configured: set REVAL_JUDGE_BASE_URL (and REVAL_JUDGE_API_KEY) "
                "or pass --mock-script");
        gateway->set_default_provider(std::make_shared<HttpJudgeProvider>(http));
    }
    return gateway;
}

void write_file_or_die(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

int run_race(const std::string& tasks_path, const std::string& reports_dir,
             const std::string& reference_dir, const std::string& out_dir,
             const std::string& run_id, const std::string& mode_name,
             const std::string& judge_model, int trials, const GatewayOptions& gw_options,
             const std::string& static_rubric_path) {
    auto mode = ablation_mode_from_string(mode_name);
    if (!mode) throw ConfigError("unknown mode: " + mode_name);

    auto gateway = make_gateway(gw_options);
    RaceConfig race_cfg;
    race_cfg.judge_model = judge_model;
    race_cfg.trials = trials;
    if (!gateway->config().cache_dir.empty())
        race_cfg.rubric_cache_dir = gateway->config().cache_dir / "rubrics";

    std::optional<EvaluationRubric> static_rubric;
    if (!static_rubric_path.empty()) static_rubric = load_rubric_file(static_rubric_path);

    RunManifest manifest;
    manifest.run_id = run_id.empty() ? default_run_id("race") : run_id;
    manifest.mode = *mode;
    manifest.judge_model = judge_model;
    manifest.trials = trials;
    manifest.concurrency = gw_options.concurrency;

    auto tasks = load_task_set(tasks_path);
    auto result = run_race_suite(*gateway, race_cfg, manifest, tasks, reports_dir,
                                 reference_dir, out_dir, static_rubric);

    std::cout << "run " << manifest.run_id << ": " << result.scorecards.size()
              << " scorecards, " << result.gaps.size() << " gaps, "
              << gateway->calls_made() << " judge calls\n";
    for (const auto& gap : result.gaps) std::cout << "  gap: " << gap << "\n";
    return result.complete ? 0 : 2;
}

int run_fact(const std::string& tasks_path, const std::string& reports_dir,
             const std::string& out_dir, const std::string& run_id,
             const std::string& judge_model, const std::string& reader_endpoint,
             const GatewayOptions& gw_options, bool exclude_failed_fetches,
             int fetch_timeout_seconds) {
    auto gateway = make_gateway(gw_options);
    FactConfig fact_cfg;
    fact_cfg.judge_model = judge_model;
    if (exclude_failed_fetches)
        fact_cfg.failure_policy = FetchFailurePolicy::exclude_from_audit;

    FetcherConfig fetch_cfg;
    fetch_cfg.reader_endpoint =
        reader_endpoint.empty() ? env_or("REVAL_READER_ENDPOINT", "") : reader_endpoint;
    fetch_cfg.timeout_seconds = fetch_timeout_seconds;
    SourceFetcher fetcher(fetch_cfg);

    RunManifest manifest;
    manifest.run_id = run_id.empty() ? default_run_id("fact") : run_id;
    manifest.mode = AblationMode::full;
    manifest.judge_model = judge_model;
    manifest.concurrency = gw_options.concurrency;

    auto tasks = load_task_set(tasks_path);
    auto result =
        run_fact_suite(*gateway, fetcher, fact_cfg, manifest, tasks, reports_dir, out_dir);

    for (const auto& [model, summary] : result.per_model) {
        std::cout << model << ": C.Acc " << 100.0 * summary.citation_accuracy << "%, E.Cit "
                  << summary.effective_citations << " over " << summary.task_count
                  << " tasks\n";
    }
    for (const auto& gap : result.gaps) std::cout << "  gap: " << gap << "\n";
    return result.complete ? 0 : 2;
}

int run_consistency(const std::string& annotations_path, const std::string& scores_path,
                    double epsilon, const std::string& out_path) {
    auto human = load_annotations(annotations_path);
    auto method = load_method_scores(scores_path);
    auto report = compute_consistency_report(method, human, epsilon);

    nlohmann::json doc;
    doc["par"] = report.par;
    doc["opc"] = report.opc;
    doc["fap"] = report.fap;
    doc["fas"] = report.fas;
    doc["overall"] = report.overall;
    doc["retained_tasks"] = report.retained_tasks;
    doc["per_task_icc"] = report.per_task_icc;

    std::cout << "PAR " << 100.0 * report.par << "  OPC " << 100.0 * report.opc << "  FAP "
              << 100.0 * report.fap << "  FAS " << 100.0 * report.fas << "  overall "
              << report.overall << "\n"
              << "retained " << report.retained_tasks.size() << " of " << human.size()
              << " tasks after ICC filtering\n";
    if (!out_path.empty()) write_file_or_die(out_path, doc.dump(2) + "\n");
    return 0;
}

int run_leaderboard(const std::string& run_dir, const std::string& out_dir) {
    auto scorecards = load_run_scorecards(run_dir);
    auto summaries = load_run_fact_summaries(run_dir);
    auto rows = build_leaderboard(scorecards, summaries);
    const std::string csv = leaderboard_csv(rows);
    const std::string table = leaderboard_table(rows);

    const fs::path out = out_dir.empty() ? fs::path(run_dir) : fs::path(out_dir);
    write_file_or_die(out / "leaderboard.csv", csv);
    write_file_or_die(out / "leaderboard.txt", table);
    std::cout << table;
    return 0;
}

int run_curate(const std::string& queries_path, const std::string& taxonomy_path,
               int total_tasks, const std::string& judge_model, const std::string& out_path,
               const GatewayOptions& gw_options) {
    auto gateway = make_gateway(gw_options);
    CurationConfig cfg;
    cfg.judge_model = judge_model;

    auto taxonomy = load_taxonomy(taxonomy_path);
    auto queries = load_queries(queries_path);

    TopicDistribution distribution;
    size_t kept = 0;
    for (const auto& query : queries) {
        if (screen_deep_research_query(*gateway, cfg, query) != ScreenDecision::keep) continue;
        ++kept;
        distribution.add(classify_topic(*gateway, cfg, query, taxonomy).topic);
    }
    std::cout << "kept " << kept << " of " << queries.size() << " queries\n";

    std::map<std::string, int> quota;
    if (distribution.total > 0 && total_tasks > 0)
        quota = allocate_task_quota(distribution, total_tasks);

    std::ostringstream csv;
    write_distribution_csv(distribution, quota, csv);
    if (!out_path.empty())
        write_file_or_die(out_path, csv.str());
    else
        std::cout << csv.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"research report evaluation harness"};
    app.require_subcommand(1);

    GatewayOptions gw_options;
    std::string tasks_path, reports_dir, reference_dir, out_dir = "out", run_id;
    std::string mode_name = "full";
    std::string judge_model = "gemini-2.5-pro";
    std::string support_judge_model = "gemini-2.5-flash";
    std::string static_rubric_path, reader_endpoint;
    int trials = 3;
    int fetch_timeout_seconds = 10;
    bool exclude_failed_fetches = false;

    auto add_gateway_flags = [&](CLI::App* cmd) {
        cmd->add_option("--mock-script", gw_options.mock_script,
                        "scripted judge fixture file (offline runs)");
        cmd->add_option("--cache-dir", gw_options.cache_dir,
                        "judge response cache directory");
        cmd->add_option("--concurrency", gw_options.concurrency, "worker pool size")
            ->check(CLI::PositiveNumber);
    };

    auto* race = app.add_subcommand("race", "score reports against per-task references");
    race->add_option("--tasks", tasks_path, "task set JSONL")->required();
    race->add_option("--reports", reports_dir, "reports directory (<model>/<task>.md)")
        ->required();
    race->add_option("--reference", reference_dir, "reference reports directory")->required();
    race->add_option("--out", out_dir, "output directory");
    race->add_option("--run-id", run_id, "run identifier (default: timestamped)");
    race->add_option("--mode", mode_name,
                     "full|no_criteria_weights|no_dim_weights|no_weights|no_reference|"
                     "reverse_position|static_criteria|vanilla");
    race->add_option("--judge-model", judge_model, "judge model name");
    race->add_option("--trials", trials, "weight-generation trials")->check(CLI::PositiveNumber);
    race->add_option("--static-rubric", static_rubric_path,
                     "rubric file for static_criteria mode (built-in when omitted)");
    add_gateway_flags(race);

    auto* fact = app.add_subcommand("fact", "verify citations and compute citation metrics");
    fact->add_option("--tasks", tasks_path, "task set JSONL")->required();
    fact->add_option("--reports", reports_dir, "reports directory (<model>/<task>.md)")
        ->required();
    fact->add_option("--out", out_dir, "output directory");
    fact->add_option("--run-id", run_id, "run identifier (default: timestamped)");
    fact->add_option("--support-judge-model", support_judge_model,
                     "judge model for extraction and support judgment");
    fact->add_option("--reader-endpoint", reader_endpoint,
                     "reader-style extraction endpoint prefix");
    fact->add_flag("--exclude-failed-fetches", exclude_failed_fetches,
                   "drop unreachable pairs from the audit instead of counting them "
                   "as not_support");
    fact->add_option("--fetch-timeout", fetch_timeout_seconds,
                     "per-fetch timeout in seconds")
        ->check(CLI::PositiveNumber);
    add_gateway_flags(fact);

    std::string annotations_path, scores_path, consistency_out;
    double epsilon = 1e-9;
    auto* consistency =
        app.add_subcommand("consistency", "compare method scores against human annotations");
    consistency->add_option("--annotations", annotations_path, "annotation JSONL")->required();
    consistency->add_option("--scores", scores_path, "method score JSONL")->required();
    consistency->add_option("--epsilon", epsilon, "tie tolerance for pairwise agreement");
    consistency->add_option("--out", consistency_out, "write the consistency report here");

    std::string run_dir, leaderboard_out;
    auto* leaderboard = app.add_subcommand("leaderboard", "emit leaderboard for a finished run");
    leaderboard->add_option("--run", run_dir, "run directory (<out>/<run_id>)")->required();
    leaderboard->add_option("--out", leaderboard_out, "output directory (default: run dir)");

    std::string queries_path, taxonomy_path = "assets/topics.txt", curate_out;
    int total_tasks = 0;
    auto* curate = app.add_subcommand("curate", "screen and classify raw queries");
    curate->add_option("--queries", queries_path, "query file (text or JSONL)")->required();
    curate->add_option("--taxonomy", taxonomy_path, "topic taxonomy file");
    curate->add_option("--total", total_tasks, "task quota to allocate proportionally");
    curate->add_option("--judge-model", judge_model, "judge model name");
    curate->add_option("--out", curate_out, "distribution CSV path (default: stdout)");
    add_gateway_flags(curate);

    CLI11_PARSE(app, argc, argv);

    try {
        if (race->parsed())
            return run_race(tasks_path, reports_dir, reference_dir, out_dir, run_id, mode_name,
                            judge_model, trials, gw_options, static_rubric_path);
        if (fact->parsed())
            return run_fact(tasks_path, reports_dir, out_dir, run_id, support_judge_model,
                            reader_endpoint, gw_options, exclude_failed_fetches,
                            fetch_timeout_seconds);
        if (consistency->parsed())
            return run_consistency(annotations_path, scores_path, epsilon, consistency_out);
        if (leaderboard->parsed()) return run_leaderboard(run_dir, leaderboard_out);
        if (curate->parsed())
            return run_curate(queries_path, taxonomy_path, total_tasks, judge_model, curate_out,
                              gw_options);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
