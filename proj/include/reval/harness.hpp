#pragma once

// Batch orchestration and persistence: task-set ingestion, resumable RACE and
// FACT runs over a reports directory, per-unit result files, and leaderboard
// emission.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "reval/core.hpp"
#include "reval/fact.hpp"
#include "reval/judge.hpp"
#include "reval/race.hpp"

namespace reval {

struct IngestError : Error {
    using Error::Error;
};

struct EmitError : Error {
    using Error::Error;
};

struct RunManifest {
    std::string run_id;
    AblationMode mode = AblationMode::full;
    std::string judge_model;
    int trials = 3;
    int concurrency = 4;
    std::chrono::system_clock::time_point started_at{};
    std::chrono::system_clock::time_point finished_at{};
    int task_count = 0;
    int model_count = 0;
};

namespace detail {

inline std::string iso8601(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write file: " + path.string());
    out << content;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file: " + path.string());
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

// Runs fn(0..count-1) on up to `workers` threads.
template <typename Fn>
void parallel_for(size_t count, int workers, Fn fn) {
    if (count == 0) return;
    workers = std::max(1, std::min<int>(workers, static_cast<int>(count)));
    if (workers == 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> threads;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ingestion

// Task set: JSONL with fields id, prompt, language, topic.
inline std::vector<ResearchTask> load_task_set(const std::filesystem::path& path,
                                               const std::vector<std::string>& taxonomy = {}) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open task file: " + path.string());
    std::vector<ResearchTask> tasks;
    std::set<std::string> ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object())
            throw IngestError("malformed task record at line " + std::to_string(line_no));
        for (const char* field : {"id", "prompt", "language", "topic"}) {
            if (!doc.contains(field))
                throw IngestError("task record at line " + std::to_string(line_no) +
                                  " is missing field: " + std::string(field));
        }
        ResearchTask task;
        task.id = doc["id"].get<std::string>();
        task.prompt = doc["prompt"].get<std::string>();
        auto language = language_from_string(doc["language"].get<std::string>());
        if (!language)
            throw IngestError("task " + task.id + ": unsupported language \"" +
                              doc["language"].get<std::string>() + "\"");
        task.language = *language;
        task.topic = doc["topic"].get<std::string>();
        if (!ids.insert(task.id).second)
            throw IngestError("duplicate task id: " + task.id);
        if (!taxonomy.empty() &&
            std::find(taxonomy.begin(), taxonomy.end(), task.topic) == taxonomy.end())
            emit_warning("task " + task.id + " has topic outside the taxonomy: " + task.topic);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

inline std::vector<std::string> list_model_dirs(const std::filesystem::path& reports_dir) {
    std::vector<std::string> models;
    if (!std::filesystem::is_directory(reports_dir))
        throw IngestError("reports directory does not exist: " + reports_dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(reports_dir))
        if (entry.is_directory()) models.push_back(entry.path().filename().string());
    std::sort(models.begin(), models.end());
    return models;
}

inline std::optional<Report> try_load_report(const std::filesystem::path& reports_dir,
                                             const std::string& model,
                                             const std::string& task_id) {
    const auto path = reports_dir / model / (task_id + ".md");
    if (!std::filesystem::exists(path)) return std::nullopt;
    Report report;
    report.task_id = task_id;
    report.model_name = model;
    report.raw_text = detail::read_text_file(path);
    return report;
}

// ---------------------------------------------------------------------------
// Result documents

inline nlohmann::json scorecard_to_json(const ReportScorecard& card, const std::string& run_id) {
    nlohmann::json doc;
    doc["run_id"] = run_id;
    doc["task_id"] = card.task_id;
    doc["model_name"] = card.model_name;
    doc["mode"] = to_string(card.mode);
    doc["rubric_provenance"] = to_string(card.rubric_provenance);
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& pair : card.pairs) {
        pairs.push_back({{"dimension", dimension_key(pair.dimension)},
                         {"criterion_index", pair.criterion_index},
                         {"analysis", pair.analysis},
                         {"target_score", pair.target_score},
                         {"reference_score", pair.reference_score}});
    }
    doc["pairs"] = pairs;
    nlohmann::json dt = nlohmann::json::object();
    nlohmann::json dr = nlohmann::json::object();
    for (const auto& [dim, v] : card.dimension_scores_target) dt[dimension_key(dim)] = v;
    for (const auto& [dim, v] : card.dimension_scores_reference) dr[dimension_key(dim)] = v;
    doc["dimension_scores_target"] = dt;
    doc["dimension_scores_reference"] = dr;
    doc["intermediate_target"] = card.intermediate_target;
    doc["intermediate_reference"] = card.intermediate_reference;
    doc["final_score"] = card.final_score;
    doc["reported_score"] = card.reported_score;
    return doc;
}

inline ReportScorecard scorecard_from_json(const nlohmann::json& doc) {
    ReportScorecard card;
    card.task_id = doc.value("task_id", "");
    card.model_name = doc.value("model_name", "");
    if (auto mode = ablation_mode_from_string(doc.value("mode", "full"))) card.mode = *mode;
    card.rubric_provenance = doc.value("rubric_provenance", "dynamic") == "static"
                                 ? RubricProvenance::static_fixed
                                 : RubricProvenance::dynamic_generated;
    for (const auto& item : doc.value("pairs", nlohmann::json::array())) {
        CriterionScorePair pair;
        if (auto dim = dimension_from_key(item.value("dimension", "")))
            pair.dimension = *dim;
        pair.criterion_index = item.value("criterion_index", 0);
        pair.analysis = item.value("analysis", "");
        pair.target_score = item.value("target_score", 0.0);
        pair.reference_score = item.value("reference_score", 0.0);
        card.pairs.push_back(std::move(pair));
    }
    if (doc.contains("dimension_scores_target"))
        for (const auto& [key, value] : doc.at("dimension_scores_target").items())
            if (auto dim = dimension_from_key(key))
                card.dimension_scores_target[*dim] = value.get<double>();
    if (doc.contains("dimension_scores_reference"))
        for (const auto& [key, value] : doc.at("dimension_scores_reference").items())
            if (auto dim = dimension_from_key(key))
                card.dimension_scores_reference[*dim] = value.get<double>();
    card.intermediate_target = doc.value("intermediate_target", 0.0);
    card.intermediate_reference = doc.value("intermediate_reference", 0.0);
    card.final_score = doc.value("final_score", 0.0);
    card.reported_score = doc.value("reported_score", 0.0);
    return card;
}

inline nlohmann::json audit_to_json(const AuditOutcome& outcome, const std::string& run_id) {
    nlohmann::json doc;
    doc["run_id"] = run_id;
    doc["task_id"] = outcome.audit.task_id;
    doc["model_name"] = outcome.audit.model_name;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& ev : outcome.evidence) {
        pairs.push_back({{"statement", ev.pair.statement},
                         {"url", ev.pair.url},
                         {"verdict", to_string(ev.pair.verdict)},
                         {"evidence_note", ev.pair.evidence_note.value_or("")},
                         {"fetch_status", to_string(ev.fetch_status)},
                         {"excluded", ev.excluded}});
    }
    doc["pairs"] = pairs;
    doc["supported_count"] = outcome.audit.supported_count;
    doc["task_accuracy"] = outcome.audit.task_accuracy;
    return doc;
}

inline AuditOutcome audit_from_json(const nlohmann::json& doc) {
    AuditOutcome outcome;
    outcome.audit.task_id = doc.value("task_id", "");
    outcome.audit.model_name = doc.value("model_name", "");
    for (const auto& item : doc.value("pairs", nlohmann::json::array())) {
        PairEvidence ev;
        ev.pair.statement = item.value("statement", "");
        ev.pair.url = item.value("url", "");
        if (auto verdict = verdict_from_string(item.value("verdict", "unverified")))
            ev.pair.verdict = *verdict;
        const std::string note = item.value("evidence_note", "");
        if (!note.empty()) ev.pair.evidence_note = note;
        const std::string fs = item.value("fetch_status", "timeout");
        if (fs == "ok") ev.fetch_status = FetchStatus::ok;
        else if (fs == "http_error") ev.fetch_status = FetchStatus::http_error;
        else if (fs == "blocked") ev.fetch_status = FetchStatus::blocked;
        else ev.fetch_status = FetchStatus::timeout;
        ev.excluded = item.value("excluded", false);
        if (!ev.excluded) outcome.audit.unique_pairs.push_back(ev.pair);
        outcome.evidence.push_back(std::move(ev));
    }
    finalize_audit(outcome.audit);
    return outcome;
}

// A run_id pins one configuration. Resuming under the same id with a
// different mode, judge, or trial count would silently mix result sets, so
// it is rejected up front.
inline void ensure_manifest_compatible(const RunManifest& manifest,
                                       const std::filesystem::path& out_dir,
                                       const std::string& manifest_name) {
    const auto path = out_dir / manifest.run_id / manifest_name;
    if (!std::filesystem::exists(path)) return;
    nlohmann::json doc = nlohmann::json::parse(detail::read_text_file(path), nullptr, false);
    if (doc.is_discarded()) return;
    const std::string previous_mode = doc.value("mode", "");
    const std::string previous_judge = doc.value("judge_model", "");
    const int previous_trials = doc.value("trials", manifest.trials);
    if (previous_mode != to_string(manifest.mode) || previous_judge != manifest.judge_model ||
        previous_trials != manifest.trials)
        throw ConfigError("run id " + manifest.run_id +
                          " was started with a different configuration (mode " + previous_mode +
                          ", judge " + previous_judge + ", trials " +
                          std::to_string(previous_trials) + "); use a fresh --run-id");
}

inline nlohmann::json manifest_to_json(const RunManifest& manifest) {
    nlohmann::json doc;
    doc["run_id"] = manifest.run_id;
    doc["mode"] = to_string(manifest.mode);
    doc["judge_model"] = manifest.judge_model;
    doc["trials"] = manifest.trials;
    doc["concurrency"] = manifest.concurrency;
    doc["started_at"] = detail::iso8601(manifest.started_at);
    doc["finished_at"] = detail::iso8601(manifest.finished_at);
    doc["task_count"] = manifest.task_count;
    doc["model_count"] = manifest.model_count;
    return doc;
}

// ---------------------------------------------------------------------------
// RACE suite

struct RaceSuiteResult {
    std::vector<ReportScorecard> scorecards;
    std::vector<std::string> gaps;
    bool complete = true;
};

// Evaluates every (task, model) pair found under reports_dir against the
// per-task reference. Finished units are loaded from their result files, so
// re-running a manifest is idempotent and free of judge calls.
inline RaceSuiteResult run_race_suite(JudgeGateway& gateway, const RaceConfig& race_cfg,
                                      RunManifest& manifest,
                                      const std::vector<ResearchTask>& tasks,
                                      const std::filesystem::path& reports_dir,
                                      const std::filesystem::path& reference_dir,
                                      const std::filesystem::path& out_dir,
                                      const std::optional<EvaluationRubric>& static_rubric =
                                          std::nullopt) {
    ensure_manifest_compatible(manifest, out_dir, "race-manifest.json");
    manifest.started_at = std::chrono::system_clock::now();
    const auto models = list_model_dirs(reports_dir);
    manifest.task_count = static_cast<int>(tasks.size());
    manifest.model_count = static_cast<int>(models.size());
    const auto race_dir = out_dir / manifest.run_id / "race";

    RaceSuiteResult result;
    std::mutex result_mutex;

    detail::parallel_for(tasks.size(), manifest.concurrency, [&](size_t ti) {
        const ResearchTask& task = tasks[ti];

        const auto reference_path = reference_dir / (task.id + ".md");
        if (!std::filesystem::exists(reference_path)) {
            std::lock_guard<std::mutex> lock(result_mutex);
            result.gaps.push_back("task " + task.id + ": missing reference report");
            return;
        }
        Report reference;
        reference.task_id = task.id;
        reference.model_name = "<reference>";
        reference.raw_text = detail::read_text_file(reference_path);

        for (const auto& model : models) {
            const auto card_path = race_dir / model / (task.id + ".json");
            if (std::filesystem::exists(card_path)) {
                auto card = scorecard_from_json(
                    nlohmann::json::parse(detail::read_text_file(card_path)));
                std::lock_guard<std::mutex> lock(result_mutex);
                result.scorecards.push_back(std::move(card));
                continue;
            }
            auto report = try_load_report(reports_dir, model, task.id);
            if (!report) {
                std::lock_guard<std::mutex> lock(result_mutex);
                result.gaps.push_back("task " + task.id + ", model " + model +
                                      ": missing report file");
                continue;
            }
            try {
                ReportScorecard card = evaluate_report(gateway, race_cfg, task, *report,
                                                       reference, manifest.mode, static_rubric);
                detail::write_text_file(card_path,
                                        scorecard_to_json(card, manifest.run_id).dump(2) + "\n");
                std::lock_guard<std::mutex> lock(result_mutex);
                result.scorecards.push_back(std::move(card));
            } catch (const JudgeUnavailable& e) {
                std::lock_guard<std::mutex> lock(result_mutex);
                result.gaps.push_back("task " + task.id + ", model " + model +
                                      ": judge unavailable: " + e.what());
                result.complete = false;
            } catch (const Error& e) {
                std::lock_guard<std::mutex> lock(result_mutex);
                result.gaps.push_back("task " + task.id + ", model " + model + ": " + e.what());
                result.complete = false;
            }
        }
    });

    // Deterministic output order regardless of worker interleaving.
    auto by_unit = [](const ReportScorecard& a, const ReportScorecard& b) {
        return std::tie(a.task_id, a.model_name) < std::tie(b.task_id, b.model_name);
    };
    std::sort(result.scorecards.begin(), result.scorecards.end(), by_unit);
    std::sort(result.gaps.begin(), result.gaps.end());
    if (!result.gaps.empty()) result.complete = false;

    manifest.finished_at = std::chrono::system_clock::now();
    detail::write_text_file(out_dir / manifest.run_id / "race-manifest.json",
                            manifest_to_json(manifest).dump(2) + "\n");
    if (!result.gaps.empty()) {
        nlohmann::json gaps = result.gaps;
        detail::write_text_file(race_dir / "gaps.json", gaps.dump(2) + "\n");
    }
    return result;
}

// ---------------------------------------------------------------------------
// FACT suite

struct FactSuiteResult {
    std::map<std::string, FactRunSummary> per_model;
    std::vector<std::string> gaps;
    bool complete = true;
};

inline FactSuiteResult run_fact_suite(JudgeGateway& gateway, SourceFetcher& fetcher,
                                      const FactConfig& fact_cfg, RunManifest& manifest,
                                      const std::vector<ResearchTask>& tasks,
                                      const std::filesystem::path& reports_dir,
                                      const std::filesystem::path& out_dir) {
    ensure_manifest_compatible(manifest, out_dir, "fact-manifest.json");
    manifest.started_at = std::chrono::system_clock::now();
    const auto models = list_model_dirs(reports_dir);
    manifest.task_count = static_cast<int>(tasks.size());
    manifest.model_count = static_cast<int>(models.size());
    const auto fact_dir = out_dir / manifest.run_id / "fact";

    FactSuiteResult result;
    std::mutex result_mutex;
    std::map<std::string, std::vector<AuditOutcome>> outcomes;
    for (const auto& model : models) outcomes[model] = {};

    struct Unit {
        size_t task_index;
        std::string model;
    };
    std::vector<Unit> units;
    for (size_t ti = 0; ti < tasks.size(); ++ti)
        for (const auto& model : models) units.push_back({ti, model});

    detail::parallel_for(units.size(), manifest.concurrency, [&](size_t ui) {
        const Unit& unit = units[ui];
        const ResearchTask& task = tasks[unit.task_index];
        const auto audit_path = fact_dir / unit.model / (task.id + ".json");

        AuditOutcome outcome;
        if (std::filesystem::exists(audit_path)) {
            outcome = audit_from_json(nlohmann::json::parse(detail::read_text_file(audit_path)));
        } else {
            auto report = try_load_report(reports_dir, unit.model, task.id);
            if (!report) {
                outcome.audit.task_id = task.id;
                outcome.audit.model_name = unit.model;
                finalize_audit(outcome.audit);
                std::lock_guard<std::mutex> lock(result_mutex);
                result.gaps.push_back("task " + task.id + ", model " + unit.model +
                                      ": missing report file, audited as zero citations");
            } else {
                outcome = audit_report(gateway, fetcher, fact_cfg, *report);
            }
            detail::write_text_file(audit_path,
                                    audit_to_json(outcome, manifest.run_id).dump(2) + "\n");
        }
        std::lock_guard<std::mutex> lock(result_mutex);
        outcomes[unit.model].push_back(std::move(outcome));
    });

    // Abort loudly when the reader never produced a single page.
    size_t attempted = 0;
    size_t unreachable = 0;
    for (const auto& [model, list] : outcomes) {
        for (const auto& outcome : list) {
            for (const auto& ev : outcome.evidence) {
                ++attempted;
                if (ev.fetch_status == FetchStatus::timeout) ++unreachable;
            }
        }
    }
    if (attempted > 0 && unreachable == attempted)
        throw Error("reader endpoint unreachable: all " + std::to_string(attempted) +
                    " fetches timed out; check --reader-endpoint and connectivity");

    for (auto& [model, list] : outcomes) {
        std::sort(list.begin(), list.end(), [](const AuditOutcome& a, const AuditOutcome& b) {
            return a.audit.task_id < b.audit.task_id;
        });
        std::vector<CitationAudit> audits;
        audits.reserve(list.size());
        for (const auto& outcome : list) audits.push_back(outcome.audit);
        if (!audits.empty()) result.per_model[model] = compute_citation_metrics(audits);
    }
    std::sort(result.gaps.begin(), result.gaps.end());
    if (!result.gaps.empty()) result.complete = false;

    manifest.finished_at = std::chrono::system_clock::now();
    detail::write_text_file(out_dir / manifest.run_id / "fact-manifest.json",
                            manifest_to_json(manifest).dump(2) + "\n");
    if (!result.gaps.empty()) {
        nlohmann::json gaps = result.gaps;
        detail::write_text_file(fact_dir / "gaps.json", gaps.dump(2) + "\n");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Leaderboard

struct LeaderboardRow {
    std::string model_name;
    std::optional<double> overall;
    std::map<Dimension, std::optional<double>> dimensions;
    std::optional<double> c_acc;  // percent
    std::optional<double> e_cit;
};

inline std::vector<LeaderboardRow> build_leaderboard(
    const std::vector<ReportScorecard>& scorecards,
    const std::map<std::string, FactRunSummary>& summaries) {
    if (scorecards.empty() && summaries.empty())
        throw EmitError("build_leaderboard: nothing to emit");

    struct Accumulator {
        double overall_sum = 0.0;
        int overall_count = 0;
        std::map<Dimension, std::pair<double, int>> dims;
    };
    std::map<std::string, Accumulator> acc;
    for (const auto& card : scorecards) {
        auto& a = acc[card.model_name];
        a.overall_sum += card.reported_score;
        a.overall_count += 1;
        for (const auto& [dim, target] : card.dimension_scores_target) {
            auto it = card.dimension_scores_reference.find(dim);
            if (it == card.dimension_scores_reference.end()) continue;
            const double denominator = target + it->second;
            if (denominator <= 0.0) continue;
            auto& cell = a.dims[dim];
            cell.first += 100.0 * target / denominator;
            cell.second += 1;
        }
    }
    std::set<std::string> names;
    for (const auto& [model, a] : acc) names.insert(model);
    for (const auto& [model, summary] : summaries) names.insert(model);

    std::vector<LeaderboardRow> rows;
    for (const auto& model : names) {
        LeaderboardRow row;
        row.model_name = model;
        auto it = acc.find(model);
        if (it != acc.end() && it->second.overall_count > 0) {
            row.overall = it->second.overall_sum / it->second.overall_count;
            for (Dimension d : kAllDimensions) {
                auto cell = it->second.dims.find(d);
                if (cell != it->second.dims.end() && cell->second.second > 0)
                    row.dimensions[d] = cell->second.first / cell->second.second;
                else
                    row.dimensions[d] = std::nullopt;
            }
        } else {
            for (Dimension d : kAllDimensions) row.dimensions[d] = std::nullopt;
        }
        auto fs = summaries.find(model);
        if (fs != summaries.end()) {
            row.c_acc = 100.0 * fs->second.citation_accuracy;
            row.e_cit = fs->second.effective_citations;
        }
        rows.push_back(std::move(row));
    }

    std::sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
        if (a.overall.has_value() != b.overall.has_value()) return a.overall.has_value();
        if (a.overall && b.overall && *a.overall != *b.overall) return *a.overall > *b.overall;
        return a.model_name < b.model_name;
    });
    return rows;
}

namespace detail {

inline std::string format_cell(const std::optional<double>& value) {
    if (!value) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *value);
    return buf;
}

}  // namespace detail

inline std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows) {
    if (rows.empty()) throw EmitError("leaderboard_csv: no rows");
    std::ostringstream oss;
    oss << "model,overall,comp,depth,inst,read,c_acc,e_cit\n";
    for (const auto& row : rows) {
        oss << row.model_name << ',' << detail::format_cell(row.overall);
        for (Dimension d : kAllDimensions)
            oss << ',' << detail::format_cell(row.dimensions.count(d) ? row.dimensions.at(d)
                                                                      : std::nullopt);
        oss << ',' << detail::format_cell(row.c_acc) << ',' << detail::format_cell(row.e_cit)
            << '\n';
    }
    return oss.str();
}

inline std::string leaderboard_table(const std::vector<LeaderboardRow>& rows) {
    if (rows.empty()) throw EmitError("leaderboard_table: no rows");
    std::vector<std::string> headers = {"Model", "Overall", "Comp.", "Depth",
                                        "Inst.", "Read.",   "C.Acc.", "E.Cit."};
    std::vector<std::vector<std::string>> cells;
    for (const auto& row : rows) {
        std::vector<std::string> line;
        line.push_back(row.model_name);
        line.push_back(detail::format_cell(row.overall));
        for (Dimension d : kAllDimensions)
            line.push_back(detail::format_cell(row.dimensions.count(d) ? row.dimensions.at(d)
                                                                       : std::nullopt));
        line.push_back(detail::format_cell(row.c_acc));
        line.push_back(detail::format_cell(row.e_cit));
        cells.push_back(std::move(line));
    }
    std::vector<size_t> widths(headers.size());
    for (size_t c = 0; c < headers.size(); ++c) {
        widths[c] = headers[c].size();
        for (const auto& line : cells) widths[c] = std::max(widths[c], line[c].size());
    }
    std::ostringstream oss;
    auto emit_row = [&](const std::vector<std::string>& line) {
        std::string row;
        for (size_t c = 0; c < line.size(); ++c) {
            row += (c == 0 ? "" : "  ");
            row += line[c] + std::string(widths[c] - line[c].size(), ' ');
        }
        while (!row.empty() && row.back() == ' ') row.pop_back();
        oss << row << '\n';
    };
    emit_row(headers);
    {
        std::vector<std::string> rule;
        for (size_t c = 0; c < headers.size(); ++c) rule.push_back(std::string(widths[c], '-'));
        emit_row(rule);
    }
    for (const auto& line : cells) emit_row(line);
    return oss.str();
}

// Loads every persisted scorecard and audit under a run directory, for
// leaderboard emission decoupled from the runs themselves.
inline std::vector<ReportScorecard> load_run_scorecards(const std::filesystem::path& run_dir) {
    std::vector<ReportScorecard> cards;
    const auto race_dir = run_dir / "race";
    if (!std::filesystem::is_directory(race_dir)) return cards;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(race_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json" &&
            entry.path().filename() != "gaps.json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files)
        cards.push_back(scorecard_from_json(nlohmann::json::parse(detail::read_text_file(file))));
    return cards;
}

inline std::map<std::string, FactRunSummary> load_run_fact_summaries(
    const std::filesystem::path& run_dir) {
    std::map<std::string, FactRunSummary> summaries;
    const auto fact_dir = run_dir / "fact";
    if (!std::filesystem::is_directory(fact_dir)) return summaries;
    std::map<std::string, std::vector<CitationAudit>> audits;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(fact_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json" &&
            entry.path().filename() != "gaps.json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        auto outcome = audit_from_json(nlohmann::json::parse(detail::read_text_file(file)));
        audits[outcome.audit.model_name].push_back(outcome.audit);
    }
    for (auto& [model, list] : audits) summaries[model] = compute_citation_metrics(list);
    return summaries;
}

}  // namespace reval
