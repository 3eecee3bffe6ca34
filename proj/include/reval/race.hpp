#pragma once

// Report-quality evaluation: deterministic report cleaning, per-task dynamic
// dimension weights averaged over judge trials, adaptive criteria generation,
// side-by-side criterion scoring against a reference report, and aggregation
// into a relative final score. Ablation modes swap out individual stages.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reval/core.hpp"
#include "reval/judge.hpp"
#include "reval/prompts.hpp"

namespace reval {

struct WeightGenerationError : Error {
    using Error::Error;
};

struct CriteriaGenerationError : Error {
    using Error::Error;
};

struct ScoreParseError : Error {
    using Error::Error;
};

// Both intermediate scores were zero, so the relative score is undefined.
struct DegenerateScoreError : Error {
    using Error::Error;
};

struct RaceConfig {
    std::string judge_model = "judge";
    int trials = 3;                     // weight samples averaged per task
    double weight_temperature = 1.0;    // trials must vary for averaging to help
    double scoring_temperature = 0.0;
    int max_output_tokens = 16384;
    int min_criteria = 3;
    int max_criteria = 10;
    double pointwise_anchor = 5.0;      // stands in for the reference in no_reference mode
    bool judge_cleaning = false;        // run the clean-article prompt on residual markers
    std::filesystem::path rubric_cache_dir;  // empty disables rubric caching
};

// ---------------------------------------------------------------------------
// Report cleaning

namespace detail {

inline bool is_reference_heading(const std::string& line) {
    std::string t;
    for (char c : line) {
        if (c == '#' || c == '*' || c == '=' || c == '-') continue;
        t.push_back(c);
    }
    // trim
    size_t b = t.find_first_not_of(" \t\r");
    if (b == std::string::npos) return false;
    size_t e = t.find_last_not_of(" \t\r:");
    t = t.substr(b, e - b + 1);
    std::string lower;
    for (char c : t) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return lower == "references" || lower == "reference" || t == "\xE5\x8F\x82\xE8\x80\x83\xE6\x96\x87\xE7\x8C\xAE";
}

}  // namespace detail

// Splits off the trailing references section, if any. Returns {body, section}
// where section includes the heading line; section is empty when absent.
inline std::pair<std::string, std::string> split_reference_section(const std::string& text) {
    size_t line_start = 0;
    size_t heading_pos = std::string::npos;
    for (size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            std::string line = text.substr(line_start, i - line_start);
            if (detail::is_reference_heading(line)) heading_pos = line_start;
            line_start = i + 1;
        }
    }
    if (heading_pos == std::string::npos) return {text, ""};
    return {text.substr(0, heading_pos), text.substr(heading_pos)};
}

// Deterministic cleaning pass: drops [n]/[n][m]-style citation markers,
// footnote markers and definitions, and a trailing references section.
// Text without any of those comes back byte-identical.
inline std::string clean_report_text(const std::string& raw) {
    auto [body, refs] = split_reference_section(raw);
    std::string text = std::move(body);

    static const std::regex footnote_def(R"(^[ \t]*\[\^\d+\]:[^\n]*\n?)",
                                         std::regex::multiline);
    text = std::regex_replace(text, footnote_def, "");

    static const std::regex marker(R"([ \t]*\[\^?\d+(?:[ \t]*,[ \t]*\d+)*\])");
    text = std::regex_replace(text, marker, "");

    if (!refs.empty()) {
        size_t end = text.find_last_not_of(" \t\r\n");
        text = (end == std::string::npos) ? "" : text.substr(0, end + 1);
    }
    return text;
}

// True when marker-like fragments survive the deterministic pass and the
// judge-based cleanup is worth running.
inline bool has_residual_citation_markers(const std::string& text) {
    static const std::regex residual(R"(\[\d+\]|\xE3\x80\x90\d+\xE3\x80\x91)");
    return std::regex_search(text, residual);
}

inline Report clean_report(Report report, JudgeGateway* gateway = nullptr,
                           const RaceConfig& cfg = {}) {
    if (report.raw_text.empty()) {
        emit_warning("clean_report: empty raw_text for task " + report.task_id);
        report.cleaned_text = report.raw_text;
        return report;
    }
    std::string cleaned = clean_report_text(report.raw_text);
    if (cfg.judge_cleaning && gateway != nullptr && has_residual_citation_markers(cleaned)) {
        JudgeRequest request;
        request.system_role = prompts::clean_article().system_role;
        request.user_prompt =
            render_prompt(prompts::clean_article().user_template, {{"article", cleaned}});
        request.model_name = cfg.judge_model;
        request.temperature = 0.0;
        request.max_output_tokens = cfg.max_output_tokens;
        try {
            cleaned = gateway->submit(request).raw_text;
        } catch (const Error& e) {
            emit_warning(std::string("judge cleaning pass failed, keeping deterministic "
                                     "result: ") +
                         e.what());
        }
    }
    report.cleaned_text = std::move(cleaned);
    return report;
}

// ---------------------------------------------------------------------------
// Dynamic weights

namespace detail {

inline std::optional<WeightTrial> parse_weight_trial(const nlohmann::json& payload,
                                                     int trial_index) {
    WeightTrial trial;
    trial.trial_index = trial_index;
    double sum = 0.0;
    for (Dimension d : kAllDimensions) {
        const std::string key = dimension_key(d);
        if (!payload.contains(key) || !payload[key].is_number()) return std::nullopt;
        double w = payload[key].get<double>();
        if (!std::isfinite(w) || w < 0.0 || w > 1.0) return std::nullopt;
        trial.weights[d] = w;
        sum += w;
    }
    if (std::abs(sum - 1.0) > 0.05) return std::nullopt;  // pre-normalization gate
    return trial;
}

}  // namespace detail

inline std::map<Dimension, double> generate_dimension_weights(JudgeGateway& gateway,
                                                              const RaceConfig& cfg,
                                                              const ResearchTask& task) {
    const int trials = cfg.trials;
    if (trials < 1) throw ConfigError("generate_dimension_weights: trials must be >= 1");

    const auto& tpl = prompts::dimension_weights();
    const std::string user =
        render_prompt(tpl.user_template, {{"task_prompt", task.prompt}});

    auto run_trial = [&](int index) -> std::optional<WeightTrial> {
        JudgeRequest request;
        request.system_role = tpl.system_role;
        request.user_prompt = user;
        request.model_name = cfg.judge_model;
        request.temperature = cfg.weight_temperature;
        request.max_output_tokens = cfg.max_output_tokens;
        request.variant = "weights-trial-" + std::to_string(index);
        const auto shape = PayloadShape::object(
            {"comprehensiveness", "insight", "instruction_following", "readability"});
        for (int attempt = 0; attempt < 2; ++attempt) {
            try {
                JudgeResponse response = gateway.submit(request);
                nlohmann::json payload = extract_structured_payload(response.raw_text, shape);
                if (auto trial = detail::parse_weight_trial(payload, index)) return trial;
            } catch (const ParseFailure&) {
            }
            request = request.with_variant_suffix("#r1");
        }
        return std::nullopt;
    };

    std::vector<std::future<std::optional<WeightTrial>>> futures;
    futures.reserve(static_cast<size_t>(trials));
    for (int j = 1; j <= trials; ++j)
        futures.push_back(std::async(std::launch::async, run_trial, j));

    std::vector<WeightTrial> parsed;
    for (auto& f : futures) {
        if (auto trial = f.get()) parsed.push_back(std::move(*trial));
    }

    const int needed = (trials + 1) / 2;
    if (static_cast<int>(parsed.size()) < needed)
        throw WeightGenerationError("only " + std::to_string(parsed.size()) + " of " +
                                    std::to_string(trials) +
                                    " weight trials parsed for task " + task.id);

    std::map<Dimension, double> mean;
    for (Dimension d : kAllDimensions) mean[d] = 0.0;
    for (auto& trial : parsed) {
        auto normalized = normalize_weights(trial.weights);
        for (Dimension d : kAllDimensions) mean[d] += normalized[d];
    }
    for (Dimension d : kAllDimensions) mean[d] /= static_cast<double>(parsed.size());
    return normalize_weights(mean);
}

// ---------------------------------------------------------------------------
// Adaptive criteria

inline std::vector<Criterion> generate_criteria(JudgeGateway& gateway, const RaceConfig& cfg,
                                                const ResearchTask& task, Dimension dimension) {
    const auto& tpl = prompts::criteria_generation();
    std::string title = dimension_title(dimension);
    std::string lower = title;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const std::string user = render_prompt(tpl.user_template, {{"task_prompt", task.prompt},
                                                               {"dimension", title},
                                                               {"dimension_lower", lower}});

    JudgeRequest request;
    request.system_role = tpl.system_role;
    request.user_prompt = user;
    request.model_name = cfg.judge_model;
    request.temperature = cfg.weight_temperature;
    request.max_output_tokens = cfg.max_output_tokens;
    request.variant = "criteria-" + dimension_key(dimension);

    auto parse = [&](const nlohmann::json& payload) -> std::optional<std::vector<Criterion>> {
        if (!payload.is_array()) return std::nullopt;
        std::vector<Criterion> list;
        for (const auto& item : payload) {
            if (!item.is_object() || !item.contains("criterion")) return std::nullopt;
            Criterion c;
            c.statement = item["criterion"].get<std::string>();
            c.explanation = item.value("explanation", "");
            c.weight = item.value("weight", 0.0);
            if (c.statement.empty() || !std::isfinite(c.weight) || c.weight < 0.0)
                return std::nullopt;
            list.push_back(std::move(c));
        }
        if (static_cast<int>(list.size()) < cfg.min_criteria) return std::nullopt;
        if (static_cast<int>(list.size()) > cfg.max_criteria) {
            emit_warning("criteria list for " + dimension_key(dimension) + " truncated to " +
                         std::to_string(cfg.max_criteria));
            list.resize(static_cast<size_t>(cfg.max_criteria));
        }
        return list;
    };

    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            JudgeResponse response = gateway.submit(request);
            nlohmann::json payload =
                extract_structured_payload(response.raw_text, PayloadShape::array());
            if (auto list = parse(payload)) {
                std::map<int, double> ws;
                for (size_t i = 0; i < list->size(); ++i) ws[static_cast<int>(i)] = (*list)[i].weight;
                auto normalized = normalize_weights(ws);
                for (size_t i = 0; i < list->size(); ++i)
                    (*list)[i].weight = normalized[static_cast<int>(i)];
                return *list;
            }
        } catch (const ParseFailure&) {
        } catch (const WeightError&) {
        }
        request = request.with_variant_suffix("#r1");
    }
    throw CriteriaGenerationError("could not obtain " + std::to_string(cfg.min_criteria) +
                                  "-" + std::to_string(cfg.max_criteria) + " criteria for " +
                                  dimension_key(dimension) + " on task " + task.id);
}

// ---------------------------------------------------------------------------
// Rubric assembly and persistence

inline nlohmann::json rubric_to_json(const EvaluationRubric& rubric) {
    nlohmann::json doc;
    doc["task_id"] = rubric.task_id;
    doc["provenance"] = to_string(rubric.provenance);
    nlohmann::json weights = nlohmann::json::object();
    for (const auto& [dim, w] : rubric.dimension_weights) weights[dimension_key(dim)] = w;
    doc["dimension_weights"] = weights;
    nlohmann::json criteria = nlohmann::json::object();
    for (const auto& [dim, list] : rubric.criteria) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : list)
            arr.push_back({{"statement", c.statement},
                           {"explanation", c.explanation},
                           {"weight", c.weight}});
        criteria[dimension_key(dim)] = arr;
    }
    doc["criteria"] = criteria;
    return doc;
}

inline EvaluationRubric rubric_from_json(const nlohmann::json& doc) {
    EvaluationRubric rubric;
    rubric.task_id = doc.value("task_id", "");
    rubric.provenance = doc.value("provenance", "dynamic") == "static"
                            ? RubricProvenance::static_fixed
                            : RubricProvenance::dynamic_generated;
    for (const auto& [key, value] : doc.at("dimension_weights").items()) {
        auto dim = dimension_from_key(key);
        if (!dim) throw RubricError("unknown dimension in rubric: " + key);
        rubric.dimension_weights[*dim] = value.get<double>();
    }
    for (const auto& [key, value] : doc.at("criteria").items()) {
        auto dim = dimension_from_key(key);
        if (!dim) throw RubricError("unknown dimension in rubric: " + key);
        std::vector<Criterion> list;
        for (const auto& item : value) {
            Criterion c;
            c.statement = item.at("statement").get<std::string>();
            c.explanation = item.value("explanation", "");
            c.weight = item.value("weight", 0.0);
            list.push_back(std::move(c));
        }
        rubric.criteria[*dim] = std::move(list);
    }
    return rubric;
}

inline EvaluationRubric builtin_static_rubric(const std::string& task_id) {
    EvaluationRubric rubric =
        rubric_from_json(nlohmann::json::parse(prompts::static_rubric_json()));
    rubric.task_id = task_id;
    rubric.provenance = RubricProvenance::static_fixed;
    return validate_rubric(std::move(rubric));
}

inline EvaluationRubric load_rubric_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw RubricError("cannot open rubric file: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw RubricError("malformed rubric file " + path.string() + ": " + e.what());
    }
    return validate_rubric(rubric_from_json(doc));
}

// Builds (or reloads) the per-task rubric. All models evaluated on a task
// share one rubric, otherwise their scores are not comparable.
inline EvaluationRubric build_rubric(JudgeGateway& gateway, const RaceConfig& cfg,
                                     const ResearchTask& task) {
    std::filesystem::path cache_file;
    if (!cfg.rubric_cache_dir.empty()) {
        cache_file = cfg.rubric_cache_dir / (task.id + ".json");
        if (std::filesystem::exists(cache_file)) return load_rubric_file(cache_file);
    }
    EvaluationRubric rubric;
    rubric.task_id = task.id;
    rubric.provenance = RubricProvenance::dynamic_generated;
    rubric.dimension_weights = generate_dimension_weights(gateway, cfg, task);
    for (Dimension d : kAllDimensions)
        rubric.criteria[d] = generate_criteria(gateway, cfg, task, d);
    rubric = validate_rubric(std::move(rubric));
    if (!cache_file.empty()) {
        std::filesystem::create_directories(cfg.rubric_cache_dir);
        const auto tmp = cache_file.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            out << rubric_to_json(rubric).dump(2) << '\n';
        }
        std::error_code ec;
        std::filesystem::rename(tmp, cache_file, ec);
        if (ec) emit_warning("failed to store rubric cache for task " + task.id);
    }
    return rubric;
}

// ---------------------------------------------------------------------------
// Scoring

inline std::string render_criteria_list(const EvaluationRubric& rubric) {
    std::ostringstream oss;
    for (Dimension d : kAllDimensions) {
        auto it = rubric.criteria.find(d);
        if (it == rubric.criteria.end()) continue;
        oss << "**" << dimension_title(d) << "**\n\n[\n";
        for (size_t i = 0; i < it->second.size(); ++i) {
            const Criterion& c = it->second[i];
            nlohmann::json entry = {{"criterion", c.statement},
                                    {"explanation", c.explanation},
                                    {"weight", c.weight}};
            oss << "  " << entry.dump() << (i + 1 < it->second.size() ? "," : "") << "\n";
        }
        oss << "]\n\n";
    }
    return oss.str();
}

namespace detail {

struct SlotScores {
    std::vector<std::optional<std::pair<double, double>>> values;  // per criterion
    std::vector<std::string> analyses;
};

// Pulls per-criterion score entries out of the judge payload, keyed by
// dimension and array position. `pointwise` reads target_score only.
inline std::map<Dimension, SlotScores> collect_scores(const nlohmann::json& payload,
                                                      const EvaluationRubric& rubric,
                                                      bool pointwise) {
    std::map<Dimension, SlotScores> out;
    for (const auto& [dim, list] : rubric.criteria) {
        SlotScores slot;
        slot.values.resize(list.size());
        slot.analyses.resize(list.size());
        const std::string key = dimension_key(dim);
        if (payload.contains(key) && payload[key].is_array()) {
            const auto& arr = payload[key];
            for (size_t i = 0; i < list.size() && i < arr.size(); ++i) {
                const auto& item = arr[i];
                if (!item.is_object()) continue;
                if (pointwise) {
                    if (!item.contains("target_score") || !item["target_score"].is_number())
                        continue;
                    slot.values[i] = {item["target_score"].get<double>(), 0.0};
                } else {
                    if (!item.contains("article_1_score") || !item["article_1_score"].is_number() ||
                        !item.contains("article_2_score") || !item["article_2_score"].is_number())
                        continue;
                    slot.values[i] = {item["article_1_score"].get<double>(),
                                      item["article_2_score"].get<double>()};
                }
                slot.analyses[i] = item.value("analysis", "");
            }
        }
        out[dim] = std::move(slot);
    }
    return out;
}

inline std::vector<std::string> missing_criteria(const std::map<Dimension, SlotScores>& scores,
                                                 const EvaluationRubric& rubric) {
    std::vector<std::string> missing;
    for (const auto& [dim, list] : rubric.criteria) {
        const auto& slot = scores.at(dim);
        for (size_t i = 0; i < list.size(); ++i)
            if (!slot.values[i])
                missing.push_back(dimension_key(dim) + "/" + list[i].statement);
    }
    return missing;
}

}  // namespace detail

// Scores every rubric criterion for target and reference. In reverse_position
// mode the reference occupies the article_1 slot; in no_reference mode the
// point-wise prompt is used and the reference score is a fixed anchor.
inline std::vector<CriterionScorePair> score_pair(JudgeGateway& gateway, const RaceConfig& cfg,
                                                  const ResearchTask& task, const Report& target,
                                                  const Report& reference,
                                                  const EvaluationRubric& rubric,
                                                  AblationMode mode) {
    if (mode == AblationMode::vanilla)
        throw ConfigError("score_pair is not part of the vanilla mode");

    const bool pointwise = (mode == AblationMode::no_reference);
    const bool reversed = (mode == AblationMode::reverse_position);
    const std::string criteria_list = render_criteria_list(rubric);

    JudgeRequest request;
    request.model_name = cfg.judge_model;
    request.temperature = cfg.scoring_temperature;
    request.max_output_tokens = cfg.max_output_tokens;

    if (pointwise) {
        const auto& tpl = prompts::pointwise_score();
        request.system_role = tpl.system_role;
        request.user_prompt = render_prompt(tpl.user_template,
                                            {{"task_prompt", task.prompt},
                                             {"article", target.text_for_judging()},
                                             {"criteria_list", criteria_list}});
    } else {
        const auto& tpl = (mode == AblationMode::static_criteria) ? prompts::static_score()
                                                                  : prompts::pairwise_score();
        const std::string& article_1 =
            reversed ? reference.text_for_judging() : target.text_for_judging();
        const std::string& article_2 =
            reversed ? target.text_for_judging() : reference.text_for_judging();
        request.system_role = tpl.system_role;
        request.user_prompt = render_prompt(tpl.user_template,
                                            {{"task_prompt", task.prompt},
                                             {"article_1", article_1},
                                             {"article_2", article_2},
                                             {"criteria_list", criteria_list}});
    }

    std::vector<std::string> required;
    for (Dimension d : kAllDimensions)
        if (rubric.criteria.count(d)) required.push_back(dimension_key(d));
    const auto shape = PayloadShape::object(required);

    std::map<Dimension, detail::SlotScores> scores;
    std::vector<std::string> missing;
    for (int attempt = 0; attempt < 2; ++attempt) {
        JudgeResponse response = gateway.submit(request);
        try {
            nlohmann::json payload = extract_structured_payload(response.raw_text, shape);
            scores = detail::collect_scores(payload, rubric, pointwise);
            missing = detail::missing_criteria(scores, rubric);
            if (missing.empty()) break;
        } catch (const ParseFailure&) {
            missing = {"<unparseable judge output>"};
        }
        request = request.with_variant_suffix("#r1");
    }
    if (!missing.empty()) {
        std::string joined;
        for (const auto& m : missing) joined += (joined.empty() ? "" : ", ") + m;
        throw ScoreParseError("task " + task.id + ", model " + target.model_name +
                              ": judge output missing criteria: " + joined);
    }

    std::vector<CriterionScorePair> pairs;
    for (Dimension d : kAllDimensions) {
        auto it = rubric.criteria.find(d);
        if (it == rubric.criteria.end()) continue;
        const auto& slot = scores.at(d);
        for (size_t i = 0; i < it->second.size(); ++i) {
            CriterionScorePair pair;
            pair.dimension = d;
            pair.criterion_index = static_cast<int>(i);
            pair.analysis = slot.analyses[i];
            auto [s1, s2] = *slot.values[i];
            if (pointwise) {
                pair.target_score = clamp_score(s1);
                pair.reference_score = cfg.pointwise_anchor;
            } else if (reversed) {
                pair.reference_score = clamp_score(s1);
                pair.target_score = clamp_score(s2);
            } else {
                pair.target_score = clamp_score(s1);
                pair.reference_score = clamp_score(s2);
            }
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Aggregation

// Weighted criterion scores roll up into dimension scores, dimension scores
// into intermediates, intermediates into the relative final score. The
// no-*-weights modes replace the corresponding weight groups with uniform
// ones.
inline ReportScorecard aggregate_scorecard(const std::vector<CriterionScorePair>& pairs,
                                           const EvaluationRubric& rubric, AblationMode mode) {
    if (mode == AblationMode::vanilla)
        throw ConfigError("aggregate_scorecard is not part of the vanilla mode");

    const bool uniform_criteria =
        mode == AblationMode::no_criteria_weights || mode == AblationMode::no_weights;
    const bool uniform_dims =
        mode == AblationMode::no_dim_weights || mode == AblationMode::no_weights;

    // One pair per rubric criterion, no extras.
    std::map<Dimension, std::vector<const CriterionScorePair*>> by_dim;
    for (const auto& [dim, list] : rubric.criteria)
        by_dim[dim].resize(list.size(), nullptr);
    for (const auto& pair : pairs) {
        auto it = by_dim.find(pair.dimension);
        if (it == by_dim.end() || pair.criterion_index < 0 ||
            pair.criterion_index >= static_cast<int>(it->second.size()))
            throw std::invalid_argument("score pair does not match any rubric criterion");
        if (it->second[static_cast<size_t>(pair.criterion_index)] != nullptr)
            throw std::invalid_argument("duplicate score pair for one criterion");
        it->second[static_cast<size_t>(pair.criterion_index)] = &pair;
    }
    for (const auto& [dim, slots] : by_dim)
        for (const auto* p : slots)
            if (p == nullptr)
                throw std::invalid_argument("missing score pair for a rubric criterion in " +
                                            dimension_key(dim));

    ReportScorecard card;
    card.pairs = pairs;
    card.mode = mode;
    card.rubric_provenance = rubric.provenance;

    double intermediate_target = 0.0;
    double intermediate_reference = 0.0;
    const double dim_count = static_cast<double>(rubric.dimension_weights.size());
    for (const auto& [dim, weight] : rubric.dimension_weights) {
        const auto& criteria = rubric.criteria.at(dim);
        const auto& slots = by_dim.at(dim);
        const double k = static_cast<double>(criteria.size());
        double target = 0.0;
        double reference = 0.0;
        for (size_t i = 0; i < criteria.size(); ++i) {
            const double w = uniform_criteria ? 1.0 / k : criteria[i].weight;
            target += w * slots[i]->target_score;
            reference += w * slots[i]->reference_score;
        }
        card.dimension_scores_target[dim] = target;
        card.dimension_scores_reference[dim] = reference;
        const double dw = uniform_dims ? 1.0 / dim_count : weight;
        intermediate_target += dw * target;
        intermediate_reference += dw * reference;
    }

    card.intermediate_target = intermediate_target;
    card.intermediate_reference = intermediate_reference;
    const double denominator = intermediate_target + intermediate_reference;
    if (!(denominator > 0.0))
        throw DegenerateScoreError("both intermediate scores are zero");
    card.final_score = intermediate_target / denominator;
    card.reported_score = 100.0 * card.final_score;
    if (!std::isfinite(card.final_score))
        throw DegenerateScoreError("non-finite final score");
    return card;
}

// ---------------------------------------------------------------------------
// Orchestration

// Runs the full pipeline for one (task, target) under the given mode. The
// static_criteria mode scores against `static_rubric` (or the built-in one);
// vanilla skips rubrics entirely and maps the judge's overall score onto the
// relative scale.
inline ReportScorecard evaluate_report(JudgeGateway& gateway, const RaceConfig& cfg,
                                       const ResearchTask& task, const Report& target,
                                       const Report& reference, AblationMode mode,
                                       const std::optional<EvaluationRubric>& static_rubric =
                                           std::nullopt) {
    try {
        Report cleaned_target = clean_report(target, &gateway, cfg);

        if (mode == AblationMode::vanilla) {
            const auto& tpl = prompts::vanilla_score();
            JudgeRequest request;
            request.system_role = tpl.system_role;
            request.user_prompt =
                render_prompt(tpl.user_template, {{"task_prompt", task.prompt},
                                                  {"article", cleaned_target.text_for_judging()}});
            request.model_name = cfg.judge_model;
            request.temperature = cfg.scoring_temperature;
            request.max_output_tokens = cfg.max_output_tokens;
            auto [response, payload] =
                ask_for_payload(gateway, request, PayloadShape::object({"overall_score"}));
            const double overall = clamp_score(payload["overall_score"].get<double>());
            ReportScorecard card;
            card.task_id = task.id;
            card.model_name = target.model_name;
            card.mode = mode;
            card.intermediate_target = overall;
            card.intermediate_reference = 10.0 - overall;
            card.final_score = overall / 10.0;
            card.reported_score = 100.0 * card.final_score;
            return card;
        }

        Report cleaned_reference = clean_report(reference, &gateway, cfg);

        EvaluationRubric rubric;
        if (mode == AblationMode::static_criteria) {
            rubric = static_rubric ? validate_rubric(*static_rubric)
                                   : builtin_static_rubric(task.id);
        } else {
            rubric = static_rubric ? validate_rubric(*static_rubric)
                                   : build_rubric(gateway, cfg, task);
        }
        rubric.task_id = task.id;

        auto pairs = score_pair(gateway, cfg, task, cleaned_target, cleaned_reference, rubric, mode);
        ReportScorecard card = aggregate_scorecard(pairs, rubric, mode);
        card.task_id = task.id;
        card.model_name = target.model_name;
        return card;
    } catch (const ParseFailure& e) {
        throw ScoreParseError("task " + task.id + ", model " + target.model_name + ": " +
                              e.what());
    }
}

}  // namespace reval
