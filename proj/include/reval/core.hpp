#pragma once

// Core domain model shared by every pipeline: evaluation dimensions,
// tasks, reports, rubrics, scorecards, citation audits, and the weight
// arithmetic that keeps all of them consistent.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace reval {

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct WeightError : Error {
    using Error::Error;
};

struct RubricError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Warning sink
//
// Soft contract violations (weight drift, clamped scores, skipped fallbacks)
// are reported here instead of failing the run. Tests swap the handler in to
// capture them.

using WarningHandler = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& warning_mutex() {
    static std::mutex m;
    return m;
}
inline WarningHandler& warning_handler_ref() {
    static WarningHandler h = [](const std::string& msg) {
        std::fprintf(stderr, "[warn] %s\n", msg.c_str());
    };
    return h;
}
}  // namespace detail

inline WarningHandler set_warning_handler(WarningHandler h) {
    std::lock_guard<std::mutex> lock(detail::warning_mutex());
    auto prev = detail::warning_handler_ref();
    detail::warning_handler_ref() = std::move(h);
    return prev;
}

inline void emit_warning(const std::string& msg) {
    WarningHandler h;
    {
        std::lock_guard<std::mutex> lock(detail::warning_mutex());
        h = detail::warning_handler_ref();
    }
    if (h) h(msg);
}

// ---------------------------------------------------------------------------
// Evaluation dimensions

enum class Dimension {
    comprehensiveness,
    insight,
    instruction_following,
    readability,
};

inline constexpr Dimension kAllDimensions[] = {
    Dimension::comprehensiveness,
    Dimension::insight,
    Dimension::instruction_following,
    Dimension::readability,
};

// Key used in judge payloads and persisted documents.
inline std::string dimension_key(Dimension d) {
    switch (d) {
        case Dimension::comprehensiveness: return "comprehensiveness";
        case Dimension::insight: return "insight";
        case Dimension::instruction_following: return "instruction_following";
        case Dimension::readability: return "readability";
    }
    throw Error("invalid dimension");
}

// Human-facing title used in prompts.
inline std::string dimension_title(Dimension d) {
    switch (d) {
        case Dimension::comprehensiveness: return "Comprehensiveness";
        case Dimension::insight: return "Insight";
        case Dimension::instruction_following: return "Instruction Following";
        case Dimension::readability: return "Readability";
    }
    throw Error("invalid dimension");
}

// Short column label for leaderboards.
inline std::string dimension_label(Dimension d) {
    switch (d) {
        case Dimension::comprehensiveness: return "Comp.";
        case Dimension::insight: return "Depth";
        case Dimension::instruction_following: return "Inst.";
        case Dimension::readability: return "Read.";
    }
    throw Error("invalid dimension");
}

inline std::optional<Dimension> dimension_from_key(const std::string& key) {
    for (Dimension d : kAllDimensions)
        if (dimension_key(d) == key) return d;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Ablation modes

enum class AblationMode {
    full,
    no_criteria_weights,
    no_dim_weights,
    no_weights,
    no_reference,
    reverse_position,
    static_criteria,
    vanilla,
};

inline std::string to_string(AblationMode m) {
    switch (m) {
        case AblationMode::full: return "full";
        case AblationMode::no_criteria_weights: return "no_criteria_weights";
        case AblationMode::no_dim_weights: return "no_dim_weights";
        case AblationMode::no_weights: return "no_weights";
        case AblationMode::no_reference: return "no_reference";
        case AblationMode::reverse_position: return "reverse_position";
        case AblationMode::static_criteria: return "static_criteria";
        case AblationMode::vanilla: return "vanilla";
    }
    throw Error("invalid ablation mode");
}

inline std::optional<AblationMode> ablation_mode_from_string(const std::string& s) {
    static const std::map<std::string, AblationMode> table = {
        {"full", AblationMode::full},
        {"no_criteria_weights", AblationMode::no_criteria_weights},
        {"no_dim_weights", AblationMode::no_dim_weights},
        {"no_weights", AblationMode::no_weights},
        {"no_reference", AblationMode::no_reference},
        {"reverse_position", AblationMode::reverse_position},
        {"static_criteria", AblationMode::static_criteria},
        {"vanilla", AblationMode::vanilla},
    };
    auto it = table.find(s);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------
// Tasks and reports

enum class Language { zh, en };

inline std::string to_string(Language l) { return l == Language::zh ? "zh" : "en"; }

inline std::optional<Language> language_from_string(const std::string& s) {
    if (s == "zh") return Language::zh;
    if (s == "en") return Language::en;
    return std::nullopt;
}

struct ResearchTask {
    std::string id;
    std::string prompt;
    Language language = Language::en;
    std::string topic;
};

struct Report {
    std::string task_id;
    std::string model_name;
    std::string raw_text;
    std::optional<std::string> cleaned_text;

    // Text to feed scoring prompts: cleaned when available.
    const std::string& text_for_judging() const {
        return cleaned_text ? *cleaned_text : raw_text;
    }
};

// ---------------------------------------------------------------------------
// Rubrics

struct Criterion {
    std::string statement;
    std::string explanation;
    double weight = 0.0;
};

enum class RubricProvenance { dynamic_generated, static_fixed };

inline std::string to_string(RubricProvenance p) {
    return p == RubricProvenance::dynamic_generated ? "dynamic" : "static";
}

struct EvaluationRubric {
    std::string task_id;
    std::map<Dimension, double> dimension_weights;
    std::map<Dimension, std::vector<Criterion>> criteria;
    RubricProvenance provenance = RubricProvenance::dynamic_generated;
};

// One raw weight sample from the judge, before averaging.
struct WeightTrial {
    int trial_index = 1;
    std::map<Dimension, double> weights;
};

// ---------------------------------------------------------------------------
// Scores

struct CriterionScorePair {
    Dimension dimension = Dimension::comprehensiveness;
    int criterion_index = 0;
    std::string analysis;
    double target_score = 0.0;
    double reference_score = 0.0;
};

struct ReportScorecard {
    std::string task_id;
    std::string model_name;
    std::vector<CriterionScorePair> pairs;
    std::map<Dimension, double> dimension_scores_target;
    std::map<Dimension, double> dimension_scores_reference;
    double intermediate_target = 0.0;
    double intermediate_reference = 0.0;
    double final_score = 0.0;     // ratio in (0,1), relative to the reference
    double reported_score = 0.0;  // final_score * 100
    AblationMode mode = AblationMode::full;
    RubricProvenance rubric_provenance = RubricProvenance::dynamic_generated;
};

// ---------------------------------------------------------------------------
// Citations

enum class Verdict { support, not_support, unverified };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::support: return "support";
        case Verdict::not_support: return "not_support";
        case Verdict::unverified: return "unverified";
    }
    throw Error("invalid verdict");
}

inline std::optional<Verdict> verdict_from_string(const std::string& s) {
    if (s == "support") return Verdict::support;
    if (s == "not_support" || s == "not support") return Verdict::not_support;
    if (s == "unverified") return Verdict::unverified;
    return std::nullopt;
}

struct StatementCitation {
    std::string statement;
    std::string url;
    Verdict verdict = Verdict::unverified;
    std::optional<std::string> evidence_note;
};

struct CitationAudit {
    std::string task_id;
    std::string model_name;
    std::vector<StatementCitation> unique_pairs;
    int supported_count = 0;
    double task_accuracy = 0.0;  // supported / unique pairs, 0 when no pairs
};

// Recomputes the derived counters from the pair list.
inline void finalize_audit(CitationAudit& audit) {
    int supported = 0;
    for (const auto& pair : audit.unique_pairs)
        if (pair.verdict == Verdict::support) ++supported;
    audit.supported_count = supported;
    audit.task_accuracy = audit.unique_pairs.empty()
                              ? 0.0
                              : static_cast<double>(supported) /
                                    static_cast<double>(audit.unique_pairs.size());
}

// ---------------------------------------------------------------------------
// Consistency statistics result

struct ConsistencyReport {
    double par = 0.0;  // pairwise agreement rate, [0,1]
    double opc = 0.0;  // overall Pearson correlation, [-1,1]
    std::map<std::string, double> per_task_icc;
    std::vector<std::string> retained_tasks;  // tasks with ICC >= 0
    double fap = 0.0;
    double fas = 0.0;
    double overall = 0.0;  // composite on the percent scale
};

// ---------------------------------------------------------------------------
// Weight arithmetic

// Rescales a weight map so it sums to 1. Input drift beyond 0.05 is reported
// as a warning; an already-normalized map is returned untouched so the
// operation is idempotent.
template <typename Key>
std::map<Key, double> normalize_weights(const std::map<Key, double>& weights) {
    if (weights.empty()) throw WeightError("normalize_weights: empty weight map");
    double sum = 0.0;
    for (const auto& [key, w] : weights) {
        if (!std::isfinite(w)) throw WeightError("normalize_weights: non-finite weight");
        if (w < 0.0) throw WeightError("normalize_weights: negative weight");
        sum += w;
    }
    if (sum <= 0.0) throw WeightError("normalize_weights: weights sum to zero");
    if (std::abs(sum - 1.0) > 0.05) {
        emit_warning("normalize_weights: weights sum to " + std::to_string(sum) +
                     ", rescaling to 1.0");
    }
    if (std::abs(sum - 1.0) <= 1e-12) return weights;
    std::map<Key, double> out;
    for (const auto& [key, w] : weights) out[key] = w / sum;
    return out;
}

// Validates structure and returns the rubric with every weight group
// normalized: dimension weights sum to 1, criterion weights sum to 1 per
// dimension, no dimension left without criteria.
inline EvaluationRubric validate_rubric(EvaluationRubric rubric) {
    if (rubric.dimension_weights.empty())
        throw RubricError("rubric has no dimension weights");
    for (const auto& [dim, w] : rubric.dimension_weights) {
        if (!std::isfinite(w)) throw RubricError("non-finite weight for dimension " + dimension_key(dim));
    }
    try {
        rubric.dimension_weights = normalize_weights(rubric.dimension_weights);
    } catch (const WeightError& e) {
        throw RubricError(std::string("dimension weights: ") + e.what());
    }
    for (auto& [dim, list] : rubric.criteria) {
        if (list.empty())
            throw RubricError("dimension " + dimension_key(dim) + " has no criteria");
        std::map<int, double> ws;
        for (size_t i = 0; i < list.size(); ++i) {
            if (!std::isfinite(list[i].weight))
                throw RubricError("non-finite criterion weight in " + dimension_key(dim));
            ws[static_cast<int>(i)] = list[i].weight;
        }
        std::map<int, double> normalized;
        try {
            normalized = normalize_weights(ws);
        } catch (const WeightError& e) {
            throw RubricError("criterion weights in " + dimension_key(dim) + ": " + e.what());
        }
        for (size_t i = 0; i < list.size(); ++i) list[i].weight = normalized[static_cast<int>(i)];
    }
    for (const auto& [dim, w] : rubric.dimension_weights) {
        if (rubric.criteria.find(dim) == rubric.criteria.end())
            throw RubricError("dimension " + dimension_key(dim) + " has no criteria");
    }
    return rubric;
}

// Clamps a judge score into [lo, hi], warning when the raw value was outside.
inline double clamp_score(double value, double lo = 0.0, double hi = 10.0) {
    if (!std::isfinite(value)) throw Error("clamp_score: non-finite score");
    if (value < lo || value > hi) {
        emit_warning("score " + std::to_string(value) + " outside [" +
                     std::to_string(lo) + "," + std::to_string(hi) + "], clamped");
        return std::min(hi, std::max(lo, value));
    }
    return value;
}

}  // namespace reval
