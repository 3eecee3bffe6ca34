#pragma once

// Meta-evaluation statistics comparing an automated scorer against human
// annotations: pairwise agreement, Pearson/Spearman correlation, one-way
// ICC(1,1) reliability filtering, and the composite consistency score.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "reval/core.hpp"

namespace reval {

struct AlignmentError : Error {
    using Error::Error;
};

struct DegenerateInputError : Error {
    using Error::Error;
};

struct FilterError : Error {
    using Error::Error;
};

// Scores from k raters for each of n reports on one task. Rows are reports,
// columns are raters.
struct HumanAnnotationMatrix {
    std::string task_id;
    std::vector<std::vector<double>> scores;
    std::vector<std::string> report_labels;

    size_t report_count() const { return scores.size(); }
    size_t rater_count() const { return scores.empty() ? 0 : scores[0].size(); }

    std::vector<double> rater_means() const {
        std::vector<double> means;
        means.reserve(scores.size());
        for (const auto& row : scores) {
            double sum = 0.0;
            for (double v : row) sum += v;
            means.push_back(sum / static_cast<double>(row.size()));
        }
        return means;
    }
};

struct MethodScores {
    std::string task_id;
    std::map<std::string, double> scores;  // model name -> score
};

namespace detail {

inline void check_matrix(const HumanAnnotationMatrix& m) {
    if (m.report_count() < 2 || m.rater_count() < 2)
        throw DegenerateInputError("annotation matrix needs at least 2 reports and 2 raters");
    for (const auto& row : m.scores) {
        if (row.size() != m.rater_count())
            throw DegenerateInputError("ragged annotation matrix for task " + m.task_id);
        for (double v : row)
            if (!std::isfinite(v))
                throw DegenerateInputError("non-finite annotation for task " + m.task_id);
    }
    if (!m.report_labels.empty() && m.report_labels.size() != m.report_count())
        throw DegenerateInputError("report labels do not match matrix rows");
}

// -1 / 0 / +1 ordering of a vs. b with an epsilon tie band.
inline int preference(double a, double b, double epsilon) {
    if (std::abs(a - b) <= epsilon) return 0;
    return a < b ? -1 : 1;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Correlations

inline double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw AlignmentError("pearson: length mismatch");
    const size_t n = x.size();
    if (n < 2) throw DegenerateInputError("pearson: need at least 2 points");
    double mean_x = 0.0, mean_y = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mean_x;
        const double dy = y[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0)
        throw DegenerateInputError("pearson: zero variance input");
    return sxy / std::sqrt(sxx * syy);
}

// Average ranks, ties sharing the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

inline double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw AlignmentError("spearman: length mismatch");
    if (x.size() < 2) throw DegenerateInputError("spearman: need at least 2 points");
    return pearson_correlation(average_ranks(x), average_ranks(y));
}

// ---------------------------------------------------------------------------
// ICC(1,1): one-way random effects, single rater

inline double icc_one_one(const HumanAnnotationMatrix& matrix) {
    detail::check_matrix(matrix);
    const size_t n = matrix.report_count();
    const size_t k = matrix.rater_count();

    double grand = 0.0;
    for (const auto& row : matrix.scores)
        for (double v : row) grand += v;
    grand /= static_cast<double>(n * k);

    double ss_between = 0.0;
    double ss_within = 0.0;
    for (const auto& row : matrix.scores) {
        double row_mean = 0.0;
        for (double v : row) row_mean += v;
        row_mean /= static_cast<double>(k);
        ss_between += (row_mean - grand) * (row_mean - grand);
        for (double v : row) ss_within += (v - row_mean) * (v - row_mean);
    }
    ss_between *= static_cast<double>(k);

    const double msb = ss_between / static_cast<double>(n - 1);
    const double msw = ss_within / static_cast<double>(n * (k - 1));
    const double denominator = msb + static_cast<double>(k - 1) * msw;
    if (denominator == 0.0)
        throw DegenerateInputError("icc: all annotations identical");
    return (msb - msw) / denominator;
}

// ---------------------------------------------------------------------------
// Pairwise agreement

namespace detail {

inline std::map<std::string, const HumanAnnotationMatrix*> index_by_task(
    const std::vector<HumanAnnotationMatrix>& matrices) {
    std::map<std::string, const HumanAnnotationMatrix*> out;
    for (const auto& m : matrices) out[m.task_id] = &m;
    return out;
}

// Method scores reordered to the matrix's report_labels.
inline std::vector<double> aligned_method_scores(const MethodScores& method,
                                                 const HumanAnnotationMatrix& human) {
    if (human.report_labels.empty())
        throw AlignmentError("annotation matrix for task " + human.task_id +
                             " carries no report labels");
    std::vector<double> out;
    out.reserve(human.report_labels.size());
    for (const auto& label : human.report_labels) {
        auto it = method.scores.find(label);
        if (it == method.scores.end())
            throw AlignmentError("method scores for task " + method.task_id +
                                 " are missing model " + label);
        out.push_back(it->second);
    }
    return out;
}

}  // namespace detail

// Fraction of report pairs, over all tasks, where the method's ordering
// matches the human ordering derived from rater-mean scores. Differences
// within epsilon count as ties; a pair agrees only when both sides give the
// same ordering (including tie vs. tie).
inline double pairwise_agreement_rate(const std::vector<MethodScores>& method,
                                      const std::vector<HumanAnnotationMatrix>& human,
                                      double epsilon = 1e-9) {
    if (method.empty() || human.empty())
        throw AlignmentError("pairwise_agreement_rate: empty input");
    if (epsilon < 0.0) throw AlignmentError("pairwise_agreement_rate: negative epsilon");
    auto by_task = detail::index_by_task(human);

    long long agreements = 0;
    long long total = 0;
    for (const auto& m : method) {
        auto it = by_task.find(m.task_id);
        if (it == by_task.end())
            throw AlignmentError("no human annotations for task " + m.task_id);
        const HumanAnnotationMatrix& matrix = *it->second;
        detail::check_matrix(matrix);
        const auto means = matrix.rater_means();
        const auto scores = detail::aligned_method_scores(m, matrix);
        for (size_t i = 0; i < scores.size(); ++i) {
            for (size_t j = i + 1; j < scores.size(); ++j) {
                const int hp = detail::preference(means[i], means[j], epsilon);
                const int mp = detail::preference(scores[i], scores[j], epsilon);
                if (hp == mp) ++agreements;
                ++total;
            }
        }
    }
    if (total == 0) throw AlignmentError("pairwise_agreement_rate: no report pairs");
    return static_cast<double>(agreements) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Overall Pearson: per-model means aggregated across all tasks

inline double overall_pearson(const std::vector<MethodScores>& method,
                              const std::vector<HumanAnnotationMatrix>& human) {
    auto by_task = detail::index_by_task(human);
    std::map<std::string, std::pair<double, int>> method_sum;
    std::map<std::string, std::pair<double, int>> human_sum;
    for (const auto& m : method) {
        auto it = by_task.find(m.task_id);
        if (it == by_task.end())
            throw AlignmentError("no human annotations for task " + m.task_id);
        const HumanAnnotationMatrix& matrix = *it->second;
        const auto means = matrix.rater_means();
        const auto scores = detail::aligned_method_scores(m, matrix);
        for (size_t i = 0; i < matrix.report_labels.size(); ++i) {
            auto& ms = method_sum[matrix.report_labels[i]];
            ms.first += scores[i];
            ms.second += 1;
            auto& hs = human_sum[matrix.report_labels[i]];
            hs.first += means[i];
            hs.second += 1;
        }
    }
    std::vector<double> x, y;
    for (const auto& [model, sum] : method_sum) {
        x.push_back(sum.first / sum.second);
        const auto& hs = human_sum.at(model);
        y.push_back(hs.first / hs.second);
    }
    return pearson_correlation(x, y);
}

// ---------------------------------------------------------------------------
// ICC-filtered per-task correlations

struct FilteredCorrelations {
    double fap = 0.0;
    double fas = 0.0;
    std::vector<std::string> retained;
    std::map<std::string, double> per_task_icc;
};

// Drops tasks whose raters disagree (ICC < 0, or degenerate), then averages
// per-task Pearson and Spearman between method scores and rater means.
inline FilteredCorrelations filtered_average_correlations(
    const std::vector<MethodScores>& method, const std::vector<HumanAnnotationMatrix>& human) {
    auto by_task = detail::index_by_task(human);
    FilteredCorrelations out;
    double pearson_sum = 0.0;
    double spearman_sum = 0.0;
    for (const auto& m : method) {
        auto it = by_task.find(m.task_id);
        if (it == by_task.end())
            throw AlignmentError("no human annotations for task " + m.task_id);
        const HumanAnnotationMatrix& matrix = *it->second;
        double icc;
        try {
            icc = icc_one_one(matrix);
        } catch (const DegenerateInputError&) {
            emit_warning("task " + m.task_id + " has a degenerate ICC, excluded from filtering");
            continue;
        }
        out.per_task_icc[m.task_id] = icc;
        if (icc < 0.0) continue;
        const auto means = matrix.rater_means();
        const auto scores = detail::aligned_method_scores(m, matrix);
        pearson_sum += pearson_correlation(scores, means);
        spearman_sum += spearman_correlation(scores, means);
        out.retained.push_back(m.task_id);
    }
    if (out.retained.empty())
        throw FilterError("no tasks retained after ICC filtering");
    out.fap = pearson_sum / static_cast<double>(out.retained.size());
    out.fas = spearman_sum / static_cast<double>(out.retained.size());
    return out;
}

// ---------------------------------------------------------------------------
// Composite

// Arithmetic mean of the four consistency metrics on the percent scale.
inline double overall_consistency_score(double par, double opc, double fap, double fas) {
    if (!std::isfinite(par) || !std::isfinite(opc) || !std::isfinite(fap) || !std::isfinite(fas))
        throw DegenerateInputError("overall_consistency_score: non-finite input");
    return (par + opc + fap + fas) / 4.0;
}

inline ConsistencyReport compute_consistency_report(
    const std::vector<MethodScores>& method, const std::vector<HumanAnnotationMatrix>& human,
    double epsilon = 1e-9) {
    ConsistencyReport report;
    report.par = pairwise_agreement_rate(method, human, epsilon);
    report.opc = overall_pearson(method, human);
    auto filtered = filtered_average_correlations(method, human);
    report.fap = filtered.fap;
    report.fas = filtered.fas;
    report.retained_tasks = filtered.retained;
    report.per_task_icc = filtered.per_task_icc;
    report.overall = overall_consistency_score(100.0 * report.par, 100.0 * report.opc,
                                               100.0 * report.fap, 100.0 * report.fas);
    return report;
}

// ---------------------------------------------------------------------------
// Annotation ingestion
//
// JSONL, one record per (task, rater, model): {"task_id", "rater", "model",
// "overall", ...}. Matrices are built from the overall scores with rows and
// columns in sorted label order.

inline std::vector<HumanAnnotationMatrix> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open annotation file: " + path.string());
    std::map<std::string, std::map<std::string, std::map<std::string, double>>> cells;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object())
            throw Error("malformed annotation record at line " + std::to_string(line_no));
        for (const char* field : {"task_id", "rater", "model", "overall"}) {
            if (!doc.contains(field))
                throw Error("annotation record at line " + std::to_string(line_no) +
                            " is missing field: " + std::string(field));
        }
        cells[doc["task_id"].get<std::string>()][doc["model"].get<std::string>()]
             [doc["rater"].get<std::string>()] = doc["overall"].get<double>();
    }

    std::vector<HumanAnnotationMatrix> matrices;
    for (const auto& [task_id, models] : cells) {
        std::set<std::string> raters;
        for (const auto& [model, by_rater] : models)
            for (const auto& [rater, score] : by_rater) raters.insert(rater);
        HumanAnnotationMatrix matrix;
        matrix.task_id = task_id;
        for (const auto& [model, by_rater] : models) {
            matrix.report_labels.push_back(model);
            std::vector<double> row;
            for (const auto& rater : raters) {
                auto it = by_rater.find(rater);
                if (it == by_rater.end())
                    throw Error("task " + task_id + ": model " + model +
                                " lacks a score from rater " + rater);
                row.push_back(it->second);
            }
            matrix.scores.push_back(std::move(row));
        }
        matrices.push_back(std::move(matrix));
    }
    return matrices;
}

// Method-score ingestion: JSONL records {"task_id", "model", "score"}.
inline std::vector<MethodScores> load_method_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open method score file: " + path.string());
    std::map<std::string, MethodScores> by_task;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("task_id") ||
            !doc.contains("model") || !doc.contains("score"))
            throw Error("malformed method score record at line " + std::to_string(line_no));
        auto& entry = by_task[doc["task_id"].get<std::string>()];
        entry.task_id = doc["task_id"].get<std::string>();
        entry.scores[doc["model"].get<std::string>()] = doc["score"].get<double>();
    }
    std::vector<MethodScores> out;
    for (auto& [task, scores] : by_task) out.push_back(std::move(scores));
    return out;
}

}  // namespace reval
