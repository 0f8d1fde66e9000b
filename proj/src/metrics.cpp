#include "rsrae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rsrae/error.hpp"

namespace rsrae {

namespace {

struct ClassCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("scores and labels differ in length: " + std::to_string(scores.size()) + " vs " +
                         std::to_string(labels.size()));
    }
    if (scores.empty()) throw ConfigError("no samples to evaluate");
    ClassCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            ++c.positives;
        } else if (labels[i] == 0) {
            ++c.negatives;
        } else {
            throw ConfigError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                              " is not 0 or 1");
        }
        if (!std::isfinite(scores[i])) throw NumericError("non-finite score at index " + std::to_string(i));
    }
    return c;
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

std::size_t ScoreReport::outlier_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    const auto counts = check_inputs(scores, labels);
    if (counts.positives == 0 || counts.negatives == 0) {
        throw ConfigError("roc_auc needs both inliers and outliers");
    }
    // Rank sum of positives with midranks for ties.
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[idx[k]] == 1) rank_sum += mid_rank;
        }
        i = j;
    }
    const double p = static_cast<double>(counts.positives);
    const double n = static_cast<double>(counts.negatives);
    const double u = rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * n);
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
    const auto counts = check_inputs(scores, labels);
    if (counts.positives == 0) throw ConfigError("average_precision needs at least one outlier");
    const auto idx = order_by_score_desc(scores);
    const double total = static_cast<double>(counts.positives);
    std::size_t tp = 0;
    std::size_t seen = 0;
    double prev_recall = 0.0;
    double ap = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            if (labels[idx[j]] == 1) ++tp;
            ++j;
        }
        seen = j;
        const double recall = static_cast<double>(tp) / total;
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

std::vector<int> threshold_labels(std::span<const double> scores, double threshold) {
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > threshold ? 1 : 0;
    return out;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
    const auto counts = check_inputs(scores, labels);
    if (counts.positives == 0 || counts.negatives == 0) {
        throw ConfigError("roc_curve needs both inliers and outliers");
    }
    const auto idx = order_by_score_desc(scores);
    std::vector<RocPoint> curve;
    curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] == 1 ? tp : fp)++;
            ++j;
        }
        curve.push_back({scores[idx[i]], static_cast<double>(fp) / static_cast<double>(counts.negatives),
                         static_cast<double>(tp) / static_cast<double>(counts.positives)});
        i = j;
    }
    return curve;
}

ScoreReport make_report(std::vector<double> scores, std::vector<int> labels, std::optional<std::uint64_t> seed) {
    ScoreReport r;
    r.scores = std::move(scores);
    r.labels = std::move(labels);
    r.seed = seed;
    if (!r.labels.empty()) {
        const auto counts = check_inputs(r.scores, r.labels);
        if (counts.positives > 0 && counts.negatives > 0) r.auc = roc_auc(r.scores, r.labels);
        if (counts.positives > 0) r.ap = average_precision(r.scores, r.labels);
    }
    return r;
}

nlohmann::json report_json(const ScoreReport& report) {
    nlohmann::json j;
    j["auc"] = report.auc ? nlohmann::json(*report.auc) : nlohmann::json(nullptr);
    j["ap"] = report.ap ? nlohmann::json(*report.ap) : nlohmann::json(nullptr);
    j["n"] = report.size();
    j["n_outliers"] = report.outlier_count();
    j["seed"] = report.seed ? nlohmann::json(*report.seed) : nlohmann::json(nullptr);
    return j;
}

}  // namespace rsrae
