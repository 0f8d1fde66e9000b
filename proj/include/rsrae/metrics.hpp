#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace rsrae {

// Scores follow the distance convention: higher means more anomalous, and
// outliers (label 1) are the positive class.
struct ScoreReport {
    std::vector<double> scores;
    std::vector<int> labels;  // empty when ground truth is unknown
    std::optional<double> auc;
    std::optional<double> ap;
    std::optional<double> threshold;
    std::vector<int> predicted;  // filled when a threshold is set
    std::optional<std::uint64_t> seed;

    std::size_t size() const { return scores.size(); }
    std::size_t outlier_count() const;
};

// Mann-Whitney statistic P(outlier > inlier) + 0.5 P(tie), exact with ties.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Sum over distinct thresholds (descending) of (R_k - R_{k-1}) P_k.
double average_precision(std::span<const double> scores, std::span<const int> labels);

// 1 (outlier) iff score > threshold.
std::vector<int> threshold_labels(std::span<const double> scores, double threshold);

struct RocPoint {
    double threshold;  // points with score >= threshold are flagged
    double fpr;
    double tpr;
};

// Operating points from (0, 0) through every distinct score, descending.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

// Fills auc/ap when the labels allow it (auc needs both classes, ap a positive).
ScoreReport make_report(std::vector<double> scores, std::vector<int> labels,
                        std::optional<std::uint64_t> seed = std::nullopt);

// {auc, ap, n, n_outliers, seed}
nlohmann::json report_json(const ScoreReport& report);

}  // namespace rsrae
