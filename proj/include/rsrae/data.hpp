#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rsrae/tensor.hpp"

namespace rsrae {

struct ScoreReport;

struct LabeledDataset {
    Tensor x;                             // N x M
    std::vector<int> labels;              // 1 = outlier; empty when unlabeled
    std::vector<std::size_t> source_index;  // row i came from source row source_index[i]
    std::uint64_t seed = 0;
    std::string provenance;

    std::size_t size() const { return x.rows(); }
    std::size_t dim() const { return x.cols(); }
    bool has_labels() const { return !labels.empty(); }
    std::size_t outlier_count() const;
    void validate() const;
};

// Outliers injected relative to the inlier count: round(c * n_inliers).
struct CorruptionSpec {
    double outlier_ratio = 0.5;
    std::size_t n_inliers = 1000;

    std::size_t outlier_count() const;
    void validate() const;
};

inline constexpr double kSwissRollAngleMin = 1.5 * 3.14159265358979323846;
inline constexpr double kSwissRollAngleMax = 4.5 * 3.14159265358979323846;
inline constexpr double kSwissRollHeight = 21.0;

// (s, t) -> (t cos t, s, t sin t) with angle t and height s.
std::array<double, 3> swiss_roll_point(double s, double t);

// Angle t ~ U[3pi/2, 9pi/2], height s ~ U[0, 21]; all rows labeled inlier.
LabeledDataset swiss_roll(std::size_t n = 1000, std::uint64_t seed = 0);

// i.i.d. N(0, sigma^2 I) in R^dim; all rows labeled outlier.
LabeledDataset gaussian_outliers(std::size_t n = 500, double sigma = 2.0, std::uint64_t seed = 0,
                                 std::size_t dim = 3);

// Concatenates and shuffles; source_index maps back to the concatenated order.
LabeledDataset mix(const LabeledDataset& inliers, const std::optional<LabeledDataset>& outliers,
                   std::uint64_t shuffle_seed);

// Draws spec.outlier_count() rows without replacement from `pool` and mixes them in.
LabeledDataset corrupt(const LabeledDataset& inliers, const LabeledDataset& pool, const CorruptionSpec& spec,
                       std::uint64_t seed);

// Numeric CSV, optionally with an all-text header line and a final 0/1 label column.
LabeledDataset parse_csv(std::istream& in, bool has_labels, const std::string& source = "<stream>");
LabeledDataset load_csv(const std::string& path, bool has_labels);
void write_csv(std::ostream& out, const LabeledDataset& data);
void save_csv(const std::string& path, const LabeledDataset& data);

// Header "index,score,label"; label column empty when unknown.
void write_scores(std::ostream& out, const ScoreReport& report);
void save_scores(const std::string& path, const ScoreReport& report);
ScoreReport parse_scores(std::istream& in, const std::string& source = "<stream>");
ScoreReport load_scores(const std::string& path);

}  // namespace rsrae
