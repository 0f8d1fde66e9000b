#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsrae/linear_rsr.hpp"
#include "rsrae/net.hpp"
#include "rsrae/optim.hpp"

namespace rsrae {

// Flat "key = value" text; '#' starts a comment. Keys keep their dotted section
// prefix ("model.d"). Duplicate keys are an error.
using ConfigMap = std::map<std::string, std::string>;
ConfigMap parse_config(std::istream& in, const std::string& source = "<config>");
ConfigMap load_config(const std::string& path);

// Swiss-roll batch size; 0 means the whole data set per step.
inline constexpr std::size_t kSwissRollBatch = 0;

enum class Method { Rsrae, RsraePlus, Ae, Ae1, Pca, Fms, Sfms };
std::string method_name(Method m);
Method parse_method(const std::string& name);
bool is_network(Method m);

struct DatasetConfig {
    std::string source = "swiss_roll";  // or "csv"
    std::size_t n_inliers = 1000;
    std::size_t n_outliers = 500;
    std::optional<double> outlier_ratio;  // overrides n_outliers: round(ratio * n_inliers)
    double outlier_sigma = 2.0;
    std::string path;
    bool has_labels = true;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    ModelSpec model;  // input_dim is filled from the data
    TrainConfig train;
    Method method = Method::Rsrae;
    FmsOptions fms;
    std::vector<std::uint64_t> seeds{0};
    std::string out_dir = "out";
    std::size_t histogram_bins = 40;
    bool epochs_given = false;

    void validate() const;
};

// Builds a config from parsed keys. Unknown keys are rejected. Swiss roll
// defaults to the leaky 32-64-128 | 2 | 128-64-32 network with lr 0.01 and
// 2000 epochs (10000 with paper_scale); CSV data defaults to the dense tanh
// network with lr 0.00025, batch 128, 200 epochs.
ExperimentConfig make_config(const ConfigMap& keys, bool paper_scale = false);

struct RunRecord {
    std::uint64_t seed = 0;
    std::string status = "ok";  // "ok" or "failed"
    std::string error;
    std::optional<double> auc;
    std::optional<double> ap;
    std::size_t n = 0;
    std::size_t n_outliers = 0;
    std::map<std::string, std::string> artifacts;  // role -> path relative to out_dir
};

struct ExperimentResult {
    std::vector<RunRecord> runs;
    bool ok = true;
    nlohmann::json metrics;
};

// One run per seed under config.out_dir/seed_<s>/, then metrics.json.
// Training failures stop the loop and are recorded; result.ok is false.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Mean and sample standard deviation (n - 1); sd is absent below two values.
struct MeanSd {
    double mean = 0.0;
    std::optional<double> sd;
};
MeanSd mean_sd(const std::vector<double>& values);

enum class SweepAxis { D, LearningRate, Lambda, OutlierRatio };
SweepAxis parse_axis(const std::string& name);
std::string axis_name(SweepAxis a);

struct SweepResult {
    bool ok = true;
    std::string table_path;
};

// For the lambda axis every pair (l1, l2) of `values` is run.
SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values);

std::vector<double> parse_number_list(const std::string& text, const std::string& what);

// Saved linear baseline: orthonormal basis plus the center subtracted before projecting.
struct SubspaceCheckpoint {
    std::string method;
    Matrix basis;
    Vector center;
};
void save_subspace(const std::string& path, const SubspaceCheckpoint& ckpt);
SubspaceCheckpoint load_subspace(const std::string& path);

// Scores rows of x with either kind of checkpoint, detected from the file header.
std::vector<double> score_with_checkpoint(const std::string& checkpoint_path, const Tensor& x);

}  // namespace rsrae
