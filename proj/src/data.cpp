#include "rsrae/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rsrae/error.hpp"
#include "rsrae/format.hpp"
#include "rsrae/metrics.hpp"
#include "rsrae/rng.hpp"

namespace rsrae {

namespace {

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* begin = s.data();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

std::size_t LabeledDataset::outlier_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

void LabeledDataset::validate() const {
    if (x.rank() != 2) throw ShapeError("dataset must be an N x M matrix");
    if (!labels.empty() && labels.size() != x.rows()) {
        throw ShapeError("label count " + std::to_string(labels.size()) + " != row count " + std::to_string(x.rows()));
    }
    for (int l : labels)
        if (l != 0 && l != 1) throw ConfigError("labels must be 0 or 1");
    if (!source_index.empty() && source_index.size() != x.rows()) throw ShapeError("source index length mismatch");
    if (!x.all_finite()) throw NumericError("dataset contains NaN or Inf");
}

std::size_t CorruptionSpec::outlier_count() const {
    return static_cast<std::size_t>(std::llround(outlier_ratio * static_cast<double>(n_inliers)));
}

void CorruptionSpec::validate() const {
    if (!(outlier_ratio > 0.0 && outlier_ratio < 1.0)) {
        throw ConfigError("outlier ratio must lie in (0, 1), got " + std::to_string(outlier_ratio));
    }
    if (n_inliers == 0) throw ConfigError("corruption needs at least one inlier");
}

std::array<double, 3> swiss_roll_point(double s, double t) { return {t * std::cos(t), s, t * std::sin(t)}; }

LabeledDataset swiss_roll(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("swiss_roll needs n >= 1");
    Rng rng(seed);
    LabeledDataset out;
    out.x = Tensor(Shape{n, 3});
    for (std::size_t i = 0; i < n; ++i) {
        const double t = rng.uniform(kSwissRollAngleMin, kSwissRollAngleMax);
        const double s = rng.uniform(0.0, kSwissRollHeight);
        const auto p = swiss_roll_point(s, t);
        for (std::size_t j = 0; j < 3; ++j) out.x(i, j) = p[j];
    }
    out.labels.assign(n, 0);
    out.source_index.resize(n);
    std::iota(out.source_index.begin(), out.source_index.end(), std::size_t{0});
    out.seed = seed;
    out.provenance = "swiss_roll(n=" + std::to_string(n) + ")";
    return out;
}

LabeledDataset gaussian_outliers(std::size_t n, double sigma, std::uint64_t seed, std::size_t dim) {
    if (n == 0) throw ConfigError("gaussian_outliers needs n >= 1");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("gaussian_outliers needs sigma >= 0");
    if (dim == 0) throw ConfigError("gaussian_outliers needs dim >= 1");
    Rng rng(seed);
    LabeledDataset out;
    out.x = Tensor(Shape{n, dim});
    for (auto& v : out.x.data()) v = sigma * rng.normal();
    out.labels.assign(n, 1);
    out.source_index.resize(n);
    std::iota(out.source_index.begin(), out.source_index.end(), std::size_t{0});
    out.seed = seed;
    out.provenance = "gaussian_outliers(n=" + std::to_string(n) + ", sigma=" + format_double(sigma) + ")";
    return out;
}

LabeledDataset mix(const LabeledDataset& inliers, const std::optional<LabeledDataset>& outliers,
                   std::uint64_t shuffle_seed) {
    inliers.validate();
    const std::size_t m = inliers.dim();
    const std::size_t n_in = inliers.size();
    const std::size_t n_out = outliers ? outliers->size() : 0;
    if (outliers) {
        outliers->validate();
        if (outliers->dim() != m) {
            throw ShapeError("mix: inliers have " + std::to_string(m) + " columns, outliers " +
                             std::to_string(outliers->dim()));
        }
    }
    const std::size_t n = n_in + n_out;
    Rng rng(shuffle_seed);
    const auto perm = rng.permutation(n);

    LabeledDataset out;
    out.x = Tensor(Shape{n, m});
    out.labels.resize(n);
    out.source_index = perm;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = perm[i];
        const bool from_outliers = src >= n_in;
        const LabeledDataset& part = from_outliers ? *outliers : inliers;
        const std::size_t row = from_outliers ? src - n_in : src;
        for (std::size_t j = 0; j < m; ++j) out.x(i, j) = part.x(row, j);
        out.labels[i] = part.has_labels() ? part.labels[row] : (from_outliers ? 1 : 0);
    }
    out.seed = shuffle_seed;
    out.provenance = "mix(" + inliers.provenance + (outliers ? ", " + outliers->provenance : std::string()) + ")";
    return out;
}

LabeledDataset corrupt(const LabeledDataset& inliers, const LabeledDataset& pool, const CorruptionSpec& spec,
                       std::uint64_t seed) {
    spec.validate();
    const std::size_t k = spec.outlier_count();
    if (k > pool.size()) {
        throw ConfigError("outlier pool has " + std::to_string(pool.size()) + " rows, " + std::to_string(k) +
                          " requested");
    }
    if (k == 0) return mix(inliers, std::nullopt, seed);
    Rng rng(derive_seed(seed, 1));
    auto perm = rng.permutation(pool.size());
    perm.resize(k);
    LabeledDataset picked;
    picked.x = pool.x.gather_rows(perm);
    picked.labels.assign(k, 1);
    picked.source_index = perm;
    picked.provenance = pool.provenance;
    return mix(inliers, picked, seed);
}

LabeledDataset parse_csv(std::istream& in, bool has_labels, const std::string& source) {
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t width = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_cells(line);
        if (rows == 0 && width == 0) {
            const bool all_text = std::none_of(cells.begin(), cells.end(),
                                               [](const std::string& c) { return parse_number(c).has_value(); });
            if (all_text) continue;  // header
        }
        if (width == 0) {
            width = cells.size();
            if (has_labels && width < 2) {
                throw IoError(source + ": line " + std::to_string(line_no) + ": need a feature and a label column");
            }
        } else if (cells.size() != width) {
            throw IoError(source + ": line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                          " cells, found " + std::to_string(cells.size()));
        }
        const std::size_t features = has_labels ? width - 1 : width;
        for (std::size_t j = 0; j < features; ++j) {
            auto v = parse_number(cells[j]);
            if (!v) {
                throw IoError(source + ": line " + std::to_string(line_no) + ": non-numeric cell '" + trim(cells[j]) +
                              "' in column " + std::to_string(j + 1));
            }
            if (!std::isfinite(*v)) {
                throw IoError(source + ": line " + std::to_string(line_no) + ": non-finite value in column " +
                              std::to_string(j + 1));
            }
            values.push_back(*v);
        }
        if (has_labels) {
            const std::string cell = trim(cells.back());
            if (cell != "0" && cell != "1") {
                throw IoError(source + ": line " + std::to_string(line_no) + ": label '" + cell + "' is not 0 or 1");
            }
            labels.push_back(cell == "1" ? 1 : 0);
        }
        ++rows;
    }
    if (rows == 0) throw IoError(source + ": no data rows");
    LabeledDataset out;
    const std::size_t features = has_labels ? width - 1 : width;
    out.x = Tensor(Shape{rows, features}, std::move(values));
    out.labels = std::move(labels);
    out.source_index.resize(rows);
    std::iota(out.source_index.begin(), out.source_index.end(), std::size_t{0});
    out.provenance = "csv:" + source;
    return out;
}

LabeledDataset load_csv(const std::string& path, bool has_labels) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_csv(in, has_labels, path);
}

void write_csv(std::ostream& out, const LabeledDataset& data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < data.dim(); ++j) {
            if (j) out << ',';
            out << format_double(data.x(i, j));
        }
        if (data.has_labels()) out << ',' << data.labels[i];
        out << '\n';
    }
}

void save_csv(const std::string& path, const LabeledDataset& data) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_csv(out, data);
}

void write_scores(std::ostream& out, const ScoreReport& report) {
    if (!report.labels.empty() && report.labels.size() != report.scores.size()) {
        throw ShapeError("score report: label count differs from score count");
    }
    out << "index,score,label\n";
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        out << i << ',' << format_double(report.scores[i]) << ',';
        if (!report.labels.empty()) out << report.labels[i];
        out << '\n';
    }
}

void save_scores(const std::string& path, const ScoreReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_scores(out, report);
}

ScoreReport parse_scores(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "index,score,label") {
        throw IoError(source + ": expected header 'index,score,label'");
    }
    std::vector<double> scores;
    std::vector<int> labels;
    bool any_label = false, any_missing = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_cells(line);
        if (cells.size() != 3) {
            throw IoError(source + ": line " + std::to_string(line_no) + ": expected 3 cells");
        }
        auto s = parse_number(cells[1]);
        if (!s || !std::isfinite(*s)) {
            throw IoError(source + ": line " + std::to_string(line_no) + ": bad score '" + trim(cells[1]) + "'");
        }
        scores.push_back(*s);
        const std::string lab = trim(cells[2]);
        if (lab.empty()) {
            any_missing = true;
        } else if (lab == "0" || lab == "1") {
            any_label = true;
            labels.push_back(lab == "1" ? 1 : 0);
        } else {
            throw IoError(source + ": line " + std::to_string(line_no) + ": label '" + lab + "' is not 0 or 1");
        }
    }
    if (any_label && any_missing) throw IoError(source + ": labels present for some rows only");
    ScoreReport r;
    r.scores = std::move(scores);
    r.labels = std::move(labels);
    return r;
}

ScoreReport load_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_scores(in, path);
}

}  // namespace rsrae
