#include "rsrae/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "rsrae/data.hpp"
#include "rsrae/error.hpp"
#include "rsrae/format.hpp"
#include "rsrae/losses.hpp"
#include "rsrae/metrics.hpp"
#include "rsrae/rng.hpp"

namespace fs = std::filesystem;

namespace rsrae {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ConfigError(key + ": expected a number, got '" + text + "'");
    }
    return v;
}

std::size_t to_count(const std::string& key, const std::string& text) {
    std::size_t v = 0;
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "off" || text == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + text + "'");
}

std::vector<std::size_t> to_widths(const std::string& key, const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto w = to_count(key, trim(item));
        if (w == 0) throw ConfigError(key + ": widths must be positive");
        out.push_back(w);
    }
    if (out.empty()) throw ConfigError(key + ": empty width list");
    return out;
}

ActivationSpec activation_from(const std::string& key, const std::string& name, double alpha) {
    try {
        return parse_activation(name, alpha);
    } catch (const ConfigError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

LabeledDataset select_rows(const LabeledDataset& src, int label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < src.labels.size(); ++i)
        if (src.labels[i] == label) idx.push_back(i);
    if (idx.empty()) throw ConfigError("dataset has no rows with label " + std::to_string(label));
    LabeledDataset out;
    out.x = src.x.gather_rows(idx);
    out.labels.assign(idx.size(), label);
    out.source_index = idx;
    out.provenance = src.provenance;
    return out;
}

LabeledDataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto& ds = cfg.dataset;
    if (ds.source == "swiss_roll") {
        auto inliers = swiss_roll(ds.n_inliers, derive_seed(seed, 1));
        std::size_t n_out = ds.n_outliers;
        if (ds.outlier_ratio) n_out = CorruptionSpec{*ds.outlier_ratio, ds.n_inliers}.outlier_count();
        std::optional<LabeledDataset> outliers;
        if (n_out > 0) outliers = gaussian_outliers(n_out, ds.outlier_sigma, derive_seed(seed, 2), 3);
        return mix(inliers, outliers, derive_seed(seed, 3));
    }
    auto data = load_csv(ds.path, ds.has_labels);
    if (ds.outlier_ratio) {
        if (!data.has_labels()) throw ConfigError("dataset.outlier_ratio needs a labeled CSV");
        auto inliers = select_rows(data, 0);
        auto pool = select_rows(data, 1);
        CorruptionSpec spec{*ds.outlier_ratio, inliers.size()};
        return corrupt(inliers, pool, spec, derive_seed(seed, 3));
    }
    return data;
}

void write_histogram(const std::string& path, const std::vector<double>& scores, const std::vector<int>& labels,
                     std::size_t bins) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it;
    double hi = *hi_it;
    if (hi <= lo) hi = lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<std::size_t> inl(bins), outl(bins), unl(bins);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        auto b = static_cast<std::size_t>((scores[i] - lo) / width);
        b = std::min(b, bins - 1);
        if (labels.empty()) ++unl[b];
        else if (labels[i] == 1) ++outl[b];
        else ++inl[b];
    }
    out << "bin_lo,bin_hi,inliers,outliers,unlabeled\n";
    for (std::size_t b = 0; b < bins; ++b) {
        out << format_double(lo + width * static_cast<double>(b)) << ','
            << format_double(b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1)) << ',' << inl[b] << ','
            << outl[b] << ',' << unl[b] << '\n';
    }
    if (!out) throw IoError("failed writing " + path);
}

Matrix center_rows(const Matrix& y, const Vector& center) { return y.rowwise() - center.transpose(); }

// Fits the configured linear baseline and returns (scores, checkpoint).
std::pair<std::vector<double>, SubspaceCheckpoint> fit_linear(const ExperimentConfig& cfg, const Matrix& y) {
    const std::size_t d = cfg.model.latent_dim;
    SubspaceCheckpoint ck;
    ck.method = method_name(cfg.method);
    switch (cfg.method) {
        case Method::Pca: {
            ck.center = y.colwise().mean().transpose();
            ck.basis = pca_subspace(center_rows(y, ck.center), d).basis;
            break;
        }
        case Method::Fms: {
            ck.center = coordinate_median(y);
            ck.basis = fms(center_rows(y, ck.center), d, cfg.fms).subspace.basis;
            break;
        }
        case Method::Sfms: {
            auto sph = spherical_normalize(y);
            ck.center = sph.center;
            ck.basis = fms(sph.points, d, cfg.fms).subspace.basis;
            break;
        }
        default: throw ConfigError("not a linear method: " + ck.method);
    }
    auto scores = residual_norms(Subspace{ck.basis}, center_rows(y, ck.center));
    return {scores, ck};
}

TrainResult train_network(const ExperimentConfig& cfg, AutoencoderModel& model, const Tensor& x,
                          std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    if (tc.batch_size == 0) tc.batch_size = x.rows();
    tc.seed = derive_seed(seed, 5);
    switch (cfg.method) {
        case Method::Rsrae: tc.mode = TrainMode::Rsrae; return train_rsrae(model, x, tc);
        case Method::RsraePlus: tc.mode = TrainMode::RsraePlus; return train_rsrae_plus(model, x, tc);
        case Method::Ae: tc.mode = TrainMode::PlainAe; return train_plain_ae(model, x, tc, 2);
        case Method::Ae1: tc.mode = TrainMode::PlainAe; return train_plain_ae(model, x, tc, 1);
        default: throw ConfigError("not a network method");
    }
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json config_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["mode"] = method_name(cfg.method);
    j["dataset"] = {{"source", cfg.dataset.source}};
    if (cfg.dataset.source == "swiss_roll") {
        j["dataset"]["n_inliers"] = cfg.dataset.n_inliers;
        j["dataset"]["n_outliers"] = cfg.dataset.n_outliers;
        j["dataset"]["outlier_sigma"] = cfg.dataset.outlier_sigma;
    } else {
        j["dataset"]["path"] = cfg.dataset.path;
    }
    if (cfg.dataset.outlier_ratio) j["dataset"]["outlier_ratio"] = *cfg.dataset.outlier_ratio;
    j["d"] = cfg.model.latent_dim;
    if (is_network(cfg.method)) {
        j["train"] = {{"epochs", cfg.train.epochs},
                      {"batch_size", cfg.train.batch_size},
                      {"learning_rate", cfg.train.learning_rate}};
        if (cfg.method == Method::RsraePlus) {
            j["train"]["lambda1"] = cfg.train.lambda1;
            j["train"]["lambda2"] = cfg.train.lambda2;
        }
    }
    return j;
}

}  // namespace

ConfigMap parse_config(std::istream& in, const std::string& source) {
    ConfigMap out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        if (!out.emplace(key, value).second) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }
    return out;
}

ConfigMap load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    return parse_config(in, path);
}

std::string method_name(Method m) {
    switch (m) {
        case Method::Rsrae: return "rsrae";
        case Method::RsraePlus: return "rsrae_plus";
        case Method::Ae: return "ae";
        case Method::Ae1: return "ae1";
        case Method::Pca: return "pca";
        case Method::Fms: return "fms";
        case Method::Sfms: return "sfms";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    for (auto m : {Method::Rsrae, Method::RsraePlus, Method::Ae, Method::Ae1, Method::Pca, Method::Fms, Method::Sfms})
        if (method_name(m) == name) return m;
    throw ConfigError("mode: unknown method '" + name + "' (rsrae, rsrae_plus, ae, ae1, pca, fms, sfms)");
}

bool is_network(Method m) { return m == Method::Rsrae || m == Method::RsraePlus || m == Method::Ae || m == Method::Ae1; }

void ExperimentConfig::validate() const {
    if (dataset.source != "swiss_roll" && dataset.source != "csv") {
        throw ConfigError("dataset.source: expected swiss_roll or csv, got '" + dataset.source + "'");
    }
    if (dataset.source == "csv" && dataset.path.empty()) throw ConfigError("dataset.path: required for csv data");
    if (dataset.source == "swiss_roll") {
        if (dataset.n_inliers == 0) throw ConfigError("dataset.n_inliers: must be positive");
        if (!(dataset.outlier_sigma > 0.0)) throw ConfigError("dataset.outlier_sigma: must be positive");
    }
    if (dataset.outlier_ratio && !(*dataset.outlier_ratio >= 0.0)) {
        throw ConfigError("dataset.outlier_ratio: must be non-negative");
    }
    if (seeds.empty()) throw ConfigError("run.seeds: at least one seed is required");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ConfigError("run.seeds: duplicate seed");
    }
    if (histogram_bins == 0) throw ConfigError("run.histogram_bins: must be positive");
    if (model.latent_dim == 0) throw ConfigError("model.d: must be positive");
    if (is_network(method)) {
        if (model.encoder_widths.empty()) throw ConfigError("model.encoder_widths: empty");
        if (model.latent_dim >= model.encoder_widths.back()) {
            throw ConfigError("model.d: must be smaller than the encoder output width " +
                              std::to_string(model.encoder_widths.back()));
        }
        if (train.epochs == 0) throw ConfigError("train.epochs: must be at least 1");
        if (!(train.learning_rate > 0.0)) throw ConfigError("train.learning_rate: must be positive");
        if (train.lambda1 < 0.0 || train.lambda2 < 0.0) throw ConfigError("train.lambda1/lambda2: must be >= 0");
    } else if (!(fms.delta > 0.0)) {
        throw ConfigError("fms.delta: must be positive");
    }
}

ExperimentConfig make_config(const ConfigMap& keys, bool paper_scale) {
    ExperimentConfig cfg;
    std::set<std::string> used;
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto it = keys.find(k);
        if (it == keys.end()) return std::nullopt;
        used.insert(k);
        return it->second;
    };

    if (auto v = get("dataset.source")) cfg.dataset.source = *v;
    const bool swiss = cfg.dataset.source == "swiss_roll";
    if (swiss) {
        cfg.model = swiss_roll_model_spec();
        cfg.train.learning_rate = 0.01;
        cfg.train.epochs = paper_scale ? 10000 : 2000;
        cfg.train.batch_size = kSwissRollBatch;
    } else {
        cfg.model = dense_model_spec(1);
        cfg.train.learning_rate = 0.00025;
        cfg.train.epochs = 200;
        cfg.train.batch_size = 128;
    }

    if (auto v = get("mode")) cfg.method = parse_method(*v);
    if (auto v = get("dataset.n_inliers")) cfg.dataset.n_inliers = to_count("dataset.n_inliers", *v);
    if (auto v = get("dataset.n_outliers")) cfg.dataset.n_outliers = to_count("dataset.n_outliers", *v);
    if (auto v = get("dataset.outlier_ratio")) cfg.dataset.outlier_ratio = to_double("dataset.outlier_ratio", *v);
    if (auto v = get("dataset.outlier_sigma")) cfg.dataset.outlier_sigma = to_double("dataset.outlier_sigma", *v);
    if (auto v = get("dataset.path")) cfg.dataset.path = *v;
    if (auto v = get("dataset.has_labels")) cfg.dataset.has_labels = to_bool("dataset.has_labels", *v);

    double alpha = 0.2;
    if (auto v = get("model.leaky_alpha")) alpha = to_double("model.leaky_alpha", *v);
    if (auto v = get("model.encoder_widths")) cfg.model.encoder_widths = to_widths("model.encoder_widths", *v);
    if (auto v = get("model.decoder_widths")) cfg.model.decoder_widths = to_widths("model.decoder_widths", *v);
    if (auto v = get("model.d")) cfg.model.latent_dim = to_count("model.d", *v);
    if (auto v = get("model.activation")) cfg.model.activation = activation_from("model.activation", *v, alpha);
    if (auto v = get("model.output_activation")) {
        cfg.model.output_activation = activation_from("model.output_activation", *v, alpha);
    }
    if (auto v = get("model.batch_norm")) cfg.model.batch_norm = to_bool("model.batch_norm", *v);
    if (auto v = get("model.normalize_latent")) cfg.model.normalize_latent = to_bool("model.normalize_latent", *v);

    if (auto v = get("train.epochs")) {
        cfg.train.epochs = to_count("train.epochs", *v);
        cfg.epochs_given = true;
    }
    if (paper_scale && swiss) cfg.train.epochs = 10000;
    if (auto v = get("train.batch_size")) {
        cfg.train.batch_size = *v == "full" ? 0 : to_count("train.batch_size", *v);
        if (*v != "full" && cfg.train.batch_size == 0) throw ConfigError("train.batch_size: must be positive or 'full'");
    }
    if (auto v = get("train.learning_rate")) cfg.train.learning_rate = to_double("train.learning_rate", *v);
    if (auto v = get("train.eps_ae")) cfg.train.eps_ae = to_double("train.eps_ae", *v);
    if (auto v = get("train.eps_rsr1")) cfg.train.eps_rsr1 = to_double("train.eps_rsr1", *v);
    if (auto v = get("train.eps_rsr2")) cfg.train.eps_rsr2 = to_double("train.eps_rsr2", *v);
    if (auto v = get("train.lambda1")) cfg.train.lambda1 = to_double("train.lambda1", *v);
    if (auto v = get("train.lambda2")) cfg.train.lambda2 = to_double("train.lambda2", *v);
    if (auto v = get("train.shuffle")) cfg.train.shuffle = to_bool("train.shuffle", *v);
    if (auto v = get("train.separate_adam_moments")) {
        cfg.train.separate_adam_moments = to_bool("train.separate_adam_moments", *v);
    }

    if (auto v = get("fms.delta")) cfg.fms.delta = to_double("fms.delta", *v);
    if (auto v = get("fms.max_iters")) cfg.fms.max_iters = to_count("fms.max_iters", *v);
    if (auto v = get("fms.tol")) cfg.fms.tol = to_double("fms.tol", *v);

    if (auto v = get("run.seeds")) {
        cfg.seeds.clear();
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.seeds.push_back(to_count("run.seeds", trim(item)));
    }
    if (auto v = get("run.out")) cfg.out_dir = *v;
    if (auto v = get("run.histogram_bins")) cfg.histogram_bins = to_count("run.histogram_bins", *v);
    // Read by the sweep command.
    get("sweep.axis");
    get("sweep.values");

    for (const auto& [k, v] : keys) {
        if (!used.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
    if (cfg.method == Method::RsraePlus) cfg.train.mode = TrainMode::RsraePlus;
    cfg.validate();
    return cfg;
}

MeanSd mean_sd(const std::vector<double>& values) {
    MeanSd out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const fs::path root(config.out_dir);
    fs::create_directories(root);

    ExperimentResult result;
    for (auto seed : config.seeds) {
        RunRecord rec;
        rec.seed = seed;
        const fs::path dir = root / seed_dir_name(seed);
        fs::create_directories(dir);
        auto rel = [&](const std::string& file) { return (fs::path(seed_dir_name(seed)) / file).generic_string(); };
        try {
            LabeledDataset data = make_dataset(config, seed);
            data.validate();
            rec.n = data.size();
            rec.n_outliers = data.outlier_count();
            std::vector<double> scores;
            if (is_network(config.method)) {
                ModelSpec spec = config.model;
                spec.input_dim = data.dim();
                auto model = init_model(spec, derive_seed(seed, 4));
                auto history = train_network(config, model, data.x, seed).history;
                save_loss_history((dir / "loss.csv").string(), history);
                rec.artifacts["loss"] = rel("loss.csv");
                save_model((dir / "model.ckpt").string(), model);
                rec.artifacts["checkpoint"] = rel("model.ckpt");
                scores = anomaly_scores(data.x, model_forward(model, data.x).output);
            } else {
                auto [s, ck] = fit_linear(config, to_matrix(data.x));
                save_subspace((dir / "subspace.ckpt").string(), ck);
                rec.artifacts["checkpoint"] = rel("subspace.ckpt");
                scores = std::move(s);
            }
            auto report = make_report(scores, data.labels, seed);
            save_scores((dir / "scores.csv").string(), report);
            rec.artifacts["scores"] = rel("scores.csv");
            write_histogram((dir / "histogram.csv").string(), scores, data.labels, config.histogram_bins);
            rec.artifacts["histogram"] = rel("histogram.csv");
            rec.auc = report.auc;
            rec.ap = report.ap;
        } catch (const NumericError& e) {
            rec.status = "failed";
            rec.error = e.what();
            result.ok = false;
        }
        result.runs.push_back(rec);
        if (!result.ok) break;
    }

    std::vector<double> aucs, aps;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : result.runs) {
        if (r.auc) aucs.push_back(*r.auc);
        if (r.ap) aps.push_back(*r.ap);
        nlohmann::json j = {{"seed", r.seed},       {"status", r.status}, {"auc", opt_json(r.auc)},
                            {"ap", opt_json(r.ap)}, {"n", r.n},           {"n_outliers", r.n_outliers},
                            {"artifacts", r.artifacts}};
        if (!r.error.empty()) j["error"] = r.error;
        runs.push_back(j);
    }
    auto summary = [](const std::vector<double>& v) {
        if (v.empty()) return nlohmann::json{{"mean", nullptr}, {"sd", nullptr}, {"count", 0}};
        auto ms = mean_sd(v);
        return nlohmann::json{{"mean", ms.mean}, {"sd", opt_json(ms.sd)}, {"count", v.size()}};
    };
    auto& m = result.metrics;
    m["status"] = result.ok ? "ok" : "failed";
    m["config"] = config_json(config);
    m["seeds"] = config.seeds;
    m["auc"] = summary(aucs);
    m["ap"] = summary(aps);
    m["runs"] = runs;

    std::ofstream out(root / "metrics.json");
    if (!out) throw IoError("cannot write " + (root / "metrics.json").string());
    out << m.dump(2) << "\n";
    return result;
}

SweepAxis parse_axis(const std::string& name) {
    if (name == "d") return SweepAxis::D;
    if (name == "learning_rate" || name == "lr") return SweepAxis::LearningRate;
    if (name == "lambda" || name == "lambda1xlambda2") return SweepAxis::Lambda;
    if (name == "outlier_ratio") return SweepAxis::OutlierRatio;
    throw ConfigError("sweep axis '" + name + "' (d, learning_rate, lambda, outlier_ratio)");
}

std::string axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::D: return "d";
        case SweepAxis::LearningRate: return "learning_rate";
        case SweepAxis::Lambda: return "lambda";
        case SweepAxis::OutlierRatio: return "outlier_ratio";
    }
    return "?";
}

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(what, trim(item)));
    if (out.empty()) throw ConfigError(what + ": empty value list");
    return out;
}

SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("sweep: no values");
    if (axis == SweepAxis::Lambda && base.method != Method::RsraePlus) {
        throw ConfigError("sweep: the lambda axis needs mode = rsrae_plus");
    }
    if (axis == SweepAxis::LearningRate && !is_network(base.method)) {
        throw ConfigError("sweep: the learning_rate axis needs a network mode");
    }
    if (axis == SweepAxis::OutlierRatio && base.dataset.source == "csv" && !base.dataset.has_labels) {
        throw ConfigError("sweep: the outlier_ratio axis needs labeled data");
    }

    struct Point {
        std::vector<double> coords;
        ExperimentConfig cfg;
    };
    std::vector<Point> points;
    auto label = [](double v) { return format_double(v); };
    const fs::path root(base.out_dir);
    if (axis == SweepAxis::Lambda) {
        for (double l1 : values)
            for (double l2 : values) {
                ExperimentConfig c = base;
                c.train.lambda1 = l1;
                c.train.lambda2 = l2;
                c.out_dir = (root / ("lambda1=" + label(l1) + "_lambda2=" + label(l2))).string();
                points.push_back({{l1, l2}, c});
            }
    } else {
        for (double v : values) {
            ExperimentConfig c = base;
            switch (axis) {
                case SweepAxis::D:
                    if (v < 1.0 || v != std::floor(v)) throw ConfigError("sweep: d values must be positive integers");
                    c.model.latent_dim = static_cast<std::size_t>(v);
                    break;
                case SweepAxis::LearningRate: c.train.learning_rate = v; break;
                case SweepAxis::OutlierRatio: c.dataset.outlier_ratio = v; break;
                default: break;
            }
            c.out_dir = (root / (axis_name(axis) + "=" + label(v))).string();
            c.validate();
            points.push_back({{v}, c});
        }
    }

    fs::create_directories(root);
    SweepResult sr;
    sr.table_path = (root / ("sweep_" + axis_name(axis) + ".csv")).string();
    std::ofstream table(sr.table_path);
    if (!table) throw IoError("cannot write " + sr.table_path);
    table << (axis == SweepAxis::Lambda ? "lambda1,lambda2" : "value") << ",auc_mean,auc_sd,ap_mean,ap_sd\n";
    auto field = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& p : points) {
        auto res = run_experiment(p.cfg);
        std::vector<double> aucs, aps;
        for (const auto& r : res.runs) {
            if (r.auc) aucs.push_back(*r.auc);
            if (r.ap) aps.push_back(*r.ap);
        }
        for (std::size_t i = 0; i < p.coords.size(); ++i) table << (i ? "," : "") << format_double(p.coords[i]);
        auto a = mean_sd(aucs);
        auto b = mean_sd(aps);
        table << ',' << (aucs.empty() ? "" : format_double(a.mean)) << ',' << field(a.sd) << ','
              << (aps.empty() ? "" : format_double(b.mean)) << ',' << field(b.sd) << '\n';
        if (!res.ok) {
            sr.ok = false;
            break;
        }
    }
    return sr;
}

void save_subspace(const std::string& path, const SubspaceCheckpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "RSRAE-SUBSPACE 1\nmethod " << ck.method << "\nend\n";
    write_tensor(out, to_tensor(ck.basis));
    write_tensor(out, Tensor::vector(std::vector<double>(ck.center.data(), ck.center.data() + ck.center.size())));
    if (!out) throw IoError("failed writing " + path);
}

SubspaceCheckpoint load_subspace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "RSRAE-SUBSPACE 1") throw IoError(path + ": not a subspace checkpoint");
    SubspaceCheckpoint ck;
    if (!std::getline(in, line) || line.rfind("method ", 0) != 0) throw IoError(path + ": missing method line");
    ck.method = line.substr(7);
    if (!std::getline(in, line) || line != "end") throw IoError(path + ": missing header terminator");
    ck.basis = to_matrix(read_tensor(in));
    const Tensor c = read_tensor(in);
    if (c.rank() != 1 || c.size() != static_cast<std::size_t>(ck.basis.rows())) {
        throw IoError(path + ": center does not match the basis");
    }
    ck.center = Vector(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) ck.center(static_cast<Eigen::Index>(i)) = c[i];
    Subspace{ck.basis}.validate(1e-8);
    return ck;
}

std::vector<double> score_with_checkpoint(const std::string& path, const Tensor& x) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string header;
    std::getline(in, header);
    in.close();
    if (header == "RSRAE-MODEL 1") {
        const auto model = load_model(path);
        if (x.cols() != model.input_dim()) {
            throw ShapeError("data has " + std::to_string(x.cols()) + " columns, model expects " +
                             std::to_string(model.input_dim()));
        }
        return anomaly_scores(x, model_forward(model, x).output);
    }
    if (header == "RSRAE-SUBSPACE 1") {
        const auto ck = load_subspace(path);
        const Matrix y = to_matrix(x);
        if (y.cols() != ck.basis.rows()) {
            throw ShapeError("data has " + std::to_string(y.cols()) + " columns, subspace lives in R^" +
                             std::to_string(ck.basis.rows()));
        }
        return residual_norms(Subspace{ck.basis}, center_rows(y, ck.center));
    }
    throw IoError(path + ": unrecognized checkpoint header");
}

}  // namespace rsrae
