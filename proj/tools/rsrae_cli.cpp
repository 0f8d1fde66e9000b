// rsrae: run / sweep / score / metrics.
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "rsrae/alloc.hpp"
#include "rsrae/data.hpp"
#include "rsrae/error.hpp"
#include "rsrae/experiment.hpp"
#include "rsrae/metrics.hpp"

using namespace rsrae;

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericExit = 3;

ExperimentConfig load_experiment(const std::string& path, bool paper_scale, const std::string& out,
                                 const std::vector<std::uint64_t>& seeds) {
    ConfigMap keys = path.empty() ? ConfigMap{} : load_config(path);
    if (!out.empty()) keys["run.out"] = out;
    if (!seeds.empty()) {
        std::string s;
        for (auto v : seeds) s += (s.empty() ? "" : ",") + std::to_string(v);
        keys["run.seeds"] = s;
    }
    return make_config(keys, paper_scale);
}

void print_summary(const ExperimentResult& r) {
    for (const auto& run : r.runs) {
        std::printf("seed %llu  %s", static_cast<unsigned long long>(run.seed), run.status.c_str());
        if (run.auc) std::printf("  auc %.4f", *run.auc);
        if (run.ap) std::printf("  ap %.4f", *run.ap);
        if (!run.error.empty()) std::printf("  (%s)", run.error.c_str());
        std::printf("\n");
    }
    const auto& m = r.metrics;
    if (!m["auc"]["mean"].is_null()) {
        std::printf("mean auc %.4f", m["auc"]["mean"].get<double>());
        if (!m["auc"]["sd"].is_null()) std::printf(" (sd %.4f)", m["auc"]["sd"].get<double>());
        std::printf("  mean ap %.4f", m["ap"]["mean"].get<double>());
        if (!m["ap"]["sd"].is_null()) std::printf(" (sd %.4f)", m["ap"]["sd"].get<double>());
        std::printf("\n");
    }
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"RSR-layer autoencoder and robust subspace baselines"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::vector<std::uint64_t> seeds;
    bool paper_scale = false;

    auto* run = app.add_subcommand("run", "train/fit on every seed and write artifacts + metrics.json");
    run->add_option("--config", config_path, "key = value config file");
    run->add_option("--out", out_dir, "output directory (overrides run.out)");
    run->add_option("--seed", seeds, "seed, repeatable (overrides run.seeds)");
    run->add_flag("--paper-scale", paper_scale, "Swiss roll: 10000 epochs instead of 2000");

    std::string axis, values;
    auto* sweep = app.add_subcommand("sweep", "run once per axis value and tabulate AUC/AP");
    sweep->add_option("--config", config_path, "key = value config file");
    sweep->add_option("--out", out_dir, "output directory (overrides run.out)");
    sweep->add_option("--seed", seeds, "seed, repeatable (overrides run.seeds)");
    sweep->add_flag("--paper-scale", paper_scale, "Swiss roll: 10000 epochs instead of 2000");
    sweep->add_option("--axis", axis, "d | learning_rate | lambda | outlier_ratio (or sweep.axis)");
    sweep->add_option("--values", values, "comma separated values (or sweep.values)");

    std::string ckpt, input, scores_out;
    bool labeled = false;
    auto* score = app.add_subcommand("score", "apply a saved checkpoint to a CSV");
    score->add_option("--checkpoint", ckpt, "model.ckpt or subspace.ckpt")->required();
    score->add_option("--input", input, "CSV data")->required();
    score->add_flag("--labels", labeled, "last CSV column is a 0/1 outlier label");
    score->add_option("--out", scores_out, "scores CSV (default stdout)");

    std::string scores_in;
    auto* metrics = app.add_subcommand("metrics", "recompute AUC/AP from a scores CSV");
    metrics->add_option("scores", scores_in, "scores CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigExit;
    }

    try {
        if (*run) {
            auto cfg = load_experiment(config_path, paper_scale, out_dir, seeds);
            auto res = run_experiment(cfg);
            print_summary(res);
            std::printf("wrote %s/metrics.json\n", cfg.out_dir.c_str());
            return res.ok ? 0 : kNumericExit;
        }
        if (*sweep) {
            ConfigMap keys = config_path.empty() ? ConfigMap{} : load_config(config_path);
            if (axis.empty() && keys.count("sweep.axis")) axis = keys.at("sweep.axis");
            if (values.empty() && keys.count("sweep.values")) values = keys.at("sweep.values");
            if (axis.empty() || values.empty()) throw ConfigError("sweep needs --axis and --values");
            auto cfg = load_experiment(config_path, paper_scale, out_dir, seeds);
            auto res = run_sweep(cfg, parse_axis(axis), parse_number_list(values, "sweep.values"));
            std::printf("wrote %s\n", res.table_path.c_str());
            return res.ok ? 0 : kNumericExit;
        }
        if (*score) {
            auto data = load_csv(input, labeled);
            auto report = make_report(score_with_checkpoint(ckpt, data.x), data.labels);
            if (scores_out.empty()) {
                write_scores(std::cout, report);
            } else {
                save_scores(scores_out, report);
            }
            if (report.auc) std::fprintf(stderr, "auc %.6f  ap %.6f\n", *report.auc, *report.ap);
            return 0;
        }
        if (*metrics) {
            auto report = load_scores(scores_in);
            auto j = report_json(make_report(report.scores, report.labels));
            std::cout << j.dump(2) << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigExit;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kConfigExit;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "shape error: %s\n", e.what());
        return kConfigExit;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kNumericExit;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
