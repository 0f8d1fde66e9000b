#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "rsrae/data.hpp"
#include "rsrae/error.hpp"
#include "rsrae/experiment.hpp"
#include "rsrae/format.hpp"
#include "rsrae/linear_rsr.hpp"
#include "rsrae/metrics.hpp"

using namespace rsrae;
namespace fs = std::filesystem;

namespace {

ConfigMap parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("rsrae_test_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig small(const std::string& mode, const fs::path& out, const std::string& extra = "") {
    auto cfg = make_config(parse("mode = " + mode +
                                 "\ndataset.n_inliers = 60\ndataset.n_outliers = 30\n"
                                 "train.epochs = 4\nrun.seeds = 3, 8\nrun.histogram_bins = 7\n" +
                                 extra));
    cfg.out_dir = out.string();
    return cfg;
}

}  // namespace

TEST_CASE("config text parsing") {
    auto keys = parse("# header\n  mode = fms  # trailing\n\nmodel.d=3\n");
    CHECK(keys.size() == 2);
    CHECK(keys.at("mode") == "fms");
    CHECK(keys.at("model.d") == "3");
    CHECK_THROWS_AS(parse("mode = fms\nmode = pca\n"), ConfigError);
    CHECK_THROWS_AS(parse("just words\n"), ConfigError);
    CHECK_THROWS_AS(parse(" = 3\n"), ConfigError);
    try {
        parse("a = 1\nb\n");
        FAIL("no throw");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    CHECK_THROWS_AS(load_config("/nonexistent/rsrae.cfg"), IoError);
}

TEST_CASE("config values") {
    auto cfg = make_config(parse("mode = rsrae\n"));
    CHECK(cfg.train.learning_rate == 0.01);
    CHECK(cfg.train.epochs == 2000);
    CHECK(cfg.model.latent_dim == 2);
    CHECK(make_config(parse("mode = rsrae\n"), true).train.epochs == 10000);
    CHECK(make_config(parse("mode = rsrae\ntrain.epochs = 7\n"), true).train.epochs == 10000);
    CHECK(make_config(parse("mode = rsrae_plus\n")).train.mode == TrainMode::RsraePlus);
    CHECK(make_config(parse("mode = ae\ntrain.batch_size = full\n")).train.batch_size == 0);
    auto seeds = make_config(parse("mode = pca\nrun.seeds = 4, 9,1\n")).seeds;
    CHECK(seeds == std::vector<std::uint64_t>{4, 9, 1});

    CHECK_THROWS_AS(make_config(parse("mode = bogus\n")), ConfigError);
    CHECK_THROWS_AS(make_config(parse("mode = pca\nmodel.dd = 2\n")), ConfigError);
    CHECK_THROWS_AS(make_config(parse("mode = pca\nmodel.d = two\n")), ConfigError);
    CHECK_THROWS_AS(make_config(parse("mode = pca\nmodel.d = 2x\n")), ConfigError);
    CHECK_THROWS_AS(make_config(parse("mode = ae\ntrain.learning_rate = -1\n")), ConfigError);
    CHECK_THROWS_AS(make_config(parse("mode = pca\nmodel.d = 0\n")), ConfigError);
    CHECK_THROWS_AS(make_config(parse("mode = pca\ndataset.source = csv\n")), ConfigError);
}

TEST_CASE("method names round trip") {
    for (auto m : {Method::Rsrae, Method::RsraePlus, Method::Ae, Method::Ae1, Method::Pca, Method::Fms, Method::Sfms})
        CHECK(parse_method(method_name(m)) == m);
    CHECK(is_network(Method::Ae1));
    CHECK_FALSE(is_network(Method::Sfms));
}

TEST_CASE("mean and sample sd") {
    auto a = mean_sd({1, 2, 3, 4});
    CHECK(a.mean == 2.5);
    CHECK(*a.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK_FALSE(mean_sd({0.7}).sd.has_value());
    CHECK(mean_sd({0.7}).mean == 0.7);
}

TEST_CASE("number lists") {
    CHECK(parse_number_list("1, 2.5,1e-3", "x") == std::vector<double>{1, 2.5, 1e-3});
    CHECK_THROWS_AS(parse_number_list("1,,2", "x"), ConfigError);
    CHECK_THROWS_AS(parse_number_list("", "x"), ConfigError);
}

TEST_CASE("network run writes a consistent manifest") {
    auto out = scratch("manifest");
    auto res = run_experiment(small("rsrae", out));
    REQUIRE(res.ok);
    REQUIRE(res.runs.size() == 2);

    auto m = nlohmann::json::parse(slurp(out / "metrics.json"));
    CHECK(m["status"] == "ok");
    CHECK(m["seeds"] == nlohmann::json::array({3, 8}));
    std::vector<double> aucs;
    for (const auto& r : m["runs"]) {
        CHECK(r["n"] == 90);
        CHECK(r["n_outliers"] == 30);
        for (const auto& [role, rel] : r["artifacts"].items()) CHECK(fs::exists(out / rel.get<std::string>()));
        for (const char* role : {"loss", "checkpoint", "scores", "histogram"}) CHECK(r["artifacts"].contains(role));

        auto dir = out / ("seed_" + std::to_string(r["seed"].get<int>()));
        auto report = load_scores((dir / "scores.csv").string());
        CHECK(report.size() == 90);
        CHECK(std::abs(oracle::auc(report.scores, report.labels) - r["auc"].get<double>()) < 1e-12);
        aucs.push_back(r["auc"].get<double>());
    }
    auto ms = mean_sd(aucs);
    CHECK(m["auc"]["mean"].get<double>() == doctest::Approx(ms.mean).epsilon(1e-14));
    CHECK(m["auc"]["sd"].get<double>() == doctest::Approx(*ms.sd).epsilon(1e-14));
    CHECK(m["auc"]["count"] == 2);

    std::istringstream hist(slurp(out / "seed_3" / "histogram.csv"));
    std::string line;
    std::getline(hist, line);
    CHECK(line == "bin_lo,bin_hi,inliers,outliers,unlabeled");
    int rows = 0, in = 0, outl = 0;
    while (std::getline(hist, line)) {
        ++rows;
        double lo, hi;
        int a, b, c;
        char comma;
        std::istringstream ls(line);
        ls >> lo >> comma >> hi >> comma >> a >> comma >> b >> comma >> c;
        CHECK(lo <= hi);
        in += a;
        outl += b;
        CHECK(c == 0);
    }
    CHECK(rows == 7);
    CHECK(in == 60);
    CHECK(outl == 30);
    fs::remove_all(out);
}

TEST_CASE("checkpoints rescore csv data") {
    auto out = scratch("rescore");
    fs::create_directories(out);
    auto inl = swiss_roll(50, 1);
    auto pool = gaussian_outliers(20, 2.0, 2);
    auto data = mix(inl, pool, 3);
    const auto csv = (out / "data.csv").string();
    save_csv(csv, data);

    for (const char* mode : {"ae", "rsrae_plus", "pca", "fms", "sfms"}) {
        CAPTURE(mode);
        auto cfg = make_config(parse(std::string("mode = ") + mode + "\ndataset.source = csv\ndataset.path = " + csv +
                                     "\nmodel.d = 2\ntrain.epochs = 3\ntrain.batch_size = 16\n"));
        cfg.out_dir = (out / mode).string();
        auto res = run_experiment(cfg);
        REQUIRE(res.ok);
        auto dir = out / mode / "seed_0";
        auto saved = load_scores((dir / "scores.csv").string());
        CHECK(saved.labels == data.labels);
        auto ckpt = dir / (is_network(parse_method(mode)) ? "model.ckpt" : "subspace.ckpt");
        auto again = score_with_checkpoint(ckpt.string(), load_csv(csv, true).x);
        REQUIRE(again.size() == saved.size());
        double worst = 0;
        for (std::size_t i = 0; i < again.size(); ++i)
            worst = std::max(worst, std::abs(again[i] - saved.scores[i]) / (1 + std::abs(saved.scores[i])));
        CHECK(worst < 1e-12);
    }
    CHECK_THROWS_AS(score_with_checkpoint(csv, data.x), Error);
    fs::remove_all(out);
}

TEST_CASE("linear subspace checkpoint round trip") {
    auto out = scratch("subspace");
    fs::create_directories(out);
    SubspaceCheckpoint ck{"fms", Matrix::Identity(4, 2), Vector::LinSpaced(4, -1.0, 0.3)};
    ck.basis(0, 0) = std::sqrt(0.5);
    ck.basis(1, 0) = std::sqrt(0.5);
    ck.basis(1, 1) = 0.0;
    ck.basis(2, 1) = 1.0;
    const auto path = (out / "s.ckpt").string();
    save_subspace(path, ck);
    auto back = load_subspace(path);
    CHECK(back.method == "fms");
    CHECK(back.basis == ck.basis);
    CHECK(back.center == ck.center);
    fs::remove_all(out);
}

TEST_CASE("repeat runs are byte identical") {
    for (const char* mode : {"rsrae", "sfms"}) {
        CAPTURE(mode);
        auto a = scratch(std::string("det_a_") + mode), b = scratch(std::string("det_b_") + mode);
        REQUIRE(run_experiment(small(mode, a)).ok);
        REQUIRE(run_experiment(small(mode, b)).ok);
        CHECK(slurp(a / "metrics.json") == slurp(b / "metrics.json"));
        for (const auto& entry : fs::recursive_directory_iterator(a)) {
            if (!entry.is_regular_file()) continue;
            auto rel = fs::relative(entry.path(), a);
            CAPTURE(rel.string());
            CHECK(slurp(entry.path()) == slurp(b / rel));
        }
        fs::remove_all(a);
        fs::remove_all(b);
    }
}

TEST_CASE("different seeds give different data") {
    auto out = scratch("seeds");
    auto res = run_experiment(small("pca", out));
    REQUIRE(res.runs.size() == 2);
    CHECK(slurp(out / "seed_3" / "scores.csv") != slurp(out / "seed_8" / "scores.csv"));
    fs::remove_all(out);
}

TEST_CASE("divergent training is recorded as failed") {
    auto out = scratch("diverge");
    auto cfg = small("ae", out, "train.learning_rate = 1e30\n");
    auto res = run_experiment(cfg);
    CHECK_FALSE(res.ok);
    REQUIRE(res.runs.size() == 1);  // the loop stops at the first failure
    CHECK(res.runs[0].status == "failed");
    CHECK_FALSE(res.runs[0].error.empty());
    auto m = nlohmann::json::parse(slurp(out / "metrics.json"));
    CHECK(m["status"] == "failed");
    CHECK(m["runs"][0]["error"].get<std::string>().size() > 0);
    CHECK(m["auc"]["mean"].is_null());
    fs::remove_all(out);
}

TEST_CASE("sweeps write one table row per value") {
    auto out = scratch("sweep");
    auto base = small("pca", out);
    auto sr = run_sweep(base, SweepAxis::D, {1, 2});
    CHECK(sr.ok);
    std::istringstream table(slurp(sr.table_path));
    std::string line;
    std::getline(table, line);
    CHECK(line == "value,auc_mean,auc_sd,ap_mean,ap_sd");
    std::vector<std::string> rows;
    while (std::getline(table, line)) rows.push_back(line);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].rfind("1,", 0) == 0);
    CHECK(rows[1].rfind("2,", 0) == 0);
    CHECK(fs::exists(out / "d=1" / "metrics.json"));
    CHECK(fs::exists(out / "d=2" / "metrics.json"));
    auto m = nlohmann::json::parse(slurp(out / "d=2" / "metrics.json"));
    CHECK(rows[1].find(format_double(m["auc"]["mean"].get<double>())) != std::string::npos);

    CHECK_THROWS_AS(run_sweep(base, SweepAxis::Lambda, {0.1}), ConfigError);
    CHECK_THROWS_AS(run_sweep(base, SweepAxis::LearningRate, {0.1}), ConfigError);
    CHECK_THROWS_AS(run_sweep(base, SweepAxis::D, {1.5}), ConfigError);
    CHECK_THROWS_AS(parse_axis("width"), ConfigError);
    for (auto a : {SweepAxis::D, SweepAxis::LearningRate, SweepAxis::Lambda, SweepAxis::OutlierRatio})
        CHECK(parse_axis(axis_name(a)) == a);

    auto plus = small("rsrae_plus", out / "plus");
    plus.train.epochs = 1;
    plus.seeds = {0};
    auto lam = run_sweep(plus, SweepAxis::Lambda, {0.1, 1});
    std::istringstream lt(slurp(lam.table_path));
    int count = -1;
    while (std::getline(lt, line)) ++count;
    CHECK(count == 4);
    fs::remove_all(out);
}
