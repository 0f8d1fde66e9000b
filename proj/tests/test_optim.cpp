#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "rsrae/data.hpp"
#include "rsrae/error.hpp"
#include "rsrae/losses.hpp"
#include "rsrae/net.hpp"
#include "rsrae/optim.hpp"

using namespace rsrae;

namespace {

AutoencoderModel tiny(std::uint64_t seed) {
    ModelSpec s;
    s.input_dim = 3;
    s.encoder_widths = {5, 4};
    s.latent_dim = 2;
    s.decoder_widths = {4};
    s.activation = ActivationSpec::tanh();
    return init_model(s, seed);
}

TrainConfig one_step(TrainMode mode, std::size_t n) {
    TrainConfig c;
    c.epochs = 1;
    c.batch_size = n;
    c.learning_rate = 0.01;
    c.mode = mode;
    c.shuffle = false;
    return c;
}

// Gradients of a loss built on a fresh tape from the model's current parameters.
std::vector<Tensor> param_grads(AutoencoderModel& m, const Tensor& x,
                                const std::function<Var(Tape&, const ModelVars&)>& loss) {
    Tape tape;
    auto vars = record_forward(tape, m, x, ForwardOptions{true, false, true});
    auto g = tape.backward(loss(tape, vars));
    std::vector<Tensor> out;
    for (auto v : vars.params) out.push_back(g[v]);
    return out;
}

}  // namespace

TEST_CASE("adam examples") {
    Tensor p = Tensor::vector({1.0, -2.0});
    auto st = AdamState::for_shape(p.shape(), 0.1);
    adam_step(st, p, Tensor::vector({0.0, 0.0}));
    CHECK(st.t == 1);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);

    Tensor q = Tensor::scalar(0.0);
    auto sq = AdamState::for_shape(q.shape(), 0.01);
    adam_step(sq, q, Tensor::scalar(3.7));
    CHECK(q.item() == doctest::Approx(-0.01).epsilon(1e-6));

    Tensor x = Tensor::scalar(1.0);
    auto sx = AdamState::for_shape(x.shape(), 0.1);
    for (int i = 0; i < 100; ++i) adam_step(sx, x, Tensor::scalar(2.0 * x.item()));
    CHECK(std::abs(x.item()) < 0.05);

    CHECK_THROWS_AS(adam_step(sx, x, Tensor::vector({1, 2})), ShapeError);
    CHECK_THROWS_AS(adam_step(sx, x, Tensor::scalar(NAN)), NumericError);
}

TEST_CASE("adam matches the hand-unrolled update") {
    Rng rng(1);
    Tensor p(Shape{4});
    for (auto& v : p.data()) v = rng.normal();
    std::vector<oracle::ScalarAdam> ref(4, oracle::ScalarAdam{0.003});
    std::vector<double> q(p.data().begin(), p.data().end());
    auto st = AdamState::for_shape(p.shape(), 0.003);
    for (int step = 0; step < 25; ++step) {
        Tensor g(Shape{4});
        for (auto& v : g.data()) v = rng.normal();
        adam_step(st, p, g);
        for (std::size_t i = 0; i < 4; ++i) q[i] = ref[i].step(q[i], g[i]);
    }
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-14);
}

TEST_CASE("epoch batches partition the data") {
    for (bool shuffle : {false, true}) {
        auto b = epoch_batches(10, 3, shuffle, 7, 2);
        CHECK(b.size() == 4);
        CHECK(b.back().size() == 1);
        std::multiset<std::size_t> seen;
        for (const auto& batch : b) seen.insert(batch.begin(), batch.end());
        std::multiset<std::size_t> want;
        for (std::size_t i = 0; i < 10; ++i) want.insert(i);
        CHECK(seen == want);
    }
    CHECK(epoch_batches(10, 3, true, 7, 2) == epoch_batches(10, 3, true, 7, 2));
    CHECK(epoch_batches(10, 3, true, 7, 2) != epoch_batches(10, 3, true, 7, 3));
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.batch_size = 11;
    CHECK_THROWS_AS(c.validate(10), ConfigError);
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(10), ConfigError);
    c.batch_size = 5;
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(10), ConfigError);
    c.epochs = 1;
    c.learning_rate = 0;
    CHECK_THROWS_AS(c.validate(10), ConfigError);
    c.learning_rate = 0.1;
    CHECK_NOTHROW(c.validate(10));
    CHECK_THROWS_AS(c.validate(0), ConfigError);
}

TEST_CASE("huge thresholds leave the model unchanged") {
    auto m = tiny(1);
    const auto before = flatten_parameters(m);
    Rng rng(2);
    auto x = oracle::random_matrix(12, 3, rng);
    TrainConfig c = one_step(TrainMode::Rsrae, 4);
    c.epochs = 3;
    c.eps_ae = c.eps_rsr1 = c.eps_rsr2 = 1e300;
    auto r = train_rsrae(m, x, c);
    CHECK(flatten_parameters(m) == before);
    CHECK(r.history.size() == 3);
}

TEST_CASE("one rsrae batch equals three sequential hand-computed Adam steps") {
    Rng rng(3);
    auto x = oracle::random_matrix(6, 3, rng);
    const double n = 6.0;
    auto m = tiny(4);
    auto ref = m;

    // Step 1: L_AE^1 / N over every parameter.
    auto grads = param_grads(ref, x, [](Tape& t, const ModelVars& v) { return record_loss_ae(t, v.input, v.output, 1); });
    auto params = ref.parameters();
    std::vector<std::vector<oracle::ScalarAdam>> states;
    for (std::size_t k = 0; k < params.size(); ++k) {
        states.emplace_back(params[k].tensor->size(), oracle::ScalarAdam{0.01});
        for (std::size_t i = 0; i < params[k].tensor->size(); ++i) {
            auto& p = (*params[k].tensor)[i];
            p = states[k][i].step(p, grads[k][i] / n);
        }
    }
    std::size_t a_index = 0;
    for (std::size_t k = 0; k < params.size(); ++k)
        if (params[k].role == ParamRole::Rsr) a_index = k;

    // Step 2: L_RSR1 / N on A with codes from the updated encoder.
    {
        auto z = model_forward(ref, x).code;
        Tape t;
        auto a = t.leaf(ref.rsr.a);
        auto g = t.backward(record_loss_rsr1(t, t.constant(z), a, 1))[a];
        for (std::size_t i = 0; i < g.size(); ++i) ref.rsr.a[i] = states[a_index][i].step(ref.rsr.a[i], g[i] / n);
    }
    // Step 3: L_RSR2 / N on A; the A moments are shared.
    {
        Tape t;
        auto a = t.leaf(ref.rsr.a);
        auto g = t.backward(record_loss_rsr2(t, a))[a];
        for (std::size_t i = 0; i < g.size(); ++i) ref.rsr.a[i] = states[a_index][i].step(ref.rsr.a[i], g[i] / n);
    }

    train_rsrae(m, x, one_step(TrainMode::Rsrae, 6));
    auto got = flatten_parameters(m);
    auto want = flatten_parameters(ref);
    REQUIRE(got.size() == want.size());
    double worst = 0;
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("separate Adam moments give each A sub-step its own state") {
    Rng rng(3);
    auto x = oracle::random_matrix(6, 3, rng);
    auto shared = tiny(4), separate = tiny(4);
    auto c = one_step(TrainMode::Rsrae, 6);
    c.epochs = 2;
    train_rsrae(shared, x, c);
    c.separate_adam_moments = true;
    train_rsrae(separate, x, c);
    CHECK(max_abs(shared.rsr.a - separate.rsr.a) > 0.0);
    CHECK(max_abs(shared.encoder[0].weights - separate.encoder[0].weights) > 0.0);
}

TEST_CASE("rsrae+ with zero weights is an AE-1 step") {
    Rng rng(5);
    auto x = oracle::random_matrix(8, 3, rng);
    auto a = tiny(6), b = tiny(6);
    auto c = one_step(TrainMode::RsraePlus, 8);
    c.lambda1 = c.lambda2 = 0.0;
    train_rsrae_plus(a, x, c);
    train_plain_ae(b, x, one_step(TrainMode::PlainAe, 8), 1);
    auto pa = flatten_parameters(a), pb = flatten_parameters(b);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(std::abs(pa[i] - pb[i]) < 1e-12);
}

TEST_CASE("rsrae+ step on A uses the weighted sum of the three gradients") {
    Rng rng(7);
    auto x = oracle::random_matrix(8, 3, rng);
    auto m = tiny(8);
    const double l1 = 0.1, l2 = 0.1, n = 8.0;
    auto g_ae = param_grads(m, x, [](Tape& t, const ModelVars& v) { return record_loss_ae(t, v.input, v.output, 1); });
    auto g_r1 = param_grads(m, x, [](Tape& t, const ModelVars& v) { return record_loss_rsr1(t, v.code, v.a, 1); });
    auto g_r2 = param_grads(m, x, [](Tape& t, const ModelVars& v) { return record_loss_rsr2(t, v.a); });
    std::size_t ai = 0;
    auto params = m.parameters();
    for (std::size_t k = 0; k < params.size(); ++k)
        if (params[k].role == ParamRole::Rsr) ai = k;
    Tensor expect = m.rsr.a;
    for (std::size_t i = 0; i < expect.size(); ++i) {
        oracle::ScalarAdam s{0.01};
        const double g = (g_ae[ai][i] + l1 * g_r1[ai][i] + l2 * g_r2[ai][i]) / n;
        expect[i] = s.step(expect[i], g);
    }
    auto c = one_step(TrainMode::RsraePlus, 8);
    c.lambda1 = l1;
    c.lambda2 = l2;
    train_rsrae_plus(m, x, c);
    CHECK(max_abs(m.rsr.a - expect) < 1e-12);
}

TEST_CASE("plain AE on zero data takes no steps") {
    AutoencoderModel m;
    m.encoder.push_back({Tensor::matrix({{1, 0}, {0, 1}, {1, 1}}), Tensor::vector({0, 0, 0}), ActivationSpec::none()});
    m.rsr.a = Tensor::matrix({{1, 0, 0}});
    m.decoder.push_back({Tensor::matrix({{2}, {3}}), Tensor::vector({0, 0}), ActivationSpec::none()});
    const auto before = flatten_parameters(m);
    Tensor zeros(Shape{4, 2});
    auto r = train_plain_ae(m, zeros, one_step(TrainMode::PlainAe, 4), 2);
    CHECK(r.history[0].l_ae == 0.0);
    CHECK(flatten_parameters(m) == before);
    CHECK_THROWS_AS(train_plain_ae(m, zeros, one_step(TrainMode::PlainAe, 4), 3), ConfigError);
}

TEST_CASE("loss history decreases on a smooth linear instance with small lr") {
    ModelSpec s;
    s.input_dim = 4;
    s.encoder_widths = {4};
    s.latent_dim = 2;
    s.decoder_widths = {};
    s.activation = ActivationSpec::none();
    s.output_activation = ActivationSpec::none();
    auto m = init_model(s, 3);
    Rng rng(4);
    auto x = oracle::random_matrix(30, 4, rng);
    auto c = one_step(TrainMode::PlainAe, 30);
    c.epochs = 200;
    c.learning_rate = 1e-3;
    auto r = train_plain_ae(m, x, c, 2);
    REQUIRE(r.history.size() == 200);
    for (std::size_t e = 1; e < r.history.size(); ++e) CHECK(r.history[e].l_ae <= r.history[e - 1].l_ae);
}

TEST_CASE("swiss-roll configuration reduces the reconstruction loss") {
    auto data = mix(swiss_roll(200, 1), gaussian_outliers(100, 2.0, 2), 3);
    auto m = init_model(swiss_roll_model_spec(), 4);
    TrainConfig c;
    c.epochs = 30;
    c.batch_size = data.size();
    c.learning_rate = 0.01;
    auto r = train_rsrae(m, data.x, c);
    REQUIRE(r.history.size() == 30);
    CHECK(r.history.back().l_ae < r.history.front().l_ae);
    for (const auto& e : r.history) {
        CHECK(std::isfinite(e.l_ae));
        CHECK(e.l_ae >= 0);
        CHECK(e.l_rsr1 >= 0);
        CHECK(e.l_rsr2 >= 0);
    }
}

TEST_CASE("training is bit-deterministic") {
    Rng rng(9);
    auto x = oracle::random_matrix(20, 3, rng);
    auto run = [&] {
        auto m = tiny(10);
        auto c = one_step(TrainMode::Rsrae, 6);
        c.epochs = 5;
        c.shuffle = true;
        c.seed = 42;
        train_rsrae(m, x, c);
        return flatten_parameters(m);
    };
    CHECK(run() == run());
}

TEST_CASE("rsr sub-steps touch only A") {
    Rng rng(11);
    auto x = oracle::random_matrix(10, 3, rng);
    auto m = tiny(12);
    std::vector<double> prev = flatten_parameters(m);
    Tensor prev_a = m.rsr.a;
    int checked = 0;
    auto obs = [&](const StepEvent& ev) {
        auto now = flatten_parameters(ev.model);
        if (ev.substep == Substep::Rsr1 || ev.substep == Substep::Rsr2) {
            std::size_t off = 0;
            for (const auto& p : ev.model.parameters()) {
                for (std::size_t i = 0; i < p.tensor->size(); ++i)
                    if (p.role != ParamRole::Rsr) CHECK(now[off + i] == prev[off + i]);
                off += p.tensor->size();
            }
            CHECK(max_abs(ev.model.rsr.a - prev_a) > 0.0);
            ++checked;
        }
        prev = now;
        prev_a = ev.model.rsr.a;
    };
    auto c = one_step(TrainMode::Rsrae, 5);
    c.epochs = 2;
    train_rsrae(m, x, c, obs);
    CHECK(checked == 8);
}

TEST_CASE("loss history csv") {
    std::vector<EpochLosses> h{{1.5, 2.0, 0.25}, {1.0, 1.0, 0.125}};
    std::ostringstream os;
    write_loss_history(os, h);
    CHECK(os.str() == "epoch,l_ae,l_rsr1,l_rsr2\n0,1.5,2,0.25\n1,1,1,0.125\n");
}

TEST_CASE("divergence aborts with the batch position") {
    Rng rng(13);
    auto x = oracle::random_matrix(10, 3, rng, 1e200);
    auto m = tiny(14);
    try {
        train_plain_ae(m, x, one_step(TrainMode::PlainAe, 10), 2);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
    }
}
