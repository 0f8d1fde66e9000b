#include "rsrae/optim.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "rsrae/error.hpp"
#include "rsrae/format.hpp"
#include "rsrae/losses.hpp"
#include "rsrae/rng.hpp"

namespace rsrae {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;

void check_finite(double value, const char* what, std::size_t epoch, std::size_t batch) {
    if (!std::isfinite(value)) {
        throw NumericError(std::string("non-finite ") + what + " at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch));
    }
}

// Runs `body` and tags any numeric failure with its position in training.
template <typename F>
void at_position(std::size_t epoch, std::size_t batch, F&& body) {
    try {
        body();
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        if (msg.find("at epoch") != std::string::npos) throw;
        throw NumericError(msg + " (epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ")");
    }
}

class Trainer {
public:
    Trainer(AutoencoderModel& model, const Tensor& x, const TrainConfig& config, const TrainObserver& observer)
        : model_(model), x_(x), config_(config), observer_(observer) {
        if (x.rank() != 2 || x.rows() == 0) throw ShapeError("training data must be a non-empty N x M matrix");
        if (!x.all_finite()) throw NumericError("training data contains NaN or Inf");
        model.validate();
        if (x.cols() != model.input_dim()) {
            throw ShapeError("training data has " + std::to_string(x.cols()) + " columns, model expects " +
                             std::to_string(model.input_dim()));
        }
        config.validate(x.rows());
        for (auto& p : model_.parameters()) {
            states_.push_back(AdamState::for_shape(p.tensor->shape(), config.learning_rate));
            if (p.role == ParamRole::Rsr) a_index_ = states_.size() - 1;
        }
        rsr1_state_ = AdamState::for_shape(model_.rsr.a.shape(), config.learning_rate);
        rsr2_state_ = rsr1_state_;
    }

    template <typename BatchFn>
    TrainResult run(BatchFn&& step) {
        TrainResult result;
        for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
            const auto batches = epoch_batches(x_.rows(), config_.batch_size, config_.shuffle, config_.seed, epoch);
            EpochLosses losses;
            for (std::size_t b = 0; b < batches.size(); ++b) {
                const Tensor xb = x_.gather_rows(batches[b]);
                EpochLosses batch_losses;
                at_position(epoch, b, [&] { batch_losses = step(xb, epoch, b); });
                losses.l_ae += batch_losses.l_ae;
                losses.l_rsr1 += batch_losses.l_rsr1;
                losses.l_rsr2 += batch_losses.l_rsr2;
            }
            losses.l_rsr2 /= static_cast<double>(batches.size());
            result.history.push_back(losses);
        }
        return result;
    }

    ForwardOptions training_options() const {
        ForwardOptions opts;
        opts.training = model_.batch_norm;
        return opts;
    }

    // Adam on every parameter, gradients averaged over the batch rows.
    void update_all(const ModelVars& vars, const Gradients& grads, std::size_t rows) {
        auto params = model_.parameters();
        const double inv = 1.0 / static_cast<double>(rows);
        for (std::size_t i = 0; i < params.size(); ++i) {
            adam_step(states_[i], *params[i].tensor, inv * grads[vars.params[i]]);
        }
    }

    void update_a(AdamState& state, const Tensor& grad, std::size_t rows) {
        adam_step(state, model_.rsr.a, (1.0 / static_cast<double>(rows)) * grad);
    }

    AdamState& a_state(Substep s) {
        if (!config_.separate_adam_moments) return states_[a_index_];
        if (s == Substep::Rsr1) return rsr1_state_;
        if (s == Substep::Rsr2) return rsr2_state_;
        return states_[a_index_];
    }

    void notify(std::size_t epoch, std::size_t batch, Substep s, bool applied) {
        if (observer_) observer_(StepEvent{epoch, batch, s, applied, model_});
    }

    AutoencoderModel& model_;
    const Tensor& x_;
    const TrainConfig& config_;
    const TrainObserver& observer_;

private:
    std::vector<AdamState> states_;
    std::size_t a_index_ = 0;
    AdamState rsr1_state_;
    AdamState rsr2_state_;
};

}  // namespace

AdamState AdamState::for_shape(const Shape& shape, double learning_rate) {
    AdamState s;
    s.m = Tensor(shape);
    s.v = Tensor(shape);
    s.learning_rate = learning_rate;
    return s;
}

void adam_step(AdamState& state, Tensor& param, const Tensor& grad) {
    if (grad.shape() != param.shape() || state.m.shape() != param.shape() || state.v.shape() != param.shape()) {
        throw ShapeError("adam_step: parameter " + shape_string(param.shape()) + ", gradient " +
                         shape_string(grad.shape()));
    }
    if (!grad.all_finite()) throw NumericError("adam_step: non-finite gradient");
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        param[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

void TrainConfig::validate(std::size_t n_samples) const {
    if (n_samples == 0) throw ConfigError("empty dataset");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1 || batch_size > n_samples) {
        throw ConfigError("batch_size must lie in [1, " + std::to_string(n_samples) + "], got " +
                          std::to_string(batch_size));
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    if (mode == TrainMode::RsraePlus && (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))) {
        throw ConfigError("lambda1 and lambda2 must be nonnegative");
    }
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, bool shuffle,
                                                    std::uint64_t seed, std::size_t epoch) {
    if (n == 0 || batch_size == 0) throw ConfigError("cannot batch an empty dataset");
    std::vector<std::size_t> order;
    if (shuffle) {
        Rng rng(derive_seed(derive_seed(seed, kShuffleStream), epoch));
        order = rng.permutation(n);
    } else {
        order.resize(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

TrainResult train_rsrae(AutoencoderModel& model, const Tensor& x, const TrainConfig& config,
                        const TrainObserver& observer) {
    if (config.mode != TrainMode::Rsrae) throw ConfigError("train_rsrae requires mode rsrae");
    Trainer trainer(model, x, config, observer);
    return trainer.run([&](const Tensor& xb, std::size_t epoch, std::size_t b) {
        EpochLosses out;
        const std::size_t rows = xb.rows();

        {
            Tape tape;
            auto vars = record_forward(tape, model, xb, trainer.training_options());
            Var loss = record_loss_ae(tape, vars.input, vars.output, 1);
            out.l_ae = tape.value(loss).item();
            check_finite(out.l_ae, "L_AE", epoch, b);
            const bool apply = out.l_ae > config.eps_ae;
            if (apply) trainer.update_all(vars, tape.backward(loss), rows);
            trainer.notify(epoch, b, Substep::Reconstruction, apply);
        }

        {
            // Codes from the freshly updated encoder, held constant; only A is tracked.
            Tape tape;
            ForwardOptions opts = trainer.training_options();
            opts.update_running_stats = false;
            opts.track_params = false;
            Var z = record_encoder(tape, model, tape.constant(xb), opts);
            Var a = tape.leaf(model.rsr.a);
            Var loss = record_loss_rsr1(tape, z, a, 1);
            out.l_rsr1 = tape.value(loss).item();
            check_finite(out.l_rsr1, "L_RSR1", epoch, b);
            const bool apply = out.l_rsr1 > config.eps_rsr1;
            if (apply) trainer.update_a(trainer.a_state(Substep::Rsr1), tape.backward(loss)[a], rows);
            trainer.notify(epoch, b, Substep::Rsr1, apply);
        }

        {
            Tape tape;
            Var a = tape.leaf(model.rsr.a);
            Var loss = record_loss_rsr2(tape, a);
            out.l_rsr2 = tape.value(loss).item();
            check_finite(out.l_rsr2, "L_RSR2", epoch, b);
            const bool apply = out.l_rsr2 > config.eps_rsr2;
            if (apply) trainer.update_a(trainer.a_state(Substep::Rsr2), tape.backward(loss)[a], rows);
            trainer.notify(epoch, b, Substep::Rsr2, apply);
        }
        return out;
    });
}

TrainResult train_rsrae_plus(AutoencoderModel& model, const Tensor& x, const TrainConfig& config,
                             const TrainObserver& observer) {
    if (config.mode != TrainMode::RsraePlus) throw ConfigError("train_rsrae_plus requires mode rsrae_plus");
    Trainer trainer(model, x, config, observer);
    return trainer.run([&](const Tensor& xb, std::size_t epoch, std::size_t b) {
        EpochLosses out;
        Tape tape;
        auto vars = record_forward(tape, model, xb, trainer.training_options());
        Var l_ae = record_loss_ae(tape, vars.input, vars.output, 1);
        Var l_rsr1 = record_loss_rsr1(tape, vars.code, vars.a, 1);
        Var l_rsr2 = record_loss_rsr2(tape, vars.a);
        Var total = tape.add(l_ae, tape.add(tape.scale(l_rsr1, config.lambda1), tape.scale(l_rsr2, config.lambda2)));
        out.l_ae = tape.value(l_ae).item();
        out.l_rsr1 = tape.value(l_rsr1).item();
        out.l_rsr2 = tape.value(l_rsr2).item();
        check_finite(tape.value(total).item(), "L_RSRAE", epoch, b);
        const bool apply = out.l_ae > config.eps_ae;
        if (apply) trainer.update_all(vars, tape.backward(total), xb.rows());
        trainer.notify(epoch, b, Substep::Joint, apply);
        return out;
    });
}

TrainResult train_plain_ae(AutoencoderModel& model, const Tensor& x, const TrainConfig& config, int p,
                           const TrainObserver& observer) {
    if (p != 1 && p != 2) throw ConfigError("plain autoencoder power must be 1 or 2");
    Trainer trainer(model, x, config, observer);
    return trainer.run([&](const Tensor& xb, std::size_t epoch, std::size_t b) {
        EpochLosses out;
        Tape tape;
        auto vars = record_forward(tape, model, xb, trainer.training_options());
        Var l_ae = record_loss_ae(tape, vars.input, vars.output, p);
        out.l_ae = tape.value(l_ae).item();
        check_finite(out.l_ae, "L_AE", epoch, b);
        // Monitoring only; these nodes are not ancestors of l_ae.
        out.l_rsr1 = tape.value(record_loss_rsr1(tape, vars.code, vars.a, 1)).item();
        out.l_rsr2 = tape.value(record_loss_rsr2(tape, vars.a)).item();
        const bool apply = out.l_ae > config.eps_ae;
        if (apply) trainer.update_all(vars, tape.backward(l_ae), xb.rows());
        trainer.notify(epoch, b, Substep::Reconstruction, apply);
        return out;
    });
}

void write_loss_history(std::ostream& out, const std::vector<EpochLosses>& history) {
    out << "epoch,l_ae,l_rsr1,l_rsr2\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
        out << e << ',' << format_double(history[e].l_ae) << ',' << format_double(history[e].l_rsr1) << ','
            << format_double(history[e].l_rsr2) << '\n';
    }
}

void save_loss_history(const std::string& path, const std::vector<EpochLosses>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_loss_history(out, history);
}

}  // namespace rsrae
