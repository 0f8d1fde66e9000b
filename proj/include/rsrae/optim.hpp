#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsrae/net.hpp"
#include "rsrae/tensor.hpp"

namespace rsrae {

struct AdamState {
    Tensor m;
    Tensor v;
    std::uint64_t t = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_shape(const Shape& shape, double learning_rate);
};

// One bias-corrected Adam update of `param` in place.
void adam_step(AdamState& state, Tensor& param, const Tensor& grad);

enum class TrainMode { Rsrae, RsraePlus, PlainAe };

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    double learning_rate = 0.00025;
    // A step is taken only when its loss is strictly above the threshold.
    double eps_ae = 0.0;
    double eps_rsr1 = 0.0;
    double eps_rsr2 = 0.0;
    TrainMode mode = TrainMode::Rsrae;
    double lambda1 = 0.1;
    double lambda2 = 0.1;
    std::uint64_t seed = 0;
    bool shuffle = true;
    // Give A its own Adam moments per sub-step instead of one shared state.
    bool separate_adam_moments = false;

    void validate(std::size_t n_samples) const;
};

struct EpochLosses {
    double l_ae = 0.0;    // summed over batches
    double l_rsr1 = 0.0;  // summed over batches
    double l_rsr2 = 0.0;  // mean over batches
};

struct TrainResult {
    std::vector<EpochLosses> history;
};

enum class Substep { Reconstruction, Rsr1, Rsr2, Joint };

struct StepEvent {
    std::size_t epoch;
    std::size_t batch;
    Substep substep;
    bool applied;  // false when the threshold check skipped the update
    const AutoencoderModel& model;
};

using TrainObserver = std::function<void(const StepEvent&)>;

// Alternating minimization: per batch, an L_AE^1 step on all parameters, then
// an L_RSR1 step and an L_RSR2 step on A alone.
TrainResult train_rsrae(AutoencoderModel& model, const Tensor& x, const TrainConfig& config,
                        const TrainObserver& observer = {});

// One step per batch on L_AE^1 + lambda1 L_RSR1 + lambda2 L_RSR2 over all parameters.
TrainResult train_rsrae_plus(AutoencoderModel& model, const Tensor& x, const TrainConfig& config,
                             const TrainObserver& observer = {});

// Reconstruction loss L_AE^p only, p in {1, 2}; the architecture keeps A.
TrainResult train_plain_ae(AutoencoderModel& model, const Tensor& x, const TrainConfig& config, int p,
                           const TrainObserver& observer = {});

// Row order of each batch for one epoch; concatenation is a permutation of 0..n-1.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, bool shuffle,
                                                    std::uint64_t seed, std::size_t epoch);

// CSV with header "epoch,l_ae,l_rsr1,l_rsr2".
void write_loss_history(std::ostream& out, const std::vector<EpochLosses>& history);
void save_loss_history(const std::string& path, const std::vector<EpochLosses>& history);

}  // namespace rsrae
