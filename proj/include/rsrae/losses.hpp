#pragma once

#include <optional>
#include <vector>

#include "rsrae/net.hpp"
#include "rsrae/tape.hpp"
#include "rsrae/tensor.hpp"

namespace rsrae {

// sum_t ||x_t - x~_t||_2^p, p in {1, 2}.
Var record_loss_ae(Tape& tape, Var x, Var x_rec, int p);
// sum_t ||z_t - A^T A z_t||_2^q, q in {1, 2}.
Var record_loss_rsr1(Tape& tape, Var z, Var a, int q);
// ||A A^T - I_d||_F^2.
Var record_loss_rsr2(Tape& tape, Var a);

double loss_ae(const Tensor& x, const Tensor& x_rec, int p);
double loss_rsr1(const Tensor& z, const Tensor& a, int q = 1);
double loss_rsr2(const Tensor& a);

struct LossWeights {
    double lambda1 = 0.1;
    double lambda2 = 0.1;
};

struct LossBreakdown {
    double l_ae = 0.0;
    double l_rsr1 = 0.0;
    double l_rsr2 = 0.0;
    double combined = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
};

// L_AE^1 + lambda1 L_RSR1 + lambda2 L_RSR2 with p = q = 1. Without weights the
// unweighted sum is reported and both lambdas read 1.
LossBreakdown loss_combined(const Tensor& x, const ModelOutputs& outputs, const Tensor& a,
                            std::optional<LossWeights> weights = std::nullopt);

// Per-row reconstruction distance ||x_t - x~_t||_2; larger means more anomalous.
std::vector<double> anomaly_scores(const Tensor& x, const Tensor& x_rec);

}  // namespace rsrae
