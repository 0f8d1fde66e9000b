#pragma once

#include "rsrae/linear_rsr.hpp"

namespace rsrae {

struct Gaussian {
    Vector mean;
    Matrix cov;  // symmetric positive semidefinite

    std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
    void validate() const;
};

// Principal square root of a PSD matrix; eigenvalues in [-1e-10 * scale, 0) are clamped to 0.
Matrix psd_sqrt(const Matrix& sym);

// 2-Wasserstein distance, closed form:
// sqrt(||m1 - m2||^2 + tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})).
double gaussian_w2(const Gaussian& a, const Gaussian& b);

// Pushforward under the orthoprojector P of the subspace: (P m, P S P).
Gaussian project_gaussian(const Gaussian& g, const Subspace& s);

struct RankDApproximation {
    Subspace subspace;  // top-d eigenspace of the covariance
    Gaussian gaussian;  // mean kept, covariance P S P
};

// Closest Gaussian of covariance rank d under W2; requires a full-rank covariance.
RankDApproximation best_rank_d_gaussian(const Gaussian& g, std::size_t d);

}  // namespace rsrae
