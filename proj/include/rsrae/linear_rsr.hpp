#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rsrae/tensor.hpp"

namespace rsrae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

Matrix to_matrix(const Tensor& t);
Tensor to_tensor(const Matrix& m);

// A d-dimensional linear subspace of R^D held as an orthonormal D x d basis U.
// The orthoprojector is P = U U^T.
struct Subspace {
    Matrix basis;

    std::size_t ambient_dim() const { return static_cast<std::size_t>(basis.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(basis.cols()); }
    Matrix projector() const { return basis * basis.transpose(); }

    // Orthonormalizes the columns of any full-column-rank matrix.
    static Subspace from_spanning(const Matrix& columns);
    // Throws unless ||U^T U - I||_F < tol.
    void validate(double tol = 1e-10) const;
};

// Flips each basis column so its largest-magnitude entry is positive.
void canonicalize_signs(Matrix& basis);

// Top-d right singular subspace of Y (N x D). Y is used as given, so center first.
Subspace pca_subspace(const Matrix& y, std::size_t d);

// sum_t ||(I - P) y_t||_2^q, q in {1, 2}.
double lad_energy(const Subspace& s, const Matrix& y, int q);

// sum_t h(||(I - P) y_t||) with h(r) = r for r >= delta and r^2/(2 delta) + delta/2 below:
// the energy that the reweighted iteration decreases monotonically.
double regularized_lad_energy(const Subspace& s, const Matrix& y, double delta);

// Residual distance ||(I - P) y_t||_2 of every row.
std::vector<double> residual_norms(const Subspace& s, const Matrix& y);

struct FmsOptions {
    double delta = 1e-10;
    std::size_t max_iters = 100;
    double tol = 1e-8;
};

struct FmsResult {
    Subspace subspace;
    std::vector<double> energies;  // regularized energy of the start and of every iterate
    std::size_t iterations = 0;
    bool converged = false;
};

// Iteratively reweighted eigen-solver for the least-absolute-deviations subspace,
// started from PCA: P_{k+1} = top-d eigenspace of sum_t y_t y_t^T / max(||(I-P_k) y_t||, delta).
FmsResult fms(const Matrix& y, std::size_t d, const FmsOptions& options = {});

struct SphericalData {
    Matrix points;                  // kept rows, unit norm
    Vector center;                  // coordinate-wise median that was subtracted
    std::vector<std::size_t> kept;  // source row of each kept point
    std::size_t dropped = 0;        // rows equal to the median
};

Vector coordinate_median(const Matrix& y);

// Subtract the coordinate-wise median, then scale every nonzero row to unit norm.
SphericalData spherical_normalize(const Matrix& y);

// fms on spherical_normalize(y).
FmsResult spherical_fms(const Matrix& y, std::size_t d, const FmsOptions& options = {});

// Largest principal angle in radians.
double principal_angle(const Subspace& a, const Subspace& b);

struct LinearAE {
    Matrix encoder;  // d x D
    Matrix decoder;  // D x d

    Matrix reconstruction_map() const { return decoder * encoder; }
};

struct LinearAeConfig {
    int p = 2;
    double learning_rate = 0.02;
    std::size_t max_iters = 200000;
    double grad_tol = 1e-10;
    std::uint64_t seed = 0;
};

struct LinearAeResult {
    LinearAE model;
    std::size_t iterations = 0;
    double final_loss = 0.0;
    double grad_norm = 0.0;
};

// Full-batch gradient descent on (1/N) sum_t ||y_t - D E y_t||_2^p.
LinearAeResult train_linear_ae(const Matrix& y, std::size_t d, const LinearAeConfig& config = {});

}  // namespace rsrae
