#include "rsrae/linear_rsr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rsrae/error.hpp"
#include "rsrae/rng.hpp"
#include "rsrae/tape.hpp"

namespace rsrae {

namespace {

void require_data(const Matrix& y, std::size_t d, const char* what) {
    if (y.rows() == 0 || y.cols() == 0) throw ShapeError(std::string(what) + ": empty data");
    if (d == 0 || d > static_cast<std::size_t>(y.cols())) {
        throw ConfigError(std::string(what) + ": subspace dimension " + std::to_string(d) + " invalid for R^" +
                          std::to_string(y.cols()));
    }
    if (!y.allFinite()) throw NumericError(std::string(what) + ": data contains NaN or Inf");
}

void require_ambient(const Subspace& s, const Matrix& y, const char* what) {
    if (static_cast<std::size_t>(y.cols()) != s.ambient_dim()) {
        throw ShapeError(std::string(what) + ": data in R^" + std::to_string(y.cols()) + ", subspace in R^" +
                         std::to_string(s.ambient_dim()));
    }
}

// Top-d eigenvectors of a symmetric matrix, largest eigenvalue first.
Matrix top_eigenvectors(const Matrix& sym, std::size_t d) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.info() != Eigen::Success) throw NumericError("symmetric eigen-decomposition failed");
    const Eigen::Index n = sym.rows();
    const auto k = static_cast<Eigen::Index>(d);
    Matrix top(n, k);
    for (Eigen::Index j = 0; j < k; ++j) top.col(j) = eig.eigenvectors().col(n - 1 - j);
    return top;
}

}  // namespace

Matrix to_matrix(const Tensor& t) {
    if (t.rank() != 2) throw ShapeError("to_matrix expects a rank-2 tensor, got " + shape_string(t.shape()));
    Matrix m(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t(i, j);
    return m;
}

Tensor to_tensor(const Matrix& m) {
    Tensor t(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            t(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
    return t;
}

Subspace Subspace::from_spanning(const Matrix& columns) {
    if (columns.cols() == 0 || columns.cols() > columns.rows()) throw ShapeError("spanning set has a bad shape");
    Eigen::ColPivHouseholderQR<Matrix> qr(columns);
    if (qr.rank() < columns.cols()) {
        throw NumericError("spanning set has rank " + std::to_string(qr.rank()) + " < " +
                           std::to_string(columns.cols()));
    }
    Eigen::HouseholderQR<Matrix> hqr(columns);
    Matrix q = hqr.householderQ() * Matrix::Identity(columns.rows(), columns.cols());
    canonicalize_signs(q);
    return Subspace{q};
}

void Subspace::validate(double tol) const {
    if (basis.cols() == 0 || basis.cols() > basis.rows()) throw ShapeError("subspace basis must be D x d with d <= D");
    const Matrix gram = basis.transpose() * basis - Matrix::Identity(basis.cols(), basis.cols());
    if (!(gram.norm() < tol)) {
        throw NumericError("subspace basis is not orthonormal (||U^T U - I||_F = " + std::to_string(gram.norm()) + ")");
    }
}

void canonicalize_signs(Matrix& basis) {
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < basis.rows(); ++i) {
            if (std::abs(basis(i, j)) > best) {
                best = std::abs(basis(i, j));
                arg = i;
            }
        }
        if (basis(arg, j) < 0.0) basis.col(j) *= -1.0;
    }
}

Subspace pca_subspace(const Matrix& y, std::size_t d) {
    require_data(y, d, "pca_subspace");
    if (static_cast<std::size_t>(y.rows()) < d) {
        throw ConfigError("pca_subspace: need at least d=" + std::to_string(d) + " samples");
    }
    Eigen::BDCSVD<Matrix> svd(y, Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double cutoff = static_cast<double>(std::max(y.rows(), y.cols())) *
                          std::numeric_limits<double>::epsilon() * (sv.size() ? sv(0) : 0.0);
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++rank;
    if (rank < d) {
        throw NumericError("pca_subspace: data has rank " + std::to_string(rank) + " < d=" + std::to_string(d));
    }
    Matrix basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(d));
    canonicalize_signs(basis);
    return Subspace{basis};
}

std::vector<double> residual_norms(const Subspace& s, const Matrix& y) {
    require_ambient(s, y, "residual_norms");
    const Matrix residual = y - (y * s.basis) * s.basis.transpose();
    std::vector<double> out(static_cast<std::size_t>(y.rows()));
    for (Eigen::Index i = 0; i < y.rows(); ++i) out[static_cast<std::size_t>(i)] = residual.row(i).norm();
    return out;
}

double lad_energy(const Subspace& s, const Matrix& y, int q) {
    if (q != 1 && q != 2) throw ConfigError("lad_energy: q must be 1 or 2");
    double e = 0.0;
    for (double r : residual_norms(s, y)) e += q == 1 ? r : r * r;
    return e;
}

double regularized_lad_energy(const Subspace& s, const Matrix& y, double delta) {
    double e = 0.0;
    for (double r : residual_norms(s, y)) e += r >= delta ? r : r * r / (2.0 * delta) + delta / 2.0;
    return e;
}

FmsResult fms(const Matrix& y, std::size_t d, const FmsOptions& options) {
    require_data(y, d, "fms");
    if (!(options.delta > 0.0)) throw ConfigError("fms: delta must be positive");
    if (static_cast<std::size_t>(y.rows()) <= d) throw ConfigError("fms: need more than d samples");

    FmsResult result;
    result.subspace = pca_subspace(y, d);
    result.energies.push_back(regularized_lad_energy(result.subspace, y, options.delta));

    for (std::size_t k = 0; k < options.max_iters; ++k) {
        const auto r = residual_norms(result.subspace, y);
        Matrix weighted = y;
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            weighted.row(i) /= std::sqrt(std::max(r[static_cast<std::size_t>(i)], options.delta));
        }
        const Matrix cov = weighted.transpose() * weighted;
        Matrix basis = top_eigenvectors(cov, d);
        canonicalize_signs(basis);
        Subspace next{basis};

        const double energy = regularized_lad_energy(next, y, options.delta);
        const double prev = result.energies.back();
        if (energy > prev * (1.0 + 1e-6) + 1e-12) {
            throw NumericError("fms: regularized energy increased from " + std::to_string(prev) + " to " +
                               std::to_string(energy));
        }
        const double step = principal_angle(result.subspace, next);
        result.subspace = std::move(next);
        result.energies.push_back(energy);
        result.iterations = k + 1;
        if (step < options.tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

Vector coordinate_median(const Matrix& y) {
    if (y.rows() == 0) throw ShapeError("median of empty data");
    Vector med(y.cols());
    std::vector<double> column(static_cast<std::size_t>(y.rows()));
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        for (Eigen::Index i = 0; i < y.rows(); ++i) column[static_cast<std::size_t>(i)] = y(i, j);
        std::sort(column.begin(), column.end());
        const std::size_t n = column.size();
        med(j) = n % 2 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
    }
    return med;
}

SphericalData spherical_normalize(const Matrix& y) {
    if (y.rows() == 0 || y.cols() == 0) throw ShapeError("spherical_normalize: empty data");
    SphericalData out;
    out.center = coordinate_median(y);
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        if ((y.row(i) - out.center.transpose()).norm() > 0.0) kept.push_back(i);
    }
    if (kept.empty()) throw NumericError("spherical_normalize: every row equals the coordinate-wise median");
    out.points.resize(static_cast<Eigen::Index>(kept.size()), y.cols());
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const Vector centered = y.row(kept[k]).transpose() - out.center;
        out.points.row(static_cast<Eigen::Index>(k)) = (centered / centered.norm()).transpose();
        out.kept.push_back(static_cast<std::size_t>(kept[k]));
    }
    out.dropped = static_cast<std::size_t>(y.rows()) - kept.size();
    return out;
}

FmsResult spherical_fms(const Matrix& y, std::size_t d, const FmsOptions& options) {
    return fms(spherical_normalize(y).points, d, options);
}

double principal_angle(const Subspace& a, const Subspace& b) {
    if (a.ambient_dim() != b.ambient_dim() || a.dim() != b.dim()) {
        throw ShapeError("principal_angle: subspaces of dimension " + std::to_string(a.dim()) + " in R^" +
                         std::to_string(a.ambient_dim()) + " and " + std::to_string(b.dim()) + " in R^" +
                         std::to_string(b.ambient_dim()));
    }
    const Matrix cross = a.basis.transpose() * b.basis;
    Eigen::JacobiSVD<Matrix> svd_cos(cross);
    const double cos_min = std::clamp(svd_cos.singularValues().minCoeff(), 0.0, 1.0);
    // The sine from the residual keeps precision for nearly equal subspaces.
    const Matrix residual = b.basis - a.basis * cross;
    Eigen::JacobiSVD<Matrix> svd_sin(residual);
    const double sin_max = std::clamp(svd_sin.singularValues().maxCoeff(), 0.0, 1.0);
    return std::atan2(sin_max, cos_min);
}

LinearAeResult train_linear_ae(const Matrix& y, std::size_t d, const LinearAeConfig& config) {
    require_data(y, d, "train_linear_ae");
    if (config.p != 1 && config.p != 2) throw ConfigError("train_linear_ae: p must be 1 or 2");
    if (!(config.learning_rate > 0.0)) throw ConfigError("train_linear_ae: learning_rate must be positive");
    const auto big_d = static_cast<std::size_t>(y.cols());
    const double inv_n = 1.0 / static_cast<double>(y.rows());

    Rng rng(config.seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(big_d));
    Tensor enc(Shape{d, big_d});
    Tensor dec(Shape{big_d, d});
    for (auto& v : enc.data()) v = s * rng.normal();
    for (auto& v : dec.data()) v = s * rng.normal();
    const Tensor data = to_tensor(y);

    LinearAeResult result;
    double prev_loss = std::numeric_limits<double>::infinity();
    std::size_t rising = 0;
    for (std::size_t it = 0; it < config.max_iters; ++it) {
        Tape tape;
        Var yv = tape.constant(data);
        Var e = tape.leaf(enc);
        Var dm = tape.leaf(dec);
        Var recon = tape.matmul(tape.matmul(yv, tape.transpose(e)), tape.transpose(dm));
        Var residual = tape.sub(yv, recon);
        Var per_row = config.p == 1 ? tape.sum(tape.row_norm(residual)) : tape.sum(tape.square(residual));
        Var loss = tape.scale(per_row, inv_n);
        const double value = tape.value(loss).item();
        if (!std::isfinite(value)) throw NumericError("train_linear_ae: loss diverged at iteration " + std::to_string(it));
        rising = value > prev_loss ? rising + 1 : 0;
        if (rising >= 10) {
            throw NumericError("train_linear_ae: loss increased for 10 consecutive iterations (lr too large?)");
        }
        prev_loss = value;

        auto grads = tape.backward(loss);
        const Tensor& ge = grads[e];
        const Tensor& gd = grads[dm];
        const double gnorm = std::hypot(frobenius_norm(ge), frobenius_norm(gd));
        result.iterations = it;
        result.final_loss = value;
        result.grad_norm = gnorm;
        if (gnorm < config.grad_tol) break;
        for (std::size_t i = 0; i < enc.size(); ++i) enc[i] -= config.learning_rate * ge[i];
        for (std::size_t i = 0; i < dec.size(); ++i) dec[i] -= config.learning_rate * gd[i];
    }
    result.model.encoder = to_matrix(enc);
    result.model.decoder = to_matrix(dec);
    return result;
}

}  // namespace rsrae
