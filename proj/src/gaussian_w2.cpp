#include "rsrae/gaussian_w2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rsrae/error.hpp"

namespace rsrae {

namespace {

double magnitude(const Matrix& m) { return std::max(1.0, m.cwiseAbs().maxCoeff()); }

}  // namespace

void Gaussian::validate() const {
    const auto n = mean.size();
    if (n == 0) throw ShapeError("Gaussian needs dimension >= 1");
    if (cov.rows() != n || cov.cols() != n) throw ShapeError("Gaussian covariance must be D x D");
    if (!mean.allFinite() || !cov.allFinite()) throw NumericError("Gaussian parameters contain NaN or Inf");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * magnitude(cov)) {
        throw NumericError("Gaussian covariance is not symmetric");
    }
}

Matrix psd_sqrt(const Matrix& sym) {
    const Matrix s = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    if (eig.info() != Eigen::Success) throw NumericError("psd_sqrt: eigen-decomposition failed");
    Vector vals = eig.eigenvalues();
    const double floor = -1e-10 * magnitude(s);
    const double zero = 64.0 * std::numeric_limits<double>::epsilon() * vals.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (vals(i) < floor) {
            throw NumericError("psd_sqrt: matrix is indefinite (eigenvalue " + std::to_string(vals(i)) + ")");
        }
        // eigenvalues at rounding level are zeros; their square roots would not be
        vals(i) = vals(i) > zero ? std::sqrt(vals(i)) : 0.0;
    }
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

double gaussian_w2(const Gaussian& a, const Gaussian& b) {
    a.validate();
    b.validate();
    if (a.dim() != b.dim()) throw ShapeError("gaussian_w2: dimensions differ");
    if (a.mean == b.mean && a.cov == b.cov) return 0.0;
    const Matrix root_a = psd_sqrt(a.cov);
    const Matrix cross = psd_sqrt(root_a * b.cov * root_a);
    const double sq = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
    return std::sqrt(std::max(sq, 0.0));
}

Gaussian project_gaussian(const Gaussian& g, const Subspace& s) {
    g.validate();
    if (s.ambient_dim() != g.dim()) throw ShapeError("project_gaussian: subspace and Gaussian dimensions differ");
    const Matrix p = s.projector();
    Gaussian out;
    out.mean = p * g.mean;
    out.cov = p * g.cov * p;
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

RankDApproximation best_rank_d_gaussian(const Gaussian& g, std::size_t d) {
    g.validate();
    if (d == 0 || d > g.dim()) throw ConfigError("best_rank_d_gaussian: d out of range");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (g.cov + g.cov.transpose()));
    if (eig.info() != Eigen::Success) throw NumericError("best_rank_d_gaussian: eigen-decomposition failed");
    const Vector& vals = eig.eigenvalues();  // ascending
    if (!(vals(0) > 1e-12 * std::max(1.0, vals(vals.size() - 1)))) {
        throw NumericError("best_rank_d_gaussian: covariance is not full rank");
    }
    const Eigen::Index n = g.cov.rows();
    Matrix basis(n, static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) basis.col(j) = eig.eigenvectors().col(n - 1 - j);
    canonicalize_signs(basis);

    RankDApproximation out{Subspace{basis}, {}};
    out.gaussian = project_gaussian(g, out.subspace);
    out.gaussian.mean = g.mean;
    return out;
}

}  // namespace rsrae
