// Block shift-invert subspace iteration for the Laplace-Beltrami pencil
// (R1, R0) with Rayleigh-Ritz extraction.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "smfpca/errors.hpp"
#include "smfpca/fem.hpp"

namespace smfpca {

namespace {

// W <- W L^{-T} with W^T R0 W = L L^T. Returns false if the Gram matrix is
// not numerically positive definite.
bool mass_orthonormalize(Matrix& w, const SparseMatrix& mass) {
    const Matrix gram = w.transpose() * (mass * w);
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) return false;
    w = llt.matrixU().solve<Eigen::OnTheRight>(w);
    return true;
}

void fix_sign(Vector& v) {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0.0) v = -v;
}

}  // namespace

std::vector<EigenPair> lb_eigenpairs(const FemOperators& ops, int count, const EigenOptions& opts) {
    const auto k = static_cast<Eigen::Index>(ops.basis_count());
    if (count < 1 || count > k) {
        throw InputError("lb_eigenpairs: count must be in [1, " + std::to_string(k) + "]");
    }
    const SparseMatrix& r0 = ops.mass;
    const SparseMatrix& r1 = ops.stiffness;

    const Vector ones = Vector::Ones(k);
    const Vector constant = ones / std::sqrt(ones.dot(r0 * ones));
    std::vector<EigenPair> out;
    out.push_back({0.0, constant});
    const Eigen::Index wanted = count - 1;
    if (wanted == 0) return out;

    const Eigen::Index block = std::min<Eigen::Index>(k - 1, std::max<Eigen::Index>(2 * wanted, wanted + 10));
    const double shift = 1e-4 * r1.diagonal().sum() / r0.diagonal().sum();
    const SparseMatrix shifted = r1 + shift * r0;
    Eigen::SimplicialLDLT<SparseMatrix> factor(shifted);
    if (factor.info() != Eigen::Success) {
        throw ConvergenceFailure("lb_eigenpairs: factorization of the shifted pencil failed", 0);
    }

    auto deflate = [&](Matrix& w) { w -= constant * (constant.transpose() * (r0 * w)); };

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;
    Matrix v(k, block);
    for (Eigen::Index j = 0; j < block; ++j) {
        for (Eigen::Index i = 0; i < k; ++i) v(i, j) = normal(rng);
    }
    deflate(v);
    if (!mass_orthonormalize(v, r0)) {
        throw ConvergenceFailure("lb_eigenpairs: degenerate starting block", 0);
    }

    Vector theta;
    for (int iter = 1; iter <= opts.maxIterations; ++iter) {
        Matrix w = factor.solve(r0 * v);
        deflate(w);
        // Two passes of Cholesky-QR keep the block orthonormal to working precision.
        if (!mass_orthonormalize(w, r0) || !mass_orthonormalize(w, r0)) {
            throw ConvergenceFailure("lb_eigenpairs: subspace collapsed", iter);
        }
        Matrix h = w.transpose() * (r1 * w);
        h = 0.5 * (h + h.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Matrix> ritz(h);
        v = w * ritz.eigenvectors();
        theta = ritz.eigenvalues();

        const Matrix r1v = r1 * v.leftCols(wanted);
        const Matrix r0v = r0 * v.leftCols(wanted);
        double worst = 0.0;
        for (Eigen::Index j = 0; j < wanted; ++j) {
            const double num = (r1v.col(j) - theta[j] * r0v.col(j)).norm();
            const double den = r1v.col(j).norm() + std::abs(theta[j]) * r0v.col(j).norm();
            worst = std::max(worst, den > 0.0 ? num / den : num);
        }
        if (worst < opts.tolerance) {
            for (Eigen::Index j = 0; j < wanted; ++j) {
                Vector c = v.col(j);
                c /= std::sqrt(c.dot(r0 * c));
                fix_sign(c);
                out.push_back({std::max(0.0, theta[j]), std::move(c)});
            }
            return out;
        }
    }
    throw ConvergenceFailure("lb_eigenpairs: no convergence after " + std::to_string(opts.maxIterations) +
                                 " iterations",
                             opts.maxIterations);
}

}  // namespace smfpca
