#pragma once

#include <memory>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "smfpca/fem.hpp"

namespace smfpca {

using ColumnPermutation = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

/// Fill-reducing column ordering of the block matrix. Depends only on the
/// sparsity pattern, so one ordering serves every lambda.
struct SaddleOrdering {
    ColumnPermutation columns;
    Eigen::Index size = 0;
};

/// [[UL, lambda R1], [lambda R1, -lambda R0]]
SparseMatrix saddle_matrix(const FemOperators& ops, const SparseMatrix& upperLeft, double lambda);

SaddleOrdering analyze_saddle(const FemOperators& ops, const SparseMatrix& upperLeft);

struct SaddleSolution {
    Vector f;
    Vector g;
};

/// Factored 2K x 2K system for one (upper-left block, lambda) pair.
///
/// Sparse LU with partial pivoting on the column-permuted block matrix.
/// Immutable after build; `solve` may be called concurrently.
class SaddleSystem {
public:
    static SaddleSystem build(const FemOperators& ops, const SparseMatrix& upperLeft, double lambda);
    static SaddleSystem build(const FemOperators& ops, const SparseMatrix& upperLeft, double lambda,
                              const SaddleOrdering& ordering);

    /// Solve with right-hand side [rhsTop; 0].
    SaddleSolution solve(const Vector& rhsTop) const;
    /// Solve with an arbitrary 2K right-hand side.
    Vector solve_full(const Vector& rhs) const;

    double lambda() const noexcept { return lambda_; }
    Eigen::Index basis_count() const noexcept { return k_; }
    const SparseMatrix& matrix() const noexcept { return matrix_; }

private:
    using Lu = Eigen::SparseLU<SparseMatrix, Eigen::NaturalOrdering<int>>;

    double lambda_ = 0.0;
    Eigen::Index k_ = 0;
    SparseMatrix matrix_;
    ColumnPermutation columns_;
    std::shared_ptr<const Lu> lu_;
};

/// Fraction of stored nonzeros in the block matrix.
double saddle_density(const SaddleSystem& system);

}  // namespace smfpca
