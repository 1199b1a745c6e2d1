#include "smfpca/saddle.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/OrderingMethods>

#include "smfpca/errors.hpp"

namespace smfpca {

SparseMatrix saddle_matrix(const FemOperators& ops, const SparseMatrix& upperLeft, double lambda) {
    const auto k = static_cast<Eigen::Index>(ops.basis_count());
    if (upperLeft.rows() != k || upperLeft.cols() != k) {
        throw DimensionMismatch("upper-left block is " + std::to_string(upperLeft.rows()) + "x" +
                                std::to_string(upperLeft.cols()) + ", expected " + std::to_string(k) +
                                "x" + std::to_string(k));
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(upperLeft.nonZeros() + 2 * ops.stiffness.nonZeros() +
                                              ops.mass.nonZeros()));
    auto append = [&](const SparseMatrix& m, Eigen::Index r0, Eigen::Index c0, double scale) {
        for (Eigen::Index c = 0; c < m.outerSize(); ++c) {
            for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
                triplets.emplace_back(static_cast<int>(it.row() + r0), static_cast<int>(it.col() + c0),
                                      scale * it.value());
            }
        }
    };
    append(upperLeft, 0, 0, 1.0);
    append(ops.stiffness, 0, k, lambda);
    append(ops.stiffness, k, 0, lambda);
    append(ops.mass, k, k, -lambda);
    SparseMatrix block(2 * k, 2 * k);
    block.setFromTriplets(triplets.begin(), triplets.end());
    block.makeCompressed();
    return block;
}

SaddleOrdering analyze_saddle(const FemOperators& ops, const SparseMatrix& upperLeft) {
    // Any positive lambda gives the same pattern.
    SparseMatrix block = saddle_matrix(ops, upperLeft, 1.0);
    SaddleOrdering ordering;
    Eigen::COLAMDOrdering<int> colamd;
    colamd(block, ordering.columns);
    ordering.size = block.rows();
    return ordering;
}

SaddleSystem SaddleSystem::build(const FemOperators& ops, const SparseMatrix& upperLeft, double lambda) {
    return build(ops, upperLeft, lambda, analyze_saddle(ops, upperLeft));
}

SaddleSystem SaddleSystem::build(const FemOperators& ops, const SparseMatrix& upperLeft, double lambda,
                                 const SaddleOrdering& ordering) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
        throw InputError("smoothing parameter must be a finite positive number, got " + std::to_string(lambda));
    }
    SaddleSystem sys;
    sys.lambda_ = lambda;
    sys.k_ = static_cast<Eigen::Index>(ops.basis_count());
    sys.matrix_ = saddle_matrix(ops, upperLeft, lambda);
    if (ordering.size != sys.matrix_.rows()) {
        throw DimensionMismatch("saddle ordering was computed for a different system size");
    }
    // COLAMD moves column i to position perm(i), i.e. A * perm^{-1}.
    sys.columns_ = ordering.columns.inverse();

    SparseMatrix permuted = sys.matrix_ * sys.columns_;
    permuted.makeCompressed();
    auto lu = std::make_shared<Lu>();
    lu->analyzePattern(permuted);
    lu->factorize(permuted);
    if (lu->info() != Eigen::Success) {
        throw SingularSystem("saddle-point factorization failed at lambda = " + std::to_string(lambda) +
                             ": " + lu->lastErrorMessage());
    }
    sys.lu_ = std::move(lu);
    return sys;
}

Vector SaddleSystem::solve_full(const Vector& rhs) const {
    if (rhs.size() != 2 * k_) {
        throw DimensionMismatch("saddle rhs has length " + std::to_string(rhs.size()) + ", expected " +
                                std::to_string(2 * k_));
    }
    const Vector y = lu_->solve(rhs);
    return columns_ * y;
}

SaddleSolution SaddleSystem::solve(const Vector& rhsTop) const {
    if (rhsTop.size() != k_) {
        throw DimensionMismatch("saddle rhs has length " + std::to_string(rhsTop.size()) + ", expected " +
                                std::to_string(k_));
    }
    Vector rhs = Vector::Zero(2 * k_);
    rhs.head(k_) = rhsTop;
    const Vector x = solve_full(rhs);
    return {x.head(k_), x.tail(k_)};
}

double saddle_density(const SaddleSystem& system) {
    const auto& m = system.matrix();
    return static_cast<double>(m.nonZeros()) / (static_cast<double>(m.rows()) * static_cast<double>(m.cols()));
}

}  // namespace smfpca
