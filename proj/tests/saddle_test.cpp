#include <cmath>

#include <gtest/gtest.h>

#include "smfpca/errors.hpp"
#include "smfpca/saddle.hpp"
#include "support.hpp"

namespace smfpca {
namespace {

using testing::share;

SparseMatrix gram(const FemOperators& ops) { return ops.psi.transpose() * ops.psi; }

TEST(Saddle, TetrahedronAgainstDenseLu) {
    const FemOperators ops = assemble_at_vertices(share(testing::tetrahedron()));
    const SaddleSystem sys = SaddleSystem::build(ops, gram(ops), 1.0);
    Matrix dense = Matrix::Zero(8, 8);
    dense.topLeftCorner(4, 4) = Matrix(ops.psi.transpose() * ops.psi);
    dense.topRightCorner(4, 4) = Matrix(ops.stiffness);
    dense.bottomLeftCorner(4, 4) = Matrix(ops.stiffness);
    dense.bottomRightCorner(4, 4) = -Matrix(ops.mass);
    EXPECT_LT((Matrix(sys.matrix()) - dense).cwiseAbs().maxCoeff(), 1e-15);
    const Vector rhs = testing::random_matrix(8, 1, 3);
    const Vector oracle = dense.fullPivLu().solve(rhs);
    EXPECT_LT(testing::relative_error(sys.solve_full(rhs), oracle), 1e-10);
}

TEST(Saddle, FactorizationReproducesMatrix) {
    auto mesh = share(unit_sphere_mesh(1));
    const FemOperators ops = assemble(mesh, testing::random_locations(*mesh, 60, 2));
    const SaddleSystem sys = SaddleSystem::build(ops, gram(ops), 0.3);
    const Eigen::Index n = sys.matrix().rows();
    for (Eigen::Index c = 0; c < n; c += 7) {
        const Vector e = Vector::Unit(n, c);
        EXPECT_LT((sys.matrix() * sys.solve_full(e) - e).norm(), 1e-8);
    }
}

TEST(Saddle, MatchesClosedFormAcrossLambda) {
    auto mesh = share(unit_sphere_mesh(1));
    ASSERT_LE(mesh->vertex_count(), 50u);
    for (const auto& ops : {assemble_at_vertices(mesh), assemble(mesh, testing::random_locations(*mesh, 80, 6))}) {
        const Vector z = testing::random_matrix(static_cast<Eigen::Index>(ops.location_count()), 1, 4);
        const Vector rhs = ops.psi.transpose() * z;
        for (double lambda : {1e-4, 1.0, 1e4}) {
            const SaddleSolution sol = SaddleSystem::build(ops, gram(ops), lambda).solve(rhs);
            const Vector oracle = testing::closed_form_f(ops, Matrix(gram(ops)), lambda, rhs);
            EXPECT_LT(testing::relative_error(sol.f, oracle), 1e-8) << "lambda " << lambda;
            EXPECT_LT((ops.mass * sol.g - ops.stiffness * sol.f).norm(), 1e-8 * (ops.stiffness * sol.f).norm() + 1e-14);
        }
    }
}

TEST(Saddle, ZeroRhsGivesZero) {
    const FemOperators ops = testing::sphere_ops(1);
    const SaddleSolution sol = SaddleSystem::build(ops, gram(ops), 1.0).solve(Vector::Zero(42));
    EXPECT_EQ(sol.f.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(sol.g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Saddle, LargeLambdaFlattens) {
    const FemOperators ops = testing::sphere_ops(2);
    const Vector rhs = ops.psi.transpose() * testing::random_matrix(162, 1, 7);
    const SaddleSolution rough = SaddleSystem::build(ops, gram(ops), 1e-6).solve(rhs);
    const SaddleSolution flat = SaddleSystem::build(ops, gram(ops), 1e12).solve(rhs);
    const double roughRatio = (ops.stiffness * rough.f).norm() / rough.f.norm();
    const double flatRatio = (ops.stiffness * flat.f).norm() / flat.f.norm();
    EXPECT_LT(flatRatio, 1e-8 * roughRatio);
    // The limit is the constant: the mean of the data (R0-weighted).
    EXPECT_LT((flat.f.array() - flat.f.mean()).abs().maxCoeff(), 1e-6 * std::abs(flat.f.mean()) + 1e-10);
}

TEST(Saddle, DeterministicRebuild) {
    const FemOperators ops = testing::sphere_ops(2);
    const Vector rhs = testing::random_matrix(162, 1, 9);
    const SaddleSolution a = SaddleSystem::build(ops, gram(ops), 0.01).solve(rhs);
    const SaddleSolution b = SaddleSystem::build(ops, gram(ops), 0.01).solve(rhs);
    EXPECT_EQ(a.f, b.f);
    EXPECT_EQ(a.g, b.g);
}

TEST(Saddle, FactorOnceSolveMany) {
    const FemOperators ops = testing::sphere_ops(1);
    const SparseMatrix ul = gram(ops);
    const SaddleSystem once = SaddleSystem::build(ops, ul, 0.5);
    const Matrix rhs = testing::random_matrix(42, 100, 10);
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
        const SaddleSolution reused = once.solve(rhs.col(c));
        const SaddleSolution fresh = SaddleSystem::build(ops, ul, 0.5).solve(rhs.col(c));
        ASSERT_EQ(reused.f, fresh.f);
        ASSERT_EQ(reused.g, fresh.g);
    }
}

TEST(Saddle, SharedOrderingAcrossLambda) {
    const FemOperators ops = testing::sphere_ops(2);
    const SparseMatrix ul = gram(ops);
    const SaddleOrdering ordering = analyze_saddle(ops, ul);
    const Vector rhs = testing::random_matrix(162, 1, 12);
    for (double lambda : {1e-3, 1.0, 1e3}) {
        const SaddleSolution shared = SaddleSystem::build(ops, ul, lambda, ordering).solve(rhs);
        const SaddleSolution own = SaddleSystem::build(ops, ul, lambda).solve(rhs);
        EXPECT_LT(testing::relative_error(shared.f, own.f), 1e-12);
    }
}

TEST(Saddle, ContinuousInLambda) {
    const FemOperators ops = testing::sphere_ops(2);
    const Vector rhs = testing::random_matrix(162, 1, 13);
    for (double lambda : {1e-4, 1e-1, 1e2}) {
        const Vector a = SaddleSystem::build(ops, gram(ops), lambda).solve(rhs).f;
        const Vector b = SaddleSystem::build(ops, gram(ops), lambda * (1 + 1e-6)).solve(rhs).f;
        EXPECT_LT(testing::relative_error(b, a), 1e-4);
    }
}

TEST(Saddle, InvalidLambda) {
    const FemOperators ops = testing::sphere_ops(0);
    EXPECT_THROW(SaddleSystem::build(ops, gram(ops), -1.0), InputError);
    EXPECT_THROW(SaddleSystem::build(ops, gram(ops), std::nan("")), InputError);
    // lambda = 0 leaves the lower block empty.
    EXPECT_THROW(SaddleSystem::build(ops, gram(ops), 0.0), SingularSystem);
}

TEST(Saddle, DimensionChecks) {
    const FemOperators ops = testing::sphere_ops(0);
    EXPECT_THROW(SaddleSystem::build(ops, SparseMatrix(5, 5), 1.0), DimensionMismatch);
    const SaddleSystem sys = SaddleSystem::build(ops, gram(ops), 1.0);
    EXPECT_THROW(sys.solve(Vector::Zero(5)), DimensionMismatch);
}

TEST(Saddle, SparseOn642VertexMesh) {
    const FemOperators ops = testing::sphere_ops(3);
    ASSERT_EQ(ops.basis_count(), 642u);
    EXPECT_LT(saddle_density(SaddleSystem::build(ops, gram(ops), 1.0)), 0.01);
}

}  // namespace
}  // namespace smfpca
