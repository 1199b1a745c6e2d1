#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "smfpca/errors.hpp"
#include "smfpca/selection.hpp"
#include "smfpca/synth.hpp"
#include "support.hpp"

namespace smfpca {
namespace {

using testing::share;

/// Dense GCV: S = Psi (Psi^T Psi + lambda R1 R0^-1 R1)^-1 Psi^T.
double dense_gcv(const FemOperators& ops, const Vector& z, double lambda) {
    const Matrix psi = Matrix(ops.psi);
    const Matrix r0 = Matrix(ops.mass), r1 = Matrix(ops.stiffness);
    const Matrix a = psi.transpose() * psi + lambda * r1 * r0.inverse() * r1;
    const Matrix s = psi * a.inverse() * psi.transpose();
    const double n = static_cast<double>(z.size());
    const double gap = 1.0 - s.trace() / n;
    return (z - s * z).squaredNorm() / n / (gap * gap);
}

TEST(Folds, BalancedAndDeterministic) {
    const auto a = fold_assignment(23, 5, 99);
    EXPECT_EQ(a, fold_assignment(23, 5, 99));
    EXPECT_NE(a, fold_assignment(23, 5, 100));
    std::vector<int> counts(5, 0);
    for (int f : a) counts[static_cast<std::size_t>(f)]++;
    EXPECT_EQ(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()), 1);
}

TEST(Folds, InvalidCounts) {
    EXPECT_THROW(fold_assignment(4, 1, 0), InvalidFoldCount);
    EXPECT_THROW(fold_assignment(4, 5, 0), InvalidFoldCount);
    const FemOperators ops = testing::sphere_ops(0);
    const DataMatrix x{testing::random_matrix(4, 12, 1), false};
    EXPECT_THROW(kfold_select(x, {0.1}, 5, ops, {}), InvalidFoldCount);
}

TEST(KFold, LeaveOneOutMatchesManualLoop) {
    const FemOperators ops = testing::sphere_ops(0);
    const DataMatrix x{testing::random_matrix(4, 12, 2), false};
    const std::vector<double> grid{1e-3, 1e-1, 10.0};
    const SelectionTrace trace = kfold_select(x, grid, 4, ops, {});
    const auto folds = fold_assignment(4, 4, 0);
    EXPECT_EQ(std::set<int>(folds.begin(), folds.end()).size(), 4u);
    for (std::size_t li = 0; li < grid.size(); ++li) {
        double total = 0.0;
        for (Eigen::Index leave = 0; leave < 4; ++leave) {
            Matrix train(3, 12);
            for (Eigen::Index i = 0, r = 0; i < 4; ++i) {
                if (i != leave) train.row(r++) = x.values.row(i);
            }
            const PcComponent c = fit_component({train, false}, grid[li], ops);
            const Vector fs = c.fCoefficients;  // Psi = I
            const double denom = fs.squaredNorm() + grid[li] * c.gCoefficients.dot(ops.mass * c.gCoefficients);
            const Vector xi = x.values.row(leave).transpose();
            const double u = xi.dot(fs) / denom;
            total += (xi - u * fs).squaredNorm();
        }
        EXPECT_NEAR(trace.scores[li], total / (4.0 * 12.0), 1e-10 * total);
    }
    EXPECT_EQ(trace.chosen, argmin_first(trace.scores));
}

TEST(KFold, SeedDeterminismAndThreads) {
    const FemOperators ops = testing::sphere_ops(1);
    const DataMatrix x{testing::random_matrix(15, 42, 3), false};
    const auto grid = default_lambda_grid(ops, 5);
    FitOptions one, four;
    four.threads = 4;
    const SelectionTrace a = kfold_select(x, grid, 5, ops, one);
    EXPECT_EQ(a.scores, kfold_select(x, grid, 5, ops, one).scores);
    EXPECT_EQ(a.scores, kfold_select(x, grid, 5, ops, four).scores);
}

TEST(Gcv, MatchesDenseSmoother) {
    auto mesh = share(unit_sphere_mesh(1));
    for (const auto& ops : {assemble_at_vertices(mesh), assemble(mesh, testing::random_locations(*mesh, 90, 4))}) {
        const auto s = static_cast<Eigen::Index>(ops.location_count());
        const DataMatrix x{testing::random_matrix(7, s, 5), false};
        Vector u = testing::random_matrix(7, 1, 6);
        u.normalize();
        const std::vector<double> grid{1e-4, 1e-2, 1.0, 100.0};
        const SelectionTrace trace = gcv_select(x, u, grid, ops);
        const Vector z = x.values.transpose() * u;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double oracle = dense_gcv(ops, z, grid[i]);
            EXPECT_NEAR(trace.scores[i], oracle, 1e-8 * oracle) << "lambda " << grid[i];
        }
        EXPECT_EQ(trace.chosen, argmin_first(trace.scores));
    }
}

TEST(Gcv, ExactTraceMatchesDense) {
    auto mesh = share(unit_sphere_mesh(1));
    const FemOperators ops = assemble(mesh, testing::random_locations(*mesh, 60, 7));
    const SmootherBank bank(ops, {0.05});
    const Matrix psi = Matrix(ops.psi);
    const Matrix a = psi.transpose() * psi +
                     0.05 * Matrix(ops.stiffness) * Matrix(ops.mass).inverse() * Matrix(ops.stiffness);
    EXPECT_NEAR(smoother_trace(bank.system(0), ops, 0), (psi * a.inverse() * psi.transpose()).trace(), 1e-9);
}

TEST(Gcv, LargeLambdaIsConstantFit) {
    const FemOperators ops = testing::sphere_ops(1);
    ASSERT_EQ(ops.basis_count(), 42u);
    const DataMatrix x{testing::random_matrix(6, 42, 8), false};
    Vector u = testing::random_matrix(6, 1, 9);
    u.normalize();
    const Vector z = x.values.transpose() * u;
    const double s = 42.0;
    const double expected = (z.array() - z.mean()).matrix().squaredNorm() / s / std::pow(1.0 - 1.0 / s, 2);
    const SelectionTrace trace = gcv_select(x, u, {1e12}, ops);
    EXPECT_NEAR(trace.scores[0], expected, 1e-6 * expected);
}

TEST(Gcv, SignOfScoresIrrelevant) {
    const FemOperators ops = testing::sphere_ops(1);
    const DataMatrix x{testing::random_matrix(6, 42, 10), false};
    Vector u = testing::random_matrix(6, 1, 11);
    u.normalize();
    const auto grid = default_lambda_grid(ops, 6);
    const SelectionTrace a = gcv_select(x, u, grid, ops);
    const SelectionTrace b = gcv_select(x, -u, grid, ops);
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-12 * a.scores[i]);
    EXPECT_EQ(a.chosen, b.chosen);
}

TEST(Gcv, IdentitySmootherScoresInfinity) {
    const FemOperators ops = testing::sphere_ops(1);
    const DataMatrix x{testing::random_matrix(6, 42, 12), false};
    Vector u = testing::random_matrix(6, 1, 13);
    u.normalize();
    const SelectionTrace mixed = gcv_select(x, u, {1e-16, 1.0}, ops);
    EXPECT_TRUE(std::isinf(mixed.scores[0]));
    EXPECT_FALSE(mixed.warnings.empty());
    EXPECT_EQ(mixed.chosen, 1u);
    EXPECT_THROW(gcv_select(x, u, {1e-16, 1e-17}, ops), DegenerateSmoother);
}

TEST(Gcv, ScoreFormula) {
    EXPECT_DOUBLE_EQ(gcv_score(8.0, 2.0, 4.0), 8.0);
    EXPECT_TRUE(std::isinf(gcv_score(1.0, 4.0, 4.0)));
}

TEST(Gcv, InputChecks) {
    const FemOperators ops = testing::sphere_ops(0);
    const DataMatrix x{testing::random_matrix(5, 12, 14), false};
    EXPECT_THROW(gcv_select(x, Vector::Ones(5), {1.0}, ops), InputError);
    EXPECT_THROW(gcv_select(x, Vector::Unit(4, 0), {1.0}, ops), DimensionMismatch);
    EXPECT_THROW(gcv_select(x, Vector::Unit(5, 0), {}, ops), InputError);
}

TEST(Gcv, HistoryRecordedEveryIteration) {
    const FemOperators ops = testing::sphere_ops(2);
    const SyntheticDataset data = generate_eigen_dataset(ops, {1, 4}, {5, 2}, 30, 0.2, 3);
    SmootherBank bank(ops, default_lambda_grid(ops));
    SelectionTrace trace;
    const PcComponent c = fit_component_gcv(center_columns(data.x), bank, ops, {}, &trace);
    ASSERT_EQ(trace.history.size(), static_cast<std::size_t>(c.iterations));
    ASSERT_EQ(c.lambdaHistory.size(), trace.history.size());
    for (std::size_t t = 0; t < trace.history.size(); ++t) {
        EXPECT_EQ(c.lambdaHistory[t], bank.grid()[trace.history[t]]);
    }
    EXPECT_EQ(c.lambda, bank.grid()[trace.chosen]);
}

TEST(Grid, LogSpacedAndScaled) {
    const FemOperators ops = testing::sphere_ops(1);
    const auto grid = default_lambda_grid(ops);
    ASSERT_EQ(grid.size(), 13u);
    for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_NEAR(grid[i] / grid[i - 1], std::pow(1e8, 1.0 / 12), 1e-9);
    EXPECT_NEAR(grid.back() / grid.front(), 1e8, 1e-3);
    EXPECT_THROW(default_lambda_grid(ops, 0), InputError);
}

TEST(Argmin, FirstOfTies) {
    EXPECT_EQ(argmin_first({3.0, 1.0, 1.0, 2.0}), 1u);
}

}  // namespace
}  // namespace smfpca
