#include "smfpca/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "alternating.hpp"
#include "smfpca/errors.hpp"
#include "smfpca/parallel.hpp"

namespace smfpca {

namespace {

constexpr double kIdentitySmootherSlack = 1e-8;

struct GcvEvaluation {
    std::vector<double> scores;
    std::vector<SaddleSolution> solutions;
    std::vector<std::string> warnings;
};

GcvEvaluation evaluate_gcv(const Vector& z, const SmootherBank& bank, const FemOperators& ops) {
    const Vector rhs = ops.psi.transpose() * z;
    const auto s = static_cast<double>(z.size());
    GcvEvaluation out;
    out.scores.resize(bank.size());
    out.solutions.resize(bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) {
        out.solutions[i] = bank.system(i).solve(rhs);
        const double residual = (z - ops.psi * out.solutions[i].f).squaredNorm();
        out.scores[i] = gcv_score(residual, bank.trace(i), s);
        if (std::isinf(out.scores[i])) {
            out.warnings.push_back("lambda " + std::to_string(bank.grid()[i]) +
                                   ": smoother trace reaches the sample count, GCV undefined; skipped");
        }
    }
    return out;
}

std::size_t checked_argmin(const std::vector<double>& scores) {
    const std::size_t best = argmin_first(scores);
    if (!std::isfinite(scores[best])) {
        throw DegenerateSmoother("every grid lambda gives a degenerate GCV smoother");
    }
    return best;
}

}  // namespace

std::size_t argmin_first(const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] < scores[best]) best = i;
    }
    return best;
}

SmootherBank::SmootherBank(const FemOperators& ops, std::vector<double> lambdaGrid, int threads)
    : grid_(std::move(lambdaGrid)) {
    if (grid_.empty()) throw InputError("lambda grid must not be empty");
    const SparseMatrix gram = ops.psi.transpose() * ops.psi;
    const SaddleOrdering ordering = analyze_saddle(ops, gram);
    systems_.resize(grid_.size());
    parallel_for(grid_.size(), threads,
                 [&](std::size_t i) { systems_[i] = SaddleSystem::build(ops, gram, grid_[i], ordering); });
}

void SmootherBank::ensure_traces(const FemOperators& ops, std::uint64_t seed, int threads) {
    if (has_traces()) return;
    std::vector<double> traces(grid_.size());
    parallel_for(grid_.size(), threads, [&](std::size_t i) { traces[i] = smoother_trace(systems_[i], ops, seed); });
    traces_ = std::move(traces);
}

double smoother_trace(const SaddleSystem& system, const FemOperators& ops, std::uint64_t seed) {
    const SparseMatrix psiT = ops.psi.transpose();
    const auto s = static_cast<Eigen::Index>(ops.location_count());
    if (static_cast<std::size_t>(s) <= kExactTraceLimit) {
        double trace = 0.0;
        for (Eigen::Index j = 0; j < s; ++j) {
            const Vector column = psiT.col(j);
            const SaddleSolution sol = system.solve(column);
            trace += column.dot(sol.f);
        }
        return trace;
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    double sum = 0.0;
    for (int probe = 0; probe < kHutchinsonProbes; ++probe) {
        Vector z(s);
        for (Eigen::Index j = 0; j < s; ++j) z[j] = coin(rng) ? 1.0 : -1.0;
        const Vector rhs = psiT * z;
        sum += rhs.dot(system.solve(rhs).f);
    }
    return sum / kHutchinsonProbes;
}

std::vector<double> default_lambda_grid(const FemOperators& ops, int points, double lo, double hi) {
    if (points < 1 || !(lo > 0.0) || !(hi >= lo)) throw InputError("invalid lambda grid specification");
    const Vector lumped = ops.mass * Vector::Ones(static_cast<Eigen::Index>(ops.basis_count()));
    double penaltyTrace = 0.0;
    for (Eigen::Index c = 0; c < ops.stiffness.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(ops.stiffness, c); it; ++it) {
            penaltyTrace += it.value() * it.value() / lumped[it.col()];
        }
    }
    const double dataTrace = ops.psi.squaredNorm();
    const double scale = penaltyTrace > 0.0 ? dataTrace / penaltyTrace : 1.0;
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        grid[static_cast<std::size_t>(i)] = scale * std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo)));
    }
    return grid;
}

std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
    if (folds < 2 || static_cast<std::size_t>(folds) > n) {
        throw InvalidFoldCount("fold count " + std::to_string(folds) + " must lie in [2, " + std::to_string(n) + "]");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold(n);
    for (std::size_t r = 0; r < n; ++r) fold[order[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
    return fold;
}

SelectionTrace kfold_select(const DataMatrix& x, const SmootherBank& bank, int folds, const FemOperators& ops,
                            const FitOptions& opts) {
    const auto n = static_cast<std::size_t>(x.n());
    const std::vector<int> assignment = fold_assignment(n, folds, opts.seed);

    std::vector<DataMatrix> training(static_cast<std::size_t>(folds));
    std::vector<Matrix> validation(static_cast<std::size_t>(folds));
    for (int k = 0; k < folds; ++k) {
        std::vector<Eigen::Index> trainRows, validRows;
        for (std::size_t i = 0; i < n; ++i) {
            (assignment[i] == k ? validRows : trainRows).push_back(static_cast<Eigen::Index>(i));
        }
        training[static_cast<std::size_t>(k)] = {x.values(trainRows, Eigen::all), x.centered};
        validation[static_cast<std::size_t>(k)] = x.values(validRows, Eigen::all);
    }

    const std::size_t tasks = bank.size() * static_cast<std::size_t>(folds);
    std::vector<double> residual(tasks, 0.0);
    parallel_for(tasks, opts.threads, [&](std::size_t task) {
        const std::size_t li = task / static_cast<std::size_t>(folds);
        const std::size_t k = task % static_cast<std::size_t>(folds);
        const SaddleSystem& system = bank.system(li);
        const PcComponent comp = fit_component(training[k], system, ops, opts);
        // Validation scores from the unnormalized score formula
        // u = X f_s / (||f_s||^2 + lambda g^T R0 g); scale of f cancels.
        const Vector fs = ops.psi * comp.fCoefficients;
        const double denom = fs.squaredNorm() + system.lambda() * penalty_value(comp.gCoefficients, ops);
        const Matrix& xv = validation[k];
        const Vector u = xv * fs / denom;
        residual[task] = (xv - u * fs.transpose()).squaredNorm();
    });

    SelectionTrace trace;
    trace.method = SelectionMethod::KFold;
    trace.lambdaGrid = bank.grid();
    trace.scores.assign(bank.size(), 0.0);
    const double normalizer = static_cast<double>(n) * static_cast<double>(x.s());
    for (std::size_t li = 0; li < bank.size(); ++li) {
        double total = 0.0;
        for (int k = 0; k < folds; ++k) total += residual[li * static_cast<std::size_t>(folds) + static_cast<std::size_t>(k)];
        trace.scores[li] = total / normalizer;
    }
    trace.chosen = argmin_first(trace.scores);
    return trace;
}

SelectionTrace kfold_select(const DataMatrix& x, const std::vector<double>& lambdaGrid, int folds,
                            const FemOperators& ops, const FitOptions& opts) {
    if (folds < 2 || folds > x.n()) {
        throw InvalidFoldCount("fold count " + std::to_string(folds) + " must lie in [2, " + std::to_string(x.n()) + "]");
    }
    const SmootherBank bank(ops, lambdaGrid, opts.threads);
    return kfold_select(x, bank, folds, ops, opts);
}

double gcv_score(double residualSquared, double trace, double count) {
    const double ratio = trace / count;
    if (ratio >= 1.0 - kIdentitySmootherSlack) return std::numeric_limits<double>::infinity();
    const double gap = 1.0 - ratio;
    return (residualSquared / count) / (gap * gap);
}

SelectionTrace gcv_select(const DataMatrix& x, const Vector& u, SmootherBank& bank, const FemOperators& ops,
                          std::uint64_t seed) {
    if (u.size() != x.n()) throw DimensionMismatch("gcv_select: u length does not match data rows");
    if (std::abs(u.norm() - 1.0) > 1e-8) throw InputError("gcv_select: u must have unit norm");
    if (x.s() != static_cast<Eigen::Index>(ops.location_count())) {
        throw DimensionMismatch("gcv_select: data columns do not match sampling locations");
    }
    bank.ensure_traces(ops, seed);
    GcvEvaluation eval = evaluate_gcv(x.values.transpose() * u, bank, ops);
    SelectionTrace trace;
    trace.method = SelectionMethod::Gcv;
    trace.lambdaGrid = bank.grid();
    trace.scores = std::move(eval.scores);
    trace.warnings = std::move(eval.warnings);
    trace.chosen = checked_argmin(trace.scores);
    trace.history = {trace.chosen};
    return trace;
}

SelectionTrace gcv_select(const DataMatrix& x, const Vector& u, const std::vector<double>& lambdaGrid,
                          const FemOperators& ops, std::uint64_t seed) {
    SmootherBank bank(ops, lambdaGrid);
    return gcv_select(x, u, bank, ops, seed);
}

PcComponent fit_component_gcv(const DataMatrix& x, SmootherBank& bank, const FemOperators& ops,
                              const FitOptions& opts, SelectionTrace* trace) {
    bank.ensure_traces(ops, opts.seed, opts.threads);
    SelectionTrace local;
    local.method = SelectionMethod::Gcv;
    local.lambdaGrid = bank.grid();
    PcComponent comp = detail::run_alternating(x, ops, opts, [&](const Vector& u) {
        GcvEvaluation eval = evaluate_gcv(x.values.transpose() * u, bank, ops);
        const std::size_t best = checked_argmin(eval.scores);
        local.scores = std::move(eval.scores);
        local.chosen = best;
        local.history.push_back(best);
        local.warnings = std::move(eval.warnings);
        return detail::FunctionUpdate{std::move(eval.solutions[best]), bank.grid()[best]};
    });
    if (trace) *trace = std::move(local);
    return comp;
}

}  // namespace smfpca
