// Sparse-observation variant: each function x_i is seen at its own points.
// Score step u_i ~ sum_j x_i(p_ij) f(p_ij); function step with the weighted
// gram L = sum_i u_i^2 sum_j psi(p_ij) psi(p_ij)^T and right-hand side D u.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <tuple>

#include <Eigen/SVD>

#include "alternating.hpp"
#include "smfpca/errors.hpp"
#include "smfpca/parallel.hpp"
#include "smfpca/selection.hpp"

namespace smfpca {

namespace {

struct Sample {
    BasisRow basis;
    double value = 0.0;
    std::size_t site = 0;  ///< index of the distinct location
};

using SampleRows = std::vector<std::vector<Sample>>;

struct MissingModel {
    SampleRows rows;
    Eigen::Index k = 0;
    /// Observations sharing a surface location, as (function, sample) pairs.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> sites;
    std::vector<BasisRow> siteBasis;

    std::size_t n() const { return rows.size(); }
    std::size_t count() const {
        std::size_t c = 0;
        for (const auto& r : rows) c += r.size();
        return c;
    }
};

MissingModel prepare(const ObservationSet& obs, const FemOperators& ops) {
    if (obs.n() == 0) throw InputError("observation set is empty");
    MissingModel model;
    model.k = static_cast<Eigen::Index>(ops.basis_count());
    model.rows.resize(obs.n());
    using Key = std::tuple<std::size_t, double, double, double>;
    std::map<Key, std::size_t> siteIndex;
    for (std::size_t i = 0; i < obs.n(); ++i) {
        const auto& fn = obs.functions[i];
        if (fn.empty()) throw InputError("function " + std::to_string(i) + " has no observations");
        for (std::size_t j = 0; j < fn.size(); ++j) {
            const Observation& o = fn[j];
            if (!std::isfinite(o.value)) {
                throw InputError("function " + std::to_string(i) + " observation " + std::to_string(j) +
                                 " is not finite");
            }
            validate_location(*ops.mesh, o.location);
            const BasisRow basis = basis_row(*ops.mesh, o.location);
            const Key key{o.location.triangle, o.location.barycentric[0], o.location.barycentric[1],
                          o.location.barycentric[2]};
            auto [it, inserted] = siteIndex.emplace(key, model.sites.size());
            if (inserted) {
                model.sites.emplace_back();
                model.siteBasis.push_back(basis);
            }
            model.sites[it->second].emplace_back(i, j);
            model.rows[i].push_back({basis, o.value, it->second});
        }
    }
    return model;
}

double eval_at(const BasisRow& b, const Vector& f) {
    return b.weight[0] * f[b.vertex[0]] + b.weight[1] * f[b.vertex[1]] + b.weight[2] * f[b.vertex[2]];
}

/// D(k, i) = sum_j psi_k(p_ij) x_i(p_ij)
Matrix data_projection(const SampleRows& rows, Eigen::Index k) {
    Matrix d = Matrix::Zero(k, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const Sample& s : rows[i]) {
            for (int a = 0; a < 3; ++a) d(s.basis.vertex[a], static_cast<Eigen::Index>(i)) += s.basis.weight[a] * s.value;
        }
    }
    return d;
}

SparseMatrix weighted_gram(const SampleRows& rows, const Vector& weights, Eigen::Index k) {
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double w = weights[static_cast<Eigen::Index>(i)];
        for (const Sample& s : rows[i]) {
            for (int a = 0; a < 3; ++a) {
                if (s.basis.weight[a] == 0.0) continue;
                for (int b = 0; b < 3; ++b) {
                    if (s.basis.weight[b] == 0.0) continue;
                    triplets.emplace_back(s.basis.vertex[a], s.basis.vertex[b], w * s.basis.weight[a] * s.basis.weight[b]);
                }
            }
        }
    }
    SparseMatrix l(k, k);
    l.setFromTriplets(triplets.begin(), triplets.end());
    l.makeCompressed();
    return l;
}

double fidelity(const SampleRows& rows, const Vector& u, const Vector& f) {
    double sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const Sample& s : rows[i]) {
            const double r = s.value - u[static_cast<Eigen::Index>(i)] * eval_at(s.basis, f);
            sum += r * r;
        }
    }
    return sum;
}

/// Weighted residual of the regression step. Per location p the scores
/// pool into w_p = sum_i u_i^2 and z_p = sum_i u_i x_i(p), so the data term
/// equals a constant plus sum_p w_p (z_p / w_p - f(p))^2; this is that sum
/// together with the number of locations carrying weight. On complete data
/// w_p = 1 and it reduces to ||X^T u - Psi f||^2 over s locations.
std::pair<double, std::size_t> pooled_residual(const SampleRows& rows, const std::vector<BasisRow>& siteBasis,
                                               const Vector& u, const Vector& f) {
    std::vector<double> w(siteBasis.size(), 0.0), z(siteBasis.size(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double ui = u[static_cast<Eigen::Index>(i)];
        for (const Sample& s : rows[i]) {
            w[s.site] += ui * ui;
            z[s.site] += ui * s.value;
        }
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < siteBasis.size(); ++p) {
        if (!(w[p] > 0.0)) continue;
        const double r = z[p] - w[p] * eval_at(siteBasis[p], f);
        sum += r * r / w[p];
        ++count;
    }
    return {sum, count};
}

/// Starting scores from the SVD of the zero-filled function-by-location
/// matrix; on complete data this is the dense start exactly.
Vector missing_initial_scores(const SampleRows& rows, std::size_t siteCount) {
    DataMatrix z{Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(siteCount)), false};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const Sample& s : rows[i]) z.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s.site)) = s.value;
    }
    return score_step(z, initialize(z));
}

Vector missing_scores(const Matrix& d, const Vector& f) {
    Vector a = d.transpose() * f;
    const double norm = a.norm();
    if (!(norm > 0.0)) throw DegenerateData("all score inner products vanish");
    return a / norm;
}

/// tr((L + lambda R1 R0^-1 R1)^-1 L) from block solves.
double weighted_trace(const SaddleSystem& system, const SparseMatrix& l, std::uint64_t seed) {
    const Eigen::Index k = l.rows();
    if (static_cast<std::size_t>(k) <= kExactTraceLimit) {
        double trace = 0.0;
        for (Eigen::Index c = 0; c < k; ++c) {
            const Vector column = l.col(c);
            if (column.squaredNorm() == 0.0) continue;
            trace += system.solve(column).f[c];
        }
        return trace;
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    double sum = 0.0;
    for (int probe = 0; probe < kHutchinsonProbes; ++probe) {
        Vector z(k);
        for (Eigen::Index j = 0; j < k; ++j) z[j] = coin(rng) ? 1.0 : -1.0;
        sum += z.dot(system.solve(l * z).f);
    }
    return sum / kHutchinsonProbes;
}

class MissingFitter {
public:
    MissingFitter(const FemOperators& ops, const FitOptions& opts, const SaddleOrdering& ordering,
                  const std::vector<BasisRow>& siteBasis)
        : ops_(ops), opts_(opts), ordering_(ordering), siteBasis_(siteBasis) {}

    /// `grid` holds one lambda for a fixed fit, or the GCV candidates.
    PcComponent fit(const SampleRows& rows, const std::vector<double>& grid, bool gcv,
                    SelectionTrace* trace = nullptr) const {
        const Eigen::Index k = static_cast<Eigen::Index>(ops_.basis_count());
        const Matrix d = data_projection(rows, k);
        Vector f;
        PcComponent comp;
        SelectionTrace local;
        local.method = SelectionMethod::Gcv;
        local.lambdaGrid = grid;
        Vector u, g, previous;
        const int passes = std::max(1, opts_.maxIterations);
        for (int it = 0; it < passes; ++it) {
            u = it == 0 ? missing_initial_scores(rows, siteBasis_.size()) : missing_scores(d, f);
            const SparseMatrix l = weighted_gram(rows, u.cwiseAbs2(), k);
            const Vector rhs = d * u;
            SaddleSolution sol;
            double lambda = grid.front();
            if (!gcv) {
                sol = SaddleSystem::build(ops_, l, lambda, ordering_).solve(rhs);
            } else {
                std::vector<double> scores(grid.size());
                std::vector<SaddleSolution> sols(grid.size());
                local.warnings.clear();
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    const SaddleSystem system = SaddleSystem::build(ops_, l, grid[i], ordering_);
                    sols[i] = system.solve(rhs);
                    const double tr = weighted_trace(system, l, opts_.seed);
                    const auto [residual, sites] = pooled_residual(rows, siteBasis_, u, sols[i].f);
                    scores[i] = gcv_score(residual, tr, static_cast<double>(sites));
                    if (std::isinf(scores[i])) {
                        local.warnings.push_back("lambda " + std::to_string(grid[i]) +
                                                 ": smoother trace reaches the location count, GCV undefined; skipped");
                    }
                }
                const std::size_t best = argmin_first(scores);
                if (!std::isfinite(scores[best])) {
                    throw DegenerateSmoother("every grid lambda gives a degenerate GCV smoother");
                }
                local.scores = std::move(scores);
                local.chosen = best;
                local.history.push_back(best);
                sol = std::move(sols[best]);
                lambda = grid[best];
            }
            f = std::move(sol.f);
            g = std::move(sol.g);
            const double objective = fidelity(rows, u, f) + lambda * u.squaredNorm() * penalty_value(g, ops_);
            // The normalized score formula is not the exact constrained minimizer
            // when functions have different observation counts, so the objective
            // is recorded but not required to decrease.
            detail::push_objective(comp, objective, lambda, false);
            comp.lambda = lambda;
            comp.iterations = it + 1;
            if (it > 0 && (f - previous).norm() <= opts_.tolerance * f.norm()) break;
            previous = f;
        }
        detail::finalize_component(comp, std::move(u), std::move(f), std::move(g), ops_);
        if (trace && gcv) *trace = std::move(local);
        return comp;
    }

private:
    const FemOperators& ops_;
    const FitOptions& opts_;
    const SaddleOrdering& ordering_;
    const std::vector<BasisRow>& siteBasis_;
};

SelectionTrace kfold_missing(const SampleRows& rows, const std::vector<double>& grid, int folds,
                             const MissingFitter& fitter, const FemOperators& ops, const FitOptions& opts) {
    const std::vector<int> assignment = fold_assignment(rows.size(), folds, opts.seed);
    std::vector<SampleRows> training(static_cast<std::size_t>(folds));
    std::vector<SampleRows> validation(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int k = 0; k < folds; ++k) {
            (assignment[i] == k ? validation : training)[static_cast<std::size_t>(k)].push_back(rows[i]);
        }
    }
    std::size_t total = 0;
    for (const auto& r : rows) total += r.size();

    const std::size_t tasks = grid.size() * static_cast<std::size_t>(folds);
    std::vector<double> residual(tasks, 0.0);
    parallel_for(tasks, opts.threads, [&](std::size_t task) {
        const std::size_t li = task / static_cast<std::size_t>(folds);
        const std::size_t k = task % static_cast<std::size_t>(folds);
        const PcComponent comp = fitter.fit(training[k], {grid[li]}, false);
        const double penalty = grid[li] * penalty_value(comp.gCoefficients, ops);
        double sum = 0.0;
        for (const auto& row : validation[k]) {
            double num = 0.0, den = 0.0;
            for (const Sample& s : row) {
                const double fv = eval_at(s.basis, comp.fCoefficients);
                num += s.value * fv;
                den += fv * fv;
            }
            const double ui = num / (den + penalty);
            for (const Sample& s : row) {
                const double r = s.value - ui * eval_at(s.basis, comp.fCoefficients);
                sum += r * r;
            }
        }
        residual[task] = sum;
    });

    SelectionTrace trace;
    trace.method = SelectionMethod::KFold;
    trace.lambdaGrid = grid;
    trace.scores.assign(grid.size(), 0.0);
    for (std::size_t li = 0; li < grid.size(); ++li) {
        double sum = 0.0;
        for (int k = 0; k < folds; ++k) sum += residual[li * static_cast<std::size_t>(folds) + static_cast<std::size_t>(k)];
        trace.scores[li] = sum / static_cast<double>(total);
    }
    trace.chosen = argmin_first(trace.scores);
    return trace;
}

/// Remove u_i * sum_{i'} u_{i'} x_{i'}(p) at every shared location p; on a
/// complete grid this is X - u (u^T X).
void deflate_missing(MissingModel& model, const Vector& u) {
    for (const auto& site : model.sites) {
        double projection = 0.0;
        for (auto [i, j] : site) projection += u[static_cast<Eigen::Index>(i)] * model.rows[i][j].value;
        for (auto [i, j] : site) model.rows[i][j].value -= u[static_cast<Eigen::Index>(i)] * projection;
    }
}

}  // namespace

SmFpcaResult fit_missing(const ObservationSet& obs, int nComponents, const std::vector<double>& lambdaGrid,
                         const Selection& selection, const FemOperators& ops, const FitOptions& opts) {
    detail::check_fit_request(nComponents, lambdaGrid, selection);
    MissingModel model = prepare(obs, ops);
    if (selection.method == SelectionMethod::KFold &&
        (selection.folds < 2 || static_cast<std::size_t>(selection.folds) > model.n())) {
        throw InvalidFoldCount("fold count " + std::to_string(selection.folds) + " must lie in [2, " +
                               std::to_string(model.n()) + "]");
    }

    const SparseMatrix pattern = weighted_gram(model.rows, Vector::Ones(static_cast<Eigen::Index>(model.n())), model.k);
    const SaddleOrdering ordering = analyze_saddle(ops, pattern);
    const MissingFitter fitter(ops, opts, ordering, model.siteBasis);

    SmFpcaResult result;
    for (const auto& row : model.rows) {
        double sum = 0.0;
        for (const Sample& s : row) sum += s.value * s.value;
        result.totalVariance += ops.mesh->total_area() / static_cast<double>(row.size()) * sum;
    }
    for (int c = 0; c < nComponents; ++c) {
        PcComponent comp;
        SelectionTrace trace;
        switch (selection.method) {
            case SelectionMethod::Fixed:
                comp = fitter.fit(model.rows, {selection.lambda}, false);
                trace.method = SelectionMethod::Fixed;
                trace.lambdaGrid = {selection.lambda};
                trace.scores = {0.0};
                break;
            case SelectionMethod::KFold:
                trace = kfold_missing(model.rows, lambdaGrid, selection.folds, fitter, ops, opts);
                comp = fitter.fit(model.rows, {lambdaGrid[trace.chosen]}, false);
                break;
            case SelectionMethod::Gcv:
                comp = fitter.fit(model.rows, lambdaGrid, true, &trace);
                break;
        }
        deflate_missing(model, comp.scores);
        result.components.push_back(std::move(comp));
        result.selectionTraces.push_back(std::move(trace));
    }
    detail::finish_result_variance(result);
    return result;
}

}  // namespace smfpca
