#include "smfpca/smfpca.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "alternating.hpp"
#include "smfpca/errors.hpp"
#include "smfpca/selection.hpp"

namespace smfpca {

std::string to_string(SelectionMethod m) {
    switch (m) {
        case SelectionMethod::KFold: return "kfold";
        case SelectionMethod::Gcv: return "gcv";
        case SelectionMethod::Fixed: return "fixed";
    }
    return "unknown";
}

Vector column_means(const Matrix& x) { return x.colwise().mean().transpose(); }

DataMatrix center_columns(const DataMatrix& x, Vector* means) {
    const Vector mu = column_means(x.values);
    DataMatrix out{x.values.rowwise() - mu.transpose(), true};
    if (means) *means = mu;
    return out;
}

namespace {

bool identity_sampling(const FemOperators& ops) {
    if (ops.psi.rows() != ops.psi.cols() || ops.psi.nonZeros() != ops.psi.rows()) return false;
    for (Eigen::Index c = 0; c < ops.psi.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(ops.psi, c); it; ++it) {
            if (it.row() != it.col() || it.value() != 1.0) return false;
        }
    }
    return true;
}

}  // namespace

double data_energy(const Matrix& x, const FemOperators& ops) {
    if (x.cols() != static_cast<Eigen::Index>(ops.location_count())) {
        throw DimensionMismatch("data_energy: column count does not match sampling locations");
    }
    if (identity_sampling(ops)) return (x * ops.mass).cwiseProduct(x).sum();
    return ops.mesh->total_area() / static_cast<double>(x.cols()) * x.squaredNorm();
}

Vector initialize(const DataMatrix& x) {
    if (x.n() < 1 || x.s() < 2) {
        throw DimensionMismatch("initialize needs at least one row and two columns, got " +
                                std::to_string(x.n()) + "x" + std::to_string(x.s()));
    }
    if (!x.values.allFinite()) throw InputError("data matrix contains non-finite entries");
    if (x.values.cwiseAbs().maxCoeff() == 0.0) throw DegenerateData("data matrix is identically zero");
    Eigen::BDCSVD<Matrix> svd(x.values, Eigen::ComputeThinV);
    Vector v = svd.matrixV().col(0);
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0.0) v = -v;
    return v;
}

Vector score_step(const DataMatrix& x, const Vector& fs) {
    if (fs.size() != x.s()) {
        throw DimensionMismatch("score_step: f_s has length " + std::to_string(fs.size()) + ", expected " +
                                std::to_string(x.s()));
    }
    Vector xf = x.values * fs;
    const double norm = xf.norm();
    if (!(norm > 0.0)) throw DegenerateData("X f_s vanishes: f_s is orthogonal to every observation");
    return xf / norm;
}

SaddleSolution function_step(const DataMatrix& x, const Vector& u, const SaddleSystem& system,
                             const FemOperators& ops) {
    if (u.size() != x.n()) {
        throw DimensionMismatch("function_step: u has length " + std::to_string(u.size()) + ", expected " +
                                std::to_string(x.n()));
    }
    const Vector z = x.values.transpose() * u;
    return system.solve(ops.psi.transpose() * z);
}

double penalty_value(const Vector& g, const FemOperators& ops) {
    if (static_cast<std::size_t>(g.size()) != ops.basis_count()) {
        throw DimensionMismatch("penalty_value: g has length " + std::to_string(g.size()) + ", expected " +
                                std::to_string(ops.basis_count()));
    }
    return g.dot(ops.mass * g);
}

double objective_value(const DataMatrix& x, const Vector& u, const Vector& fs, const Vector& g, double lambda,
                       const FemOperators& ops) {
    const double fidelity = (x.values - u * fs.transpose()).squaredNorm();
    return fidelity + lambda * u.squaredNorm() * penalty_value(g, ops);
}

void fix_component_sign(PcComponent& c) {
    Eigen::Index idx = 0;
    c.fCoefficients.cwiseAbs().maxCoeff(&idx);
    if (c.fCoefficients[idx] < 0.0) {
        c.fCoefficients = -c.fCoefficients;
        c.gCoefficients = -c.gCoefficients;
        c.scores = -c.scores;
    }
}

PcComponent fit_component(const DataMatrix& x, const SaddleSystem& system, const FemOperators& ops,
                          const FitOptions& opts) {
    return detail::run_alternating(x, ops, opts, [&](const Vector& u) {
        return detail::FunctionUpdate{function_step(x, u, system, ops), system.lambda()};
    });
}

PcComponent fit_component(const DataMatrix& x, double lambda, const FemOperators& ops, const FitOptions& opts) {
    const SparseMatrix gram = ops.psi.transpose() * ops.psi;
    const SaddleSystem system = SaddleSystem::build(ops, gram, lambda);
    return fit_component(x, system, ops, opts);
}

DataMatrix deflate(const DataMatrix& x, const PcComponent& component, const FemOperators& /*ops*/) {
    const Vector& u = component.scores;
    if (u.size() != x.n()) throw DimensionMismatch("deflate: score length does not match data rows");
    return {x.values - u * (u.transpose() * x.values), x.centered};
}

std::vector<double> adjusted_total_variance(const std::vector<PcComponent>& components) {
    if (components.empty()) return {};
    const Eigen::Index n = components.front().scores.size();
    const auto k = static_cast<Eigen::Index>(components.size());
    Matrix scaled(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto& c = components[static_cast<std::size_t>(j)];
        if (c.scores.size() != n) throw DimensionMismatch("adjusted_total_variance: score lengths differ");
        scaled.col(j) = c.scores * c.functionNorm;
    }
    Eigen::HouseholderQR<Matrix> qr(scaled);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    std::vector<double> out(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index j = 0; j < std::min(n, k); ++j) out[static_cast<std::size_t>(j)] = r(j, j) * r(j, j);
    return out;
}

namespace {

void finish_variance(SmFpcaResult& result) {
    result.adjustedVariance = adjusted_total_variance(result.components);
    result.cumulativeVariance.clear();
    double running = 0.0;
    for (double v : result.adjustedVariance) {
        running += v;
        result.cumulativeVariance.push_back(running);
    }
}

void check_request(int nComponents, const std::vector<double>& grid, const Selection& selection) {
    if (nComponents < 1) throw InputError("number of components must be >= 1");
    if (selection.method != SelectionMethod::Fixed && grid.empty()) {
        throw InputError("lambda grid must not be empty");
    }
    for (double l : grid) {
        if (!(l > 0.0) || !std::isfinite(l)) throw InputError("lambda grid values must be positive and finite");
    }
    if (selection.method == SelectionMethod::Fixed && !(selection.lambda > 0.0)) {
        throw InputError("fixed lambda must be positive");
    }
}

}  // namespace

SmFpcaResult fit(const DataMatrix& x, int nComponents, const std::vector<double>& lambdaGrid,
                 const Selection& selection, const FemOperators& ops, const FitOptions& opts) {
    check_request(nComponents, lambdaGrid, selection);
    if (x.s() != static_cast<Eigen::Index>(ops.location_count())) {
        throw DimensionMismatch("data has " + std::to_string(x.s()) + " columns but there are " +
                                std::to_string(ops.location_count()) + " sampling locations");
    }
    SmFpcaResult result;
    DataMatrix work = x;
    if (opts.center && !x.centered) work = center_columns(x, &result.meanField);
    result.totalVariance = data_energy(work.values, ops);

    std::unique_ptr<SmootherBank> bank;
    std::unique_ptr<SaddleSystem> fixedSystem;
    if (selection.method == SelectionMethod::Fixed) {
        const SparseMatrix gram = ops.psi.transpose() * ops.psi;
        fixedSystem = std::make_unique<SaddleSystem>(SaddleSystem::build(ops, gram, selection.lambda));
    } else {
        bank = std::make_unique<SmootherBank>(ops, lambdaGrid, opts.threads);
    }

    for (int c = 0; c < nComponents; ++c) {
        PcComponent comp;
        SelectionTrace trace;
        switch (selection.method) {
            case SelectionMethod::Fixed:
                comp = fit_component(work, *fixedSystem, ops, opts);
                trace.method = SelectionMethod::Fixed;
                trace.lambdaGrid = {selection.lambda};
                trace.scores = {0.0};
                break;
            case SelectionMethod::KFold:
                trace = kfold_select(work, *bank, selection.folds, ops, opts);
                comp = fit_component(work, bank->system(trace.chosen), ops, opts);
                break;
            case SelectionMethod::Gcv:
                comp = fit_component_gcv(work, *bank, ops, opts, &trace);
                break;
        }
        work = deflate(work, comp, ops);
        result.components.push_back(std::move(comp));
        result.selectionTraces.push_back(std::move(trace));
    }
    finish_variance(result);
    return result;
}

ObservationSet observations_from_matrix(const Matrix& x, const FemOperators& ops) {
    if (x.cols() != static_cast<Eigen::Index>(ops.location_count())) {
        throw DimensionMismatch("data has " + std::to_string(x.cols()) + " columns but there are " +
                                std::to_string(ops.location_count()) + " sampling locations");
    }
    ObservationSet obs;
    obs.functions.resize(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (std::isnan(x(i, j))) continue;
            obs.functions[static_cast<std::size_t>(i)].push_back({ops.locations[static_cast<std::size_t>(j)], x(i, j)});
        }
    }
    return obs;
}

namespace detail {
// Shared with missing.cpp.
void finish_result_variance(SmFpcaResult& result) { finish_variance(result); }
void check_fit_request(int nComponents, const std::vector<double>& grid, const Selection& selection) {
    check_request(nComponents, grid, selection);
}
}  // namespace detail

}  // namespace smfpca
