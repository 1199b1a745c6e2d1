#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "smfpca/errors.hpp"
#include "smfpca/smfpca.hpp"

namespace smfpca::detail {

inline constexpr double kMonotoneSlack = 1e-9;

void finish_result_variance(SmFpcaResult& result);
void check_fit_request(int nComponents, const std::vector<double>& grid, const Selection& selection);

struct FunctionUpdate {
    SaddleSolution solution;
    double lambda = 0.0;
};

/// Normalize f to unit L2(M_T) norm, record the norm, and fix the joint sign.
inline void finalize_component(PcComponent& comp, Vector u, Vector f, Vector g, const FemOperators& ops) {
    const double norm2 = f.dot(ops.mass * f);
    if (!(norm2 > 0.0) || !std::isfinite(norm2)) {
        throw DegenerateData("estimated PC function is identically zero");
    }
    const double norm = std::sqrt(norm2);
    comp.functionNorm = norm;
    comp.scores = std::move(u);
    comp.fCoefficients = f / norm;
    comp.gCoefficients = g / norm;
    fix_component_sign(comp);
}

/// Guards the nonincreasing objective under a fixed lambda.
inline void push_objective(PcComponent& comp, double value, double lambda, bool guard = true) {
    if (guard && !comp.objectiveTrace.empty() && comp.lambdaHistory.back() == lambda) {
        const double prev = comp.objectiveTrace.back();
        if (value > prev + kMonotoneSlack * std::abs(prev)) {
            throw NonMonotoneObjective("objective increased from " + std::to_string(prev) + " to " +
                                       std::to_string(value) + " at iteration " +
                                       std::to_string(comp.objectiveTrace.size()));
        }
    }
    comp.objectiveTrace.push_back(value);
    comp.lambdaHistory.push_back(lambda);
}

/// Algorithm skeleton shared by the fixed-lambda and GCV fits:
/// SVD start, then score step / function step / evaluation until the
/// relative change of f drops below tolerance or the budget runs out.
/// `step(u)` returns the function-step solution and the lambda it used.
template <typename Step>
PcComponent run_alternating(const DataMatrix& x, const FemOperators& ops, const FitOptions& opts, Step&& step) {
    if (x.s() != static_cast<Eigen::Index>(ops.location_count())) {
        throw DimensionMismatch("data has " + std::to_string(x.s()) + " columns but the operators have " +
                                std::to_string(ops.location_count()) + " locations");
    }
    Vector fs = initialize(x);
    PcComponent comp;
    Vector u, f, g, previous;
    const int passes = std::max(1, opts.maxIterations);
    for (int it = 0; it < passes; ++it) {
        u = score_step(x, fs);
        FunctionUpdate update = step(u);
        f = std::move(update.solution.f);
        g = std::move(update.solution.g);
        fs = ops.psi * f;
        push_objective(comp, objective_value(x, u, fs, g, update.lambda, ops), update.lambda);
        comp.lambda = update.lambda;
        comp.iterations = it + 1;
        if (it > 0 && (f - previous).norm() <= opts.tolerance * f.norm()) break;
        previous = f;
    }
    finalize_component(comp, std::move(u), std::move(f), std::move(g), ops);
    return comp;
}

}  // namespace smfpca::detail
