#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "smfpca/fem.hpp"
#include "smfpca/saddle.hpp"

namespace smfpca {

/// n x s observations x_i(p_j); rows are subjects, columns sampling locations.
struct DataMatrix {
    Matrix values;
    bool centered = false;

    Eigen::Index n() const { return values.rows(); }
    Eigen::Index s() const { return values.cols(); }
};

struct Observation {
    SurfaceLocation location;
    double value = 0.0;
};

/// Per-function sparse observations, for data with missing entries.
struct ObservationSet {
    std::vector<std::vector<Observation>> functions;

    std::size_t n() const { return functions.size(); }
};

/// One extracted principal component.
struct PcComponent {
    Vector scores;          ///< unit-norm u
    Vector fCoefficients;   ///< FE coefficients of f, f^T R0 f = 1
    Vector gCoefficients;   ///< auxiliary field g ~ Laplace-Beltrami of f, same scaling as f
    double lambda = 0.0;    ///< smoothing parameter of the final iteration
    double functionNorm = 0.0;  ///< L2(M_T) norm of f before normalization
    int iterations = 0;
    std::vector<double> objectiveTrace;
    std::vector<double> lambdaHistory;  ///< per-iteration lambda (varies only under GCV)
};

enum class SelectionMethod { KFold, Gcv, Fixed };

std::string to_string(SelectionMethod m);

struct Selection {
    SelectionMethod method = SelectionMethod::KFold;
    int folds = 5;
    double lambda = 0.0;  ///< used by Fixed

    static Selection kfold(int folds = 5) { return {SelectionMethod::KFold, folds, 0.0}; }
    static Selection gcv() { return {SelectionMethod::Gcv, 0, 0.0}; }
    static Selection fixed(double lambda) { return {SelectionMethod::Fixed, 0, lambda}; }
};

struct SelectionTrace {
    SelectionMethod method = SelectionMethod::KFold;
    std::vector<double> lambdaGrid;
    std::vector<double> scores;
    std::size_t chosen = 0;
    /// GCV: grid index chosen at each outer iteration.
    std::vector<std::size_t> history;
    std::vector<std::string> warnings;
};

struct FitOptions {
    int maxIterations = 15;
    double tolerance = 1e-6;  ///< relative change of f coefficients
    bool center = true;
    std::uint64_t seed = 0;   ///< fold assignment and stochastic trace probes
    int threads = 1;
};

struct SmFpcaResult {
    std::vector<PcComponent> components;
    std::vector<double> adjustedVariance;
    std::vector<double> cumulativeVariance;
    Vector meanField;  ///< empty when no centering was applied
    std::vector<SelectionTrace> selectionTraces;
    double totalVariance = 0.0;  ///< data_energy of the (centered) data
};

/// Column means, and X with them removed.
Vector column_means(const Matrix& x);
DataMatrix center_columns(const DataMatrix& x, Vector* means = nullptr);

/// Sum over rows of the squared L2(M_T) norm of each data function. With
/// one location per vertex (Psi = I) rows are FE coefficient vectors and the
/// norm is exact (x^T R0 x); otherwise it is the equal-weight quadrature
/// (|M_T| / s) sum_j x(p_j)^2.
double data_energy(const Matrix& x, const FemOperators& ops);

/// First right singular vector of X, largest-magnitude entry positive.
Vector initialize(const DataMatrix& x);

/// u = X f_s / ||X f_s||.
Vector score_step(const DataMatrix& x, const Vector& fs);

/// Block solve with rhsTop = Psi^T X^T u.
SaddleSolution function_step(const DataMatrix& x, const Vector& u, const SaddleSystem& system,
                             const FemOperators& ops);

/// g^T R0 g, the discrete roughness penalty.
double penalty_value(const Vector& g, const FemOperators& ops);

/// ||X - u f_s^T||_F^2 + lambda u^T u g^T R0 g
double objective_value(const DataMatrix& x, const Vector& u, const Vector& fs, const Vector& g, double lambda,
                       const FemOperators& ops);

PcComponent fit_component(const DataMatrix& x, double lambda, const FemOperators& ops, const FitOptions& opts = {});
PcComponent fit_component(const DataMatrix& x, const SaddleSystem& system, const FemOperators& ops,
                          const FitOptions& opts = {});

/// X - u (u^T X).
DataMatrix deflate(const DataMatrix& x, const PcComponent& component, const FemOperators& ops);

/// R_jj^2 from the QR factorization of [u_1 ||f_1||, ..., u_k ||f_k||].
std::vector<double> adjusted_total_variance(const std::vector<PcComponent>& components);

SmFpcaResult fit(const DataMatrix& x, int nComponents, const std::vector<double>& lambdaGrid,
                 const Selection& selection, const FemOperators& ops, const FitOptions& opts = {});

/// Sparse-observation variant. No centering is applied; callers center beforehand.
SmFpcaResult fit_missing(const ObservationSet& obs, int nComponents, const std::vector<double>& lambdaGrid,
                         const Selection& selection, const FemOperators& ops, const FitOptions& opts = {});

/// Dense matrix with NaN for missing cells -> ObservationSet over the operator locations.
ObservationSet observations_from_matrix(const Matrix& x, const FemOperators& ops);

/// Flip (u, f, g) jointly so the largest-magnitude f coefficient is positive.
void fix_component_sign(PcComponent& component);

}  // namespace smfpca
