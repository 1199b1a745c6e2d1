#pragma once

#include <vector>

#include "smfpca/fem.hpp"
#include "smfpca/smfpca.hpp"

namespace smfpca {

/// Plain PCA of the centered data matrix. Loadings are read as FE
/// coefficients (one value per vertex), so s must equal K with vertex
/// locations. Each f is rescaled to f^T R0 f = 1; functionNorm carries
/// sigma_j times the pre-scaling L2 norm so u * functionNorm * f reproduces
/// the rank-j term.
std::vector<PcComponent> mv_pca(const DataMatrix& x, int nComponents, const FemOperators& ops);

/// Mean squared difference, minimized over the sign of `estimate`.
double mse(const Vector& estimate, const Vector& truth);

/// arccos of the smallest singular value of Q_a^T Q_b. Throws RankDeficient
/// if either column set is numerically rank deficient.
double principal_angle(const Matrix& a, const Matrix& b);

struct EvaluationReport {
    std::vector<double> pcFunctionMse;  ///< per component, at sampling locations
    std::vector<double> scoreMse;       ///< per component, unnormalized scores
    double signalMse = 0.0;             ///< reconstruction vs noiseless signal
    double principalAngle = 0.0;
    std::vector<double> explainedVarianceCurve;  ///< cumulative fraction
};

/// Components are matched to truths by position. `trueSignal` is the
/// noiseless n x s signal; `meanField` (may be empty) is added back to the
/// reconstruction. True functions are normalized to unit L2 norm before
/// comparison and true scores scaled by the same factor. The explained
/// variance curve divides cumulative adjusted variance by totalVariance.
EvaluationReport evaluate_fit(const std::vector<PcComponent>& components, const Vector& meanField,
                              double totalVariance, const std::vector<Vector>& trueComponents,
                              const Matrix& trueScores, const Matrix& trueSignal, const FemOperators& ops);

}  // namespace smfpca
