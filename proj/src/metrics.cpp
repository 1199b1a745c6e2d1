#include "smfpca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "smfpca/errors.hpp"

namespace smfpca {

namespace {

constexpr double kRankTolerance = 1e-10;

Matrix orthonormal_basis(const Matrix& a, const char* which) {
    Eigen::HouseholderQR<Matrix> qr(a);
    const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
    const double scale = std::max(a.colwise().norm().maxCoeff(), 1e-300);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        if (std::abs(r(j, j)) <= kRankTolerance * scale) {
            throw RankDeficient(std::string(which) + " subspace is rank deficient at column " + std::to_string(j));
        }
    }
    return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

}  // namespace

std::vector<PcComponent> mv_pca(const DataMatrix& x, int nComponents, const FemOperators& ops) {
    if (x.s() != static_cast<Eigen::Index>(ops.basis_count()) ||
        x.s() != static_cast<Eigen::Index>(ops.location_count())) {
        throw DimensionMismatch("mv_pca needs one column per mesh vertex, got " + std::to_string(x.s()) +
                                " columns for " + std::to_string(ops.basis_count()) + " vertices");
    }
    if (nComponents < 1 || nComponents > std::min(x.n(), x.s())) {
        throw DimensionMismatch("mv_pca: component count " + std::to_string(nComponents) + " exceeds min(n, s)");
    }
    const Matrix centered = x.centered ? x.values : Matrix(x.values.rowwise() - x.values.colwise().mean());
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    std::vector<PcComponent> out;
    for (int j = 0; j < nComponents; ++j) {
        const Vector loading = ops.psi.transpose() * svd.matrixV().col(j);
        const double norm = std::sqrt(loading.dot(ops.mass * loading));
        PcComponent c;
        c.scores = svd.matrixU().col(j);
        c.fCoefficients = loading / norm;
        c.gCoefficients = Vector::Zero(loading.size());
        c.functionNorm = svd.singularValues()[j] * norm;
        fix_component_sign(c);
        out.push_back(std::move(c));
    }
    return out;
}

double mse(const Vector& estimate, const Vector& truth) {
    if (estimate.size() != truth.size()) {
        throw DimensionMismatch("mse: lengths " + std::to_string(estimate.size()) + " and " +
                                std::to_string(truth.size()) + " differ");
    }
    if (truth.size() == 0) return 0.0;
    const double plus = (estimate - truth).squaredNorm();
    const double minus = (estimate + truth).squaredNorm();
    return std::min(plus, minus) / static_cast<double>(truth.size());
}

double principal_angle(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionMismatch("principal_angle: row counts differ");
    if (a.cols() < 1 || b.cols() < 1) throw DimensionMismatch("principal_angle: empty subspace");
    if (a.cols() > a.rows() || b.cols() > b.rows()) throw RankDeficient("principal_angle: more columns than rows");
    const Matrix qa = orthonormal_basis(a, "first");
    const Matrix qb = orthonormal_basis(b, "second");
    Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
    const double rho = std::clamp(svd.singularValues().minCoeff(), 0.0, 1.0);
    return std::acos(rho);
}

EvaluationReport evaluate_fit(const std::vector<PcComponent>& components, const Vector& meanField,
                              double totalVariance, const std::vector<Vector>& trueComponents,
                              const Matrix& trueScores, const Matrix& trueSignal, const FemOperators& ops) {
    const auto s = static_cast<Eigen::Index>(ops.location_count());
    const Eigen::Index n = trueSignal.rows();
    if (trueSignal.cols() != s) throw DimensionMismatch("evaluate: signal columns do not match locations");
    if (trueScores.rows() != n || trueScores.cols() != static_cast<Eigen::Index>(trueComponents.size())) {
        throw DimensionMismatch("evaluate: true score matrix shape does not match the truth");
    }
    if (meanField.size() != 0 && meanField.size() != s) throw DimensionMismatch("evaluate: mean field length");
    for (const auto& c : components) {
        if (c.scores.size() != n) throw DimensionMismatch("evaluate: score length does not match subjects");
        if (c.fCoefficients.size() != static_cast<Eigen::Index>(ops.basis_count())) {
            throw DimensionMismatch("evaluate: coefficient length does not match the mesh");
        }
    }

    EvaluationReport report;
    const std::size_t matched = std::min(components.size(), trueComponents.size());
    Matrix estFns(s, static_cast<Eigen::Index>(matched)), trueFns(s, static_cast<Eigen::Index>(matched));
    for (std::size_t j = 0; j < matched; ++j) {
        const Vector& v = trueComponents[j];
        const double norm = std::sqrt(v.dot(ops.mass * v));
        const Vector truth = ops.psi * (v / norm);
        const Vector est = ops.psi * components[j].fCoefficients;
        trueFns.col(static_cast<Eigen::Index>(j)) = truth;
        estFns.col(static_cast<Eigen::Index>(j)) = est;
        report.pcFunctionMse.push_back(mse(est, truth));
        report.scoreMse.push_back(mse(components[j].scores * components[j].functionNorm,
                                      trueScores.col(static_cast<Eigen::Index>(j)) * norm));
    }
    if (matched > 0) report.principalAngle = principal_angle(trueFns, estFns);

    Matrix reconstruction = Matrix::Zero(n, s);
    if (meanField.size() == s) reconstruction.rowwise() += meanField.transpose();
    for (const auto& c : components) {
        reconstruction += (c.scores * c.functionNorm) * (ops.psi * c.fCoefficients).transpose();
    }
    report.signalMse = (reconstruction - trueSignal).squaredNorm() / static_cast<double>(n * s);

    const std::vector<double> adjusted = adjusted_total_variance(components);
    double running = 0.0;
    for (double v : adjusted) {
        running += v;
        report.explainedVarianceCurve.push_back(totalVariance > 0.0 ? running / totalVariance : 0.0);
    }
    return report;
}

}  // namespace smfpca
