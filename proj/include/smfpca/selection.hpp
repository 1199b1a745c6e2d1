#pragma once

#include <cstdint>
#include <vector>

#include "smfpca/smfpca.hpp"

namespace smfpca {

inline constexpr std::size_t kExactTraceLimit = 2000;
inline constexpr int kHutchinsonProbes = 64;

/// Factored saddle systems (upper-left Psi^T Psi) for every grid lambda,
/// sharing one fill-reducing ordering.
class SmootherBank {
public:
    SmootherBank(const FemOperators& ops, std::vector<double> lambdaGrid, int threads = 1);

    const std::vector<double>& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return grid_.size(); }
    const SaddleSystem& system(std::size_t i) const { return systems_.at(i); }

    /// tr S(lambda_i) for the GCV smoother; computed on first use of ensure_traces.
    double trace(std::size_t i) const { return traces_.at(i); }
    bool has_traces() const noexcept { return !traces_.empty(); }
    void ensure_traces(const FemOperators& ops, std::uint64_t seed, int threads = 1);

private:
    std::vector<double> grid_;
    std::vector<SaddleSystem> systems_;
    std::vector<double> traces_;
};

/// tr(Psi A^{-1} Psi^T) through block solves: exact for s <= kExactTraceLimit,
/// otherwise a seeded Hutchinson estimate with kHutchinsonProbes probes.
double smoother_trace(const SaddleSystem& system, const FemOperators& ops, std::uint64_t seed);

/// 13 log-spaced points over [1e-6, 1e2], scaled by tr(Psi^T Psi) / tr(R1 M^-1 R1)
/// with M the lumped (row-sum) mass matrix.
std::vector<double> default_lambda_grid(const FemOperators& ops, int points = 13, double lo = 1e-6,
                                        double hi = 1e2);

/// Deterministic fold of each row: seeded shuffle, then round-robin.
std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed);

SelectionTrace kfold_select(const DataMatrix& x, const SmootherBank& bank, int folds, const FemOperators& ops,
                            const FitOptions& opts);
SelectionTrace kfold_select(const DataMatrix& x, const std::vector<double>& lambdaGrid, int folds,
                            const FemOperators& ops, const FitOptions& opts);

/// GCV(lambda) = (1/s) ||(I - S) z||^2 / (1 - tr S / s)^2 with z = X^T u.
/// Grid points whose smoother is numerically the identity score +infinity.
SelectionTrace gcv_select(const DataMatrix& x, const Vector& u, SmootherBank& bank, const FemOperators& ops,
                          std::uint64_t seed = 0);
SelectionTrace gcv_select(const DataMatrix& x, const Vector& u, const std::vector<double>& lambdaGrid,
                          const FemOperators& ops, std::uint64_t seed = 0);

/// Single GCV evaluation given the trace; +infinity when degenerate.
double gcv_score(double residualSquared, double trace, double count);

/// Alternating fit choosing lambda by GCV at every function step.
PcComponent fit_component_gcv(const DataMatrix& x, SmootherBank& bank, const FemOperators& ops,
                              const FitOptions& opts, SelectionTrace* trace = nullptr);

std::size_t argmin_first(const std::vector<double>& scores);

}  // namespace smfpca
