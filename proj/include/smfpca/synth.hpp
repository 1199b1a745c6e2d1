#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "smfpca/fem.hpp"
#include "smfpca/smfpca.hpp"

namespace smfpca {

/// Generated data with its ground truth. Samples sit at mesh vertices.
struct SyntheticDataset {
    DataMatrix x;
    Matrix signal;  ///< x without noise
    std::vector<Vector> trueComponents;  ///< FE coefficients of v_l
    Matrix trueScores;                   ///< n x L
    double noiseSigma = 0.0;
    std::uint64_t seed = 0;
    /// Misaligned data only: per-subject (theta, phi) shift.
    std::vector<std::pair<double, double>> shifts;
};

/// x_i = sum_l u_il v_l + noise with v_l the chosen LB eigenfunctions
/// (indices into lb_eigenpairs, 0 is the constant mode) and u_il ~ N(0, sigma_l^2).
SyntheticDataset generate_eigen_dataset(const FemOperators& ops, const std::vector<int>& eigenIndices,
                                        const std::vector<double>& sigmas, int n, double noiseSigma,
                                        std::uint64_t seed);

/// Vertex values of the two real spherical harmonics
///   v1 = 1/2 sqrt(15/pi) xy,  v2 = 3/4 sqrt(35/pi) xy (x^2 - y^2).
std::pair<Vector, Vector> sphere_pc_functions(const TriangleMesh& mesh);

SyntheticDataset generate_sphere_dataset(const FemOperators& ops, int n, const std::vector<double>& sigmas,
                                         double noiseSigma, std::uint64_t seed);

/// x_i = u_i v1(theta + theta_i, phi + phi_i), shifts drawn uniformly from
/// shiftSet for each angle independently, no noise.
SyntheticDataset generate_misaligned_dataset(const FemOperators& ops, int n, double sigma,
                                             const std::vector<double>& shiftSet, std::uint64_t seed);

/// v1 at polar angle theta (from +z) and azimuth phi, unit radius.
double sphere_v1(double theta, double phi);

/// Wraps phi into [-pi, pi) and reflects theta back into [0, pi] across the poles.
std::pair<double, double> wrap_spherical(double theta, double phi);

}  // namespace smfpca
