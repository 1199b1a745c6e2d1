#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "smfpca/mesh.hpp"

namespace smfpca {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Linear surface finite-element operators on a mesh plus sampling locations.
///   psi       s x K, psi(j, k) = psi_k(p_j)
///   mass      K x K, R0 = int psi psi^T
///   stiffness K x K, R1 = int grad(psi) grad(psi)^T
struct FemOperators {
    std::shared_ptr<const TriangleMesh> mesh;
    std::vector<SurfaceLocation> locations;
    SparseMatrix psi;
    SparseMatrix mass;
    SparseMatrix stiffness;

    std::size_t basis_count() const { return static_cast<std::size_t>(mass.rows()); }
    std::size_t location_count() const { return static_cast<std::size_t>(psi.rows()); }
};

/// Nonzero basis values at one surface location (at most three).
struct BasisRow {
    std::array<int, 3> vertex{};
    Vec3 weight = Vec3::Zero();
};

BasisRow basis_row(const TriangleMesh& mesh, const SurfaceLocation& loc);

/// Throws InputError unless loc names a triangle of `mesh` with weights that
/// are nonnegative and sum to one (both within kBaryEpsilon).
void validate_location(const TriangleMesh& mesh, const SurfaceLocation& loc);

FemOperators assemble(std::shared_ptr<const TriangleMesh> mesh,
                      std::vector<SurfaceLocation> locations, int threads = 1);

/// Convenience: sampling locations at every mesh vertex (psi is the identity).
FemOperators assemble_at_vertices(std::shared_ptr<const TriangleMesh> mesh, int threads = 1);

/// Element mass matrix (A/12)[[2,1,1],[1,2,1],[1,1,2]].
Eigen::Matrix3d element_mass(double area);
Eigen::Matrix3d element_stiffness(const TriangleGeometry& geo);

/// Evaluations Psi * coefficients.
Vector evaluate(const FemOperators& ops, const Vector& coefficients);

/// Discrete L2(M_T) inner product a^T R0 b.
double l2_inner(const FemOperators& ops, const Vector& a, const Vector& b);

struct EigenPair {
    double eigenvalue = 0.0;
    Vector coefficients;  ///< R0-normalized
};

struct EigenOptions {
    double tolerance = 1e-9;  ///< relative residual
    int maxIterations = 2000;
    unsigned seed = 12345;
};

/// The `count` smallest solutions of R1 v = kappa R0 v, R0-orthonormal,
/// nondecreasing in kappa. The constant mode (kappa = 0) is deflated
/// analytically and returned first.
std::vector<EigenPair> lb_eigenpairs(const FemOperators& ops, int count, const EigenOptions& opts = {});

/// MatrixMarket coordinate export, for debugging.
void write_matrix_market(const SparseMatrix& m, const std::filesystem::path& path);

}  // namespace smfpca
