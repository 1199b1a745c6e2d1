#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "smfpca/fem.hpp"
#include "smfpca/mesh.hpp"
#include "smfpca/smfpca.hpp"

namespace smfpca::testing {

inline TriangleMesh tetrahedron() {
    return TriangleMesh({Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)},
                        {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}});
}

inline TriangleMesh right_triangle() {
    return TriangleMesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}});
}

inline std::shared_ptr<const TriangleMesh> share(TriangleMesh m) {
    return std::make_shared<const TriangleMesh>(std::move(m));
}

inline FemOperators sphere_ops(int subdivisions) {
    return assemble_at_vertices(share(unit_sphere_mesh(subdivisions)));
}

/// Uniformly random interior locations (nonzero weights on all three vertices).
inline std::vector<SurfaceLocation> random_locations(const TriangleMesh& mesh, std::size_t count, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<std::size_t> tri(0, mesh.triangle_count() - 1);
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    std::vector<SurfaceLocation> out;
    for (std::size_t i = 0; i < count; ++i) {
        Vec3 w(unit(rng), unit(rng), unit(rng));
        out.push_back({tri(rng), w / w.sum()});
    }
    return out;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    }
    return m;
}

/// Dense (Psi^T Psi + lambda R1 R0^{-1} R1)^{-1} rhs.
inline Vector closed_form_f(const FemOperators& ops, const Matrix& upperLeft, double lambda, const Vector& rhs) {
    const Matrix r0 = Matrix(ops.mass);
    const Matrix r1 = Matrix(ops.stiffness);
    const Matrix a = upperLeft + lambda * r1 * r0.inverse() * r1;
    return a.fullPivLu().solve(rhs);
}

inline double relative_error(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

/// Midpoint-of-edges rule, exact for quadratics on a triangle: the L2 inner
/// product of two piecewise-linear fields, computed without R0.
inline double quadrature_inner(const TriangleMesh& mesh, const Vector& a, const Vector& b) {
    double sum = 0.0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const Triangle& tri = mesh.triangle(t);
        const Vec3& p0 = mesh.vertex(static_cast<std::size_t>(tri[0]));
        const Vec3& p1 = mesh.vertex(static_cast<std::size_t>(tri[1]));
        const Vec3& p2 = mesh.vertex(static_cast<std::size_t>(tri[2]));
        const double area = 0.5 * (p1 - p0).cross(p2 - p0).norm();
        for (int e = 0; e < 3; ++e) {
            const int i = tri[e], j = tri[(e + 1) % 3];
            sum += area / 3.0 * 0.25 * (a[i] + a[j]) * (b[i] + b[j]);
        }
    }
    return sum;
}

}  // namespace smfpca::testing
