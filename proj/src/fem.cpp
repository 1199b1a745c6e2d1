#include "smfpca/fem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "smfpca/errors.hpp"
#include "smfpca/parallel.hpp"

namespace smfpca {

using Triplet = Eigen::Triplet<double>;

void validate_location(const TriangleMesh& mesh, const SurfaceLocation& loc) {
    if (loc.triangle >= mesh.triangle_count()) {
        throw InputError("surface location references triangle " + std::to_string(loc.triangle) +
                         " of a mesh with " + std::to_string(mesh.triangle_count()) + " triangles");
    }
    const Vec3& w = loc.barycentric;
    if (!w.allFinite() || w.minCoeff() < -kBaryEpsilon || std::abs(w.sum() - 1.0) > kBaryEpsilon) {
        throw InputError("surface location in triangle " + std::to_string(loc.triangle) +
                         " has invalid barycentric weights");
    }
}

BasisRow basis_row(const TriangleMesh& mesh, const SurfaceLocation& loc) {
    const Triangle& t = mesh.triangle(loc.triangle);
    BasisRow row;
    for (int i = 0; i < 3; ++i) {
        row.vertex[i] = t[i];
        row.weight[i] = std::max(0.0, loc.barycentric[i]);
    }
    row.weight /= row.weight.sum();
    return row;
}

Eigen::Matrix3d element_mass(double area) {
    Eigen::Matrix3d m;
    m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    return (area / 12.0) * m;
}

Eigen::Matrix3d element_stiffness(const TriangleGeometry& geo) {
    Eigen::Matrix3d k;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) k(i, j) = geo.area * geo.basisGradients[i].dot(geo.basisGradients[j]);
    }
    return k;
}

FemOperators assemble(std::shared_ptr<const TriangleMesh> mesh, std::vector<SurfaceLocation> locations,
                      int threads) {
    if (!mesh) throw InputError("assemble: null mesh");
    const auto k = static_cast<Eigen::Index>(mesh->vertex_count());
    const std::size_t nTri = mesh->triangle_count();

    // Contiguous triangle chunks, concatenated in chunk order: the triplet
    // sequence (and so every summed entry) is independent of the thread count.
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(nTri, 64));
    const std::size_t chunkSize = (nTri + chunks - 1) / chunks;
    std::vector<std::vector<Triplet>> massParts(chunks), stiffParts(chunks);
    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::size_t begin = std::min(nTri, c * chunkSize);
        const std::size_t end = std::min(nTri, begin + chunkSize);
        auto& mp = massParts[c];
        auto& sp = stiffParts[c];
        mp.reserve((end - begin) * 9);
        sp.reserve((end - begin) * 9);
        for (std::size_t t = begin; t < end; ++t) {
            const TriangleGeometry geo = triangle_geometry(*mesh, t);
            const Eigen::Matrix3d me = element_mass(geo.area);
            const Eigen::Matrix3d ke = element_stiffness(geo);
            const Triangle& tri = mesh->triangle(t);
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    mp.emplace_back(tri[i], tri[j], me(i, j));
                    sp.emplace_back(tri[i], tri[j], ke(i, j));
                }
            }
        }
    });
    std::vector<Triplet> massTriplets, stiffTriplets;
    massTriplets.reserve(nTri * 9);
    stiffTriplets.reserve(nTri * 9);
    for (std::size_t c = 0; c < chunks; ++c) {
        massTriplets.insert(massTriplets.end(), massParts[c].begin(), massParts[c].end());
        stiffTriplets.insert(stiffTriplets.end(), stiffParts[c].begin(), stiffParts[c].end());
    }

    FemOperators ops;
    ops.mass.resize(k, k);
    ops.mass.setFromTriplets(massTriplets.begin(), massTriplets.end());
    ops.mass.makeCompressed();
    ops.stiffness.resize(k, k);
    ops.stiffness.setFromTriplets(stiffTriplets.begin(), stiffTriplets.end());
    ops.stiffness.makeCompressed();

    std::vector<Triplet> psiTriplets;
    psiTriplets.reserve(locations.size() * 3);
    for (std::size_t j = 0; j < locations.size(); ++j) {
        validate_location(*mesh, locations[j]);
        const BasisRow row = basis_row(*mesh, locations[j]);
        for (int i = 0; i < 3; ++i) {
            if (row.weight[i] > 0.0) psiTriplets.emplace_back(static_cast<int>(j), row.vertex[i], row.weight[i]);
        }
    }
    ops.psi.resize(static_cast<Eigen::Index>(locations.size()), k);
    ops.psi.setFromTriplets(psiTriplets.begin(), psiTriplets.end());
    ops.psi.makeCompressed();

    ops.mesh = std::move(mesh);
    ops.locations = std::move(locations);
    return ops;
}

FemOperators assemble_at_vertices(std::shared_ptr<const TriangleMesh> mesh, int threads) {
    auto locations = vertex_locations(*mesh);
    return assemble(std::move(mesh), std::move(locations), threads);
}

Vector evaluate(const FemOperators& ops, const Vector& coefficients) {
    if (static_cast<std::size_t>(coefficients.size()) != ops.basis_count()) {
        throw DimensionMismatch("coefficient vector has length " + std::to_string(coefficients.size()) +
                                ", expected " + std::to_string(ops.basis_count()));
    }
    return ops.psi * coefficients;
}

double l2_inner(const FemOperators& ops, const Vector& a, const Vector& b) {
    const auto k = static_cast<Eigen::Index>(ops.basis_count());
    if (a.size() != k || b.size() != k) {
        throw DimensionMismatch("l2_inner: vectors must have length " + std::to_string(k));
    }
    return a.dot(ops.mass * b);
}

void write_matrix_market(const SparseMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    out << std::setprecision(17);
    for (Eigen::Index c = 0; c < m.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
            out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
        }
    }
}

}  // namespace smfpca
