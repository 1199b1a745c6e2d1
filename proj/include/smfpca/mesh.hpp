#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Core>

namespace smfpca {

using Vec3 = Eigen::Vector3d;
using Triangle = std::array<int, 3>;

inline constexpr double kBaryEpsilon = 1e-9;
inline constexpr std::size_t kDefaultVertexCap = 5'000'000;
inline constexpr std::size_t kBvhTriangleThreshold = 10'000;

/// A point on the mesh: owning triangle plus barycentric weights.
struct SurfaceLocation {
    std::size_t triangle = 0;
    Vec3 barycentric = Vec3(1.0, 0.0, 0.0);

    bool operator==(const SurfaceLocation& other) const {
        return triangle == other.triangle && barycentric == other.barycentric;
    }
};

struct TriangleGeometry {
    double area = 0.0;
    /// Ambient gradients of the three nodal basis functions, tangent to the triangle.
    std::array<Vec3, 3> basisGradients;
    Vec3 unitNormal = Vec3::Zero();
};

class TriangleBvh;

/// Immutable, validated triangulated surface embedded in R^3.
///
/// Construction checks index ranges, triangle degeneracy (relative to the
/// bounding-box diagonal), edge-manifoldness and consistent orientation, and
/// throws TopologyError naming the offending element. Open meshes are
/// accepted; `is_closed()` reports whether every edge has two triangles.
class TriangleMesh {
public:
    TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

    std::size_t vertex_count() const noexcept { return vertices_.size(); }
    std::size_t triangle_count() const noexcept { return triangles_.size(); }
    const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
    const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
    const Vec3& vertex(std::size_t v) const { return vertices_.at(v); }
    const Triangle& triangle(std::size_t t) const { return triangles_.at(t); }

    bool is_closed() const noexcept { return closed_; }
    std::size_t boundary_edge_count() const noexcept { return boundaryEdges_; }
    double area_epsilon() const noexcept { return areaEpsilon_; }
    double bounding_diagonal() const noexcept { return diagonal_; }
    double total_area() const;

    /// Lowest-index triangle incident to vertex v.
    std::size_t first_triangle_of(std::size_t v) const { return firstTriangle_.at(v); }

    /// Ambient coordinates of a surface location.
    Vec3 point(const SurfaceLocation& loc) const;

    const TriangleBvh* bvh() const noexcept { return bvh_.get(); }

private:
    std::vector<Vec3> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<std::size_t> firstTriangle_;
    double diagonal_ = 0.0;
    double areaEpsilon_ = 0.0;
    bool closed_ = false;
    std::size_t boundaryEdges_ = 0;
    std::shared_ptr<const TriangleBvh> bvh_;
};

/// Parse ASCII OFF. Throws ParseError on malformed input and TopologyError
/// when the parsed surface breaks a mesh invariant.
TriangleMesh parse_off(std::istream& in);
TriangleMesh load_mesh(const std::filesystem::path& path);
void write_off(const TriangleMesh& mesh, std::ostream& out);
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

inline bool is_closed(const TriangleMesh& mesh) { return mesh.is_closed(); }

TriangleGeometry triangle_geometry(const TriangleMesh& mesh, std::size_t t);

/// Closest point on the mesh to p. Ties between triangles resolve to the
/// lowest triangle index.
SurfaceLocation locate_point(const TriangleMesh& mesh, const Vec3& p);

/// Exhaustive variant of locate_point; the reference the accelerated search must match.
SurfaceLocation locate_point_exhaustive(const TriangleMesh& mesh, const Vec3& p);

/// Location of vertex v inside its lowest-index incident triangle.
SurfaceLocation vertex_location(const TriangleMesh& mesh, std::size_t v);
std::vector<SurfaceLocation> vertex_locations(const TriangleMesh& mesh);

/// Icosahedron refined by 1-to-4 splits, vertices on the unit sphere.
TriangleMesh unit_sphere_mesh(int subdivisions, std::size_t maxVertices = kDefaultVertexCap);

/// Closest point on triangle (a, b, c) to p, as barycentric weights.
Vec3 closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace smfpca
