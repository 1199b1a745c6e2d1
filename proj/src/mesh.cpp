#include "smfpca/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include <Eigen/Geometry>

#include "bvh.hpp"
#include "smfpca/errors.hpp"

namespace smfpca {

namespace {

std::uint64_t edge_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

// Squared-distance slack inside which two triangles count as equally close.
double tie_tolerance(const TriangleMesh& mesh) {
    const double d = mesh.bounding_diagonal();
    return 1e-14 * d * d;
}

Vec3 clean_barycentric(Vec3 w) {
    for (int i = 0; i < 3; ++i) {
        if (w[i] < kBaryEpsilon) w[i] = 0.0;
    }
    const double sum = w.sum();
    return w / sum;
}

}  // namespace

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    if (vertices_.empty() || triangles_.empty()) {
        throw TopologyError("mesh has no vertices or no triangles", 0);
    }
    Eigen::AlignedBox3d box;
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
        if (!vertices_[v].allFinite()) {
            throw TopologyError("vertex " + std::to_string(v) + " has non-finite coordinates", v);
        }
        box.extend(vertices_[v]);
    }
    diagonal_ = box.diagonal().norm();
    areaEpsilon_ = 1e-12 * diagonal_ * diagonal_;

    const auto k = static_cast<long long>(vertices_.size());
    firstTriangle_.assign(vertices_.size(), std::numeric_limits<std::size_t>::max());
    std::unordered_map<std::uint64_t, std::size_t> directed;
    std::unordered_map<std::uint64_t, int> undirected;
    directed.reserve(triangles_.size() * 3);
    undirected.reserve(triangles_.size() * 3);

    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const Triangle& tri = triangles_[t];
        for (int idx : tri) {
            if (idx < 0 || idx >= k) {
                throw TopologyError("triangle " + std::to_string(t) + " references vertex " +
                                        std::to_string(idx) + " outside [0, " +
                                        std::to_string(k) + ")",
                                    t);
            }
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            throw TopologyError("triangle " + std::to_string(t) + " repeats a vertex", t);
        }
        const double area = triangle_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
        if (!(area > areaEpsilon_)) {
            throw TopologyError("triangle " + std::to_string(t) + " is degenerate (area " +
                                    std::to_string(area) + ")",
                                t);
        }
        for (int e = 0; e < 3; ++e) {
            const int a = tri[e];
            const int b = tri[(e + 1) % 3];
            auto [it, inserted] = directed.emplace(edge_key(a, b), t);
            if (!inserted) {
                throw TopologyError("triangle " + std::to_string(t) +
                                        " traverses edge (" + std::to_string(a) + ", " +
                                        std::to_string(b) + ") in the same direction as triangle " +
                                        std::to_string(it->second) + "; inconsistent orientation",
                                    t);
            }
            int& count = undirected[edge_key(std::min(a, b), std::max(a, b))];
            if (++count > 2) {
                throw TopologyError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                        ") is shared by more than two triangles (at triangle " +
                                        std::to_string(t) + ")",
                                    t);
            }
            firstTriangle_[a] = std::min(firstTriangle_[a], t);
        }
    }
    for (std::size_t v = 0; v < firstTriangle_.size(); ++v) {
        if (firstTriangle_[v] == std::numeric_limits<std::size_t>::max()) {
            throw TopologyError("vertex " + std::to_string(v) + " belongs to no triangle", v);
        }
    }
    boundaryEdges_ = static_cast<std::size_t>(
        std::count_if(undirected.begin(), undirected.end(), [](const auto& e) { return e.second == 1; }));
    closed_ = boundaryEdges_ == 0;

    if (triangles_.size() >= kBvhTriangleThreshold) {
        bvh_ = std::make_shared<const TriangleBvh>(vertices_, triangles_);
    }
}

double TriangleMesh::total_area() const {
    double sum = 0.0;
    for (const Triangle& t : triangles_) {
        sum += triangle_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
    }
    return sum;
}

Vec3 TriangleMesh::point(const SurfaceLocation& loc) const {
    const Triangle& t = triangles_.at(loc.triangle);
    return loc.barycentric[0] * vertices_[t[0]] + loc.barycentric[1] * vertices_[t[1]] +
           loc.barycentric[2] * vertices_[t[2]];
}

TriangleGeometry triangle_geometry(const TriangleMesh& mesh, std::size_t t) {
    if (t >= mesh.triangle_count()) {
        throw DimensionMismatch("triangle index " + std::to_string(t) + " out of range");
    }
    const Triangle& tri = mesh.triangle(t);
    const std::array<Vec3, 3> x = {mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2])};
    const Vec3 cross = (x[1] - x[0]).cross(x[2] - x[0]);
    TriangleGeometry geo;
    geo.area = 0.5 * cross.norm();
    if (!(geo.area > mesh.area_epsilon())) {
        throw DegenerateTriangle("triangle " + std::to_string(t) + " is degenerate", t);
    }
    geo.unitNormal = cross / cross.norm();
    // grad(phi_i) = n x (x_k - x_j) / (2A), (i, j, k) cyclic.
    for (int i = 0; i < 3; ++i) {
        const Vec3 opposite = x[(i + 2) % 3] - x[(i + 1) % 3];
        geo.basisGradients[i] = geo.unitNormal.cross(opposite) / (2.0 * geo.area);
    }
    return geo;
}

Vec3 closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {1.0, 0.0, 0.0};

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {0.0, 1.0, 0.0};

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return {1.0 - v, v, 0.0};
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {0.0, 0.0, 1.0};

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return {1.0 - w, 0.0, w};
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {0.0, 1.0 - w, w};
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return {1.0 - v - w, v, w};
}

SurfaceLocation locate_point_exhaustive(const TriangleMesh& mesh, const Vec3& p) {
    const auto& verts = mesh.vertices();
    const auto& tris = mesh.triangles();
    std::vector<double> dist(tris.size());
    std::vector<Vec3> bary(tris.size());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const Vec3& a = verts[tris[t][0]];
        const Vec3& b = verts[tris[t][1]];
        const Vec3& c = verts[tris[t][2]];
        bary[t] = closest_point_barycentric(p, a, b, c);
        const Vec3 q = bary[t][0] * a + bary[t][1] * b + bary[t][2] * c;
        dist[t] = (q - p).squaredNorm();
        best = std::min(best, dist[t]);
    }
    const double tol = tie_tolerance(mesh);
    for (std::size_t t = 0; t < tris.size(); ++t) {
        if (dist[t] <= best + tol) return {t, clean_barycentric(bary[t])};
    }
    return {0, Vec3(1.0, 0.0, 0.0)};  // unreachable for a nonempty mesh
}

SurfaceLocation locate_point(const TriangleMesh& mesh, const Vec3& p) {
    if (const TriangleBvh* bvh = mesh.bvh()) {
        auto hit = bvh->closest(p, mesh.vertices(), mesh.triangles(), tie_tolerance(mesh));
        return {hit.triangle, clean_barycentric(hit.barycentric)};
    }
    return locate_point_exhaustive(mesh, p);
}

SurfaceLocation vertex_location(const TriangleMesh& mesh, std::size_t v) {
    const std::size_t t = mesh.first_triangle_of(v);
    const Triangle& tri = mesh.triangle(t);
    Vec3 w = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
        if (static_cast<std::size_t>(tri[i]) == v) w[i] = 1.0;
    }
    return {t, w};
}

std::vector<SurfaceLocation> vertex_locations(const TriangleMesh& mesh) {
    std::vector<SurfaceLocation> out;
    out.reserve(mesh.vertex_count());
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) out.push_back(vertex_location(mesh, v));
    return out;
}

TriangleMesh unit_sphere_mesh(int subdivisions, std::size_t maxVertices) {
    if (subdivisions < 0) throw InputError("subdivisions must be >= 0");
    // K = 10 * 4^k + 2
    double projected = 12.0;
    for (int i = 0; i < subdivisions; ++i) projected = 4.0 * (projected - 2.0) + 2.0;
    if (projected > static_cast<double>(maxVertices)) {
        throw ResourceLimit("icosphere with " + std::to_string(subdivisions) +
                            " subdivisions needs " + std::to_string(static_cast<long long>(projected)) +
                            " vertices, cap is " + std::to_string(maxVertices));
    }

    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
    };
    for (Vec3& v : verts) v.normalize();
    std::vector<Triangle> tris = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };

    for (int level = 0; level < subdivisions; ++level) {
        std::unordered_map<std::uint64_t, int> midpoints;
        midpoints.reserve(tris.size() * 2);
        auto midpoint = [&](int a, int b) {
            const std::uint64_t key = edge_key(std::min(a, b), std::max(a, b));
            auto it = midpoints.find(key);
            if (it != midpoints.end()) return it->second;
            verts.push_back((0.5 * (verts[a] + verts[b])).normalized());
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<Triangle> next;
        next.reserve(tris.size() * 4);
        for (const Triangle& t : tris) {
            const int ab = midpoint(t[0], t[1]);
            const int bc = midpoint(t[1], t[2]);
            const int ca = midpoint(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    return TriangleMesh(std::move(verts), std::move(tris));
}

// --- TriangleBvh ---------------------------------------------------------

TriangleBvh::TriangleBvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles) {
    std::vector<Vec3> centroids(triangles.size());
    triangleBoxes_.resize(triangles.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        Eigen::AlignedBox3d b;
        for (int i : triangles[t]) b.extend(vertices[i]);
        triangleBoxes_[t] = b;
        centroids[t] = b.center();
    }
    order_.resize(triangles.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * triangles.size() / 4 + 1);
    build(0, order_.size(), centroids);
}

int TriangleBvh::build(std::size_t begin, std::size_t end, const std::vector<Vec3>& centroids) {
    constexpr std::size_t kLeafSize = 8;
    Node node;
    for (std::size_t i = begin; i < end; ++i) node.box.extend(triangleBoxes_[order_[i]]);
    node.begin = begin;
    node.end = end;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize) return id;

    Eigen::Index axis = 0;
    node.box.sizes().maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<long>(begin), order_.begin() + static_cast<long>(mid),
                     order_.begin() + static_cast<long>(end), [&](std::size_t a, std::size_t b) {
                         if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
                         return a < b;
                     });
    const int left = build(begin, mid, centroids);
    const int right = build(mid, end, centroids);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

TriangleBvh::Hit TriangleBvh::closest(const Vec3& p, const std::vector<Vec3>& vertices,
                                      const std::vector<Triangle>& triangles,
                                      double tieTolerance) const {
    auto eval = [&](std::size_t t) {
        const Vec3& a = vertices[triangles[t][0]];
        const Vec3& b = vertices[triangles[t][1]];
        const Vec3& c = vertices[triangles[t][2]];
        Vec3 w = closest_point_barycentric(p, a, b, c);
        const Vec3 q = w[0] * a + w[1] * b + w[2] * c;
        return std::pair{w, (q - p).squaredNorm()};
    };

    // Pass 1: minimum distance by branch and bound.
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> stack = {0};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (node.box.squaredExteriorDistance(p) > best) continue;
        if (node.left < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                best = std::min(best, eval(order_[i]).second);
            }
            continue;
        }
        const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
        const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
        if (dl < dr) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }

    // Pass 2: lowest-index triangle within the tie band.
    Hit hit{std::numeric_limits<std::size_t>::max(), Vec3(1.0, 0.0, 0.0), best};
    const double limit = best + tieTolerance;
    stack = {0};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (node.box.squaredExteriorDistance(p) > limit) continue;
        if (node.left < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const std::size_t t = order_[i];
                if (t >= hit.triangle) continue;
                auto [w, d] = eval(t);
                if (d <= limit) hit = {t, w, d};
            }
            continue;
        }
        stack.push_back(node.left);
        stack.push_back(node.right);
    }
    return hit;
}

}  // namespace smfpca
