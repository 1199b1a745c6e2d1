#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Geometry>

#include "smfpca/mesh.hpp"

namespace smfpca {

/// Axis-aligned bounding-volume tree over mesh triangles for closest-point queries.
class TriangleBvh {
public:
    TriangleBvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles);

    struct Hit {
        std::size_t triangle;
        Vec3 barycentric;
        double distanceSquared;
    };

    /// Same selection rule as the exhaustive scan: minimum squared distance,
    /// lowest triangle index among candidates within `tieTolerance`.
    Hit closest(const Vec3& p, const std::vector<Vec3>& vertices,
                const std::vector<Triangle>& triangles, double tieTolerance) const;

private:
    struct Node {
        Eigen::AlignedBox3d box;
        int left = -1;
        int right = -1;
        std::size_t begin = 0;
        std::size_t end = 0;
    };

    int build(std::size_t begin, std::size_t end, const std::vector<Vec3>& centroids);

    std::vector<Node> nodes_;
    std::vector<std::size_t> order_;
    std::vector<Eigen::AlignedBox3d> triangleBoxes_;
};

}  // namespace smfpca
