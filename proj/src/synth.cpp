#include "smfpca/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "smfpca/errors.hpp"

namespace smfpca {

namespace {

constexpr double kRadiusTolerance = 1e-6;
constexpr double kPi = std::numbers::pi;

void require_sphere(const TriangleMesh& mesh) {
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        const double r = mesh.vertex(v).norm();
        if (std::abs(r - 1.0) > kRadiusTolerance) {
            throw NotASphere("vertex " + std::to_string(v) + " has radius " + std::to_string(r) +
                             ", expected 1");
        }
    }
}

void check_counts(int n, const std::vector<double>& sigmas, std::size_t components) {
    if (n < 1) throw InputError("sample count must be >= 1");
    if (sigmas.size() != components) {
        throw DimensionMismatch("expected " + std::to_string(components) + " score standard deviations, got " +
                                std::to_string(sigmas.size()));
    }
    for (double s : sigmas) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw InputError("score standard deviations must be nonnegative");
    }
}

/// Scores first (row-major over subjects), then noise, from one stream.
SyntheticDataset compose(const FemOperators& ops, std::vector<Vector> components, const std::vector<double>& sigmas,
                         int n, double noiseSigma, std::uint64_t seed) {
    if (!(noiseSigma >= 0.0) || !std::isfinite(noiseSigma)) throw InputError("noise sigma must be nonnegative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto l = static_cast<Eigen::Index>(components.size());
    SyntheticDataset data;
    data.trueScores.resize(n, l);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < l; ++c) data.trueScores(i, c) = sigmas[static_cast<std::size_t>(c)] * normal(rng);
    }
    Matrix sampled(static_cast<Eigen::Index>(ops.location_count()), l);
    for (Eigen::Index c = 0; c < l; ++c) sampled.col(c) = ops.psi * components[static_cast<std::size_t>(c)];
    data.signal = data.trueScores * sampled.transpose();
    data.x.values = data.signal;
    if (noiseSigma > 0.0) {
        for (Eigen::Index i = 0; i < data.x.values.rows(); ++i) {
            for (Eigen::Index j = 0; j < data.x.values.cols(); ++j) data.x.values(i, j) += noiseSigma * normal(rng);
        }
    }
    data.trueComponents = std::move(components);
    data.noiseSigma = noiseSigma;
    data.seed = seed;
    return data;
}

double v2_cartesian(const Vec3& p) {
    return 0.75 * std::sqrt(35.0 / kPi) * p.x() * p.y() * (p.x() * p.x() - p.y() * p.y());
}

}  // namespace

SyntheticDataset generate_eigen_dataset(const FemOperators& ops, const std::vector<int>& eigenIndices,
                                        const std::vector<double>& sigmas, int n, double noiseSigma,
                                        std::uint64_t seed) {
    check_counts(n, sigmas, eigenIndices.size());
    int highest = 0;
    for (int idx : eigenIndices) {
        if (idx < 0) throw InputError("eigen indices must be nonnegative");
        highest = std::max(highest, idx);
    }
    const std::vector<EigenPair> pairs = lb_eigenpairs(ops, highest + 1);
    std::vector<Vector> components;
    for (int idx : eigenIndices) components.push_back(pairs[static_cast<std::size_t>(idx)].coefficients);
    return compose(ops, std::move(components), sigmas, n, noiseSigma, seed);
}

double sphere_v1(double theta, double phi) {
    const double st = std::sin(theta);
    return 0.5 * std::sqrt(15.0 / kPi) * st * st * std::cos(phi) * std::sin(phi);
}

std::pair<double, double> wrap_spherical(double theta, double phi) {
    theta = std::fmod(theta, 2.0 * kPi);
    if (theta < 0.0) theta += 2.0 * kPi;
    if (theta > kPi) {
        theta = 2.0 * kPi - theta;
        phi += kPi;
    }
    phi = std::fmod(phi + kPi, 2.0 * kPi);
    if (phi < 0.0) phi += 2.0 * kPi;
    return {theta, phi - kPi};
}

std::pair<Vector, Vector> sphere_pc_functions(const TriangleMesh& mesh) {
    require_sphere(mesh);
    const auto k = static_cast<Eigen::Index>(mesh.vertex_count());
    Vector v1(k), v2(k);
    for (Eigen::Index v = 0; v < k; ++v) {
        const Vec3& p = mesh.vertex(static_cast<std::size_t>(v));
        v1[v] = 0.5 * std::sqrt(15.0 / kPi) * p.x() * p.y();
        v2[v] = v2_cartesian(p);
    }
    return {std::move(v1), std::move(v2)};
}

SyntheticDataset generate_sphere_dataset(const FemOperators& ops, int n, const std::vector<double>& sigmas,
                                         double noiseSigma, std::uint64_t seed) {
    check_counts(n, sigmas, 2);
    auto [v1, v2] = sphere_pc_functions(*ops.mesh);
    return compose(ops, {std::move(v1), std::move(v2)}, sigmas, n, noiseSigma, seed);
}

SyntheticDataset generate_misaligned_dataset(const FemOperators& ops, int n, double sigma,
                                             const std::vector<double>& shiftSet, std::uint64_t seed) {
    const TriangleMesh& mesh = *ops.mesh;
    require_sphere(mesh);
    check_counts(n, {sigma}, 1);
    if (shiftSet.empty()) throw InputError("shift set must not be empty");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, shiftSet.size() - 1);

    const auto k = static_cast<Eigen::Index>(mesh.vertex_count());
    std::vector<double> theta(static_cast<std::size_t>(k)), phi(static_cast<std::size_t>(k));
    for (Eigen::Index v = 0; v < k; ++v) {
        const Vec3& p = mesh.vertex(static_cast<std::size_t>(v));
        theta[static_cast<std::size_t>(v)] = std::acos(std::clamp(p.z() / p.norm(), -1.0, 1.0));
        phi[static_cast<std::size_t>(v)] = std::atan2(p.y(), p.x());
    }

    SyntheticDataset data;
    data.trueScores.resize(n, 1);
    data.x.values.resize(n, static_cast<Eigen::Index>(ops.location_count()));
    Vector shifted(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = sigma * normal(rng);
        const double dTheta = shiftSet[pick(rng)];
        const double dPhi = shiftSet[pick(rng)];
        data.trueScores(i, 0) = u;
        data.shifts.emplace_back(dTheta, dPhi);
        for (Eigen::Index v = 0; v < k; ++v) {
            const auto [t, f] = wrap_spherical(theta[static_cast<std::size_t>(v)] + dTheta,
                                               phi[static_cast<std::size_t>(v)] + dPhi);
            shifted[v] = sphere_v1(t, f);
        }
        data.x.values.row(i) = (u * (ops.psi * shifted)).transpose();
    }
    data.signal = data.x.values;
    data.trueComponents.push_back(sphere_pc_functions(mesh).first);
    data.noiseSigma = 0.0;
    data.seed = seed;
    return data;
}

}  // namespace smfpca
