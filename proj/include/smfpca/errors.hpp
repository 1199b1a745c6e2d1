#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smfpca {

// Two families: bad inputs (CLI exit 2) and numerical failures (CLI exit 3).

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
public:
    using InputError::InputError;
};

/// Mesh connectivity or geometry violates a TriangleMesh invariant.
/// `element()` is the offending triangle (or vertex) index.
class TopologyError : public InputError {
public:
    TopologyError(const std::string& what, std::size_t element)
        : InputError(what), element_(element) {}
    std::size_t element() const noexcept { return element_; }

private:
    std::size_t element_;
};

class DimensionMismatch : public InputError {
public:
    using InputError::InputError;
};

class NotASphere : public InputError {
public:
    using InputError::InputError;
};

class InvalidFoldCount : public InputError {
public:
    using InputError::InputError;
};

class ResourceLimit : public InputError {
public:
    using InputError::InputError;
};

class DegenerateTriangle : public NumericalError {
public:
    DegenerateTriangle(const std::string& what, std::size_t triangle)
        : NumericalError(what), triangle_(triangle) {}
    std::size_t triangle() const noexcept { return triangle_; }

private:
    std::size_t triangle_;
};

class SingularSystem : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceFailure : public NumericalError {
public:
    ConvergenceFailure(const std::string& what, int iterations)
        : NumericalError(what), iterations_(iterations) {}
    int iterations() const noexcept { return iterations_; }

private:
    int iterations_;
};

class DegenerateData : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateSmoother : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NonMonotoneObjective : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class RankDeficient : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace smfpca
