#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "smfpca/metrics.hpp"
#include "smfpca/smfpca.hpp"
#include "smfpca/synth.hpp"

namespace smfpca {

using Json = nlohmann::ordered_json;

/// Dense numeric CSV. Empty cells read as NaN. A first row holding exactly
/// the integers 0..cols-1 is taken as a header of location indices.
/// Errors name the file, row and column (1-based, counting the header).
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m, bool locationHeader = false);

/// Shortest round-trip decimal form.
std::string format_double(double v);

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const std::string& field);

Json trace_to_json(const SelectionTrace& trace);

/// Result document; `vertexValues` are f evaluated at mesh vertices (the
/// FE coefficients themselves for linear elements).
Json result_to_json(const SmFpcaResult& result);
SmFpcaResult result_from_json(const Json& j);

Json truth_to_json(const SyntheticDataset& data, const std::string& generator);

struct Truth {
    std::vector<Vector> components;
    Matrix scores;
    Matrix signal;  ///< noiseless data, n x s
};
Truth truth_from_json(const Json& j);

Json report_to_json(const EvaluationReport& report);

void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

}  // namespace smfpca
