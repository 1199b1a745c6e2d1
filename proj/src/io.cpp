#include "smfpca/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "smfpca/errors.hpp"

namespace smfpca {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& out) {
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

bool is_location_header(const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const std::string t = trim(cells[c]);
        long long value = -1;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
        if (ec != std::errc() || ptr != t.data() + t.size() || value != static_cast<long long>(c)) return false;
    }
    return !cells.empty();
}

double json_double(const Json& j) {
    // Infinite GCV scores serialize as null.
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

Matrix read_csv_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open data file");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineNo = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (rows.empty() && width == 0 && is_location_header(cells)) {
            width = cells.size();
            continue;
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width) {
            throw ParseError(path.string() + ": row " + std::to_string(lineNo) + " has " +
                             std::to_string(cells.size()) + " columns, expected " + std::to_string(width));
        }
        std::vector<double> row(width);
        for (std::size_t c = 0; c < width; ++c) {
            const std::string t = trim(cells[c]);
            if (t.empty()) {
                row[c] = std::numeric_limits<double>::quiet_NaN();
            } else if (!parse_number(t, row[c]) || !std::isfinite(row[c])) {
                throw ParseError(path.string() + ": row " + std::to_string(lineNo) + ", column " +
                                 std::to_string(c + 1) + ": '" + t + "' is not a finite number");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path.string() + ": no data rows");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& m, bool locationHeader) {
    std::ofstream out(path);
    if (!out) throw InputError(path.string() + ": cannot write file");
    if (locationHeader) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << c;
        out << '\n';
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
        out << '\n';
    }
}

Json vector_to_json(const Vector& v) {
    Json j = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

Vector vector_from_json(const Json& j, const std::string& field) {
    if (!j.is_array()) throw InputError("field '" + field + "' must be an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InputError("field '" + field + "' entry " + std::to_string(i) + " is not a number");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Json trace_to_json(const SelectionTrace& trace) {
    Json j;
    j["method"] = to_string(trace.method);
    j["lambdaGrid"] = trace.lambdaGrid;
    j["scores"] = trace.scores;
    j["chosen"] = trace.chosen;
    j["chosenLambda"] = trace.lambdaGrid.empty() ? 0.0 : trace.lambdaGrid[trace.chosen];
    j["history"] = trace.history;
    j["warnings"] = trace.warnings;
    return j;
}

Json result_to_json(const SmFpcaResult& result) {
    Json j;
    j["totalVariance"] = result.totalVariance;
    j["adjustedVariance"] = result.adjustedVariance;
    j["cumulativeVariance"] = result.cumulativeVariance;
    j["meanField"] = vector_to_json(result.meanField);
    Json comps = Json::array();
    for (std::size_t c = 0; c < result.components.size(); ++c) {
        const PcComponent& pc = result.components[c];
        Json jc;
        jc["lambda"] = pc.lambda;
        jc["functionNorm"] = pc.functionNorm;
        jc["iterations"] = pc.iterations;
        jc["scores"] = vector_to_json(pc.scores);
        jc["vertexValues"] = vector_to_json(pc.fCoefficients);
        jc["g"] = vector_to_json(pc.gCoefficients);
        jc["objectiveTrace"] = pc.objectiveTrace;
        jc["lambdaHistory"] = pc.lambdaHistory;
        if (c < result.selectionTraces.size()) jc["selection"] = trace_to_json(result.selectionTraces[c]);
        comps.push_back(std::move(jc));
    }
    j["components"] = std::move(comps);
    return j;
}

SmFpcaResult result_from_json(const Json& j) {
    SmFpcaResult r;
    try {
        r.totalVariance = j.at("totalVariance").get<double>();
        r.adjustedVariance = j.at("adjustedVariance").get<std::vector<double>>();
        r.cumulativeVariance = j.at("cumulativeVariance").get<std::vector<double>>();
        r.meanField = vector_from_json(j.at("meanField"), "meanField");
        for (const Json& jc : j.at("components")) {
            PcComponent pc;
            pc.lambda = jc.at("lambda").get<double>();
            pc.functionNorm = jc.at("functionNorm").get<double>();
            pc.iterations = jc.at("iterations").get<int>();
            pc.scores = vector_from_json(jc.at("scores"), "scores");
            pc.fCoefficients = vector_from_json(jc.at("vertexValues"), "vertexValues");
            pc.gCoefficients = vector_from_json(jc.at("g"), "g");
            pc.objectiveTrace = jc.at("objectiveTrace").get<std::vector<double>>();
            pc.lambdaHistory = jc.at("lambdaHistory").get<std::vector<double>>();
            if (jc.contains("selection")) {
                const Json& js = jc["selection"];
                SelectionTrace t;
                const std::string m = js.at("method").get<std::string>();
                t.method = m == "gcv" ? SelectionMethod::Gcv : m == "fixed" ? SelectionMethod::Fixed : SelectionMethod::KFold;
                t.lambdaGrid = js.at("lambdaGrid").get<std::vector<double>>();
                for (const Json& s : js.at("scores")) t.scores.push_back(json_double(s));
                t.chosen = js.at("chosen").get<std::size_t>();
                t.history = js.at("history").get<std::vector<std::size_t>>();
                t.warnings = js.at("warnings").get<std::vector<std::string>>();
                r.selectionTraces.push_back(std::move(t));
            }
            r.components.push_back(std::move(pc));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed result document: ") + e.what());
    }
    return r;
}

Json truth_to_json(const SyntheticDataset& data, const std::string& generator) {
    Json j;
    j["generator"] = generator;
    j["seed"] = data.seed;
    j["noiseSigma"] = data.noiseSigma;
    j["n"] = data.x.n();
    j["s"] = data.x.s();
    Json comps = Json::array();
    for (const Vector& v : data.trueComponents) comps.push_back(vector_to_json(v));
    j["components"] = std::move(comps);
    Json scores = Json::array();
    for (Eigen::Index i = 0; i < data.trueScores.rows(); ++i) scores.push_back(vector_to_json(data.trueScores.row(i).transpose()));
    j["scores"] = std::move(scores);
    Json signal = Json::array();
    for (Eigen::Index i = 0; i < data.signal.rows(); ++i) signal.push_back(vector_to_json(data.signal.row(i).transpose()));
    j["signal"] = std::move(signal);
    if (!data.shifts.empty()) {
        Json shifts = Json::array();
        for (auto [t, p] : data.shifts) shifts.push_back({t, p});
        j["shifts"] = std::move(shifts);
    }
    return j;
}

Truth truth_from_json(const Json& j) {
    Truth t;
    try {
        for (const Json& c : j.at("components")) t.components.push_back(vector_from_json(c, "components"));
        const Json& rows = j.at("scores");
        t.scores.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.components.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Vector row = vector_from_json(rows[i], "scores");
            if (row.size() != t.scores.cols()) throw InputError("truth score row " + std::to_string(i) + " has wrong length");
            t.scores.row(static_cast<Eigen::Index>(i)) = row.transpose();
        }
        const Json& signal = j.at("signal");
        for (std::size_t i = 0; i < signal.size(); ++i) {
            const Vector row = vector_from_json(signal[i], "signal");
            if (i == 0) t.signal.resize(static_cast<Eigen::Index>(signal.size()), row.size());
            if (row.size() != t.signal.cols()) throw InputError("truth signal row " + std::to_string(i) + " has wrong length");
            t.signal.row(static_cast<Eigen::Index>(i)) = row.transpose();
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed truth document: ") + e.what());
    }
    return t;
}

Json report_to_json(const EvaluationReport& report) {
    Json j;
    j["pcFunctionMse"] = report.pcFunctionMse;
    j["scoreMse"] = report.scoreMse;
    j["signalMse"] = report.signalMse;
    j["principalAngle"] = report.principalAngle;
    j["explainedVarianceCurve"] = report.explainedVarianceCurve;
    return j;
}

void write_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw InputError(path.string() + ": cannot write file");
    out << j.dump(2) << '\n';
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open file");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace smfpca
