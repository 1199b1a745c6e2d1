#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <utility>

#include <CLI11.hpp>

#include "smfpca/errors.hpp"
#include "smfpca/fem.hpp"
#include "smfpca/io.hpp"
#include "smfpca/mesh.hpp"
#include "smfpca/metrics.hpp"
#include "smfpca/parallel.hpp"
#include "smfpca/saddle.hpp"
#include "smfpca/selection.hpp"
#include "smfpca/smfpca.hpp"
#include "smfpca/synth.hpp"

namespace smfpca::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";

// ---- configuration records -------------------------------------------------

struct MeshConfig {
    std::string mesh;
    int sphereSubdivisions = -1;
    std::string locations;  ///< optional CSV of x,y,z points projected onto the mesh
};

struct FitConfig {
    MeshConfig mesh;
    std::string data;
    int components = 3;
    std::string selection = "kfold";
    int folds = 5;
    double lambda = 0.0;
    std::vector<double> lambdaGrid;  ///< empty: default grid
    int gridPoints = 13;
    double gridMin = 1e-6;
    double gridMax = 1e2;
    bool center = true;
    int maxIterations = 15;
    double tolerance = 1e-6;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out = "smfpca_fit";
};

struct SimulateConfig {
    MeshConfig mesh;
    std::string generator = "sphere";
    int n = 50;
    std::vector<double> sigmas;  ///< empty: generator default
    double noise = 0.1;
    std::vector<int> eigenIndices{1, 2, 3};
    std::vector<double> shifts{0.0, 0.4};
    std::uint64_t seed = 0;
    std::string out = "smfpca_sim";
};

struct EvaluateConfig {
    MeshConfig mesh;
    std::string result;
    std::string truth;
    std::string data;
    int study = 0;  ///< > 0: run a replicate study instead
    SimulateConfig sim;
    FitConfig fit;
    std::string out = "smfpca_eval";
};

struct MeshInfoConfig {
    MeshConfig mesh;
    std::string exportMatrices;
};

// ---- manifest ---------------------------------------------------------------

class Manifest {
public:
    explicit Manifest(std::string section) : section_(std::move(section)) {}

    void add(const std::string& key, const std::string& value) {
        lines_.push_back(section_ + "." + key + "=\"" + value + "\"");
    }
    void add(const std::string& key, double value) { lines_.push_back(section_ + "." + key + "=" + format_double(value)); }
    void add(const std::string& key, int value) { lines_.push_back(section_ + "." + key + "=" + std::to_string(value)); }
    void add(const std::string& key, std::uint64_t value) {
        lines_.push_back(section_ + "." + key + "=" + std::to_string(value));
    }
    void add(const std::string& key, bool value) { lines_.push_back(section_ + "." + key + "=" + (value ? "true" : "false")); }
    template <typename T>
    void add(const std::string& key, const std::vector<T>& values) {
        std::string s = "[";
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) s += ", ";
            if constexpr (std::is_floating_point_v<T>) {
                s += format_double(values[i]);
            } else {
                s += std::to_string(values[i]);
            }
        }
        lines_.push_back(section_ + "." + key + "=" + s + "]");
    }

    void write(const fs::path& path) const {
        std::ofstream out(path);
        if (!out) throw InputError(path.string() + ": cannot write manifest");
        out << "# smfpca " << kVersion << ", Eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
            << EIGEN_MINOR_VERSION << '\n';
        out << "# rerun with: smfpca " << section_ << " --config <this file>\n";
        for (const auto& l : lines_) out << l << '\n';
    }

private:
    std::string section_;
    std::vector<std::string> lines_;
};

void add_mesh(Manifest& m, const MeshConfig& c) {
    m.add("mesh", c.mesh);
    m.add("sphere-subdivisions", c.sphereSubdivisions);
    m.add("locations", c.locations);
}

void add_fit(Manifest& m, const FitConfig& c) {
    m.add("components", c.components);
    m.add("selection", c.selection);
    m.add("folds", c.folds);
    m.add("lambda", c.lambda);
    m.add("lambda-grid", c.lambdaGrid);
    m.add("grid-points", c.gridPoints);
    m.add("grid-min", c.gridMin);
    m.add("grid-max", c.gridMax);
    m.add("center", c.center);
    m.add("max-iterations", c.maxIterations);
    m.add("tolerance", c.tolerance);
    m.add("seed", c.seed);
    m.add("threads", c.threads);
}

void add_simulate(Manifest& m, const SimulateConfig& c, const std::string& prefix = "") {
    m.add(prefix + "generator", c.generator);
    m.add(prefix + "n", c.n);
    m.add(prefix + "sigmas", c.sigmas);
    m.add(prefix + "noise", c.noise);
    m.add(prefix + "eigen-indices", c.eigenIndices);
    m.add(prefix + "shifts", c.shifts);
}

// ---- option registration ------------------------------------------------------

void register_mesh(CLI::App* app, MeshConfig& c) {
    app->add_option("--mesh", c.mesh, "OFF mesh file");
    app->add_option("--sphere-subdivisions", c.sphereSubdivisions,
                    "use a generated unit icosphere with this many subdivisions instead of --mesh");
    app->add_option("--locations", c.locations, "CSV of x,y,z sampling points (default: mesh vertices)");
}

void register_fit(CLI::App* app, FitConfig& c) {
    app->add_option("--components", c.components, "number of components")->capture_default_str();
    app->add_option("--selection", c.selection, "kfold, gcv or fixed")
        ->check(CLI::IsMember({"kfold", "gcv", "fixed"}))
        ->capture_default_str();
    app->add_option("--folds", c.folds, "folds for kfold selection")->capture_default_str();
    app->add_option("--lambda", c.lambda, "smoothing parameter for fixed selection");
    app->add_option("--lambda-grid", c.lambdaGrid, "comma-separated candidate lambdas")->delimiter(',');
    app->add_option("--grid-points", c.gridPoints, "size of the default grid")->capture_default_str();
    app->add_option("--grid-min", c.gridMin, "default grid lower factor")->capture_default_str();
    app->add_option("--grid-max", c.gridMax, "default grid upper factor")->capture_default_str();
    app->add_option("--center", c.center, "subtract column means (true/false)")->capture_default_str();
    app->add_option("--max-iterations", c.maxIterations)->capture_default_str();
    app->add_option("--tolerance", c.tolerance, "relative change of f for early exit")->capture_default_str();
    app->add_option("--seed", c.seed)->capture_default_str();
    app->add_option("--threads", c.threads)->capture_default_str();
}

void register_simulate(CLI::App* app, SimulateConfig& c) {
    app->add_option("--generator", c.generator, "eigen, sphere or misaligned")
        ->check(CLI::IsMember({"eigen", "sphere", "misaligned"}))
        ->capture_default_str();
    app->add_option("--n", c.n, "number of functions")->capture_default_str();
    app->add_option("--sigmas", c.sigmas, "score standard deviations")->delimiter(',');
    app->add_option("--noise", c.noise, "noise standard deviation")->capture_default_str();
    app->add_option("--eigen-indices", c.eigenIndices, "eigenpairs used by the eigen generator")->delimiter(',');
    app->add_option("--shifts", c.shifts, "angle shift set for the misaligned generator")->delimiter(',');
}

// ---- shared plumbing ----------------------------------------------------------

std::shared_ptr<const TriangleMesh> load_mesh_config(const MeshConfig& c) {
    if (!c.mesh.empty() && c.sphereSubdivisions >= 0) {
        throw InputError("--mesh and --sphere-subdivisions are mutually exclusive");
    }
    if (!c.mesh.empty()) return std::make_shared<const TriangleMesh>(load_mesh(c.mesh));
    if (c.sphereSubdivisions >= 0) return std::make_shared<const TriangleMesh>(unit_sphere_mesh(c.sphereSubdivisions));
    throw InputError("a mesh is required: pass --mesh <file.off> or --sphere-subdivisions <k>");
}

void warn_if_open(const TriangleMesh& mesh, std::ostream& err) {
    if (!mesh.is_closed()) {
        err << "warning: mesh is open (" << mesh.boundary_edge_count()
            << " boundary edges); natural boundary conditions are implied\n";
    }
}

FemOperators build_operators(const MeshConfig& c, int threads, std::ostream& err) {
    auto mesh = load_mesh_config(c);
    warn_if_open(*mesh, err);
    if (c.locations.empty()) return assemble_at_vertices(mesh, threads);
    const Matrix points = read_csv_matrix(c.locations);
    if (points.cols() != 3 || points.hasNaN()) {
        throw InputError(c.locations + ": locations need exactly three filled columns x,y,z");
    }
    std::vector<SurfaceLocation> locs;
    for (Eigen::Index i = 0; i < points.rows(); ++i) locs.push_back(locate_point(*mesh, points.row(i).transpose()));
    return assemble(mesh, std::move(locs), threads);
}

Selection selection_of(const FitConfig& c) {
    if (c.selection == "gcv") return Selection::gcv();
    if (c.selection == "fixed") {
        if (!(c.lambda > 0.0)) throw InputError("--selection fixed needs --lambda > 0");
        return Selection::fixed(c.lambda);
    }
    return Selection::kfold(c.folds);
}

FitOptions options_of(const FitConfig& c) {
    FitOptions o;
    o.maxIterations = c.maxIterations;
    o.tolerance = c.tolerance;
    o.center = c.center;
    o.seed = c.seed;
    o.threads = std::max(1, c.threads);
    return o;
}

std::vector<double> resolve_grid(const FitConfig& c, const FemOperators& ops) {
    if (c.selection == "fixed") return {c.lambda};
    if (!c.lambdaGrid.empty()) return c.lambdaGrid;
    return default_lambda_grid(ops, c.gridPoints, c.gridMin, c.gridMax);
}

/// Centers by observed column means, then fits; NaN cells are missing.
SmFpcaResult fit_matrix(const Matrix& x, const FitConfig& c, const std::vector<double>& grid, const FemOperators& ops) {
    const Selection sel = selection_of(c);
    FitOptions opts = options_of(c);
    if (!x.hasNaN()) return fit(DataMatrix{x, false}, c.components, grid, sel, ops, opts);

    Matrix work = x;
    Vector mean = Vector::Zero(x.cols());
    if (c.center) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            double sum = 0.0;
            int count = 0;
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                if (!std::isnan(x(i, j))) {
                    sum += x(i, j);
                    ++count;
                }
            }
            mean[j] = count ? sum / count : 0.0;
            work.col(j).array() -= mean[j];
        }
    }
    SmFpcaResult result = fit_missing(observations_from_matrix(work, ops), c.components, grid, sel, ops, opts);
    if (c.center) result.meanField = mean;
    return result;
}

Matrix component_matrix(const std::vector<PcComponent>& comps, bool scores) {
    if (comps.empty()) return {};
    const Eigen::Index rows = scores ? comps.front().scores.size() : comps.front().fCoefficients.size();
    Matrix m(rows, static_cast<Eigen::Index>(comps.size()));
    for (std::size_t c = 0; c < comps.size(); ++c) {
        m.col(static_cast<Eigen::Index>(c)) = scores ? comps[c].scores : comps[c].fCoefficients;
    }
    return m;
}

std::vector<double> resolved_sigmas(const SimulateConfig& c) {
    if (!c.sigmas.empty()) return c.sigmas;
    if (c.generator == "eigen") return {5.0, 3.0, 1.0};
    if (c.generator == "sphere") return {4.0, 2.0};
    return {4.0};
}

SyntheticDataset simulate_dataset(const SimulateConfig& c, const FemOperators& ops, std::uint64_t seed) {
    const std::vector<double> sigmas = resolved_sigmas(c);
    if (c.generator == "eigen") return generate_eigen_dataset(ops, c.eigenIndices, sigmas, c.n, c.noise, seed);
    if (c.generator == "sphere") return generate_sphere_dataset(ops, c.n, sigmas, c.noise, seed);
    if (sigmas.size() != 1) throw InputError("the misaligned generator takes a single sigma");
    return generate_misaligned_dataset(ops, c.n, sigmas.front(), c.shifts, seed);
}

/// splitmix64 step: independent sub-seeds from one configured seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void prepare_out(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw InputError(out + ": cannot create output directory: " + ec.message());
}

std::string report_row_header(std::size_t components) {
    std::string h = "replicate,method,principalAngle,signalMse";
    for (std::size_t j = 1; j <= components; ++j) h += ",pcFunctionMse" + std::to_string(j);
    for (std::size_t j = 1; j <= components; ++j) h += ",scoreMse" + std::to_string(j);
    return h;
}

std::string report_row(int replicate, const std::string& method, const EvaluationReport& r, std::size_t components) {
    std::string row = std::to_string(replicate) + "," + method + "," + format_double(r.principalAngle) + "," +
                      format_double(r.signalMse);
    for (std::size_t j = 0; j < components; ++j) {
        row += "," + (j < r.pcFunctionMse.size() ? format_double(r.pcFunctionMse[j]) : "");
    }
    for (std::size_t j = 0; j < components; ++j) {
        row += "," + (j < r.scoreMse.size() ? format_double(r.scoreMse[j]) : "");
    }
    return row;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---- commands ---------------------------------------------------------------------

int cmd_fit(const FitConfig& c, std::ostream& out, std::ostream& err) {
    if (c.data.empty()) throw InputError("fit needs --data <file.csv>");
    const FemOperators ops = build_operators(c.mesh, c.threads, err);
    const Matrix x = read_csv_matrix(c.data);
    if (x.cols() != static_cast<Eigen::Index>(ops.location_count())) {
        throw DimensionMismatch(c.data + ": " + std::to_string(x.cols()) + " columns but " +
                                std::to_string(ops.location_count()) + " sampling locations");
    }
    FitConfig resolved = c;
    resolved.lambdaGrid = resolve_grid(c, ops);
    const SmFpcaResult result = fit_matrix(x, resolved, resolved.lambdaGrid, ops);

    prepare_out(c.out);
    const fs::path dir(c.out);
    Json doc = result_to_json(result);
    doc["missingData"] = x.hasNaN();
    write_json(dir / "result.json", doc);
    write_csv_matrix(dir / "scores.csv", component_matrix(result.components, true));
    write_csv_matrix(dir / "vertex_values.csv", component_matrix(result.components, false));
    Json traces = Json::array();
    for (const auto& t : result.selectionTraces) traces.push_back(trace_to_json(t));
    write_json(dir / "selection.json", traces);

    Manifest m("fit");
    add_mesh(m, c.mesh);
    m.add("data", c.data);
    add_fit(m, resolved);
    m.add("out", c.out);
    m.write(dir / "manifest.ini");

    for (std::size_t j = 0; j < result.components.size(); ++j) {
        for (const auto& w : result.selectionTraces[j].warnings) err << "warning: component " << j + 1 << ": " << w << '\n';
        out << "component " << j + 1 << ": lambda " << format_double(result.components[j].lambda) << ", iterations "
            << result.components[j].iterations << ", adjusted variance " << format_double(result.adjustedVariance[j])
            << '\n';
    }
    out << "wrote " << (dir / "result.json").string() << '\n';
    return kExitOk;
}

int cmd_simulate(const SimulateConfig& c, std::ostream& out, std::ostream& err) {
    const FemOperators ops = build_operators(c.mesh, 1, err);
    const SyntheticDataset data = simulate_dataset(c, ops, c.seed);
    prepare_out(c.out);
    const fs::path dir(c.out);
    write_csv_matrix(dir / "data.csv", data.x.values);
    write_json(dir / "truth.json", truth_to_json(data, c.generator));
    save_mesh(*ops.mesh, dir / "mesh.off");

    SimulateConfig resolved = c;
    resolved.sigmas = resolved_sigmas(c);
    Manifest m("simulate");
    add_mesh(m, c.mesh);
    add_simulate(m, resolved);
    m.add("seed", c.seed);
    m.add("out", c.out);
    m.write(dir / "manifest.ini");
    out << "wrote " << data.x.n() << "x" << data.x.s() << " data to " << (dir / "data.csv").string() << '\n';
    return kExitOk;
}

int cmd_study(const EvaluateConfig& c, std::ostream& out, std::ostream& err) {
    const FemOperators ops = build_operators(c.mesh, 1, err);
    FitConfig fitCfg = c.fit;
    fitCfg.lambdaGrid = resolve_grid(c.fit, ops);
    const std::size_t nTrue = c.sim.generator == "eigen" ? c.sim.eigenIndices.size()
                              : c.sim.generator == "sphere" ? 2 : 1;
    const std::size_t width = std::max<std::size_t>(nTrue, static_cast<std::size_t>(fitCfg.components));

    const auto replicates = static_cast<std::size_t>(c.study);
    std::vector<std::pair<EvaluationReport, EvaluationReport>> reports(replicates);
    parallel_for(replicates, std::max(1, c.fit.threads), [&](std::size_t r) {
        const SyntheticDataset data = simulate_dataset(c.sim, ops, derive_seed(c.sim.seed, 2 * r));
        FitConfig local = fitCfg;
        local.seed = derive_seed(c.sim.seed, 2 * r + 1);
        local.threads = 1;
        const SmFpcaResult result = fit_matrix(data.x.values, local, local.lambdaGrid, ops);
        reports[r].first = evaluate_fit(result.components, result.meanField, result.totalVariance,
                                        data.trueComponents, data.trueScores, data.signal, ops);
        const std::vector<PcComponent> baseline = mv_pca(data.x, fitCfg.components, ops);
        const Matrix centered = data.x.values.rowwise() - data.x.values.colwise().mean();
        reports[r].second = evaluate_fit(baseline, column_means(data.x.values), data_energy(centered, ops),
                                         data.trueComponents, data.trueScores, data.signal, ops);
    });

    prepare_out(c.out);
    const fs::path dir(c.out);
    std::ofstream csv(dir / "replicates.csv");
    if (!csv) throw InputError((dir / "replicates.csv").string() + ": cannot write file");
    csv << report_row_header(width) << '\n';
    std::vector<double> smAngles, mvAngles;
    int wins = 0;
    for (std::size_t r = 0; r < replicates; ++r) {
        csv << report_row(static_cast<int>(r), "smfpca", reports[r].first, width) << '\n';
        csv << report_row(static_cast<int>(r), "mvpca", reports[r].second, width) << '\n';
        smAngles.push_back(reports[r].first.principalAngle);
        mvAngles.push_back(reports[r].second.principalAngle);
        if (reports[r].first.principalAngle < reports[r].second.principalAngle) ++wins;
    }
    Json summary;
    summary["replicates"] = c.study;
    summary["medianPrincipalAngle"] = {{"smfpca", median(smAngles)}, {"mvpca", median(mvAngles)}};
    summary["smfpcaBetterFraction"] = replicates ? static_cast<double>(wins) / static_cast<double>(replicates) : 0.0;
    write_json(dir / "study.json", summary);

    Manifest m("evaluate");
    add_mesh(m, c.mesh);
    m.add("study", c.study);
    add_simulate(m, [&] {
        SimulateConfig s = c.sim;
        s.sigmas = resolved_sigmas(c.sim);
        return s;
    }());
    m.add("sim-seed", c.sim.seed);
    add_fit(m, fitCfg);
    m.add("out", c.out);
    m.write(dir / "manifest.ini");
    out << "median principal angle: smfpca " << format_double(median(smAngles)) << ", mvpca "
        << format_double(median(mvAngles)) << " (" << wins << "/" << replicates << " paired wins)\n";
    return kExitOk;
}

int cmd_evaluate(const EvaluateConfig& c, std::ostream& out, std::ostream& err) {
    if (c.study > 0) return cmd_study(c, out, err);
    if (c.result.empty() || c.truth.empty()) throw InputError("evaluate needs --result and --truth (or --study N)");
    const FemOperators ops = build_operators(c.mesh, 1, err);
    const SmFpcaResult result = result_from_json(read_json(c.result));
    const Truth truth = truth_from_json(read_json(c.truth));
    const auto k = static_cast<Eigen::Index>(ops.basis_count());
    for (const auto& v : truth.components) {
        if (v.size() != k) throw DimensionMismatch(c.truth + ": truth components do not match the mesh vertex count");
    }
    for (const auto& pc : result.components) {
        if (pc.fCoefficients.size() != k) {
            throw DimensionMismatch(c.result + ": component coefficients do not match the mesh vertex count");
        }
        if (pc.scores.size() != truth.scores.rows()) {
            throw DimensionMismatch(c.result + ": score length does not match the truth sample count");
        }
    }
    const std::size_t width = std::max(result.components.size(), truth.components.size());
    Json report;
    report["smfpca"] = report_to_json(evaluate_fit(result.components, result.meanField, result.totalVariance,
                                                   truth.components, truth.scores, truth.signal, ops));
    std::vector<std::string> rows{report_row_header(width)};
    rows.push_back(report_row(0, "smfpca",
                              evaluate_fit(result.components, result.meanField, result.totalVariance, truth.components,
                                           truth.scores, truth.signal, ops),
                              width));
    if (!c.data.empty()) {
        const Matrix x = read_csv_matrix(c.data);
        if (x.rows() != truth.scores.rows() || x.cols() != static_cast<Eigen::Index>(ops.location_count())) {
            throw DimensionMismatch(c.data + ": data shape does not match the truth and mesh");
        }
        if (x.hasNaN()) {
            err << "warning: data has missing cells; MV-PCA baseline skipped\n";
        } else {
            const auto baseline = mv_pca(DataMatrix{x, false}, static_cast<int>(result.components.size()), ops);
            const Matrix centered = x.rowwise() - x.colwise().mean();
            const EvaluationReport r = evaluate_fit(baseline, column_means(x), data_energy(centered, ops),
                                                    truth.components, truth.scores, truth.signal, ops);
            report["mvpca"] = report_to_json(r);
            rows.push_back(report_row(0, "mvpca", r, width));
        }
    }
    prepare_out(c.out);
    const fs::path dir(c.out);
    write_json(dir / "report.json", report);
    std::ofstream csv(dir / "replicates.csv");
    for (const auto& row : rows) csv << row << '\n';

    Manifest m("evaluate");
    add_mesh(m, c.mesh);
    m.add("result", c.result);
    m.add("truth", c.truth);
    m.add("data", c.data);
    m.add("out", c.out);
    m.write(dir / "manifest.ini");
    out << "principal angle " << format_double(report["smfpca"]["principalAngle"].get<double>()) << '\n';
    return kExitOk;
}

int cmd_mesh_info(const MeshInfoConfig& c, std::ostream& out, std::ostream& err) {
    const FemOperators ops = build_operators(c.mesh, 1, err);
    const TriangleMesh& mesh = *ops.mesh;
    Json info;
    info["vertices"] = mesh.vertex_count();
    info["triangles"] = mesh.triangle_count();
    info["closed"] = mesh.is_closed();
    info["boundaryEdges"] = mesh.boundary_edge_count();
    info["totalArea"] = mesh.total_area();
    info["boundingDiagonal"] = mesh.bounding_diagonal();
    info["locations"] = ops.location_count();
    const SparseMatrix gram = ops.psi.transpose() * ops.psi;
    info["saddleDensity"] = saddle_density(SaddleSystem::build(ops, gram, 1.0));
    if (!c.exportMatrices.empty()) {
        prepare_out(c.exportMatrices);
        const fs::path dir(c.exportMatrices);
        write_matrix_market(ops.psi, dir / "psi.mtx");
        write_matrix_market(ops.mass, dir / "mass.mtx");
        write_matrix_market(ops.stiffness, dir / "stiffness.mtx");
    }
    out << info.dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Smooth functional PCA on triangulated surfaces"};
    app.set_config("--config", "", "flat key=value file, keys as <command>.<option>");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    FitConfig fitCfg;
    auto* fitCmd = app.add_subcommand("fit", "estimate principal components");
    register_mesh(fitCmd, fitCfg.mesh);
    fitCmd->add_option("--data", fitCfg.data, "CSV data, one row per function; empty cells are missing");
    register_fit(fitCmd, fitCfg);
    fitCmd->add_option("--out", fitCfg.out, "output directory")->capture_default_str();

    SimulateConfig simCfg;
    auto* simCmd = app.add_subcommand("simulate", "generate a synthetic dataset");
    register_mesh(simCmd, simCfg.mesh);
    register_simulate(simCmd, simCfg);
    simCmd->add_option("--seed", simCfg.seed)->capture_default_str();
    simCmd->add_option("--out", simCfg.out, "output directory")->capture_default_str();

    EvaluateConfig evalCfg;
    auto* evalCmd = app.add_subcommand("evaluate", "score a fit against ground truth, or run a replicate study");
    register_mesh(evalCmd, evalCfg.mesh);
    evalCmd->add_option("--result", evalCfg.result, "result.json from fit");
    evalCmd->add_option("--truth", evalCfg.truth, "truth.json from simulate");
    evalCmd->add_option("--data", evalCfg.data, "data CSV, enables the MV-PCA baseline");
    evalCmd->add_option("--study", evalCfg.study, "number of simulated replicates");
    register_simulate(evalCmd, evalCfg.sim);
    evalCmd->add_option("--sim-seed", evalCfg.sim.seed, "study seed")->capture_default_str();
    register_fit(evalCmd, evalCfg.fit);
    evalCmd->add_option("--out", evalCfg.out, "output directory")->capture_default_str();

    MeshInfoConfig infoCfg;
    auto* infoCmd = app.add_subcommand("mesh-info", "print mesh statistics");
    register_mesh(infoCmd, infoCfg.mesh);
    infoCmd->add_option("--export-matrices", infoCfg.exportMatrices, "directory for MatrixMarket operator dumps");

    for (auto* sub : {fitCmd, simCmd, evalCmd, infoCmd}) sub->fallthrough();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*fitCmd) return cmd_fit(fitCfg, out, err);
        if (*simCmd) return cmd_simulate(simCfg, out, err);
        if (*evalCmd) return cmd_evaluate(evalCfg, out, err);
        if (*infoCmd) return cmd_mesh_info(infoCfg, out, err);
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace smfpca::cli
