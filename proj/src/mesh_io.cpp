#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>

#include "smfpca/errors.hpp"
#include "smfpca/mesh.hpp"

namespace smfpca {

namespace {

// Yields whitespace-separated tokens line by line, skipping blanks and # comments.
class OffReader {
public:
    explicit OffReader(std::istream& in) : in_(in) {}

    bool next_line(std::vector<std::string>& tokens) {
        std::string line;
        while (std::getline(in_, line)) {
            ++lineNo_;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            tokens.clear();
            std::istringstream ss(line);
            std::string tok;
            while (ss >> tok) tokens.push_back(tok);
            if (!tokens.empty()) return true;
        }
        return false;
    }

    int line() const { return lineNo_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("OFF line " + std::to_string(lineNo_) + ": " + msg);
    }

private:
    std::istream& in_;
    int lineNo_ = 0;
};

template <typename T>
T parse_number(const std::string& tok, const OffReader& reader) {
    T value{};
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) reader.fail("cannot parse '" + tok + "' as a number");
    return value;
}

}  // namespace

TriangleMesh parse_off(std::istream& in) {
    OffReader reader(in);
    std::vector<std::string> tok;
    if (!reader.next_line(tok)) throw ParseError("OFF: empty input");

    // The counts may share the header line ("OFF 4 4 6").
    if (tok[0] != "OFF") reader.fail("expected header 'OFF', got '" + tok[0] + "'");
    tok.erase(tok.begin());
    if (tok.empty() && !reader.next_line(tok)) reader.fail("missing counts line");
    if (tok.size() < 2) reader.fail("counts line needs 'K T [E]'");
    const long long k = parse_number<long long>(tok[0], reader);
    const long long t = parse_number<long long>(tok[1], reader);
    if (k <= 0 || t <= 0) reader.fail("vertex and face counts must be positive");

    std::vector<Vec3> vertices;
    vertices.reserve(static_cast<std::size_t>(k));
    for (long long v = 0; v < k; ++v) {
        if (!reader.next_line(tok)) reader.fail("unexpected end of file in vertex list");
        if (tok.size() < 3) reader.fail("vertex line needs 3 coordinates");
        vertices.emplace_back(parse_number<double>(tok[0], reader), parse_number<double>(tok[1], reader),
                              parse_number<double>(tok[2], reader));
    }

    std::vector<Triangle> triangles;
    triangles.reserve(static_cast<std::size_t>(t));
    for (long long f = 0; f < t; ++f) {
        if (!reader.next_line(tok)) reader.fail("unexpected end of file in face list");
        const int degree = parse_number<int>(tok[0], reader);
        if (degree != 3) reader.fail("face " + std::to_string(f) + " has degree " + std::to_string(degree) + ", only triangles are supported");
        if (tok.size() < 4) reader.fail("face line needs 3 vertex indices");
        Triangle tri{};
        for (int i = 0; i < 3; ++i) {
            const long long idx = parse_number<long long>(tok[i + 1], reader);
            if (idx < 0 || idx >= k) {
                reader.fail("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                            " but the mesh has " + std::to_string(k) + " vertices");
            }
            tri[i] = static_cast<int>(idx);
        }
        triangles.push_back(tri);
    }
    return TriangleMesh(std::move(vertices), std::move(triangles));
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open mesh file " + path.string());
    try {
        return parse_off(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_off(const TriangleMesh& mesh, std::ostream& out) {
    out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.triangle_count() << " 0\n";
    out << std::setprecision(17);
    for (const Vec3& v : mesh.vertices()) out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    for (const Triangle& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write mesh file " + path.string());
    write_off(mesh, out);
}

}  // namespace smfpca
