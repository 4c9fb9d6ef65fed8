#include "meanfield/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

#include "meanfield/errors.hpp"

namespace mf {

static_assert(std::endian::native == std::endian::little,
              "binary dumps assume a little-endian host");

namespace fs = std::filesystem;

namespace {

fs::path with_suffix(const fs::path& base, const char* suffix) {
    fs::path p = base;
    p += suffix;
    return p;
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + p.string());
    return out;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Json read_sidecar(const fs::path& base, const char* schema) {
    Json j;
    try {
        j = Json::parse(read_file(with_suffix(base, ".json")));
    } catch (const Json::exception& e) {
        throw ConfigError("malformed sidecar " + with_suffix(base, ".json").string() + ": " + e.what());
    }
    if (j.value("schema", "") != schema)
        throw ConfigError("sidecar " + with_suffix(base, ".json").string() + " is not a " + schema + " dump");
    return j;
}

} // namespace

Json grid_to_json(const Grid& grid) {
    Json box = Json::array();
    for (int a = 0; a < grid.dim(); ++a)
        box.push_back(grid.box_length(a));
    return {{"dim", grid.dim()}, {"box_length", box}, {"points_per_axis", grid.points_per_axis()}};
}

Grid grid_from_json(const Json& j) {
    try {
        int dim = j.at("dim").get<int>();
        Point box{0.0, 0.0, 0.0};
        const Json& b = j.at("box_length");
        if (!b.is_array() || static_cast<int>(b.size()) != dim)
            throw ConfigError("grid metadata: box_length must list one length per axis");
        for (int a = 0; a < dim; ++a)
            box[a] = b[a].get<double>();
        return Grid(dim, box, j.at("points_per_axis").get<int>());
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("grid metadata: ") + e.what());
    }
}

void write_matrix_dump(const fs::path& base, const OperatorKernel& k, const Json& extra) {
    const Matrix& m = k.matrix();
    auto out = open_out(with_suffix(base, ".bin"));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double v[2] = {m(r, c).real(), m(r, c).imag()};
            out.write(reinterpret_cast<const char*>(v), sizeof v);
        }
    if (!out)
        throw ConfigError("failed writing " + with_suffix(base, ".bin").string());

    Json side = extra.is_object() ? extra : Json::object();
    side["schema"] = kMatrixDumpSchema;
    side["rows"] = m.rows();
    side["cols"] = m.cols();
    side["dtype"] = "complex128";
    side["order"] = "row-major";
    side["endianness"] = "little";
    side["basis"] = "orthonormal";
    side["representation"] = k.representation() == Representation::position ? "position" : "momentum";
    side["grid"] = grid_to_json(k.grid());
    write_text(with_suffix(base, ".json"), side.dump(2) + "\n");
}

OperatorKernel read_matrix_dump(const fs::path& base) {
    Json side = read_sidecar(base, kMatrixDumpSchema);
    Grid grid = grid_from_json(side.at("grid"));
    const auto rows = side.at("rows").get<Eigen::Index>();
    const auto cols = side.at("cols").get<Eigen::Index>();
    if (rows != static_cast<Eigen::Index>(grid.size()) || cols != rows)
        throw ConfigError("matrix dump shape does not match its grid");
    std::string bytes = read_file(with_suffix(base, ".bin"));
    if (bytes.size() != static_cast<std::size_t>(rows * cols) * 16)
        throw ConfigError("matrix dump " + with_suffix(base, ".bin").string() + " has the wrong size");
    Matrix m(rows, cols);
    const char* p = bytes.data();
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c, p += 16) {
            double v[2];
            std::memcpy(v, p, sizeof v);
            m(r, c) = cplx(v[0], v[1]);
        }
    Representation rep = side.value("representation", "position") == "momentum" ? Representation::momentum
                                                                               : Representation::position;
    return OperatorKernel::from_matrix(grid, std::move(m), rep);
}

void write_many_body_dump(const fs::path& base, const ManyBodyState& psi, const Json& extra) {
    auto out = open_out(with_suffix(base, ".bin"));
    std::size_t records = 0;
    for (Eigen::Index i = 0; i < psi.amplitudes.size(); ++i) {
        cplx a = psi.amplitudes(i);
        if (a == cplx(0.0))
            continue;
        std::uint64_t idx = static_cast<std::uint64_t>(i);
        double v[2] = {a.real(), a.imag()};
        out.write(reinterpret_cast<const char*>(&idx), sizeof idx);
        out.write(reinterpret_cast<const char*>(v), sizeof v);
        ++records;
    }
    if (!out)
        throw ConfigError("failed writing " + with_suffix(base, ".bin").string());

    Json side = extra.is_object() ? extra : Json::object();
    side["schema"] = kManyBodyDumpSchema;
    side["n_particles"] = psi.n_particles;
    side["n_sites"] = psi.grid.size();
    side["ordering"] = "colex";
    side["record"] = "uint64 index, float64 re, float64 im (little-endian)";
    side["records"] = records;
    side["grid"] = grid_to_json(psi.grid);
    write_text(with_suffix(base, ".json"), side.dump(2) + "\n");
}

ManyBodyState read_many_body_dump(const fs::path& base) {
    Json side = read_sidecar(base, kManyBodyDumpSchema);
    Grid grid = grid_from_json(side.at("grid"));
    int n = side.at("n_particles").get<int>();
    std::size_t dim = SubsetBasis::binomial(static_cast<int>(grid.size()), n);
    std::string bytes = read_file(with_suffix(base, ".bin"));
    if (bytes.size() % 24 != 0)
        throw ConfigError("many-body dump has a truncated record");
    ManyBodyState psi{grid, n, Vector::Zero(static_cast<Eigen::Index>(dim))};
    for (std::size_t off = 0; off < bytes.size(); off += 24) {
        std::uint64_t idx;
        double v[2];
        std::memcpy(&idx, bytes.data() + off, sizeof idx);
        std::memcpy(v, bytes.data() + off + 8, sizeof v);
        if (idx >= dim)
            throw ConfigError("many-body dump index out of range");
        psi.amplitudes(static_cast<Eigen::Index>(idx)) = cplx(v[0], v[1]);
    }
    return psi;
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out)
        throw ConfigError("failed writing " + path.string());
}

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

} // namespace mf
