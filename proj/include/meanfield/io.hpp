#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "meanfield/kernel.hpp"
#include "meanfield/manybody_state.hpp"

namespace mf {

using Json = nlohmann::json;

inline constexpr const char* kMatrixDumpSchema = "meanfield.matrix/1";
inline constexpr const char* kManyBodyDumpSchema = "meanfield.manybody/1";

Json grid_to_json(const Grid& grid);
Grid grid_from_json(const Json& j);

/// Writes `<base>.bin` (row-major complex128, little-endian; the orthonormal-basis
/// matrix) and `<base>.json` (grid metadata, representation, `extra`).
void write_matrix_dump(const std::filesystem::path& base, const OperatorKernel& k,
                       const Json& extra = Json::object());
OperatorKernel read_matrix_dump(const std::filesystem::path& base);

/// Writes `<base>.bin` as (uint64 colex subset index, complex128 amplitude) records
/// for the nonzero amplitudes, and `<base>.json` with grid and particle number.
void write_many_body_dump(const std::filesystem::path& base, const ManyBodyState& psi,
                          const Json& extra = Json::object());
ManyBodyState read_many_body_dump(const std::filesystem::path& base);

/// Writes a string to a file, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double x);

} // namespace mf
