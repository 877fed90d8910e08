#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "specfit/grid.hpp"

namespace specfit::io {

namespace fs = std::filesystem;

// Shortest text that reads back to the same double (17 significant digits).
std::string format_double(double v);
// Rejects non-finite values unless allow_nan, which admits exactly "nan".
double parse_double(const std::string& text, const std::string& where, bool allow_nan = false);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

CsvTable read_csv(const fs::path& path);
void write_csv(const fs::path& path, const CsvTable& table);

// Rebuilds a uniform grid from explicit abscissae; spacing must agree to
// 1e-9 relative.
Grid grid_from_abscissae(const std::vector<double>& nu, const std::string& where);

// Two columns `nu,value`, one row per grid point.
Spectrum read_spectrum_csv(const fs::path& path);
void write_spectrum_csv(const fs::path& path, const Spectrum& s);

// Wide layout: header `nu,<nu_1>,...,<nu_p>`, then one `<name>,<values>` row
// per source.
SourceLibrary read_sources_csv(const fs::path& path);
void write_sources_csv(const fs::path& path, const SourceLibrary& lib);
void write_derivatives_csv(const fs::path& path, const SourceLibrary& lib);

// Header `row_id,<nu_1>,...,<nu_p>`, then `<i>,<values>` rows.
MixtureSet read_mixtures_csv(const fs::path& path);
void write_mixtures_csv(const fs::path& path, const MixtureSet& x);

// Header `row_id,<column names>`, then `<i>,<values>` rows.
struct LabeledMatrix {
    std::vector<std::string> columns;
    Matrix values;
};
LabeledMatrix read_labeled_csv(const fs::path& path, bool allow_nan = false);
void write_labeled_csv(const fs::path& path, const std::vector<std::string>& columns, const Matrix& values);

// FNV-1a over the bytes of the given files, in order.
std::uint64_t fingerprint(const std::vector<fs::path>& files);
std::string hex(std::uint64_t v);

}  // namespace specfit::io
