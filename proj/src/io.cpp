#include "specfit/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "specfit/error.hpp"

namespace specfit::io {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string where(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

std::vector<double> numeric_cells(const std::vector<std::string>& cells, std::size_t first,
                                  const std::string& at, bool allow_nan = false) {
    std::vector<double> out;
    out.reserve(cells.size() - first);
    for (std::size_t c = first; c < cells.size(); ++c) out.push_back(parse_double(cells[c], at, allow_nan));
    return out;
}

Grid header_grid(const CsvTable& t, const fs::path& path, const std::string& first) {
    if (t.header.empty() || t.header.front() != first) {
        throw ValidationError(where(path, 1) + ": expected header starting with '" + first + "'");
    }
    return grid_from_abscissae(numeric_cells(t.header, 1, where(path, 1)), where(path, 1));
}

Matrix wide_body(const CsvTable& t, const fs::path& path, std::size_t width,
                 std::vector<std::string>* labels, bool allow_nan = false) {
    Matrix m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto at = where(path, t.line_numbers[r]);
        if (t.rows[r].size() != width + 1) {
            throw ValidationError(at + ": expected " + std::to_string(width + 1) + " cells, found " +
                                  std::to_string(t.rows[r].size()));
        }
        if (labels) labels->push_back(t.rows[r].front());
        const auto vals = numeric_cells(t.rows[r], 1, at, allow_nan);
        for (std::size_t c = 0; c < width; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vals[c];
        }
    }
    return m;
}

std::vector<std::string> grid_header(const std::string& first, const Grid& g) {
    std::vector<std::string> h{first};
    for (std::size_t j = 0; j < g.count; ++j) h.push_back(format_double(g.at(j)));
    return h;
}

std::vector<std::string> row_cells(const std::string& label, const Eigen::Ref<const Eigen::RowVectorXd>& v) {
    std::vector<std::string> row{label};
    for (Eigen::Index j = 0; j < v.size(); ++j) row.push_back(format_double(v[j]));
    return row;
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& text, const std::string& at, bool allow_nan) {
    const std::string t = trim(text);
    if (t.empty()) throw ValidationError(at + ": empty numeric field");
    if (allow_nan && t == "nan") return std::numeric_limits<double>::quiet_NaN();
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    // ERANGE on underflow still yields the correctly rounded subnormal
    if (end != t.c_str() + t.size() || (errno == ERANGE && std::abs(v) > 1.0) || !std::isfinite(v)) {
        throw ValidationError(at + ": cannot parse '" + t + "' as a finite number");
    }
    return v;
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (!have_header) {
            t.header = split(line);
            have_header = true;
        } else {
            t.rows.push_back(split(line));
            t.line_numbers.push_back(lineno);
        }
    }
    if (!have_header) throw ValidationError(path.string() + ": file is empty");
    return t;
}

void write_csv(const fs::path& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    auto emit = [&out](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c) out << ',';
            out << cells[c];
        }
        out << '\n';
    };
    emit(table.header);
    for (const auto& r : table.rows) emit(r);
    if (!out) throw ValidationError("failed writing " + path.string());
}

Grid grid_from_abscissae(const std::vector<double>& nu, const std::string& at) {
    if (nu.size() < 3) throw ValidationError(at + ": a grid needs at least 3 points");
    const double step = (nu.back() - nu.front()) / static_cast<double>(nu.size() - 1);
    if (!(step > 0.0)) throw ValidationError(at + ": abscissae must be strictly increasing");
    for (std::size_t j = 1; j < nu.size(); ++j) {
        const double d = nu[j] - nu[j - 1];
        if (!(d > 0.0) || std::abs(d - step) > 1e-9 * step) {
            std::ostringstream os;
            os.precision(17);
            os << at << ": abscissae are not equally spaced at index " << j << " (spacing " << d
               << ", expected " << step << ")";
            throw ValidationError(os.str());
        }
    }
    return Grid(nu.front(), step, nu.size());
}

Spectrum read_spectrum_csv(const fs::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() != 2 || t.header[0] != "nu" || t.header[1] != "value") {
        throw ValidationError(where(path, 1) + ": expected header 'nu,value'");
    }
    std::vector<double> nu;
    Vector values(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto at = where(path, t.line_numbers[r]);
        if (t.rows[r].size() != 2) throw ValidationError(at + ": expected 2 cells");
        nu.push_back(parse_double(t.rows[r][0], at));
        values[static_cast<Eigen::Index>(r)] = parse_double(t.rows[r][1], at);
    }
    return Spectrum(grid_from_abscissae(nu, path.string()), std::move(values));
}

void write_spectrum_csv(const fs::path& path, const Spectrum& s) {
    CsvTable t;
    t.header = {"nu", "value"};
    for (std::size_t j = 0; j < s.size(); ++j) {
        t.rows.push_back({format_double(s.grid().at(j)), format_double(s[j])});
    }
    write_csv(path, t);
}

SourceLibrary read_sources_csv(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const Grid g = header_grid(t, path, "nu");
    if (t.rows.empty()) throw ValidationError(path.string() + ": no source rows");
    std::vector<std::string> names;
    Matrix s = wide_body(t, path, g.count, &names);
    return SourceLibrary(g, std::move(s), std::move(names));
}

void write_sources_csv(const fs::path& path, const SourceLibrary& lib) {
    CsvTable t;
    t.header = grid_header("nu", lib.grid());
    for (std::size_t j = 0; j < lib.size(); ++j) {
        t.rows.push_back(row_cells(lib.names()[j], lib.sources().row(static_cast<Eigen::Index>(j))));
    }
    write_csv(path, t);
}

void write_derivatives_csv(const fs::path& path, const SourceLibrary& lib) {
    CsvTable t;
    t.header = grid_header("nu", lib.grid());
    for (std::size_t j = 0; j < lib.size(); ++j) {
        t.rows.push_back(row_cells(lib.names()[j], lib.derivatives().row(static_cast<Eigen::Index>(j))));
    }
    write_csv(path, t);
}

MixtureSet read_mixtures_csv(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const Grid g = header_grid(t, path, "row_id");
    if (t.rows.empty()) throw ValidationError(path.string() + ": no mixture rows");
    return MixtureSet(g, wide_body(t, path, g.count, nullptr));
}

void write_mixtures_csv(const fs::path& path, const MixtureSet& x) {
    CsvTable t;
    t.header = grid_header("row_id", x.grid());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        t.rows.push_back(row_cells(std::to_string(i), x.observations().row(static_cast<Eigen::Index>(i))));
    }
    write_csv(path, t);
}

LabeledMatrix read_labeled_csv(const fs::path& path, bool allow_nan) {
    const CsvTable t = read_csv(path);
    if (t.header.empty() || t.header.front() != "row_id") {
        throw ValidationError(where(path, 1) + ": expected header starting with 'row_id'");
    }
    LabeledMatrix out;
    out.columns.assign(t.header.begin() + 1, t.header.end());
    out.values = wide_body(t, path, out.columns.size(), nullptr, allow_nan);
    return out;
}

void write_labeled_csv(const fs::path& path, const std::vector<std::string>& columns, const Matrix& values) {
    CsvTable t;
    t.header = {"row_id"};
    t.header.insert(t.header.end(), columns.begin(), columns.end());
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        t.rows.push_back(row_cells(std::to_string(i), values.row(i)));
    }
    write_csv(path, t);
}

std::uint64_t fingerprint(const std::vector<fs::path>& files) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw ValidationError("cannot open " + f.string());
        for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
            h ^= static_cast<unsigned char>(*it);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace specfit::io
