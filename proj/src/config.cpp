#include "specfit/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "specfit/error.hpp"
#include "specfit/io.hpp"

namespace specfit {

namespace {

struct Preset {
    const char* name;
    const char* text;
};

// Two overlapping sources on a 1000-point unit-step grid; source 1 always
// has weight 1.
constexpr const char* synthetic_iid = R"(# independent Gaussian shifts, 2 sources, 100 observations
name = synthetic-iid
m_observations = 100
grid.start = 0
grid.step = 1
grid.count = 1000
weights.lo = 1, 0.5
weights.hi = 1, 1.5
shift.model = iid
shift.sigma = 1, 1
noise.tau = 0.05
seed = 1
peak.1.1.shape = gaussian
peak.1.1.center = 300
peak.1.1.width = 20
peak.1.1.height = 1
peak.1.2.shape = gaussian
peak.1.2.center = 640
peak.1.2.width = 16
peak.1.2.height = 0.8
peak.2.1.shape = lorentzian
peak.2.1.center = 330
peak.2.1.width = 12
peak.2.1.height = 0.8
peak.2.2.shape = lorentzian
peak.2.2.center = 600
peak.2.2.width = 10
peak.2.2.height = 1
peak.2.3.shape = lorentzian
peak.2.3.center = 800
peak.2.3.width = 14
peak.2.3.height = 0.6
)";

// AR(1) shifts; 150 points keeps m * p inside the joint-covariance limit.
constexpr const char* synthetic_ar1 = R"(# serially correlated AR(1) shifts, 2 sources, 100 observations
name = synthetic-ar1
m_observations = 100
grid.start = 0
grid.step = 1
grid.count = 150
weights.lo = 1, 0.5
weights.hi = 1, 1.5
shift.model = ar1
shift.sigma = 1, 1
shift.rho = 0.5, 0.4
noise.tau = 0.05
seed = 1
peak.1.1.shape = gaussian
peak.1.1.center = 45
peak.1.1.width = 8
peak.1.1.height = 1
peak.1.2.shape = gaussian
peak.1.2.center = 105
peak.1.2.width = 7
peak.1.2.height = 0.8
peak.2.1.shape = lorentzian
peak.2.1.center = 30
peak.2.1.width = 5
peak.2.1.height = 0.8
peak.2.2.shape = lorentzian
peak.2.2.center = 62
peak.2.2.width = 6
peak.2.2.height = 1
peak.2.3.shape = lorentzian
peak.2.3.center = 120
peak.2.3.width = 5
peak.2.3.height = 0.6
)";

// Linear compression/expansion about nu = 0.
constexpr const char* synthetic_scale = R"(# per-source compression v in (0.8, 1.2), weights uniform on [4, 5]
name = synthetic-scale
m_observations = 100
grid.start = -10
grid.step = 0.05
grid.count = 401
weights.lo = 4
weights.hi = 5
shift.model = none
scale.model = uniform
scale.lo = 0.8
scale.hi = 1.2
noise.tau = 0.05
seed = 1
peak.1.1.shape = gaussian
peak.1.1.center = -1.5
peak.1.1.width = 1.5
peak.1.1.height = 1
peak.1.2.shape = gaussian
peak.1.2.center = 1.25
peak.1.2.width = 1.2
peak.1.2.height = 0.8
peak.2.1.shape = lorentzian
peak.2.1.center = -1
peak.2.1.width = 1
peak.2.1.height = 0.9
peak.2.2.shape = lorentzian
peak.2.2.center = 1.75
peak.2.2.width = 1.1
peak.2.2.height = 1
)";

// Four Lorentzian line sources with weights uniform on [5, 10].
constexpr const char* nmr_like = R"(# NMR-style mixtures: 4 Lorentzian sources, weights uniform on [5, 10]
name = nmr-like
m_observations = 100
grid.start = 0
grid.step = 1
grid.count = 1000
weights.lo = 5
weights.hi = 10
shift.model = iid
shift.sigma = 2
noise.tau = 0.05
seed = 1
peak.1.1.shape = lorentzian
peak.1.1.center = 150
peak.1.1.width = 12
peak.1.1.height = 1
peak.1.2.shape = lorentzian
peak.1.2.center = 420
peak.1.2.width = 10
peak.1.2.height = 0.6
peak.2.1.shape = lorentzian
peak.2.1.center = 180
peak.2.1.width = 14
peak.2.1.height = 0.7
peak.2.2.shape = lorentzian
peak.2.2.center = 700
peak.2.2.width = 12
peak.2.2.height = 1
peak.3.1.shape = lorentzian
peak.3.1.center = 450
peak.3.1.width = 11
peak.3.1.height = 0.9
peak.3.2.shape = lorentzian
peak.3.2.center = 860
peak.3.2.width = 13
peak.3.2.height = 0.5
peak.4.1.shape = lorentzian
peak.4.1.center = 300
peak.4.1.width = 10
peak.4.1.height = 0.8
peak.4.2.shape = lorentzian
peak.4.2.center = 730
peak.4.2.width = 15
peak.4.2.height = 0.7
peak.4.3.shape = lorentzian
peak.4.3.center = 880
peak.4.3.width = 10
peak.4.3.height = 0.4
)";

constexpr Preset presets[] = {
    {"synthetic-iid", synthetic_iid},
    {"synthetic-ar1", synthetic_ar1},
    {"synthetic-scale", synthetic_scale},
    {"nmr-like", nmr_like},
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream is(v);
    std::string cell;
    while (std::getline(is, cell, ',')) out.push_back(trim(cell));
    return out;
}

struct Entry {
    std::string value;
    std::size_t line;
};

class Parser {
public:
    explicit Parser(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
        throw ValidationError(origin_ + ":" + std::to_string(line) + ": " + msg);
    }

    double number(const Entry& e) const {
        return io::parse_double(e.value, origin_ + ":" + std::to_string(e.line));
    }

    std::size_t count(const Entry& e) const {
        const double v = number(e);
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
            fail(e.line, "expected a non-negative integer, got '" + e.value + "'");
        }
        return static_cast<std::size_t>(v);
    }

    std::vector<double> per_source(const Entry& e, std::size_t n) const {
        const auto cells = split_list(e.value);
        std::vector<double> out;
        for (const auto& c : cells) out.push_back(io::parse_double(c, origin_ + ":" + std::to_string(e.line)));
        if (out.size() == 1) out.assign(n, out.front());
        if (out.size() != n) {
            fail(e.line, "expected 1 or " + std::to_string(n) + " values, got " + std::to_string(out.size()));
        }
        return out;
    }

private:
    std::string origin_;
};

}  // namespace

SimConfig parse_sim_config(std::string_view text, const std::string& origin) {
    const Parser parser(origin);
    std::map<std::string, Entry> entries;
    // source -> peak -> field -> entry
    std::map<std::size_t, std::map<std::size_t, std::map<std::string, Entry>>> peak_entries;

    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) parser.fail(lineno, "expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty() || value.empty()) parser.fail(lineno, "empty key or value");

        if (key.rfind("peak.", 0) == 0) {
            const auto parts = [&] {
                std::vector<std::string> out;
                std::istringstream is(key);
                std::string part;
                while (std::getline(is, part, '.')) out.push_back(part);
                return out;
            }();
            if (parts.size() != 4) parser.fail(lineno, "peak keys look like peak.<source>.<index>.<field>");
            const std::size_t src = parser.count({parts[1], lineno});
            const std::size_t idx = parser.count({parts[2], lineno});
            if (src == 0 || idx == 0) parser.fail(lineno, "peak source and index are 1-based");
            static const char* fields[] = {"center", "width", "height", "shape"};
            if (std::find(std::begin(fields), std::end(fields), parts[3]) == std::end(fields)) {
                parser.fail(lineno, "unknown peak field '" + parts[3] + "'");
            }
            auto& slot = peak_entries[src][idx];
            if (slot.count(parts[3])) parser.fail(lineno, "duplicate key '" + key + "'");
            slot[parts[3]] = {value, lineno};
            continue;
        }
        static const char* known[] = {"name",       "n_sources",   "m_observations", "grid.start",
                                      "grid.step",  "grid.count",  "weights.lo",     "weights.hi",
                                      "shift.model", "shift.sigma", "shift.rho",     "scale.model",
                                      "scale.lo",   "scale.hi",    "noise.tau",      "seed"};
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            parser.fail(lineno, "unknown key '" + key + "'");
        }
        if (entries.count(key)) parser.fail(lineno, "duplicate key '" + key + "'");
        entries[key] = {value, lineno};
    }

    auto require = [&](const std::string& key) -> const Entry& {
        const auto it = entries.find(key);
        if (it == entries.end()) throw ValidationError(origin + ": missing required key '" + key + "'");
        return it->second;
    };

    SimConfig cfg;
    if (entries.count("name")) cfg.name = entries["name"].value;

    // sources are numbered 1..n without gaps
    const std::size_t n = peak_entries.empty() ? 0 : peak_entries.rbegin()->first;
    if (n == 0) throw ValidationError(origin + ": no peak.<source>.<index>.* entries");
    if (entries.count("n_sources") && parser.count(entries["n_sources"]) != n) {
        parser.fail(entries["n_sources"].line, "n_sources disagrees with the peak definitions");
    }
    cfg.peaks.resize(n);
    for (std::size_t j = 1; j <= n; ++j) {
        const auto it = peak_entries.find(j);
        if (it == peak_entries.end()) throw ValidationError(origin + ": source " + std::to_string(j) + " has no peaks");
        std::size_t expect = 1;
        for (const auto& [idx, fields] : it->second) {
            const std::size_t first_line = fields.begin()->second.line;
            if (idx != expect) parser.fail(first_line, "peak indices must be consecutive from 1");
            ++expect;
            PeakSpec pk;
            for (const char* f : {"center", "width", "height"}) {
                if (!fields.count(f)) {
                    parser.fail(first_line, "peak." + std::to_string(j) + "." + std::to_string(idx) +
                                                " is missing '" + f + "'");
                }
            }
            pk.center = parser.number(fields.at("center"));
            pk.width = parser.number(fields.at("width"));
            pk.height = parser.number(fields.at("height"));
            if (fields.count("shape")) {
                const auto& e = fields.at("shape");
                if (e.value == "gaussian") {
                    pk.shape = PeakShape::gaussian;
                } else if (e.value == "lorentzian") {
                    pk.shape = PeakShape::lorentzian;
                } else {
                    parser.fail(e.line, "peak shape must be gaussian or lorentzian");
                }
            }
            cfg.peaks[j - 1].push_back(pk);
        }
    }

    cfg.m_observations = parser.count(require("m_observations"));
    const Entry& count = require("grid.count");
    try {
        cfg.grid = Grid(parser.number(require("grid.start")), parser.number(require("grid.step")),
                        parser.count(count));
    } catch (const ValidationError& e) {
        if (std::string(e.what()).rfind(origin, 0) == 0) throw;
        parser.fail(count.line, e.what());
    }

    const auto lo = entries.count("weights.lo") ? parser.per_source(entries["weights.lo"], n)
                                                : std::vector<double>(n, 1.0);
    const auto hi = entries.count("weights.hi") ? parser.per_source(entries["weights.hi"], n) : lo;
    for (std::size_t j = 0; j < n; ++j) cfg.weights.push_back({lo[j], hi[j]});

    const std::string model = entries.count("shift.model") ? entries["shift.model"].value : "none";
    if (model == "none") {
        cfg.shift_model = ShiftModel::none;
    } else if (model == "iid") {
        cfg.shift_model = ShiftModel::iid;
    } else if (model == "ar1") {
        cfg.shift_model = ShiftModel::ar1;
    } else {
        parser.fail(entries["shift.model"].line, "shift.model must be none, iid or ar1");
    }
    if (cfg.shift_model != ShiftModel::none) cfg.sigma = parser.per_source(require("shift.sigma"), n);
    if (cfg.shift_model == ShiftModel::ar1) cfg.rho = parser.per_source(require("shift.rho"), n);

    const std::string scale = entries.count("scale.model") ? entries["scale.model"].value : "none";
    if (scale == "uniform") {
        cfg.scale_enabled = true;
        cfg.scale_lo = parser.number(require("scale.lo"));
        cfg.scale_hi = parser.number(require("scale.hi"));
    } else if (scale != "none") {
        parser.fail(entries["scale.model"].line, "scale.model must be none or uniform");
    }
    if (entries.count("noise.tau")) cfg.tau = parser.number(entries["noise.tau"]);
    if (entries.count("seed")) {
        const Entry& e = entries["seed"];
        try {
            std::size_t used = 0;
            cfg.seed = std::stoull(e.value, &used);
            if (used != e.value.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            parser.fail(e.line, "seed must be an unsigned integer");
        }
    }

    try {
        cfg.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(origin + ": " + e.what());
    }
    return cfg;
}

std::string serialize_sim_config(const SimConfig& cfg) {
    std::ostringstream os;
    const auto fmt = io::format_double;
    auto list = [&](const std::vector<double>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
        return out;
    };
    std::vector<double> lo;
    std::vector<double> hi;
    for (const auto& w : cfg.weights) {
        lo.push_back(w.lo);
        hi.push_back(w.hi);
    }
    os << "name = " << cfg.name << '\n';
    os << "n_sources = " << cfg.n_sources() << '\n';
    os << "m_observations = " << cfg.m_observations << '\n';
    os << "grid.start = " << fmt(cfg.grid.start) << '\n';
    os << "grid.step = " << fmt(cfg.grid.step) << '\n';
    os << "grid.count = " << cfg.grid.count << '\n';
    os << "weights.lo = " << list(lo) << '\n';
    os << "weights.hi = " << list(hi) << '\n';
    const char* model = cfg.shift_model == ShiftModel::none  ? "none"
                        : cfg.shift_model == ShiftModel::iid ? "iid"
                                                             : "ar1";
    os << "shift.model = " << model << '\n';
    if (cfg.shift_model != ShiftModel::none) os << "shift.sigma = " << list(cfg.sigma) << '\n';
    if (cfg.shift_model == ShiftModel::ar1) os << "shift.rho = " << list(cfg.rho) << '\n';
    if (cfg.scale_enabled) {
        os << "scale.model = uniform\n";
        os << "scale.lo = " << fmt(cfg.scale_lo) << '\n';
        os << "scale.hi = " << fmt(cfg.scale_hi) << '\n';
    } else {
        os << "scale.model = none\n";
    }
    os << "noise.tau = " << fmt(cfg.tau) << '\n';
    os << "seed = " << cfg.seed << '\n';
    for (std::size_t j = 0; j < cfg.peaks.size(); ++j) {
        for (std::size_t k = 0; k < cfg.peaks[j].size(); ++k) {
            const auto& pk = cfg.peaks[j][k];
            const std::string prefix = "peak." + std::to_string(j + 1) + "." + std::to_string(k + 1) + ".";
            os << prefix << "shape = " << (pk.shape == PeakShape::gaussian ? "gaussian" : "lorentzian") << '\n';
            os << prefix << "center = " << fmt(pk.center) << '\n';
            os << prefix << "width = " << fmt(pk.width) << '\n';
            os << prefix << "height = " << fmt(pk.height) << '\n';
        }
    }
    return os.str();
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& p : presets) out.emplace_back(p.name);
    return out;
}

std::string preset_text(const std::string& name) {
    for (const auto& p : presets) {
        if (name == p.name) return p.text;
    }
    throw ValidationError("unknown preset '" + name + "'");
}

SimConfig load_sim_config(const std::string& name_or_path) {
    for (const auto& p : presets) {
        if (name_or_path == p.name) return parse_sim_config(p.text, "preset " + name_or_path);
    }
    std::ifstream in(name_or_path);
    if (!in) {
        throw ValidationError("'" + name_or_path + "' is neither a preset nor a readable config file");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_sim_config(buf.str(), name_or_path);
}

}  // namespace specfit
