#include <doctest.h>

#include <sstream>

#include "specfit/cli.hpp"
#include "specfit/config.hpp"
#include "specfit/io.hpp"
#include "specfit/oracle.hpp"
#include "support.hpp"

using namespace specfit;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "specfit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string clean_config(const fs::path& path) {
    const std::string text = "m_observations = 6\ngrid.start = 0\ngrid.step = 1\ngrid.count = 120\n"
                             "weights.lo = 1, 0.5\nweights.hi = 1, 1.5\nnoise.tau = 0\nseed = 3\n"
                             "peak.1.1.center = 50\npeak.1.1.width = 8\npeak.1.1.height = 1\n"
                             "peak.2.1.center = 66\npeak.2.1.width = 9\npeak.2.1.height = 1\n"
                             "peak.2.1.shape = lorentzian\n";
    testing::spit(path, text);
    return path.string();
}

io::CsvTable summary(const fs::path& dir) { return io::read_csv(dir / "comparison_summary.csv"); }

}  // namespace

TEST_CASE("simulate writes the preset dimensions") {
    TempDir dir("cli-sim");
    const auto data = dir / "iid";
    const Outcome o = run({"simulate", "--config", "synthetic-iid", "--out", data.string()});
    REQUIRE(o.code == 0);
    for (const char* f : {"sources.csv", "sources_deriv.csv", "mixtures.csv", "truth_A.csv", "truth_xi.csv",
                          "truth_scale.csv", "config.txt"}) {
        CHECK(fs::exists(data / f));
    }
    const MixtureSet x = io::read_mixtures_csv(data / "mixtures.csv");
    CHECK(x.rows() == 100);
    CHECK(x.grid().count == 1000);
    CHECK(load_sim_config((data / "config.txt").string()).seed == 1);
}

TEST_CASE("simulate is byte-identical across runs and honors --seed") {
    TempDir dir("cli-determinism");
    REQUIRE(run({"simulate", "--config", "synthetic-ar1", "--out", (dir / "a").string()}).code == 0);
    REQUIRE(run({"simulate", "--config", "synthetic-ar1", "--out", (dir / "b").string()}).code == 0);
    REQUIRE(run({"simulate", "--config", "synthetic-ar1", "--out", (dir / "c").string(), "--seed", "9"}).code == 0);
    for (const char* f : {"mixtures.csv", "truth_A.csv", "truth_xi.csv", "config.txt"}) {
        CHECK(io::fingerprint({dir / "a" / f}) == io::fingerprint({dir / "b" / f}));
    }
    CHECK(io::fingerprint({dir / "a" / "mixtures.csv"}) != io::fingerprint({dir / "c" / "mixtures.csv"}));
}

TEST_CASE("simulate removes partial outputs on failure") {
    TempDir dir("cli-partial");
    const auto out = dir / "data";
    fs::create_directories(out / "mixtures.csv");
    const Outcome o = run({"simulate", "--config", "synthetic-ar1", "--out", out.string()});
    CHECK(o.code == 1);
    CHECK_FALSE(fs::exists(out / "sources.csv"));
    CHECK_FALSE(fs::exists(out / "sources_deriv.csv"));
}

TEST_CASE("simulate reports config errors with line numbers") {
    TempDir dir("cli-badcfg");
    testing::spit(dir / "bad.txt", "m_observations = 2\nwhat = 1\n");
    const Outcome o = run({"simulate", "--config", (dir / "bad.txt").string(), "--out", (dir / "x").string()});
    CHECK(o.code == 1);
    CHECK(o.err.find("bad.txt:2") != std::string::npos);
}

TEST_CASE("fit ols on clean data reproduces the truth") {
    TempDir dir("cli-clean");
    const auto data = dir / "clean";
    REQUIRE(run({"simulate", "--config", clean_config(dir / "clean.txt"), "--out", data.string()}).code == 0);
    const auto truth = io::read_labeled_csv(data / "truth_A.csv").values;
    const auto mix = io::read_mixtures_csv(data / "mixtures.csv");
    const auto lib = io::read_sources_csv(data / "sources.csv");
    CHECK(testing::max_abs(mix.observations() - truth * lib.sources()) == 0.0);

    const Outcome o = run({"fit", "--method", "ols", "--data", data.string()});
    REQUIRE(o.code == 0);
    CHECK(o.out.find("mean |err|") != std::string::npos);
    const auto fit = io::read_labeled_csv(data / "fit-ols" / "fit_A.csv").values;
    CHECK(testing::max_abs(fit - truth) <= 1e-8);
    CHECK(fs::exists(data / "fit-ols" / "fit_params.csv"));
    CHECK(fs::exists(data / "fit-ols" / "fit_diag.csv"));

    REQUIRE(run({"fit", "--method", "agls", "--data", data.string()}).code == 0);
    REQUIRE(run({"compare", (data / "fit-ols").string(), (data / "fit-agls").string(), "--out",
                 (dir / "cmp").string()})
                .code == 0);
    const auto t = summary(dir / "cmp");
    REQUIRE(t.rows.size() == 2);
    for (std::size_t c : {2u, 3u}) {
        CHECK(std::abs(std::stod(t.rows[0][c]) - std::stod(t.rows[1][c])) <= 1e-8);
    }

    const Outcome rep = run({"report", (data / "fit-agls").string()});
    CHECK(rep.code == 0);
    CHECK(rep.out.find("agls") != std::string::npos);
}

TEST_CASE("fit with explicit source files") {
    TempDir dir("cli-sources");
    const auto data = dir / "clean";
    REQUIRE(run({"simulate", "--config", clean_config(dir / "clean.txt"), "--out", data.string()}).code == 0);
    const auto lib = io::read_sources_csv(data / "sources.csv");
    io::write_spectrum_csv(dir / "first.csv", lib.source(0));
    io::write_spectrum_csv(dir / "second.csv", lib.source(1));
    const Outcome o = run({"fit", "--method", "ols", "--data", data.string(), "--source", (dir / "first.csv").string(),
                           "--source", (dir / "second.csv").string(), "--out", (dir / "fit").string()});
    REQUIRE(o.code == 0);
    const auto fit = io::read_labeled_csv(dir / "fit" / "fit_A.csv");
    CHECK(fit.columns == std::vector<std::string>{"first", "second"});

    io::write_spectrum_csv(dir / "coarse.csv", Spectrum(Grid(0.0, 2.0, 120), lib.sources().row(0).transpose()));
    const Outcome bad = run({"fit", "--method", "ols", "--data", data.string(), "--source",
                             (dir / "coarse.csv").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("step=2") != std::string::npos);
    CHECK(bad.err.find("step=1") != std::string::npos);

    const Outcome dup = run({"fit", "--method", "agls", "--data", data.string(), "--source",
                             (dir / "first.csv").string(), "--source", (dir / "first.csv").string()});
    CHECK(dup.code == 2);
    CHECK(dup.err.find("agls") != std::string::npos);
}

TEST_CASE("fit agls beats ols on the iid preset") {
    TempDir dir("cli-iid");
    const auto data = dir / "iid";
    REQUIRE(run({"simulate", "--config", "synthetic-iid", "--out", data.string()}).code == 0);
    REQUIRE(run({"fit", "--method", "ols", "--data", data.string()}).code == 0);
    REQUIRE(run({"fit", "--method", "agls", "--data", data.string()}).code == 0);
    REQUIRE(run({"compare", (data / "fit-ols").string(), (data / "fit-agls").string(), "--out",
                 (dir / "cmp").string()})
                .code == 0);
    const auto t = summary(dir / "cmp");
    CHECK(t.rows[0][0] == "ols");
    CHECK(t.rows[1][0] == "agls");
    CHECK(std::stod(t.rows[1][2]) < std::stod(t.rows[0][2]));
    const auto longform = io::read_csv(dir / "cmp" / "comparison_long.csv");
    CHECK(longform.header == std::vector<std::string>{"row", "method", "source", "estimate", "truth"});
    CHECK(longform.rows.size() == 2 * 100 * 2);
}

TEST_CASE("fit oracle on a slice matches the library") {
    TempDir dir("cli-oracle");
    const auto data = dir / "iid";
    REQUIRE(run({"simulate", "--config", "synthetic-iid", "--out", data.string()}).code == 0);
    const auto slice_dir = dir / "slice";
    fs::create_directories(slice_dir);
    const MixtureSet slice = io::read_mixtures_csv(data / "mixtures.csv").slice(0, 5);
    io::write_mixtures_csv(slice_dir / "mixtures.csv", slice);
    fs::copy_file(data / "sources.csv", slice_dir / "sources.csv");
    REQUIRE(run({"fit", "--method", "oracle", "--data", slice_dir.string(), "--xi-max", "3", "--xi-step", "0.25"})
                .code == 0);
    OracleConfig oc;
    oc.xi_max = 3.0;
    oc.xi_step = 0.25;
    const FitResult direct = oracle_fit(slice, io::read_sources_csv(data / "sources.csv"), oc);
    CHECK(io::read_labeled_csv(slice_dir / "fit-oracle" / "fit_A.csv").values == direct.a_hat);
    CHECK(io::read_labeled_csv(slice_dir / "fit-oracle" / "fit_xi.csv").values == *direct.xi_hat);
}

TEST_CASE("three-method comparison on the ar1 preset") {
    TempDir dir("cli-ar1");
    const auto data = dir / "ar1";
    REQUIRE(run({"simulate", "--config", "synthetic-ar1", "--out", data.string()}).code == 0);
    for (const char* m : {"ols", "agmle-hetero", "agmle-ar1"}) {
        REQUIRE(run({"fit", "--method", m, "--data", data.string()}).code == 0);
    }
    REQUIRE(run({"compare", (data / "fit-ols").string(), (data / "fit-agmle-hetero").string(),
                 (data / "fit-agmle-ar1").string(), "--out", (dir / "cmp").string()})
                .code == 0);
    const auto params = io::read_csv(dir / "cmp" / "comparison_params.csv");
    CHECK(params.header == std::vector<std::string>{"method", "param", "index", "value"});
    std::size_t rho_rows = 0;
    for (const auto& row : params.rows) {
        if (row[1] == "rho") {
            ++rho_rows;
            CHECK(row[0] == "agmle-ar1");
        }
    }
    CHECK(rho_rows == 2);
    CHECK(summary(dir / "cmp").rows.size() == 3);
}

TEST_CASE("compare rejects reports on different data") {
    TempDir dir("cli-mismatch");
    REQUIRE(run({"simulate", "--config", "synthetic-ar1", "--out", (dir / "a").string()}).code == 0);
    REQUIRE(run({"simulate", "--config", "synthetic-ar1", "--out", (dir / "b").string(), "--seed", "2"}).code == 0);
    REQUIRE(run({"fit", "--method", "ols", "--data", (dir / "a").string()}).code == 0);
    REQUIRE(run({"fit", "--method", "ols", "--data", (dir / "b").string()}).code == 0);
    const Outcome o = run({"compare", (dir / "a" / "fit-ols").string(), (dir / "b" / "fit-ols").string(), "--out",
                           (dir / "cmp").string()});
    CHECK(o.code == 1);
    CHECK(o.err.find("fingerprint") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "cmp" / "comparison_summary.csv"));
    CHECK(run({"compare", (dir / "a" / "fit-ols").string(), "--out", (dir / "cmp").string()}).code == 1);
}

TEST_CASE("usage errors map to exit code 1") {
    CHECK(run({}).code == 1);
    CHECK(run({"fit", "--method", "magic", "--data", "."}).code == 1);
    CHECK(run({"fit", "--method", "ols"}).code == 1);
    CHECK(run({"fit", "--method", "ols", "--data", "/nonexistent/dir"}).code == 1);
    CHECK(run({"fit", "--method", "agls", "--data", ".", "--taylor-order", "3"}).code == 1);
    CHECK(run({"report", "/nonexistent/dir"}).code == 1);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("presets subcommand") {
    const Outcome list = run({"presets"});
    CHECK(list.code == 0);
    CHECK(list.out.find("synthetic-scale") != std::string::npos);
    const Outcome show = run({"presets", "--show", "nmr-like"});
    CHECK(show.code == 0);
    CHECK(show.out.find("peak.4.1.center") != std::string::npos);
    CHECK(run({"presets", "--show", "nope"}).code == 1);
}
