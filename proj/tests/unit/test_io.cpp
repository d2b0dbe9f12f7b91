#include "kinlim/config_io.hpp"
#include "kinlim/experiments.hpp"
#include "kinlim/parallel.hpp"
#include "kinlim/plot.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <numeric>
#include <stdexcept>

using namespace kinlim;
using nlohmann::json;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, PresetsRoundTrip) {
    for (const auto& name : preset_names()) {
        const RunSetup a = preset_config(name);
        const std::string text = config_to_json(a);
        const RunSetup b = parse_config(text);
        EXPECT_EQ(config_to_json(b), text) << name;
        EXPECT_EQ(a.config.dim(), b.config.dim());
        EXPECT_DOUBLE_EQ(a.config.radius, b.config.radius);
        EXPECT_EQ(a.scattering, b.scattering);
    }
    EXPECT_THROW(preset_config("nope"), ValidationError);
}

TEST(Config, ParsesAHandWrittenFile) {
    const auto s = parse_config(R"({"name": "jz2", "source": {"kind": "lattice", "integer": 2}, "radius": 0.02,
                                    "jitter": {"amplitude": 0.3, "seed": 5}})");
    EXPECT_EQ(s.name, "jz2");
    EXPECT_EQ(s.config.dim(), 2);
    EXPECT_DOUBLE_EQ(s.config.radius, 0.02);
    ASSERT_TRUE(s.config.jitter.has_value());
    EXPECT_DOUBLE_EQ(s.config.jitter->amplitude, 0.3);
    EXPECT_EQ(s.scattering, "specular");
}

TEST(Config, ErrorsNameThePath) {
    EXPECT_NE(error_of(R"({"source": {"kind": "lattice", "integer": 2}, "radius": 0.1, "colour": 1})").find("$.colour"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"source": {"kind": "lattice", "integer": 2}, "radius": "big"})").find("$.radius"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"source": {"kind": "poisson", "dim": "two"}})").find("$.source.dim"), std::string::npos);
    EXPECT_NE(error_of(R"({"radius": 0.1})").find("$.source"), std::string::npos);
    EXPECT_NE(error_of(R"({"source": {"kind": "torus"}})").find("$.source"), std::string::npos);
    EXPECT_FALSE(error_of("{not json").empty());
}

TEST(Config, ScatteringSpecs) {
    EXPECT_TRUE(std::holds_alternative<LorentzScatteringMap>(parse_scattering("specular", 3)));
    const auto k = parse_scattering("kick-linear:2.5", 2);
    ASSERT_TRUE(std::holds_alternative<KickPotential>(k));
    EXPECT_DOUBLE_EQ(std::get<KickPotential>(k).kappa, 2.5);
    EXPECT_THROW(parse_scattering("banana", 2), ValidationError);
    EXPECT_THROW(parse_scattering("kick-linear:x", 2), ValidationError);
}

TEST(Io, FormatDoubleRoundTrips) {
    for (double x : {0.1, 1.0 / 3.0, 6.0 / (3.141592653589793 * 3.141592653589793), 1e-300, -2.5e17, 0.0})
        EXPECT_EQ(std::stod(format_double(x)), x) << format_double(x);
    EXPECT_EQ(format_double(0.5), "0.5");
    EXPECT_EQ(format_double(3.0), "3");
}

TEST(Io, Fnv1aVectors) {
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
    const auto path = (std::filesystem::temp_directory_path() / "kinlim_fnv_test.txt").string();
    write_text(path, "a");
    EXPECT_EQ(fnv1a_file(path), "af63dc4c8601ec8c");
    EXPECT_EQ(read_text(path), "a");
    std::filesystem::remove(path);
}

TEST(Io, CsvHasHeaderAndFullPrecision) {
    const auto path = (std::filesystem::temp_directory_path() / "kinlim_csv_test.csv").string();
    write_csv(path, {"x", "y"}, {{0.1, 1.0 / 3.0}});
    const std::string text = read_text(path);
    ASSERT_EQ(text.rfind("x,y\n", 0), 0u);
    const auto comma = text.find(',', 4);
    EXPECT_EQ(std::stod(text.substr(4, comma - 4)), 0.1);
    EXPECT_EQ(std::stod(text.substr(comma + 1)), 1.0 / 3.0);
    std::filesystem::remove(path);
}

TEST(Parallel, ForCoversEveryIndexOnce) {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, 4, [&](long i) { ++hits[i]; });
    EXPECT_EQ(std::accumulate(hits.begin(), hits.end(), 0), 1000);
    EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}

TEST(Parallel, ExceptionsPropagate) {
    EXPECT_THROW(parallel_for(100, 3, [](long i) { if (i == 57) throw std::runtime_error("boom"); }), std::runtime_error);
}

TEST(Parallel, ChunkedReduceIgnoresThreadCount) {
    // floating-point sums depend on association order, so equality here means the order is fixed
    auto run = [](int threads) {
        return chunked_reduce<double>(10000, 37, threads, [] { return 0.0; },
                                      [](double& acc, long i) { acc += 1.0 / (1.0 + i * 0.37); },
                                      [](double& a, double b) { a += b; });
    };
    const double one = run(1);
    EXPECT_EQ(run(2), one);
    EXPECT_EQ(run(5), one);
}

TEST(Plot, SvgAndGnuplot) {
    Figure f{"fig", "A title", "x", "y", false, true, {{"data", {1, 2, 3}, {1.0, 0.0, 4.0}, false}}};
    const std::string svg = render_svg(f);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_NE(svg.find("A title"), std::string::npos);
    const std::string gp = render_gnuplot(f);
    EXPECT_NE(gp.find("set logscale y"), std::string::npos);
    EXPECT_EQ(gp.find("set logscale x"), std::string::npos);
    EXPECT_NE(gp.find("3 4"), std::string::npos);
}

TEST(Experiments, Registry) {
    const auto names = experiment_names();
    EXPECT_EQ(names.size(), 10u);
    for (const auto& n : names) EXPECT_FALSE(experiment_summary(n).empty());
    EXPECT_THROW(run_experiment("no-such-thing"), ValidationError);
    EXPECT_THROW(experiment_summary("no-such-thing"), ValidationError);
}

TEST(Experiments, KernelBoundReport) {
    const auto res = run_experiment("kernel-bound");
    EXPECT_TRUE(res.passed());
    const json j = json::parse(report_json(res));
    EXPECT_EQ(j.at("experiment"), "kernel-bound");
    EXPECT_EQ(j.at("pass"), true);
    ASSERT_FALSE(j.at("metrics").empty());
    for (const auto& m : j.at("metrics")) {
        EXPECT_TRUE(m.contains("metric"));
        EXPECT_TRUE(m.at("value").is_number());
        EXPECT_TRUE(m.at("pass").is_boolean());
    }
    EXPECT_THROW(res.metric("missing"), ValidationError);
}
