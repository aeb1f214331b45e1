// CSV primitives, deterministic float rendering, trajectory export, and
// SVGP state JSON serialization.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gvf/dynamics.hpp"
#include "gvf/io.hpp"

using namespace gvf;

namespace {
std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("format_double round trips exactly") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 2.5e307, -0.0, 123456789.123456789}) {
        CHECK(std::stod(io::format_double(v)) == v);
    }
}

TEST_CASE("csv writer/reader round trip") {
    auto path = tmp_path("gvf_io.csv");
    {
        io::CsvWriter csv(path);
        csv.header({"a", "b"});
        csv.row({1.5, -2.25});
        csv.row({1.0 / 3.0, 1e-12});
    }
    auto table = io::read_csv(path);
    CHECK(table.header == std::vector<std::string>{"a", "b"});
    REQUIRE(table.rows.size() == 2);
    CHECK(io::parse_double(table.rows[1][0], 2) == 1.0 / 3.0);
    CHECK_THROWS_AS(io::parse_double("4x", 7), FormatError);
    CHECK_THROWS_AS(io::read_csv(tmp_path("does_not_exist.csv")), IoError);

    {
        std::ofstream out(path);
        out << "a,b\n1.0\n";  // short row
    }
    try {
        io::read_csv(path);
        CHECK(false);
    } catch (const FormatError& e) {
        CHECK(e.row == 1);
    }
}

TEST_CASE("trajectory csv export") {
    Trajectory t;
    t.times = {0.0, 0.01, 0.02};
    t.q = {1.0, 1.1, 1.2};
    t.p = {0.5, 0.4, 0.3};
    auto path = tmp_path("gvf_traj.csv");
    write_trajectory_csv(path, t);
    auto table = io::read_csv(path);
    CHECK(table.header == std::vector<std::string>{"t", "q", "p"});
    CHECK(table.rows.size() == 3);

    std::vector<Eigen::Vector2d> derivs(3, Eigen::Vector2d(0.1, -0.2));
    write_trajectory_csv(path, t, &derivs);
    table = io::read_csv(path);
    CHECK(table.header == std::vector<std::string>{"t", "q", "p", "dq", "dp"});
    std::vector<Eigen::Vector2d> wrong(2);
    CHECK_THROWS_AS(write_trajectory_csv(path, t, &wrong), ShapeError);
}

TEST_CASE("svgp state json round trip") {
    SVGPState state;
    state.manifold_name = "sphere";
    state.seed = 42;
    state.noise_variance = 2.89;
    state.variance = 11.5;
    state.lengthscales = {0.4};
    state.nus = {1.5};
    Vec z1(2), z2(2);
    z1 << 0.3, 1.2;
    z2 << 2.0, 4.0;
    state.inducing = {z1, z2};
    state.mu = Vec(4);
    state.mu << 0.5, -1.0, 0.25, 2.0;
    Mat f1(2, 2), f2(2, 2);
    f1 << 1.7, 0.0, -0.3, 0.9;
    f2 << 0.5, 0.0, 0.1, 1.1;
    state.sigma_factors = {f1, f2};

    auto path = tmp_path("gvf_state.json");
    save_svgp_state(path, state);
    SVGPState back = load_svgp_state(path);
    CHECK(back.manifold_name == state.manifold_name);
    CHECK(back.seed == state.seed);
    CHECK(back.noise_variance == state.noise_variance);
    CHECK(back.variance == state.variance);
    CHECK(back.lengthscales == state.lengthscales);
    CHECK(back.nus == state.nus);
    CHECK(back.mu == state.mu);
    for (int j = 0; j < 2; ++j) {
        CHECK(back.inducing[j] == state.inducing[j]);
        CHECK(back.sigma_factors[j] == state.sigma_factors[j]);
    }

    // the squared-exponential marker survives the trip
    state.nus = {std::numeric_limits<double>::infinity()};
    save_svgp_state(path, state);
    CHECK(std::isinf(load_svgp_state(path).nus[0]));

    CHECK_THROWS_AS(svgp_state_from_json("{not json"), FormatError);
    CHECK_THROWS_AS(load_svgp_state(tmp_path("missing_state.json")), IoError);
}
