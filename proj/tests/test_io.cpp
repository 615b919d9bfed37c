#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "stableflow/io.hpp"

using namespace stableflow;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "stableflow_io_test";
    fs::create_directories(dir);
    return dir / name;
}

template <std::size_t D>
meas::empirical_measure<D> random_cloud(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g(0.0, 3.0);
    std::vector<vec<D>> pts(n);
    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < D; ++k) pts[i][k] = g(gen);
        w[i] = 0.1 + std::abs(g(gen));
        total += w[i];
    }
    for (auto& x : w) x /= total;
    return meas::empirical_measure<D>::from_points(std::move(pts), std::move(w));
}

}  // namespace

TEST_CASE("columnar points round-trip bit-exactly") {
    const auto mu1 = random_cloud<1>(57, 11);
    std::ostringstream out1;
    io::write_points(out1, mu1);
    std::istringstream in1(out1.str());
    const auto back1 = io::read_points<1>(in1);
    REQUIRE(back1.size() == mu1.size());
    for (std::size_t i = 0; i < mu1.size(); ++i) {
        CHECK(back1.points[i][0] == mu1.points[i][0]);
        CHECK(back1.weights[i] == mu1.weights[i]);
    }

    const auto mu2 = random_cloud<2>(33, 12);
    const fs::path p = temp_file("cloud.points");
    io::write_points(p, mu2);
    const auto back2 = io::read_points<2>(p);
    REQUIRE(back2.size() == mu2.size());
    for (std::size_t i = 0; i < mu2.size(); ++i) {
        CHECK(back2.points[i][0] == mu2.points[i][0]);
        CHECK(back2.points[i][1] == mu2.points[i][1]);
        CHECK(back2.weights[i] == mu2.weights[i]);
    }

    SECTION("rewriting the parsed cloud reproduces the file byte for byte") {
        std::ostringstream again;
        io::write_points(again, back1);
        CHECK(again.str() == out1.str());
    }
}

TEST_CASE("point parser reports the offending line") {
    std::istringstream missing("0.5 1.0\n0.25\n");
    CHECK_THROWS_WITH(io::read_points<1>(missing),
                      Catch::Matchers::ContainsSubstring("line 2"));
    std::istringstream trailing("0.5 1.0 7\n");
    CHECK_THROWS_WITH(io::read_points<1>(trailing),
                      Catch::Matchers::ContainsSubstring("trailing"));
    std::istringstream garbage("x 1.0\n");
    CHECK_THROWS_WITH(io::read_points<1>(garbage),
                      Catch::Matchers::ContainsSubstring("line 1"));
}

TEST_CASE("density grid exports coordinates and values") {
    noise::stable_params<1> par;
    par.alpha = 1.4;
    const auto omega = noise::spectral_measure<1>::uniform();
    const auto sched = density::sigma_schedule<1>::constant(identity<1>(), 0.0, 0.5);
    density::grid_config gc;
    gc.points = 64;
    const auto grid = density::density_fft(par, omega, sched, 0.0, 0.5, gc);

    std::ostringstream out;
    io::write_grid(out, grid);
    std::istringstream in(out.str());
    std::string line;
    std::size_t rows = 0;
    double mass = 0.0;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        double x = 0.0, v = 0.0;
        REQUIRE(static_cast<bool>(row >> x >> v));
        CHECK(x == grid.node(rows)[0]);
        CHECK(v == grid.values[rows]);
        mass += v;
        ++rows;
    }
    REQUIRE(rows == grid.values.size());
    CHECK(std::abs(mass * grid.cell() - 1.0) < 1e-6);
}

TEST_CASE("csv tables preserve full precision and survive quoting") {
    io::csv_table t;
    t.header = {"name", "value", "count", "pass"};
    t.add("plain", 1.0 / 3.0, std::size_t{42}, true);
    t.add("tiny", 2.2250738585072014e-308, std::size_t{0}, false);
    t.add("with, comma", -1.2345678901234567e+100, std::size_t{7}, true);
    t.add("with \"quote\"", 0.1, std::size_t{1}, false);

    std::ostringstream out;
    t.write(out);
    const std::string text = out.str();
    CHECK(text.find("\r") == std::string::npos);

    std::istringstream in(text);
    const auto back = io::csv_table::load(in);
    REQUIRE(back.header == t.header);
    REQUIRE(back.rows == t.rows);

    SECTION("numeric cells parse back to the same double") {
        CHECK(std::stod(back.rows[0][1]) == 1.0 / 3.0);
        CHECK(std::stod(back.rows[1][1]) == 2.2250738585072014e-308);
        CHECK(std::stod(back.rows[2][1]) == -1.2345678901234567e+100);
    }

    SECTION("writing the parsed table is byte-identical") {
        std::ostringstream again;
        back.write(again);
        CHECK(again.str() == text);
    }

    SECTION("ragged rows are rejected") {
        std::istringstream bad("a,b\n1,2,3\n");
        CHECK_THROWS_WITH(io::csv_table::load(bad),
                          Catch::Matchers::ContainsSubstring("ragged"));
    }

    SECTION("row width is enforced at build time") {
        io::csv_table narrow;
        narrow.header = {"only"};
        CHECK_THROWS_AS(narrow.add("a", "b"), std::invalid_argument);
    }
}

TEST_CASE("fnv-1a digest matches published vectors") {
    CHECK(io::digest_string("") == "cbf29ce484222325");
    CHECK(io::digest_string("a") == "af63dc4c8601ec8c");
    CHECK(io::digest_string("foobar") == "85944171f73967e8");

    const fs::path p = temp_file("digest.txt");
    io::save_text(p, "foobar");
    CHECK(io::digest_file(p) == "85944171f73967e8");
    CHECK(io::load_text(p) == "foobar");
}

TEST_CASE("noise tape binary round-trip") {
    model::noise_tape<2> tape;
    tape.resize(5, 9);
    std::mt19937_64 gen(99);
    std::normal_distribution<double> g;
    for (auto& z : tape.increments) {
        z[0] = g(gen);
        z[1] = g(gen) * 1e-12;
    }

    std::ostringstream out(std::ios::binary);
    io::write_tape(out, tape);
    const std::string bytes = out.str();
    CHECK(bytes.size() == 4 + 4 * 4 + tape.increments.size() * (4 + 4 + 2 * 8));

    std::istringstream in(bytes, std::ios::binary);
    const auto back = io::read_tape<2>(in);
    REQUIRE(back.particles == tape.particles);
    REQUIRE(back.steps == tape.steps);
    for (std::size_t i = 0; i < tape.increments.size(); ++i) {
        CHECK(back.increments[i][0] == tape.increments[i][0]);
        CHECK(back.increments[i][1] == tape.increments[i][1]);
    }

    SECTION("file round-trip") {
        const fs::path p = temp_file("tape.bin");
        io::write_tape(p, tape);
        const auto loaded = io::read_tape<2>(p);
        CHECK(loaded.increments == tape.increments);
    }

    SECTION("bad magic is rejected") {
        std::string corrupt = bytes;
        corrupt[0] = 'X';
        std::istringstream s(corrupt, std::ios::binary);
        CHECK_THROWS_WITH(io::read_tape<2>(s), Catch::Matchers::ContainsSubstring("magic"));
    }

    SECTION("unsupported version is rejected") {
        std::string corrupt = bytes;
        corrupt[4] = 2;
        std::istringstream s(corrupt, std::ios::binary);
        CHECK_THROWS_WITH(io::read_tape<2>(s), Catch::Matchers::ContainsSubstring("version"));
    }

    SECTION("dimension mismatch is rejected") {
        std::istringstream s(bytes, std::ios::binary);
        CHECK_THROWS_WITH(io::read_tape<1>(s), Catch::Matchers::ContainsSubstring("dimension"));
    }

    SECTION("truncation is rejected") {
        std::string corrupt = bytes.substr(0, bytes.size() - 8);
        std::istringstream s(corrupt, std::ios::binary);
        CHECK_THROWS_WITH(io::read_tape<2>(s), Catch::Matchers::ContainsSubstring("truncated"));
    }

    SECTION("trailing bytes are rejected") {
        std::string corrupt = bytes + "!";
        std::istringstream s(corrupt, std::ios::binary);
        CHECK_THROWS_WITH(io::read_tape<2>(s), Catch::Matchers::ContainsSubstring("trailing"));
    }

    SECTION("duplicate records are rejected") {
        std::string corrupt = bytes;
        const std::size_t header = 4 + 4 * 4;
        const std::size_t rec = 4 + 4 + 2 * 8;
        for (std::size_t k = 0; k < rec; ++k)
            corrupt[header + rec + k] = corrupt[header + k];
        std::istringstream s(corrupt, std::ios::binary);
        CHECK_THROWS_WITH(io::read_tape<2>(s), Catch::Matchers::ContainsSubstring("duplicate"));
    }
}
