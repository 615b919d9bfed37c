#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "stableflow/harness.hpp"

using namespace stableflow;
using harness::ojson;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "stableflow_harness_test";
    fs::create_directories(dir);
    return dir;
}

ojson minimal_doc() {
    ojson doc;
    doc["schema_version"] = 1;
    doc["name"] = "minimal";
    doc["dim"] = 1;
    doc["alpha"] = 1.5;
    doc["spectral"] = {{"kind", "isotropic"}};
    doc["coefficients"] = {{"family", "zero"}};
    doc["initial"] = {{"atoms", {{{"point", {1.0}}, {"weight", 1.0}}}}};
    doc["grid"] = {{"horizon", 0.5}, {"steps", 8}};
    doc["picard"] = {{"particles", 200}, {"max_iter", 1}, {"bootstrap", 2}};
    doc["seed"] = 21;
    doc["output"] = (work_dir() / "minimal_out").string();
    return doc;
}

fs::path write_doc(const ojson& doc, const std::string& name) {
    const fs::path p = work_dir() / name;
    io::save_text(p, doc.dump(2) + "\n");
    return p;
}

std::map<std::string, std::string> digest_map(const harness::run_manifest& mf) {
    std::map<std::string, std::string> out;
    for (const auto& a : mf.artifacts) out[a.path] = a.digest;
    return out;
}

}  // namespace

TEST_CASE("scenario validation names the offending field") {
    const ojson base = minimal_doc();

    SECTION("valid document parses") {
        const auto sc = harness::parse_scenario<1>(base);
        CHECK(sc.name == "minimal");
        CHECK(sc.picard.particles == 200);
        CHECK(sc.initial.size() == 1);
        CHECK(sc.seed == 21);
    }

    SECTION("alpha out of range") {
        ojson doc = base;
        doc["alpha"] = 2.5;
        CHECK_THROWS_WITH(harness::parse_scenario<1>(doc),
                          Catch::Matchers::ContainsSubstring("alpha"));
    }

    SECTION("unknown top-level key") {
        ojson doc = base;
        doc["particles"] = 100;
        CHECK_THROWS_WITH(harness::parse_scenario<1>(doc),
                          Catch::Matchers::ContainsSubstring("unknown key 'particles'"));
    }

    SECTION("unknown nested key") {
        ojson doc = base;
        doc["picard"]["tolerance"] = 0.1;
        CHECK_THROWS_WITH(harness::parse_scenario<1>(doc),
                          Catch::Matchers::ContainsSubstring("'tolerance'"));
    }

    SECTION("seed is mandatory") {
        ojson doc = base;
        doc.erase("seed");
        CHECK_THROWS_WITH(harness::parse_scenario<1>(doc),
                          Catch::Matchers::ContainsSubstring("seed"));
    }

    SECTION("horizon must be positive") {
        ojson doc = base;
        doc["grid"]["horizon"] = -1.0;
        CHECK_THROWS_WITH(harness::parse_scenario<1>(doc),
                          Catch::Matchers::ContainsSubstring("grid.horizon"));
    }

    SECTION("unsupported schema version") {
        ojson doc = base;
        doc["schema_version"] = 99;
        CHECK_THROWS_WITH(harness::parse_scenario<1>(doc),
                          Catch::Matchers::ContainsSubstring("schema_version"));
    }

    SECTION("unknown coefficient family lists the built-ins") {
        ojson doc = base;
        doc["coefficients"] = {{"family", "cubic"}};
        CHECK_THROWS_WITH(harness::parse_scenario<1>(doc),
                          Catch::Matchers::ContainsSubstring("mean_reversion"));
    }

    SECTION("unknown sampler") {
        ojson doc = base;
        doc["initial"] = {{"sampler", "cauchy"}};
        CHECK_THROWS_WITH(harness::parse_scenario<1>(doc),
                          Catch::Matchers::ContainsSubstring("sampler 'cauchy'"));
    }

    SECTION("dim must be 1 or 2") {
        ojson doc = base;
        doc["dim"] = 3;
        CHECK_THROWS_WITH(harness::scenario_dim(doc),
                          Catch::Matchers::ContainsSubstring("dim"));
    }

    SECTION("spectral atoms round through normalization") {
        ojson doc = base;
        doc["spectral"] = {{"kind", "atomic"},
                           {"atoms", {{{"direction", {2.0}}, {"weight", 0.5}},
                                      {{"direction", {-2.0}}, {"weight", 0.5}}}}};
        const auto sc = harness::parse_scenario<1>(doc);
        REQUIRE(sc.omega.atoms.size() == 2);
        CHECK(sc.omega.atoms[0].direction[0] == 1.0);
        CHECK(sc.omega.atoms[1].direction[0] == -1.0);
    }

    SECTION("named sampler draws a deterministic cloud") {
        ojson doc = base;
        doc["initial"] = {{"sampler", "normal"}, {"center", {0.5}}, {"scale", 2.0}, {"count", 64}};
        const auto a = harness::parse_scenario<1>(doc);
        const auto b = harness::parse_scenario<1>(doc);
        REQUIRE(a.initial.size() == 64);
        CHECK(a.initial.points == b.initial.points);
        doc["seed"] = 22;
        const auto c = harness::parse_scenario<1>(doc);
        CHECK(c.initial.points != a.initial.points);
    }

    SECTION("parse errors carry the line number") {
        const fs::path p = work_dir() / "broken.json";
        io::save_text(p, "{\n  \"schema_version\": 1,\n  \"name\": oops\n}\n");
        CHECK_THROWS_WITH(harness::load_scenario_doc(p),
                          Catch::Matchers::ContainsSubstring("line 3"));
    }
}

TEST_CASE("minimal scenario converges at iteration 1") {
    const fs::path path = write_doc(minimal_doc(), "minimal.json");
    const auto mf = harness::run_scenario(path);

    CHECK(mf.converged);
    CHECK(mf.iterations == 1);
    CHECK(mf.all_passed);
    CHECK(mf.version == io::code_version);

    const fs::path out = work_dir() / "minimal_out";
    REQUIRE(fs::exists(out / "manifest.json"));
    REQUIRE(fs::exists(out / "trace.csv"));
    REQUIRE(fs::exists(out / "terminal.points"));
    CHECK(fs::exists(out / "trace.svg"));
    CHECK_FALSE(fs::exists(fs::path(out.string() + ".partial")));

    SECTION("manifest lists every file with a matching digest") {
        const auto listed = digest_map(mf);
        std::size_t on_disk = 0;
        for (const auto& entry : fs::recursive_directory_iterator(out)) {
            if (!entry.is_regular_file()) continue;
            const std::string rel = fs::relative(entry.path(), out).generic_string();
            if (rel == "manifest.json") continue;
            ++on_disk;
            REQUIRE(listed.count(rel) == 1);
            CHECK(listed.at(rel) == io::digest_file(entry.path()));
        }
        CHECK(on_disk == mf.artifacts.size());
    }

    SECTION("the written manifest round-trips") {
        const auto doc = ojson::parse(io::load_text(out / "manifest.json"));
        const auto back = harness::run_manifest::from_json(doc);
        CHECK(back.converged == mf.converged);
        CHECK(back.iterations == mf.iterations);
        CHECK(back.seed == mf.seed);
        CHECK(back.artifacts.size() == mf.artifacts.size());
        CHECK(back.checks.size() == mf.checks.size());
    }

    SECTION("empty diagnostics still emit header-only tables") {
        const auto rates = io::csv_table::load(out / "rates.csv");
        CHECK(rates.header ==
              std::vector<std::string>{"name", "target", "fitted", "residual", "tolerance", "pass"});
        CHECK(rates.rows.empty());
        const auto metrics = io::csv_table::load(out / "metrics.csv");
        CHECK(metrics.rows.empty());
    }

    SECTION("terminal cloud has the run's particle count") {
        const auto cloud = io::read_points<1>(out / "terminal.points");
        CHECK(cloud.size() == 200);
    }
}

TEST_CASE("reruns and worker counts leave digests unchanged") {
    ojson doc = minimal_doc();
    doc["name"] = "repeat";
    doc["picard"]["max_iter"] = 2;
    doc["coefficients"] = {{"family", "mean_field"}, {"a", 0.5}};

    doc["output"] = (work_dir() / "repeat_a").string();
    const auto a = harness::run_scenario(write_doc(doc, "repeat_a.json"));
    doc["output"] = (work_dir() / "repeat_b").string();
    const auto b = harness::run_scenario(write_doc(doc, "repeat_b.json"));
    CHECK(digest_map(a) == digest_map(b));

    doc["output"] = (work_dir() / "repeat_c").string();
    doc["picard"]["workers"] = 3;
    const auto c = harness::run_scenario(write_doc(doc, "repeat_c.json"));
    CHECK(digest_map(a) == digest_map(c));

    SECTION("seed override changes the data, out override only the location") {
        harness::run_overrides ov;
        ov.seed = 99;
        ov.out = (work_dir() / "repeat_d").string();
        const auto d = harness::run_scenario(write_doc(doc, "repeat_d.json"), ov);
        CHECK(d.seed == 99);
        CHECK(d.scenario["seed"] == 99);
        CHECK(digest_map(d).at("trace.csv") != digest_map(a).at("trace.csv"));
    }
}

TEST_CASE("diagnostics phases run and land in the manifest") {
    ojson doc = minimal_doc();
    doc["name"] = "diagnosed";
    doc["coefficients"] = {{"family", "tanh_mean"}, {"a", 0.8}, {"kappa", 0.5}};
    doc["initial"] = {{"atoms", {{{"point", {-0.5}}, {"weight", 1.0}},
                                 {{"point", {0.5}}, {"weight", 1.0}}}}};
    doc["grid"] = {{"horizon", 1.0}, {"steps", 16}};
    doc["picard"] = {{"particles", 400}, {"max_iter", 3}, {"bootstrap", 2}};
    doc["diagnostics"] = {{"contraction", true}, {"density", true}, {"rates", true},
                          {"metrics", true}};
    doc["output"] = (work_dir() / "diagnosed_out").string();

    const auto mf = harness::run_scenario(write_doc(doc, "diagnosed.json"));
    const fs::path out = work_dir() / "diagnosed_out";

    for (const auto& p : mf.phases) {
        INFO(p.name << ": " << p.status << " " << p.error);
        CHECK(p.status == "ok");
    }

    SECTION("contraction ratio observed below one on the first horizon") {
        REQUIRE(mf.contraction.is_object());
        const auto rho = mf.contraction["rho"].get<std::vector<double>>();
        REQUIRE(rho.size() >= 2);
        CHECK(rho.front() < 1.0);
        const auto table = io::csv_table::load(out / "contraction.csv");
        CHECK(table.rows.size() == rho.size());
    }

    SECTION("density mass and export") {
        REQUIRE(mf.density.is_object());
        CHECK(std::abs(mf.density["mass"].get<double>() - 1.0) < 1e-6);
        REQUIRE(fs::exists(out / "density.points"));
    }

    SECTION("rate fits recorded and tabulated") {
        REQUIRE(mf.rates.size() == 4);
        for (const auto& r : mf.rates) {
            INFO(r.name << " fitted " << r.fitted << " target " << r.target);
            CHECK(r.pass);
            CHECK_FALSE(r.inconclusive);
        }
        const auto table = io::csv_table::load(out / "rates.csv");
        REQUIRE(table.rows.size() == 4);
        const auto moments = io::csv_table::load(out / "moments.csv");
        CHECK(moments.rows.size() >= 16);
    }

    SECTION("metric self-test rows all pass") {
        REQUIRE(mf.metrics.is_object());
        for (const auto& row : mf.metrics["rows"]) {
            INFO(row["name"].get<std::string>());
            CHECK(row["pass"].get<bool>());
        }
    }

    SECTION("all checks pass and the run is green") {
        for (const auto& c : mf.checks) {
            INFO(c.name << ": " << c.detail);
            CHECK(c.pass);
        }
        CHECK(mf.all_passed);
    }
}

TEST_CASE("a failing phase is recorded while independent phases still run") {
    ojson doc = minimal_doc();
    doc["name"] = "partial";
    doc["alpha"] = 0.6;
    doc["diagnostics"] = {{"density", true}, {"metrics", true}};
    doc["output"] = (work_dir() / "partial_out").string();

    const auto mf = harness::run_scenario(write_doc(doc, "partial.json"));

    std::map<std::string, std::string> status;
    for (const auto& p : mf.phases) status[p.name] = p.status;
    CHECK(status.at("picard") == "ok");
    CHECK(status.at("density") == "failed");
    CHECK(status.at("metrics") == "ok");
    CHECK(status.at("rates") == "skipped");
    CHECK_FALSE(mf.all_passed);

    bool found = false;
    for (const auto& c : mf.checks)
        if (c.name == "density_completed") {
            found = true;
            CHECK_FALSE(c.pass);
            CHECK(c.detail.find("extent") != std::string::npos);
        }
    CHECK(found);

    SECTION("the manifest still landed atomically") {
        CHECK(fs::exists(work_dir() / "partial_out" / "manifest.json"));
        CHECK_FALSE(fs::exists(work_dir() / "partial_out.partial"));
    }
}

TEST_CASE("report regenerates derived files from the manifest alone") {
    ojson doc = minimal_doc();
    doc["name"] = "reported";
    doc["picard"]["max_iter"] = 2;
    doc["coefficients"] = {{"family", "mean_reversion"}, {"a", 1.0}};
    doc["output"] = (work_dir() / "reported_out").string();

    const auto mf = harness::run_scenario(write_doc(doc, "reported.json"));
    const fs::path out = work_dir() / "reported_out";
    const std::string before = io::digest_file(out / "trace.csv");
    const std::string svg_before = io::digest_file(out / "trace.svg");

    fs::remove(out / "trace.csv");
    fs::remove(out / "trace.svg");
    const auto back = harness::report_from_manifest(out / "manifest.json", true);
    CHECK(back.converged == mf.converged);
    CHECK(io::digest_file(out / "trace.csv") == before);
    CHECK(io::digest_file(out / "trace.svg") == svg_before);

    SECTION("plots can be suppressed") {
        fs::remove(out / "trace.svg");
        harness::report_from_manifest(out / "manifest.json", false);
        CHECK_FALSE(fs::exists(out / "trace.svg"));
    }
}

TEST_CASE("no-plots override skips svg artifacts") {
    ojson doc = minimal_doc();
    doc["name"] = "plotless";
    doc["output"] = (work_dir() / "plotless_out").string();
    harness::run_overrides ov;
    ov.no_plots = true;
    const auto mf = harness::run_scenario(write_doc(doc, "plotless.json"), ov);
    CHECK_FALSE(fs::exists(work_dir() / "plotless_out" / "trace.svg"));
    for (const auto& a : mf.artifacts) CHECK(a.path.find(".svg") == std::string::npos);
    CHECK(mf.all_passed);
}
