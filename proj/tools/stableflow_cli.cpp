#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "stableflow/harness.hpp"

namespace {

void print_summary(const stableflow::harness::run_manifest& mf, const std::string& out_dir) {
    for (const auto& p : mf.phases) {
        if (p.status == "skipped") continue;
        std::printf("phase %-12s %s (%.2fs)%s%s\n", p.name.c_str(), p.status.c_str(), p.seconds,
                    p.error.empty() ? "" : ": ", p.error.c_str());
    }
    for (const auto& c : mf.checks)
        std::printf("check %-24s %s  %s\n", c.name.c_str(), c.pass ? "pass" : "FAIL",
                    c.detail.c_str());
    std::printf("%s: %s after %zu iterations, %zu artifacts in %s\n",
                mf.all_passed ? "ok" : "FAILED", mf.converged ? "converged" : "not converged",
                static_cast<std::size_t>(mf.iterations), mf.artifacts.size(), out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stableflow: stable-driven McKean-Vlasov simulation harness"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string manifest_path;
    stableflow::harness::run_overrides ov;
    std::uint64_t seed = 0;
    std::uint64_t particles = 0;
    std::string out;
    int threads = 0;
    bool no_plots = false;

    auto* run = app.add_subcommand("run", "execute a scenario and write its output directory");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    auto* opt_seed = run->add_option("--seed", seed, "override the scenario seed");
    auto* opt_particles = run->add_option("--particles", particles, "override the particle count");
    auto* opt_out = run->add_option("--out", out, "override the output directory");
    auto* opt_threads = run->add_option("--threads", threads, "worker threads for the solver");
    run->add_flag("--no-plots", no_plots, "skip SVG plot artifacts");

    auto* validate = app.add_subcommand("validate", "parse and validate a scenario file");
    validate->add_option("scenario", scenario_path, "scenario file")->required();

    auto* report = app.add_subcommand("report", "regenerate report files from a run manifest");
    report->add_option("manifest", manifest_path, "manifest.json of a finished run")->required();
    report->add_flag("--no-plots", no_plots, "skip SVG plot artifacts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (*opt_seed) ov.seed = seed;
            if (*opt_particles) ov.particles = particles;
            if (*opt_out) ov.out = out;
            if (*opt_threads) ov.threads = threads;
            ov.no_plots = no_plots;
            const auto mf = stableflow::harness::run_scenario(scenario_path, ov);
            const std::string fallback = "runs/" + mf.scenario.value("name", std::string("run"));
            print_summary(mf, mf.scenario.value("output", fallback));
            return mf.all_passed ? 0 : 1;
        }
        if (validate->parsed()) {
            const std::string name = stableflow::harness::validate_scenario(scenario_path);
            std::printf("scenario '%s' is valid\n", name.c_str());
            return 0;
        }
        const auto mf = stableflow::harness::report_from_manifest(manifest_path, !no_plots);
        std::printf("report emitted next to %s (%zu checks, %s)\n", manifest_path.c_str(),
                    mf.checks.size(), mf.all_passed ? "all green" : "failures recorded");
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
