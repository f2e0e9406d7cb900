// command-line front end: run simulations, verify the numerics, resume
// checkpoints and inspect output artifacts
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bllab/run.hpp"
#include "bllab/verify.hpp"

namespace {

int do_run(const std::string& config_path, const std::string& out_override,
           const std::string& resume_path, bool calibrate_first) {
    bllab::RunConfig cfg = bllab::parse_config_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (!resume_path.empty()) cfg.resume_from = resume_path;
    if (calibrate_first) cfg = bllab::calibrate(cfg);
    bllab::RunResult r = bllab::run_simulation(cfg);
    std::printf("termination: %s\n", r.termination.c_str());
    std::printf("steps: %ld  t_final: %.17g  mu_final: %.17g\n", r.steps, r.state.t, r.mu.mu);
    if (r.mu.t_star) std::printf("t_star: %.17g\n", *r.mu.t_star);
    std::printf("radius_fit_u: %.17g\n", r.radius_fit_u);
    if (!cfg.out_dir.empty()) std::printf("outputs: %s\n", cfg.out_dir.c_str());
    return (r.termination == "nan" || r.termination == "positivity") ? 1 : 0;
}

int do_verify(const std::string& suite) {
    auto checks = bllab::verify_suite(suite);
    int failed = 0;
    for (const auto& c : checks) {
        std::printf("[%s] %s (%s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.c_str());
        if (!c.pass) ++failed;
    }
    std::printf("%zu checks, %d failed\n", checks.size(), failed);
    return failed ? 1 : 0;
}

int do_inspect(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::fprintf(stderr, "error: cannot open %s\n", path.c_str());
        return 2;
    }
    std::string first;
    std::getline(in, first);
    nlohmann::json j;
    if (first.find("\"nx\"") != std::string::npos && first.front() == '{') {
        // snapshot: one-line header followed by binary payload
        j = nlohmann::json::parse(first);
        std::printf("snapshot %s\n%s\n", path.c_str(), j.dump(1).c_str());
        return 0;
    }
    in.seekg(0);
    j = nlohmann::json::parse(in);
    if (j.contains("series")) {
        std::printf("checkpoint %s\n", path.c_str());
        std::printf(" step: %ld  t: %.17g  mu: %.17g  dt: %.17g\n", (long)j["step"],
                    (double)j["t"], (double)j["mu"]["mu"], (double)j["dt"]);
        std::printf(" tracked series: %zu\n", j["series"].size());
        if (j["mu"].contains("t_star")) std::printf(" t_star: %.17g\n", (double)j["mu"]["t_star"]);
    } else {
        std::printf("%s\n", j.dump(1).c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for a wall-bounded thermal boundary-layer model"};
    app.require_subcommand(1);

    std::string config_path, out_override, resume_path, suite = "all", inspect_path;
    bool calibrate_first = false;

    auto* run = app.add_subcommand("run", "integrate the system from a config file");
    run->add_option("--config", config_path, "flat key=value config file")->required();
    run->add_option("--out", out_override, "override the output directory");
    run->add_flag("--calibrate", calibrate_first,
                  "do a calibration pass first and rerun with the fitted constants");

    auto* resume = app.add_subcommand("resume", "continue a run from a checkpoint");
    resume->add_option("--config", config_path, "config file of the original run")->required();
    resume->add_option("--from", resume_path, "checkpoint.json written by the run")->required();
    resume->add_option("--out", out_override, "override the output directory");

    auto* verify = app.add_subcommand("verify", "run the built-in numerical checks");
    verify->add_option("suite", suite, "dyadic|spaces|solver|aux|monitor|all");

    auto* inspect = app.add_subcommand("inspect", "describe a snapshot/checkpoint/manifest");
    inspect->add_option("path", inspect_path, "file to describe")->required();

    try {
        app.parse(argc, argv);
        if (run->parsed()) return do_run(config_path, out_override, "", calibrate_first);
        if (resume->parsed()) return do_run(config_path, out_override, resume_path, false);
        if (verify->parsed()) return do_verify(suite);
        if (inspect->parsed()) return do_inspect(inspect_path);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const bllab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
