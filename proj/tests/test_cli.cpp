#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bllab/run.hpp"

using namespace bllab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream o;
    o << f.rdbuf();
    return o.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::path("/tmp/bllab_cli_tests") / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

RunConfig small_cfg() {
    RunConfig cfg;
    cfg.nx = 16;
    cfg.ny = 33;
    cfg.ymax = 6.0;
    cfg.dt = 2e-3;
    cfg.t_end = 0.02;
    cfg.epsilon = 1e-3;
    cfg.amplitude = 1e-3;
    cfg.snapshot_every = 5;
    cfg.out_dir.clear(); // quiet by default
    return cfg;
}

} // namespace

TEST_CASE("config parsing: defaults, overrides, rejection of unknown keys") {
    RunConfig d = parse_config({});
    CHECK(d.nx == 64);
    CHECK(d.theta_e == 1.0);
    RunConfig c = parse_config({{"nx", "32"}, {"t_end", "0.5"}, {"linear_mode", "true"}});
    CHECK(c.nx == 32);
    CHECK(c.t_end == 0.5);
    CHECK(c.linear_mode);
    CHECK_THROWS_AS(parse_config({{"not_a_key", "1"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"nx", "banana"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"linear_mode", "maybe"}}), ConfigError);
}

TEST_CASE("config files support comments and reject duplicate keys") {
    fs::path dir = fresh_dir("cfgfile");
    fs::path good = dir / "good.cfg";
    std::ofstream(good) << "# a comment\n"
                        << "nx = 32\n"
                        << "t_end = 0.25   # trailing comment\n"
                        << "\n";
    RunConfig c = parse_config_file(good.string());
    CHECK(c.nx == 32);
    CHECK(c.t_end == 0.25);
    fs::path dup = dir / "dup.cfg";
    std::ofstream(dup) << "nx = 32\nnx = 64\n";
    CHECK_THROWS_AS(parse_config_file(dup.string()), ConfigError);
    CHECK_THROWS_AS(parse_config_file((dir / "missing.cfg").string()), ConfigError);
}

TEST_CASE("runs are deterministic: identical configs give identical checkpoints") {
    RunConfig cfg = small_cfg();
    cfg.out_dir = fresh_dir("det_a").string();
    run_simulation(cfg);
    RunConfig cfg2 = cfg;
    cfg2.out_dir = fresh_dir("det_b").string();
    run_simulation(cfg2);
    CHECK(slurp(fs::path(cfg.out_dir) / "checkpoint.json") ==
          slurp(fs::path(cfg2.out_dir) / "checkpoint.json"));
    // the output directory name must not leak into any artifact
    std::string manifest = slurp(fs::path(cfg.out_dir) / "manifest.json");
    CHECK(manifest.find("det_a") == std::string::npos);
}

TEST_CASE("resuming from a mid-run checkpoint reproduces the full run") {
    RunConfig full = small_cfg();
    full.out_dir = fresh_dir("resume_full").string();
    run_simulation(full);

    RunConfig half = small_cfg();
    half.t_end = 0.01; // first 5 steps
    half.out_dir = fresh_dir("resume_half").string();
    run_simulation(half);

    RunConfig rest = small_cfg();
    rest.out_dir = fresh_dir("resume_rest").string();
    rest.resume_from = (fs::path(half.out_dir) / "checkpoint.json").string();
    run_simulation(rest);

    CHECK(slurp(fs::path(rest.out_dir) / "checkpoint.json") ==
          slurp(fs::path(full.out_dir) / "checkpoint.json"));
    CHECK(slurp(fs::path(rest.out_dir) / "norms.csv") ==
          slurp(fs::path(full.out_dir) / "norms.csv"));
    CHECK(slurp(fs::path(rest.out_dir) / "mu.csv") == slurp(fs::path(full.out_dir) / "mu.csv"));
}

TEST_CASE("resume refuses a grid mismatch and a run already past T*") {
    RunConfig base = small_cfg();
    base.out_dir = fresh_dir("refuse_base").string();
    run_simulation(base);
    std::string ckpt = (fs::path(base.out_dir) / "checkpoint.json").string();

    RunConfig other = base;
    other.ny = 65;
    other.out_dir.clear();
    other.resume_from = ckpt;
    CHECK_THROWS_AS(run_simulation(other), ConfigError);

    // zero-data run hits T* = delta/gamma = 0.05; resuming it must refuse
    RunConfig z = small_cfg();
    z.amplitude = 0;
    z.epsilon = 0;
    z.dt = 2.5e-3;
    z.t_end = 0.1;
    z.out_dir = fresh_dir("refuse_tstar").string();
    RunResult rz = run_simulation(z);
    CHECK(rz.termination == "t_star");
    RunConfig again = z;
    again.out_dir.clear();
    again.resume_from = (fs::path(z.out_dir) / "checkpoint.json").string();
    CHECK_THROWS_AS(run_simulation(again), PastTStarError);
}

TEST_CASE("run products: manifest, csv layouts, slack report") {
    RunConfig cfg = small_cfg();
    cfg.out_dir = fresh_dir("products").string();
    RunResult r = run_simulation(cfg);
    fs::path d(cfg.out_dir);
    for (const char* f : {"manifest.json", "norms.csv", "mu.csv", "decomp.csv", "slack.json",
                          "checkpoint.json"})
        CHECK(fs::exists(d / f));

    auto manifest = nlohmann::json::parse(slurp(d / "manifest.json"));
    CHECK(manifest["termination"] == "t_end");
    CHECK(manifest["steps"].get<long>() == 10);
    CHECK(manifest["config"]["nx"].get<int>() == 16);
    CHECK(manifest.contains("bootstrap"));

    std::istringstream norms(slurp(d / "norms.csv"));
    std::string header;
    std::getline(norms, header);
    CHECK(header == "t,field,s,k,weighted,value");

    std::istringstream mu(slurp(d / "mu.csv"));
    std::getline(mu, header);
    CHECK(header == "t,mu,mu_dot,g1,g2,g3,g4,g5");

    auto slack = nlohmann::json::parse(slurp(d / "slack.json"));
    for (const char* tag : kInequalities) CHECK(slack.contains(tag));
}

TEST_CASE("zero-data run terminates exactly at the radius cap") {
    RunConfig z = small_cfg();
    z.amplitude = 0;
    z.epsilon = 0;
    z.dt = 2.5e-3;
    z.t_end = 0.1; // cap delta/gamma = 0.05 comes first
    RunResult r = run_simulation(z);
    CHECK(r.termination == "t_star");
    REQUIRE(r.mu.t_star);
    CHECK(*r.mu.t_star == doctest::Approx(0.05).epsilon(1e-13));
}

TEST_CASE("calibration bounds the fitted constant and refreshes gamma") {
    RunConfig cfg = small_cfg();
    cfg.t_end = 0.01;
    RunConfig cal = calibrate(cfg);
    CHECK(cal.c_cal >= 1.0);
    CHECK(cal.gamma >= 1.0); // 10 x max(cmax, 0.1)
    CHECK(cal.k_coupling == 0.0);
    // the calibrated config must itself run to completion
    RunResult r = run_simulation(cal);
    CHECK(r.termination == "t_end");
}
