#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "bllab/monitor.hpp"
#include "bllab/verify.hpp"

using namespace bllab;

TEST_CASE("radius ODE right side is exactly 1 on zero fields") {
    Grid g(16, 2 * M_PI, 33, 6.0);
    Field z(g);
    MuRhs r = mu_rhs(z, z, 0.3, 1.0);
    CHECK(r.total == 1.0);
    for (double gr : r.group) CHECK(gr == 0.0);
}

TEST_CASE("radius ODE groups scale with the expected powers") {
    // group 1 is linear in the field size, group 2 quadratic, group 3 quartic
    Grid g(32, 2 * M_PI, 65, 8.0);
    std::mt19937 rng(1);
    Field u = detail::random_smooth(g, rng);
    Field th = detail::random_smooth(g, rng);
    MuRhs a = mu_rhs(u, th, 0.0, 1.0);
    MuRhs b = mu_rhs(2.0 * u, 2.0 * th, 0.0, 1.0);
    CHECK(b.group[0] == doctest::Approx(2.0 * a.group[0]).epsilon(1e-12));
    CHECK(b.group[1] == doctest::Approx(4.0 * a.group[1]).epsilon(1e-12));
    CHECK(b.group[2] == doctest::Approx(16.0 * a.group[2]).epsilon(1e-12));
    CHECK(b.group[3] == doctest::Approx(4.0 * a.group[3]).epsilon(1e-12));
    CHECK(b.group[4] == doctest::Approx(4.0 * a.group[4]).epsilon(1e-12));
    CHECK(a.total == doctest::Approx(1 + a.group[0] + a.group[1] + a.group[2] + a.group[3] +
                                     a.group[4]).epsilon(1e-14));
}

TEST_CASE("explicit Euler radius update and T* crossing") {
    PhaseState ph{0.1, 2.0, 0.0}; // cap = 0.05
    MuState ms;
    advance_mu(ms, 1.0, 0.01, ph);
    CHECK(ms.mu == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(ms.t == doctest::Approx(0.01).epsilon(1e-15));
    advance_mu(ms, 2.0, 0.01, ph); // mu = 0.03
    CHECK(ms.mu == doctest::Approx(0.03).epsilon(1e-15));
    CHECK(!ms.t_star);
    // crossing: from 0.03 with rhs 4, dt 0.01 -> would reach 0.07; crossing at
    // t + (0.05 - 0.03)/4 = 0.02 + 0.005
    advance_mu(ms, 4.0, 0.01, ph);
    REQUIRE(ms.t_star);
    CHECK(*ms.t_star == doctest::Approx(0.025).epsilon(1e-14));
    CHECK(ms.mu == doctest::Approx(0.05).epsilon(1e-15)); // clamped at the cap

    CHECK_THROWS_AS(advance_mu(ms, 1.0, -0.01, ph), DomainError);
    CHECK_THROWS_AS(advance_mu(ms, 0.5, 0.01, ph), DomainError); // rhs below 1
}

TEST_CASE("ledger uses the left-endpoint rule and running sup") {
    EnergyLedger led;
    // v(t) = t on t = 0, 1, 2, 3 with mudot = 2
    for (int i = 0; i < 4; ++i) led.add("f", i, i, 2.0);
    // l2 at t=3: 0^2*1 + 1^2*1 + 2^2*1 = 5; excludes the interval starting at 3
    CHECK(led.at("f", 3).l2 == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(led.at("f", 3).l2mu == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(led.at("f", 3).linf == 3.0);
    CHECK(led.at("f", 0).l2 == 0.0);
    CHECK_THROWS_AS(led.get("missing"), MissingSeriesError);
    CHECK_THROWS_AS(led.at("f", 10), MissingSeriesError);
    CHECK_THROWS_AS(led.add("f", 1.0, 0.0, 1.0), DomainError); // time went backwards
}

TEST_CASE("series and derivative naming") {
    CHECK(series_name("u", 2.6) == "u@s=2.6000,k=0");
    CHECK(series_name("dyu", 1.25, 1) == "dyu@s=1.2500,k=1");
    CHECK(init_key("u0", 3.1) == "u0@s=3.1000");
    CHECK(dy_field_name("u") == "dyu");
    CHECK(dy_field_name("dyu") == "dy2u");
    CHECK(dy_field_name("varphi") == "dyvarphi");
    CHECK_THROWS_AS(dy_field_name("nope"), MissingSeriesError);
}

TEST_CASE("energy functional reproduces its closed form") {
    EnergyLedger led;
    double s = 2.0, gamma = 3.0, thE = 0.8;
    // two samples at t = 0, 1 with constant values
    for (double t : {0.0, 1.0}) {
        led.add(series_name("u", s), t, 2.0, 1.5);
        led.add(series_name("u", s + 0.25), t, 1.0, 1.5);
        led.add(series_name("dyu", s), t, 3.0, 1.5);
    }
    // linf^2 + gamma * l2mu + thE/16 * l2 = 4 + 3*(1.5*1*1) + 0.05*9
    double want = 4.0 + gamma * 1.5 + thE / 16.0 * 9.0;
    CHECK(energy_functional(led, "u", s, gamma, thE) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("bootstrap check flags a constructed violation") {
    EstimateParams p;
    p.s = 2.0;
    p.M = 1.0;
    p.zeta = 0.1;
    EnergyLedger ok;
    ok.add(series_name("dyu", 2.0), 0.0, 0.3, 1.0);
    ok.add(series_name("dytheta", 2.0), 0.0, 0.05, 1.0);
    BootstrapReport r1 = bootstrap_check(ok, p);
    CHECK(r1.m_bound_held);
    CHECK(r1.zeta_bound_held);
    CHECK(r1.m_improved_held);  // 0.3 <= sqrt(6)/4
    CHECK(r1.zeta_improved_held);
    EnergyLedger bad;
    bad.add(series_name("dyu", 2.0), 0.0, 0.3, 1.0);
    bad.add(series_name("dytheta", 2.0), 0.0, 0.2, 1.0); // above zeta
    bad.add(series_name("dyu", 2.0), 1.0, 0.3, 1.0);
    bad.add(series_name("dytheta", 2.0), 1.0, 0.05, 1.0);
    BootstrapReport r2 = bootstrap_check(bad, p);
    CHECK(!r2.zeta_bound_held);
    CHECK(r2.first_violation == 0);
    CHECK(r2.max_dytheta == doctest::Approx(0.2));
}

TEST_CASE("inequality slack is trivial on an all-zero ledger") {
    // build a ledger with every tracked series identically zero
    EstimateParams p;
    p.s = 2.6;
    EnergyLedger led;
    for (double t : {0.0, 0.01}) {
        for (auto& [f, sv, k] : tracked_norms(p.s)) led.add(series_name(f, sv, k), t, 0.0, 1.0);
        led.add("positivity_margin", t, 1.0, 1.0);
    }
    for (auto& key : {"u0", "th0", "dyu0", "dyth0", "dxu0", "dxth0", "dy2u0", "dy2th0"})
        for (double sv : {p.s - 1, p.s, p.s + 0.5, p.s + 1, p.s + 1.5})
            led.init_norms[init_key(key, sv)] = 0.0;
    for (const char* tag : kInequalities) {
        SlackPoint sp = proposition_slack_at(led, tag, p, 1);
        CHECK(sp.pass);
        CHECK(sp.trivial);
        CHECK(sp.cmin == 0.0);
    }
    CHECK_THROWS_AS(proposition_slack_at(led, "unknown", p, 1), MissingSeriesError);
}

TEST_CASE("minimal constant is the exact deficit ratio") {
    // force lhs_base = 4, rhs_base = 1, c_terms = 0.5 -> cmin = 6
    EstimateParams p;
    p.s = 2.0;
    p.gamma = 0.0;   // kill the l2mu part of the left side
    p.eta = p.theta_e / 2.0; // kill the dyf part of the left side
    p.zeta = 0.0;
    p.c_cal = 1.0;
    EnergyLedger led;
    double s = p.s;
    for (double t : {0.0, 1.0}) {
        led.add(series_name("u", s + 1), t, 2.0, 1.0);      // lhs inst: 4
        led.add(series_name("u", s + 1.25), t, 1.0, 1.0);   // c_terms: 2 * l2mu = 2
        led.add(series_name("dyu", s + 1), t, 1.0, 1.0);    // rhs 2 eta l2 = 1 @ eta=1/2
        led.add(series_name("dytheta", s + 1), t, 0.0, 1.0);
        led.add(series_name("dyU", s - 0.25), t, 0.0, 1.0);
        led.add(series_name("theta", s + 1), t, 0.0, 1.0);
        led.add(series_name("U", s + 0.25), t, 0.0, 1.0);
        led.add(series_name("lambda", s + 0.75), t, 0.0, 1.0);
    }
    led.init_norms[init_key("u0", s + 1.5)] = 0.0;
    p.M = 0.0;
    SlackPoint sp = proposition_slack_at(led, "est-u", p, 1);
    // lhs = 4; rhs_base = 2 eta l2(dyu) = 1; c_terms picks up the moved
    // left-side piece 2 l2mu(u@s+1.25) = 2 plus the right-side l2mu = 1
    CHECK(sp.lhs == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(sp.cmin == doctest::Approx((4.0 - 1.0) / 3.0).epsilon(1e-12));
    CHECK(!sp.trivial);
}

TEST_CASE("coupling constant matches its frozen oracle") {
    CHECK(coupling_k(1.0, 0.3, 0.002, 1.0, 0.0) ==
          doctest::Approx(18.641193036354327).epsilon(1e-14));
    CHECK_THROWS_AS(coupling_k(1.0, 0.0, 10.0, 1.0, 0.0), DomainError);
}

TEST_CASE("radius fit recovers an exact exponential decay") {
    Grid g(64, 2 * M_PI, 33, 6.0);
    double tau = 0.07;
    Field f(g);
    for (int i = 0; i < g.ny; ++i) {
        double env = std::exp(-g.y(i) * g.y(i));
        for (int j = 0; j < g.nx; ++j) {
            if (j == g.nx / 2) continue;
            f.at(i, j) = env * std::exp(-tau * std::sqrt(angle_bracket(g.xi(j))));
        }
    }
    CHECK(fit_radius(f) == doctest::Approx(tau).epsilon(1e-10));
    CHECK(fit_radius(Field(g)) == 0.0);
}

TEST_CASE("tracked norm list covers every series the estimates read") {
    // guard against the routing tables drifting apart: evaluate every
    // inequality on a ledger holding exactly the tracked series
    EstimateParams p;
    EnergyLedger led;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1e-3);
    for (double t : {0.0, 0.01}) {
        for (auto& [f, sv, k] : tracked_norms(p.s)) led.add(series_name(f, sv, k), t, U(rng), 1.0);
        led.add("positivity_margin", t, 1.0, 1.0);
    }
    for (auto& key : {"u0", "th0", "dyu0", "dyth0", "dxu0", "dxth0", "dy2u0", "dy2th0"})
        for (double sv : {p.s - 1, p.s, p.s + 0.5, p.s + 1, p.s + 1.5})
            led.init_norms[init_key(key, sv)] = 1.0;
    for (const char* tag : kInequalities) {
        SlackPoint sp = proposition_slack_at(led, tag, p, 1); // must not throw
        CHECK(std::isfinite(sp.cmin));
    }
}
