#include <algorithm>
#include <cmath>
#include <sstream>

#include <doctest.h>

#include "../control_fixtures.hpp"
#include "pwh/mode_control.hpp"
#include "pwh/model_io.hpp"

using namespace pwh;

namespace {

ReactionNetwork guarded_network(const Trajectory& traj) {
    std::string text = "[species]\n";
    for (const auto& s : traj.species) text += s + " 1\n";
    text += "[parameters]\nk = 1\n[booleans]\ns1\n[reactions]\nr : -> X0 : switched(s1; k)\n";
    return parse_model_string(text);
}

}  // namespace

TEST_CASE("samples skip switch windows and keep every interval") {
    auto ci = test::separable_instance(2, 0, 1);
    ControlLpConfig cfg;
    auto idx = control_samples(ci.traj, ci.schedule, cfg);
    auto sw = ci.schedule.switch_times();
    REQUIRE(!sw.empty());
    for (size_t i : idx)
        for (double t : sw) CHECK(std::abs(ci.traj.times[i] - t) > 2 * 0.25 - 1e-12);
    cfg.stride = 5;
    CHECK(control_samples(ci.traj, ci.schedule, cfg).size() < idx.size());

    // A single interval still produces a single deduplicated constraint set.
    Trajectory flat;
    flat.species = {"A"};
    for (int i = 0; i < 10; ++i) {
        flat.times.push_back(i);
        flat.states.push_back(2.0);
    }
    auto one = schedule_from_values("s", flat.times, std::vector<int>(10, 1), Provenance::Manual);
    auto lp = build_control_lp(flat, one, {0});
    CHECK(lp.rows.size() == 1);
    auto sol = solve_control_lp(lp);
    CHECK(sol.epsilon <= 0.0);
}

TEST_CASE("separable schedule gives nonpositive epsilon and no mismatches") {
    auto ci = test::separable_instance(3, 1, 4);
    auto lp = build_control_lp(ci.traj, ci.schedule, {0, 1, 2});
    auto sol = solve_control_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.epsilon <= 0.0);
    auto net = guarded_network(ci.traj);
    install_guard(net, "s1", lp.species, sol.w);
    ValidateConfig vc;
    vc.simulate = false;
    auto v = validate_controls(HybridModel(net), {ci.schedule}, ci.traj, vc);
    REQUIRE(v.booleans.size() == 1);
    CHECK(v.booleans[0].samples > 0);
    CHECK(v.booleans[0].mismatches == 0);
}

TEST_CASE("inseparable schedule gives positive epsilon") {
    auto ci = test::inseparable_instance(3, 9);
    auto lp = build_control_lp(ci.traj, ci.schedule, {0, 1, 2});
    auto sol = solve_control_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.epsilon > 0.0);
    CHECK(!sol.clamped);

    // Replay mismatches are exactly the constraints violated without slack.
    auto net = guarded_network(ci.traj);
    install_guard(net, "s1", lp.species, sol.w);
    ValidateConfig vc;
    vc.simulate = false;
    auto v = validate_controls(HybridModel(net), {ci.schedule}, ci.traj, vc);
    auto idx = control_samples(ci.traj, ci.schedule, vc.lp);
    auto expected = expand_schedule(ci.schedule, ci.traj.times);
    long violated = 0;
    for (size_t i : idx) {
        double z = 0.0;
        for (size_t k = 0; k < lp.species.size(); ++k) z += sol.w[k] * ci.traj.state(i, lp.species[k]);
        if ((expected[i] ? 1.0 : -1.0) * (z - 1.0) < 0.0 || (!expected[i] && z == 1.0)) ++violated;
    }
    CHECK(v.booleans[0].mismatches == violated);
    CHECK(violated > 0);
}

TEST_CASE("epsilon is invariant under species rescaling") {
    auto ci = test::inseparable_instance(2, 3);
    auto base = solve_control_lp(build_control_lp(ci.traj, ci.schedule, {0, 1}));
    auto scaled = ci.traj;
    for (size_t i = 0; i < scaled.size(); ++i) scaled.states[i * 2 + 1] *= 1000.0;
    auto s = solve_control_lp(build_control_lp(scaled, ci.schedule, {0, 1}));
    CHECK(s.epsilon == doctest::Approx(base.epsilon).epsilon(1e-6));
    CHECK(s.w[1] == doctest::Approx(base.w[1] / 1000.0).epsilon(1e-6));
}

TEST_CASE("GA agrees with exhaustive search") {
    auto ci = test::separable_instance(6, 3, 21);
    std::vector<int> pool{0, 1, 2, 3, 4, 5};
    GaConfig cfg;
    cfg.population = 24;
    cfg.generations = 30;
    auto ex = exhaustive_select_controls(ci.traj, ci.schedule, pool, cfg.lp);
    for (int k : pool) {
        auto one = solve_control_lp(build_control_lp(ci.traj, ci.schedule, {k}, cfg.lp));
        if (k == 3) CHECK(one.epsilon <= 0.0);
        else CHECK(one.epsilon > 0.0);
    }
    CHECK(std::count(ex.subset.begin(), ex.subset.end(), 3) == 1);
    CHECK(ex.score <= 0.0);
    auto ga = ga_select_controls(ci.traj, ci.schedule, pool, cfg, 5);
    CHECK(ga.subset == ex.subset);
    CHECK(ga.score == ex.score);
    REQUIRE(ga.best_history.size() == 31);
    for (size_t i = 1; i < ga.best_history.size(); ++i) CHECK(ga.best_history[i] <= ga.best_history[i - 1]);
    auto again = ga_select_controls(ci.traj, ci.schedule, pool, cfg, 5);
    CHECK(again.best_history == ga.best_history);
}

TEST_CASE("installing guards") {
    auto net = parse_model_string(R"(
[species]
A 1
B 1
[parameters]
k = 1
t1 = 2
[booleans]
s
u
[reactions]
r : -> A : switched(s; k)
q : -> B : switched(u; k)
[guards]
g : s, u : A >= B
[schedules]
)");
    install_guard(net, "s", {1}, {0.5});
    REQUIRE(net.guards.size() == 2);
    CHECK(net.guards[0].controls == std::vector<int>{1});
    CHECK(net.guards[1].name == "g_s");
    auto p = net.parameter_values();
    auto gs = compile_guards(net, p);
    CHECK(gs[1].value(std::vector<double>{0.0, 2.0}) == doctest::Approx(0.0));
    install_guard(net, "u", {0, 1}, {1.0, -2.0});
    CHECK(net.guards.size() == 2);
    CHECK_NOTHROW(HybridModel{net});
    std::ostringstream os;
    write_model(os, net);
    CHECK_NOTHROW(parse_model_string(os.str()));
}

TEST_CASE("control report") {
    CHECK(normalize_weights({2.0, -4.0}) == std::vector<double>{0.5, -1.0});
    std::ostringstream os;
    write_control_report(os, {{"s1", {"A", "B"}, {0.5, -1.0}, -0.2, 0.0}}, "hdr");
    CHECK(os.str().find("boolean,species,weights,epsilon,mismatch_fraction") != std::string::npos);
    CHECK(os.str().find("s1,A;B,") != std::string::npos);
}
