#include <cmath>
#include <sstream>

#include <doctest.h>

#include "pwh/events.hpp"
#include "pwh/model_io.hpp"

using namespace pwh;

namespace {

Trajectory analytic_trajectory(double dt) {
    auto net = load_model(PWH_DATA_DIR "/analytic_events.model");
    IntegratorConfig cfg;
    cfg.rtol = 1e-10;
    cfg.atol = 1e-12;
    cfg.output_dt = dt;
    return integrate_smooth(net, net.initial, 0.0, 20.0, cfg);
}

}  // namespace

TEST_CASE("derivative extrema of a smooth step") {
    std::vector<double> t, y;
    for (int i = 0; i <= 2000; ++i) {
        t.push_back(i * 0.01);
        y.push_back(std::tanh(4.0 * (t.back() - 7.0)));
    }
    auto ex = series_derivative_extrema(t, y);
    REQUIRE(ex.size() == 1);
    CHECK(std::abs(ex[0] - 7.0) <= 0.02);
}

TEST_CASE("static schedules match analytic crossings") {
    const double dt = 0.05;
    auto net = load_model(PWH_DATA_DIR "/analytic_events.model");
    auto tr = analytic_trajectory(dt);
    struct Case {
        const char* reaction;
        double crossing;
        int first;
    };
    for (auto c : {Case{"RG", 5.0, 0}, Case{"RM1", std::log(10000.0), 0}, Case{"RM2", std::log(10.0), 1}}) {
        CAPTURE(std::string(c.reaction));
        auto sch = static_schedule(tr, net, net.reaction_index(c.reaction));
        auto sw = sch.switch_times();
        REQUIRE(sw.size() == 1);
        CHECK(std::abs(sw[0] - c.crossing) <= 2 * dt);
        CHECK(sch.intervals.front().value == c.first);
        CHECK(classify_switching(sch) == Switching::Switching);
        CHECK(sch.inequation.has_value());
        auto ex = flux_derivative_extrema(tr, tr.reaction_index(c.reaction));
        bool matched = false;
        for (double e : ex) matched = matched || std::abs(e - sw[0]) <= 2 * dt;
        CHECK(matched);
    }
}

TEST_CASE("schedule helpers") {
    std::vector<double> t{0, 1, 2, 3, 4};
    auto s = schedule_from_values("x", t, {1, 1, 0, 0, 1}, Provenance::Manual);
    REQUIRE(s.intervals.size() == 3);
    CHECK(s.switch_times() == std::vector<double>{2.0, 4.0});
    CHECK(s.value_at(0.5) == 1);
    CHECK(s.value_at(2.0) == 0);
    CHECK(expand_schedule(s, t) == std::vector<int>{1, 1, 0, 0, 1});
    CHECK(classify_switching(schedule_from_values("y", t, {1, 1, 1, 1, 1}, Provenance::Manual)) == Switching::AlwaysOn);
    CHECK(classify_switching(schedule_from_values("y", t, {0, 0, 0, 0, 0}, Provenance::Manual)) ==
          Switching::AlwaysOff);
    CHECK(provenance_from_name(provenance_name(Provenance::GkInequation)) == Provenance::GkInequation);
}

TEST_CASE("identical inequations are merged") {
    auto net = parse_model_string(R"(
[species]
A 1
B 2
[parameters]
k = 1
J = 0.01
m = 0.5
[reactions]
r1 : -> A : gk(k; A; B; J; J)
r2 : -> B : gk(k; A; B; J; J)
r3 : -> B : mm(k; A; m)
)");
    IntegratorConfig cfg;
    cfg.output_dt = 0.1;
    auto tr = integrate_smooth(net, net.initial, 0.0, 3.0, cfg);
    std::vector<BooleanSchedule> all;
    for (int r = 0; r < 3; ++r) all.push_back(static_schedule(tr, net, r));
    auto d = dedupe_controls(all);
    REQUIRE(d.size() == 2);
    CHECK(d[0].name == "s1");
    CHECK(d[0].reactions == std::vector<int>{0, 1});
    CHECK(d[1].name == "s2");
    CHECK(d[1].reactions == std::vector<int>{2});
}

TEST_CASE("non-switchable reactions are rejected") {
    auto net = parse_model_string("[species]\nX 1\n[parameters]\nk = 1\n[reactions]\nd : X -> : mono(k*X)\n");
    auto tr = integrate_smooth(net, net.initial, 0.0, 1.0, IntegratorConfig{});
    CHECK_THROWS_AS(static_schedule(tr, net, 0), ModelError);
    CHECK(!switching_inequation(net.reactions[0].rate).has_value());
}

TEST_CASE("schedule csv round trip") {
    auto tr = analytic_trajectory(0.1);
    auto net = load_model(PWH_DATA_DIR "/analytic_events.model");
    std::vector<BooleanSchedule> all;
    for (const char* r : {"RG", "RM1", "RM2"}) all.push_back(static_schedule(tr, net, net.reaction_index(r)));
    auto d = dedupe_controls(all);
    std::stringstream ss;
    write_schedule_csv(ss, d, "hdr");
    auto back = read_schedule_csv(ss);
    REQUIRE(back.size() == d.size());
    for (size_t i = 0; i < d.size(); ++i) {
        CHECK(back[i].name == d[i].name);
        CHECK(back[i].provenance == d[i].provenance);
        REQUIRE(back[i].intervals.size() == d[i].intervals.size());
        for (size_t k = 0; k < d[i].intervals.size(); ++k) {
            CHECK(back[i].intervals[k].t_start == d[i].intervals[k].t_start);
            CHECK(back[i].intervals[k].value == d[i].intervals[k].value);
        }
    }
}
