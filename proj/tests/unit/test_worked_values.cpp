#include <cmath>

#include <doctest.h>

#include "../lp_oracle.hpp"
#include "pwh/events.hpp"
#include "pwh/hybridize.hpp"
#include "pwh/mode_control.hpp"
#include "pwh/model_io.hpp"

using namespace pwh;

namespace {

IntegratorConfig reference_config() {
    IntegratorConfig c;
    c.rtol = 1e-8;
    c.atol = 1e-10;
    c.output_dt = 0.1;
    c.max_step = 0.5;
    return c;
}

struct Subset {
    ReactionNetwork net = load_model(PWH_DATA_DIR "/cell_cycle_subset.model");
    Trajectory ref = integrate(net, net.parameter_values(), net.initial, 0.0, 69.3, reference_config());
    HybridizationPlan plan = make_plan(net, ref);
};

const Subset& subset() {
    static const Subset s;
    return s;
}

double rate_of(const ReactionNetwork& net, const std::string& r, const std::vector<double>& u,
               const std::vector<int>& s) {
    auto p = net.parameter_values();
    return eval_rate(net.reactions[net.reaction_index(r)].rate, u, s, p);
}

}  // namespace

TEST_CASE("mm arithmetic") { CHECK(eval_mm(0.15, 1.0, 3.0) == doctest::Approx(0.1125).epsilon(1e-15)); }

TEST_CASE("hybrid rates at the fitted values") {
    const auto& ss = subset();
    auto h = build_hybrid_model(ss.net, ss.plan, Strategy::Dynamic, ss.ref).model;
    apply_parameter_file(h, PWH_DATA_DIR "/cell_cycle_fitted.params");
    std::vector<double> u(h.n_species(), 0.0);
    u[h.species_index("Mass")] = 2.0;
    u[h.species_index("CycB")] = 1.5;
    std::vector<int> s(h.n_booleans(), 0);
    s[h.boolean_index("s4")] = 1;
    CHECK(rate_of(h, "R4", u, s) == doctest::Approx(0.066598).epsilon(1e-12));
    CHECK(rate_of(h, "R6", u, s) == doctest::Approx(0.072111).epsilon(1e-12));
    s[h.boolean_index("s5")] = 1;
    CHECK(rate_of(h, "R6", u, s) == 0.0);
}

TEST_CASE("switched linear form of R10") {
    const auto& ss = subset();
    auto h = build_hybrid_model(ss.net, ss.plan, Strategy::Dynamic, ss.ref).model;
    const auto& law = std::get<law::SwitchedLinear>(h.reactions[h.reaction_index("R10")].rate);
    CHECK(h.booleans[law.boolean] == "s7");
    CHECK(h.parameters[law.k_sat].name == "ki20");
    CHECK(h.parameters[law.k_lin].name == "ki202");
    const auto& r4 = std::get<law::SwitchedMonomial>(h.reactions[h.reaction_index("R4")].rate);
    CHECK(h.booleans[r4.boolean] == "s4");
    CHECK(monomial_to_string(h, r4.on) == "ksb_pp*Mass");
}

TEST_CASE("layouts per strategy") {
    const auto& ss = subset();
    auto st = build_hybrid_model(ss.net, ss.plan, Strategy::Static, ss.ref);
    for (const auto& f : st.problem.layout) CHECK(f.kind != ParamKind::Time);
    auto dy = build_hybrid_model(ss.net, ss.plan, Strategy::Dynamic, ss.ref);
    int thresholds = 0;
    for (const auto& f : dy.problem.layout) {
        if (f.name == "kifb" || f.name == "Ji20") {
            CHECK(f.kind == ParamKind::Threshold);
            ++thresholds;
        }
    }
    CHECK(thresholds == 2);
}

TEST_CASE("hand-summed fluxes of the toy oscillator") {
    auto net = load_model(PWH_DATA_DIR "/synthetic3.model");
    std::vector<double> u{0.3, 0.2, 0.9}, du(3), flux(6);
    auto p = net.parameter_values();
    rhs(net, u, {}, p, du);
    eval_fluxes(net, u, {}, p, flux);
    const double rx = 2.0 * eval_gk(1.0, 0.9, 0.001, 0.001);
    const double rxd = 1.0 * 0.3 / (0.3 + 0.02);
    CHECK(flux[0] == doctest::Approx(rx).epsilon(1e-14));
    CHECK(du[0] == doctest::Approx(rx - rxd).epsilon(1e-14));
    CHECK(du[1] == doctest::Approx(1.0 * 0.3 - 0.2 * 0.2).epsilon(1e-14));
    CHECK(du[2] == doctest::Approx(1.0 * 0.2 - 0.2 * 0.9).epsilon(1e-14));
}

TEST_CASE("guard boundary belongs to the on state") {
    auto net = parse_model_string("[species]\nU 0.5\n[parameters]\nh = 0.5\n[booleans]\ns\n[reactions]\n"
                                  "r : -> U : switched(s; h)\n[guards]\ng : s : U >= h\n");
    auto gs = compile_guards(net, net.parameter_values());
    CHECK(eval_guards(gs, std::vector<double>{0.5}) == std::vector<int>{1});
}

TEST_CASE("unit-rate crossing time") {
    auto net = parse_model_string("[species]\nU 0\n[parameters]\none = 1\n[booleans]\ns\n[reactions]\n"
                                  "r : -> U : const(one)\n[guards]\ng : s : U >= one\n");
    IntegratorConfig c;
    auto tr = integrate(net, net.parameter_values(), net.initial, 0.0, 2.0, c);
    REQUIRE(tr.events.size() == 1);
    CHECK(std::abs(tr.events[0].t - 1.0) <= 1e-9 * 2.0);
}

TEST_CASE("toy period converges with tolerance") {
    auto net = load_model(PWH_DATA_DIR "/synthetic3.model");
    IntegratorConfig loose, tight;
    loose.rtol = 1e-6;
    loose.atol = 1e-9;
    loose.output_dt = 0.01;
    tight = loose;
    tight.rtol = 1e-8;
    tight.atol = 1e-11;
    auto a = detect_period(integrate_smooth(net, net.initial, 0.0, 130.0, loose));
    auto b = detect_period(integrate_smooth(net, net.initial, 0.0, 130.0, tight));
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(std::abs(*a - *b) / *b < 1e-3);
}

TEST_CASE("division intervals repeat") {
    const auto& ss = subset();
    auto tr = integrate(ss.net, ss.net.parameter_values(), ss.net.initial, 0.0, 4 * 69.3136 + 1.0, reference_config());
    std::vector<double> t;
    for (const auto& e : tr.events)
        if (e.jumped) t.push_back(e.t);
    REQUIRE(t.size() >= 4);
    auto per = detect_period(tr);
    REQUIRE(per.has_value());
    for (size_t i = 1; i < t.size(); ++i) CHECK(std::abs((t[i] - t[i - 1]) / *per - 1.0) < 0.02);
    CHECK(*per == doctest::Approx(69.3136).epsilon(1e-3));
}

TEST_CASE("logistic flux has one derivative extremum at its centre") {
    std::vector<double> t, y;
    for (int i = 0; i <= 1000; ++i) {
        t.push_back(0.02 * i);
        y.push_back(1.0 / (1.0 + std::exp(-3.0 * (t.back() - 8.3))));
    }
    auto ex = series_derivative_extrema(t, y);
    REQUIRE(ex.size() == 1);
    CHECK(std::abs(ex[0] - 8.3) <= 0.02);
}

TEST_CASE("R4 extrema align with v1 = v2 crossings") {
    const auto& ss = subset();
    int r4 = ss.net.reaction_index("R4");
    auto sw = static_schedule(ss.ref, ss.net, r4).switch_times();
    auto ex = flux_derivative_extrema(ss.ref, r4);
    REQUIRE(!sw.empty());
    for (double s : sw) {
        double nearest = INFINITY;
        for (double e : ex) nearest = std::min(nearest, std::abs(e - s));
        CHECK(nearest <= 2 * 0.1 + 1e-9);
    }
}

TEST_CASE("R10 schedule follows Cdc20A against Ji20") {
    const auto& ss = subset();
    auto sch = static_schedule(ss.ref, ss.net, ss.net.reaction_index("R10"));
    const int x = ss.net.species_index("Cdc20A");
    const double km = ss.net.parameters[ss.net.parameter_index("Ji20")].value;
    auto vals = expand_schedule(sch, ss.ref.times);
    for (size_t i = 0; i < ss.ref.size(); ++i) CHECK(vals[i] == (ss.ref.state(i, x) >= km ? 1 : 0));
}

TEST_CASE("four crossings give five intervals") {
    std::vector<double> t;
    std::vector<int> v;
    for (int i = 0; i < 70; ++i) {
        t.push_back(i * 0.1);
        v.push_back(std::sin(2.0 * t.back() + 0.3) >= 0.0 ? 1 : 0);
    }
    auto s = schedule_from_values("x", t, v, Provenance::MmInequation);
    CHECK(s.intervals.size() == 5);
    for (size_t k = 1; k < s.intervals.size(); ++k) CHECK(s.intervals[k].value != s.intervals[k - 1].value);
}

TEST_CASE("shipped s4 guard agrees with the schedule inside its intervals") {
    const auto& ss = subset();
    auto gk = load_model(PWH_DATA_DIR "/cell_cycle_gk_controlled.model");
    auto gs = compile_guards(gk, gk.parameter_values());
    int g = -1;
    for (size_t k = 0; k < gk.guards.size(); ++k)
        if (gk.guards[k].name == "g_s4") g = static_cast<int>(k);
    REQUIRE(g >= 0);
    const auto& sch = ss.plan.booleans.at(3);
    // The weights were fitted to another trajectory; the short post-division
    // transient is not expected to agree, the long phases are.
    for (const auto& iv : sch.intervals) {
        if (iv.t_end - iv.t_start < 5.0) continue;
        double mid = 0.5 * (iv.t_start + iv.t_end);
        size_t i = static_cast<size_t>(std::lround(mid / 0.1));
        CAPTURE(mid);
        CHECK(gs[g].bit(std::span<const double>(ss.ref.row(i), ss.ref.n_species())) == (iv.value == 1));
    }
}

TEST_CASE("s4 weight signs where the data fix them") {
    const auto& ss = subset();
    const auto& sch = ss.plan.booleans.at(3);
    REQUIRE(ss.net.reactions[sch.reactions.at(0)].name == "R4");
    std::vector<int> c4{ss.net.species_index("CycB"), ss.net.species_index("Mass"), ss.net.species_index("pB")};
    auto sol = solve_control_lp(build_control_lp(ss.ref, sch, c4));
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.epsilon <= 0.0);
    CHECK(sol.w[0] > 0.0);
    CHECK(sol.w[1] < 0.0);
}

TEST_CASE("GK booleans are separable over all species") {
    const auto& ss = subset();
    std::vector<int> all;
    for (int k = 0; k < ss.net.n_species(); ++k) all.push_back(k);
    for (int b = 0; b < 4; ++b) {
        CAPTURE(b);
        CHECK(solve_control_lp(build_control_lp(ss.ref, ss.plan.booleans[b], all)).epsilon <= 0.0);
    }
}

TEST_CASE("two-constraint epsilon LP") {
    // min eps  s.t.  w - 1 + eps >= 0,  -(2w - 1) + eps >= 0
    Lp lp;
    lp.c = {0.0, 1.0};
    lp.rows = {{1.0, 1.0}, {-2.0, 1.0}};
    lp.b = {1.0, -1.0};
    lp.lower = {-10.0, -10.0};
    lp.upper = {10.0, 10.0};
    auto r = simplex_solve(lp);
    REQUIRE(r.status == LpStatus::Optimal);
    auto oracle = test::vertex_enumeration(lp);
    REQUIRE(oracle.has_value());
    CHECK(r.objective == doctest::Approx(*oracle).epsilon(1e-12));
    CHECK(r.objective == doctest::Approx(1.0 / 3.0));
    CHECK(r.x[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("shipped guards in a fresh simulation") {
    const auto& ss = subset();
    auto gk = load_model(PWH_DATA_DIR "/cell_cycle_gk_controlled.model");
    EventSchedule sch(ss.plan.booleans.begin(), ss.plan.booleans.begin() + 4);
    ValidateConfig vc;
    vc.integrator = reference_config();
    auto v = validate_controls(HybridModel(gk), sch, ss.ref, vc);
    CHECK(v.simulated);
    REQUIRE(v.booleans.size() == 4);
    for (const auto& b : v.booleans) {
        CHECK(b.samples > 0);
        if (!v.diverged)
            CHECK(b.event_shifts.size() == sch[&b - v.booleans.data()].switch_times().size());
    }
}
