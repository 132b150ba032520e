#include <fstream>
#include <sstream>

#include <doctest.h>

#include "pwh/hybridize.hpp"
#include "pwh/model_io.hpp"

using namespace pwh;

namespace {

struct CellCycle {
    ReactionNetwork net;
    Trajectory ref;
    HybridizationPlan plan;
    CellCycle() {
        net = load_model(PWH_DATA_DIR "/cell_cycle_subset.model");
        IntegratorConfig c;
        c.rtol = 1e-8;
        c.atol = 1e-10;
        c.output_dt = 0.1;
        c.max_step = 0.5;
        ref = integrate(net, net.parameter_values(), net.initial, 0.0, 69.3, c);
        plan = make_plan(net, ref);
    }
};

const CellCycle& cell_cycle() {
    static const CellCycle cc;
    return cc;
}

std::vector<std::string> names(const ReactionNetwork& net, const std::vector<int>& rs) {
    std::vector<std::string> out;
    for (int r : rs) out.push_back(net.reactions[r].name);
    return out;
}

}  // namespace

TEST_CASE("cell-cycle subset yields the nine controls") {
    const auto& cc = cell_cycle();
    const std::vector<std::vector<std::string>> expected{{"R1", "R5"}, {"R2"},  {"R3"},  {"R4"},  {"R6"},
                                                         {"R8"},       {"R10"}, {"R11", "R12"}, {"R13", "R14", "R15"}};
    REQUIRE(cc.plan.booleans.size() == expected.size());
    for (size_t b = 0; b < expected.size(); ++b) {
        CHECK(cc.plan.booleans[b].name == "s" + std::to_string(b + 1));
        CHECK(names(cc.net, cc.plan.booleans[b].reactions) == expected[b]);
    }
    for (const auto& rp : cc.plan.reactions) {
        const auto& name = cc.net.reactions[rp.reaction].name;
        if (name == "R7" || name == "R9") {
            CHECK(rp.form == TargetForm::FixedMode);
            CHECK(rp.classification == Switching::AlwaysOn);
        }
        bool gk = std::holds_alternative<law::GoldbeterKoshland>(cc.net.reactions[rp.reaction].rate);
        if (rp.form != TargetForm::FixedMode)
            CHECK(rp.form == (gk ? TargetForm::SwitchedMonomial : TargetForm::SwitchedLinear));
    }
}

TEST_CASE("strategies differ in parameter count") {
    const auto& cc = cell_cycle();
    auto s = build_hybrid_model(cc.net, cc.plan, Strategy::Static, cc.ref);
    auto t = build_hybrid_model(cc.net, cc.plan, Strategy::Transitions, cc.ref);
    auto d = build_hybrid_model(cc.net, cc.plan, Strategy::Dynamic, cc.ref);
    CHECK(s.problem.layout.size() == 23);
    // Two switch times per boolean over one period.
    CHECK(t.problem.layout.size() == 23 + 2 * 9);
    CHECK(d.problem.layout.size() == 45);
    CHECK(s.model.schedules.size() == 9);
    CHECK(d.model.schedules.empty());
    CHECK(d.model.guards.size() == 10);
    for (const auto& p : t.problem.layout)
        if (p.kind == ParamKind::Time) CHECK(p.lower < p.initial);
    CHECK_NOTHROW(HybridModel(d.model));
    CHECK_NOTHROW(HybridModel(s.model));
}

TEST_CASE("dynamic layout follows the fitted parameter file order") {
    const auto& cc = cell_cycle();
    auto d = build_hybrid_model(cc.net, cc.plan, Strategy::Dynamic, cc.ref);
    std::ifstream in(PWH_DATA_DIR "/cell_cycle_fitted.params");
    std::vector<std::string> table;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        table.push_back(line.substr(0, line.find(' ')));
    }
    std::vector<std::string> layout;
    for (const auto& p : d.problem.layout) layout.push_back(p.name);
    CHECK(layout == table);
    auto fitted = d.model;
    CHECK_NOTHROW(apply_parameter_file(fitted, PWH_DATA_DIR "/cell_cycle_fitted.params"));
}

TEST_CASE("hybridized laws") {
    auto net = load_model(PWH_DATA_DIR "/cell_cycle_subset.model");
    int r8 = net.reaction_index("R8");
    int b = net.add_boolean("s6");
    auto h = hybridize_reaction(net, r8, Switching::Switching, b);
    const auto& sl = std::get<law::SwitchedLinear>(h.law);
    CHECK(net.parameters[sl.k_lin].name == "kiie2");
    CHECK(net.parameters[sl.k_lin].value ==
          doctest::Approx(net.parameters[net.parameter_index("kiie")].value /
                          net.parameters[net.parameter_index("Jiie")].value));
    int r7 = net.reaction_index("R7");
    auto on = hybridize_reaction(net, r7, Switching::AlwaysOn, -1);
    const auto& mono = std::get<law::Mono>(on.law);
    std::ostringstream os;
    os << monomial_to_string(net, mono.m);
    CHECK(os.str() == "kaie*CycB");
    int r1 = net.reaction_index("R1");
    auto off = hybridize_reaction(net, r1, Switching::AlwaysOff, -1);
    CHECK(std::holds_alternative<law::Constant>(off.law));
}

TEST_CASE("mass-action only model is left unchanged") {
    auto net = parse_model_string("[species]\nX 1\n[parameters]\nk = 1\n[reactions]\nd : X -> : mono(k*X)\n");
    auto tr = integrate_smooth(net, net.initial, 0.0, 1.0, IntegratorConfig{});
    auto plan = make_plan(net, tr);
    CHECK(plan.booleans.empty());
    CHECK(!plan.warnings.empty());
    auto b = build_hybrid_model(net, plan, Strategy::Dynamic, tr);
    std::ostringstream a, c;
    write_model(a, net);
    write_model(c, b.model);
    CHECK(a.str() == c.str());
    CHECK(b.problem.layout.empty());
}
