#include "pwh/hybridize.hpp"

#include <algorithm>
#include <cmath>

namespace pwh {

std::string target_form_name(TargetForm f) {
    switch (f) {
        case TargetForm::SwitchedMonomial: return "SwitchedMonomial";
        case TargetForm::SwitchedLinear: return "SwitchedLinear";
        default: return "FixedMode";
    }
}

namespace {

FitParameter rate_param(const std::string& name, double init) {
    double hi = init > 0.0 ? 100.0 * init : 1.0;
    return {name, init, 0.0, hi, ParamKind::Rate};
}

// Splits a prefactor into (rate parameter, species-only monomial). A
// prefactor that is not a single bare parameter gets a fresh parameter
// carrying its current value.
std::pair<int, Monomial> split_prefactor(ReactionNetwork& net, const Reaction& r, const Monomial& m) {
    Monomial species_part{Coef{1.0, {}}, m.powers};
    if (m.coef.scale == 1.0 && m.coef.params.size() == 1 && !net.parameters[m.coef.params[0]].is_const)
        return {m.coef.params[0], species_part};
    auto p = net.parameter_values();
    std::string name = r.name + "_k";
    while (net.parameter_index(name) >= 0 || net.species_index(name) >= 0) name += "_";
    int q = net.add_parameter(name, m.coef.eval(p));
    return {q, species_part};
}

std::string fresh_name(const ReactionNetwork& net, std::string base) {
    while (net.parameter_index(base) >= 0 || net.species_index(base) >= 0) base += "_";
    return base;
}

}  // namespace

HybridizedLaw hybridize_reaction(ReactionNetwork& net, int reaction, Switching classification, int boolean) {
    const Reaction r = net.reactions.at(reaction);
    HybridizedLaw out;
    if (classification == Switching::Switching && boolean < 0)
        throw std::invalid_argument("switching reaction " + r.name + " needs a boolean");

    if (auto* g = std::get_if<law::GoldbeterKoshland>(&r.rate)) {
        auto [k, species_part] = split_prefactor(net, r, g->prefactor);
        Monomial on{Coef{1.0, {k}}, species_part.powers};
        const double kv = net.parameters[k].value;
        if (classification == Switching::Switching)
            out.law = law::SwitchedMonomial{boolean, on};
        else if (classification == Switching::AlwaysOn)
            out.law = law::Mono{on};
        else
            out.law = law::Constant{Coef{0.0, {}}};
        if (classification != Switching::AlwaysOff) out.introduced.push_back(rate_param(net.parameters[k].name, kv));
        return out;
    }
    if (auto* m = std::get_if<law::MichaelisMenten>(&r.rate)) {
        auto [k, species_part] = split_prefactor(net, r, m->prefactor);
        const double kv = net.parameters[k].value;
        const double km = net.parameters[m->km].value;
        auto add_slope = [&]() {
            int q = net.add_parameter(fresh_name(net, net.parameters[k].name + "2"), kv / km);
            out.introduced.push_back(rate_param(net.parameters[q].name, kv / km));
            return q;
        };
        if (classification == Switching::Switching) {
            out.introduced.push_back(rate_param(net.parameters[k].name, kv));
            int k2 = add_slope();
            out.law = law::SwitchedLinear{boolean, species_part, k, k2, m->x};
        } else if (classification == Switching::AlwaysOn) {
            out.introduced.push_back(rate_param(net.parameters[k].name, kv));
            out.law = law::Mono{Monomial{Coef{1.0, {k}}, species_part.powers}};
        } else {
            int k2 = add_slope();
            out.law = law::Linear{species_part, k2, m->x};
        }
        return out;
    }
    throw ModelError("reaction " + r.name + ": cannot hybridize rate law '" + kind_name(r.rate) + "'");
}

HybridizationPlan make_plan(const ReactionNetwork& net, const Trajectory& reference) {
    HybridizationPlan plan;
    auto p = net.parameter_values();
    std::vector<BooleanSchedule> switching;
    for (int r = 0; r < net.n_reactions(); ++r) {
        if (!switching_inequation(net.reactions[r].rate)) continue;
        auto sch = static_schedule(reference, net, r, p);
        ReactionPlan rp;
        rp.reaction = r;
        rp.classification = classify_switching(sch);
        if (rp.classification == Switching::Switching) {
            rp.form = std::holds_alternative<law::GoldbeterKoshland>(net.reactions[r].rate) ? TargetForm::SwitchedMonomial
                                                                                            : TargetForm::SwitchedLinear;
            switching.push_back(sch);
        }
        plan.reactions.push_back(rp);
    }
    if (plan.reactions.empty()) plan.warnings.push_back("no GK or MM reactions found; nothing to hybridize");
    plan.booleans = dedupe_controls(switching);
    for (auto& rp : plan.reactions) {
        if (rp.classification != Switching::Switching) continue;
        for (size_t b = 0; b < plan.booleans.size(); ++b) {
            const auto& rs = plan.booleans[b].reactions;
            if (std::find(rs.begin(), rs.end(), rp.reaction) != rs.end()) rp.boolean = static_cast<int>(b);
        }
    }
    return plan;
}

HybridBuild build_hybrid_model(const ReactionNetwork& net, const HybridizationPlan& plan, Strategy strategy,
                               const Trajectory& reference, const IntegratorConfig& integrator) {
    HybridBuild out;
    ReactionNetwork& model = out.model;
    model = net;
    FitProblem& fp = out.problem;
    fp.strategy = strategy;
    fp.integrator = integrator;

    // Model booleans for the plan's schedules.
    std::vector<int> model_bool(plan.booleans.size());
    for (size_t b = 0; b < plan.booleans.size(); ++b) {
        std::string name = plan.booleans[b].name;
        while (model.boolean_index(name) >= 0) name = "h" + name;
        model_bool[b] = model.add_boolean(name);
    }

    auto in_layout = [&](const std::string& name) {
        return std::any_of(fp.layout.begin(), fp.layout.end(), [&](const auto& f) { return f.name == name; });
    };
    std::vector<bool> thresholds_done(plan.booleans.size(), false);

    for (size_t ri = 0; ri < plan.reactions.size(); ++ri) {
        const auto& rp = plan.reactions[ri];
        const int mb = rp.boolean >= 0 ? model_bool[rp.boolean] : -1;
        auto hl = hybridize_reaction(model, rp.reaction, rp.classification, mb);
        model.reactions[rp.reaction].rate = hl.law;
        for (const auto& f : hl.introduced)
            if (!in_layout(f.name)) fp.layout.push_back(f);
        if (rp.boolean >= 0) fp.flux_signals.push_back(model.reactions[rp.reaction].name);

        // Thresholds follow the last of a run of reactions sharing the boolean.
        const bool run_ends = ri + 1 == plan.reactions.size() || plan.reactions[ri + 1].boolean != rp.boolean;
        if (strategy == Strategy::Dynamic && rp.boolean >= 0 && run_ends && !thresholds_done[rp.boolean]) {
            const auto& sch = plan.booleans[rp.boolean];
            if (!sch.inequation) throw ModelError("boolean " + sch.name + " has no inequation provenance");
            thresholds_done[rp.boolean] = true;
            const auto& ineq = *sch.inequation;
            for (int q : ineq.parameters()) {
                const auto& par = model.parameters[q];
                if (par.is_const || in_layout(par.name)) continue;
                if (ineq.provenance == Provenance::MmInequation) {
                    double xmax = 0.0;
                    for (size_t i = 0; i < reference.size(); ++i)
                        xmax = std::max(xmax, ineq.lhs.eval(std::span<const double>(reference.row(i), reference.n_species()),
                                                            model.parameter_values()));
                    fp.layout.push_back({par.name, par.value, 0.0, 2.0 * std::max(xmax, par.value), ParamKind::Threshold});
                } else {
                    auto f = rate_param(par.name, par.value);
                    f.kind = ParamKind::Threshold;
                    fp.layout.push_back(f);
                }
            }
        }
    }

    // Drivers for the new booleans.
    const double t0 = reference.times.front(), t1 = reference.times.back();
    for (size_t b = 0; b < plan.booleans.size(); ++b) {
        const auto& sch = plan.booleans[b];
        if (strategy == Strategy::Dynamic) {
            const auto& ineq = *sch.inequation;
            Guard g;
            g.name = "g_" + model.booleans[model_bool[b]];
            g.expr = ineq.lhs;
            for (auto t : ineq.rhs.terms) {
                t.coef.scale = -t.coef.scale;
                g.expr.terms.push_back(t);
            }
            g.controls = {model_bool[b]};
            model.guards.push_back(std::move(g));
            continue;
        }
        TimeSchedule ts;
        ts.boolean = model_bool[b];
        ts.initial = sch.intervals.front().value;
        auto times = sch.switch_times();
        for (size_t k = 0; k < times.size(); ++k) {
            std::string name = model.booleans[model_bool[b]] + "_t" + std::to_string(k + 1);
            int q = model.add_parameter(name, times[k], strategy == Strategy::Static);
            ts.times.push_back(q);
            if (strategy == Strategy::Transitions) {
                double prev = k == 0 ? t0 : times[k - 1];
                double next = k + 1 == times.size() ? t1 : times[k + 1];
                double gap = std::min(times[k] - prev, next - times[k]);
                if (gap <= 0.0) gap = (t1 - t0) * 1e-3;
                fp.layout.push_back({name, times[k], times[k] - 0.25 * gap, times[k] + 0.25 * gap, ParamKind::Time});
            }
        }
        model.schedules.push_back(std::move(ts));
    }

    model.validate();
    HybridModel check(model);  // enforces one driver per boolean
    (void)check;

    fp.model = model;
    fp.reference = reference;
    fp.species_signals = model.species;
    return out;
}

}  // namespace pwh
